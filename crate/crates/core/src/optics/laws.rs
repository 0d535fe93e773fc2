use std::fmt;

use super::Direction3;

/// Returned by [`refract`] when Snell's law has no real solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TotalInternalReflection;

impl fmt::Display for TotalInternalReflection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("total internal reflection")
    }
}

impl std::error::Error for TotalInternalReflection {}

/// Mirror reflection of `direction` about the surface `normal`. The normal may
/// face either side.
pub fn reflect(direction: &Direction3, normal: &Direction3) -> Direction3 {
    let d = direction.as_ref();
    let n = normal.as_ref();
    Direction3::new_normalize(d - 2.0 * d.dot(n) * n)
}

/// Vector form of Snell's law, `n_in sin θ_in = n_out sin θ_out`.
///
/// The normal may face either side; it is flipped internally to oppose the
/// incoming direction.
pub fn refract(
    direction: &Direction3,
    normal: &Direction3,
    n_in: f64,
    n_out: f64,
) -> Result<Direction3, TotalInternalReflection> {
    let d = direction.as_ref();
    let mut n = normal.into_inner();
    let mut cos_in = -d.dot(&n);
    if cos_in < 0.0 {
        n = -n;
        cos_in = -cos_in;
    }
    let ratio = n_in / n_out;
    let k = 1.0 - ratio * ratio * (1.0 - cos_in * cos_in);
    if k < 0.0 {
        return Err(TotalInternalReflection);
    }
    let t = ratio * d + (ratio * cos_in - k.sqrt()) * n;
    Ok(Direction3::new_normalize(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{direction, Vec3};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng) -> Direction3 {
        loop {
            let v = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let norm = v.norm();
            if norm > 0.1 && norm <= 1.0 {
                return Direction3::new_normalize(v);
            }
        }
    }

    fn sin_angle(d: &Direction3, n: &Direction3) -> f64 {
        d.cross(n).norm()
    }

    #[test]
    fn normal_incidence_reverses() {
        let d = direction(0.0, 0.0, -1.0);
        let n = direction(0.0, 0.0, 1.0);
        let r = reflect(&d, &n);
        assert_eq!(r.into_inner(), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn forty_five_degrees_deflects_ninety() {
        let d = direction(1.0, 0.0, -1.0);
        let n = direction(0.0, 0.0, 1.0);
        let r = reflect(&d, &n);
        assert!((d.dot(&r)).abs() < 1e-15);
        assert!((r.x - d.x).abs() < 1e-15 && (r.z + d.z).abs() < 1e-15);
    }

    #[test]
    fn reflection_properties_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let d = random_unit(&mut rng);
            let n = random_unit(&mut rng);
            let r = reflect(&d, &n);
            assert!((r.norm() - 1.0).abs() < 1e-12);
            assert!((d.dot(&n) + r.dot(&n)).abs() < 1e-12);
            // coplanar with d and n
            assert!(d.cross(&n).dot(&r).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_indices_leave_direction_unchanged() {
        let d = direction(0.3, -0.2, -0.9);
        let n = direction(0.1, 0.0, 1.0);
        let t = refract(&d, &n, 1.49, 1.49).unwrap();
        assert!((t.into_inner() - d.into_inner()).norm() < 1e-15);
    }

    #[test]
    fn thirty_degrees_into_acrylic() {
        let theta = 30f64.to_radians();
        let d = direction(theta.sin(), 0.0, -theta.cos());
        let n = direction(0.0, 0.0, 1.0);
        let t = refract(&d, &n, 1.0, 1.49).unwrap();
        let out = t.x.atan2(-t.z);
        // arcsin(0.5 / 1.49) = 19.6072°
        let expected = (0.5f64 / 1.49).asin();
        assert!((out - expected).abs() < 1e-12);
        assert!((out.to_degrees() - 19.6072).abs() < 1e-3);
    }

    #[test]
    fn sixty_degrees_out_of_acrylic_is_tir() {
        let theta = 60f64.to_radians();
        let d = direction(theta.sin(), 0.0, theta.cos());
        let n = direction(0.0, 0.0, 1.0);
        assert_eq!(refract(&d, &n, 1.49, 1.0), Err(TotalInternalReflection));
        // just inside the 42.16° critical angle still transmits
        let critical = (1.0f64 / 1.49).asin();
        assert!((critical.to_degrees() - 42.16).abs() < 0.01);
        let inside = critical - 1e-6;
        let d = direction(inside.sin(), 0.0, inside.cos());
        assert!(refract(&d, &n, 1.49, 1.0).is_ok());
    }

    #[test]
    fn snell_and_coplanarity_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for _ in 0..10_000 {
            let d = random_unit(&mut rng);
            let n = random_unit(&mut rng);
            let n_in = rng.random_range(1.0..2.0);
            let n_out = rng.random_range(1.0..2.0);
            match refract(&d, &n, n_in, n_out) {
                Ok(t) => {
                    assert!((t.norm() - 1.0).abs() < 1e-12);
                    let lhs = n_in * sin_angle(&d, &n);
                    let rhs = n_out * sin_angle(&t, &n);
                    assert!((lhs - rhs).abs() < 1e-12, "{lhs} vs {rhs}");
                    assert!(d.cross(&n).dot(&t).abs() < 1e-12);
                    // transmitted ray stays on the far side of the interface
                    assert!(d.dot(&n).signum() == t.dot(&n).signum());
                    checked += 1;
                }
                Err(TotalInternalReflection) => assert!(n_in * sin_angle(&d, &n) > n_out),
            }
        }
        assert!(checked > 5_000);
    }

    proptest! {
        #[test]
        fn refraction_with_swapped_media_inverts(
            theta in 0.0f64..1.4,
            phi in 0.0f64..std::f64::consts::TAU,
            n_in in 1.0f64..2.0,
            n_out in 1.0f64..2.0,
        ) {
            let d = direction(theta.sin() * phi.cos(), theta.sin() * phi.sin(), -theta.cos());
            let n = direction(0.0, 0.0, 1.0);
            if let Ok(t) = refract(&d, &n, n_in, n_out) {
                let back = refract(&Direction3::new_normalize(-t.into_inner()), &n, n_out, n_in).unwrap();
                let recovered = -back.into_inner();
                prop_assert!((recovered - d.into_inner()).norm() < 1e-10);
            }
        }
    }
}
