use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{aperture_solid_angle, effective_na, CollectionError, CollectionGeometry, ScatterModel};
use crate::optics::{reflect, Direction3, Ray, Vec3};

pub const MIN_MC_SAMPLES: u64 = 10_000;
const BLOCK: u64 = 1 << 16;
const QUADRATURE_AZIMUTHS: usize = 720;
const FOUR_PI: f64 = 4.0 * PI;

/// Collection budget in steradians with binomial standard errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CollectionReport {
    pub samples: u64,
    pub seed: u64,
    /// Aperture solid angle by quadrature of the aperture outline.
    pub analytic_total_sr: f64,
    pub total_sr: f64,
    pub total_stderr_sr: f64,
    pub blocked_sr: f64,
    pub blocked_stderr_sr: f64,
    pub scatter_fraction: f64,
    pub scatter_stderr: f64,
    pub effective_sr: f64,
    pub effective_stderr_sr: f64,
    pub effective_na: f64,
}

#[derive(Default, Clone, Copy)]
struct Tally {
    hits: u64,
    blocked: u64,
    scattered: u64,
}

impl std::ops::Add for Tally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            hits: self.hits + o.hits,
            blocked: self.blocked + o.blocked,
            scattered: self.scattered + o.scattered,
        }
    }
}

fn run_block(g: &CollectionGeometry, seed: u64, block: u64, count: u64) -> Tally {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(block);
    let traced = matches!(g.scatter, ScatterModel::TracedMask);
    let mut t = Tally::default();
    for _ in 0..count {
        let cos_theta = 2.0 * rng.random::<f64>() - 1.0;
        let phi = TAU * rng.random::<f64>();
        let sin_theta = (1.0 - cos_theta * cos_theta).max(0.0).sqrt();
        let d = Direction3::new_unchecked(Vec3::new(sin_theta * phi.cos(), sin_theta * phi.sin(), cos_theta));
        let Ok(hit) = g.mirror.intersect(&Ray::new(g.ion, d)) else {
            continue;
        };
        t.hits += 1;
        if g.occluders.iter().any(|o| o.blocks_segment(&g.ion, &d, hit.distance)) {
            t.blocked += 1;
            continue;
        }
        if traced {
            let out = reflect(&d, &hit.normal);
            if g.occluders
                .iter()
                .any(|o| o.blocks_segment(&hit.point, &out, f64::INFINITY))
            {
                t.scattered += 1;
            }
        }
    }
    t
}

/// Monte Carlo collection budget from directions uniform over 4π.
///
/// Samples are drawn in fixed blocks, each from its own stream of a
/// generator seeded with `seed`, so the result does not depend on thread
/// scheduling.
pub fn solid_angle_mc(
    geometry: &CollectionGeometry,
    samples: u64,
    seed: u64,
) -> Result<CollectionReport, CollectionError> {
    if samples < MIN_MC_SAMPLES {
        return Err(CollectionError::InvalidArgument(format!(
            "need at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    geometry.validate()?;
    let blocks = samples.div_ceil(BLOCK);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| run_block(geometry, seed, b, BLOCK.min(samples - b * BLOCK)))
        .reduce(Tally::default, |a, b| a + b);

    let n = samples as f64;
    let binomial = |k: u64| {
        let p = k as f64 / n;
        (FOUR_PI * p, FOUR_PI * (p * (1.0 - p) / n).sqrt())
    };
    let (total_sr, total_stderr_sr) = binomial(tally.hits);
    let (blocked_sr, blocked_stderr_sr) = binomial(tally.blocked);
    let (open_sr, open_stderr_sr) = binomial(tally.hits - tally.blocked);
    let open = tally.hits - tally.blocked;
    let (scatter_fraction, scatter_stderr) = match geometry.scatter {
        ScatterModel::Fraction { fraction } => (fraction, 0.0),
        ScatterModel::TracedMask if open > 0 => {
            let f = tally.scattered as f64 / open as f64;
            (f, (f * (1.0 - f) / open as f64).sqrt())
        }
        ScatterModel::TracedMask => (0.0, 0.0),
    };
    let effective_sr = (total_sr - blocked_sr) * (1.0 - scatter_fraction);
    let effective_stderr_sr =
        ((open_stderr_sr * (1.0 - scatter_fraction)).powi(2) + (open_sr * scatter_stderr).powi(2)).sqrt();
    Ok(CollectionReport {
        samples,
        seed,
        analytic_total_sr: aperture_solid_angle(geometry, QUADRATURE_AZIMUTHS),
        total_sr,
        total_stderr_sr,
        blocked_sr,
        blocked_stderr_sr,
        scatter_fraction,
        scatter_stderr,
        effective_sr,
        effective_stderr_sr,
        effective_na: effective_na(effective_sr.min(TAU))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::cap_solid_angle;
    use crate::optics::{Aperture, Point3, Surface};
    use crate::presets;

    fn geometry(na: f64, with_rods: bool, scatter: ScatterModel) -> CollectionGeometry {
        CollectionGeometry {
            mirror: Surface::sphere(
                20.0,
                -10.0,
                Aperture::Circular {
                    radius_mm: presets::mirror_aperture_radius(20.0, na),
                },
            )
            .unwrap(),
            ion: Point3::origin(),
            occluders: if with_rods { presets::trap_rods() } else { vec![] },
            scatter,
        }
    }

    #[test]
    fn open_cap_within_three_sigma() {
        let g = geometry(f64::sin(PI / 3.0), false, ScatterModel::Fraction { fraction: 0.0 });
        let r = solid_angle_mc(&g, 1_000_000, 11).unwrap();
        assert!((r.total_sr - PI).abs() < 3.0 * r.total_stderr_sr, "{r:?}");
        assert_eq!(r.blocked_sr, 0.0);
        assert_eq!(r.effective_sr, r.total_sr);
    }

    #[test]
    fn deterministic_and_rejects_small_runs() {
        let g = geometry(0.82, true, ScatterModel::Fraction { fraction: 0.043 });
        assert_eq!(
            solid_angle_mc(&g, 200_000, 3).unwrap(),
            solid_angle_mc(&g, 200_000, 3).unwrap()
        );
        assert!(solid_angle_mc(&g, 9_999, 3).is_err());
    }

    #[test]
    fn budget_identity_and_rods() {
        let g = geometry(0.82, true, ScatterModel::Fraction { fraction: 0.043 });
        let r = solid_angle_mc(&g, 1_000_000, 5).unwrap();
        assert_eq!(r.effective_sr, (r.total_sr - r.blocked_sr) * (1.0 - r.scatter_fraction));
        assert!((r.blocked_sr - 1.27).abs() < 0.127, "{}", r.blocked_sr);
        assert!((r.effective_sr - 1.39).abs() < 0.139, "{}", r.effective_sr);
        let cap = cap_solid_angle(0.82f64.asin()).unwrap();
        assert!((r.analytic_total_sr - cap).abs() < 1e-9);
    }

    #[test]
    fn traced_mask_sees_rod_shadow_after_reflection() {
        let g = geometry(0.82, true, ScatterModel::TracedMask);
        let r = solid_angle_mc(&g, 500_000, 8).unwrap();
        assert!(
            r.scatter_fraction > 0.0 && r.scatter_fraction < 0.2,
            "{}",
            r.scatter_fraction
        );
        assert!((r.effective_sr - (r.total_sr - r.blocked_sr) * (1.0 - r.scatter_fraction)).abs() < 1e-12);
    }

    #[test]
    fn adding_an_occluder_never_helps() {
        let base = geometry(0.82, false, ScatterModel::Fraction { fraction: 0.043 });
        let mut one = base.clone();
        one.occluders = presets::trap_rods()[..1].to_vec();
        let mut two = base.clone();
        two.occluders = presets::trap_rods();
        let e: Vec<f64> = [base, one, two]
            .iter()
            .map(|g| solid_angle_mc(g, 300_000, 1).unwrap().effective_sr)
            .collect();
        assert!(e[0] >= e[1] && e[1] >= e[2], "{e:?}");
    }
}
