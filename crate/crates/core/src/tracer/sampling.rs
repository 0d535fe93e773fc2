use std::f64::consts::{FRAC_PI_2, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::optics::{perpendicular_frame, Direction3, Point3, Ray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum BundleScheme {
    /// `count` rays evenly spaced across the full cone in one meridional plane.
    Fan,
    /// `count` rays with density uniform in solid angle.
    UniformSolidAngle,
    /// A chief ray plus `rings × azimuths` rays; rings sit at equal
    /// solid-angle steps, the outermost on the cone edge.
    RingGrid { rings: usize, azimuths: usize },
}

/// Point-source bundle around `axis` with half-angle `max_half_angle`.
///
/// `count` is ignored by [`BundleScheme::RingGrid`]; `seed` only matters for
/// [`BundleScheme::UniformSolidAngle`].
pub fn sample_source_rays(
    source: Point3,
    axis: Direction3,
    max_half_angle: f64,
    count: usize,
    scheme: BundleScheme,
    seed: u64,
) -> Result<Vec<Ray>, TraceError> {
    if !(0.0..=FRAC_PI_2).contains(&max_half_angle) {
        return Err(TraceError::InvalidBundle(format!(
            "half-angle must lie in [0, π/2], got {max_half_angle}"
        )));
    }
    let (e1, e2) = perpendicular_frame(&axis);
    let ray = |theta: f64, phi: f64| {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        let d = ct * axis.as_ref() + st * (cp * e1.as_ref() + sp * e2.as_ref());
        Ray::new(source, Direction3::new_normalize(d))
    };
    match scheme {
        BundleScheme::Fan => {
            if count == 0 {
                return Err(TraceError::InvalidBundle("ray count must be >= 1".into()));
            }
            Ok((0..count)
                .map(|i| {
                    let s = if count == 1 {
                        0.0
                    } else {
                        -1.0 + 2.0 * i as f64 / (count - 1) as f64
                    };
                    let theta = s * max_half_angle;
                    ray(theta.abs(), if theta < 0.0 { std::f64::consts::PI } else { 0.0 })
                })
                .collect())
        }
        BundleScheme::UniformSolidAngle => {
            if count == 0 {
                return Err(TraceError::InvalidBundle("ray count must be >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let span = 1.0 - max_half_angle.cos();
            Ok((0..count)
                .map(|_| {
                    let cos_theta = 1.0 - rng.random::<f64>() * span;
                    let phi = TAU * rng.random::<f64>();
                    ray(cos_theta.clamp(-1.0, 1.0).acos(), phi)
                })
                .collect())
        }
        BundleScheme::RingGrid { rings, azimuths } => {
            if rings == 0 || azimuths == 0 {
                return Err(TraceError::InvalidBundle(
                    "ring grid needs at least one ring and one azimuth".into(),
                ));
            }
            let span = 1.0 - max_half_angle.cos();
            let mut rays = Vec::with_capacity(rings * azimuths + 1);
            rays.push(ray(0.0, 0.0));
            for i in 1..=rings {
                let theta = (1.0 - span * i as f64 / rings as f64).acos();
                for j in 0..azimuths {
                    rays.push(ray(theta, TAU * j as f64 / azimuths as f64));
                }
            }
            Ok(rays)
        }
    }
}
