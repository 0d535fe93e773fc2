//! Collection solid angle of the mirror seen from the ion: analytic caps,
//! the aperture outline by quadrature, and a Monte Carlo budget with rods
//! blocking light before the mirror and losses after it.

mod mc;

pub use mc::{solid_angle_mc, CollectionReport, MIN_MC_SAMPLES};

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optics::{direction, Point3, Ray, Surface};
use crate::tracer::Occluder;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollectionError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("degenerate geometry: {0}")]
    Geometry(String),
}

/// Loss applied to light after it leaves the mirror.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScatterModel {
    /// Fixed fraction of the unblocked light.
    Fraction { fraction: f64 },
    /// Reflected rays are traced against the occluders.
    TracedMask,
}

#[derive(Debug, Clone)]
pub struct CollectionGeometry {
    pub mirror: Surface,
    pub ion: Point3,
    pub occluders: Vec<Occluder>,
    pub scatter: ScatterModel,
}

impl CollectionGeometry {
    pub fn validate(&self) -> Result<(), CollectionError> {
        if let Some(o) = self.occluders.iter().find(|o| o.contains(&self.ion)) {
            return Err(CollectionError::Geometry(format!(
                "the ion lies inside occluder '{}'",
                o.label
            )));
        }
        if let ScatterModel::Fraction { fraction } = self.scatter {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(CollectionError::InvalidArgument(format!(
                    "scatter fraction must lie in [0, 1], got {fraction}"
                )));
            }
        }
        Ok(())
    }

    /// Does light leaving the ion along polar angle `theta` (from `−z`) and
    /// azimuth `phi` land on the mirror inside its aperture?
    fn reaches_mirror(&self, theta: f64, phi: f64) -> bool {
        let (st, ct) = theta.sin_cos();
        let d = direction(st * phi.cos(), st * phi.sin(), -ct);
        self.mirror.intersect(&Ray::new(self.ion, d)).is_ok()
    }
}

/// `2π(1 − cos θ)`.
pub fn cap_solid_angle(half_angle: f64) -> Result<f64, CollectionError> {
    if !(0.0..=PI).contains(&half_angle) {
        return Err(CollectionError::InvalidArgument(format!(
            "half-angle must lie in [0, π], got {half_angle}"
        )));
    }
    Ok(TAU * (1.0 - half_angle.cos()))
}

/// N.A. of the circular cone with the same solid angle.
pub fn effective_na(omega_sr: f64) -> Result<f64, CollectionError> {
    if !(0.0..=TAU).contains(&omega_sr) {
        return Err(CollectionError::InvalidArgument(format!(
            "solid angle must lie in [0, 2π] sr, got {omega_sr}"
        )));
    }
    let c = 1.0 - omega_sr / TAU;
    Ok((1.0 - c * c).max(0.0).sqrt())
}

/// Solid angle of the mirror aperture seen from the ion, occluders ignored.
///
/// The aperture edge angle `θ(φ)` is found by bisection at each of
/// `azimuths` midpoint azimuths and `∫(1 − cos θ(φ)) dφ` is summed. The
/// outline must be star-shaped about the `−z` direction.
pub fn aperture_solid_angle(geometry: &CollectionGeometry, azimuths: usize) -> f64 {
    let azimuths = azimuths.max(1);
    let dphi = TAU / azimuths as f64;
    (0..azimuths)
        .map(|k| {
            let phi = (k as f64 + 0.5) * dphi;
            if !geometry.reaches_mirror(0.0, phi) {
                return 0.0;
            }
            let (mut lo, mut hi) = (0.0, 0.5 * PI);
            while hi - lo > 1e-13 {
                let mid = 0.5 * (lo + hi);
                if geometry.reaches_mirror(mid, phi) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (1.0 - lo.cos()) * dphi
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::Aperture;
    use crate::presets;

    fn open_geometry(aperture: Aperture) -> CollectionGeometry {
        CollectionGeometry {
            mirror: Surface::sphere(20.0, -10.0, aperture).unwrap(),
            ion: Point3::origin(),
            occluders: vec![],
            scatter: ScatterModel::Fraction { fraction: 0.0 },
        }
    }

    #[test]
    fn cap_values() {
        assert!((cap_solid_angle(PI).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((cap_solid_angle(PI / 3.0).unwrap() - PI).abs() < 1e-12);
        assert!((cap_solid_angle(0.82f64.asin()).unwrap() - 2.687).abs() < 5e-4);
        assert!(cap_solid_angle(-0.1).is_err());
    }

    #[test]
    fn effective_na_values() {
        assert_eq!(effective_na(0.0).unwrap(), 0.0);
        assert!((effective_na(TAU).unwrap() - 1.0).abs() < 1e-15);
        assert!((effective_na(1.39).unwrap() - 0.627).abs() < 5e-4);
        assert!(effective_na(7.0).is_err());
        for na in [0.1, 0.5, 0.82, 0.99] {
            let omega = cap_solid_angle(f64::asin(na)).unwrap();
            assert!((effective_na(omega).unwrap() - na).abs() < 1e-12);
        }
    }

    #[test]
    fn circular_aperture_quadrature_matches_cap() {
        let radius = presets::mirror_aperture_radius(20.0, 0.82);
        let g = open_geometry(Aperture::Circular { radius_mm: radius });
        let exact = cap_solid_angle(0.82f64.asin()).unwrap();
        assert!((aperture_solid_angle(&g, 64) - exact).abs() < 1e-9);
    }

    #[test]
    fn square_corners_add_solid_angle() {
        let circle = open_geometry(Aperture::Circular { radius_mm: 12.5 });
        let cut = open_geometry(Aperture::SquareCircle {
            half_width_mm: 9.5,
            radius_mm: 12.5,
        });
        let a = aperture_solid_angle(&circle, 720);
        let b = aperture_solid_angle(&cut, 720);
        assert!(b < a);
        assert!(b > 2.7, "{b}");
    }

    #[test]
    fn ion_inside_rod_is_rejected() {
        let mut g = open_geometry(Aperture::Circular { radius_mm: 10.0 });
        g.occluders = vec![Occluder::cylinder("rod", Point3::origin(), crate::optics::Vec3::x(), 0.1).unwrap()];
        assert!(matches!(g.validate(), Err(CollectionError::Geometry(_))));
    }
}
