//! Default geometry and photometry of the Ba⁺ trap with its integrated
//! 20 mm spherical mirror.

use std::f64::consts::FRAC_PI_4;

use crate::collection::{CollectionGeometry, ScatterModel};
use crate::optics::{Aperture, OpticsError, Point3, Surface, SurfaceShape, Vec3};
use crate::photometry::{ChainElement, CountModel, LossKind, ThroughputChain};
use crate::tracer::Occluder;

pub const MIRROR_RADIUS_MM: f64 = 20.0;
/// N.A. of the mirror rim seen from the ion.
pub const MIRROR_NA: f64 = 0.82;
/// Rod axes sit this far from the ion, 45° below the trap plane on either side.
pub const ROD_DISTANCE_MM: f64 = 0.26;
pub const ROD_RADIUS_MM: f64 = 0.085;
pub const SCATTER_FRACTION: f64 = 0.043;

pub const ETA_PMT: f64 = 0.127;
pub const ETA_PMT_STDERR: f64 = 0.010;
/// Overall efficiency as quoted alongside the throughput chain.
pub const STATED_ETA: f64 = 0.065;
pub const DARK_COUNTS_PER_MILLION: f64 = 60.0;
pub const CYCLES: u64 = 1_000_000;

/// Photon counts per 10⁶ cycles measured through the mirror.
pub const MEASURED_WITH_CORRECTOR: (f64, f64) = (4350.0, 91.0);
pub const MEASURED_WITHOUT_CORRECTOR: (f64, f64) = (3981.0, 74.0);
/// Published solid angles (sr) that go with the counts above.
pub const PUBLISHED_OMEGA_WITH_CORRECTOR: (f64, f64) = (1.24, 0.13);
pub const PUBLISHED_OMEGA_WITHOUT_CORRECTOR: (f64, f64) = (1.02, 0.11);

/// Published collection budget (sr) and the N.A. quoted with it.
pub const PUBLISHED_BLOCKED_SR: f64 = 1.27;
pub const PUBLISHED_EFFECTIVE_SR: f64 = 1.39;
pub const PUBLISHED_EFFECTIVE_NA: f64 = 0.63;
pub const PUBLISHED_ETA_T: f64 = 0.432;
/// Published source intensity with its asymmetric band `(value, +, −)`.
pub const PUBLISHED_SOURCE_INTENSITY: (f64, f64, f64) = (0.976, 0.024, 0.106);

pub const MIRROR_REFLECTIVITY: f64 = 0.91;
pub const CORRECTOR_LOSS: f64 = 0.089;

/// Vertex position that puts the paraxial focus of a sphere on the ion.
pub fn mirror_vertex_z(radius_mm: f64) -> f64 {
    -0.5 * radius_mm
}

/// Rim radius at which a sphere with its paraxial focus on the ion subtends
/// the given N.A.
pub fn mirror_aperture_radius(radius_mm: f64, na: f64) -> f64 {
    let vertex = mirror_vertex_z(radius_mm);
    let shape = Surface::new(
        SurfaceShape::Sphere { radius_mm },
        vertex,
        Aperture::Unbounded,
        crate::optics::Interaction::Reflect,
    )
    .expect("positive radius");
    let sin_at = |rho: f64| {
        let z = vertex + shape.sag(rho).expect("inside the sphere");
        rho / rho.hypot(z)
    };
    let (mut lo, mut hi) = (0.0, radius_mm);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sin_at(mid) < na {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The trap mirror: sphere focused on the ion, clipped to N.A. 0.82.
pub fn mirror_surface(radius_mm: f64) -> Result<Surface, OpticsError> {
    Surface::sphere(
        radius_mm,
        mirror_vertex_z(radius_mm),
        Aperture::Circular {
            radius_mm: mirror_aperture_radius(radius_mm, MIRROR_NA),
        },
    )
}

/// Square-cut variant of the mirror: a 25 mm disc ground to 19 × 19 mm.
pub fn square_cut_mirror_surface(radius_mm: f64) -> Result<Surface, OpticsError> {
    Surface::sphere(
        radius_mm,
        mirror_vertex_z(radius_mm),
        Aperture::SquareCircle {
            half_width_mm: 9.5,
            radius_mm: 12.5,
        },
    )
}

/// The two quadrupole rods between ion and mirror, running along `x`.
pub fn trap_rods() -> Vec<Occluder> {
    let (s, c) = FRAC_PI_4.sin_cos();
    [("rod +y", 1.0), ("rod -y", -1.0)]
        .into_iter()
        .map(|(label, side)| {
            Occluder::cylinder(
                label,
                Point3::new(0.0, side * ROD_DISTANCE_MM * s, -ROD_DISTANCE_MM * c),
                Vec3::x(),
                ROD_RADIUS_MM,
            )
            .expect("valid rod")
        })
        .collect()
}

pub fn trap_geometry() -> CollectionGeometry {
    CollectionGeometry {
        mirror: mirror_surface(MIRROR_RADIUS_MM).expect("valid mirror"),
        ion: Point3::origin(),
        occluders: trap_rods(),
        scatter: ScatterModel::Fraction {
            fraction: SCATTER_FRACTION,
        },
    }
}

/// Five AR-coated BK7 lenses, a fused-silica viewport and a 492 nm filter.
pub fn detection_chain() -> ThroughputChain {
    ThroughputChain::new(vec![
        ChainElement::new(
            "BK7 lenses",
            LossKind::PerSurface {
                loss: 0.006,
                surfaces: 10,
            },
        ),
        ChainElement::new(
            "viewport",
            LossKind::PerSurface {
                loss: 0.010,
                surfaces: 2,
            },
        ),
        ChainElement::new(
            "492 nm filter",
            LossKind::Filter {
                transmission: 1.0 - 0.531,
            },
        ),
    ])
    .expect("valid chain")
}

/// The detection chain plus the aluminium mirror and, optionally, the
/// uncoated corrector.
pub fn mirror_path_chain(with_corrector: bool) -> ThroughputChain {
    let mut elements = detection_chain().elements().to_vec();
    elements.push(ChainElement::new(
        "aluminium mirror",
        LossKind::Reflectivity {
            reflectivity: MIRROR_REFLECTIVITY,
        },
    ));
    if with_corrector {
        elements.push(ChainElement::new(
            "uncoated corrector",
            LossKind::Bulk { loss: CORRECTOR_LOSS },
        ));
    }
    ThroughputChain::new(elements).expect("valid chain")
}

/// Count model for the direct-imaging source-intensity measurement.
pub fn count_model(omega_fraction: f64) -> CountModel {
    CountModel {
        dark_counts_per_million: DARK_COUNTS_PER_MILLION,
        eta_pmt: ETA_PMT,
        eta_t: detection_chain().throughput(),
        omega_fraction,
        source_intensity: 1.0,
        background: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collection::cap_solid_angle;

    #[test]
    fn aperture_radius_reaches_requested_na() {
        let rho = mirror_aperture_radius(20.0, 0.82);
        let z = -10.0 + 20.0 - (400.0 - rho * rho).sqrt();
        assert!((rho / rho.hypot(z) - 0.82).abs() < 1e-12);
        assert!((rho - 10.2648).abs() < 1e-4);
        assert!((cap_solid_angle(0.82f64.asin()).unwrap() - 2.6869).abs() < 1e-4);
    }

    #[test]
    fn rods_clear_the_ion() {
        let g = trap_geometry();
        assert!(g.validate().is_ok());
        assert_eq!(g.occluders.len(), 2);
    }
}
