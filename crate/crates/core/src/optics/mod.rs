//! Exact geometric primitives: rays, rotationally symmetric surfaces and the
//! reflection/refraction laws.
//!
//! Lengths are millimetres, angles radians, wavelengths nanometres. The
//! optical axis is `+z`; every surface is rotationally symmetric about it and
//! its sag is measured from the vertex towards `+z`.

mod laws;
mod ray;
mod surface;

pub use laws::{reflect, refract, TotalInternalReflection};
pub use ray::{Ray, RayStatus};
pub use surface::{Aperture, Hit, Interaction, Surface, SurfaceShape};

use thiserror::Error;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
/// Unit-norm direction.
pub type Direction3 = nalgebra::Unit<Vec3>;

/// Interactions with `|direction · normal|` below this are rejected.
pub const GRAZING_TOLERANCE: f64 = 1e-12;

/// Design wavelength (Ba⁺ 6P₁/₂ → 6S₁/₂ line).
pub const DEFAULT_WAVELENGTH_NM: f64 = 493.0;

/// Smallest ray parameter accepted as a forward intersection, so a ray that
/// starts on a surface does not re-hit it.
pub(crate) const MIN_HIT_DISTANCE_MM: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("ray does not intersect the surface")]
    Miss,
    #[error("intersection at radial distance {radius_mm:.6} mm lies outside the aperture")]
    OutsideAperture { radius_mm: f64 },
    #[error("grazing incidence, |d·n| = {cosine:e}")]
    Grazing { cosine: f64 },
    #[error("radial distance {radius_mm} mm is outside the surface domain")]
    Domain { radius_mm: f64 },
    #[error("invalid surface: {0}")]
    InvalidSurface(String),
    #[error("ray is not alive")]
    DeadRay,
}

/// Unit vector from raw components. Panics on a zero vector.
pub fn direction(x: f64, y: f64, z: f64) -> Direction3 {
    let v = Vec3::new(x, y, z);
    assert!(v.norm() > 0.0, "zero-length direction");
    Direction3::new_normalize(v)
}

/// Orthonormal pair perpendicular to `axis`, deterministic for a given axis.
pub fn perpendicular_frame(axis: &Direction3) -> (Direction3, Direction3) {
    let helper = if axis.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = Direction3::new_normalize(helper - axis.dot(&helper) * axis.as_ref());
    let e2 = Direction3::new_normalize(axis.cross(&e1));
    (e1, e2)
}
