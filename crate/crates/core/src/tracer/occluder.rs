use serde::{Deserialize, Serialize};

use super::TraceError;
use crate::optics::{Direction3, Point3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub enum OccluderShape {
    /// Infinite circular cylinder.
    Cylinder {
        axis_point: Point3,
        axis_direction: Direction3,
        radius_mm: f64,
    },
    /// Flat rectangle spanned by `u_axis` and `normal × u_axis`.
    Rectangle {
        center: Point3,
        normal: Direction3,
        u_axis: Direction3,
        half_extents_mm: [f64; 2],
    },
}

/// Opaque obstacle such as a trap electrode.
#[derive(Debug, Clone, PartialEq)]
pub struct Occluder {
    pub label: String,
    shape: OccluderShape,
}

/// Serializable description used by configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OccluderSpec {
    Cylinder {
        label: String,
        axis_point_mm: [f64; 3],
        axis_direction: [f64; 3],
        radius_mm: f64,
    },
    Rectangle {
        label: String,
        center_mm: [f64; 3],
        normal: [f64; 3],
        u_axis: [f64; 3],
        half_extents_mm: [f64; 2],
    },
}

impl Occluder {
    pub fn cylinder(
        label: impl Into<String>,
        axis_point: Point3,
        axis_direction: Vec3,
        radius_mm: f64,
    ) -> Result<Self, TraceError> {
        let label = label.into();
        if !(radius_mm.is_finite() && radius_mm > 0.0) {
            return Err(TraceError::InvalidSystem(format!(
                "occluder '{label}': radius must be positive"
            )));
        }
        let axis_direction = unit(axis_direction, &label)?;
        Ok(Self {
            label,
            shape: OccluderShape::Cylinder {
                axis_point,
                axis_direction,
                radius_mm,
            },
        })
    }

    pub fn rectangle(
        label: impl Into<String>,
        center: Point3,
        normal: Vec3,
        u_axis: Vec3,
        half_extents_mm: [f64; 2],
    ) -> Result<Self, TraceError> {
        let label = label.into();
        if !half_extents_mm.iter().all(|e| e.is_finite() && *e > 0.0) {
            return Err(TraceError::InvalidSystem(format!(
                "occluder '{label}': extents must be positive"
            )));
        }
        let normal = unit(normal, &label)?;
        let u_axis = unit(u_axis - u_axis.dot(&normal) * normal.as_ref(), &label)?;
        Ok(Self {
            label,
            shape: OccluderShape::Rectangle {
                center,
                normal,
                u_axis,
                half_extents_mm,
            },
        })
    }

    pub fn from_spec(spec: &OccluderSpec) -> Result<Self, TraceError> {
        match spec {
            OccluderSpec::Cylinder {
                label,
                axis_point_mm: p,
                axis_direction: d,
                radius_mm,
            } => Self::cylinder(
                label.clone(),
                Point3::new(p[0], p[1], p[2]),
                Vec3::new(d[0], d[1], d[2]),
                *radius_mm,
            ),
            OccluderSpec::Rectangle {
                label,
                center_mm: c,
                normal: n,
                u_axis: u,
                half_extents_mm,
            } => Self::rectangle(
                label.clone(),
                Point3::new(c[0], c[1], c[2]),
                Vec3::new(n[0], n[1], n[2]),
                Vec3::new(u[0], u[1], u[2]),
                *half_extents_mm,
            ),
        }
    }

    pub fn shape(&self) -> &OccluderShape {
        &self.shape
    }

    /// True if `point` lies inside the solid occluder.
    pub fn contains(&self, point: &Point3) -> bool {
        match &self.shape {
            OccluderShape::Cylinder {
                axis_point,
                axis_direction,
                radius_mm,
            } => {
                let w = point - axis_point;
                let perp = w - w.dot(axis_direction) * axis_direction.as_ref();
                perp.norm() < *radius_mm
            }
            OccluderShape::Rectangle { .. } => false,
        }
    }

    /// Does the segment `start + t·direction`, `0 ≤ t ≤ length`, touch the
    /// occluder? `length` may be infinite.
    pub fn blocks_segment(&self, start: &Point3, direction: &Direction3, length: f64) -> bool {
        let d = direction.as_ref();
        match &self.shape {
            OccluderShape::Cylinder {
                axis_point,
                axis_direction,
                radius_mm,
            } => {
                let u = axis_direction.as_ref();
                let w = start - axis_point;
                let w_perp = w - w.dot(u) * u;
                let d_perp = d - d.dot(u) * u;
                let dd = d_perp.norm_squared();
                let t = if dd > 0.0 {
                    (-w_perp.dot(&d_perp) / dd).clamp(0.0, length)
                } else {
                    0.0
                };
                (w_perp + t * d_perp).norm_squared() <= radius_mm * radius_mm
            }
            OccluderShape::Rectangle {
                center,
                normal,
                u_axis,
                half_extents_mm,
            } => {
                let denom = d.dot(normal);
                if denom.abs() < 1e-15 {
                    return false;
                }
                let t = (center - start).dot(normal) / denom;
                if !(0.0..=length).contains(&t) {
                    return false;
                }
                let local = start + t * d - center;
                let v_axis = normal.cross(u_axis);
                local.dot(u_axis).abs() <= half_extents_mm[0] && local.dot(&v_axis).abs() <= half_extents_mm[1]
            }
        }
    }
}

fn unit(v: Vec3, label: &str) -> Result<Direction3, TraceError> {
    let norm = v.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(TraceError::InvalidSystem(format!(
            "occluder '{label}': direction must be non-zero"
        )));
    }
    Ok(Direction3::new_normalize(v))
}
