use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Direction3, OpticsError, Point3, Ray, Vec3, GRAZING_TOLERANCE, MIN_HIT_DISTANCE_MM};
use crate::corrector::{CorrectorProfile, ProfileModel};

/// Transverse clear aperture, centred on the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Aperture {
    Unbounded,
    Circular {
        radius_mm: f64,
    },
    Square {
        half_width_mm: f64,
    },
    /// Square ground from a round blank: inside both the square and the circle.
    SquareCircle {
        half_width_mm: f64,
        radius_mm: f64,
    },
}

impl Aperture {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            Aperture::Unbounded => true,
            Aperture::Circular { radius_mm } => x.hypot(y) <= radius_mm,
            Aperture::Square { half_width_mm } => x.abs() <= half_width_mm && y.abs() <= half_width_mm,
            Aperture::SquareCircle {
                half_width_mm,
                radius_mm,
            } => x.abs() <= half_width_mm && y.abs() <= half_width_mm && x.hypot(y) <= radius_mm,
        }
    }

    /// Largest radial distance inside the aperture.
    pub fn max_radius(&self) -> f64 {
        match *self {
            Aperture::Unbounded => f64::INFINITY,
            Aperture::Circular { radius_mm } => radius_mm,
            Aperture::Square { half_width_mm } => half_width_mm * std::f64::consts::SQRT_2,
            Aperture::SquareCircle {
                half_width_mm,
                radius_mm,
            } => radius_mm.min(half_width_mm * std::f64::consts::SQRT_2),
        }
    }

    fn validate(&self) -> Result<(), OpticsError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        let valid = match *self {
            Aperture::Unbounded => true,
            Aperture::Circular { radius_mm } => ok(radius_mm),
            Aperture::Square { half_width_mm } => ok(half_width_mm),
            Aperture::SquareCircle {
                half_width_mm,
                radius_mm,
            } => ok(half_width_mm) && ok(radius_mm),
        };
        if valid {
            Ok(())
        } else {
            Err(OpticsError::InvalidSurface(format!(
                "aperture extents must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Interaction {
    Reflect,
    Refract { n_in: f64, n_out: f64 },
}

#[derive(Debug, Clone)]
pub enum SurfaceShape {
    /// Concave towards `+z`, centre of curvature at `vertex + radius`.
    Sphere {
        radius_mm: f64,
    },
    /// Concave towards `+z`, focus at `vertex + focal_length`.
    Paraboloid {
        focal_length_mm: f64,
    },
    Plane,
    /// Sag `H(ρ) − H(0)` of a corrector thickness profile.
    Asphere {
        profile: Arc<CorrectorProfile>,
        model: ProfileModel,
    },
}

/// Intersection point and unit normal oriented against the incoming ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub point: Point3,
    pub normal: Direction3,
    pub distance: f64,
}

/// Rotationally symmetric optical boundary with its vertex on the `z` axis.
#[derive(Debug, Clone)]
pub struct Surface {
    shape: SurfaceShape,
    vertex_z_mm: f64,
    aperture: Aperture,
    interaction: Interaction,
}

impl Surface {
    pub fn new(
        shape: SurfaceShape,
        vertex_z_mm: f64,
        aperture: Aperture,
        interaction: Interaction,
    ) -> Result<Self, OpticsError> {
        match &shape {
            SurfaceShape::Sphere { radius_mm } if !(radius_mm.is_finite() && *radius_mm > 0.0) => {
                return Err(OpticsError::InvalidSurface(format!(
                    "curvature radius must be positive, got {radius_mm}"
                )))
            }
            SurfaceShape::Paraboloid { focal_length_mm }
                if !(focal_length_mm.is_finite() && *focal_length_mm > 0.0) =>
            {
                return Err(OpticsError::InvalidSurface(format!(
                    "focal length must be positive, got {focal_length_mm}"
                )))
            }
            _ => {}
        }
        if !vertex_z_mm.is_finite() {
            return Err(OpticsError::InvalidSurface("vertex position is not finite".into()));
        }
        aperture.validate()?;
        if let Interaction::Refract { n_in, n_out } = interaction {
            if !(n_in >= 1.0 && n_out >= 1.0 && n_in.is_finite() && n_out.is_finite()) {
                return Err(OpticsError::InvalidSurface(format!(
                    "refractive indices must be >= 1, got {n_in} -> {n_out}"
                )));
            }
        }
        Ok(Self {
            shape,
            vertex_z_mm,
            aperture,
            interaction,
        })
    }

    pub fn sphere(radius_mm: f64, vertex_z_mm: f64, aperture: Aperture) -> Result<Self, OpticsError> {
        Self::new(
            SurfaceShape::Sphere { radius_mm },
            vertex_z_mm,
            aperture,
            Interaction::Reflect,
        )
    }

    pub fn paraboloid(focal_length_mm: f64, vertex_z_mm: f64, aperture: Aperture) -> Result<Self, OpticsError> {
        Self::new(
            SurfaceShape::Paraboloid { focal_length_mm },
            vertex_z_mm,
            aperture,
            Interaction::Reflect,
        )
    }

    pub fn plane(vertex_z_mm: f64, aperture: Aperture, interaction: Interaction) -> Result<Self, OpticsError> {
        Self::new(SurfaceShape::Plane, vertex_z_mm, aperture, interaction)
    }

    pub fn shape(&self) -> &SurfaceShape {
        &self.shape
    }

    pub fn vertex_z_mm(&self) -> f64 {
        self.vertex_z_mm
    }

    pub fn aperture(&self) -> Aperture {
        self.aperture
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn with_aperture(mut self, aperture: Aperture) -> Result<Self, OpticsError> {
        aperture.validate()?;
        self.aperture = aperture;
        Ok(self)
    }

    /// Axial sag at radial distance `rho`, measured from the vertex.
    pub fn sag(&self, rho: f64) -> Result<f64, OpticsError> {
        let rho = rho.abs();
        match &self.shape {
            SurfaceShape::Sphere { radius_mm } => {
                if rho > *radius_mm {
                    return Err(OpticsError::Domain { radius_mm: rho });
                }
                let r = *radius_mm;
                // r − √(r² − ρ²), written to avoid cancellation near the axis
                Ok(rho * rho / (r + ((r - rho) * (r + rho)).sqrt()))
            }
            SurfaceShape::Paraboloid { focal_length_mm } => Ok(rho * rho / (4.0 * focal_length_mm)),
            SurfaceShape::Plane => Ok(0.0),
            SurfaceShape::Asphere { profile, model } => {
                Ok(profile.thickness(rho, *model) - profile.thickness(0.0, *model))
            }
        }
    }

    /// Radial derivative of the sag.
    pub fn sag_slope(&self, rho: f64) -> Result<f64, OpticsError> {
        let sign = rho.signum();
        let rho = rho.abs();
        let slope = match &self.shape {
            SurfaceShape::Sphere { radius_mm } => {
                let r = *radius_mm;
                if rho >= r {
                    return Err(OpticsError::Domain { radius_mm: rho });
                }
                rho / ((r - rho) * (r + rho)).sqrt()
            }
            SurfaceShape::Paraboloid { focal_length_mm } => rho / (2.0 * focal_length_mm),
            SurfaceShape::Plane => 0.0,
            SurfaceShape::Asphere { profile, model } => profile.slope(rho, *model),
        };
        Ok(sign * slope)
    }

    /// First forward intersection of `ray` with this surface.
    ///
    /// A hit outside the aperture is reported as
    /// [`OpticsError::OutsideAperture`]; the sphere only counts its branch on
    /// the vertex side of the centre of curvature.
    pub fn intersect(&self, ray: &Ray) -> Result<Hit, OpticsError> {
        if !ray.is_alive() {
            return Err(OpticsError::DeadRay);
        }
        let o = ray.origin;
        let d = ray.direction.as_ref();
        let (distance, point) = match &self.shape {
            SurfaceShape::Plane => {
                if d.z == 0.0 {
                    return Err(OpticsError::Miss);
                }
                let t = (self.vertex_z_mm - o.z) / d.z;
                if t <= MIN_HIT_DISTANCE_MM {
                    return Err(OpticsError::Miss);
                }
                (t, ray.at(t))
            }
            SurfaceShape::Sphere { radius_mm } => {
                let center = Point3::new(0.0, 0.0, self.vertex_z_mm + radius_mm);
                let w = o - center;
                let b = w.dot(d);
                let c = w.dot(&w) - radius_mm * radius_mm;
                let disc = b * b - c;
                if disc < 0.0 {
                    return Err(OpticsError::Miss);
                }
                let sq = disc.sqrt();
                [-b - sq, -b + sq]
                    .into_iter()
                    .filter(|t| *t > MIN_HIT_DISTANCE_MM)
                    .map(|t| (t, ray.at(t)))
                    .find(|(_, p)| p.z <= center.z)
                    .ok_or(OpticsError::Miss)?
            }
            SurfaceShape::Paraboloid { focal_length_mm } => {
                let f4 = 4.0 * focal_length_mm;
                let pz = o.z - self.vertex_z_mm;
                let a = d.x * d.x + d.y * d.y;
                let b = 2.0 * (o.x * d.x + o.y * d.y) - f4 * d.z;
                let c = o.x * o.x + o.y * o.y - f4 * pz;
                let t = smallest_forward_root(a, b, c).ok_or(OpticsError::Miss)?;
                (t, ray.at(t))
            }
            SurfaceShape::Asphere { .. } => self.intersect_numeric(ray)?,
        };
        let rho = point.x.hypot(point.y);
        if !self.aperture.contains(point.x, point.y) {
            return Err(OpticsError::OutsideAperture { radius_mm: rho });
        }
        let raw_normal = match &self.shape {
            SurfaceShape::Sphere { radius_mm } => {
                let center = Point3::new(0.0, 0.0, self.vertex_z_mm + radius_mm);
                (center - point) / *radius_mm
            }
            _ => {
                let s = self.sag_slope(rho)?;
                if rho > 0.0 {
                    Vec3::new(-s * point.x / rho, -s * point.y / rho, 1.0)
                } else {
                    Vec3::z()
                }
            }
        };
        let mut normal = Direction3::new_normalize(raw_normal);
        let cosine = normal.dot(d);
        if cosine.abs() < GRAZING_TOLERANCE {
            return Err(OpticsError::Grazing { cosine });
        }
        if cosine > 0.0 {
            normal = -normal;
        }
        Ok(Hit {
            point,
            normal,
            distance,
        })
    }

    /// Newton iteration on `z(t) − vertex − sag(ρ(t)) = 0`, started from the
    /// vertex plane.
    fn intersect_numeric(&self, ray: &Ray) -> Result<(f64, Point3), OpticsError> {
        let d = ray.direction.as_ref();
        if d.z.abs() < GRAZING_TOLERANCE {
            return Err(OpticsError::Miss);
        }
        let mut t = (self.vertex_z_mm - ray.origin.z) / d.z;
        for _ in 0..64 {
            let p = ray.at(t);
            let rho = p.x.hypot(p.y);
            let f = p.z - self.vertex_z_mm - self.sag(rho)?;
            let drho_dt = if rho > 0.0 {
                (p.x * d.x + p.y * d.y) / rho
            } else {
                d.x.hypot(d.y)
            };
            let df = d.z - self.sag_slope(rho)? * drho_dt;
            if df == 0.0 {
                return Err(OpticsError::Miss);
            }
            let step = f / df;
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let p = ray.at(t);
        let residual = p.z - self.vertex_z_mm - self.sag(p.x.hypot(p.y))?;
        if t <= MIN_HIT_DISTANCE_MM || residual.abs() > 1e-10 {
            return Err(OpticsError::Miss);
        }
        Ok((t, p))
    }
}

fn smallest_forward_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let roots: Vec<f64> = if a.abs() < 1e-15 {
        if b == 0.0 {
            return None;
        }
        vec![-c / b]
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        // stable quadratic roots
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let mut r = vec![q / a];
        if q != 0.0 {
            r.push(c / q);
        }
        r
    };
    roots
        .into_iter()
        .filter(|t| *t > MIN_HIT_DISTANCE_MM)
        .min_by(|x, y| x.total_cmp(y))
}
