use std::sync::Arc;

use serde::Serialize;

use super::{CorrectorProfile, DesignError, DesignMetadata, ProfileModel, ProfileSample};
use crate::optics::{direction, reflect, refract, Interaction, Point3, Ray, Surface};
use crate::tracer::{Element, OpticalSystem, RayOutcome};

pub const DEFAULT_SEGMENTS: usize = 2000;
pub const MIN_SEGMENTS: usize = 100;

/// Bisection stops once the exit-angle residual is below this.
const SLOPE_TOLERANCE_RAD: f64 = 1e-12;
const FIXED_POINT_TOLERANCE_MM: f64 = 1e-13;
const MAX_FIXED_POINT_ITERATIONS: usize = 100;
const VALIDATION_RAYS: usize = 2001;

#[derive(Debug, Clone)]
pub struct DesignParameters {
    /// Reflecting mirror, normally a sphere.
    pub mirror: Surface,
    /// On-axis point source.
    pub source: Point3,
    pub index: f64,
    pub entrance_plane_z_mm: f64,
    pub center_thickness_mm: f64,
    pub segments: usize,
    /// Rays launched up to `asin(design_na)` are corrected.
    pub design_na: f64,
}

impl DesignParameters {
    /// Acrylic plate, entrance face 30 mm above the source, 3 mm thick.
    pub fn new(mirror: Surface, source: Point3) -> Self {
        Self {
            mirror,
            source,
            index: 1.49,
            entrance_plane_z_mm: 30.0,
            center_thickness_mm: 3.0,
            segments: DEFAULT_SEGMENTS,
            design_na: 0.63,
        }
    }

    fn validate(&self) -> Result<(), DesignError> {
        let bad = |m: String| Err(DesignError::InvalidParameters(m));
        if self.mirror.interaction() != Interaction::Reflect {
            return bad("the mirror surface must reflect".into());
        }
        if self.source.x != 0.0 || self.source.y != 0.0 || !self.source.z.is_finite() {
            return bad(format!("source must lie on the optical axis, got {}", self.source));
        }
        if !(self.index.is_finite() && self.index >= 1.0) {
            return bad(format!("refractive index must be >= 1, got {}", self.index));
        }
        if !(self.entrance_plane_z_mm.is_finite() && self.entrance_plane_z_mm > self.source.z) {
            return bad("entrance plane must lie above the source".into());
        }
        if !(self.center_thickness_mm.is_finite() && self.center_thickness_mm > 0.0) {
            return bad(format!(
                "center thickness must be positive, got {}",
                self.center_thickness_mm
            ));
        }
        if self.segments < MIN_SEGMENTS {
            return bad(format!("need at least {MIN_SEGMENTS} segments, got {}", self.segments));
        }
        if !(self.design_na > 0.0 && self.design_na < 1.0) {
            return bad(format!("design N.A. must lie in (0, 1), got {}", self.design_na));
        }
        Ok(())
    }

    fn max_launch_angle(&self) -> f64 {
        self.design_na.asin()
    }
}

/// Exit-angle residuals of a traced fan, measured from `+z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualStats {
    pub rays: usize,
    pub max_rad: f64,
    pub rms_rad: f64,
}

/// A meridional ray just after refraction at the flat entrance face.
struct PlateRay {
    r_in: f64,
    /// Angle of the internal ray from `+z`, positive towards `+R`.
    u: f64,
}

fn ray_into_plate(p: &DesignParameters, theta: f64, segment: usize) -> Result<PlateRay, DesignError> {
    let optics = |source| DesignError::Optics { segment, source };
    let ray = Ray::new(p.source, direction(theta.sin(), 0.0, -theta.cos()));
    let hit = p.mirror.intersect(&ray).map_err(optics)?;
    let up = reflect(&ray.direction, &hit.normal);
    if up.z <= 0.0 {
        return Err(DesignError::Infeasible {
            segment,
            reason: "reflected ray does not head towards the corrector".into(),
        });
    }
    let t = (p.entrance_plane_z_mm - hit.point.z) / up.z;
    let at_plate = hit.point + t * up.as_ref();
    let inside = refract(&up, &crate::optics::Vec3::z_axis(), 1.0, p.index).map_err(|_| DesignError::Infeasible {
        segment,
        reason: "total internal reflection at the entrance face".into(),
    })?;
    Ok(PlateRay {
        r_in: at_plate.x,
        u: inside.x.atan2(inside.z),
    })
}

/// Exit-face slope dH/dR that sends a ray with internal angle `u` out
/// parallel to the axis.
///
/// The face normal is tilted by `α` from `+z`; the exit direction makes
/// `g(α) = α + asin(n·sin(u − α))` with the axis, which decreases
/// monotonically in `α` over the bracket where the arcsine exists.
fn solve_exit_slope(u: f64, n: f64, segment: usize) -> Result<f64, DesignError> {
    let g = |alpha: f64| alpha + (n * (u - alpha).sin()).clamp(-1.0, 1.0).asin();
    let critical = (1.0 / n).asin();
    let eps = 1e-12;
    let (mut lo, mut hi) = (u - critical + eps, u + critical - eps);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo > SLOPE_TOLERANCE_RAD && g_hi < -SLOPE_TOLERANCE_RAD) {
        return Err(DesignError::Infeasible {
            segment,
            reason: format!("no exit-face tilt collimates the ray (n = {n}, residual bracket [{g_lo:e}, {g_hi:e}])"),
        });
    }
    let mut alpha = 0.5 * (lo + hi);
    for _ in 0..200 {
        alpha = 0.5 * (lo + hi);
        let r = g(alpha);
        if r.abs() <= SLOPE_TOLERANCE_RAD {
            break;
        }
        if r > 0.0 {
            lo = alpha;
        } else {
            hi = alpha;
        }
    }
    // surface z = H(R) has normal ∝ (−H′, 1)
    Ok(-alpha.tan())
}

/// Segment-fitting design of the corrector exit face.
///
/// Launch angles `θᵢ = θmax·i/N` are traced to the flat entrance face. Each
/// ray's internal direction fixes the exit-face slope it needs. The thickness
/// is integrated outward with the trapezoid rule, and each ray's landing
/// radius on the exit face (which depends on `H` there) is iterated to a
/// fixed point. The result is checked by tracing a denser fan.
pub fn design_corrector(p: &DesignParameters) -> Result<CorrectorProfile, DesignError> {
    p.validate()?;
    let theta_max = p.max_launch_angle();
    let n = p.segments;
    let mut samples: Vec<ProfileSample> = Vec::with_capacity(n + 1);
    let mut worst_change = 0.0f64;
    for i in 0..=n {
        let theta = theta_max * i as f64 / n as f64;
        let ray = ray_into_plate(p, theta, i)?;
        let slope = solve_exit_slope(ray.u, p.index, i)?;
        if i == 0 {
            samples.push(ProfileSample {
                r_mm: 0.0,
                h_mm: p.center_thickness_mm,
                slope: 0.0,
            });
            continue;
        }
        let prev = samples[i - 1];
        let tan_u = ray.u.tan();
        let mut r_out = ray.r_in + prev.h_mm * tan_u;
        let mut h = prev.h_mm;
        let mut converged = false;
        for _ in 0..MAX_FIXED_POINT_ITERATIONS {
            h = prev.h_mm + 0.5 * (prev.slope + slope) * (r_out - prev.r_mm);
            let next = ray.r_in + h * tan_u;
            let change = (next - r_out).abs();
            r_out = next;
            if change < FIXED_POINT_TOLERANCE_MM {
                worst_change = worst_change.max(change);
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(DesignError::Infeasible {
                segment: i,
                reason: "exit radius did not converge".into(),
            });
        }
        if h <= 0.0 {
            return Err(DesignError::Infeasible {
                segment: i,
                reason: format!("plate thickness {h:.6} mm is not positive"),
            });
        }
        if r_out <= prev.r_mm {
            return Err(DesignError::Infeasible {
                segment: i,
                reason: format!(
                    "rays cross before the exit face (R = {r_out:.6} mm after {:.6} mm)",
                    prev.r_mm
                ),
            });
        }
        samples.push(ProfileSample {
            r_mm: r_out,
            h_mm: h,
            slope,
        });
    }
    let profile = Arc::new(CorrectorProfile::with_slopes(samples, p.index, p.entrance_plane_z_mm)?);
    let stats = exit_angle_residuals(&profile, &p.mirror, p.source, ProfileModel::Samples, p.design_na)?;
    let mut profile = Arc::try_unwrap(profile).unwrap_or_else(|a| (*a).clone());
    profile.set_metadata(DesignMetadata {
        segments: n,
        design_na: p.design_na,
        max_self_consistency_mm: worst_change,
        validation_rays: stats.rays,
        max_residual_rad: stats.max_rad,
        rms_residual_rad: stats.rms_rad,
    });
    Ok(profile)
}

/// Traces a meridional fan of launch angles `[0, asin(na)]` through mirror
/// and plate and reports how far the exit rays deviate from `+z`.
pub fn exit_angle_residuals(
    profile: &Arc<CorrectorProfile>,
    mirror: &Surface,
    source: Point3,
    model: ProfileModel,
    na: f64,
) -> Result<ResidualStats, DesignError> {
    let system = OpticalSystem::new(
        vec![
            Element::Surface {
                label: "mirror".into(),
                surface: mirror.clone(),
            },
            Element::Surface {
                label: "corrector entrance".into(),
                surface: profile.entrance_surface(),
            },
            Element::Surface {
                label: "corrector exit".into(),
                surface: profile.exit_surface(model)?,
            },
        ],
        source,
        na,
    )
    .map_err(|e| DesignError::InvalidParameters(e.to_string()))?;
    let theta_max = na.asin();
    let mut max = 0.0f64;
    let mut sum_sq = 0.0;
    for k in 0..VALIDATION_RAYS {
        let theta = theta_max * k as f64 / (VALIDATION_RAYS - 1) as f64;
        let ray = Ray::new(source, direction(theta.sin(), 0.0, -theta.cos()));
        let out = match system.trace_ray(&ray) {
            RayOutcome::Arrived { ray, .. } => ray,
            RayOutcome::Vignetted { blocker } => {
                return Err(DesignError::Infeasible {
                    segment: k,
                    reason: format!("validation ray at {theta:.6} rad lost at {blocker}"),
                })
            }
        };
        let d = out.direction;
        let angle = d.x.hypot(d.y).atan2(d.z);
        max = max.max(angle);
        sum_sq += angle * angle;
    }
    Ok(ResidualStats {
        rays: VALIDATION_RAYS,
        max_rad: max,
        rms_rad: (sum_sq / VALIDATION_RAYS as f64).sqrt(),
    })
}
