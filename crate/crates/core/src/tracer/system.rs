use rayon::prelude::*;

use super::{Occluder, TraceError};
use crate::optics::{reflect, refract, Direction3, Interaction, Point3, Ray, RayStatus, Surface, Vec3};

const IMAGE_PLANE_LABEL: &str = "image plane";

#[derive(Debug, Clone)]
pub enum Element {
    Surface {
        label: String,
        surface: Surface,
    },
    /// Checked against the segment that runs from the previous interaction to
    /// the next one.
    Occluder(Occluder),
    /// Aberration-free thin lens in the plane `z = z_mm`.
    IdealLens {
        label: String,
        z_mm: f64,
        focal_length_mm: f64,
    },
    ImagePlane {
        z_mm: f64,
    },
}

/// Sequential system: rays visit `elements` in order.
#[derive(Debug, Clone)]
pub struct OpticalSystem {
    elements: Vec<Element>,
    source: Point3,
    design_na: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RayOutcome {
    /// The ray passed every element. `image_um` is the image-plane hit when
    /// the system ends in an image plane.
    Arrived {
        ray: Ray,
        image_um: Option<[f64; 2]>,
    },
    Vignetted {
        blocker: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    /// One outcome per launched ray, in launch order.
    pub outcomes: Vec<RayOutcome>,
    pub launched: usize,
    pub arrived: usize,
    pub vignetted: usize,
}

impl TraceResult {
    fn from_outcomes(outcomes: Vec<RayOutcome>) -> Self {
        let arrived = outcomes
            .iter()
            .filter(|o| matches!(o, RayOutcome::Arrived { .. }))
            .count();
        Self {
            launched: outcomes.len(),
            arrived,
            vignetted: outcomes.len() - arrived,
            outcomes,
        }
    }

    pub fn image_points_um(&self) -> Vec<[f64; 2]> {
        self.outcomes
            .iter()
            .filter_map(|o| match o {
                RayOutcome::Arrived { image_um: Some(p), .. } => Some(*p),
                _ => None,
            })
            .collect()
    }

    pub fn arrived_rays(&self) -> impl Iterator<Item = &Ray> {
        self.outcomes.iter().filter_map(|o| match o {
            RayOutcome::Arrived { ray, .. } => Some(ray),
            _ => None,
        })
    }

    pub fn vignetted_by(&self, label: &str) -> usize {
        self.outcomes
            .iter()
            .filter(|o| matches!(o, RayOutcome::Vignetted { blocker } if blocker == label))
            .count()
    }
}

impl OpticalSystem {
    pub fn new(elements: Vec<Element>, source: Point3, design_na: f64) -> Result<Self, TraceError> {
        if !(design_na > 0.0 && design_na < 1.0) {
            return Err(TraceError::InvalidSystem(format!(
                "design N.A. must lie in (0, 1), got {design_na}"
            )));
        }
        let planes = elements
            .iter()
            .filter(|e| matches!(e, Element::ImagePlane { .. }))
            .count();
        if planes > 1 {
            return Err(TraceError::InvalidSystem("more than one image plane".into()));
        }
        if planes == 1 && !matches!(elements.last(), Some(Element::ImagePlane { .. })) {
            return Err(TraceError::InvalidSystem(
                "the image plane must be the last element".into(),
            ));
        }
        for e in &elements {
            match e {
                Element::IdealLens {
                    label,
                    z_mm,
                    focal_length_mm,
                } if !(z_mm.is_finite() && focal_length_mm.is_finite() && *focal_length_mm != 0.0) => {
                    return Err(TraceError::InvalidSystem(format!(
                        "ideal lens '{label}' needs a finite position and non-zero focal length"
                    )));
                }
                Element::ImagePlane { z_mm } if !z_mm.is_finite() => {
                    return Err(TraceError::InvalidSystem("image plane position is not finite".into()));
                }
                _ => {}
            }
        }
        if !(source.x.is_finite() && source.y.is_finite() && source.z.is_finite()) {
            return Err(TraceError::InvalidSystem("source position is not finite".into()));
        }
        Ok(Self {
            elements,
            source,
            design_na,
        })
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn source(&self) -> Point3 {
        self.source
    }

    pub fn design_na(&self) -> f64 {
        self.design_na
    }

    pub fn has_image_plane(&self) -> bool {
        matches!(self.elements.last(), Some(Element::ImagePlane { .. }))
    }

    /// Traces every ray; the result is in launch order and independent of
    /// how the work is scheduled.
    pub fn trace(&self, rays: &[Ray]) -> TraceResult {
        let outcomes = rays.par_iter().map(|r| self.trace_ray(r)).collect();
        TraceResult::from_outcomes(outcomes)
    }

    pub fn trace_ray(&self, ray: &Ray) -> RayOutcome {
        let vignetted = |label: &str| RayOutcome::Vignetted {
            blocker: label.to_string(),
        };
        if !ray.is_alive() {
            return vignetted("source");
        }
        let mut ray = ray.clone();
        let mut pending: Vec<&Occluder> = Vec::new();
        let mut image_um = None;
        for element in &self.elements {
            let (point, distance, new_direction) = match element {
                Element::Occluder(o) => {
                    pending.push(o);
                    continue;
                }
                Element::Surface { label, surface } => {
                    let hit = match surface.intersect(&ray) {
                        Ok(h) => h,
                        Err(_) => return vignetted(label),
                    };
                    let next = match surface.interaction() {
                        Interaction::Reflect => reflect(&ray.direction, &hit.normal),
                        Interaction::Refract { n_in, n_out } => {
                            match refract(&ray.direction, &hit.normal, n_in, n_out) {
                                Ok(d) => d,
                                Err(_) => return vignetted(label),
                            }
                        }
                    };
                    (hit.point, hit.distance, next)
                }
                Element::IdealLens {
                    label,
                    z_mm,
                    focal_length_mm,
                } => {
                    let Some((point, distance)) = plane_crossing(&ray, *z_mm) else {
                        return vignetted(label);
                    };
                    let d = ray.direction.as_ref();
                    let side = d.z.signum();
                    // parallel bundles along `d` converge to this focal-plane point
                    let focus = Point3::new(
                        focal_length_mm * d.x / d.z.abs(),
                        focal_length_mm * d.y / d.z.abs(),
                        z_mm + side * focal_length_mm,
                    );
                    let bent = (focus - point) * focal_length_mm.signum();
                    (point, distance, Direction3::new_normalize(bent))
                }
                Element::ImagePlane { z_mm } => {
                    let Some((point, distance)) = plane_crossing(&ray, *z_mm) else {
                        return vignetted(IMAGE_PLANE_LABEL);
                    };
                    image_um = Some([point.x * 1e3, point.y * 1e3]);
                    (point, distance, ray.direction)
                }
            };
            if let Some(o) = pending
                .iter()
                .find(|o| o.blocks_segment(&ray.origin, &ray.direction, distance))
            {
                return vignetted(&o.label);
            }
            pending.clear();
            ray.origin = point;
            ray.direction = new_direction;
        }
        if let Some(o) = pending
            .iter()
            .find(|o| o.blocks_segment(&ray.origin, &ray.direction, f64::INFINITY))
        {
            return vignetted(&o.label);
        }
        ray.status = RayStatus::Alive;
        RayOutcome::Arrived { ray, image_um }
    }
}

fn plane_crossing(ray: &Ray, z: f64) -> Option<(Point3, f64)> {
    let d: &Vec3 = ray.direction.as_ref();
    if d.z == 0.0 {
        return None;
    }
    let t = (z - ray.origin.z) / d.z;
    (t > 0.0).then(|| (ray.at(t), t))
}
