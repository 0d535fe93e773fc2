//! Sequential ray tracing through mirror, corrector, ideal lens and image
//! plane, with occluders tested along each propagation segment.

mod occluder;
mod sampling;
mod system;

pub use occluder::{Occluder, OccluderShape, OccluderSpec};
pub use sampling::{sample_source_rays, BundleScheme};
pub use system::{Element, OpticalSystem, RayOutcome, TraceResult};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("invalid optical system: {0}")]
    InvalidSystem(String),
    #[error("invalid ray bundle: {0}")]
    InvalidBundle(String),
}
