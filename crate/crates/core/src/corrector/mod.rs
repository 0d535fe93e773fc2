//! Aspheric corrector plate: segment-fitting design, even-polynomial fit,
//! fabrication perturbations and the plain-text profile table.

mod design;
mod fit;
mod perturb;
mod profile;

pub use design::{
    design_corrector, exit_angle_residuals, DesignParameters, ResidualStats, DEFAULT_SEGMENTS, MIN_SEGMENTS,
};
pub use fit::{fit_polynomial, max_slope_error};
pub use perturb::perturb_profile;
pub use profile::{CorrectorProfile, DesignMetadata, PolynomialFit, ProfileModel, ProfileSample};

use thiserror::Error;

use crate::optics::OpticsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("invalid profile samples: {0}")]
    InvalidSamples(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error("profile has no fitted polynomial")]
    MissingPolynomial,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DesignError {
    /// No physical exit-face slope exists for this segment.
    #[error("design infeasible at segment {segment}: {reason}")]
    Infeasible { segment: usize, reason: String },
    #[error("invalid design parameters: {0}")]
    InvalidParameters(String),
    #[error("segment {segment}: {source}")]
    Optics { segment: usize, source: OpticsError },
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("order {order} needs at least {needed} samples, got {got}")]
    TooFewSamples { order: usize, needed: usize, got: usize },
    #[error("polynomial order must be even, got {0}")]
    OddOrder(usize),
    #[error("sample set is rank deficient for order {0}")]
    RankDeficient(usize),
}
