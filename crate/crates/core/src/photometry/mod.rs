//! Photon-counting model `C = C₀ + η·Ω·(I_s + I_bg)` with `η = η_t·η_pmt`:
//! throughput chains, count prediction and inversion, source-intensity
//! estimation and a per-cycle simulator of the pulsed experiment.
//!
//! `Ω` is a fraction of 4π throughout; steradians appear only in names
//! ending in `_sr`.

mod chain;
mod estimate;
mod model;
mod simulate;

pub use chain::{ChainElement, LossKind, ThroughputChain};
pub use estimate::{estimate_source_intensity, CountRecord, CountSeries, SourceIntensityEstimate};
pub use model::{
    check_efficiency, invert_to_solid_angle, predict_counts, CountModel, EfficiencyCheck, ExpectedCounts,
    SolidAngleEstimate,
};
pub use simulate::{simulate_experiment, simulate_series, ExperimentConfig, PulseTiming, SimulatedCounts};

use thiserror::Error;

pub const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhotometryError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid count series: {0}")]
    InvalidSeries(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}
