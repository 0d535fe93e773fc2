//! Optical design and photon budget of a trapped-ion fluorescence collector:
//! a spherical mirror with an aspheric corrector plate, traced against a
//! parabolic reference, plus the collection solid angle and photon-counting
//! model of the single-photon source.
//!
//! Modules, bottom up:
//! - [`optics`]: rays, surfaces, reflection and refraction.
//! - [`tracer`]: sequential tracing with occluders and ray bundles.
//! - [`corrector`]: segment-fitting corrector design and polynomial fit.
//! - [`analysis`]: spot sizes, misalignment scans, fiber coupling.
//! - [`collection`]: solid angles and the collection budget.
//! - [`photometry`]: throughput, count model, estimation, simulation.
//! - [`presets`]: the trap's default geometry and detection chain.

pub mod analysis;
pub mod collection;
pub mod corrector;
pub mod optics;
pub mod photometry;
pub mod presets;
pub mod tracer;
