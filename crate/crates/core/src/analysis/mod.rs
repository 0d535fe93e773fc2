//! Figures of merit from traced systems: RMS spot size, the defocus, tilt
//! and radius-deviation scans, the diffraction-limit line and single-mode
//! fiber coupling.

mod coupling;
mod scan;
mod spot;

pub use coupling::{coupling_efficiency, FiberMode, ImageField};
pub use scan::{scan, trace_spot, ScanKind, ScanResult, ScanRow, ScanSetup, SourceOffset, SystemVariant};
pub use spot::{rms_spot, SpotDiagram, FWHM_BIN_UM, FWHM_SLICE_UM};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("coupling is undefined for an image with zero power")]
    UndefinedCoupling,
    #[error("{0}")]
    System(String),
}

/// Airy radius `0.61·λ/N.A.` in µm for `λ` in nm.
pub fn diffraction_limit(wavelength_nm: f64, na: f64) -> Result<f64, AnalysisError> {
    if !(na > 0.0 && na < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "N.A. must lie in (0, 1), got {na}"
        )));
    }
    if !(wavelength_nm >= 0.0 && wavelength_nm.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!(
            "wavelength must be >= 0, got {wavelength_nm}"
        )));
    }
    Ok(0.61 * wavelength_nm * 1e-3 / na)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffraction_limit_values() {
        let d = diffraction_limit(493.0, 0.63).unwrap();
        assert!((d - 0.4774).abs() < 5e-4);
        assert_eq!(diffraction_limit(493.0, 0.315).unwrap(), 2.0 * d);
        assert_eq!(diffraction_limit(0.0, 0.63).unwrap(), 0.0);
        assert!(diffraction_limit(493.0, 1.0).is_err());
        assert!(diffraction_limit(493.0, 0.0).is_err());
    }
}
