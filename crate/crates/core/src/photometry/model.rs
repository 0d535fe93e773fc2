use serde::{Deserialize, Serialize};

use super::{PhotometryError, ThroughputChain, FOUR_PI};

/// Relative mismatch above which a stated efficiency is flagged.
const EFFICIENCY_FLAG_THRESHOLD: f64 = 0.01;

/// Parameters of `C = C₀ + η·Ω·(I_s + I_bg)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountModel {
    /// `C₀`, dark counts per 10⁶ cycles.
    pub dark_counts_per_million: f64,
    pub eta_pmt: f64,
    pub eta_t: f64,
    /// `Ω` as a fraction of 4π.
    pub omega_fraction: f64,
    /// `I_s`, photons per cycle.
    pub source_intensity: f64,
    /// `I_bg`, background per cycle in the same units as `I_s`.
    pub background: f64,
}

impl CountModel {
    pub fn eta(&self) -> f64 {
        self.eta_t * self.eta_pmt
    }

    pub fn validate(&self) -> Result<(), PhotometryError> {
        let fields = [
            ("dark counts", self.dark_counts_per_million),
            ("eta_pmt", self.eta_pmt),
            ("eta_t", self.eta_t),
            ("omega fraction", self.omega_fraction),
            ("source intensity", self.source_intensity),
            ("background", self.background),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PhotometryError::InvalidModel(format!("{name} must be >= 0, got {v}")));
            }
        }
        for (name, v) in [
            ("eta_pmt", self.eta_pmt),
            ("eta_t", self.eta_t),
            ("omega fraction", self.omega_fraction),
        ] {
            if v > 1.0 {
                return Err(PhotometryError::InvalidModel(format!("{name} must be <= 1, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectedCounts {
    pub cycles: u64,
    pub laser_on: f64,
    pub laser_off: f64,
    /// `η·Ω·I_s·cycles`.
    pub difference: f64,
}

pub fn predict_counts(model: &CountModel, cycles: u64) -> Result<ExpectedCounts, PhotometryError> {
    model.validate()?;
    let n = cycles as f64;
    let dark = model.dark_counts_per_million * n / 1e6;
    let collected = model.eta() * model.omega_fraction * n;
    let background = collected * model.background;
    let difference = collected * model.source_intensity;
    Ok(ExpectedCounts {
        cycles,
        laser_on: dark + background + difference,
        laser_off: dark + background,
        difference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolidAngleEstimate {
    pub omega_fraction: f64,
    pub omega_sr: f64,
    /// First-order combination of the counting and `η_pmt` errors.
    pub stderr_sr: f64,
    pub eta_t: f64,
    pub eta: f64,
}

/// Solves `C_ion = η_t·η_pmt·Ω·I_s` for `Ω`.
///
/// Counts are per cycle. The relative errors of `C_ion` and `η_pmt` are
/// added in quadrature.
pub fn invert_to_solid_angle(
    c_ion_per_cycle: f64,
    c_ion_stderr_per_cycle: f64,
    chain: &ThroughputChain,
    eta_pmt: f64,
    eta_pmt_stderr: f64,
    source_intensity: f64,
) -> Result<SolidAngleEstimate, PhotometryError> {
    let eta_t = chain.throughput();
    let eta = eta_t * eta_pmt;
    let denom = eta * source_intensity;
    if !(denom > 0.0 && denom.is_finite()) {
        return Err(PhotometryError::InvalidModel(format!(
            "η_t·η_pmt·I_s must be positive, got {denom}"
        )));
    }
    if !(c_ion_per_cycle.is_finite() && c_ion_stderr_per_cycle >= 0.0 && eta_pmt_stderr >= 0.0) {
        return Err(PhotometryError::InvalidModel(
            "counts and uncertainties must be finite and >= 0".into(),
        ));
    }
    let omega_fraction = c_ion_per_cycle / denom;
    let rel_counts = if c_ion_per_cycle != 0.0 {
        c_ion_stderr_per_cycle / c_ion_per_cycle
    } else {
        0.0
    };
    let rel = rel_counts.hypot(eta_pmt_stderr / eta_pmt);
    let omega_sr = omega_fraction * FOUR_PI;
    Ok(SolidAngleEstimate {
        omega_fraction,
        omega_sr,
        stderr_sr: omega_sr.abs() * rel,
        eta_t,
        eta,
    })
}

/// Compares a quoted overall efficiency with `η_t·η_pmt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyCheck {
    pub stated_eta: f64,
    pub derived_eta: f64,
    pub relative_difference: f64,
    pub discrepant: bool,
}

pub fn check_efficiency(stated_eta: f64, eta_t: f64, eta_pmt: f64) -> EfficiencyCheck {
    let derived_eta = eta_t * eta_pmt;
    let relative_difference = (stated_eta - derived_eta) / derived_eta;
    EfficiencyCheck {
        stated_eta,
        derived_eta,
        relative_difference,
        discrepant: relative_difference.abs() > EFFICIENCY_FLAG_THRESHOLD,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn model() -> CountModel {
        CountModel {
            dark_counts_per_million: 60.0,
            eta_pmt: 0.127,
            eta_t: 0.433,
            omega_fraction: 0.1,
            source_intensity: 1.0,
            background: 0.002,
        }
    }

    #[test]
    fn no_collection_leaves_dark_counts() {
        let m = CountModel {
            omega_fraction: 0.0,
            ..model()
        };
        let c = predict_counts(&m, 1_000_000).unwrap();
        assert_eq!(c.laser_on, 60.0);
        assert_eq!(c.laser_off, 60.0);
    }

    #[test]
    fn difference_for_quoted_efficiency() {
        // 0.0550 · (1.39 / 4π) · 10⁶
        let m = CountModel {
            eta_t: 0.0550,
            eta_pmt: 1.0,
            omega_fraction: 1.39 / FOUR_PI,
            ..model()
        };
        let d = predict_counts(&m, 1_000_000).unwrap().difference;
        assert!((d - 0.055 * 1.39 / FOUR_PI * 1e6).abs() < 1e-9);
        assert!((d - 6083.70).abs() < 0.01, "{d}");
    }

    #[test]
    fn linear_in_every_factor() {
        let base = predict_counts(&model(), 1_000_000).unwrap().difference;
        for k in [0.5, 2.0, 0.25] {
            let scaled = [
                CountModel {
                    eta_t: model().eta_t * k,
                    ..model()
                },
                CountModel {
                    eta_pmt: model().eta_pmt * k,
                    ..model()
                },
                CountModel {
                    omega_fraction: model().omega_fraction * k,
                    ..model()
                },
                CountModel {
                    source_intensity: model().source_intensity * k,
                    ..model()
                },
            ];
            for m in scaled {
                let d = predict_counts(&m, 1_000_000).unwrap().difference;
                assert!((d - k * base).abs() <= 1e-12 * base);
            }
        }
    }

    #[test]
    fn inversion_round_trips() {
        let chain = presets::detection_chain();
        for omega in [0.0, 0.01, 0.11, 0.6] {
            let m = CountModel {
                eta_t: chain.throughput(),
                omega_fraction: omega,
                ..model()
            };
            let c = predict_counts(&m, 1_000_000).unwrap();
            let est = invert_to_solid_angle(c.difference / 1e6, 0.0, &chain, m.eta_pmt, 0.0, 1.0).unwrap();
            assert!((est.omega_fraction - omega).abs() < 1e-12);
        }
    }

    #[test]
    fn measured_counts_invert_to_published_intervals() {
        let (c, s) = presets::MEASURED_WITH_CORRECTOR;
        let est =
            invert_to_solid_angle(c / 1e6, s / 1e6, &presets::mirror_path_chain(true), 0.127, 0.010, 1.0).unwrap();
        assert!((est.omega_sr - 1.1996).abs() < 1e-3, "{}", est.omega_sr);
        assert!((est.omega_sr - 1.24).abs() <= 0.13);
        let (c, s) = presets::MEASURED_WITHOUT_CORRECTOR;
        let est =
            invert_to_solid_angle(c / 1e6, s / 1e6, &presets::mirror_path_chain(false), 0.127, 0.010, 1.0).unwrap();
        assert!((est.omega_sr - 1.0002).abs() < 1e-3, "{}", est.omega_sr);
        assert!((est.omega_sr - 1.02).abs() <= 0.11);
    }

    #[test]
    fn zero_denominator_rejected() {
        let chain = presets::detection_chain();
        assert!(invert_to_solid_angle(1e-3, 0.0, &chain, 0.0, 0.0, 1.0).is_err());
        assert!(invert_to_solid_angle(1e-3, 0.0, &chain, 0.127, 0.0, 0.0).is_err());
    }

    #[test]
    fn quoted_efficiency_is_flagged() {
        let check = check_efficiency(0.065, presets::detection_chain().throughput(), 0.127);
        assert!((check.derived_eta - 0.0549).abs() < 1e-4);
        assert!(check.discrepant);
        assert!(!check_efficiency(0.0549646, 0.4328, 0.127).discrepant);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(predict_counts(
            &CountModel {
                omega_fraction: 1.5,
                ..model()
            },
            10
        )
        .is_err());
        assert!(predict_counts(&CountModel { eta_t: -0.1, ..model() }, 10).is_err());
    }
}
