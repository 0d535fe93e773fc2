use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CountModel, CountRecord, CountSeries, PhotometryError};

const BLOCK: u64 = 1 << 16;
/// Each aperture of a series draws from its own range of generator streams.
const SERIES_STREAM_SHIFT: u32 = 40;

/// Pulse sequence of one excitation cycle. Recorded with the output; the
/// simulator itself only counts cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseTiming {
    pub cooling_ns: f64,
    pub pump_493_ns: f64,
    pub pulse_650_ns: f64,
    pub delay_between_pulses_ns: f64,
    pub gate_delay_ns: f64,
}

impl Default for PulseTiming {
    fn default() -> Self {
        Self {
            cooling_ns: 300.0,
            pump_493_ns: 300.0,
            pulse_650_ns: 500.0,
            delay_between_pulses_ns: 500.0,
            gate_delay_ns: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub cycles: u64,
    pub timing: PulseTiming,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(cycles: u64, seed: u64) -> Self {
        Self {
            cycles,
            timing: PulseTiming::default(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimulatedCounts {
    pub counts_on: u64,
    pub counts_off: u64,
    pub cycles: u64,
}

/// Poisson variate by inversion of a single uniform.
fn poisson(u: f64, lambda: f64) -> u64 {
    let mut k = 0;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    while u > cdf && k < 1000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

fn run(config: &ExperimentConfig, model: &CountModel, stream_base: u64) -> Result<SimulatedCounts, PhotometryError> {
    model.validate()?;
    if config.cycles == 0 {
        return Err(PhotometryError::InvalidModel("cycles must be >= 1".into()));
    }
    let collected = model.eta() * model.omega_fraction;
    let p_signal = collected * model.source_intensity;
    let p_background = collected * model.background;
    for (name, p) in [("signal", p_signal), ("background", p_background)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(PhotometryError::InvalidModel(format!(
                "{name} probability per cycle {p} outside [0, 1]"
            )));
        }
    }
    let dark_rate = model.dark_counts_per_million / 1e6;
    let blocks = config.cycles.div_ceil(BLOCK);
    let arm = |laser_on: bool| -> u64 {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(stream_base + 2 * b + u64::from(!laser_on));
                let n = BLOCK.min(config.cycles - b * BLOCK);
                let mut counts = 0u64;
                for _ in 0..n {
                    if laser_on && rng.random::<f64>() < p_signal {
                        counts += 1;
                    }
                    if rng.random::<f64>() < p_background {
                        counts += 1;
                    }
                    counts += poisson(rng.random::<f64>(), dark_rate);
                }
                counts
            })
            .sum()
    };
    Ok(SimulatedCounts {
        counts_on: arm(true),
        counts_off: arm(false),
        cycles: config.cycles,
    })
}

/// Simulates `config.cycles` pulsed cycles with the laser on and again with
/// it off.
///
/// Per cycle the laser-on arm detects at most one signal photon with
/// probability `η·Ω·I_s`; both arms add a background photon with
/// probability `η·Ω·I_bg` and Poisson dark counts of mean `C₀/10⁶`.
pub fn simulate_experiment(config: &ExperimentConfig, model: &CountModel) -> Result<SimulatedCounts, PhotometryError> {
    run(config, model, 0)
}

/// One simulated measurement per aperture, each from independent streams.
pub fn simulate_series(
    config: &ExperimentConfig,
    model: &CountModel,
    omega_fractions: &[f64],
) -> Result<CountSeries, PhotometryError> {
    let records = omega_fractions
        .iter()
        .enumerate()
        .map(|(k, &omega_fraction)| {
            let m = CountModel {
                omega_fraction,
                ..*model
            };
            let c = run(config, &m, (k as u64) << SERIES_STREAM_SHIFT)?;
            Ok(CountRecord {
                omega_fraction,
                counts_on: c.counts_on,
                counts_off: c.counts_off,
                cycles: c.cycles,
            })
        })
        .collect::<Result<Vec<_>, PhotometryError>>()?;
    CountSeries::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::photometry::predict_counts;
    use crate::presets;

    #[test]
    fn poisson_inversion_matches_pmf() {
        let lambda: f64 = 2.5;
        let pmf = |k: u64| (-lambda).exp() * lambda.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        assert_eq!(poisson(0.0, lambda), 0);
        assert_eq!(poisson(pmf(0) * 0.999, lambda), 0);
        assert_eq!(poisson(pmf(0) + pmf(1) * 0.5, lambda), 1);
        assert_eq!(poisson(pmf(0) + pmf(1) + pmf(2) + 1e-9, lambda), 3);
    }

    #[test]
    fn darks_only_have_poisson_mean() {
        let m = presets::count_model(0.0);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        let runs = 40;
        for seed in 0..runs {
            let c = simulate_experiment(&ExperimentConfig::new(1_000_000, seed), &m).unwrap();
            sum += c.counts_on as f64;
            sum_sq += (c.counts_on as f64).powi(2);
        }
        let mean = sum / runs as f64;
        let var = sum_sq / runs as f64 - mean * mean;
        // standard error of the mean is √(60/40) ≈ 1.22
        assert!((mean - 60.0).abs() < 3.0 * (60.0f64 / runs as f64).sqrt(), "{mean}");
        assert!(var > 20.0 && var < 120.0, "{var}");
    }

    #[test]
    fn null_source_has_zero_mean_difference() {
        let m = CountModel {
            source_intensity: 0.0,
            background: 0.01,
            ..presets::count_model(0.01)
        };
        let runs = 100;
        let diffs: Vec<f64> = (0..runs)
            .map(|seed| {
                let c = simulate_experiment(&ExperimentConfig::new(200_000, seed), &m).unwrap();
                c.counts_on as f64 - c.counts_off as f64
            })
            .collect();
        let mean = diffs.iter().sum::<f64>() / runs as f64;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
        assert!(mean.abs() < 3.0 * (var / runs as f64).sqrt(), "{mean}");
    }

    #[test]
    fn difference_matches_prediction() {
        let m = presets::count_model(0.05);
        let expected = predict_counts(&m, 1_000_000).unwrap();
        let runs = 20;
        let mean = (0..runs)
            .map(|seed| {
                let c = simulate_experiment(&ExperimentConfig::new(1_000_000, 100 + seed), &m).unwrap();
                c.counts_on as f64 - c.counts_off as f64
            })
            .sum::<f64>()
            / runs as f64;
        let sigma = ((expected.laser_on + expected.laser_off) / runs as f64).sqrt();
        assert!(
            (mean - expected.difference).abs() < 3.0 * sigma,
            "{mean} vs {}",
            expected.difference
        );
    }

    #[test]
    fn deterministic_and_single_cycle() {
        let m = presets::count_model(0.02);
        let a = simulate_experiment(&ExperimentConfig::new(300_000, 9), &m).unwrap();
        assert_eq!(a, simulate_experiment(&ExperimentConfig::new(300_000, 9), &m).unwrap());
        let one = simulate_experiment(&ExperimentConfig::new(1, 9), &m).unwrap();
        assert!(one.counts_on <= 3 && one.cycles == 1);
        assert!(simulate_experiment(&ExperimentConfig::new(0, 9), &m).is_err());
    }

    #[test]
    fn impossible_probability_rejected() {
        let m = CountModel {
            eta_t: 1.0,
            eta_pmt: 1.0,
            omega_fraction: 1.0,
            source_intensity: 2.0,
            ..presets::count_model(0.1)
        };
        assert!(simulate_experiment(&ExperimentConfig::new(10, 0), &m).is_err());
    }

    #[test]
    fn series_apertures_use_independent_streams() {
        let m = presets::count_model(0.0);
        let s = simulate_series(&ExperimentConfig::new(100_000, 4), &m, &[0.001, 0.002]).unwrap();
        assert_eq!(s.records().len(), 2);
        let r = s.records();
        assert_ne!((r[0].counts_on, r[0].counts_off), (r[1].counts_on, r[1].counts_off));
    }
}
