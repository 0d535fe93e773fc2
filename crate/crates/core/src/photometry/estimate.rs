use serde::{Deserialize, Serialize};

use super::PhotometryError;

/// Laser-on and laser-off counts for one aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub omega_fraction: f64,
    pub counts_on: u64,
    pub counts_off: u64,
    pub cycles: u64,
}

/// Measurements over a series of distinct apertures.
///
/// Counts may exceed the cycle count: dark counts add to the at most one
/// signal photon per cycle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountSeries {
    records: Vec<CountRecord>,
}

impl CountSeries {
    pub fn new(records: Vec<CountRecord>) -> Result<Self, PhotometryError> {
        for (i, r) in records.iter().enumerate() {
            if r.cycles == 0 {
                return Err(PhotometryError::InvalidSeries(format!(
                    "record {i}: cycles must be >= 1"
                )));
            }
            if !(0.0..=1.0).contains(&r.omega_fraction) {
                return Err(PhotometryError::InvalidSeries(format!(
                    "record {i}: omega fraction {} outside [0, 1]",
                    r.omega_fraction
                )));
            }
            if records[..i].iter().any(|p| p.omega_fraction == r.omega_fraction) {
                return Err(PhotometryError::InvalidSeries(format!(
                    "record {i}: omega fraction {} repeats",
                    r.omega_fraction
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[CountRecord] {
        &self.records
    }
}

/// `I_s` with statistical and `η_pmt` systematic errors. The systematic
/// band is asymmetric because `I_s ∝ 1/η_pmt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceIntensityEstimate {
    pub value: f64,
    pub stat_stderr: f64,
    pub sys_plus: f64,
    pub sys_minus: f64,
    /// Statistical and systematic errors in quadrature.
    pub plus: f64,
    pub minus: f64,
    /// Fitted counts per cycle per unit `Ω` fraction.
    pub slope: f64,
    pub slope_stderr: f64,
    pub apertures: usize,
}

impl SourceIntensityEstimate {
    /// Is `target` inside `k` combined standard errors?
    pub fn covers(&self, target: f64, k: f64) -> bool {
        let d = target - self.value;
        if d >= 0.0 {
            d <= k * self.plus
        } else {
            -d <= k * self.minus
        }
    }

    pub fn covers_statistically(&self, target: f64, k: f64) -> bool {
        (target - self.value).abs() <= k * self.stat_stderr
    }
}

/// Weighted zero-intercept fit of `(on − off)/cycles` against `Ω`; the
/// slope divided by `η_t·η_pmt` estimates `I_s`.
///
/// Each point is weighted by its Poisson variance `(on + off)/cycles²`, with
/// at least one count assumed so empty points keep a finite weight.
pub fn estimate_source_intensity(
    series: &CountSeries,
    eta_t: f64,
    eta_pmt: f64,
    eta_pmt_stderr: f64,
) -> Result<SourceIntensityEstimate, PhotometryError> {
    let eta = eta_t * eta_pmt;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(PhotometryError::InvalidModel(format!(
            "η_t·η_pmt must be positive, got {eta}"
        )));
    }
    if !(0.0..eta_pmt).contains(&eta_pmt_stderr) {
        return Err(PhotometryError::InvalidModel(format!(
            "η_pmt uncertainty must lie in [0, η_pmt), got {eta_pmt_stderr}"
        )));
    }
    let records = series.records();
    let distinct_nonzero = records.iter().filter(|r| r.omega_fraction > 0.0).count();
    if records.len() < 2 || distinct_nonzero == 0 {
        return Err(PhotometryError::DegenerateFit(
            "need at least two distinct apertures, one of them open".into(),
        ));
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for r in records {
        let n = r.cycles as f64;
        let y = (r.counts_on as f64 - r.counts_off as f64) / n;
        let var = ((r.counts_on + r.counts_off).max(1)) as f64 / (n * n);
        sxx += r.omega_fraction * r.omega_fraction / var;
        sxy += r.omega_fraction * y / var;
    }
    let slope = sxy / sxx;
    let slope_stderr = sxx.recip().sqrt();
    let value = slope / eta;
    let at = |pmt: f64| slope / (eta_t * pmt);
    let sys_plus = at(eta_pmt - eta_pmt_stderr) - value;
    let sys_minus = value - at(eta_pmt + eta_pmt_stderr);
    let stat_stderr = slope_stderr / eta;
    Ok(SourceIntensityEstimate {
        value,
        stat_stderr,
        sys_plus: sys_plus.abs(),
        sys_minus: sys_minus.abs(),
        plus: stat_stderr.hypot(sys_plus),
        minus: stat_stderr.hypot(sys_minus),
        slope,
        slope_stderr,
        apertures: records.len(),
    })
}
