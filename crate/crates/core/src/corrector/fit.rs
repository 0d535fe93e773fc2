use nalgebra::{DMatrix, DVector};

use super::{CorrectorProfile, FitError, PolynomialFit, ProfileModel};

/// Singular values below this fraction of the largest count as zero.
const RANK_TOLERANCE: f64 = 1e-13;

/// Least-squares fit of `H(R)` over even powers `R⁰ … R^order`; the result is
/// stored on the profile and returned.
///
/// The fit is done in `x = R/R_max` by SVD and rescaled afterwards.
pub fn fit_polynomial(profile: &mut CorrectorProfile, order: usize) -> Result<PolynomialFit, FitError> {
    if !order.is_multiple_of(2) {
        return Err(FitError::OddOrder(order));
    }
    let samples = profile.samples();
    if samples.len() < order + 1 {
        return Err(FitError::TooFewSamples {
            order,
            needed: order + 1,
            got: samples.len(),
        });
    }
    let terms = order / 2 + 1;
    let scale = profile.r_max();
    if scale <= 0.0 || scale.is_nan() {
        return Err(FitError::RankDeficient(order));
    }
    let a = DMatrix::from_fn(samples.len(), terms, |i, k| {
        (samples[i].r_mm / scale).powi(2 * k as i32)
    });
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.h_mm));
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.max();
    if svd.singular_values.iter().any(|&s| s <= RANK_TOLERANCE * largest) {
        return Err(FitError::RankDeficient(order));
    }
    let x = svd.solve(&b, 0.0).map_err(|_| FitError::RankDeficient(order))?;
    let coefficients: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(k, c)| c / scale.powi(2 * k as i32))
        .collect();
    let residual = &a * &x - &b;
    let rms_um = (residual.norm_squared() / samples.len() as f64).sqrt() * 1e3;
    let fit = PolynomialFit {
        order,
        coefficients,
        rms_um,
    };
    profile.set_polynomial(fit.clone());
    Ok(fit)
}

/// Largest slope difference between the fitted polynomial and the samples.
pub fn max_slope_error(profile: &CorrectorProfile) -> Option<f64> {
    profile.polynomial()?;
    Some(
        profile
            .samples()
            .iter()
            .map(|s| (profile.slope(s.r_mm, ProfileModel::Polynomial) - s.slope).abs())
            .fold(0.0, f64::max),
    )
}
