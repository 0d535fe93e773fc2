use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorrectorProfile, ProfileSample};

const HARMONICS: usize = 6;

/// Adds a smooth random figure error `ΔH(R) = Σ aₖ cos(kπR/R_max)` scaled so
/// that the largest `|ΔH|` over the samples equals `amplitude_um`.
///
/// Cosines keep the axis slope at zero. The fitted polynomial and design
/// metadata no longer describe the result and are dropped.
pub fn perturb_profile(profile: &CorrectorProfile, amplitude_um: f64, seed: u64) -> CorrectorProfile {
    assert!(
        amplitude_um >= 0.0 && amplitude_um.is_finite(),
        "amplitude must be >= 0"
    );
    if amplitude_um == 0.0 {
        return profile.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (0..HARMONICS)
        .map(|k| rng.random_range(-1.0..1.0) / (k + 1) as f64)
        .collect();
    let k_of = |k: usize| (k + 1) as f64 * PI / profile.r_max();
    let delta = |r: f64| -> (f64, f64) {
        weights.iter().enumerate().fold((0.0, 0.0), |(v, d), (k, a)| {
            let w = k_of(k);
            (v + a * (w * r).cos(), d - a * w * (w * r).sin())
        })
    };
    let peak = profile
        .samples()
        .iter()
        .map(|s| delta(s.r_mm).0.abs())
        .fold(0.0, f64::max);
    let scale = amplitude_um * 1e-3 / peak;
    let samples = profile
        .samples()
        .iter()
        .map(|s| {
            let (v, d) = delta(s.r_mm);
            ProfileSample {
                r_mm: s.r_mm,
                h_mm: s.h_mm + scale * v,
                slope: s.slope + scale * d,
            }
        })
        .collect();
    CorrectorProfile::with_slopes(samples, profile.index(), profile.entrance_plane_z_mm())
        .expect("a bounded smooth perturbation keeps the samples valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile() -> CorrectorProfile {
        let pts: Vec<(f64, f64)> = (0..300)
            .map(|i| {
                let r = 5.0 * i as f64 / 299.0;
                (r, 3.0 + 0.003 * r * r)
            })
            .collect();
        CorrectorProfile::from_points(&pts, 1.49, 30.0).unwrap()
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let p = profile();
        assert_eq!(perturb_profile(&p, 0.0, 4), p);
    }

    #[test]
    fn peak_deviation_matches_amplitude() {
        let p = profile();
        for seed in 0..5 {
            let q = perturb_profile(&p, 25.0, seed);
            let peak = p
                .samples()
                .iter()
                .zip(q.samples())
                .map(|(a, b)| (a.h_mm - b.h_mm).abs())
                .fold(0.0, f64::max);
            assert!((peak * 1e3 - 25.0).abs() < 0.25, "{peak}");
            assert_eq!(q.samples()[0].slope, 0.0);
            assert!(q.polynomial().is_none());
        }
        assert_eq!(perturb_profile(&p, 25.0, 1), perturb_profile(&p, 25.0, 1));
        assert_ne!(perturb_profile(&p, 25.0, 1), perturb_profile(&p, 25.0, 2));
    }
}
