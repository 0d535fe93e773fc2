use serde::{Deserialize, Serialize};

use super::{AnalysisError, SpotDiagram};

/// Grid points per fiber mode-field radius.
const SAMPLES_PER_WAIST: f64 = 12.0;
/// Fields are integrated out to this many mode radii.
const WINDOW_WAISTS: f64 = 7.0;

/// Gaussian mode of a single-mode fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberMode {
    /// Diameter at 1/e² intensity.
    pub mfd_um: f64,
}

impl FiberMode {
    pub fn new(mfd_um: f64) -> Result<Self, AnalysisError> {
        if !(mfd_um.is_finite() && mfd_um > 0.0) {
            return Err(AnalysisError::InvalidArgument(format!(
                "MFD must be positive, got {mfd_um}"
            )));
        }
        Ok(Self { mfd_um })
    }

    pub fn waist_um(&self) -> f64 {
        0.5 * self.mfd_um
    }
}

/// Image intensity to couple into the fiber.
#[derive(Debug, Clone, Copy)]
pub enum ImageField<'a> {
    /// Gaussian with the given 1/e² diameter, centred at `center_um`.
    Gaussian { mfd_um: f64, center_um: [f64; 2] },
    /// Hit density of a spot diagram, binned on the integration grid.
    Spot(&'a SpotDiagram),
}

/// Gaussian amplitude `exp(−r²/w²)`.
fn gaussian(x: f64, y: f64, c: [f64; 2], w: f64) -> f64 {
    (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (w * w)).exp()
}

/// Overlap `|∫A_img·A_fib|² / (∫A_img² · ∫A_fib²)` of real amplitudes.
///
/// The image amplitude is `√intensity` with a flat phase, so the result is
/// an upper bound on what a real wavefront would couple. The fiber sits at
/// the image centre (the spot centroid) shifted by `offset_um` along `x`.
pub fn coupling_efficiency(image: &ImageField, fiber: &FiberMode, offset_um: f64) -> Result<f64, AnalysisError> {
    FiberMode::new(fiber.mfd_um)?;
    let w_f = fiber.waist_um();
    match *image {
        ImageField::Gaussian { mfd_um, center_um } => {
            let w_i = FiberMode::new(mfd_um)?.waist_um();
            let fiber_c = [center_um[0] + offset_um, center_um[1]];
            let step = w_i.min(w_f) / SAMPLES_PER_WAIST;
            let reach = WINDOW_WAISTS * w_i.max(w_f);
            let lo = [center_um[0].min(fiber_c[0]) - reach, center_um[1] - reach];
            let hi = [center_um[0].max(fiber_c[0]) + reach, center_um[1] + reach];
            let nx = ((hi[0] - lo[0]) / step).ceil() as usize;
            let ny = ((hi[1] - lo[1]) / step).ceil() as usize;
            let (mut cross, mut img, mut fib) = (0.0, 0.0, 0.0);
            for i in 0..nx {
                let x = lo[0] + (i as f64 + 0.5) * step;
                for j in 0..ny {
                    let y = lo[1] + (j as f64 + 0.5) * step;
                    let a = gaussian(x, y, center_um, w_i);
                    let b = gaussian(x, y, fiber_c, w_f);
                    cross += a * b;
                    img += a * a;
                    fib += b * b;
                }
            }
            if img == 0.0 {
                return Err(AnalysisError::UndefinedCoupling);
            }
            Ok((cross * cross / (img * fib)).clamp(0.0, 1.0))
        }
        ImageField::Spot(spot) => {
            let total = spot.hits_um.len();
            if total == 0 {
                return Err(AnalysisError::UndefinedCoupling);
            }
            // bins of the hit density inside a window around the fiber; hits
            // outside only add to the image power
            let step = w_f / SAMPLES_PER_WAIST * 3.0;
            let reach = WINDOW_WAISTS * w_f;
            let fiber_c = [spot.centroid_um[0] + offset_um, spot.centroid_um[1]];
            let n = (2.0 * reach / step).ceil() as usize;
            let lo = [fiber_c[0] - 0.5 * n as f64 * step, fiber_c[1] - 0.5 * n as f64 * step];
            let mut bins = vec![0usize; n * n];
            for p in &spot.hits_um {
                let i = ((p[0] - lo[0]) / step).floor();
                let j = ((p[1] - lo[1]) / step).floor();
                if i >= 0.0 && j >= 0.0 && (i as usize) < n && (j as usize) < n {
                    bins[i as usize * n + j as usize] += 1;
                }
            }
            let cell = step * step;
            // fiber amplitude integrated over each bin with a 4 × 4 midpoint rule
            let sub = 4;
            let mut cross = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let c = bins[i * n + j];
                    if c == 0 {
                        continue;
                    }
                    let mut fib_int = 0.0;
                    for a in 0..sub {
                        for b in 0..sub {
                            let x = lo[0] + (i as f64 + (a as f64 + 0.5) / sub as f64) * step;
                            let y = lo[1] + (j as f64 + (b as f64 + 0.5) / sub as f64) * step;
                            fib_int += gaussian(x, y, fiber_c, w_f);
                        }
                    }
                    fib_int *= cell / (sub * sub) as f64;
                    // amplitude √(density) with density = c / (total · cell)
                    cross += (c as f64 / (total as f64 * cell)).sqrt() * fib_int;
                }
            }
            // ∫A_img² = 1 by normalisation and ∫A_fib² = π w² / 2
            let fib = std::f64::consts::PI * w_f * w_f / 2.0;
            Ok((cross * cross / fib).clamp(0.0, 1.0))
        }
    }
}
