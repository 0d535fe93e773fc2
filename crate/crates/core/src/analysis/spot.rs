use serde::Serialize;

use super::AnalysisError;
use crate::tracer::TraceResult;

/// Thickness of the `y = ȳ` slice used for the FWHM profile.
pub const FWHM_SLICE_UM: f64 = 0.5;
pub const FWHM_BIN_UM: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotDiagram {
    pub hits_um: Vec<[f64; 2]>,
    pub centroid_um: [f64; 2],
    /// Root-mean-square distance from the centroid.
    pub rms_um: f64,
    /// Full width at half maximum of the `x` histogram in the centroid
    /// slice; `None` when the slice is empty.
    pub fwhm_um: Option<f64>,
}

impl SpotDiagram {
    pub fn from_hits(hits_um: Vec<[f64; 2]>) -> Result<Self, AnalysisError> {
        if hits_um.len() < 2 {
            return Err(AnalysisError::InsufficientData(format!(
                "need at least 2 image-plane hits, got {}",
                hits_um.len()
            )));
        }
        let n = hits_um.len() as f64;
        let cx = hits_um.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = hits_um.iter().map(|p| p[1]).sum::<f64>() / n;
        let ms = hits_um
            .iter()
            .map(|p| (p[0] - cx).powi(2) + (p[1] - cy).powi(2))
            .sum::<f64>()
            / n;
        let fwhm_um = slice_fwhm(&hits_um, cx, cy);
        Ok(Self {
            hits_um,
            centroid_um: [cx, cy],
            rms_um: ms.sqrt(),
            fwhm_um,
        })
    }
}

fn slice_fwhm(hits: &[[f64; 2]], cx: f64, cy: f64) -> Option<f64> {
    let xs: Vec<f64> = hits
        .iter()
        .filter(|p| (p[1] - cy).abs() <= 0.5 * FWHM_SLICE_UM)
        .map(|p| p[0] - cx)
        .collect();
    if xs.is_empty() {
        return None;
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bins = ((hi - lo) / FWHM_BIN_UM).floor() as usize + 1;
    let mut counts = vec![0usize; bins];
    for x in &xs {
        counts[(((x - lo) / FWHM_BIN_UM) as usize).min(bins - 1)] += 1;
    }
    let (peak_at, &peak) = counts.iter().enumerate().max_by_key(|(i, c)| (**c, usize::MAX - i))?;
    let half = peak as f64 / 2.0;
    let at = |i: Option<usize>| i.and_then(|i| counts.get(i)).map_or(0.0, |&c| c as f64);
    let mut left = peak_at;
    while left > 0 && counts[left - 1] as f64 > half {
        left -= 1;
    }
    let mut right = peak_at;
    while right + 1 < bins && counts[right + 1] as f64 > half {
        right += 1;
    }
    // half-maximum crossings, interpolated linearly between bin centres;
    // beyond the histogram the profile is zero
    let (v_in, v_out) = (counts[left] as f64, at(left.checked_sub(1)));
    let l = left as f64 - 0.5 + (half - v_out) / (v_in - v_out);
    let (v_in, v_out) = (counts[right] as f64, at(Some(right + 1)));
    let r = right as f64 + 0.5 + (v_in - half) / (v_in - v_out);
    Some((r - l) * FWHM_BIN_UM)
}

/// Spot diagram of the image-plane hits of a trace.
pub fn rms_spot(result: &TraceResult) -> Result<SpotDiagram, AnalysisError> {
    SpotDiagram::from_hits(result.image_points_um())
}
