use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ProfileError;
use crate::optics::{Aperture, Interaction, Surface, SurfaceShape};

/// Adjacent samples steeper than this are treated as a discontinuity.
const MAX_SAMPLE_SLOPE: f64 = 10.0;
/// The exit face extends this far past the last sample, relative to its
/// radius, continuing along the edge tangent.
const EXIT_RIM_MARGIN: f64 = 0.02;

/// How the thickness between and beyond samples is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileModel {
    /// Cubic Hermite interpolation through the samples and their slopes.
    Samples,
    /// The fitted even polynomial.
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    pub r_mm: f64,
    pub h_mm: f64,
    /// dH/dR at this sample.
    pub slope: f64,
}

/// Least-squares even polynomial; `coefficients[k]` multiplies `R^(2k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialFit {
    pub order: usize,
    pub coefficients: Vec<f64>,
    pub rms_um: f64,
}

impl PolynomialFit {
    pub fn value(&self, r: f64) -> f64 {
        let r2 = r * r;
        self.coefficients.iter().rev().fold(0.0, |acc, c| acc * r2 + c)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let r2 = r * r;
        // Σ 2k c_k R^(2k−1) = R · Σ 2k c_k (R²)^(k−1)
        let inner = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (k, c)| acc * r2 + 2.0 * k as f64 * c);
        r * inner
    }
}

/// Provenance of a designed profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DesignMetadata {
    pub segments: usize,
    pub design_na: f64,
    /// Largest change of a segment's exit radius in the final fixed-point pass.
    pub max_self_consistency_mm: f64,
    pub validation_rays: usize,
    pub max_residual_rad: f64,
    pub rms_residual_rad: f64,
}

/// Corrector plate thickness `H(R)`: flat entrance face at
/// `entrance_plane_z_mm`, aspheric exit face at `entrance_plane_z_mm + H(R)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectorProfile {
    samples: Vec<ProfileSample>,
    polynomial: Option<PolynomialFit>,
    index: f64,
    entrance_plane_z_mm: f64,
    metadata: Option<DesignMetadata>,
}

impl CorrectorProfile {
    /// Profile from samples with known slopes.
    pub fn with_slopes(
        samples: Vec<ProfileSample>,
        index: f64,
        entrance_plane_z_mm: f64,
    ) -> Result<Self, ProfileError> {
        validate_samples(&samples)?;
        if !(index.is_finite() && index >= 1.0) {
            return Err(ProfileError::InvalidSamples(format!(
                "refractive index must be >= 1, got {index}"
            )));
        }
        if !entrance_plane_z_mm.is_finite() {
            return Err(ProfileError::InvalidSamples("entrance plane is not finite".into()));
        }
        Ok(Self {
            samples,
            polynomial: None,
            index,
            entrance_plane_z_mm,
            metadata: None,
        })
    }

    /// Profile from bare `(R, H)` pairs; slopes are estimated from local
    /// quadratics, with zero slope on the axis.
    pub fn from_points(points: &[(f64, f64)], index: f64, entrance_plane_z_mm: f64) -> Result<Self, ProfileError> {
        let slopes = estimate_slopes(points);
        let samples = points
            .iter()
            .zip(slopes)
            .map(|(&(r_mm, h_mm), slope)| ProfileSample { r_mm, h_mm, slope })
            .collect();
        Self::with_slopes(samples, index, entrance_plane_z_mm)
    }

    pub fn samples(&self) -> &[ProfileSample] {
        &self.samples
    }

    pub fn polynomial(&self) -> Option<&PolynomialFit> {
        self.polynomial.as_ref()
    }

    pub fn set_polynomial(&mut self, fit: PolynomialFit) {
        self.polynomial = Some(fit);
    }

    pub fn index(&self) -> f64 {
        self.index
    }

    pub fn entrance_plane_z_mm(&self) -> f64 {
        self.entrance_plane_z_mm
    }

    pub fn center_thickness_mm(&self) -> f64 {
        self.samples[0].h_mm
    }

    pub fn r_max(&self) -> f64 {
        self.samples[self.samples.len() - 1].r_mm
    }

    pub fn metadata(&self) -> Option<&DesignMetadata> {
        self.metadata.as_ref()
    }

    pub(crate) fn set_metadata(&mut self, metadata: DesignMetadata) {
        self.metadata = Some(metadata);
    }

    /// Thickness at radius `r`. Beyond the last sample the profile continues
    /// along its edge tangent. A missing polynomial falls back to the samples.
    pub fn thickness(&self, r: f64, model: ProfileModel) -> f64 {
        let r = r.abs();
        match (model, &self.polynomial) {
            (ProfileModel::Polynomial, Some(p)) => p.value(r),
            _ => self.hermite(r).0,
        }
    }

    pub fn slope(&self, r: f64, model: ProfileModel) -> f64 {
        let sign = if r < 0.0 { -1.0 } else { 1.0 };
        let r = r.abs();
        let s = match (model, &self.polynomial) {
            (ProfileModel::Polynomial, Some(p)) => p.derivative(r),
            _ => self.hermite(r).1,
        };
        sign * s
    }

    fn hermite(&self, r: f64) -> (f64, f64) {
        let s = &self.samples;
        let last = s[s.len() - 1];
        if r >= last.r_mm {
            return (last.h_mm + last.slope * (r - last.r_mm), last.slope);
        }
        let i = s.partition_point(|p| p.r_mm <= r).saturating_sub(1);
        let (a, b) = (s[i], s[i + 1]);
        let h = b.r_mm - a.r_mm;
        let t = (r - a.r_mm) / h;
        let (t2, t3) = (t * t, t * t * t);
        let value = (2.0 * t3 - 3.0 * t2 + 1.0) * a.h_mm
            + (t3 - 2.0 * t2 + t) * h * a.slope
            + (-2.0 * t3 + 3.0 * t2) * b.h_mm
            + (t3 - t2) * h * b.slope;
        let deriv = (6.0 * t2 - 6.0 * t) * (a.h_mm - b.h_mm) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * a.slope
            + (3.0 * t2 - 2.0 * t) * b.slope;
        (value, deriv)
    }

    /// Flat entrance face, air into the plate.
    pub fn entrance_surface(&self) -> Surface {
        Surface::plane(
            self.entrance_plane_z_mm,
            Aperture::Unbounded,
            Interaction::Refract {
                n_in: 1.0,
                n_out: self.index,
            },
        )
        .expect("profile invariants guarantee a valid entrance face")
    }

    /// Aspheric exit face, plate into air, clipped slightly outside the last
    /// sample.
    pub fn exit_surface(self: &Arc<Self>, model: ProfileModel) -> Result<Surface, ProfileError> {
        if model == ProfileModel::Polynomial && self.polynomial.is_none() {
            return Err(ProfileError::MissingPolynomial);
        }
        let radius_mm = self.r_max() * (1.0 + EXIT_RIM_MARGIN) + 1e-9;
        Surface::new(
            SurfaceShape::Asphere {
                profile: Arc::clone(self),
                model,
            },
            self.entrance_plane_z_mm + self.thickness(0.0, model),
            Aperture::Circular { radius_mm },
            Interaction::Refract {
                n_in: self.index,
                n_out: 1.0,
            },
        )
        .map_err(|e| ProfileError::InvalidSamples(e.to_string()))
    }

    /// Two-column `R_mm H_mm` table preceded by a `#` header carrying the
    /// plate parameters. Values use shortest round-trip formatting.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# corrector-profile n={} entrance_plane_mm={} center_thickness_mm={}",
            self.index,
            self.entrance_plane_z_mm,
            self.center_thickness_mm()
        )
        .unwrap();
        out.push_str("R_mm H_mm\n");
        for s in &self.samples {
            writeln!(out, "{} {}", s.r_mm, s.h_mm).unwrap();
        }
        out
    }

    pub fn from_table(text: &str) -> Result<Self, ProfileError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(ProfileError::Parse {
            line: 1,
            message: "empty profile table".into(),
        })?;
        let header = header.strip_prefix('#').ok_or(ProfileError::Parse {
            line: hline,
            message: "expected a '#' header line with n, entrance_plane_mm, center_thickness_mm".into(),
        })?;
        let (mut index, mut entrance, mut center) = (None, None, None);
        for token in header.split_whitespace() {
            let Some((key, value)) = token.split_once('=') else {
                continue;
            };
            let value: f64 = value.parse().map_err(|_| ProfileError::Parse {
                line: hline,
                message: format!("cannot parse '{token}'"),
            })?;
            match key {
                "n" => index = Some(value),
                "entrance_plane_mm" => entrance = Some(value),
                "center_thickness_mm" => center = Some(value),
                _ => {
                    return Err(ProfileError::Parse {
                        line: hline,
                        message: format!("unknown header key '{key}'"),
                    })
                }
            }
        }
        let missing = |k: &str| ProfileError::Parse {
            line: hline,
            message: format!("header is missing '{k}'"),
        };
        let index = index.ok_or_else(|| missing("n"))?;
        let entrance = entrance.ok_or_else(|| missing("entrance_plane_mm"))?;
        let center = center.ok_or_else(|| missing("center_thickness_mm"))?;

        let mut points = Vec::new();
        for (line, content) in lines {
            if content.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|f| !f.is_empty())
                .collect();
            if fields == ["R_mm", "H_mm"] {
                continue;
            }
            let parse = |f: &str| {
                f.parse::<f64>().map_err(|_| ProfileError::Parse {
                    line,
                    message: format!("expected two numbers, got '{content}'"),
                })
            };
            if fields.len() != 2 {
                return Err(ProfileError::Parse {
                    line,
                    message: format!("expected two columns, got '{content}'"),
                });
            }
            points.push((parse(fields[0])?, parse(fields[1])?));
        }
        let profile = Self::from_points(&points, index, entrance)?;
        if (profile.center_thickness_mm() - center).abs() > 1e-9 {
            return Err(ProfileError::InvalidSamples(format!(
                "header center thickness {center} disagrees with H(0) = {}",
                profile.center_thickness_mm()
            )));
        }
        Ok(profile)
    }

    pub fn read_table(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProfileError::Io(format!("{}: {e}", path.display())))?;
        Self::from_table(&text)
    }

    pub fn write_table(&self, path: &Path) -> Result<(), ProfileError> {
        std::fs::write(path, self.to_table()).map_err(|e| ProfileError::Io(format!("{}: {e}", path.display())))
    }
}

fn validate_samples(samples: &[ProfileSample]) -> Result<(), ProfileError> {
    let bad = |m: String| Err(ProfileError::InvalidSamples(m));
    if samples.len() < 2 {
        return bad(format!("need at least 2 samples, got {}", samples.len()));
    }
    if samples[0].r_mm.abs() > 1e-12 {
        return bad(format!("first sample must be on the axis, got R = {}", samples[0].r_mm));
    }
    for s in samples {
        if !(s.r_mm.is_finite() && s.h_mm.is_finite() && s.slope.is_finite()) {
            return bad(format!("non-finite sample {s:?}"));
        }
        if s.h_mm <= 0.0 {
            return bad(format!("thickness must be positive, got H({}) = {}", s.r_mm, s.h_mm));
        }
    }
    for w in samples.windows(2) {
        let dr = w[1].r_mm - w[0].r_mm;
        if dr <= 0.0 {
            return bad(format!("R must increase strictly (at R = {})", w[1].r_mm));
        }
        if ((w[1].h_mm - w[0].h_mm) / dr).abs() > MAX_SAMPLE_SLOPE {
            return bad(format!("discontinuous profile near R = {}", w[1].r_mm));
        }
    }
    Ok(())
}

fn estimate_slopes(points: &[(f64, f64)]) -> Vec<f64> {
    let n = points.len();
    if n < 2 {
        return vec![0.0; n];
    }
    if n == 2 {
        return vec![0.0, (points[1].1 - points[0].1) / (points[1].0 - points[0].0)];
    }
    // derivative at `x` of the quadratic through three points
    let quad = |p: [(f64, f64); 3], x: f64| {
        let [(x0, y0), (x1, y1), (x2, y2)] = p;
        y0 * (2.0 * x - x1 - x2) / ((x0 - x1) * (x0 - x2))
            + y1 * (2.0 * x - x0 - x2) / ((x1 - x0) * (x1 - x2))
            + y2 * (2.0 * x - x0 - x1) / ((x2 - x0) * (x2 - x1))
    };
    let mut slopes = vec![0.0; n];
    for i in 1..n - 1 {
        slopes[i] = quad([points[i - 1], points[i], points[i + 1]], points[i].0);
    }
    slopes[n - 1] = quad([points[n - 3], points[n - 2], points[n - 1]], points[n - 1].0);
    slopes
}
