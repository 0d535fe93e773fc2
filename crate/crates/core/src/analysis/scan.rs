use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{diffraction_limit, AnalysisError, SpotDiagram};
use crate::corrector::{CorrectorProfile, ProfileModel};
use crate::optics::{direction, Aperture, Point3, Surface, DEFAULT_WAVELENGTH_NM};
use crate::presets;
use crate::tracer::{sample_source_rays, BundleScheme, Element, OpticalSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanKind {
    /// Axial source displacement in µm.
    Defocus,
    /// Off-axis field angle of the source about the mirror vertex, mrad.
    Tilt,
    /// Mirror radius change in per cent with the corrector left as designed.
    RadiusDeviation,
}

impl ScanKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScanKind::Defocus => "defocus",
            ScanKind::Tilt => "tilt",
            ScanKind::RadiusDeviation => "radius-deviation",
        }
    }

    pub fn unit(&self) -> &'static str {
        match self {
            ScanKind::Defocus => "um",
            ScanKind::Tilt => "mrad",
            ScanKind::RadiusDeviation => "percent",
        }
    }

    fn offset(&self, value: f64) -> SourceOffset {
        let mut o = SourceOffset::default();
        match self {
            ScanKind::Defocus => o.defocus_um = value,
            ScanKind::Tilt => o.tilt_mrad = value,
            ScanKind::RadiusDeviation => o.radius_deviation_percent = value,
        }
        o
    }
}

/// Misalignment applied to a nominal system.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SourceOffset {
    pub defocus_um: f64,
    pub tilt_mrad: f64,
    pub radius_deviation_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SystemVariant {
    SphereCorrector,
    /// Paraboloid with the sphere's paraxial focal length.
    Parabola,
    /// The bare sphere.
    Sphere,
    /// A sphere with a corrector read from a profile table.
    External {
        label: String,
        profile: Arc<CorrectorProfile>,
    },
}

impl SystemVariant {
    pub fn label(&self) -> &str {
        match self {
            SystemVariant::SphereCorrector => "sphere+corrector",
            SystemVariant::Parabola => "parabola",
            SystemVariant::Sphere => "sphere",
            SystemVariant::External { label, .. } => label,
        }
    }
}

/// Nominal system shared by every scan point: mirror focused on the ion,
/// corrector, an ideal lens of focal length `r/2` and its focal plane.
///
/// With the lens focal length equal to the mirror's, the image of a
/// collimating system has unit magnification, so image-plane RMS values are
/// quoted directly as object-space sizes.
#[derive(Debug, Clone)]
pub struct ScanSetup {
    pub mirror_radius_mm: f64,
    pub corrector: Arc<CorrectorProfile>,
    pub model: ProfileModel,
    /// Half-angle of the traced bundle, as an N.A.
    pub bundle_na: f64,
    pub rings: usize,
    pub azimuths: usize,
    pub lens_z_mm: f64,
    pub wavelength_nm: f64,
    pub variants: Vec<SystemVariant>,
}

impl ScanSetup {
    pub fn new(mirror_radius_mm: f64, corrector: Arc<CorrectorProfile>) -> Self {
        Self {
            mirror_radius_mm,
            corrector,
            model: ProfileModel::Samples,
            bundle_na: 0.63,
            rings: 24,
            azimuths: 36,
            lens_z_mm: 50.0,
            wavelength_nm: DEFAULT_WAVELENGTH_NM,
            variants: vec![SystemVariant::SphereCorrector, SystemVariant::Parabola],
        }
    }

    fn focal_length(&self) -> f64 {
        0.5 * self.mirror_radius_mm
    }

    fn system(&self, variant: &SystemVariant, offset: SourceOffset) -> Result<OpticalSystem, AnalysisError> {
        let sys_err = |e: String| AnalysisError::System(e);
        let r = self.mirror_radius_mm * (1.0 + offset.radius_deviation_percent / 100.0);
        let sphere = || presets::mirror_surface(r).map_err(|e| sys_err(e.to_string()));
        let mirror = match variant {
            SystemVariant::Parabola => {
                let f = self.focal_length();
                Surface::paraboloid(f, -f, Aperture::Circular { radius_mm: 2.0 * f })
                    .map_err(|e| sys_err(e.to_string()))?
            }
            _ => sphere()?,
        };
        let mut elements = vec![Element::Surface {
            label: "mirror".into(),
            surface: mirror,
        }];
        let plate = match variant {
            SystemVariant::SphereCorrector => Some((&self.corrector, self.model)),
            SystemVariant::External { profile, .. } => Some((profile, ProfileModel::Samples)),
            _ => None,
        };
        if let Some((profile, model)) = plate {
            elements.push(Element::Surface {
                label: "corrector entrance".into(),
                surface: profile.entrance_surface(),
            });
            elements.push(Element::Surface {
                label: "corrector exit".into(),
                surface: profile.exit_surface(model).map_err(|e| sys_err(e.to_string()))?,
            });
        }
        let f = self.focal_length();
        elements.push(Element::IdealLens {
            label: "lens".into(),
            z_mm: self.lens_z_mm,
            focal_length_mm: f,
        });
        elements.push(Element::ImagePlane {
            z_mm: self.lens_z_mm + f,
        });
        let t = offset.tilt_mrad * 1e-3;
        let source = Point3::new(f * t.sin(), 0.0, -f + f * t.cos() + offset.defocus_um * 1e-3);
        OpticalSystem::new(elements, source, self.bundle_na).map_err(|e| sys_err(e.to_string()))
    }
}

/// Traces the ring-grid bundle of one variant and returns its spot.
pub fn trace_spot(
    setup: &ScanSetup,
    variant: &SystemVariant,
    offset: SourceOffset,
) -> Result<SpotDiagram, AnalysisError> {
    if !(setup.bundle_na > 0.0 && setup.bundle_na < 1.0) {
        return Err(AnalysisError::InvalidArgument(format!(
            "bundle N.A. must lie in (0, 1), got {}",
            setup.bundle_na
        )));
    }
    let system = setup.system(variant, offset)?;
    let rays = sample_source_rays(
        system.source(),
        direction(0.0, 0.0, -1.0),
        setup.bundle_na.asin(),
        1,
        BundleScheme::RingGrid {
            rings: setup.rings,
            azimuths: setup.azimuths,
        },
        0,
    )
    .map_err(|e| AnalysisError::InvalidArgument(e.to_string()))?;
    SpotDiagram::from_hits(system.trace(&rays).image_points_um())
}

/// One CSV row of a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub kind: String,
    pub parameter: f64,
    pub variant: String,
    pub rms_um: f64,
    pub diffraction_limit_um: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub kind: ScanKind,
    pub parameters: Vec<f64>,
    pub variants: Vec<String>,
    /// `rms_um[point][variant]`.
    pub rms_um: Vec<Vec<f64>>,
    pub diffraction_limit_um: f64,
}

impl ScanResult {
    pub fn rows(&self) -> Vec<ScanRow> {
        self.parameters
            .iter()
            .zip(&self.rms_um)
            .flat_map(|(&parameter, per_variant)| {
                self.variants.iter().zip(per_variant).map(move |(v, &rms_um)| ScanRow {
                    kind: self.kind.name().to_string(),
                    parameter,
                    variant: v.clone(),
                    rms_um,
                    diffraction_limit_um: self.diffraction_limit_um,
                })
            })
            .collect()
    }

    /// RMS values of one variant across the grid.
    pub fn series(&self, variant: &str) -> Option<Vec<f64>> {
        let k = self.variants.iter().position(|v| v == variant)?;
        Some(self.rms_um.iter().map(|row| row[k]).collect())
    }
}

/// Retraces every variant at every grid point.
///
/// The parabola has no radius to perturb and is left out of
/// radius-deviation scans.
pub fn scan(setup: &ScanSetup, kind: ScanKind, grid: &[f64]) -> Result<ScanResult, AnalysisError> {
    if grid.is_empty() {
        return Err(AnalysisError::InvalidArgument("scan grid is empty".into()));
    }
    let variants: Vec<&SystemVariant> = setup
        .variants
        .iter()
        .filter(|v| !(kind == ScanKind::RadiusDeviation && **v == SystemVariant::Parabola))
        .collect();
    let rms_um = grid
        .par_iter()
        .map(|&value| {
            variants
                .iter()
                .map(|v| {
                    trace_spot(setup, v, kind.offset(value)).map(|s| s.rms_um).map_err(|e| {
                        AnalysisError::InsufficientData(format!(
                            "{} = {value} {} ({}): {e}",
                            kind.name(),
                            kind.unit(),
                            v.label()
                        ))
                    })
                })
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScanResult {
        kind,
        parameters: grid.to_vec(),
        variants: variants.iter().map(|v| v.label().to_string()).collect(),
        rms_um,
        diffraction_limit_um: diffraction_limit(setup.wavelength_nm, setup.bundle_na)?,
    })
}
