//! Run configuration: a strict TOML schema with units in the key names.
//!
//! Unknown keys are rejected. Errors carry the line of the offending key
//! whenever it can be located in the source text.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ioncollect::collection::{CollectionGeometry, ScatterModel};
use ioncollect::corrector::{CorrectorProfile, DesignParameters};
use ioncollect::optics::{Aperture, Point3, Surface};
use ioncollect::photometry::{ChainElement, LossKind, PulseTiming, ThroughputChain};
use ioncollect::presets;
use ioncollect::tracer::{Occluder, OccluderSpec};
use serde::Deserialize;

/// The trap configuration shipped with the tool.
pub const SHIPPED_TRAP: &str = include_str!("../configs/trap.toml");

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub source_name: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.source_name, line, self.message),
            None => write!(f, "{}: {}", self.source_name, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mirror: MirrorConfig,
    pub ion: IonConfig,
    pub corrector: CorrectorConfig,
    #[serde(default)]
    pub occluders: Vec<OccluderSpec>,
    pub collection: CollectionConfig,
    pub scan: ScanConfig,
    pub photometry: PhotometryConfig,
    pub simulation: SimulationConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorShape {
    Sphere,
    /// Paraboloid with its focus where the sphere's paraxial focus would be.
    Paraboloid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutlineKind {
    /// Circular rim at `na` seen from the ion.
    Circular,
    /// Square ground from a round blank.
    SquareCircle,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorConfig {
    pub shape: MirrorShape,
    pub radius_mm: f64,
    pub outline: OutlineKind,
    pub na: f64,
    pub square_half_width_mm: f64,
    pub blank_radius_mm: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonConfig {
    pub position_mm: [f64; 3],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrectorConfig {
    pub index: f64,
    pub entrance_plane_z_mm: f64,
    pub center_thickness_mm: f64,
    pub segments: usize,
    pub design_na: f64,
    pub fit_order: usize,
    pub max_residual_rad: f64,
    /// Use this profile table instead of designing one.
    pub profile_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollectionConfig {
    pub samples: u64,
    /// Fixed post-mirror loss; ignored when `traced_scatter` is set.
    pub scatter_fraction: f64,
    #[serde(default)]
    pub traced_scatter: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCurve {
    pub label: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub wavelength_nm: f64,
    pub bundle_na: f64,
    pub rings: usize,
    pub azimuths: usize,
    pub lens_z_mm: f64,
    pub defocus_um: Vec<f64>,
    pub tilt_mrad: Vec<f64>,
    pub radius_deviation_percent: Vec<f64>,
    #[serde(default)]
    pub external: Vec<ExternalCurve>,
}

/// One loss element. Exactly one of the loss fields must be given.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainElementConfig {
    pub label: String,
    pub loss_per_surface: Option<f64>,
    pub surfaces: Option<u32>,
    pub bulk_loss: Option<f64>,
    pub reflectivity: Option<f64>,
    pub transmission: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub label: String,
    pub counts_per_million: f64,
    pub counts_stderr_per_million: f64,
    /// Adds the corrector loss to the mirror path.
    pub with_corrector: bool,
    pub published_omega_sr: Option<f64>,
    pub published_omega_stderr_sr: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotometryConfig {
    pub eta_pmt: f64,
    pub eta_pmt_stderr: f64,
    pub stated_eta: f64,
    pub dark_counts_per_million: f64,
    pub source_intensity_per_cycle: f64,
    pub mirror_reflectivity: f64,
    pub corrector_bulk_loss: f64,
    pub detection_chain: Vec<ChainElementConfig>,
    #[serde(default)]
    pub measurements: Vec<MeasurementConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingConfig {
    pub cooling_ns: f64,
    pub pump_493_ns: f64,
    pub pulse_650_ns: f64,
    pub delay_between_pulses_ns: f64,
    pub gate_delay_ns: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub cycles: u64,
    pub source_intensity_per_cycle: f64,
    pub background_per_cycle: f64,
    pub aperture_na: Vec<f64>,
    pub timing: TimingConfig,
}

/// A parsed config plus the text it came from, for error locations.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    source_name: String,
    text: String,
    base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_TRAP, "configs/trap.toml", Path::new(".")).expect("shipped config is valid")
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let name = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            source_name: name.clone(),
            line: None,
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, &name, &base)
    }

    pub fn parse(text: &str, source_name: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            source_name: source_name.to_string(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        let loaded = Self {
            config,
            source_name: source_name.to_string(),
            text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
        };
        loaded.validate()?;
        Ok(loaded)
    }

    /// Error located at `key` inside `[table]` (the `index`-th one for arrays
    /// of tables).
    pub fn error_at(&self, table: &str, index: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            source_name: self.source_name.clone(),
            line: locate_key(&self.text, table, index.unwrap_or(0), key),
            message: format!("{}{}: {}", table_path(table, index), key_suffix(key), message.into()),
        }
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let c = &self.config;
        let positive = |table: &str, key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(self.error_at(table, None, key, format!("must be positive, got {v}")))
            }
        };
        let fraction = |table: &str, key: &str, v: f64, open_top: bool| {
            let ok = v.is_finite() && v > 0.0 && if open_top { v < 1.0 } else { v <= 1.0 };
            if ok {
                Ok(())
            } else {
                Err(self.error_at(table, None, key, format!("must lie in (0, 1), got {v}")))
            }
        };
        positive("mirror", "radius_mm", c.mirror.radius_mm)?;
        fraction("mirror", "na", c.mirror.na, true)?;
        positive("mirror", "square_half_width_mm", c.mirror.square_half_width_mm)?;
        positive("mirror", "blank_radius_mm", c.mirror.blank_radius_mm)?;
        if c.ion.position_mm.iter().any(|v| !v.is_finite()) {
            return Err(self.error_at("ion", None, "position_mm", "must be finite"));
        }

        let k = &c.corrector;
        if !(k.index.is_finite() && k.index >= 1.0) {
            return Err(self.error_at("corrector", None, "index", format!("must be >= 1, got {}", k.index)));
        }
        positive("corrector", "entrance_plane_z_mm", k.entrance_plane_z_mm)?;
        positive("corrector", "center_thickness_mm", k.center_thickness_mm)?;
        fraction("corrector", "design_na", k.design_na, true)?;
        positive("corrector", "max_residual_rad", k.max_residual_rad)?;
        if !k.fit_order.is_multiple_of(2) {
            return Err(self.error_at(
                "corrector",
                None,
                "fit_order",
                format!("must be even, got {}", k.fit_order),
            ));
        }
        if let Some(p) = &k.profile_path {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(self.error_at(
                    "corrector",
                    None,
                    "profile_path",
                    format!("{} does not exist", full.display()),
                ));
            }
        }

        for (i, spec) in c.occluders.iter().enumerate() {
            Occluder::from_spec(spec).map_err(|e| self.error_at("occluders", Some(i), "kind", e.to_string()))?;
        }
        if !(0.0..1.0).contains(&c.collection.scatter_fraction) {
            return Err(self.error_at(
                "collection",
                None,
                "scatter_fraction",
                format!("must lie in [0, 1), got {}", c.collection.scatter_fraction),
            ));
        }

        let s = &c.scan;
        positive("scan", "wavelength_nm", s.wavelength_nm)?;
        fraction("scan", "bundle_na", s.bundle_na, true)?;
        positive("scan", "lens_z_mm", s.lens_z_mm)?;
        if s.rings == 0 || s.azimuths == 0 {
            return Err(self.error_at("scan", None, "rings", "rings and azimuths must be >= 1"));
        }
        for (key, grid) in [
            ("defocus_um", &s.defocus_um),
            ("tilt_mrad", &s.tilt_mrad),
            ("radius_deviation_percent", &s.radius_deviation_percent),
        ] {
            if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
                return Err(self.error_at("scan", None, key, "must be a non-empty list of finite numbers"));
            }
        }
        if s.radius_deviation_percent.iter().any(|&v| v <= -100.0) {
            return Err(self.error_at("scan", None, "radius_deviation_percent", "values must be > -100"));
        }
        for (i, ext) in s.external.iter().enumerate() {
            if !self.resolve(&ext.path).is_file() {
                return Err(self.error_at(
                    "scan.external",
                    Some(i),
                    "path",
                    format!("{} does not exist", self.resolve(&ext.path).display()),
                ));
            }
        }

        let p = &c.photometry;
        fraction("photometry", "eta_pmt", p.eta_pmt, false)?;
        if !(0.0..p.eta_pmt).contains(&p.eta_pmt_stderr) {
            return Err(self.error_at("photometry", None, "eta_pmt_stderr", "must lie in [0, eta_pmt)"));
        }
        fraction("photometry", "stated_eta", p.stated_eta, false)?;
        if !(p.dark_counts_per_million.is_finite() && p.dark_counts_per_million >= 0.0) {
            return Err(self.error_at("photometry", None, "dark_counts_per_million", "must be >= 0"));
        }
        positive("photometry", "source_intensity_per_cycle", p.source_intensity_per_cycle)?;
        fraction("photometry", "mirror_reflectivity", p.mirror_reflectivity, false)?;
        if !(0.0..1.0).contains(&p.corrector_bulk_loss) {
            return Err(self.error_at("photometry", None, "corrector_bulk_loss", "must lie in [0, 1)"));
        }
        if p.detection_chain.is_empty() {
            return Err(self.error_at("photometry", None, "detection_chain", "needs at least one element"));
        }
        for i in 0..p.detection_chain.len() {
            self.chain_element(i)?;
        }
        self.detection_chain()?;
        for (i, m) in p.measurements.iter().enumerate() {
            if !(m.counts_per_million.is_finite() && m.counts_stderr_per_million >= 0.0) {
                return Err(self.error_at(
                    "photometry.measurements",
                    Some(i),
                    "counts_stderr_per_million",
                    "counts must be finite and the error >= 0",
                ));
            }
        }

        let m = &c.simulation;
        if m.cycles == 0 {
            return Err(self.error_at("simulation", None, "cycles", "must be >= 1"));
        }
        positive("simulation", "source_intensity_per_cycle", m.source_intensity_per_cycle)?;
        if !(m.background_per_cycle.is_finite() && m.background_per_cycle >= 0.0) {
            return Err(self.error_at("simulation", None, "background_per_cycle", "must be >= 0"));
        }
        if m.aperture_na.len() < 2 || m.aperture_na.iter().any(|&na| !(na > 0.0 && na < 1.0)) {
            return Err(self.error_at("simulation", None, "aperture_na", "needs at least two values in (0, 1)"));
        }
        Ok(())
    }

    fn chain_element(&self, i: usize) -> Result<ChainElement, ConfigError> {
        let e = &self.config.photometry.detection_chain[i];
        let err = |key: &str, msg: &str| self.error_at("photometry.detection_chain", Some(i), key, msg);
        let kinds = [
            e.loss_per_surface.map(|loss| (loss, "loss_per_surface")),
            e.bulk_loss.map(|loss| (loss, "bulk_loss")),
            e.reflectivity.map(|r| (r, "reflectivity")),
            e.transmission.map(|t| (t, "transmission")),
        ];
        let given: Vec<(f64, &str)> = kinds.into_iter().flatten().collect();
        let [(value, key)] = given[..] else {
            return Err(err(
                "label",
                "give exactly one of loss_per_surface, bulk_loss, reflectivity, transmission",
            ));
        };
        if !(0.0..=1.0).contains(&value) {
            return Err(err(key, "must lie in [0, 1]"));
        }
        let kind = match key {
            "loss_per_surface" => LossKind::PerSurface {
                loss: value,
                surfaces: e.surfaces.ok_or_else(|| err("loss_per_surface", "needs `surfaces`"))?,
            },
            "bulk_loss" => LossKind::Bulk { loss: value },
            "reflectivity" => LossKind::Reflectivity { reflectivity: value },
            _ => LossKind::Filter { transmission: value },
        };
        if e.surfaces.is_some() && key != "loss_per_surface" {
            return Err(err("surfaces", "only valid with loss_per_surface"));
        }
        Ok(ChainElement::new(e.label.clone(), kind))
    }

    pub fn detection_chain(&self) -> Result<ThroughputChain, ConfigError> {
        let elements = (0..self.config.photometry.detection_chain.len())
            .map(|i| self.chain_element(i))
            .collect::<Result<Vec<_>, _>>()?;
        ThroughputChain::new(elements).map_err(|e| self.error_at("photometry", None, "detection_chain", e.to_string()))
    }

    /// Detection chain plus the mirror and, optionally, the corrector.
    pub fn mirror_path_chain(&self, with_corrector: bool) -> ThroughputChain {
        let p = &self.config.photometry;
        let mut elements = self.detection_chain().expect("validated").elements().to_vec();
        elements.push(ChainElement::new(
            "mirror",
            LossKind::Reflectivity {
                reflectivity: p.mirror_reflectivity,
            },
        ));
        if with_corrector {
            elements.push(ChainElement::new(
                "corrector",
                LossKind::Bulk {
                    loss: p.corrector_bulk_loss,
                },
            ));
        }
        ThroughputChain::new(elements).expect("validated elements")
    }

    pub fn ion(&self) -> Point3 {
        let [x, y, z] = self.config.ion.position_mm;
        Point3::new(x, y, z)
    }

    pub fn mirror_aperture(&self) -> Aperture {
        let m = &self.config.mirror;
        match m.outline {
            OutlineKind::Circular => Aperture::Circular {
                radius_mm: presets::mirror_aperture_radius(m.radius_mm, m.na),
            },
            OutlineKind::SquareCircle => Aperture::SquareCircle {
                half_width_mm: m.square_half_width_mm,
                radius_mm: m.blank_radius_mm,
            },
        }
    }

    pub fn mirror(&self) -> Result<Surface, ConfigError> {
        self.mirror_with_aperture(self.mirror_aperture())
    }

    fn mirror_with_aperture(&self, aperture: Aperture) -> Result<Surface, ConfigError> {
        let m = &self.config.mirror;
        let f = 0.5 * m.radius_mm;
        let surface = match m.shape {
            MirrorShape::Sphere => Surface::sphere(m.radius_mm, presets::mirror_vertex_z(m.radius_mm), aperture),
            MirrorShape::Paraboloid => Surface::paraboloid(f, -f, aperture),
        };
        surface.map_err(|e| self.error_at("mirror", None, "radius_mm", e.to_string()))
    }

    pub fn square_cut_mirror(&self) -> Result<Surface, ConfigError> {
        let m = &self.config.mirror;
        self.mirror_with_aperture(Aperture::SquareCircle {
            half_width_mm: m.square_half_width_mm,
            radius_mm: m.blank_radius_mm,
        })
    }

    pub fn occluders(&self) -> Vec<Occluder> {
        self.config
            .occluders
            .iter()
            .map(|s| Occluder::from_spec(s).expect("validated"))
            .collect()
    }

    pub fn collection_geometry(&self) -> Result<CollectionGeometry, ConfigError> {
        let c = &self.config.collection;
        let geometry = CollectionGeometry {
            mirror: self.mirror()?,
            ion: self.ion(),
            occluders: self.occluders(),
            scatter: if c.traced_scatter {
                ScatterModel::TracedMask
            } else {
                ScatterModel::Fraction {
                    fraction: c.scatter_fraction,
                }
            },
        };
        geometry
            .validate()
            .map_err(|e| self.error_at("occluders", None, "kind", e.to_string()))?;
        Ok(geometry)
    }

    pub fn design_parameters(&self) -> Result<DesignParameters, ConfigError> {
        let k = &self.config.corrector;
        Ok(DesignParameters {
            index: k.index,
            entrance_plane_z_mm: k.entrance_plane_z_mm,
            center_thickness_mm: k.center_thickness_mm,
            segments: k.segments,
            design_na: k.design_na,
            ..DesignParameters::new(self.mirror()?, self.ion())
        })
    }

    pub fn timing(&self) -> PulseTiming {
        let t = &self.config.simulation.timing;
        PulseTiming {
            cooling_ns: t.cooling_ns,
            pump_493_ns: t.pump_493_ns,
            pulse_650_ns: t.pulse_650_ns,
            delay_between_pulses_ns: t.delay_between_pulses_ns,
            gate_delay_ns: t.gate_delay_ns,
        }
    }

    pub fn read_profile(
        &self,
        table: &str,
        index: Option<usize>,
        key: &str,
        path: &Path,
    ) -> Result<Arc<CorrectorProfile>, ConfigError> {
        CorrectorProfile::read_table(&self.resolve(path))
            .map(Arc::new)
            .map_err(|e| self.error_at(table, index, key, format!("{}: {e}", path.display())))
    }
}

fn table_path(table: &str, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{table}[{i}]"),
        None => table.to_string(),
    }
}

fn key_suffix(key: &str) -> String {
    format!(".{key}")
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = …` inside the `index`-th `[table]` / `[[table]]` header,
/// falling back to the header line, or `None` when the table is absent.
fn locate_key(text: &str, table: &str, index: usize, key: &str) -> Option<usize> {
    let mut current: Option<&str> = None;
    let mut seen = 0usize;
    let mut header_line = None;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            if let Some(found) = header_line {
                if current == Some(table) {
                    return Some(found);
                }
            }
            current = Some(name);
            if name == table {
                if seen == index {
                    header_line = Some(n + 1);
                } else {
                    current = None;
                }
                seen += 1;
            }
            continue;
        }
        if current == Some(table) && header_line.is_some() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(n + 1);
                }
            }
        }
    }
    header_line.or_else(|| {
        // top-level keys
        (table.is_empty())
            .then(|| {
                text.lines()
                    .position(|l| l.split_once('=').is_some_and(|(k, _)| k.trim() == key))
            })
            .flatten()
            .map(|n| n + 1)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_loads() {
        let c = LoadedConfig::shipped();
        assert_eq!(c.config.occluders.len(), 2);
        assert!((c.detection_chain().unwrap().throughput() - 0.4328).abs() < 1e-4);
        assert!(c.collection_geometry().is_ok());
    }

    #[test]
    fn unknown_key_is_rejected_with_its_line() {
        let text = SHIPPED_TRAP.replacen("radius_mm = 20.0", "radius_mm = 20.0\nradius_cm = 2.0", 1);
        let e = LoadedConfig::parse(&text, "t.toml", Path::new(".")).unwrap_err();
        let expected = text.lines().position(|l| l.starts_with("radius_cm")).unwrap() + 1;
        assert_eq!(e.line, Some(expected), "{e}");
        assert!(e.message.contains("radius_cm"), "{e}");
    }

    #[test]
    fn invalid_value_reports_the_key_line() {
        let text = SHIPPED_TRAP.replacen("index = 1.49", "index = 0.9", 1);
        let e = LoadedConfig::parse(&text, "t.toml", Path::new(".")).unwrap_err();
        let expected = text.lines().position(|l| l.starts_with("index = 0.9")).unwrap() + 1;
        assert_eq!(e.line, Some(expected));
        assert!(
            e.to_string()
                .starts_with(&format!("t.toml:{expected}: corrector.index")),
            "{e}"
        );
    }

    #[test]
    fn locate_key_in_arrays_of_tables() {
        let text = "seed = 1\n[[a]]\nx = 1\n[[a]]\ny = 2\nx = 3\n[b]\nx = 4\n";
        assert_eq!(locate_key(text, "a", 1, "x"), Some(6));
        assert_eq!(locate_key(text, "a", 0, "x"), Some(3));
        assert_eq!(locate_key(text, "a", 1, "z"), Some(4));
        assert_eq!(locate_key(text, "b", 0, "x"), Some(8));
        assert_eq!(locate_key(text, "", 0, "seed"), Some(1));
        assert_eq!(locate_key(text, "c", 0, "x"), None);
    }

    #[test]
    fn chain_element_needs_exactly_one_loss() {
        let text = SHIPPED_TRAP.replacen("transmission = 0.469", "transmission = 0.469\nbulk_loss = 0.1", 1);
        let e = LoadedConfig::parse(&text, "t.toml", Path::new(".")).unwrap_err();
        assert!(e.message.contains("exactly one"), "{e}");
    }
}
