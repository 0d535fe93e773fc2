//! Subcommands. Each writes its files into the output directory and returns
//! the threshold checks it evaluated; `--check` turns failed checks into
//! exit code 3.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ioncollect::analysis::{self, ScanKind, ScanResult, ScanSetup, SourceOffset, SystemVariant};
use ioncollect::collection::{aperture_solid_angle, solid_angle_mc, CollectionReport, MIN_MC_SAMPLES};
use ioncollect::corrector::{
    design_corrector, exit_angle_residuals, fit_polynomial, max_slope_error, CorrectorProfile, DesignError,
    ProfileModel,
};
use ioncollect::photometry::{
    check_efficiency, estimate_source_intensity, invert_to_solid_angle, simulate_series, CountModel, EfficiencyCheck,
    ExperimentConfig, SolidAngleEstimate, SourceIntensityEstimate,
};
use ioncollect::presets;
use serde::Serialize;

use crate::config::{ConfigError, LoadedConfig, MirrorShape};

const OUTLINE_AZIMUTHS: usize = 720;

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    /// The computation has no solution for this configuration.
    Infeasible(String),
    /// Thresholds failed under `--check`.
    Check(Vec<String>),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) | Failure::Io(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Check(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "config error: {e}"),
            Failure::Infeasible(m) => write!(f, "infeasible: {m}"),
            Failure::Check(failed) => write!(f, "{} check(s) failed: {}", failed.len(), failed.join("; ")),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

/// Global flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Options {
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub check: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl Outcome {
    fn absorb(&mut self, other: Outcome) {
        self.files.extend(other.files);
        self.checks.extend(other.checks);
    }

    /// Applies `--check`.
    pub fn finish(self, options: &Options) -> Result<Outcome, Failure> {
        let failed: Vec<String> = self
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{} ({})", c.name, c.detail))
            .collect();
        if options.check && !failed.is_empty() {
            return Err(Failure::Check(failed));
        }
        Ok(self)
    }
}

struct Context<'a> {
    cfg: &'a LoadedConfig,
    out: &'a Path,
    seed: u64,
}

impl Context<'_> {
    fn write(&self, outcome: &mut Outcome, name: &str, contents: &str) -> Result<(), Failure> {
        std::fs::create_dir_all(self.out).map_err(|e| Failure::Io(format!("{}: {e}", self.out.display())))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        outcome.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&self, outcome: &mut Outcome, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::Io(e.to_string()))?;
        text.push('\n');
        self.write(outcome, name, &text)
    }

    fn write_csv<T: Serialize>(&self, outcome: &mut Outcome, name: &str, rows: &[T]) -> Result<(), Failure> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row).map_err(|e| Failure::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
        self.write(outcome, name, &String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn infeasible(e: impl std::fmt::Display) -> Failure {
    Failure::Infeasible(e.to_string())
}

// ---------------------------------------------------------------- design

#[derive(Debug, Clone, Serialize)]
pub struct PolynomialReport {
    pub order: usize,
    /// Coefficients of `R⁰, R², …` with `H` and `R` in mm.
    pub coefficients: Vec<f64>,
    pub fit_rms_um: f64,
    pub max_slope_error: f64,
    pub max_residual_rad: f64,
    pub rms_residual_rad: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OnAxisSpots {
    pub diffraction_limit_um: f64,
    pub sphere_corrector_rms_um: f64,
    pub parabola_rms_um: f64,
    pub sphere_rms_um: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignReport {
    pub profile_source: String,
    pub mirror_shape: String,
    pub mirror_radius_mm: f64,
    pub index: f64,
    pub entrance_plane_z_mm: f64,
    pub center_thickness_mm: f64,
    pub segments: usize,
    pub design_na: f64,
    pub r_max_mm: f64,
    pub edge_thickness_mm: f64,
    pub max_self_consistency_mm: Option<f64>,
    pub validation_rays: usize,
    pub max_residual_rad: f64,
    pub rms_residual_rad: f64,
    pub residual_limit_rad: f64,
    pub residual_ok: bool,
    pub polynomial: PolynomialReport,
    /// Only for a spherical mirror.
    pub on_axis: Option<OnAxisSpots>,
}

fn design_failure(cfg: &LoadedConfig, e: DesignError) -> Failure {
    match e {
        DesignError::InvalidParameters(m) => Failure::Config(cfg.error_at("corrector", None, "index", m)),
        other => infeasible(other),
    }
}

/// Designs (or loads) the corrector, fits it and validates both surfaces.
fn build_corrector(ctx: &Context) -> Result<(Arc<CorrectorProfile>, DesignReport), Failure> {
    let cfg = ctx.cfg;
    let k = &cfg.config.corrector;
    let mirror = cfg.mirror()?;
    let (mut profile, source) = match &k.profile_path {
        Some(path) => {
            let p = cfg.read_profile("corrector", None, "profile_path", path)?;
            (Arc::unwrap_or_clone(p), format!("table {}", path.display()))
        }
        None => (
            design_corrector(&cfg.design_parameters()?).map_err(|e| design_failure(cfg, e))?,
            "segment design".to_string(),
        ),
    };
    let fit = fit_polynomial(&mut profile, k.fit_order)
        .map_err(|e| Failure::Config(cfg.error_at("corrector", None, "fit_order", e.to_string())))?;
    let slope_error = max_slope_error(&profile).expect("polynomial was just fitted");
    let profile = Arc::new(profile);
    let residuals = |model| {
        exit_angle_residuals(&profile, &mirror, cfg.ion(), model, k.design_na).map_err(|e| design_failure(cfg, e))
    };
    let samples = residuals(ProfileModel::Samples)?;
    let poly = residuals(ProfileModel::Polynomial)?;

    let on_axis = if cfg.config.mirror.shape == MirrorShape::Sphere {
        let setup = scan_setup(cfg, profile.clone());
        let spot = |v: &SystemVariant| {
            analysis::trace_spot(&setup, v, SourceOffset::default())
                .map(|s| s.rms_um)
                .map_err(infeasible)
        };
        Some(OnAxisSpots {
            diffraction_limit_um: analysis::diffraction_limit(setup.wavelength_nm, setup.bundle_na)
                .map_err(infeasible)?,
            sphere_corrector_rms_um: spot(&SystemVariant::SphereCorrector)?,
            parabola_rms_um: spot(&SystemVariant::Parabola)?,
            sphere_rms_um: spot(&SystemVariant::Sphere)?,
        })
    } else {
        None
    };

    let edge = profile.samples().last().expect("profile has samples").h_mm;
    let report = DesignReport {
        profile_source: source,
        mirror_shape: format!("{:?}", cfg.config.mirror.shape).to_lowercase(),
        mirror_radius_mm: cfg.config.mirror.radius_mm,
        index: profile.index(),
        entrance_plane_z_mm: profile.entrance_plane_z_mm(),
        center_thickness_mm: profile.center_thickness_mm(),
        segments: profile.samples().len() - 1,
        design_na: k.design_na,
        r_max_mm: profile.r_max(),
        edge_thickness_mm: edge,
        max_self_consistency_mm: profile.metadata().map(|m| m.max_self_consistency_mm),
        validation_rays: samples.rays,
        max_residual_rad: samples.max_rad,
        rms_residual_rad: samples.rms_rad,
        residual_limit_rad: k.max_residual_rad,
        residual_ok: samples.max_rad <= k.max_residual_rad,
        polynomial: PolynomialReport {
            order: fit.order,
            coefficients: fit.coefficients.clone(),
            fit_rms_um: fit.rms_um,
            max_slope_error: slope_error,
            max_residual_rad: poly.max_rad,
            rms_residual_rad: poly.rms_rad,
        },
        on_axis,
    };
    Ok((profile, report))
}

fn design_checks(r: &DesignReport) -> Vec<Check> {
    let mut checks = vec![
        Check::new(
            "corrector exit-angle residual",
            r.residual_ok,
            format!(
                "max {:.3e} rad, limit {:.1e} rad",
                r.max_residual_rad, r.residual_limit_rad
            ),
        ),
        Check::new(
            "polynomial fit rms",
            r.polynomial.fit_rms_um <= 0.1,
            format!(
                "order {} rms {:.4} um, limit 0.1 um",
                r.polynomial.order, r.polynomial.fit_rms_um
            ),
        ),
    ];
    if let Some(s) = &r.on_axis {
        checks.push(Check::new(
            "corrected spot below diffraction limit",
            s.sphere_corrector_rms_um < s.diffraction_limit_um,
            format!(
                "{:.3e} um vs {:.4} um",
                s.sphere_corrector_rms_um, s.diffraction_limit_um
            ),
        ));
        checks.push(Check::new(
            "bare sphere at least 100x worse",
            s.sphere_rms_um >= 100.0 * s.sphere_corrector_rms_um && s.sphere_rms_um > s.diffraction_limit_um,
            format!("{:.2} um vs {:.3e} um", s.sphere_rms_um, s.sphere_corrector_rms_um),
        ));
    }
    checks
}

fn design_outputs(ctx: &Context, profile: &CorrectorProfile, report: &DesignReport) -> Result<Outcome, Failure> {
    let mut outcome = Outcome::default();
    ctx.write(&mut outcome, "corrector_profile.txt", &profile.to_table())?;
    ctx.write_json(&mut outcome, "design_report.json", report)?;
    outcome.checks = design_checks(report);
    Ok(outcome)
}

// ------------------------------------------------------------------ scan

fn scan_setup(cfg: &LoadedConfig, corrector: Arc<CorrectorProfile>) -> ScanSetup {
    let s = &cfg.config.scan;
    ScanSetup {
        bundle_na: s.bundle_na,
        rings: s.rings,
        azimuths: s.azimuths,
        lens_z_mm: s.lens_z_mm,
        wavelength_nm: s.wavelength_nm,
        ..ScanSetup::new(cfg.config.mirror.radius_mm, corrector)
    }
}

pub fn grid(cfg: &LoadedConfig, kind: ScanKind) -> &[f64] {
    let s = &cfg.config.scan;
    match kind {
        ScanKind::Defocus => &s.defocus_um,
        ScanKind::Tilt => &s.tilt_mrad,
        ScanKind::RadiusDeviation => &s.radius_deviation_percent,
    }
}

fn run_scan(ctx: &Context, corrector: Arc<CorrectorProfile>, kind: ScanKind) -> Result<Outcome, Failure> {
    let cfg = ctx.cfg;
    let mut setup = scan_setup(cfg, corrector);
    for (i, ext) in cfg.config.scan.external.iter().enumerate() {
        let profile = cfg.read_profile("scan.external", Some(i), "path", &ext.path)?;
        setup.variants.push(SystemVariant::External {
            label: ext.label.clone(),
            profile,
        });
    }
    let result = analysis::scan(&setup, kind, grid(cfg, kind)).map_err(infeasible)?;
    let mut outcome = Outcome::default();
    ctx.write_csv(&mut outcome, &format!("scan_{}.csv", kind.name()), &result.rows())?;
    outcome.checks = scan_checks(&result);
    Ok(outcome)
}

/// Index of the grid point at zero, if any.
fn zero_point(r: &ScanResult) -> Option<usize> {
    r.parameters.iter().position(|&p| p == 0.0)
}

pub fn scan_checks(r: &ScanResult) -> Vec<Check> {
    let limit = r.diffraction_limit_um;
    let corrected = r
        .series(SystemVariant::SphereCorrector.label())
        .expect("always scanned");
    let Some(z) = zero_point(r) else {
        return vec![];
    };
    match r.kind {
        ScanKind::Defocus => vec![Check::new(
            "defocus: in-focus spot below diffraction limit",
            corrected[z] <= limit,
            format!("{:.3e} um vs {:.4} um", corrected[z], limit),
        )],
        ScanKind::Tilt => {
            let parabola = r
                .series(SystemVariant::Parabola.label())
                .expect("parabola scanned for tilt");
            let d = (corrected[z] - parabola[z]).abs();
            vec![Check::new(
                "tilt: corrector matches parabola on axis",
                d <= 0.1 * limit,
                format!("|difference| {:.3e} um, allowed {:.4} um", d, 0.1 * limit),
            )]
        }
        ScanKind::RadiusDeviation => {
            let mut order: Vec<usize> = (0..r.parameters.len()).collect();
            order.sort_by(|&a, &b| r.parameters[a].total_cmp(&r.parameters[b]));
            let zi = order.iter().position(|&i| i == z).expect("zero is on the grid");
            let values: Vec<f64> = order.iter().map(|&i| corrected[i]).collect();
            let monotone =
                values[..=zi].windows(2).all(|w| w[0] > w[1]) && values[zi..].windows(2).all(|w| w[0] < w[1]);
            let crosses = values[zi] <= limit && values.iter().any(|&v| v > limit);
            vec![
                Check::new(
                    "radius deviation: spot grows monotonically away from zero",
                    monotone,
                    format!("{} points", values.len()),
                ),
                Check::new(
                    "radius deviation: crosses the diffraction limit",
                    crosses,
                    format!(
                        "zero point {:.3e} um, worst {:.3} um, limit {:.4} um",
                        values[zi],
                        values.iter().cloned().fold(0.0, f64::max),
                        limit
                    ),
                ),
            ]
        }
    }
}

// ---------------------------------------------------------------- budget

#[derive(Debug, Clone, Serialize)]
pub struct InversionReport {
    pub label: String,
    pub counts_per_million: f64,
    pub counts_stderr_per_million: f64,
    pub with_corrector: bool,
    pub estimate: SolidAngleEstimate,
    pub published_omega_sr: Option<f64>,
    pub published_omega_stderr_sr: Option<f64>,
    pub inside_published_interval: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThroughputReport {
    pub elements: Vec<(String, f64)>,
    pub eta_t: f64,
    pub eta_pmt: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BudgetReport {
    pub collection: CollectionReport,
    pub published_blocked_sr: f64,
    pub published_effective_sr: f64,
    pub published_effective_na: f64,
    /// Square-cut outline of the same mirror, for comparison only.
    pub square_cut_outline_sr: f64,
    pub throughput: ThroughputReport,
    pub efficiency_check: EfficiencyCheck,
    pub inversions: Vec<InversionReport>,
}

fn build_budget(ctx: &Context, samples: u64) -> Result<BudgetReport, Failure> {
    let cfg = ctx.cfg;
    let geometry = cfg.collection_geometry()?;
    let collection = solid_angle_mc(&geometry, samples, ctx.seed).map_err(infeasible)?;
    let mut square = geometry.clone();
    square.mirror = cfg.square_cut_mirror()?;
    let square_cut_outline_sr = aperture_solid_angle(&square, OUTLINE_AZIMUTHS);

    let p = &cfg.config.photometry;
    let chain = cfg.detection_chain()?;
    let eta_t = chain.throughput();
    let throughput = ThroughputReport {
        elements: chain
            .elements()
            .iter()
            .map(|e| (e.label.clone(), e.kind.transmission()))
            .collect(),
        eta_t,
        eta_pmt: p.eta_pmt,
        eta: eta_t * p.eta_pmt,
    };
    let inversions = p
        .measurements
        .iter()
        .map(|m| {
            let estimate = invert_to_solid_angle(
                m.counts_per_million / 1e6,
                m.counts_stderr_per_million / 1e6,
                &cfg.mirror_path_chain(m.with_corrector),
                p.eta_pmt,
                p.eta_pmt_stderr,
                p.source_intensity_per_cycle,
            )
            .map_err(infeasible)?;
            let inside = match (m.published_omega_sr, m.published_omega_stderr_sr) {
                (Some(v), Some(e)) => Some((estimate.omega_sr - v).abs() <= e),
                _ => None,
            };
            Ok(InversionReport {
                label: m.label.clone(),
                counts_per_million: m.counts_per_million,
                counts_stderr_per_million: m.counts_stderr_per_million,
                with_corrector: m.with_corrector,
                estimate,
                published_omega_sr: m.published_omega_sr,
                published_omega_stderr_sr: m.published_omega_stderr_sr,
                inside_published_interval: inside,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    Ok(BudgetReport {
        collection,
        published_blocked_sr: presets::PUBLISHED_BLOCKED_SR,
        published_effective_sr: presets::PUBLISHED_EFFECTIVE_SR,
        published_effective_na: presets::PUBLISHED_EFFECTIVE_NA,
        square_cut_outline_sr,
        efficiency_check: check_efficiency(p.stated_eta, eta_t, p.eta_pmt),
        throughput,
        inversions,
    })
}

pub fn budget_checks(b: &BudgetReport) -> Vec<Check> {
    let c = &b.collection;
    let within = |v: f64, target: f64, rel: f64| (v - target).abs() <= rel * target;
    let mut checks = vec![
        Check::new(
            "total solid angle matches aperture",
            within(c.total_sr, c.analytic_total_sr, 0.02),
            format!("{:.4} sr vs {:.4} sr", c.total_sr, c.analytic_total_sr),
        ),
        Check::new(
            "blocked solid angle",
            within(c.blocked_sr, b.published_blocked_sr, 0.1),
            format!("{:.4} sr vs {} sr", c.blocked_sr, b.published_blocked_sr),
        ),
        Check::new(
            "effective solid angle",
            within(c.effective_sr, b.published_effective_sr, 0.1),
            format!("{:.4} sr vs {} sr", c.effective_sr, b.published_effective_sr),
        ),
        Check::new(
            "effective N.A.",
            (c.effective_na - b.published_effective_na).abs() <= 0.02,
            format!("{:.4} vs {}", c.effective_na, b.published_effective_na),
        ),
        Check::new(
            "throughput eta_t",
            (b.throughput.eta_t - presets::PUBLISHED_ETA_T).abs() <= 0.002,
            format!("{:.4} vs {}", b.throughput.eta_t, presets::PUBLISHED_ETA_T),
        ),
    ];
    for inv in &b.inversions {
        if let (Some(inside), Some(v), Some(e)) = (
            inv.inside_published_interval,
            inv.published_omega_sr,
            inv.published_omega_stderr_sr,
        ) {
            checks.push(Check::new(
                format!("inverted solid angle, {}", inv.label),
                inside,
                format!("{:.4} sr vs {v} ± {e} sr", inv.estimate.omega_sr),
            ));
        }
    }
    checks
}

pub fn budget_table(b: &BudgetReport) -> String {
    let c = &b.collection;
    let mut t = String::new();
    let mut row = |q: &str, computed: String, published: String, note: &str| {
        writeln!(t, "{q:<44} {computed:<22} {published:<16} {note}").expect("writing to a string");
    };
    row("quantity", "computed".into(), "published".into(), "note");
    row(
        "mirror aperture solid angle (sr)",
        format!("{:.4} ± {:.4}", c.total_sr, c.total_stderr_sr),
        "≈ 2.7".into(),
        &format!("analytic {:.4}", c.analytic_total_sr),
    );
    row(
        "blocked by rods (sr)",
        format!("{:.4} ± {:.4}", c.blocked_sr, c.blocked_stderr_sr),
        format!("{}", b.published_blocked_sr),
        "",
    );
    row(
        "effective solid angle (sr)",
        format!("{:.4} ± {:.4}", c.effective_sr, c.effective_stderr_sr),
        format!("{}", b.published_effective_sr),
        &format!("scatter loss {:.3}", c.scatter_fraction),
    );
    row(
        "effective N.A.",
        format!("{:.4}", c.effective_na),
        format!("{}", b.published_effective_na),
        "",
    );
    row(
        "square-cut outline (sr)",
        format!("{:.4}", b.square_cut_outline_sr),
        "-".into(),
        "comparison only",
    );
    row(
        "eta_t",
        format!("{:.4}", b.throughput.eta_t),
        format!("{}", presets::PUBLISHED_ETA_T),
        "",
    );
    let e = &b.efficiency_check;
    row(
        "eta = eta_t * eta_pmt",
        format!("{:.4}", e.derived_eta),
        format!("{}", e.stated_eta),
        &if e.discrepant {
            format!("DISCREPANT: stated value {:+.1}% off", 100.0 * e.relative_difference)
        } else {
            "consistent".to_string()
        },
    );
    for inv in &b.inversions {
        let published = match (inv.published_omega_sr, inv.published_omega_stderr_sr) {
            (Some(v), Some(e)) => format!("{v} ± {e}"),
            _ => "-".into(),
        };
        let note = match inv.inside_published_interval {
            Some(true) => "inside published interval",
            Some(false) => "OUTSIDE published interval",
            None => "",
        };
        row(
            &format!("solid angle, {} (sr)", inv.label),
            format!("{:.4} ± {:.4}", inv.estimate.omega_sr, inv.estimate.stderr_sr),
            published,
            note,
        );
    }
    t
}

fn run_budget(ctx: &Context, samples: u64) -> Result<Outcome, Failure> {
    let report = build_budget(ctx, samples)?;
    let mut outcome = Outcome::default();
    ctx.write_json(&mut outcome, "budget.json", &report)?;
    ctx.write(&mut outcome, "budget.txt", &budget_table(&report))?;
    outcome.checks = budget_checks(&report);
    Ok(outcome)
}

// -------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize)]
pub struct SimulatedRow {
    pub aperture_na: f64,
    pub omega_fraction: f64,
    pub counts_on: u64,
    pub counts_off: u64,
    pub cycles: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SourceIntensityReport {
    pub seed: u64,
    pub cycles: u64,
    pub true_source_intensity: f64,
    pub estimate: SourceIntensityEstimate,
    pub within_two_sigma: bool,
    pub published_value: f64,
    pub published_plus: f64,
    pub published_minus: f64,
}

/// `Ω/4π` of a circular cone of the given N.A.
pub fn cone_fraction(na: f64) -> f64 {
    0.5 * (1.0 - na.asin().cos())
}

fn run_simulate(ctx: &Context) -> Result<Outcome, Failure> {
    let cfg = ctx.cfg;
    let s = &cfg.config.simulation;
    let p = &cfg.config.photometry;
    let eta_t = cfg.detection_chain()?.throughput();
    let model = CountModel {
        dark_counts_per_million: p.dark_counts_per_million,
        eta_pmt: p.eta_pmt,
        eta_t,
        omega_fraction: 0.0,
        source_intensity: s.source_intensity_per_cycle,
        background: s.background_per_cycle,
    };
    let config = ExperimentConfig {
        cycles: s.cycles,
        timing: cfg.timing(),
        seed: ctx.seed,
    };
    let fractions: Vec<f64> = s.aperture_na.iter().map(|&na| cone_fraction(na)).collect();
    let series = simulate_series(&config, &model, &fractions)
        .map_err(|e| Failure::Config(cfg.error_at("simulation", None, "source_intensity_per_cycle", e.to_string())))?;
    let estimate = estimate_source_intensity(&series, eta_t, p.eta_pmt, p.eta_pmt_stderr).map_err(infeasible)?;
    let rows: Vec<SimulatedRow> = s
        .aperture_na
        .iter()
        .zip(series.records())
        .map(|(&aperture_na, r)| SimulatedRow {
            aperture_na,
            omega_fraction: r.omega_fraction,
            counts_on: r.counts_on,
            counts_off: r.counts_off,
            cycles: r.cycles,
        })
        .collect();
    let (published_value, published_plus, published_minus) = presets::PUBLISHED_SOURCE_INTENSITY;
    let report = SourceIntensityReport {
        seed: ctx.seed,
        cycles: s.cycles,
        true_source_intensity: s.source_intensity_per_cycle,
        within_two_sigma: estimate.covers(s.source_intensity_per_cycle, 2.0),
        estimate,
        published_value,
        published_plus,
        published_minus,
    };
    let mut outcome = Outcome::default();
    ctx.write_csv(&mut outcome, "simulated_counts.csv", &rows)?;
    ctx.write_json(&mut outcome, "source_intensity.json", &report)?;
    outcome.checks = vec![Check::new(
        "source intensity recovered within 2 sigma",
        report.within_two_sigma,
        format!(
            "{:.4} +{:.4} -{:.4} vs {}",
            estimate.value, estimate.plus, estimate.minus, s.source_intensity_per_cycle
        ),
    )];
    Ok(outcome)
}

// ------------------------------------------------------------ dispatch

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Design,
    Scan(ScanKind),
    Budget,
    Simulate,
    Reproduce,
}

fn samples(cfg: &LoadedConfig, options: &Options) -> Result<u64, Failure> {
    let n = options.samples.unwrap_or(cfg.config.collection.samples);
    if n < MIN_MC_SAMPLES {
        return Err(Failure::Config(match options.samples {
            Some(_) => ConfigError {
                source_name: "--samples".into(),
                line: None,
                message: format!("need at least {MIN_MC_SAMPLES}, got {n}"),
            },
            None => cfg.error_at(
                "collection",
                None,
                "samples",
                format!("need at least {MIN_MC_SAMPLES}, got {n}"),
            ),
        }));
    }
    Ok(n)
}

pub fn run(command: Command, cfg: &LoadedConfig, options: &Options) -> Result<Outcome, Failure> {
    let ctx = Context {
        cfg,
        out: &options.out,
        seed: options.seed.unwrap_or(cfg.config.seed),
    };
    let outcome = match command {
        Command::Design => {
            let (profile, report) = build_corrector(&ctx)?;
            design_outputs(&ctx, &profile, &report)?
        }
        Command::Scan(kind) => {
            let (profile, _) = build_corrector(&ctx)?;
            run_scan(&ctx, profile, kind)?
        }
        Command::Budget => run_budget(&ctx, samples(cfg, options)?)?,
        Command::Simulate => run_simulate(&ctx)?,
        Command::Reproduce => {
            let n = samples(cfg, options)?;
            let mut all = Outcome::default();
            let (profile, report) = build_corrector(&ctx)?;
            all.absorb(design_outputs(&ctx, &profile, &report)?);
            for kind in [ScanKind::Defocus, ScanKind::Tilt, ScanKind::RadiusDeviation] {
                all.absorb(run_scan(&ctx, profile.clone(), kind)?);
            }
            all.absorb(run_budget(&ctx, n)?);
            all.absorb(run_simulate(&ctx)?);
            let mut summary = String::new();
            for c in &all.checks {
                writeln!(
                    summary,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
                .expect("writing to a string");
            }
            ctx.write(&mut all, "reproduction_report.txt", &summary)?;
            all
        }
    };
    outcome.finish(options)
}
