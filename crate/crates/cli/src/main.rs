use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ioncollect::analysis::ScanKind;
use ioncollect_cli::commands::{self, Command, Options};
use ioncollect_cli::config::{LoadedConfig, SHIPPED_TRAP};

/// Corrector design, aberration scans and photon budget for a trapped ion
/// behind a spherical mirror.
///
/// Exit codes: 0 success, 1 configuration error, 2 infeasible computation,
/// 3 failed thresholds under --check.
#[derive(Debug, Parser)]
#[command(name = "ioncollect", version)]
struct Cli {
    /// TOML run configuration; the shipped trap configuration if omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Exit with code 3 if any reproduction threshold fails.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Design and fit the corrector; writes corrector_profile.txt and design_report.json.
    Design,
    /// RMS spot against one misalignment; writes scan_<kind>.csv.
    Scan {
        #[arg(value_enum)]
        kind: KindArg,
    },
    /// Collection solid angle and photometry; writes budget.json and budget.txt.
    Budget,
    /// Simulated aperture series and source intensity; writes
    /// simulated_counts.csv and source_intensity.json.
    Simulate,
    /// Design, all three scans, budget and simulation in one run.
    #[command(name = "reproduce-paper", alias = "reproduce")]
    ReproducePaper,
    /// Print the shipped trap configuration.
    ShowConfig,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Defocus,
    Tilt,
    RadiusDeviation,
}

impl From<KindArg> for ScanKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Defocus => ScanKind::Defocus,
            KindArg::Tilt => ScanKind::Tilt,
            KindArg::RadiusDeviation => ScanKind::RadiusDeviation,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let command = match cli.command {
        Sub::ShowConfig => {
            print!("{SHIPPED_TRAP}");
            return ExitCode::SUCCESS;
        }
        Sub::Design => Command::Design,
        Sub::Scan { kind } => Command::Scan(kind.into()),
        Sub::Budget => Command::Budget,
        Sub::Simulate => Command::Simulate,
        Sub::ReproducePaper => Command::Reproduce,
    };
    let config = match &cli.config {
        Some(path) => LoadedConfig::from_path(path),
        None => Ok(LoadedConfig::shipped()),
    };
    let config = match config {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let options = Options {
        out: cli.out,
        seed: cli.seed,
        samples: cli.samples,
        check: cli.check,
    };
    match commands::run(command, &config, &options) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
