use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ioncollect_cli::config::SHIPPED_TRAP;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ioncollect"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn design_with_defaults_meets_residual_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["design", "--out", "o", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("o/design_report.json"));
    assert_eq!(report["residual_ok"], true);
    assert!(report["max_residual_rad"].as_f64().unwrap() <= 1e-4);
    let table = std::fs::read_to_string(dir.path().join("o/corrector_profile.txt")).unwrap();
    assert!(table.lines().count() > 2000);
}

#[test]
fn paraboloid_gives_a_flat_plate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHIPPED_TRAP.replacen("shape = \"sphere\"", "shape = \"paraboloid\"", 1),
    );
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "design", "--out", "o"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let profile =
        ioncollect::corrector::CorrectorProfile::read_table(&dir.path().join("o/corrector_profile.txt")).unwrap();
    assert!(profile.samples().iter().all(|s| s.h_mm == 3.0));
    assert!(json(dir.path().join("o/design_report.json"))["on_axis"].is_null());
}

#[test]
fn vacuum_plate_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SHIPPED_TRAP.replacen("index = 1.49", "index = 1.0", 1));
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "design"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("infeasible"));
}

#[test]
fn unknown_key_is_a_line_numbered_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SHIPPED_TRAP.replacen("[collection]\n", "[collection]\nsample_count = 5\n", 1);
    let line = text.lines().position(|l| l.starts_with("sample_count")).unwrap() + 1;
    let cfg = write_config(dir.path(), &text);
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "budget"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains(&format!("run.toml:{line}:")), "{err}");
    assert!(err.contains("sample_count"), "{err}");
}

#[test]
fn out_of_range_value_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = SHIPPED_TRAP.replacen("eta_pmt = 0.127", "eta_pmt = 12.7", 1);
    let line = text.lines().position(|l| l.starts_with("eta_pmt = 12.7")).unwrap() + 1;
    let cfg = write_config(dir.path(), &text);
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).contains(&format!("run.toml:{line}: photometry.eta_pmt")),
        "{}",
        stderr(&o)
    );
}

#[test]
fn missing_profile_path_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let text = SHIPPED_TRAP.replacen("# profile_path", "profile_path", 1);
    let cfg = write_config(dir.path(), &text);
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "design"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("profile_path"), "{}", stderr(&o));
}

#[test]
fn failed_threshold_exits_3_only_under_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHIPPED_TRAP.replacen("max_residual_rad = 1e-4", "max_residual_rad = 1e-15", 1),
    );
    let cfg = cfg.to_str().unwrap();
    let o = run(dir.path(), &["--config", cfg, "design"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL corrector exit-angle residual"));
    let o = run(dir.path(), &["--config", cfg, "design", "--check"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn budget_without_occluders_blocks_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let start = SHIPPED_TRAP.find("[[occluders]]").unwrap();
    let end = SHIPPED_TRAP.find("[collection]").unwrap();
    let text = format!("{}{}", &SHIPPED_TRAP[..start], &SHIPPED_TRAP[end..]);
    let cfg = write_config(dir.path(), &text);
    let o = run(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--samples", "200000", "budget"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report = json(dir.path().join("out/budget.json"));
    assert_eq!(report["collection"]["blocked_sr"].as_f64(), Some(0.0));
    let table = std::fs::read_to_string(dir.path().join("out/budget.txt")).unwrap();
    assert!(table.contains("DISCREPANT"), "{table}");
}

#[test]
fn too_few_samples_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["budget", "--samples", "10"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--samples"), "{}", stderr(&o));
}

#[test]
fn single_cycle_simulation_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &SHIPPED_TRAP.replacen("cycles = 1_000_000", "cycles = 1", 1),
    );
    let o = run(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/simulated_counts.csv")).unwrap();
    for row in rdr.records() {
        let row = row.unwrap();
        assert_eq!(&row[4], "1");
        assert!(row[2].parse::<u64>().unwrap() <= 3);
    }
}

#[test]
fn simulation_is_reproducible_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str| {
        (
            std::fs::read(dir.path().join(sub).join("simulated_counts.csv")).unwrap(),
            std::fs::read(dir.path().join(sub).join("source_intensity.json")).unwrap(),
        )
    };
    for (sub, seed) in [("a", "5"), ("b", "5"), ("c", "6")] {
        let o = run(dir.path(), &["simulate", "--seed", seed, "--out", sub]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a").0, read("c").0);
}

#[test]
fn scan_csv_contract_and_external_curve() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["design", "--out", "d"]).status.code(), Some(0));
    let text = SHIPPED_TRAP.replacen(
        "[photometry]\n",
        "[[scan.external]]\nlabel = \"as built\"\npath = \"d/corrector_profile.txt\"\n\n[photometry]\n",
        1,
    );
    let cfg = write_config(dir.path(), &text);
    let o = run(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "scan", "defocus", "--check"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/scan_defocus.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["kind", "parameter", "variant", "rms_um", "diffraction_limit_um"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11 * 3);
    let at_zero = |variant: &str| -> f64 {
        let row = rows.iter().find(|r| &r[1] == "0.0" && &r[2] == variant).unwrap();
        row[3].parse().unwrap()
    };
    let limit: f64 = rows[0][4].parse().unwrap();
    // slopes of an imported table come from finite differences
    assert!(at_zero("as built") < limit);
    assert!(at_zero("sphere+corrector") < limit);
}

#[test]
fn radius_scan_omits_the_parabola() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["scan", "radius-deviation", "--check"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("out/scan_radius-deviation.csv")).unwrap();
    assert!(!text.contains("parabola"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn show_config_round_trips_and_usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), &["show-config"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap(), SHIPPED_TRAP);
    assert_eq!(run(dir.path(), &["scan", "sideways"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}
