use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command as Process;

use casimir_cli::{Cli, Runner, RunConfig};
use casimir_core::analysis::Verdict;
use casimir_core::io::{parse_grid, parse_theory, read_header};
use casimir_core::units::NM;
use clap::Parser;

fn runner(dir: &Path, extra: &str) -> Runner {
    let text = format!("[run]\nseed = 5\nout = \"{}\"\n{extra}", dir.display());
    Runner::new(RunConfig::parse(&text).unwrap(), None)
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn theory_table_has_one_row_per_nanometre() {
    let dir = tempfile::tempdir().unwrap();
    let path = runner(dir.path(), "").theory().unwrap();
    let text = fs::read_to_string(path).unwrap();
    let (a, cols) = parse_theory(&text).unwrap();
    assert_eq!(a.len(), 701);
    assert!((a[0] / NM - 250.0).abs() < 1e-9 && (a[700] / NM - 950.0).abs() < 1e-9);
    let names: Vec<&str> = cols.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["drude", "plasma"]);
    for i in 0..a.len() {
        assert!(cols[1].1[i].abs() > cols[0].1[i].abs());
    }
    let header = read_header(&text);
    assert_eq!(header["rows"].1, "701");
    assert!(header["command"].1.starts_with("casimir theory --seed 5"));
}

#[test]
fn pipeline_matches_the_stages_and_repeats_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let r = runner(dir.path(), "");
    let report = r.pipeline().unwrap();
    let first = snapshot(dir.path());
    for name in [
        "theory.txt",
        "set1_grid.txt",
        "set1_calibration.txt",
        "set1_gradients.txt",
        "gradients.txt",
        "comparison.txt",
        "manifest.txt",
    ] {
        assert!(first.contains_key(name), "{name} missing");
    }

    // Plasma truth: Drude excluded across 250-850 nm, plasma consistent.
    let drude = report.model("drude").unwrap();
    assert!(drude.all_windows(250.0 * NM, 850.0 * NM, Verdict::Excluded), "{:?}", drude.windows);
    let plasma = report.model("plasma").unwrap();
    assert!(plasma.all_windows(250.0 * NM, 950.0 * NM, Verdict::Consistent), "{:?}", plasma.windows);

    r.pipeline().unwrap();
    assert_eq!(snapshot(dir.path()), first);

    for f in fs::read_dir(dir.path()).unwrap() {
        fs::remove_file(f.unwrap().path()).unwrap();
    }
    r.theory().unwrap();
    r.synth().unwrap();
    r.calibrate(&[]).unwrap();
    r.compare(&[], None).unwrap();
    let manual = snapshot(dir.path());
    assert_eq!(manual.len() + 1, first.len());
    for (name, bytes) in &manual {
        assert!(first[name] == *bytes, "{name} differs between pipeline and stages");
    }
}

#[test]
fn seeds_change_the_noise_and_differ_per_set() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let sets = "[campaign]\nsets = [2, 3]\nrepetitions = 1\n";
    runner(a.path(), sets).synth().unwrap();
    let mut other = runner(b.path(), sets);
    other.config.run.seed = 6;
    other.synth().unwrap();
    let read = |d: &Path, s: u32| fs::read_to_string(d.join(format!("set{s}_grid.txt"))).unwrap();
    let g2 = parse_grid(&read(a.path(), 2)).unwrap();
    let g3 = parse_grid(&read(a.path(), 3)).unwrap();
    assert_ne!(g2.seed, g3.seed);
    assert_ne!(parse_grid(&read(b.path(), 2)).unwrap().channels, g2.channels);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[run]\nseed = 9\nmodel = \"drude\"\n").unwrap();
    let cli = Cli::try_parse_from([
        "casimir",
        "theory",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "11",
        "--model",
        "plasma",
        "--tol",
        "1e-7",
    ])
    .unwrap();
    let r = cli.runner().unwrap();
    assert_eq!(r.config.run.seed, 11);
    assert_eq!(r.config.run.model, casimir_cli::ModelChoice::Plasma);
    assert_eq!(r.config.run.tol, 1e-7);
    assert!(Cli::try_parse_from(["casimir", "theory", "--model", "lorentz"]).is_err());
}

#[test]
fn binary_reports_config_errors_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[run]\nseed = 1\n\n[theory]\nstep_nm = -1.0\n").unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_casimir"))
        .args(["theory", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 5") && stderr.contains("theory.step_nm"), "{stderr}");
}

#[test]
fn binary_fails_cleanly_on_missing_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = Process::new(env!("CARGO_BIN_EXE_casimir"))
        .args(["calibrate", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("set1_grid.txt"));
}
