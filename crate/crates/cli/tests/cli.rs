use std::fs;
use std::path::Path;
use std::process::Command;

use wong_reduce::output::RunManifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wong-reduce"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(sub: &str, config: &Path, out: &Path) -> (i32, String) {
    let o = bin()
        .args([sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .output()
        .unwrap();
    (o.status.code().unwrap(), String::from_utf8_lossy(&o.stderr).into_owned())
}

const TWO_VECTOR: &str = "[system]\nkind = \"two_vector\"\n";

#[test]
fn geometry_at_canonical_point() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", TWO_VECTOR);
    let out = d.path().join("out");
    let (code, err) = run("geometry", &cfg, &out);
    assert_eq!(code, 0, "{err}");
    let g: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("geometry.json")).unwrap()).unwrap();
    let gamma: Vec<Vec<f64>> = serde_json::from_value(g["gamma"].clone()).unwrap();
    for (i, d) in [1.0, 2.0, 1.0].iter().enumerate() {
        for j in 0..3 {
            let want = if i == j { *d } else { 0.0 };
            assert!((gamma[i][j] - want).abs() < 1e-12);
        }
    }
    let m = RunManifest::read(&out).unwrap();
    assert!(m.checks.iter().all(|c| c.passed));
    assert!(m.checks.iter().filter(|c| c.class == "identity").all(|c| c.value < 1e-9));
    assert_eq!(m.exit_status, 0);
}

#[test]
fn zero_length_integration_has_one_sample() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.toml",
        &format!("{TWO_VECTOR}[initial]\nq_dot = [0.1, 0.0, 0.0, 0.0, 0.2, 0.0]\np = [0.1, 0.2, 0.3]\n[integrator]\nt_end = 0.0\n"),
    );
    let out = d.path().join("out");
    assert_eq!(run("integrate", &cfg, &out).0, 0);
    let mut r = csv::Reader::from_path(out.join("trajectory.csv")).unwrap();
    let recs: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 1);
    let vals: Vec<f64> = recs[0].iter().map(|s| s.parse().unwrap()).collect();
    assert_eq!(vals[0], 0.0);
    assert_eq!(&vals[1..7], &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
    assert_eq!(&vals[13..16], &[0.1, 0.2, 0.3]);
}

#[test]
fn missing_system_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", "seed = 1\n");
    let (code, err) = run("integrate", &cfg, &d.path().join("out"));
    assert_eq!(code, 1);
    assert!(err.contains("system"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", &format!("{TWO_VECTOR}[integrator]\nstep = 0.1\n"));
    let (code, err) = run("integrate", &cfg, &d.path().join("out"));
    assert_eq!(code, 1);
    assert!(err.contains("step"), "{err}");
}

#[test]
fn non_convergence_exits_with_two_and_writes_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.toml",
        &format!("{TWO_VECTOR}[equilibrium]\nscale_guess = 0.7\nverify = false\n[equilibrium.solver]\nmax_iterations = 1\n"),
    );
    let out = d.path().join("out");
    let (code, _) = run("equilibria", &cfg, &out);
    assert_eq!(code, 2);
    assert!(out.join("equilibria.json").exists());
    assert_eq!(RunManifest::read(&out).unwrap().exit_status, 2);
}

#[test]
fn report_flags_everything_at_zero_tolerance() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", TWO_VECTOR);
    let out = d.path().join("out");
    assert_eq!(run("geometry", &cfg, &out).0, 0);
    let clean = wong_reduce::report::report_invariants(&out, None).unwrap();
    assert!(clean.all_green());
    let zero = wong_reduce::config::Tolerances {
        identity: 0.0,
        killing: 0.0,
        energy_drift: 0.0,
        constraint: 0.0,
        vertical: 0.0,
        horizontal: 0.0,
        frozen_shape: 0.0,
        momentum_drift: 0.0,
        coulomb: 0.0,
        cross_check: 0.0,
        lattice_vertical: 0.0,
    };
    let flagged = wong_reduce::report::report_invariants(&out, Some(&zero)).unwrap();
    assert_eq!(flagged.flagged, flagged.rows.len());
    assert!(!flagged.rows.is_empty());
    let missing = wong_reduce::report::report_invariants(&d.path().join("nowhere"), None);
    assert!(matches!(missing, Err(wong_reduce::CliError::MissingArtifact(_))));
}

#[test]
fn lattice_cross_check_row_in_report() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.toml",
        "seed = 9\n[lattice]\nside = 2\nfield = { kind = \"random\", amplitude = 0.3 }\n",
    );
    let out = d.path().join("out");
    assert_eq!(run("lattice-geometry", &cfg, &out).0, 0);
    let rep = wong_reduce::report::report_invariants(&out, None).unwrap();
    let rows: Vec<_> = rep.rows.iter().filter(|r| r.class == "cross_check").collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.passed && r.value < 1e-8));
    let m = RunManifest::read(&out).unwrap();
    assert!(m.index_map.is_some());
}

#[test]
fn manifest_rerun_reproduces_outputs() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(
        d.path(),
        "c.toml",
        &format!("seed = 5\n{TWO_VECTOR}[initial]\nrandom = true\nq_dot = [0.0, 0.1, 0.0, 0.0, 0.0, 0.2]\np = [0.3, -0.1, 0.2]\n[integrator]\nt_end = 0.2\n"),
    );
    let a = d.path().join("a");
    let b = d.path().join("b");
    assert_eq!(run("integrate", &cfg, &a).0, 0);
    assert_eq!(run("integrate", &a.join("manifest.json"), &b).0, 0);
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    let ma = RunManifest::read(&a).unwrap();
    let mb = RunManifest::read(&b).unwrap();
    assert_eq!(ma.config.seed, mb.config.seed);
    assert_eq!(ma.config.initial, mb.config.initial);
}

#[test]
fn seed_flag_overrides_config() {
    let d = tempfile::tempdir().unwrap();
    let cfg = write(d.path(), "c.toml", &format!("{TWO_VECTOR}[initial]\nrandom = true\n[integrator]\nt_end = 0.0\n"));
    let out = d.path().join("out");
    let o = bin()
        .args(["integrate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "42"])
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(RunManifest::read(&out).unwrap().config.seed, 42);
}
