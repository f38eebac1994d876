use std::path::Path;
use std::process::Command;

use nematic_cli::commands::{cmd_converge, cmd_run, cmd_verify, initial_state, stepper_for, Axis};
use nematic_cli::config::parse_config;
use nematic_cli::io::{read_series, read_snapshot, snapshot_paths};
use nematic_core::diagnostics::CheckStatus;
use nematic_core::dynamics::run;
use nematic_core::field::Coefficients;
use nematic_core::spectral::Spectral;
use nematic_core::stress::sigma_s;
use nematic_core::TensorField;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nematic"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn base(n: usize, dt: f64, t_end: f64, extra: &str) -> String {
    format!("[grid]\nn = {n}\n[time]\ndt = {dt}\nt_end = {t_end}\n{extra}")
}

#[test]
fn zero_data_gives_zero_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "zero.ini",
        &base(16, 1e-3, 0.01, "[init]\nq_linf = 0\n[output]\ndir = zero\nstride = 5\n"),
    );
    let status = bin()
        .arg("run")
        .arg(&cfg)
        .env("NEMATIC_OUTPUT_ROOT", tmp.path())
        .status()
        .unwrap();
    assert!(status.success());
    let rows = read_series(&tmp.path().join("zero/series.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[1..].iter().all(|v| *v == 0.0)));
    assert!((rows[2][0] - 0.01).abs() < 1e-15);
}

#[test]
fn small_data_run_respects_bounds_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let text = base(
        32,
        1e-3,
        0.05,
        "[coefficients]\na = -0.2222222222222222\n[init]\nseed = 3\nq_linf = 0.6\nu_mode = 1\nu_amp = 0.5\n\
         [output]\nstride = 1\n",
    );
    let mut cfg = parse_config(&text).unwrap();
    let dirs = [tmp.path().join("a"), tmp.path().join("b")];
    for d in &dirs {
        cfg.output_dir = d.clone();
        cmd_run(&cfg, d).unwrap();
    }
    let a = std::fs::read(dirs[0].join("series.csv")).unwrap();
    let b = std::fs::read(dirs[1].join("series.csv")).unwrap();
    assert_eq!(a, b);

    let rows = read_series(&dirs[0].join("series.csv")).unwrap();
    let bound = (4.0f64 / 9.0).sqrt() * (1.0 + 1e-3);
    assert!(rows.iter().all(|r| r[9] <= bound));
    // total(t_{n+1}) − total(t_n) ≤ |r_n|; column 8 is the running Σ r
    for w in rows.windows(2) {
        let r_n = w[1][8] - w[0][8];
        assert!(w[1][4] - w[0][4] <= r_n.abs() + 1e-15);
    }
}

#[test]
fn snapshots_round_trip_bitwise() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config(&base(16, 1e-3, 0.004, "[init]\nu_mode = 2\n[output]\nstride = 2\n")).unwrap();
    cmd_run(&cfg, tmp.path()).unwrap();
    let stepper = stepper_for(&cfg).unwrap();
    let s0 = initial_state(&cfg, &stepper).unwrap();
    let out = run(&s0, &stepper, cfg.t_end, cfg.stride, |_, _| {}).unwrap();
    let (bin4, json4) = snapshot_paths(tmp.path(), 4);
    assert!(json4.exists());
    let back = read_snapshot(&bin4).unwrap();
    assert_eq!(back, out.final_state);
    let first = read_snapshot(&snapshot_paths(tmp.path(), 0).0).unwrap();
    assert_eq!(first, s0);
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json4).unwrap()).unwrap();
    assert_eq!(meta["byte_order"], "little");
    assert_eq!(meta["n"], 16);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.ini", &base(16, 1e-3, 0.01, "[coefficients]\nl5 = 1\n"));
    let out = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("l5"));
    let missing = bin().arg("run").arg(tmp.path().join("nope.ini")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
    let kappa = write_config(tmp.path(), "k.ini", &base(16, 1e-3, 0.01, "[coefficients]\nl1 = -1\n"));
    let out = bin().arg("run").arg(&kappa).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa"));
}

#[test]
fn blow_up_exits_with_three_and_keeps_series() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "boom.ini",
        &base(
            16,
            0.05,
            50.0,
            "[coefficients]\na = -5\n[init]\nq_linf = 30\n[output]\ndir = boom\nstride = 1\n",
        ),
    );
    let out = bin()
        .arg("run")
        .arg(&cfg)
        .env("NEMATIC_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_series(&tmp.path().join("boom/series.csv")).unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn verify_default_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "v.ini",
        &base(32, 1e-3, 0.1, "[coefficients]\nl2 = 0.3\nl3 = 0.2\nb = 1\n[output]\ndir = v\n"),
    );
    let out = bin()
        .arg("verify")
        .arg(&cfg)
        .env("NEMATIC_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert!(tmp.path().join("v/verify.json").exists());
}

#[test]
fn verify_skips_cubic_checks_without_l4() {
    let cfg = parse_config(&base(32, 1e-3, 0.1, "[coefficients]\nl4 = 0\n")).unwrap();
    let r = cmd_verify(&cfg, sigma_s).unwrap();
    let status = |name: &str| r.checks.iter().find(|c| c.name == name).unwrap().status;
    assert_eq!(status("thresholds"), CheckStatus::Skipped);
    assert_eq!(status("max_principle_hypotheses"), CheckStatus::Skipped);
    assert_eq!(status("duality"), CheckStatus::Passed);
    // L4 = 0 is a named assumption violation, reported without aborting
    assert_eq!(status("coefficients"), CheckStatus::Failed);
    assert!(r.checks[0].detail.contains("L4"));
}

fn flipped_sigma_s(q: &nematic_core::QTensorField, c: &Coefficients, sp: &Spectral) -> TensorField {
    sigma_s(q, c, sp).scale(-1.0)
}

#[test]
fn sign_error_in_distortion_stress_is_caught() {
    let cfg = parse_config(&base(32, 1e-3, 0.1, "")).unwrap();
    let r = cmd_verify(&cfg, flipped_sigma_s).unwrap();
    assert!(!r.passed);
    let duality = r.checks.iter().find(|c| c.name == "duality").unwrap();
    assert_eq!(duality.status, CheckStatus::Failed);
    assert!(duality.worst > 0.5);
}

#[test]
fn converge_dt_on_constant_q_is_first_order() {
    let cfg = parse_config(&base(8, 4e-3, 0.4, "[init]\nmax_mode = 0\nq_linf = 0.5\n")).unwrap();
    let t = cmd_converge(&cfg, Axis::Dt).unwrap();
    assert!(t.monotone);
    for r in &t.rows[1..] {
        let order = r.observed_order.unwrap();
        assert!((order - 1.0).abs() <= 0.15, "{t:?}");
    }
    assert!(t.to_csv().starts_with("parameter,error,observed_order\n"));
}

#[test]
fn converge_delta_decreases() {
    let cfg = parse_config(&base(16, 1e-3, 0.05, "[init]\nu_mode = 1\n")).unwrap();
    let t = cmd_converge(&cfg, Axis::Delta).unwrap();
    assert!(t.monotone, "{t:?}");
    assert_eq!(t.rows.len(), 4);
}

#[test]
fn converge_eps_is_lipschitz() {
    let cfg = parse_config(&base(16, 1e-3, 0.1, "[init]\nq_linf = 0.4\nu_mode = 1\nu_amp = 0.5\n")).unwrap();
    let t = cmd_converge(&cfg, Axis::Eps).unwrap();
    assert!(t.monotone);
    for r in &t.rows[1..] {
        assert!((r.observed_order.unwrap() - 1.0).abs() <= 0.1, "{t:?}");
    }
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.ini", &base(16, 1e-3, 0.005, "[output]\ndir = sweep\n"));
    let out = bin()
        .args(["sweep"])
        .arg(&cfg)
        .args(["--key", "coefficients.delta", "--values", "0,1e-4,1e-3"])
        .env("NEMATIC_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for v in ["0", "1e-4", "1e-3"] {
        let dir = tmp.path().join(format!("sweep/coefficients.delta={v}"));
        assert!(dir.join("series.csv").exists(), "{dir:?}");
        let cfg = parse_config(&std::fs::read_to_string(dir.join("config.ini")).unwrap()).unwrap();
        assert_eq!(cfg.coefficients.delta, v.parse::<f64>().unwrap());
    }
    let bad = bin()
        .args(["sweep"])
        .arg(&cfg)
        .args(["--key", "grid.n", "--values", "16,7"])
        .env("NEMATIC_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
