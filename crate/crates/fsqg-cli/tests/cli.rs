//! End-to-end runs of the fsqg binary on a small grid.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fsqg")
}

// half the desk resolution, full time range: every threshold is attainable
fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        r#"
n = 64
t_final = 0.5
steps = 500
output_dir = "unused"

[sweep]
epsilons = [1e-1, 1e-2, 1e-3]

[control]
radius = 0.2
lambdas = [1e-4, 1e-6]
maxiter = 60
planted_lambda = 1e-8
planted_maxiter = 40

[reconstruct]
width = 0.06
radial = 2
angular = 4
offset_min = 0.25
offset_max = 0.35
"#,
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn run_sub(cfg: &Path, out: &Path, sub: &str) -> Output {
    run(&[
        sub,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ])
}

#[test]
fn config_validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "alpha = 0.5\n").unwrap();
    let out = run(&["diffuse", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("alpha"), "field-level message missing: {msg}");

    let bad_q = dir.path().join("badq.toml");
    fs::write(&bad_q, "q = 3.0\n").unwrap();
    let out = run(&["diffuse", "--config", bad_q.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("q:"));
}

#[test]
fn diffuse_is_deterministic_and_correct() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out1 = dir.path().join("a");
    let out2 = dir.path().join("b");
    assert!(run_sub(&cfg, &out1, "diffuse").status.success());
    assert!(run_sub(&cfg, &out2, "diffuse").status.success());
    let b1 = fs::read(out1.join("diffuse_oracle.csv")).unwrap();
    let b2 = fs::read(out2.join("diffuse_oracle.csv")).unwrap();
    assert_eq!(b1, b2, "CSV bodies differ between identical runs");

    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("diffuse_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["passed"], true);
    // manifest carries the content hash and config echo
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest_diffuse.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["content_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["config"].as_str().unwrap().contains("alpha"));
}

#[test]
fn full_pipeline_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");

    // report before any runs: missing inputs are listed, exit 1
    let r = run_sub(&cfg, &out, "report");
    assert_eq!(r.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&r.stderr);
    assert!(msg.contains("missing prior runs"), "{msg}");
    assert!(msg.contains("forward"));

    for sub in ["forward", "diffuse", "linearize", "runge", "identity", "reconstruct"] {
        let r = run_sub(&cfg, &out, sub);
        assert!(
            r.status.success(),
            "{sub} failed: {}",
            String::from_utf8_lossy(&r.stderr)
        );
    }

    // expected artifacts
    for name in [
        "forward_lq.csv",
        "diffuse_oracle.csv",
        "linearize_first.csv",
        "linearize_cross.csv",
        "linearize_second.csv",
        "runge_planted.csv",
        "runge_generic.csv",
        "runge_lambda_path.csv",
        "identity_values.csv",
        "reconstruct_table.csv",
    ] {
        assert!(out.join(name).exists(), "missing artifact {name}");
    }
    assert!(out.join("forward_trajectory/manifest.toml").exists());
    assert!(out.join("forward_trajectory/t_000000.bin").exists());
    assert!(out.join("runge_f_opt/manifest.toml").exists());

    let r = run_sub(&cfg, &out, "report");
    assert!(
        r.status.success(),
        "report failed: {}",
        String::from_utf8_lossy(&r.stderr)
    );
    assert!(out.join("report.csv").exists());
    let table = String::from_utf8_lossy(&r.stdout);
    assert!(table.contains("planted_residual"));
    assert!(table.contains("pass"));
}

#[test]
fn reconstruct_with_identical_specs_is_null() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("same.toml");
    fs::write(
        &cfg_path,
        r#"
n = 64
t_final = 0.25
steps = 20

[multiplier]
kind = "riesz"

[reconstruct]
width = 0.06
radial = 2
angular = 2
offset_min = 0.25
offset_max = 0.35
"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    let r = run_sub(&cfg_path, &out, "reconstruct");
    assert!(r.status.success());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("reconstruct_summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["checks"][0]["id"], "null_table");
}

#[test]
fn report_flags_threshold_failures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("run");
    fs::create_dir_all(&out).unwrap();

    // minimal summaries, one of them failing
    for sub in ["forward", "diffuse", "linearize", "runge", "identity", "reconstruct"] {
        let pass = sub != "runge";
        let body = serde_json::json!({
            "subcommand": sub,
            "checks": [{
                "id": "probe",
                "description": "synthetic",
                "value": if pass { 0.0 } else { 2.0 },
                "threshold": 1.0,
                "cmp": "le",
                "pass": pass,
            }],
            "passed": pass,
        });
        fs::write(out.join(format!("{sub}_summary.json")), body.to_string()).unwrap();
    }
    let r = run_sub(&cfg, &out, "report");
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn linearize_x1_only_source_rests_at_floor() {
    // x1-only sources collapse the hierarchy: every residual sits at the
    // solver floor, far below the generic O(eps) values
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x1");
    // run with a generic config, then assert the library-level behavior via
    // the CSV of a dedicated small run (the CLI wires generic sources, so
    // this check runs the library directly)
    let lat = fsqg_core::FourierLattice::new(32).unwrap();
    let spec = fsqg_core::MultiplierSpec::riesz(&lat);
    let grid = fsqg_core::TimeGrid::new(0.25, 50).unwrap();
    let mut x = fsqg_core::SpectralField::zero(&lat);
    x.set_coeff((1, 0), num_complex::Complex64::new(0.5, 0.0));
    let f = fsqg_core::SourceTerm::separable(
        x,
        fsqg_core::TimeProfile::Bump { t_on: 0.05, t_off: 0.2 },
    );
    let norms = fsqg_core::linearize::first_linearization_residual(
        &f, 1e-2, &spec, &lat, 0.75, grid,
    )
    .unwrap();
    for (_, v) in norms {
        assert!(v <= 1e-9);
    }
    let _ = out;
}
