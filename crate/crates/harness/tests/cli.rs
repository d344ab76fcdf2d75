use std::path::Path;
use std::process::Command;

use dpglm_harness::{read_rows, replay_row, run_sweep, ExperimentConfig, CSV_HEADER};

fn dpglm(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_dpglm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn gen_writes_dataset_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.conf",
        "instance = regression\nalgorithm = noisy-gd\nn = 100\nd = 10\nepsilon = 1\nseeds = 5\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let o = dpglm(&["gen", "--config", &cfg, "--out", p.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.split(',').count() == 11));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.meta.json")).unwrap())
            .unwrap();
    for key in ["n", "d", "x_bound", "y_bound", "rank", "generator", "seed"] {
        assert!(meta.get(key).is_some(), "{key}");
    }
}

#[test]
fn gen_smooth_hard_records_bias() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "g.conf",
        "instance = smooth-hard\nalgorithm = noisy-gd\nn = 40\nd = 4\nepsilon = 1\nb_bias = 0.3\n",
    );
    let out = dir.path().join("s.csv");
    assert!(
        dpglm(&["gen", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.csv.meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["params"]["realized_b"].as_f64(), Some(0.4));
    assert_eq!(meta["generator"], "smooth-hard");
}

#[test]
fn run_counts_rows_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.conf",
        "instance = regression\nalgorithm = noisy-gd-nonprivate\nn = 128,256,512,1024,2048,4096,8192\nd = 2\nepsilon = inf\nseeds = 0..10\ntiming = false\n",
    );
    let out = dir.path().join("r.csv");
    let o = dpglm(&[
        "run",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
    let rows = read_rows(text.as_bytes()).unwrap();
    assert_eq!(rows.len(), 70);
    assert!(rows
        .iter()
        .all(|r| r.runtime_ms == 0 && r.epsilon.is_infinite()));

    let summary = dir.path().join("s.csv");
    let o = dpglm(&[
        "report",
        out.to_str().unwrap(),
        "--out",
        summary.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("noisy-gd-nonprivate d=2"), "{stdout}");
    assert_eq!(
        std::fs::read_to_string(&summary).unwrap().lines().count(),
        8
    );
}

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "r.conf",
        "instance = regression\nalgorithm = noisy-gd, boost(output-pert-smooth), jl-smooth\nn = 300\nd = 3\nepsilon = 0.5, 2\nseeds = 0..3\ntiming = false\n",
    );
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(dpglm(&[
        "run",
        "--config",
        &cfg,
        "--out",
        a.to_str().unwrap(),
        "--threads",
        "1"
    ])
    .status
    .success());
    assert!(dpglm(&[
        "run",
        "--config",
        &cfg,
        "--out",
        b.to_str().unwrap(),
        "--threads",
        "3"
    ])
    .status
    .success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.conf",
        "instance = regression\nalgorithm = output-pert-lipschitz\nn = 10\nd = 2\nepsilon = 1\n",
    );
    let o = dpglm(&["run", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Lipschitz"));
    let cap = write(
        dir.path(),
        "cap.conf",
        "instance = regression\nalgorithm = noisy-gd\nn = 100000\nd = 2\nepsilon = 1\n",
    );
    let o = dpglm(&["run", "--config", &cap]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("gradient evaluations"));
}

#[test]
fn every_algorithm_replays() {
    let cfg = ExperimentConfig::parse(
        "instance = regression
         algorithm = noisy-gd, noisy-gd-nonprivate, output-pert-smooth, jl-smooth, boost(noisy-gd), grid-search(noisy-gd), flagship
         n = 400
         d = 3
         epsilon = 1
         seeds = 0..2
         w_star_norm = 2
         timing = false",
    )
    .unwrap();
    let rows = run_sweep(&cfg, 0).unwrap();
    assert_eq!(rows.len(), 14);
    for r in &rows {
        replay_row(r).unwrap_or_else(|e| panic!("{}: {e}", r.algorithm));
    }
    let lip = ExperimentConfig::parse(
        "instance = lipschitz-hard
         algorithm = output-pert-lipschitz, jl-lipschitz, boost(output-pert-lipschitz)
         n = 60
         d = 4
         epsilon = 1
         radius = 1
         timing = false",
    )
    .unwrap();
    for r in run_sweep(&lip, 0).unwrap() {
        replay_row(&r).unwrap();
    }
}

#[test]
fn noiseless_runs_repeat() {
    let cfg = ExperimentConfig::parse(
        "instance = regression\nalgorithm = noisy-gd-nonprivate\nn = 200\nd = 3\nepsilon = inf\nseeds = 0..3\ntiming = false",
    )
    .unwrap();
    let a: Vec<f64> = run_sweep(&cfg, 0)
        .unwrap()
        .iter()
        .map(|r| r.excess_risk)
        .collect();
    let b: Vec<f64> = run_sweep(&cfg, 2)
        .unwrap()
        .iter()
        .map(|r| r.excess_risk)
        .collect();
    assert_eq!(a, b);
}

#[test]
fn grid_search_reports_selected_radius() {
    let cfg = ExperimentConfig::parse(
        "instance = regression\nalgorithm = flagship\nn = 2048\nd = 4\nepsilon = 1\nw_star_norm = 2\nradius = adaptive\nseeds = 0..3\ntiming = false",
    )
    .unwrap();
    for r in run_sweep(&cfg, 0).unwrap() {
        assert!(
            r.b_used == 0.0 || (r.b_used >= 2.0 && r.b_used.log2().fract() == 0.0),
            "{}",
            r.b_used
        );
    }
}
