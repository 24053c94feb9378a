use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rqf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rqf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rqf(args);
    assert!(
        out.status.success(),
        "rqf {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn simulate(dir: &Path, n: usize, seed: u64) -> (String, String) {
    let (data, truth) = (p(dir, "data.csv"), p(dir, "truth.csv"));
    ok(&[
        "simulate", "--n", &n.to_string(), "--d", "9", "--seed", &seed.to_string(), "--out", &data, "--truth",
        &truth,
    ]);
    (data, truth)
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a: PathBuf = dir.path().join("a");
    let b: PathBuf = dir.path().join("b");
    std::fs::create_dir_all(&a).unwrap();
    std::fs::create_dir_all(&b).unwrap();
    simulate(&a, 100, 1);
    simulate(&b, 100, 1);
    for f in ["data.csv", "truth.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    let text = read(a.join("data.csv"));
    assert!(text.starts_with("y,t,tau,x1,x2,x3,x4,x5,x6,x7,x8,x9\n"));
    assert_eq!(text.lines().count(), 101);
    assert_eq!(read(a.join("truth.csv")).lines().count(), 1 + 100 * 9);
}

#[test]
fn grid19_mode_replicates_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = p(dir.path(), "d.csv");
    ok(&["simulate", "--n", "10", "--quantile-mode", "grid19", "--out", &data]);
    assert_eq!(read(&data).lines().count(), 1 + 190);
}

#[test]
fn huge_lambda_fuses_everything() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 80, 3);
    let (fit, manifest) = (p(dir.path(), "fit.csv"), p(dir.path(), "run.json"));
    ok(&["fit", "--data", &data, "--lambda", "1e6", "--out", &fit, "--manifest", &manifest]);
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["support_total"], 0);
    assert_eq!(m["lambda"], 1e6);
    assert_eq!(m["k"], 5);
    assert_eq!(m["converged"], true);
    for key in ["eta", "iters", "loss", "penalty"] {
        assert!(m.get(key).is_some(), "missing {key}");
    }
    assert!(read(&fit).starts_with("i,t,tau,j,beta\n"));
}

#[test]
fn fit_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 120, 4);
    let one = p(dir.path(), "one.csv");
    let four = p(dir.path(), "four.csv");
    for (threads, out) in [("1", &one), ("4", &four)] {
        ok(&["--threads", threads, "fit", "--data", &data, "--lambda", "0.002", "--out", out]);
    }
    assert_eq!(std::fs::read(&one).unwrap(), std::fs::read(&four).unwrap());
}

#[test]
fn iteration_cap_exits_with_two_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 60, 5);
    let (fit, manifest) = (p(dir.path(), "fit.csv"), p(dir.path(), "run.json"));
    let out = rqf(&[
        "fit", "--data", &data, "--lambda", "0.001", "--max-iter", "2", "--out", &fit, "--manifest", &manifest,
    ]);
    assert_eq!(out.status.code(), Some(2));
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["converged"], false);
    assert_eq!(m["iters"], 2);
    assert!(Path::new(&fit).exists());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rqf(&["fit", "--bogus"]).status.code(), Some(1));
    assert_eq!(rqf(&["nonsense"]).status.code(), Some(1));

    let bad = p(dir.path(), "bad.csv");
    std::fs::write(&bad, "y,t,tau,x1\n1,0.5,0.5,1\n1,0.2,oops,1\n").unwrap();
    let out = rqf(&["fit", "--data", &bad, "--lambda", "1", "--k", "1", "--out", &p(dir.path(), "f.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.csv:3"), "{msg}");

    let (data, _) = simulate(dir.path(), 20, 1);
    let out = rqf(&["fit", "--data", &data, "--lambda", "-1", "--out", &p(dir.path(), "f.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let out = rqf(&["fit", "--data", &data, "--out", &p(dir.path(), "f.csv")]);
    assert_eq!(out.status.code(), Some(1));
    let out = rqf(&["fit", "--data", &p(dir.path(), "missing.csv"), "--lambda", "1", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 50, 2);
    let cfg = p(dir.path(), "rqf.conf");
    std::fs::write(&cfg, "# solver settings\nlambda = 1e6\nk = 4\n").unwrap();
    let manifest = p(dir.path(), "run.json");
    ok(&["--config", &cfg, "fit", "--data", &data, "--out", &p(dir.path(), "f.csv"), "--manifest", &manifest]);
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["k"], 4);
    assert_eq!(m["lambda"], 1e6);

    // flags win over the file
    ok(&[
        "--config", &cfg, "fit", "--data", &data, "--k", "6", "--out", &p(dir.path(), "f.csv"), "--manifest",
        &manifest,
    ]);
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["k"], 6);

    std::fs::write(&cfg, "lamda = 1\n").unwrap();
    let out = rqf(&["--config", &cfg, "fit", "--data", &data, "--out", &p(dir.path(), "f.csv")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn standardized_fit_reports_original_scale() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 60, 9);
    let (plain, scaled) = (p(dir.path(), "plain.csv"), p(dir.path(), "scaled.csv"));
    let manifest = p(dir.path(), "run.json");
    ok(&["fit", "--data", &data, "--lambda", "1e6", "--out", &plain]);
    ok(&["fit", "--data", &data, "--lambda", "1e6", "--standardize", "--out", &scaled, "--manifest", &manifest]);
    let m: serde_json::Value = serde_json::from_str(&read(&manifest)).unwrap();
    assert_eq!(m["support_total"], 0);
    // both are fully fused fits; the coefficients stay constant per covariate
    let rows: Vec<Vec<f64>> = read(&scaled)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    for j in 1..=9 {
        let vals: Vec<f64> = rows.iter().filter(|r| r[3] == j as f64).map(|r| r[4]).collect();
        let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - vals.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 1e-6 * (1.0 + vals[0].abs()), "covariate {j} spread {spread}");
    }
}

#[test]
fn predict_and_grid_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 60, 6);
    let fit = p(dir.path(), "fit.csv");
    ok(&["fit", "--data", &data, "--lambda", "0.01", "--out", &fit]);

    let query = p(dir.path(), "q.csv");
    std::fs::write(&query, "t,tau,x1,x2,x3,x4,x5,x6,x7,x8,x9\n0.5,0.5,1,0,0,0,0,0,0,0,0\n0.2,0.9,1,0,0,0,0,0,0,0,0\n")
        .unwrap();
    let pred = p(dir.path(), "pred.csv");
    ok(&["predict", "--fit", &fit, "--data", &data, "--query", &query, "--k", "5", "--out", &pred]);
    let text = read(&pred);
    assert!(text.starts_with("t,tau,quantile\n"));
    assert_eq!(text.lines().count(), 3);

    let grid = p(dir.path(), "grid.csv");
    ok(&["grid", "--fit", &fit, "--data", &data, "--t-steps", "4", "--tau-steps", "3", "--out", &grid]);
    let text = read(&grid);
    assert!(text.starts_with("t,tau,j,beta_hat\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 3 * 9);

    // data that does not belong to the fit is refused
    let (other, _) = {
        let sub = dir.path().join("other");
        std::fs::create_dir_all(&sub).unwrap();
        simulate(&sub, 60, 7)
    };
    let out = rqf(&["grid", "--fit", &fit, "--data", &other, "--out", &grid]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_file_round_trips_through_the_library() {
    let dir = tempfile::tempdir().unwrap();
    let (data, _) = simulate(dir.path(), 40, 8);
    let fit = p(dir.path(), "fit.csv");
    ok(&["fit", "--data", &data, "--lambda", "0.005", "--out", &fit]);
    let loaded = rqf_core::io::read_fit(Path::new(&fit)).unwrap();
    let again = dir.path().join("again.csv");
    rqf_core::io::write_fit(&again, &loaded.points, &loaded.beta).unwrap();
    assert_eq!(std::fs::read(&fit).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn full_pipeline_writes_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (data, truth) = simulate(dir.path(), 1000, 42);
    let (path, best, grid, metrics) = (
        p(dir.path(), "path.csv"),
        p(dir.path(), "fit.csv"),
        p(dir.path(), "grid.csv"),
        p(dir.path(), "metrics.csv"),
    );
    let out = rqf(&[
        "path", "--data", &data, "--n-lambda", "5", "--lambda-min-ratio", "0.1", "--tol-primal", "1e-4",
        "--tol-dual", "1e-4", "--max-iter", "500", "--out", &path, "--best-fit", &best,
    ]);
    assert!(matches!(out.status.code(), Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out.stderr));
    let path_text = read(&path);
    assert!(path_text.starts_with("lambda,bic,converged,loss,penalty,support_total\n"));
    assert_eq!(path_text.lines().count(), 6);

    ok(&["grid", "--fit", &best, "--data", &data, "--out", &grid]);
    assert_eq!(read(&grid).lines().count(), 1 + 100 * 90 * 9);

    ok(&["eval", "--fit", &best, "--truth", &truth, "--out", &metrics]);
    let text = read(&metrics);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "j,precision,recall,tnr,npv,defined");
    assert_eq!(lines.len(), 1 + 9 + 1);
    assert!(lines[10].starts_with("mse,"));
    // beta_8 is zero everywhere: TNR and NPV are defined, precision and recall of
    // a never-separated truth have no positives
    let row8: Vec<&str> = lines[8].split(',').collect();
    assert_eq!(row8[0], "8");
    assert!(row8[5].ends_with('1'), "{}", lines[8]);
}
