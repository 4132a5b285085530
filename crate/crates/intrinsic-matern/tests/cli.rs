use intrinsic_matern::igmrf::ModelParams;
use intrinsic_matern::variogram::{closed_alpha1_beta1, stationary};
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use tempfile::TempDir;

fn iwm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iwm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = iwm(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn config(dir: &Path, model: &str, extra: &str) {
    write(dir, "run.json", &format!(r#"{{"schema": 1, "model": {model}{extra}}}"#));
}

/// Data rows of a CSV output, after checking the hash line.
fn rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let first = lines.next().unwrap();
    let hash = first.strip_prefix("# config sha256:").expect("hash line");
    assert_eq!(hash.len(), 64);
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let body = lines
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    (header, body)
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let (header, body) = rows(path);
    let i = header.iter().position(|h| h == name).unwrap();
    body.iter().map(|r| r[i].parse().unwrap()).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn variogram_table_uses_the_closed_form() {
    let dir = TempDir::new().unwrap();
    config(
        dir.path(),
        r#"{"tau": 1.3, "kappa": 1, "alpha": 1, "beta": 1, "d": 2}"#,
        r#", "variogram": {"h": [0, 0.1, 0.5, 2, 10]}"#,
    );
    ok(dir.path(), &["variogram", "--config", "run.json", "--out", "g.csv"]);
    let g = dir.path().join("g.csv");
    let (_, body) = rows(&g);
    assert!(body.iter().all(|r| r[2] == "closed_form"));
    let gamma = column(&g, "gamma");
    assert_eq!(gamma[0], 0.0);
    let p = ModelParams::new(1.3, 1.0, 1.0, 1.0, 0.0, 2).unwrap();
    for (&h, &g) in [0.1, 0.5, 2.0, 10.0].iter().zip(&gamma[1..]) {
        let quad = stationary(&p, h).unwrap();
        assert!((g - quad).abs() < 1e-6 * quad, "h={h}: {g} vs {quad}");
        assert_eq!(g, closed_alpha1_beta1(1.0, 1.3, h));
    }
}

#[test]
fn power_law_variogram_scales() {
    let dir = TempDir::new().unwrap();
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 0, "beta": 1.2, "d": 1}"#,
        r#", "variogram": {"h": [0.5, 1, 2, 4]}"#,
    );
    ok(dir.path(), &["variogram", "--config", "run.json", "--out", "g.csv"]);
    let gamma = column(&dir.path().join("g.csv"), "gamma");
    for w in gamma.windows(2) {
        assert!((w[1] / w[0] - 2f64.powf(1.4)).abs() < 1e-6, "{gamma:?}");
    }
}

#[test]
fn fixed_beta_is_pinned_in_the_report() {
    let dir = TempDir::new().unwrap();
    let data: String = std::iter::once("s1,value\n".to_string())
        .chain((0..30).map(|i| {
            let s = 0.3 + i as f64 * 0.6;
            format!("{s},{}\n", (s * 0.7).sin() + 0.05 * s)
        }))
        .collect();
    write(dir.path(), "obs.csv", &data);
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 1, "beta": 0.7, "sigma2": 0.1, "d": 1}"#,
        r#", "mesh": {"grid": "0:20:81"}, "fit": {"fix": {"alpha": 1}, "restarts": 0, "max_evaluations": 200}"#,
    );
    ok(
        dir.path(),
        &["fit", "--config", "run.json", "--data", "obs.csv", "--fix", "beta=1", "--out", "fit.json"],
    );
    let report = json(&dir.path().join("fit.json"));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["params"]["beta"].as_f64(), Some(1.0));
    assert_eq!(report["fixed"], serde_json::json!(["alpha", "beta"]));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_then_fit() {
    let dir = TempDir::new().unwrap();
    let sites: String = std::iter::once("s1\n".to_string())
        .chain((0..300).map(|i| format!("{}\n", 0.1 + i as f64 * (99.8 / 299.0))))
        .collect();
    write(dir.path(), "sites.csv", &sites);
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 0.5, "alpha": 1, "beta": 1, "sigma2": 0.2, "d": 1}"#,
        r#", "mesh": {"grid": "0:100:401"}, "seed": 11, "fit": {"fix": {"alpha": 1, "beta": 1}}"#,
    );
    ok(dir.path(), &["simulate", "--config", "run.json", "--sites", "sites.csv", "--out", "sim.csv"]);
    let (header, body) = rows(&dir.path().join("sim.csv"));
    assert_eq!(header, ["s1", "value"]);
    let obs: String = std::iter::once("s1,value\n".to_string())
        .chain(body.iter().map(|r| format!("{},{}\n", r[0], r[1])))
        .collect();
    write(dir.path(), "obs.csv", &obs);
    ok(dir.path(), &["fit", "--config", "run.json", "--data", "obs.csv", "--out", "fit.json"]);
    let report = json(&dir.path().join("fit.json"));
    assert!(report["loglik"].as_f64().unwrap() >= report["initial_loglik"].as_f64().unwrap() - 1e-9);
    let p = &report["params"];
    for (name, truth) in [("tau", 1.0), ("kappa", 0.5)] {
        let v = p[name].as_f64().unwrap();
        assert!(v / truth > 0.5 && v / truth < 2.0, "{name} = {v}");
    }
    let s2 = p["sigma2"].as_f64().unwrap();
    assert!(s2 > 0.1 && s2 < 0.4, "sigma2 = {s2}");
}

#[test]
fn kriging_at_an_observation_site() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "obs.csv", "s1,value\n2,1.5\n4.5,-0.2\n7,0.4\n");
    write(dir.path(), "targets.csv", "s1\n4.5\n");
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "sigma2": 1e-8, "d": 1}"#,
        r#", "mesh": {"grid": "0:10:101"}"#,
    );
    ok(
        dir.path(),
        &["krige", "--config", "run.json", "--data", "obs.csv", "--targets", "targets.csv", "--out", "k.csv"],
    );
    let k = dir.path().join("k.csv");
    assert!((column(&k, "mean")[0] + 0.2).abs() < 1e-5);
    assert!(column(&k, "sd")[0] < 1e-3);
}

#[test]
fn growth_of_the_variogram_orders_far_predictions() {
    let dir = TempDir::new().unwrap();
    let obs: String = std::iter::once("s1,value\n".to_string())
        .chain((0..10).map(|i| format!("{},{}\n", 0.5 + i as f64, 1.0 + 0.3 * i as f64)))
        .collect();
    write(dir.path(), "obs.csv", &obs);
    write(dir.path(), "targets.csv", "s1\n90\n");
    let mut out = Vec::new();
    for beta in [0, 1] {
        config(
            dir.path(),
            &format!(r#"{{"tau": 1, "kappa": 0.5, "alpha": 1, "beta": {beta}, "sigma2": 0.01, "d": 1}}"#),
            r#", "mesh": {"grid": "0:100:201"}"#,
        );
        ok(
            dir.path(),
            &["krige", "--config", "run.json", "--data", "obs.csv", "--targets", "targets.csv", "--out", "k.csv"],
        );
        let k = dir.path().join("k.csv");
        out.push((column(&k, "mean")[0], column(&k, "sd")[0]));
    }
    // The proper model forgets the data and returns to its zero mean; the
    // intrinsic one keeps following the rising data, with growing uncertainty.
    assert!(out[0].0.abs() < 1e-6, "{out:?}");
    assert!(out[1].0 > 3.7 && out[1].0 < 10.0, "{out:?}");
    assert!(out[0].1 < out[1].1, "{out:?}");
}

#[test]
fn extremal_kriging_on_a_path() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "obs.csv", "s1,value\n2,1.7\n4,0.3\n");
    write(dir.path(), "targets.csv", "s1\n3\n");
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 0, "beta": 1, "d": 1}"#,
        r#", "mesh": {"grid": "0:6:7"}, "extremes": {"conditional_samples": 20000}"#,
    );
    let args = [
        "extremes-krige", "--config", "run.json", "--data", "obs.csv", "--targets", "targets.csv",
        "--out", "k.csv", "--samples-out", "draws.csv",
    ];
    ok(dir.path(), &args);
    let k = dir.path().join("k.csv");
    assert!((column(&k, "mean")[0] - 1.0).abs() < 1e-10);
    // Resistance 1 on each side: conditional precision 2.
    assert!((column(&k, "sd")[0] - 0.5f64.sqrt()).abs() < 1e-10);
    let draws = column(&dir.path().join("draws.csv"), "target_0");
    let n = draws.len() as f64;
    let m = draws.iter().sum::<f64>() / n;
    assert!((m - 1.0).abs() < 5.0 * (0.5 / n).sqrt(), "{m}");

    let again = dir.path().join("draws2.csv");
    let mut args2 = args;
    args2[10] = again.to_str().unwrap();
    ok(dir.path(), &args2);
    assert_eq!(
        std::fs::read(dir.path().join("draws.csv")).unwrap(),
        std::fs::read(again).unwrap()
    );
}

#[test]
fn extremes_round_trip() {
    let dir = TempDir::new().unwrap();
    let sites: String = std::iter::once("s1\n".to_string())
        .chain((0..8).map(|i| format!("{}\n", 2.0 + 1.5 * i as f64)))
        .collect();
    write(dir.path(), "sites.csv", &sites);
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 0.5, "alpha": 1, "beta": 1, "sigma2": 0.05, "d": 1}"#,
        r#", "mesh": {"grid": "0:20:81"}, "seed": 3, "extremes": {"samples": 400},
           "fit": {"fix": {"alpha": 1, "beta": 1, "sigma2": 0.05}, "restarts": 0}"#,
    );
    ok(dir.path(), &["extremes-simulate", "--config", "run.json", "--sites", "sites.csv", "--out", "ex.csv"]);
    let ex = dir.path().join("ex.csv");
    let (header, body) = rows(&ex);
    assert_eq!(header.len(), 8);
    assert_eq!(body.len(), 400);
    assert!(column(&ex, "site_0").iter().all(|&y| y > 0.0));

    ok(
        dir.path(),
        &["fit", "--extremes", "--config", "run.json", "--sites", "sites.csv", "--data", "ex.csv", "--out", "a.json"],
    );
    ok(
        dir.path(),
        &["extremes-fit", "--config", "run.json", "--sites", "sites.csv", "--data", "ex.csv", "--out", "b.json"],
    );
    let a = json(&dir.path().join("a.json"));
    let b = json(&dir.path().join("b.json"));
    assert_eq!(a["params"], b["params"]);
    let curve = a["chi"].as_array().unwrap();
    assert_eq!(curve.len(), 8);
    assert_eq!(curve[0]["chi"].as_f64(), Some(1.0));
    let chis: Vec<f64> = curve.iter().map(|c| c["chi"].as_f64().unwrap()).collect();
    assert!(chis.windows(2).all(|w| w[1] < w[0]), "{chis:?}");
}

#[test]
fn convergence_errors_decrease() {
    let dir = TempDir::new().unwrap();
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}"#,
        r#", "convergence": {"levels": 3, "side": 10, "base_nodes": 11}"#,
    );
    ok(dir.path(), &["convergence", "--config", "run.json", "--out", "c.csv"]);
    let c = dir.path().join("c.csv");
    let err = column(&c, "error");
    assert_eq!(err.len(), 3);
    assert!(err.windows(2).all(|w| w[1] < w[0]), "{err:?}");
    let text = std::fs::read_to_string(&c).unwrap();
    let slope: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# slope "))
        .unwrap()
        .parse()
        .unwrap();
    assert!(slope > 1.5, "{slope}");
}

#[test]
fn outputs_are_deterministic_given_the_seed() {
    let dir = TempDir::new().unwrap();
    config(
        dir.path(),
        r#"{"tau": 1, "kappa": 1, "alpha": 1.5, "beta": 0.5, "sigma2": 0.1, "d": 2}"#,
        r#", "simulate": {"samples": 3}"#,
    );
    let run = |seed: &str, out: &str| {
        ok(
            dir.path(),
            &["simulate", "--config", "run.json", "--grid", "0:1:6x0:1:5", "--seed", seed, "--out", out],
        );
        std::fs::read_to_string(dir.path().join(out)).unwrap()
    };
    let a = run("5", "a.csv");
    assert_eq!(a, run("5", "b.csv"));
    let c = run("6", "c.csv");
    assert_ne!(a, c);
    // The seed is part of the resolved configuration.
    assert_ne!(a.lines().next(), c.lines().next());
    assert_eq!(a.lines().nth(1), Some("s1,s2,value_1,value_2,value_3"));
    assert_eq!(a.lines().filter(|l| !l.starts_with('#')).count(), 31);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let code = |args: &[&str]| iwm(dir.path(), args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["--version"]), Some(0));
    assert_eq!(code(&["frobnicate"]), Some(2));
    assert_eq!(code(&["variogram"]), Some(2));
    assert_eq!(code(&["variogram", "--config", "missing.json"]), Some(2));

    write(dir.path(), "bad.json", r#"{"schema": 1, "model": {"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}, "extra": 0}"#);
    assert_eq!(code(&["variogram", "--config", "bad.json"]), Some(2));
    config(dir.path(), r#"{"tau": 1, "kappa": 1, "alpha": 1, "beta": 1, "d": 1}"#, "");
    assert_eq!(code(&["variogram", "--config", "run.json", "--fix", "nu=1"]), Some(2));
    assert_eq!(code(&["variogram", "--config", "run.json", "--fix", "beta=-1"]), Some(2));
    assert_eq!(code(&["krige", "--config", "run.json", "--grid", "0:1:5"]), Some(2));
    write(dir.path(), "obs.csv", "s1,s2,value\n0,0,1\n");
    write(dir.path(), "t.csv", "s1\n0.5\n");
    assert_eq!(
        code(&["krige", "--config", "run.json", "--grid", "0:1:5", "--data", "obs.csv", "--targets", "t.csv"]),
        Some(2)
    );

    // Two observations at one site with no nugget leave a singular system.
    write(dir.path(), "twice.csv", "s1,value\n0.5,1\n0.5,1\n");
    assert_eq!(
        code(&[
            "extremes-krige", "--config", "run.json", "--grid", "0:1:5", "--data", "twice.csv", "--targets", "t.csv",
        ]),
        Some(3)
    );
}
