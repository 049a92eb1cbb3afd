use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn lqbe(args: &[&str], config: Option<&str>, out: &Path) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lqbe"));
    cmd.args(args).arg("--out").arg(out);
    if let Some(json) = config {
        let path = out.with_extension("json");
        fs::write(&path, json).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str], config: Option<&str>, out: &Path) {
    let o = lqbe(args, config, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

/// Header and rows of a numeric CSV; non-numeric cells become NaN.
fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let (fa, fb) = (files(a), files(b));
    assert_eq!(fa.len(), fb.len());
    for (x, y) in fa.iter().zip(&fb) {
        assert_eq!(x.file_name(), y.file_name());
        assert!(fs::read(x).unwrap() == fs::read(y).unwrap(), "{} differs", x.display());
    }
}

#[test]
fn kernels_table_respects_the_row_bound_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["kernels"], None, &a);
    ok(&["kernels"], None, &b);
    assert_same_outputs(&a, &b);

    let (h, rows) = read_csv(&a.join("kernels.csv"));
    let (k, norm, bound) = (column(&h, "k"), column(&h, "row_norm"), column(&h, "bound_rhs"));
    assert_eq!(rows.first().unwrap()[k], 1e-3);
    assert_eq!(rows.last().unwrap()[k], 50.0);
    let ratio = (rows[1][k] / rows[0][k]).ln();
    for (i, r) in rows.iter().enumerate() {
        assert!(r[bound] >= r[norm], "row {i}");
        if i > 0 {
            assert!(((r[k] / rows[i - 1][k]).ln() / ratio - 1.0).abs() < 1e-9);
        }
    }
    let c0 = json(&a.join("c0_norm.json"));
    assert!((c0["c0"].as_f64().unwrap() - 0.6074260804).abs() < 1e-9);
    assert_eq!(c0["convergence"].as_array().unwrap().len(), 3);
}

#[test]
fn spectrum_reports_a_converged_positive_gap() {
    let tmp = TempDir::new().unwrap();
    ok(&["spectrum"], None, tmp.path());
    let (h, rows) = read_csv(&tmp.path().join("spectrum.csv"));
    let (c, res) = (column(&h, "c_star"), column(&h, "null_residual"));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert!(r[c] > 0.0);
        assert!(r[res] <= 1e-10);
    }
    assert!(((rows[1][c] - rows[0][c]) / rows[1][c]).abs() < 0.05);
}

#[test]
fn equilibrium_stays_at_the_round_off_floor() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"initial": {"preset": "equilibrium"}, "solver": {"t_end": 5.0}}"#;
    ok(&["evolve"], Some(cfg), &tmp.path().join("run"));
    let (h, rows) = read_csv(&tmp.path().join("run/diagnostics.csv"));
    let (d, l2) = (column(&h, "dist_eq"), column(&h, "l2_norm"));
    assert!(h.iter().any(|c| c == "dissipation"));
    assert_eq!(rows.len(), 51);
    for r in &rows {
        assert!(r[d] <= 1e3 * f64::EPSILON * r[l2], "dist_eq {}", r[d]);
    }
}

#[test]
fn decay_study_recovers_the_half_power_rate() {
    let tmp = TempDir::new().unwrap();
    ok(&["decay-study"], None, tmp.path());
    let summary = json(&tmp.path().join("summary.json"));
    let slope = summary["slope"].as_f64().unwrap();
    assert!((-0.65..=-0.45).contains(&slope), "slope {slope}");
    assert_eq!(summary["classification"]["condition_met"], "Condition2");
    let (h, rows) = read_csv(&tmp.path().join("eps_table.csv"));
    let t = column(&h, "t_half");
    assert!(rows.windows(2).all(|w| w[1][t] > w[0][t]));
}

#[test]
fn three_d_runs_are_seeded() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"3d": {"L_max": 2}, "solver": {"dt": 0.05, "t_end": 20.0}}"#;
    let run = |name: &str, seed: &str| {
        let dir = tmp.path().join(name);
        ok(&["3d", "--seed", seed], Some(cfg), &dir);
        dir
    };
    let (a, b, c) = (run("a", "7"), run("b", "7"), run("c", "8"));
    assert_same_outputs(&a, &b);
    assert_ne!(
        fs::read(a.join("field_initial.json")).unwrap(),
        fs::read(c.join("field_initial.json")).unwrap()
    );

    let summary = json(&a.join("summary.json"));
    assert!(summary["theta_residual"].as_f64().unwrap() < 1e-10);
    assert!(summary["energy_drift"].as_f64().unwrap() < 1e-10);
    let (h, rows) = read_csv(&a.join("modes.csv"));
    assert_eq!(&h[..2], ["ell", "m"]);
    assert_eq!(rows.len(), 9 * 41);
    let theta = json(&a.join("theta.json"));
    assert_eq!(theta["modes"].as_array().unwrap().len(), 9);
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = r#"{"initial": {"preset": "power(0.5)"}, "solver": {"scheme": "etd-rk2", "t_end": 2.0}}"#;
    let first = tmp.path().join("first");
    ok(&["evolve"], Some(cfg), &first);
    let echoed = fs::read_to_string(first.join("config.json")).unwrap();
    let resolved = json(&first.join("config.json"));
    assert_eq!(resolved["solver"]["scheme"], "etd-rk2");
    assert_eq!(resolved["grid"]["n"], 400);
    assert_eq!(resolved["initial"]["remove_equilibrium"], false);

    let second = tmp.path().join("second");
    ok(&["evolve"], Some(&echoed), &second);
    assert_same_outputs(&first, &second);
}

#[test]
fn tabulated_initial_data_is_accepted() {
    let tmp = TempDir::new().unwrap();
    let table = tmp.path().join("f0.csv");
    let mut body = String::from("k,f0\n");
    for i in 0..200 {
        let k = 1e-3 * 1.06f64.powi(i);
        body.push_str(&format!("{k},{}\n", (-k).exp()));
    }
    fs::write(&table, body).unwrap();
    let cfg = format!(
        r#"{{"initial": {{"csv": {:?}}}, "solver": {{"t_end": 1.0}}}}"#,
        table.display().to_string()
    );
    ok(&["evolve"], Some(&cfg), &tmp.path().join("run"));
    let summary = json(&tmp.path().join("run/summary.json"));
    assert!(summary["energy_drift"].as_f64().unwrap() < 1e-10);
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let tmp = TempDir::new().unwrap();
    for (i, cfg) in [
        r#"{"gird": {}}"#,
        r#"{"solver": {"scheme": "rk4"}}"#,
        r#"{"solver": {"dt": -1.0}}"#,
        r#"{"initial": {"preset": "bump(0.9)"}}"#,
        r#"{"initial": {"preset": "exp-decay", "csv": "x.csv"}}"#,
        r#"{"grid": {"n": 400, "k_min": 0.0}}"#,
        "not json",
    ]
    .iter()
    .enumerate()
    {
        let o = lqbe(&["evolve"], Some(cfg), &tmp.path().join(format!("bad{i}")));
        assert_eq!(
            o.status.code(),
            Some(2),
            "{cfg}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
    let missing = tmp.path().join("missing.json");
    let o = Command::new(env!("CARGO_BIN_EXE_lqbe"))
        .args(["kernels", "--config"])
        .arg(&missing)
        .arg("--out")
        .arg(tmp.path().join("m"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let tmp = TempDir::new().unwrap();
    // The bump half-decay times cannot be reached within t_end.
    let cfg = r#"{"solver": {"t_end": 0.05}}"#;
    let o = lqbe(&["decay-study"], Some(cfg), &tmp.path().join("run"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn verify_passes_on_defaults() {
    let tmp = TempDir::new().unwrap();
    let o = lqbe(&["verify"], None, tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{stdout}");
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 15);
    assert!(fs::read_to_string(tmp.path().join("verify.txt"))
        .unwrap()
        .contains("15 of 15"));
}
