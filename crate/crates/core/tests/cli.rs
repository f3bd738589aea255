//! The `bergman-lab` binary: output files, determinism and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman-lab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn weight_table_default_grid() {
    let out = TempDir::new().unwrap();
    let o = run(&["weight"], out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let (header, rows) = read_csv(&out.path().join("weight.csv"));
    assert_eq!(
        header,
        [
            "r",
            "k",
            "h",
            "W",
            "ode_residual",
            "lower_bound",
            "upper_bound"
        ]
    );
    assert_eq!(rows.len(), 513);
    assert_eq!(rows[0][0], 0.0);
    for row in &rows {
        assert!(row[4].abs() <= 1e-8);
        assert!(row[5] * (1.0 - 1e-12) <= row[3] && row[3] <= row[6] * (1.0 + 1e-12));
    }
    assert!(out.path().join("weight.gp").exists());
}

#[test]
fn weight_table_n2_closed_form() {
    let out = TempDir::new().unwrap();
    let cfg = write_config(out.path(), "n2.toml", "n = 2\ntest_functions = [[]]\n");
    let o = run(&["weight", "--config", &cfg], out.path());
    assert_eq!(o.status.code(), Some(0));
    let (_, rows) = read_csv(&out.path().join("weight.csv"));
    for row in &rows {
        let r = row[0];
        assert!(row[4].abs() <= 1e-10);
        assert!((row[3] - 1.0 / (1.0 + r * r)).abs() <= 1e-12 * (1.0 + row[3]));
    }
}

#[test]
fn output_is_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        assert_eq!(
            run(&["weight", "--seed", "7"], dir.path()).status.code(),
            Some(0)
        );
        assert_eq!(
            run(&["stability-fit", "--seed", "7"], dir.path())
                .status
                .code(),
            Some(0)
        );
    }
    for name in ["weight.csv", "phi_fit.csv", "fit.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between runs");
    }
}

#[test]
fn stability_fit_slopes() {
    let out = TempDir::new().unwrap();
    for (n, target) in [(2, 2.0), (3, 2.5), (4, 3.0)] {
        let cfg = write_config(
            out.path(),
            "fit.toml",
            &format!("n = {n}\ntest_functions = [[]]\n"),
        );
        let o = run(&["stability-fit", "--config", &cfg], out.path());
        assert_eq!(o.status.code(), Some(0), "n = {n}");
        let fit: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.path().join("fit.json")).unwrap()).unwrap();
        let slope = fit["slope"].as_f64().unwrap();
        assert!((slope - target).abs() <= 0.05, "n = {n}: slope {slope}");
        assert!(fit["r_squared"].as_f64().unwrap() > 0.999);
        let (header, rows) = read_csv(&out.path().join("phi_fit.csv"));
        assert_eq!(header, ["T", "phi", "log1mT", "logphi"]);
        assert_eq!(rows.len(), 20);
    }
}

#[test]
fn verify_monotonicity_constant_only() {
    let out = TempDir::new().unwrap();
    let cfg = write_config(out.path(), "one.toml", "test_functions = [[]]\n");
    let o = run(&["verify", "monotonicity", "--config", &cfg], out.path());
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(out.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["suite"], "monotonicity");
    assert_eq!(report["passed"], true);
    assert_eq!(report["config"]["tolerances"]["monotonicity"], 1e-6);
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for key in ["name", "passed", "worst_margin", "count", "runtime_s"] {
        assert!(checks[0].get(key).is_some(), "missing {key}");
    }
}

#[test]
fn verify_fails_on_tight_tolerance() {
    let out = TempDir::new().unwrap();
    // the equality case is only resolved to ~1e-9, so a 1e-15 budget must fail
    let cfg = write_config(
        out.path(),
        "tight.toml",
        "test_functions = [[]]\nlevels = 5\n[tolerances]\nmonotonicity = 1e-15\n",
    );
    let o = run(&["verify", "monotonicity", "--config", &cfg], out.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(out.path().join("report.json").exists());
}

#[test]
fn config_errors_exit_3() {
    let out = TempDir::new().unwrap();
    let bad = write_config(out.path(), "bad.toml", "n = \n");
    let o = run(&["weight", "--config", &bad], out.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("TOML parse error"));

    let unknown = write_config(out.path(), "unknown.toml", "colour = 1\n");
    assert_eq!(
        run(&["weight", "--config", &unknown], out.path())
            .status
            .code(),
        Some(3)
    );

    let missing = out.path().join("nope");
    assert_eq!(run(&["weight"], &missing).status.code(), Some(3));
    assert!(!missing.exists());
    assert!(!out.path().join("weight.csv").exists());

    let n2 = write_config(out.path(), "n2.toml", "n = 2\ntest_functions = [[]]\n");
    assert_eq!(
        run(&["verify", "wehrl", "--config", &n2], out.path())
            .status
            .code(),
        Some(3)
    );
}
