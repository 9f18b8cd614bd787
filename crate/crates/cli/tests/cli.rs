use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn solchart(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solchart"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn missing_scenario_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = solchart(&[
        "check",
        "--scenario",
        "does_not_exist.toml",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("not found"));
    assert!(!out.exists());
}

#[test]
fn invalid_override_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for bad in [
        ["--set", "region.eps=1.5"],
        ["--set", "nosuch.key=1"],
        ["--set", "grid.degree"],
        ["--seed", "18446744073709551615"],
    ] {
        let o = solchart(&[
            "check",
            bad[0],
            bad[1],
            "--out",
            out.to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
        assert!(!out.exists(), "{bad:?}");
    }
}

#[test]
fn lin_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = solchart(&[
        "check",
        "--scenario",
        scenario("lin.toml").to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(csv.starts_with("# schema=1\n"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(json["ok"], true);
    assert_eq!(json["seed"], 1);
}

#[test]
fn demo5_table_is_increasing() {
    let dir = tempfile::tempdir().unwrap();
    let o = solchart(&["demo5", "--out", dir.path().to_str().unwrap(), "--quiet"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("demo5.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema=1"));
    assert_eq!(lines.next(), Some("n,op_norm,lower_bound,increasing"));
    let norms: Vec<f64> = lines
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            assert_eq!(cols[3], "true");
            cols[1].parse().unwrap()
        })
        .collect();
    assert_eq!(norms.len(), 10);
    assert!(norms.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn demo5_rejects_other_systems() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = solchart(&[
        "demo5",
        "--scenario",
        scenario("lin.toml").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn failed_check_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = solchart(&[
        "flow",
        "--set",
        "tolerances.flow_residual=1e-14",
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("flow_residual"));
    assert!(dir.path().join("flow.csv").exists());
}

#[test]
fn reports_are_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = solchart(&[
            "chart",
            "--seed",
            "3",
            "--set",
            "probes.count=10",
            "--out",
            d.path().to_str().unwrap(),
            "--quiet",
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["chart.csv", "chart_report.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap()
        );
    }
}

#[test]
fn json_scenario_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let o = solchart(&[
        "chart",
        "--scenario",
        scenario("s5.json").to_str().unwrap(),
        "--set",
        "probes.count=10",
        "--out",
        dir.path().to_str().unwrap(),
        "--quiet",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let toml = std::fs::read_to_string(dir.path().join("scenario.toml")).unwrap();
    assert!(toml.contains("seed = 7"));
}
