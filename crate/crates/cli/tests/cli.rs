use std::path::Path;
use std::process::{Command, Output};

const TWO_PORTFOLIO: &str = include_str!("../../../configs/two_portfolio.toml");
const IDENTITIES: &str = include_str!("../../../configs/identities.toml");

fn skipfree(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skipfree"))
        .args(args)
        .arg("--config")
        .arg(config)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn unit_drift(portfolios: &str, tail: &str) -> String {
    format!(
        "schema_version = 1\n[model]\nkind = \"unit_drift\"\nportfolios = [{portfolios}]\n{tail}"
    )
}

#[test]
fn net_profit_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unit_drift(
        r#"{ family = "table", entries = [[1, 1.0]] }"#,
        "[[verify]]\nkind = \"portfolio_jump\"\nportfolios = [1]\nxs = [1]\nys = [0]\n",
    );
    let out = skipfree(&write(dir.path(), "c.toml", &cfg), &["verify"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("net profit"));
}

#[test]
fn oracle_budget_exceeded_exits_4_without_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TWO_PORTFOLIO.replace(
        "oracle_horizon = 10",
        "oracle_horizon = 30\noracle_budget = 1000",
    );
    let report = dir.path().join("r.csv");
    let out = skipfree(
        &write(dir.path(), "c.toml", &cfg),
        &[
            "verify",
            "--trials",
            "100",
            "--out",
            report.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("1000 leaves"), "{stderr}");
    assert!(!report.exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = [
        "schema_version = 7",
        "schema_version = 1\n[model]\nkind = \"sideways\"\nportfolios = []",
        &unit_drift(
            r#"{ family = "table", entries = [[0, 0.5], [2, 0.2]] }"#,
            "[simulate]\ncapitals = [0]\n",
        ),
    ];
    for (j, text) in bad.iter().enumerate() {
        let out = skipfree(
            &write(dir.path(), &format!("c{j}.toml"), text),
            &["simulate"],
        );
        assert_eq!(out.status.code(), Some(2), "case {j}");
    }
    let out = skipfree(&dir.path().join("missing.toml"), &["verify"]);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write(dir.path(), "ok.toml", TWO_PORTFOLIO);
    let out = skipfree(&cfg, &["verify", "--workers", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_far_capital_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TWO_PORTFOLIO.replace("capitals = [0, 1, 2, 5, 10]", "capitals = [1000000]");
    let out = skipfree(
        &write(dir.path(), "c.toml", &cfg),
        &[
            "simulate",
            "--trials",
            "2000",
            "--horizon",
            "100",
            "--format",
            "structured",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let row: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(row["estimate"], 0.0);
    assert_eq!(row["oracle_truncated"], 0.0);
}

#[test]
fn simulate_without_claims_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = unit_drift(
        r#"{ family = "table", entries = [[0, 1.0]] }"#,
        "[simulate]\ncapitals = [0, 3, 50]\n",
    );
    let out = skipfree(
        &write(dir.path(), "c.toml", &cfg),
        &["simulate", "--trials", "5000"],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let estimates: Vec<f64> = rows
        .deserialize::<std::collections::HashMap<String, String>>()
        .map(|r| r.unwrap()["estimate"].parse().unwrap())
        .collect();
    assert_eq!(estimates, vec![0.0, 0.0, 0.0]);
}

#[test]
fn simulate_matches_enumeration_at_equal_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = TWO_PORTFOLIO.replace("capitals = [0, 1, 2, 5, 10]", "capitals = [0, 1]");
    let out = skipfree(
        &write(dir.path(), "c.toml", &cfg),
        &[
            "simulate",
            "--horizon",
            "12",
            "--oracle-horizon",
            "12",
            "--format",
            "structured",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    for line in String::from_utf8(out.stdout).unwrap().lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(row["oracle_agrees"], true, "{line}");
        assert_eq!(row["trials"], 1_000_000);
    }
}

#[test]
fn verify_exit_code_follows_pass_flags() {
    let dir = tempfile::tempdir().unwrap();
    // zero closed forms: the event is impossible and every check passes
    let zero = unit_drift(
        r#"{ family = "table", entries = [[0, 0.8], [2, 0.2]] }, { family = "table", entries = [[0, 0.9], [3, 0.1]] }"#,
        "[run]\noracle_horizon = 8\n[[verify]]\nkind = \"portfolio_jump\"\nportfolios = [1, 2]\nxs = [2]\nys = [-1]\n",
    );
    let report = dir.path().join("zero.csv");
    let out = skipfree(
        &write(dir.path(), "zero.toml", &zero),
        &[
            "verify",
            "--trials",
            "20000",
            "--out",
            report.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), 3);

    let report = dir.path().join("full.csv");
    let out = skipfree(
        &write(dir.path(), "full.toml", TWO_PORTFOLIO),
        &[
            "verify",
            "--trials",
            "20000",
            "--out",
            report.to_str().unwrap(),
        ],
    );
    let text = std::fs::read_to_string(&report).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let pass_col = reader
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == "pass")
        .unwrap();
    let all_pass = reader.records().all(|r| &r.unwrap()[pass_col] == "true");
    assert_eq!(out.status.code(), Some(if all_pass { 0 } else { 1 }));
}

#[test]
fn reports_append_with_a_single_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TWO_PORTFOLIO);
    let report = dir.path().join("r.csv");
    for seed in ["1", "2"] {
        let out = skipfree(
            &cfg,
            &[
                "simulate",
                "--trials",
                "1000",
                "--seed",
                seed,
                "--oracle-horizon",
                "off",
                "--out",
                report.to_str().unwrap(),
            ],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(
        text.lines().filter(|l| l.starts_with("capital,")).count(),
        1
    );
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn timing_flag_fills_wall_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", TWO_PORTFOLIO);
    let base = ["simulate", "--trials", "1000", "--format", "structured"];
    let plain = skipfree(&cfg, &base);
    let timed = skipfree(&cfg, &[&base[..], &["--timing"]].concat());
    let first = |o: &Output| -> serde_json::Value {
        serde_json::from_str(String::from_utf8_lossy(&o.stdout).lines().next().unwrap()).unwrap()
    };
    assert!(first(&plain)["wall_time_s"].is_null());
    assert!(first(&timed)["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn identity_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = skipfree(&write(dir.path(), "c.toml", IDENTITIES), &["identities"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for suite in ["ballot", "rotations", "kemperman"] {
        assert!(text.lines().any(|l| l.starts_with(suite)));
    }
}
