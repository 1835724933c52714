use std::path::Path;
use std::process::{Command, Output};

use cdr_journeys::geo::zone_quantiles;
use cdr_journeys::ingest::AntennaRegistry;
use cdr_journeys::odflow::{spearman, ODMatrix};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cdr-journeys")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, users: &str) {
    ok(&["synth", "--out", s(dir), "--users", users, "--num-days", "2", "--seed", "5"]);
}

#[test]
fn synth_run_score() {
    let tmp = tempfile::tempdir().unwrap();
    let city = tmp.path().join("city");
    let out = tmp.path().join("out");
    synth(&city, "150");
    let text = ok(&[
        "run",
        "--cdr",
        s(&city.join("cdr.csv")),
        "--antennas",
        s(&city.join("antennas.csv")),
        "--entropy-mode",
        "off",
        "--out",
        s(&out),
    ]);
    assert!(text.contains("2015-06-01 users=") && text.contains("2015-06-02 users="), "{text}");
    for f in ["ingest_report.json", "zone_quantiles.csv", "entropy.csv", "journeys.jsonl", "od/od_mean.csv", "stats/stats_summary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let score = ok(&[
        "score",
        "--truth",
        s(&city.join("truth.jsonl")),
        "--journeys",
        s(&out.join("journeys.jsonl")),
        "--antennas",
        s(&city.join("antennas.csv")),
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&score).unwrap();
    assert!(v["recall"].as_f64().unwrap() > 0.8, "{score}");
    assert!(v["precision"].as_f64().unwrap() > 0.8, "{score}");
}

#[test]
fn missing_registry_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let cdr = tmp.path().join("cdr.csv");
    std::fs::write(&cdr, "u1,a1,2015-06-01T08:00:00,data\n").unwrap();
    let out = cli(&["run", "--cdr", s(&cdr), "--antennas", "/nonexistent/antennas.csv", "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("registry not found"));
}

#[test]
fn empty_cdr_succeeds_with_zero_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let city = tmp.path().join("city");
    synth(&city, "5");
    let cdr = tmp.path().join("empty.csv");
    std::fs::write(&cdr, "user_id,antenna_id,timestamp,kind\n").unwrap();
    let out = tmp.path().join("out");
    ok(&["run", "--cdr", s(&cdr), "--antennas", s(&city.join("antennas.csv")), "--out", s(&out)]);
    let mean = ODMatrix::read_path(&out.join("od/od_mean.csv")).unwrap();
    assert_eq!(mean.total(), 0.0);
}

#[test]
fn od_compare_and_stats_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let city = tmp.path().join("city");
    synth(&city, "120");
    let (cdr, antennas) = (city.join("cdr.csv"), city.join("antennas.csv"));
    let j = tmp.path().join("j");
    ok(&["journeys", "--cdr", s(&cdr), "--antennas", s(&antennas), "--entropy-mode", "off", "--out", s(&j)]);

    let od = tmp.path().join("od");
    ok(&["od", "--journeys", s(&j.join("journeys.jsonl")), "--antennas", s(&antennas), "--out", s(&od)]);
    for f in ["od_2015-06-01.csv", "od_2015-06-02.csv", "od_mean.csv"] {
        assert!(od.join(f).exists(), "{f}");
    }

    let (a, b) = (od.join("od_2015-06-01.csv"), od.join("od_2015-06-02.csv"));
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["compare", s(&a), s(&b), "--no-diagonal", "--json"])).unwrap();
    assert!(v.get("with_diagonal").is_none());
    let lib = spearman(&ODMatrix::read_path(&a).unwrap(), &ODMatrix::read_path(&b).unwrap(), false).unwrap();
    assert!((v["without_diagonal"]["rho"].as_f64().unwrap() - lib.rho).abs() < 1e-12);
    let both = ok(&["compare", s(&a), s(&a)]);
    assert!(both.contains("with diagonal: rho=1.000000"), "{both}");

    let st = tmp.path().join("stats");
    let text = ok(&[
        "stats",
        "--journeys",
        s(&j.join("journeys.jsonl")),
        "--antennas",
        s(&antennas),
        "--cdr",
        s(&cdr),
        "--out",
        s(&st),
    ]);
    assert_eq!(text.lines().count(), 2, "{text}");
    assert!(st.join("stats_summary.csv").exists());
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let city = tmp.path().join("city");
    synth(&city, "20");
    let (cdr, antennas) = (city.join("cdr.csv"), city.join("antennas.csv"));
    let conf = tmp.path().join("run.conf");
    std::fs::write(&conf, "quantile = 0.5\nentropy_mode = off\n").unwrap();
    let registry = AntennaRegistry::from_path(&antennas).unwrap();
    let mean_q = |q: f64| zone_quantiles(&registry, q, 500.0).unwrap().mean_q().unwrap();

    let run = |extra: &[&str]| -> f64 {
        let out = tmp.path().join("j");
        let mut args = vec!["journeys", "--cdr", s(&cdr), "--antennas", s(&antennas), "--out", s(&out), "--json"];
        args.extend_from_slice(extra);
        let v: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
        v["mean_zone_q_m"].as_f64().unwrap()
    };
    assert!((run(&[]) - mean_q(0.8)).abs() < 1e-9);
    assert!((run(&["--config", s(&conf)]) - mean_q(0.5)).abs() < 1e-9);
    assert!((run(&["--config", s(&conf), "--quantile", "0.9"]) - mean_q(0.9)).abs() < 1e-9);

    let bad = tmp.path().join("bad.conf");
    std::fs::write(&bad, "quantile = 0.5\nfrobnicate = 1\n").unwrap();
    let out = cli(&["journeys", "--cdr", s(&cdr), "--antennas", s(&antennas), "--out", s(&tmp.path().join("x")), "--config", s(&bad)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn ingest_check_reports_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let city = tmp.path().join("city");
    synth(&city, "10");
    let v: serde_json::Value = serde_json::from_str(&ok(&[
        "ingest-check",
        "--cdr",
        s(&city.join("cdr.csv")),
        "--antennas",
        s(&city.join("antennas.csv")),
        "--json",
    ]))
    .unwrap();
    assert_eq!(v["rows"], v["accepted"]);
    assert!(v["rows"].as_u64().unwrap() > 0);
}
