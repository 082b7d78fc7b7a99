//! End-to-end runs of the `qhx` binary: determinism, exit codes, config
//! overrides and the documented examples.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn qhx(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_qhx"));
    c.args(args).arg("--out").arg(out).env_remove("QHX_THREADS");
    if let Some(t) = threads {
        c.env("QHX_THREADS", t);
    }
    c.output().expect("spawn qhx")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn csvs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

const SMALL_RUNS: &[&[&str]] = &[
    &["growth", "--domain", "disk", "--s", "0.5", "--samples", "60", "--res", "0.02", "--seed", "7"],
    &["qh-dist", "--z0", "0,0", "--z1", "0.9,0", "--res", "0.02"],
    &["scan", "--s", "0.5", "--depth", "20", "--angular-n", "6"],
    &["thm31", "--s", "0.5", "--lambda", "-1.5", "--samples", "4", "--depth", "20"],
    &["energy", "--res", "0.05"],
    &["counterexample", "--k", "4", "--res", "4e-3"],
    &["series", "--k", "10000"],
];

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = Vec::new();
    for (i, args) in SMALL_RUNS.iter().enumerate() {
        let runs: Vec<_> = [None, None, Some("1"), Some("2")]
            .iter()
            .enumerate()
            .map(|(j, t)| {
                let d = dir.path().join(format!("{i}_{j}"));
                let o = qhx(args, &d, *t);
                (code(&o), csvs(&d))
            })
            .collect();
        let same = runs.iter().all(|r| r == &runs[0]) && !runs[0].1.is_empty();
        if !same {
            bad.push(args[0]);
        }
    }
    let pass = bad.is_empty();
    let line = format!(
        "criterion 9: {} — {} commands rerun with identical config and QHX_THREADS=1/2, differing outputs {bad:?}\n",
        if pass { "PASS" } else { "FAIL" },
        SMALL_RUNS.len()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&qhx(&["scan", "--s", "0"], &d.join("a"), None)), 2);
    assert_eq!(code(&qhx(&["scan", "--s", "0.5", "--bogus"], &d.join("b"), None)), 2);
    assert_eq!(code(&qhx(&["series", "--k", "100"], &d.join("c"), Some("0"))), 2);
    assert_eq!(code(&qhx(&["scan", "--s", "0.5", "--depth", "49"], &d.join("d"), None)), 3);
    let cfg = d.join("bad.json");
    std::fs::write(&cfg, r#"{"s": 0.5, "nonsense": 1}"#).unwrap();
    assert_eq!(
        code(&qhx(&["scan", "--config", cfg.to_str().unwrap()], &d.join("e"), None)),
        2
    );
}

#[test]
fn growth_violations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let horn = ["growth", "--domain", "power_cusp:0.5:horn", "--samples", "500", "--res", "0.005"];
    let ok = qhx(&[&horn[..], &["--s", "0.5"]].concat(), &dir.path().join("a"), None);
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stderr));
    let strict = qhx(&[&horn[..], &["--s", "0.75"]].concat(), &dir.path().join("b"), None);
    assert_eq!(code(&strict), 1);
}

#[test]
fn config_file_with_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.json");
    std::fs::write(&cfg, r#"{"s": 0.5, "kind": "g", "lambda": [-2, -1], "depth": 20, "angular_n": 6}"#).unwrap();
    let c = cfg.to_str().unwrap();
    let a = qhx(&["scan", "--config", c], &dir.path().join("a"), None);
    assert_eq!(code(&a), 0);
    let table = std::fs::read_to_string(dir.path().join("a/scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
    let b = qhx(&["scan", "--config", c, "--lambda", "-1.5"], &dir.path().join("b"), None);
    assert_eq!(code(&b), 0);
    let table = std::fs::read_to_string(dir.path().join("b/scan.csv")).unwrap();
    assert_eq!(table.lines().count(), 2);
    assert!(table.lines().nth(1).unwrap().contains(",-1.5,"));
}

#[test]
fn g_scan_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhx(&["scan", "--kind", "g", "--s", "0.5", "--lambda=-2,-1.5,-1.1,-1"], dir.path(), None);
    assert_eq!(code(&o), 0);
    let table = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    let verdicts: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
    assert_eq!(verdicts, ["CONVERGENT", "CONVERGENT", "CONVERGENT", "DIVERGENT"]);
}

fn trend_verdicts(dir: &Path) -> Vec<(String, String, String)> {
    let table = std::fs::read_to_string(dir.join("counterexample_trend.csv")).unwrap();
    let mut rows: Vec<(String, String, String)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[8].to_string(), f[9].to_string())
        })
        .collect();
    rows.dedup();
    rows
}

#[test]
fn power_cusp_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhx(&["counterexample", "--s", "0.5", "--k", "8", "--res", "1e-3"], dir.path(), None);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = trend_verdicts(dir.path());
    assert!(v.contains(&("-1".into(), "DIVERGENT".into(), "DIVERGENT".into())), "{v:?}");
    assert!(v.contains(&("-1.5".into(), "CONVERGENT".into(), "CONVERGENT".into())), "{v:?}");
}

#[test]
fn iterated_log_cusp_counterexample() {
    let dir = tempfile::tempdir().unwrap();
    let o = qhx(
        &["counterexample", "--s", "0.9", "--sigma", "1", "--k", "8", "--res", "1e-3"],
        dir.path(),
        None,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = trend_verdicts(dir.path());
    assert!(v.contains(&("-2".into(), "DIVERGENT".into(), "DIVERGENT".into())), "{v:?}");
}
