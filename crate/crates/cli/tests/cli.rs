use std::path::Path;
use std::process::{Command, Output};

use cmtrace_cli::cache::{self, FILE_NAME, MAGIC};
use cmtrace_core::{f_coefficients, QuadForm};
use serde_json::Value;

fn cmtrace(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmtrace"))
        .args(args)
        .arg("--cache-dir")
        .arg(cache)
        .env_remove("RUST_LOG")
        .output()
        .expect("spawn cmtrace")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn pn_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["pn", "1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("p(1) = 1\n"), "{s}");
    assert!(s.contains("Tr(1) = 23 "), "{s}");
}

#[test]
fn pn_two_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["pn", "2", "--format", "json"], dir.path());
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["p"], "2");
    assert_eq!(v["trace_times_D"], "94");
    assert_eq!(v["D"], "47");
    assert_eq!(v["certified"], true);
    assert!(v["trace"]["err"].is_number());
    assert!(v["trace"]["re"].is_string());
}

#[test]
fn pn_zero_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["pn", "0"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn poly_one_text() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["poly", "1"], dir.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "H_1(x) = x^3 - 23*x^2 + (3592/23)*x - 419\n");
}

#[test]
fn poly_three_degree_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["poly", "3", "--format", "json"], dir.path());
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["degree"], 7);
    assert_eq!(v["coefficients"][1]["num"], "-213");
    assert_eq!(v["coefficients"][1]["den"], "1");
}

#[test]
fn poly_one_json_strings() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["poly", "1", "--format", "json"], dir.path());
    let v = json(&o);
    let got: Vec<(String, String)> = v["coefficients"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["num"].as_str().unwrap().into(), c["den"].as_str().unwrap().into()))
        .collect();
    let want = [("1", "1"), ("-23", "1"), ("3592", "23"), ("-419", "1")];
    assert_eq!(got.len(), 4);
    for ((n, d), (wn, wd)) in got.iter().zip(want) {
        assert_eq!((n.as_str(), d.as_str()), (wn, wd));
    }
}

fn forms_of(n: &str, dir: &Path) -> Vec<(i64, i64, i64)> {
    let o = cmtrace(&["forms", n, "--format", "json"], dir);
    assert!(o.status.success());
    json(&o)["forms"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            (
                f["a"].as_i64().unwrap(),
                f["b"].as_i64().unwrap(),
                f["c"].as_i64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn forms_one_and_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        forms_of("1", dir.path()),
        vec![(6, 1, 1), (12, 13, 4), (18, 25, 9)]
    );
    assert_eq!(
        forms_of("2", dir.path()),
        vec![(6, 1, 2), (12, 1, 1), (18, 13, 3), (24, 25, 7), (36, 49, 17)]
    );
    for n in ["1", "2", "5", "24"] {
        for (a, b, c) in forms_of(n, dir.path()) {
            assert_eq!(a % 6, 0);
            assert_eq!(b.rem_euclid(12), 1);
            let q = QuadForm::new(a, b, c).unwrap();
            assert!(q.discriminant() < 0);
        }
    }
}

#[test]
fn verify_first_twenty() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["verify", "1..20"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("20/20 matches"));
}

#[test]
fn verify_reports_an_injected_fault() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["verify", "1..3", "--perturb", "--format", "json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let v = json(&o);
    assert_eq!(v["matches"], 2);
    assert_eq!(v["rows"][0]["matches"], false);
}

#[test]
fn verify_rejects_bad_ranges() {
    let dir = tempfile::tempdir().unwrap();
    for r in ["0..3", "5..2", "7"] {
        assert_eq!(cmtrace(&["verify", r], dir.path()).status.code(), Some(2), "{r}");
    }
}

#[test]
fn relocation_does_not_change_the_answer() {
    let dir = tempfile::tempdir().unwrap();
    let plain = json(&cmtrace(&["pn", "1", "--format", "json"], dir.path()));
    let moved = json(&cmtrace(&["pn", "1", "--format", "json", "--relocation"], dir.path()));
    assert_eq!(plain["p"], moved["p"]);
    assert_eq!(plain["trace_times_D"], moved["trace_times_D"]);
    let o = cmtrace(&["verify", "1..1", "--relocation"], dir.path());
    assert!(o.status.success());
}

#[test]
fn parallel_sum_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["pn", "5", "--deterministic-sum", "false", "--format", "json"], dir.path());
    assert!(o.status.success());
    assert_eq!(json(&o)["p"], "7");
}

#[test]
fn eval_at_the_first_cm_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = cmtrace(&["eval", "6", "1", "1", "--format", "json"], dir.path());
    assert!(o.status.success());
    let v = json(&o);
    assert!(v["value"]["re"].as_str().unwrap().starts_with("13.96548628151245"));
    assert!(v["value"]["err"].as_f64().unwrap() < 1e-15);
    let bad = cmtrace(&["eval", "1", "5", "1"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn cache_roundtrip_order_500() {
    let dir = tempfile::tempdir().unwrap();
    let s = f_coefficients(500);
    let path = cache::cache_write(dir.path(), &s).unwrap();
    assert_eq!(path, dir.path().join(FILE_NAME));
    let back = cache::cache_read(dir.path()).unwrap();
    assert_eq!(back, s);
    assert_eq!(cache::encode(&back), std::fs::read(&path).unwrap());
}

#[test]
fn stale_cache_version_is_rebuilt() {
    let dir = tempfile::tempdir().unwrap();
    cache::cache_write(dir.path(), &f_coefficients(300)).unwrap();
    let path = dir.path().join(FILE_NAME);
    let mut bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], MAGIC);
    bytes[8] ^= 0xff;
    std::fs::write(&path, &bytes).unwrap();

    let o = cmtrace(&["pn", "2", "-v"], dir.path());
    assert!(o.status.success());
    let log = stderr(&o);
    assert!(log.contains("ignoring coefficient cache"), "{log}");
    assert!(log.contains("building coefficient table"), "{log}");
    assert!(cache::cache_read(dir.path()).is_ok());
}

#[test]
fn second_run_hits_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let first = cmtrace(&["pn", "2", "-v"], dir.path());
    assert!(first.status.success());
    assert!(stderr(&first).contains("building coefficient table"));

    let second = cmtrace(&["pn", "2", "-v"], dir.path());
    assert!(second.status.success());
    let log = stderr(&second);
    assert!(log.contains("coefficient cache hit"), "{log}");
    assert!(!log.contains("building coefficient table"), "{log}");
    assert_eq!(stdout(&first), stdout(&second));
}
