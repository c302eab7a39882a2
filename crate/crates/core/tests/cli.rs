mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value as Json;

use common::{synthetic_csv, SYNTHETIC_NET};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hybridnet"));
    c.env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn ok_json(args: &[&str]) -> Json {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn shipped() -> String {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/cardiopulmonary.net").to_string()
}

struct Workdir {
    dir: tempfile::TempDir,
}

impl Workdir {
    fn new() -> Self {
        let w = Self {
            dir: tempfile::tempdir().unwrap(),
        };
        std::fs::write(w.path("model.net"), SYNTHETIC_NET).unwrap();
        std::fs::write(w.path("data.csv"), synthetic_csv(300)).unwrap();
        let priors = run(&["priors", "defaults", &w.s("model.net")]);
        assert!(priors.status.success());
        std::fs::write(w.path("model.priors"), priors.stdout).unwrap();
        w
    }

    fn path(&self, f: &str) -> PathBuf {
        self.dir.path().join(f)
    }

    fn s(&self, f: &str) -> String {
        self.path(f).display().to_string()
    }
}

#[test]
fn validate_reports_counts_and_exit_codes() {
    let v = ok_json(&["validate", &shipped(), "--json"]);
    assert_eq!(v["variables"], 262);
    assert!(v["edges"].as_u64().unwrap() > 500);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.net");
    std::fs::write(&bad, "var \"X\" : VD : binary\nparents \"X\" : \"Nope\"\n").unwrap();
    assert_eq!(run(&["validate", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(run(&["validate", "/no/such/file.net"]).status.code(), Some(2));
}

#[test]
fn fit_echoes_default_schedule() {
    let v = ok_json(&["fit", "m", "p", "d", "--out", "c", "--dry-run", "--json"]);
    assert_eq!(v["config"]["iterations"], 55_000);
    assert_eq!(v["config"]["burn_in"], 30_000);
    assert_eq!(v["config"]["thin"], 5);
    assert_eq!(run(&["fit", "m", "p", "d", "--out", "c", "--thin", "0", "--dry-run"]).status.code(), Some(1));
}

fn fit(w: &Workdir, out: &str) -> Json {
    let args = [
        "fit",
        &w.s("model.net"),
        &w.s("model.priors"),
        &w.s("data.csv"),
        "--iters",
        "3000",
        "--burnin",
        "1000",
        "--thin",
        "2",
        "--seed",
        "9",
        "--out",
        &w.s(out),
        "--json",
    ];
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(text.lines().skip(1).collect::<Vec<_>>().join("\n").as_str()).unwrap()
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap()
}

#[test]
fn pipeline_is_reproducible() {
    let w = Workdir::new();
    let a = fit(&w, "a.chain");
    let b = fit(&w, "b.chain");
    assert_eq!(a["chains"][0]["summary"], b["chains"][0]["summary"]);
    assert_eq!(bytes(&w.path("a.chain")), bytes(&w.path("b.chain")));
    assert_eq!(a["chains"][0]["draws"], 1000);

    let d1 = ok_json(&["diagnostics", &w.s("a.chain"), "--priors", &w.s("model.priors"), "--json"]);
    let d2 = ok_json(&["diagnostics", &w.s("b.chain"), "--priors", &w.s("model.priors"), "--json"]);
    assert_eq!(d1, d2);
    let hist: u64 = d1["pass_histogram"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
    assert_eq!(hist as usize, d1["params"].as_array().unwrap().len());

    let ds = ok_json(&["dstat", &w.s("a.chain"), &w.s("model.priors"), "--json"]);
    assert_eq!(ds["histogram"]["edges"], serde_json::json!([0.01, 0.5, 0.925, 0.975]));

    ok_json(&[
        "discretize",
        &w.s("model.net"),
        &w.s("a.chain"),
        "--priors",
        &w.s("model.priors"),
        "--out",
        &w.s("net.json"),
        "--json",
    ]);
    std::fs::write(w.path("ev.json"), r#"{"D": 2, "E": 2.5}"#).unwrap();
    let q = ok_json(&["query", &w.s("net.json"), "--evidence", &w.s("ev.json"), "--vars", "A,C", "--method", "exact", "--json"]);
    assert_eq!(q["status"], "ok");
    let q1 = ok_json(&["query", &w.s("net.json"), "--evidence", &w.s("ev.json"), "--seed", "4", "--json"]);
    let q2 = ok_json(&["query", &w.s("net.json"), "--evidence", &w.s("ev.json"), "--seed", "4", "--json"]);
    assert_eq!(q1, q2);
    assert_eq!(q1["ranking"].as_array().unwrap().len(), 3);

    std::fs::write(w.path("scope.txt"), "D\nE\n").unwrap();
    let rows = ok_json(&[
        "cindex",
        &w.s("net.json"),
        &w.s("data.csv"),
        "--model",
        &w.s("model.net"),
        "--diseases",
        "A,C",
        "--scope",
        &w.s("scope.txt"),
        "--bootstrap",
        "200",
        "--samples",
        "2000",
        "--json",
    ]);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert_eq!(r["scope"], "scope");
        let c = r["estimate"].as_f64().unwrap();
        assert!(c > 0.5 && c <= 1.0, "{r}");
        assert!(r["lo"].as_f64().unwrap() <= c && c <= r["hi"].as_f64().unwrap());
    }

    let bad = run(&["query", &w.s("net.json"), "--vars", "Nope"]);
    assert_eq!(bad.status.code(), Some(1));
}
