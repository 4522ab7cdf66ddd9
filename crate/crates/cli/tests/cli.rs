use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn leasefair(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leasefair"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = leasefair(dir, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn full_pipeline_smoke() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen-cases", "--n", "150", "--seed", "7", "--out", "cases.json"]);
    assert_eq!(json(&d.join("cases.json")).as_array().unwrap().len(), 150);
    let manifest = json(&d.join("cases.json.manifest.json"));
    assert_eq!(manifest["subcommand"], "gen-cases");
    assert_eq!(manifest["seeds"]["sample"], 7);

    ok(d, &["render-docs", "--cases", "cases.json", "--out", "deeds"]);
    let deed = std::fs::read_to_string(d.join("deeds/case-0001.txt")).unwrap();
    assert!(deed.contains("DOES NOT ORDER"));
    assert!(d.join("deeds/manifest.json").exists());

    ok(
        d,
        &["oracle-label", "--cases", "cases.json", "--answered", "140", "--seed", "7", "--labels-out", "labels.csv", "--out", "ds.json"],
    );
    assert_eq!(json(&d.join("ds.json"))["rows"].as_array().unwrap().len(), 140);
    ok(d, &["ingest-labels", "--cases", "cases.json", "--labels", "labels.csv", "--out", "ds2.json"]);
    assert_eq!(json(&d.join("ds.json")), json(&d.join("ds2.json")));

    let digest = ok(d, &["train", "--dataset", "ds.json", "--trees", "15", "--seed", "3", "--out", "model.lfb"]);
    let m = json(&d.join("model.lfb.manifest.json"));
    assert!(m["inputs"]["ds.json"].as_str().unwrap().len() == 64);

    let table = ok(
        d,
        &["evaluate", "--dataset", "ds.json", "--k", "3", "--trees", "10", "--epochs", "2", "--out", "eval.json"],
    );
    for name in ["forest", "linear", "mlp", "tree", "constant", "median"] {
        assert!(table.lines().any(|l| l.starts_with(name)), "{name} missing from\n{table}");
    }
    assert_eq!(json(&d.join("eval.json"))["reports"].as_array().unwrap().len(), 6);

    let pruned = ok(d, &["prune", "--dataset", "ds.json", "--bundle", "model.lfb", "--threshold", "1e-3", "--out", "pruned.json"]);
    assert!(pruned.starts_with("kept "));
    let kept = json(&d.join("pruned.kept.json"));
    let n_kept = kept["kept"].as_array().unwrap().len();
    assert!((3..25).contains(&n_kept), "{n_kept}");
    assert_eq!(json(&d.join("pruned.json"))["encoding"]["features"].as_array().unwrap().len(), n_kept);

    let digest2 = ok(d, &["train", "--dataset", "pruned.json", "--trees", "15", "--seed", "3", "--out", "pruned.lfb"]);
    assert_ne!(digest, digest2);

    ok(d, &["explain", "--bundle", "pruned.lfb", "--cases", "cases.json", "--case-id", "case-0002", "--out", "wf.json"]);
    let wf = json(&d.join("wf.json"));
    let steps = wf["payload"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), n_kept);
    let prediction = wf["payload"]["prediction"].as_f64().unwrap();
    assert!((steps.last().unwrap()["end"].as_f64().unwrap() - prediction).abs() < 1e-9);

    ok(d, &["explain", "--bundle", "pruned.lfb", "--cases", "cases.json", "--plot", "decision", "--out", "dec.json"]);
    assert_eq!(json(&d.join("dec.json"))["payload"]["paths"].as_array().unwrap().len(), 150);

    ok(d, &["counterfactual", "--bundle", "pruned.lfb", "--cases", "cases.json", "--case-id", "case-0002", "--out", "cf.json"]);
    let cf = json(&d.join("cf.json"));
    let results = cf["queries"][0]["results"].as_array().unwrap();
    assert_eq!(results.len(), 3.min(n_kept));
    for r in results {
        assert!(r["result"].is_object() || r["message"].is_string());
    }
}

#[test]
fn training_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["gen-cases", "--n", "80", "--seed", "1", "--out", "cases.json"]);
    ok(d, &["oracle-label", "--cases", "cases.json", "--out", "ds.json"]);
    let a = ok(d, &["train", "--dataset", "ds.json", "--trees", "8", "--seed", "9", "--out", "a.lfb"]);
    let b = ok(d, &["train", "--dataset", "ds.json", "--trees", "8", "--seed", "9", "--out", "b.lfb"]);
    assert_eq!(a, b);
    assert_eq!(std::fs::read(d.join("a.lfb")).unwrap(), std::fs::read(d.join("b.lfb")).unwrap());
}

#[test]
fn failures_exit_nonzero_with_structured_message() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let out = leasefair(d, &["train", "--dataset", "missing.json", "--out", "x.lfb"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["code"], "io_error");
    assert!(err["message"].as_str().unwrap().contains("missing.json"));

    assert!(!leasefair(d, &["frobnicate"]).status.success());

    ok(d, &["gen-cases", "--n", "5", "--out", "cases.json"]);
    std::fs::write(d.join("bad.lfb"), b"leasefair-bundle v1 sha256=00\n{}").unwrap();
    let out = leasefair(d, &["explain", "--bundle", "bad.lfb", "--cases", "cases.json", "--out", "e.json"]);
    let err: Value = serde_json::from_slice(out.stderr.trim_ascii()).unwrap();
    assert_eq!(err["code"], "bundle_error");
}
