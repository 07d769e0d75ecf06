use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mml::output::csv_body;

fn mml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mml"))
        .args(args)
        .env_remove("MML_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows of a CSV report as maps from column to cell.
fn rows(csv: &str) -> Vec<std::collections::HashMap<String, String>> {
    let body = csv_body(csv);
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const UNIFORM: &str = r#"{"m": 2, "P": [[0.5, 0.5], [0.5, 0.5]]}"#;
const TWO_STATE: &str = r#"{"m": 2, "P": [[0.9, 0.1], [0.2, 0.8]]}"#;
const CYCLE3: &str = r#"{"m": 3, "P": [[0, 1, 0], [0, 0, 1], [1, 0, 0]], "start": [1, 0, 0]}"#;

#[test]
fn chain_stationary_prints_pi() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "two.json", TWO_STATE);
    let o = mml(&["chain", "stationary", "--in", &f]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("# pi=(0.666667, 0.333333)"), "{out}");
    let r = rows(&out);
    assert!((r[0]["pi"].parse::<f64>().unwrap() - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn chain_generate_iid_has_identical_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let o = mml(&["chain", "generate", "--family", "iid", "--mu", "0.5,0.5", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spec = mml::chainfile::read_chain(&out).unwrap();
    assert_eq!(spec.matrix.row(0), spec.matrix.row(1));
    assert_eq!(spec.matrix.row(0), &[0.5, 0.5]);
}

#[test]
fn chain_generate_random_is_seeded() {
    let a = mml(&["chain", "generate", "--family", "random-dense", "--m", "4", "--seed", "3"]);
    let b = mml(&["chain", "generate", "--family", "random-dense", "--m", "4", "--seed", "3"]);
    let c = mml(&["chain", "generate", "--family", "random-dense", "--m", "4", "--seed", "4"]);
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    assert_eq!(mml(&["chain", "generate", "--family", "lazy-cycle"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"m": 2, "P": [[0.6, 0.5], [0.5, 0.5]]}"#);
    let o = mml(&["chain", "validate", "--in", &bad]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("\"P\"[0]") && stderr(&o).contains("1.1"), "{}", stderr(&o));

    let garbled = write(dir.path(), "garbled.json", "{\"m\": 2,\n\"P\": [[0.5, 0.5]\n");
    let o = mml(&["chain", "validate", "--in", &garbled]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));

    assert_eq!(mml(&["chain", "validate", "--in", "/nonexistent/x.json"]).status.code(), Some(2));
    assert_eq!(mml(&["chain", "frobnicate"]).status.code(), Some(2));

    let reducible = write(dir.path(), "red.json", r#"{"m": 2, "P": [[1, 0], [0.5, 0.5]]}"#);
    let o = mml(&["chain", "validate", "--in", &reducible]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o))[0]["irreducible"], "false");
    let o = mml(&["chain", "stationary", "--in", &reducible]);
    assert_eq!(o.status.code(), Some(4));
    assert!(o.stdout.is_empty());

    let o = mml(&["hit", "tlarge", "--gen", "lazy-cycle:m=21:hold=0.5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = mml(&["hit", "tlarge", "--heuristic", "--gen", "lazy-cycle:m=21:hold=0.5"]);
    assert!(o.status.success());
    assert_eq!(rows(&stdout(&o))[0]["method"], "heuristic");

    let o = mml(&["simulate", "jointtail", "--J", "5", "--n", "2", "--gen", "two-state:p=0.1:q=0.2"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn hit_examples() {
    let dir = tempfile::tempdir().unwrap();
    let u = write(dir.path(), "u.json", UNIFORM);
    let o = mml(&["hit", "tlarge", "--eps", "0.5", "--in", &u]);
    let r = rows(&stdout(&o));
    assert_eq!((r[0]["value"].as_str(), r[0]["witness"].as_str()), ("2", "0"));

    let o = mml(&["hit", "lemma1", "--A", "0", "--B", "1", "--in", &u]);
    let r = rows(&stdout(&o));
    let ratio = r.iter().find(|x| x["name"] == "lemma1-ratio").unwrap();
    assert_eq!((ratio["value"].as_str(), ratio["bound"].as_str(), ratio["holds"].as_str()), ("0.5", "0.5", "true"));

    let c = write(dir.path(), "c.json", CYCLE3);
    let o = mml(&["hit", "table", "--B", "2", "--in", &c]);
    let h: Vec<String> = rows(&stdout(&o)).iter().map(|r| r["h"].clone()).collect();
    assert_eq!(h, ["2", "1", "0"]);

    let o = mml(&["hit", "tplus", "--A", "0,1", "--B", "2", "--in", &c]);
    assert_eq!(rows(&stdout(&o))[0]["value"], "2");
    let o = mml(&["hit", "tminus", "--A", "0,1", "--B", "2", "--in", &c]);
    assert_eq!(rows(&stdout(&o))[0]["value"], "1");

    let o = mml(&["hit", "lemma2", "--A", "0", "--in", &c]);
    let r = rows(&stdout(&o));
    assert_eq!((r[0]["value"].as_str(), r[0]["bound"].as_str()), ("2", "6"));
}

#[test]
fn simulate_examples() {
    let dir = tempfile::tempdir().unwrap();
    let u = write(dir.path(), "u.json", UNIFORM);
    let dump = dir.path().join("dump.csv");
    let o = mml(&["simulate", "mm", "--n", "1", "--trials", "1000", "--seed", "7", "--in", &u, "--dump", dump.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&stdout(&o))[0]["mean"], "0.5");
    let d = fs::read_to_string(&dump).unwrap();
    assert!(csv_body(&d).starts_with("trial,value,unseen_set\n"));
    let samples = rows(&d);
    assert_eq!(samples.len(), 1000);
    assert!(samples.iter().all(|s| s["value"] == "0.5" && (s["unseen_set"] == "0" || s["unseen_set"] == "1")));

    let o = mml(&["simulate", "jointtail", "--J", "1", "--n", "3", "--trials", "100000", "--seed", "7", "--in", &u]);
    let r = &rows(&stdout(&o))[0];
    let (p, ci): (f64, f64) = (r["p_hat"].parse().unwrap(), r["ci95"].parse().unwrap());
    // 99% band from the exact binomial standard deviation
    assert!((p - 0.125).abs() <= 2.576 * (0.125f64 * 0.875 / 1e5).sqrt(), "{p}");
    assert!(ci > 0.0 && ci < 0.01);

    let o = mml(&["simulate", "mgf", "--s", "0,1", "--n", "1", "--trials", "500", "--in", &u]);
    let r = rows(&stdout(&o));
    assert_eq!(r[0]["mgf"], "1");
    assert!((r[1]["mgf"].parse::<f64>().unwrap() - 0.5f64.exp()).abs() < 1e-12);

    let c = write(dir.path(), "c.json", CYCLE3);
    let o = mml(&["simulate", "hittail", "--B", "2", "--t", "2,3", "--trials", "100", "--in", &c]);
    let r = rows(&stdout(&o));
    assert_eq!((r[0]["p_hat"].as_str(), r[1]["p_hat"].as_str()), ("1", "0"));
}

#[test]
fn simulation_output_ignores_worker_count() {
    let run = |w: &str| {
        Command::new(env!("CARGO_BIN_EXE_mml"))
            .args(["simulate", "jointtail", "--J", "0,2", "--n", "1..6", "--trials", "20000", "--seed", "11"])
            .args(["--gen", "random-dense:m=5:alpha=0.5:seed=2"])
            .env("MML_WORKERS", w)
            .output()
            .unwrap()
            .stdout
    };
    let one = run("1");
    assert!(!one.is_empty());
    assert_eq!(one, run("4"));
}

#[test]
fn bounds_evaluators() {
    let o = mml(&["bounds", "iid-survival", "--mass", "0.5", "--n", "3"]);
    assert_eq!(rows(&stdout(&o))[0]["survival"], "0.125");
    let o = mml(&["bounds", "hittail", "--expected", "1", "--t", "3"]);
    assert_eq!(rows(&stdout(&o))[0]["bound"], (-1.0f64).exp().to_string());
    let o = mml(&["bounds", "joint", "--J", "0", "--n", "10", "--c", "1", "--T", "1", "--gen", "iid:mu=0.1/0.9"]);
    assert!((rows(&stdout(&o))[0]["bound"].parse::<f64>().unwrap() - (-1.0f64).exp()).abs() < 1e-15);
    let o = mml(&["bounds", "q", "--n", "2", "--iid", "--gen", "iid:mu=0.5/0.5"]);
    assert_eq!(rows(&stdout(&o))[0]["q"], "0.25");
    let o = mml(&["bounds", "pinsker", "--p", "0.9", "--q", "0.1"]);
    assert_eq!(rows(&stdout(&o))[0]["holds"], "true");
    let o = mml(&["bounds", "kl", "--p", "0", "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(4));
    let o = mml(&["bounds", "mmtail", "--n", "10", "--eps", "0.1", "--gen", "lazy-cycle:m=4:hold=0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mml(&["bounds", "mgf", "--n", "3", "--s", "0", "--form", "eq3", "--gen", "lazy-cycle:m=4:hold=0.5"]);
    assert_eq!(rows(&stdout(&o))[0]["bound"], "1");
}

#[test]
fn json_format() {
    let o = mml(&["--format", "json", "bounds", "kl", "--p", "0.5", "--q", "0.5"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["rows"][0]["kl"], serde_json::json!(0.0));
    assert_eq!(v["meta"]["command"], "bounds kl");
}

#[test]
fn verify_lemma1_example_is_clean() {
    let o = mml(&["verify", "lemma1", "--random-chains", "200", "--m-max", "8", "--seed", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("violations: 0"));
}

#[test]
fn verify_with_config_and_summary_file() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "two.json", TWO_STATE);
    let cfg = write(
        dir.path(),
        "exp.json",
        r#"{
            "chains": [{"path": "two.json"}, {"family": "lazy-cycle", "m": 4, "hold": 0.5}],
            "sets": [[0], [1]],
            "n_grid": [20, 40],
            "trials": 5000,
            "master_seed": 5,
            "output": "out/report.csv"
        }"#,
    );
    let o = mml(&["verify", "thm1", "--config", &cfg]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert!(report.contains("# seed=5"));
    let r = rows(&report);
    assert!(r.iter().any(|x| x["chain_id"].ends_with("two.json")));
    assert!(r.iter().any(|x| x["chain_id"] == "lazy-cycle:m=4:hold=0.5" && x["params"].contains("J=1;n=40")));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"].as_array().unwrap().len(), 0);
    assert_eq!(summary["master_seed"], 5);

    let bad = write(dir.path(), "bad.json", r#"{"chains": [{"path": "missing.json"}]}"#);
    assert_eq!(mml(&["verify", "thm1", "--config", &bad]).status.code(), Some(2));
}

#[test]
fn verify_iid_with_range_grid() {
    let o = mml(&["verify", "iid", "--m", "4", "--n", "1..12", "--trials", "20000", "--seed", "3", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let survival = rows.iter().filter(|r| r["name"] == "iid-joint-survival").count();
    // 4 singletons and all 11 larger subsets, 12 run lengths each
    assert_eq!(survival, 15 * 12);
    let counts = &v["summary"]["checks"]["iid-joint-survival"];
    assert_eq!(counts["pass"].as_u64().unwrap() + counts["fail"].as_u64().unwrap(), 180);
}

#[test]
fn verify_large_c_fails() {
    let o = mml(&["verify", "thm1", "--c", "100", "--trials", "5000", "--seed", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!stderr(&o).contains("violations: 0"));
}
