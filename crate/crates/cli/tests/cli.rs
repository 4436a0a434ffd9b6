use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn mwk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes a 3-cluster scenario and returns the path of replicate 0.
fn generated(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.json");
    fs::write(
        &spec,
        r#"{"n_entities": 90, "n_informative": 4, "k_true": 3, "noise_fraction": 0.5, "seed": 11}"#,
    )
    .unwrap();
    let out = dir.join("data");
    let o = mwk(&["generate", "--spec", s(&spec), "--out", s(&out), "--replicates", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    out.join("90x4-3+2NF_r0.csv")
}

#[test]
fn generate_writes_csv_and_sidecar_per_replicate() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generated(dir.path());
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1,x2,x3,x4,x5,x6,label");
    assert_eq!(lines.count(), 90);
    let side = json(&csv.with_extension("json"));
    assert_eq!(side["true_k"], 3);
    assert_eq!(side["n_features"], 6);
    assert_eq!(side["replicate"], 0);
    let r1 = dir.path().join("data/90x4-3+2NF_r1.csv");
    assert_ne!(fs::read_to_string(r1).unwrap(), text);
}

#[test]
fn cluster_then_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generated(dir.path());
    for (method, p) in [("kmeans", None), ("kmedians", None), ("mwk", Some("1.5")), ("imwk", Some("1"))] {
        let out = dir.path().join(format!("{method}.json"));
        let mut args = vec!["cluster", "--in", s(&csv), "--method", method, "--k", "3", "--restarts", "5"];
        if let Some(p) = p {
            args.extend(["--p", p]);
        }
        args.extend(["--out", s(&out)]);
        let o = mwk(&args);
        assert_eq!(code(&o), 0, "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let c = json(&out);
        assert_eq!(c["method"], method);
        assert_eq!(c["k"], 3);
        assert_eq!(c["assignments"].as_array().unwrap().len(), 90);
        assert_eq!(c["centroids"].as_array().unwrap().len(), 3);
        assert_eq!(c["weights"].is_null(), p.is_none());

        let metrics = dir.path().join(format!("{method}_metrics.json"));
        let o = mwk(&["evaluate", "--clustering", s(&out), "--labels", s(&csv), "--out", s(&metrics)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let m = json(&metrics);
        assert_eq!(m["true_k"], 3);
        assert_eq!(m["relative_error"], 0.0);
        let ari = m["ari"].as_f64().unwrap();
        assert!((-1.0..=1.0).contains(&ari));
    }
}

#[test]
fn cluster_is_deterministic_under_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generated(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = mwk(&["cluster", "--in", s(&csv), "--method", "mwk", "--k", "3", "--p", "1.3", "--restarts", "4", "--seed", "9", "--out", s(&out)]);
        assert_eq!(code(&o), 0);
        fs::read_to_string(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn estimate_k_reports_per_k_values() {
    let dir = tempfile::tempdir().unwrap();
    let csv = generated(dir.path());
    let out = dir.path().join("report.json");
    let o = mwk(&[
        "estimate-k", "--in", s(&csv), "--method", "imwk-rescaled-kmeans", "--p", "1.4", "--index", "sil_mink",
        "--kmax", "6", "--restarts", "3", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&out);
    assert_eq!(r["index_name"], "sil_mink");
    let k = r["selected_k"].as_u64().unwrap();
    assert!((2..=6).contains(&k));
    assert!(r["per_k_values"].as_object().unwrap().contains_key(&k.to_string()));
    assert_eq!(r["assignments"].as_array().unwrap().len(), 90);

    let out = dir.path().join("baseline.json");
    let o = mwk(&[
        "estimate-k", "--in", s(&csv), "--method", "baseline", "--index", "hartigan", "--kmax", "5",
        "--restarts", "3", "--out", s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(json(&out)["selection_rule"], "hartigan_threshold");
}

#[test]
fn experiment_writes_records_and_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{
            "scenarios": [{"n_entities": 60, "n_informative": 3, "k_true": 2, "noise_fraction": 0.0, "seed": 1}],
            "replicates": 2,
            "methods": ["baseline_kmeans", "imwk"],
            "p_grid": [1.5],
            "indexes": ["sil_eucl", "ch"],
            "k_max": 4,
            "restarts": 2
        }"#,
    )
    .unwrap();
    let out = dir.path().join("results");
    let o = mwk(&["experiment", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let records = fs::read_to_string(out.join("records.ndjson")).unwrap();
    assert_eq!(records.lines().count(), 2 * (2 + 2));
    let tables: Vec<_> = fs::read_dir(out.join("tables")).unwrap().map(|e| e.unwrap().path()).collect();
    assert!(tables.iter().any(|p| p.extension().is_some_and(|e| e == "csv")));
    assert!(tables.iter().any(|p| p.extension().is_some_and(|e| e == "md")));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mwk(&["--help"])), 0);
    assert_eq!(code(&mwk(&["--version"])), 0);
    assert_eq!(code(&mwk(&[])), 1);
    assert_eq!(code(&mwk(&["cluster", "--method", "bogus"])), 1);

    let out = dir.path().join("c.json");
    let missing = dir.path().join("missing.csv");
    let o = mwk(&["cluster", "--in", s(&missing), "--method", "kmeans", "--k", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,x\n").unwrap();
    let o = mwk(&["cluster", "--in", s(&bad), "--method", "kmeans", "--k", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 2);

    let csv = generated(dir.path());
    let o = mwk(&["cluster", "--in", s(&csv), "--method", "kmeans", "--k", "0", "--out", s(&out)]);
    assert_eq!(code(&o), 1);
    let o = mwk(&["cluster", "--in", s(&csv), "--method", "mwk", "--k", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 1, "missing --p");

    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "a,b\n1,2\n1,2\n1,2\n").unwrap();
    let o = mwk(&["cluster", "--in", s(&flat), "--method", "kmeans", "--k", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));

    let pairs = dir.path().join("pairs.csv");
    fs::write(&pairs, "a,b\n0,0\n0,0.1\n5,5\n5,5.1\n").unwrap();
    let o = mwk(&["cluster", "--in", s(&pairs), "--method", "imwk", "--k", "4", "--p", "2", "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}
