use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn epb(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epb"))
        .args(args)
        .current_dir(cwd)
        .env("EPB_THREADS", "1")
        .output()
        .expect("spawn epb")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn synth(dir: &Path, mode: &str) {
    let cfg = format!(
        r#"{{"vocab_size":32,"classes":3,"n_train":300,"n_test":120,"rho_exact":0.5,"rho_ambig":0.25,"embedding":"{mode}","dim":8,"seed":3}}"#
    );
    fs::write(dir.join("synth.json"), cfg).unwrap();
    ok(&epb(&["synth", "--config", "synth.json", "--out-dir", "s"], dir));
}

const CONLL: &str = "\
-DOCSTART- -X- -X- O

EU NNP B-NP B-ORG
rejects VBZ B-VP O
German JJ B-NP B-MISC
call NN I-NP O

Peter NNP B-NP B-PER
Blackburn NNP I-NP I-PER
";

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(epb(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(epb(&["audit"], dir.path()).status.code(), Some(1));
    assert_eq!(epb(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(epb(&["--version"], dir.path()).status.code(), Some(0));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = epb(&["audit", "--dataset", "missing"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("junk.epemb"), b"not an archive").unwrap();
    let out = epb(&["emb", "validate", "--emb", "junk.epemb"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn conll_ingest_discovers_labels() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.conll"), CONLL).unwrap();
    ok(&epb(
        &["ingest", "--format", "conll2003", "--train", "a.conll", "--test", "a.conll", "--name", "ner", "--out", "d"],
        dir.path(),
    ));
    let schema = fs::read_to_string(dir.path().join("d/schema.json")).unwrap();
    for l in ["\"ORG\"", "\"MISC\"", "\"PER\"", "\"O\""] {
        assert!(schema.contains(l), "{schema}");
    }
    let test = fs::read_to_string(dir.path().join("d/test.jsonl")).unwrap();
    assert!(test.contains("\"span1\":[0,2]"), "{test}");
}

#[test]
fn ingest_rejects_labels_outside_a_given_schema() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.conll"), CONLL).unwrap();
    fs::write(
        dir.path().join("schema.json"),
        r#"{"name":"ner","arity":"one-span","labeling":"single-label","labels":["O","ORG"]}"#,
    )
    .unwrap();
    let args = ["ingest", "--format", "conll2003", "--train", "a.conll", "--test", "a.conll", "--schema", "schema.json", "--out", "d"];
    assert_eq!(epb(&args, dir.path()).status.code(), Some(2));
    let mut ext = args.to_vec();
    ext.push("--extend-labels");
    ok(&epb(&ext, dir.path()));
}

#[test]
fn audit_reports_match_synth_truth() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "informative");
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/truth.json")).unwrap()).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&ok(&epb(&["audit", "--dataset", "s/data", "--report", "json"], dir.path()))).unwrap();
    let text = report.to_string();
    let acc = truth["mem_exact_accuracy"].as_f64().unwrap();
    assert!(text.contains(&format!("{acc}")), "{text} vs {acc}");
    let tsv = ok(&epb(&["audit", "--dataset", "s/data"], dir.path()));
    assert_eq!(tsv.lines().count(), 4);
}

#[test]
fn filter_removes_exactly_the_classifiable_points() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "informative");
    ok(&epb(&["filter", "--dataset", "s/data", "--heuristic", "mem-exact", "--out", "f"], dir.path()));
    let lines = |p: &str| fs::read_to_string(dir.path().join(p)).unwrap().lines().map(str::to_owned).collect::<Vec<_>>();
    let kept = lines("f/test.jsonl");
    let removed = lines("f/removed.jsonl");
    // 120 test examples, half of them exact-memorizable.
    assert_eq!(removed.len() + kept.len(), lines("s/data/test.jsonl").len());
    let truth: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("s/truth.json")).unwrap()).unwrap();
    assert_eq!(removed.len() as u64, truth["mem_exact_correct"].as_u64().unwrap());
}

#[test]
fn split_train_eval_and_pool_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "informative");
    let d = dir.path();
    ok(&epb(&["split", "--dataset", "s/data", "--dev-fraction", "0.1", "--seed", "4", "--out", "d"], d));
    ok(&epb(
        &[
            "train", "--dataset", "d", "--emb", "s/embeddings.epemb", "--probe", "mlp", "--hidden", "8", "--epochs",
            "2", "--replicas", "2", "--out", "m.epm", "--log", "log.json",
        ],
        d,
    ));
    let log: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("log.json")).unwrap()).unwrap();
    assert_eq!(log["replica_dev_scores"].as_array().unwrap().len(), 2);
    let report = ok(&epb(
        &[
            "eval", "--gold", "d/test.jsonl", "--model", "m.epm", "--emb", "s/embeddings.epemb", "--write-pred",
            "p.jsonl", "--report", "json",
        ],
        d,
    ));
    let a: serde_json::Value = serde_json::from_str(&report).unwrap();
    let b: serde_json::Value = serde_json::from_str(&ok(&epb(
        &["eval", "--gold", "d/test.jsonl", "--pred", "p.jsonl", "--report", "json"],
        d,
    )))
    .unwrap();
    assert_eq!(a, b);
    ok(&epb(&["emb", "pool", "--emb", "s/embeddings.epemb", "--dataset", "d", "--part", "test", "--out", "pooled.epemb"], d));
    let v = ok(&epb(&["emb", "validate", "--emb", "pooled.epemb"], d));
    assert!(v.contains("120 sentences"), "{v}");
}

#[test]
fn unaligned_predictions_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "informative");
    let d = dir.path();
    let gold = fs::read_to_string(d.join("s/data/test.jsonl")).unwrap();
    let short: String = gold.lines().skip(1).map(|l| format!("{l}\n")).collect();
    fs::write(d.join("p.jsonl"), short).unwrap();
    let out = epb(&["eval", "--gold", "s/data/test.jsonl", "--pred", "p.jsonl"], d);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn drop_arithmetic_and_classification() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&epb(&["drop", "--original-acc", "80", "--filtered-acc", "60", "--random-drop", "60"], dir.path()));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["drop"], 25.0);
    assert_eq!(v["classification"], "higher-significant");
    fs::write(dir.path().join("o.json"), r#"{"accuracy": 50.0}"#).unwrap();
    fs::write(dir.path().join("f.json"), r#"{"accuracy": 55.0}"#).unwrap();
    let v: serde_json::Value =
        serde_json::from_str(&ok(&epb(&["drop", "--original", "o.json", "--filtered", "f.json"], dir.path()))).unwrap();
    assert_eq!(v["drop"], -10.0);
}

#[test]
fn mdl_two_part_reports_complexity() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "noise");
    let d = dir.path();
    let out = ok(&epb(
        &["mdl", "--dataset", "s/data", "--emb", "s/embeddings.epemb", "--epochs", "1", "--replicas", "1"],
        d,
    ));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    // Linear probe on 8 dims, 3 classes: 27 parameters over 300 points.
    let k = 27.0 / 2.0 * (300f64).log2();
    assert!((v["complexity_bits"].as_f64().unwrap() - k).abs() < 1e-9, "{v}");
    let out = ok(&epb(
        &[
            "mdl", "--mode", "prequential", "--schedule", "0.1,0.5,1.0", "--dataset", "s/data", "--emb",
            "s/embeddings.epemb", "--epochs", "1", "--replicas", "1",
        ],
        d,
    ));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["blocks"].as_array().unwrap().len(), 3);
}

#[test]
fn pipeline_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "informative");
    let d = dir.path();
    fs::write(
        d.join("run.toml"),
        r#"
dataset = "s/data"
seed = 5
dev_fraction = 0.1

[[archive]]
name = "enc"
path = "s/embeddings.epemb"

[probe]
kinds = ["linear"]
epochs = 1
replicas = 1
"#,
    )
    .unwrap();
    ok(&epb(&["pipeline", "--config", "run.toml", "--out", "run"], d));
    for f in ["manifest.json", "audit.tsv", "drop_table.md", "cells/enc-linear/model.epm"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
}
