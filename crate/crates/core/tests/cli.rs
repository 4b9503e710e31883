use std::path::Path;
use std::process::{Command, Output};

use molgraph::pipeline::synthetic::caption_corpus;

fn molgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_molgraph")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = molgraph(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn parse_json_and_errors() {
    let v: serde_json::Value = serde_json::from_str(&ok(&["parse", "CCO", "--json"])).unwrap();
    assert_eq!(v["valid"], true);
    assert_eq!(v["atoms"].as_array().unwrap().len(), 3);
    assert!(!molgraph(&["parse", "C1CC"]).status.success());
}

#[test]
fn motifs_and_projection() {
    let groups: serde_json::Value = serde_json::from_str(&ok(&["motifs", "CC(=O)O"])).unwrap();
    assert!(groups.as_array().unwrap().iter().any(|g| g["kind"] == "carboxyl"));
    let out = ok(&["project", "CC(=O)O", "--layers", "2", "--tokens", "3", "--width", "16"]);
    assert!(out.contains("shape 12x16"), "{out}");
    let again = ok(&["project", "CC(=O)O", "--layers", "2", "--tokens", "3", "--width", "16"]);
    assert_eq!(out, again);
}

#[test]
fn train_generate_and_eval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.jsonl");
    let lines: String = caption_corpus(4, 1).iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    std::fs::write(&data, lines).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"total_steps": 2, "warmup_steps": 1, "batch_size": 2}"#).unwrap();
    let ckpt = dir.path().join("s1.ckpt");

    let log = ok(&["train", "--stage", "1", "--data", p(&data), "--config", p(&config), "--ckpt-out", p(&ckpt), "--width", "16"]);
    let steps: Vec<serde_json::Value> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(steps.len(), 2);
    assert!(steps[0]["loss"].as_f64().unwrap() > 0.0);

    let ckpt2 = dir.path().join("s2.ckpt");
    ok(&["train", "--stage", "2", "--data", p(&data), "--config", p(&config), "--ckpt-out", p(&ckpt2), "--resume", p(&ckpt)]);
    let text = ok(&["generate", "--ckpt", p(&ckpt2), "--smiles", "CCO", "--instruction", "Describe the molecule.", "--max-len", "5"]);
    assert!(text.trim_end_matches('\n').chars().count() <= 5);

    let pred = dir.path().join("pred.jsonl");
    let gold = dir.path().join("gold.jsonl");
    std::fs::write(&pred, "\"a b c d\"\n{\"prediction\": \"LogP: 1.5\"}\n").unwrap();
    std::fs::write(&gold, "\"a b c d\"\n{\"answer\": \"LogP: 1.0\"}\n").unwrap();
    let report = dir.path().join("report.json");
    ok(&["eval", "--pred", p(&pred), "--gold", p(&gold), "--metrics", "exact,lev", "--report", p(&report)]);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(r["metrics"]["exact"], 0.5);
    assert_eq!(r["samples"], 2);
}

#[test]
fn instructgen_stub_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let contexts = dir.path().join("ctx.jsonl");
    std::fs::write(&contexts, "{\"smiles\":\"CCO\",\"caption\":\"Ethanol.\"}\n{\"smiles\":\"CCN\",\"caption\":\"Ethylamine.\"}\n").unwrap();
    let run = |name: &str, backend: &str| {
        let out = dir.path().join(name);
        let stats = ok(&["instructgen", "--contexts", p(&contexts), "--backend", backend, "--seed", "2", "--out", p(&out)]);
        (std::fs::read_to_string(out).unwrap(), serde_json::from_str::<serde_json::Value>(&stats).unwrap())
    };
    let (a, stats) = run("a.jsonl", "stub");
    let (b, _) = run("b.jsonl", "stub");
    assert_eq!(a, b);
    assert_eq!(stats["kept"], 2);
    let (c, stats) = run("c.jsonl", "stub-dangling");
    assert!(c.is_empty());
    assert_eq!(stats["rejected"]["incomplete"], 2);
}
