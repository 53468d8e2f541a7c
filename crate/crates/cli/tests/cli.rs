use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use morph_core::corpus::review::{Action, Decision, ReviewItem};
use morph_core::corpus::{Corpus, LoadMode};
use morph_core::evaluator::Prediction;
use morph_core::io::{read_jsonl, write_jsonl};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(name)
}

fn morph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_morph")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = morph(args);
    assert!(out.status.success(), "{args:?}\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const TASK_INPUT: &str = "咱们一些小糖人都是一样可以放心去喝，也不用去找白褂褂了。";
const TASK_OUTPUT: &str = "咱们一些糖尿病患者都是一样可以放心去喝，也不用去找医生了。";

#[test]
fn resolve_dict_restores_task_sentence() {
    let out = ok(&["resolve", "--mode", "dict", "--text", TASK_INPUT]);
    assert_eq!(stdout(&out).trim_end(), TASK_OUTPUT);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("repro: cmd=resolve seed=42 config=sha256:"), "{stderr}");
}

#[test]
fn resolve_corpus_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    ok(&["resolve", "--input", p(&data("corpus.jsonl")), "-o", p(&a)]);
    ok(&["resolve", "--input", p(&data("corpus.jsonl")), "-o", p(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let preds: Vec<Prediction> = read_jsonl(&a).unwrap();
    assert_eq!(preds.len(), 171);
}

#[test]
fn eval_of_gold_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::load(&data("corpus.jsonl"), LoadMode::Strict).unwrap().corpus;
    let preds: Vec<Prediction> = corpus.records.iter().map(|r| Prediction::new(r.id.clone(), r.target.clone())).collect();
    let pred_path = dir.path().join("gold.jsonl");
    write_jsonl(&pred_path, &preds).unwrap();
    let report = dir.path().join("report.json");
    ok(&["eval", "--gold", p(&data("corpus.jsonl")), "--predictions", p(&pred_path), "-o", p(&report)]);
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["f1"], 1.0);
    assert_eq!(v["fn"], 0);
}

#[test]
fn eval_flags_bad_edits_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = Corpus::load(&data("corpus.jsonl"), LoadMode::Strict).unwrap().corpus;
    let preds: Vec<Prediction> = corpus.records.iter().map(|r| Prediction::new(r.id.clone(), format!("{}!", r.source))).collect();
    let pred_path = dir.path().join("bad.jsonl");
    write_jsonl(&pred_path, &preds).unwrap();
    let gold = data("corpus.jsonl");
    let run = |extra: &[&str]| {
        let report = dir.path().join("r.json");
        let mut args = vec!["eval", "--gold", p(&gold), "--predictions", p(&pred_path), "-o", p(&report)];
        args.extend_from_slice(extra);
        ok(&args);
        serde_json::from_slice::<serde_json::Value>(&std::fs::read(&report).unwrap()).unwrap()
    };
    let default = run(&[]);
    let strict = run(&["--fp-on-bad-edit"]);
    assert_eq!((default["fp"].as_u64(), default["fn"].as_u64()), (Some(58), Some(113)));
    assert_eq!(strict["fp"], 171);
    assert_eq!(strict["fn"], 0);
}

#[test]
fn class_eval() {
    let dir = tempfile::tempdir().unwrap();
    let gold = dir.path().join("g.jsonl");
    let pred = dir.path().join("p.jsonl");
    std::fs::write(&gold, "{\"id\":\"a\",\"text\":\"x\",\"label\":0}\n{\"id\":\"b\",\"text\":\"y\",\"label\":2}\n").unwrap();
    std::fs::write(&pred, "{\"id\":\"a\",\"label\":0}\n{\"id\":\"b\",\"label\":1}\n").unwrap();
    let out = ok(&["eval", "--classes", "--gold", p(&gold), "--predictions", p(&pred)]);
    assert!(stdout(&out).contains("compliance"));
    std::fs::write(&pred, "{\"id\":\"a\",\"label\":0}\n{\"id\":\"b\",\"label\":7}\n").unwrap();
    assert_eq!(morph(&["eval", "--classes", "--gold", p(&gold), "--predictions", p(&pred)]).status.code(), Some(1));
}

#[test]
fn augment_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let lex = dir.path().join("lex.tsv");
    std::fs::write(&lex, "抗糖\tk糖\tH\tannotated\n抗糖\t抗某糖\tT\tannotated\n抗糖\t康糖\tH\tannotated\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(format!("{name}.jsonl"));
        let manifest = dir.path().join(format!("{name}.json"));
        ok(&["augment", "--mode", "offline", "--k", "2", "--lexicon", p(&lex), "-o", p(&out), "--manifest", p(&manifest)]);
        (std::fs::read(&out).unwrap(), std::fs::read(&manifest).unwrap())
    };
    let (corpus, manifest) = run("a");
    let m: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    assert_eq!((m["positives"].as_u64(), m["negatives"].as_u64()), (Some(6), Some(2)));
    assert_eq!(run("b"), (corpus, manifest));
}

#[test]
fn augment_sampled_needs_train() {
    assert_eq!(morph(&["augment", "--draws", "3", "-o", "/tmp/never.jsonl"]).status.code(), Some(2));
    assert_eq!(morph(&["augment", "--k", "0", "-o", "/tmp/never.jsonl"]).status.code(), Some(2));
}

#[test]
fn filter_then_apply_restores_clean_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let queue = dir.path().join("queue.jsonl");
    ok(&["filter", "--corpus", p(&data("corpus_noisy.jsonl")), "--lexicon", p(&data("lexicon.tsv")), "-o", p(&queue)]);
    let items: Vec<ReviewItem> = read_jsonl(&queue).unwrap();
    assert_eq!(items.len(), 50);

    let decisions: Vec<Decision> = items
        .iter()
        .map(|i| Decision { item: i.id.clone(), action: Action::Accept, spans: None, reviewer: Some("cli".into()), timestamp: None })
        .collect();
    let dec_path = dir.path().join("decisions.jsonl");
    write_jsonl(&dec_path, &decisions).unwrap();
    let out_dir = dir.path().join("out");
    ok(&[
        "apply",
        "--corpus",
        p(&data("corpus_noisy.jsonl")),
        "--lexicon",
        p(&data("lexicon.tsv")),
        "--queue",
        p(&queue),
        "--decisions",
        p(&dec_path),
        "--out-dir",
        p(&out_dir),
    ]);
    let updated = Corpus::load(&out_dir.join("corpus.jsonl"), LoadMode::Strict).unwrap().corpus;
    let clean = Corpus::load(&data("corpus.jsonl"), LoadMode::Strict).unwrap().corpus;
    for r in &updated.records {
        assert_eq!(r.target, clean.get(&r.id).unwrap().target);
    }
    assert_eq!(std::fs::read_to_string(out_dir.join("audit.jsonl")).unwrap().lines().count(), 50);

    // Deciding the same items again is a data error.
    let again = morph(&[
        "apply",
        "--corpus",
        p(&out_dir.join("corpus.jsonl")),
        "--lexicon",
        p(&out_dir.join("lexicon.tsv")),
        "--queue",
        p(&out_dir.join("queue.jsonl")),
        "--decisions",
        p(&dec_path),
        "--out-dir",
        p(&dir.path().join("out2")),
    ]);
    assert_eq!(again.status.code(), Some(1));
}

#[test]
fn resolve_then_eval_matches_reference_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for mode in ["dict", "full"] {
        let preds = dir.path().join(format!("{mode}.jsonl"));
        let report = dir.path().join(format!("{mode}.json"));
        ok(&["resolve", "--input", p(&data("corpus.jsonl")), "--mode", mode, "-o", p(&preds)]);
        ok(&["eval", "--gold", p(&data("corpus.jsonl")), "--predictions", p(&preds), "-o", p(&report)]);
        reports.push(format!("{mode}:fixture={}", p(&report)));
    }
    let out = ok(&["compare", "--report", &reports[0], "--report", &reports[1]]);
    let reference = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../../reports/reference.txt")).unwrap();
    assert_eq!(stdout(&out), reference);
}

#[test]
fn config_file_sits_under_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("morph.toml");
    std::fs::write(&cfg, "seed = 7\n[resolver]\nmode = \"dict\"\n").unwrap();
    let out = ok(&["--config", p(&cfg), "resolve", "--text", "白某障"]);
    assert_eq!(stdout(&out).trim_end(), "白某障");
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed=7"));
    let out = ok(&["--config", p(&cfg), "resolve", "--text", "白某障", "--mode", "full"]);
    assert_eq!(stdout(&out).trim_end(), "白内障");

    let digest = |o: &Output| String::from_utf8_lossy(&o.stderr).lines().find(|l| l.starts_with("repro:")).unwrap().to_string();
    let a = ok(&["resolve", "--text", "x"]);
    let b = ok(&["resolve", "--text", "y"]);
    let c = ok(&["resolve", "--text", "x", "--threshold", "0.1"]);
    assert_eq!(digest(&a), digest(&b));
    assert_ne!(digest(&a), digest(&c));

    std::fs::write(&cfg, "colour = \"red\"\n").unwrap();
    assert_eq!(morph(&["--config", p(&cfg), "resolve", "--text", "x"]).status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(morph(&["resolve", "--input", "/no/such/file.jsonl"]).status.code(), Some(2));
    assert_eq!(morph(&["resolve"]).status.code(), Some(2));
    assert_eq!(morph(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(morph(&["resolve", "--text", "x", "--threshold", "3"]).status.code(), Some(2));
    assert_eq!(morph(&["resolve", "--text", "x", "--mode", "backend"]).status.code(), Some(2));
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"id\": 1}\n").unwrap();
    let out = morph(&["stats", "--corpus", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(morph(&["stats", "--corpus", p(&bad), "--lenient"]).status.code(), Some(0));
}

#[test]
fn backend_file_mode() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c.jsonl");
    std::fs::write(
        &corpus,
        "{\"id\":\"a\",\"source\":\"k糖饮料\",\"target\":\"k糖饮料\",\"label\":\"negative\",\"morphs\":[],\"split\":\"test1\",\"meta\":{}}\n",
    )
    .unwrap();
    let backend = dir.path().join("b.tsv");
    std::fs::write(&backend, "a\t抗糖饮料\n").unwrap();
    let out = ok(&["resolve", "--input", p(&corpus), "--mode", "backend", "--backend-file", p(&backend)]);
    let pred: Prediction = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(pred.text, "抗糖饮料");
    assert_eq!(pred.spans[0].surface, "k糖");
}

#[test]
fn lexicon_and_corpus_inspection() {
    let out = ok(&["lexicon", "stats", "--lexicon", p(&data("lexicon.tsv"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["variants"], 41);
    let out = ok(&["lexicon", "validate"]);
    assert!(stdout(&out).contains("41 variants"));
    let out = ok(&["stats", "--corpus", p(&data("corpus.jsonl"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["stats"]["records"], 171);
    assert_eq!(v["split_check"]["shared_ids"].as_array().unwrap().len(), 0);
}

#[test]
fn preprocess_resolves_texts() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.jsonl");
    let output = dir.path().join("out.jsonl");
    std::fs::write(&input, "{\"id\":\"a\",\"text\":\"去找白大褂看看\",\"label\":1}\n").unwrap();
    ok(&["preprocess", "--input", p(&input), "-o", p(&output)]);
    assert_eq!(std::fs::read_to_string(&output).unwrap(), "{\"id\":\"a\",\"text\":\"去找医生看看\",\"label\":1}\n");
}

fn http_get(addr: &str, path: &str) -> String {
    let mut s = TcpStream::connect(addr).unwrap();
    write!(s, "GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut body = String::new();
    s.read_to_string(&mut body).unwrap();
    body
}

#[test]
fn serve_seeds_store_and_answers() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let mut child = Command::new(env!("CARGO_BIN_EXE_morph"))
        .args([
            "serve",
            "--store",
            p(&store),
            "--port",
            "0",
            "--init-corpus",
            p(&data("corpus_noisy.jsonl")),
            "--init-lexicon",
            p(&data("lexicon.tsv")),
        ])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(a) = line.strip_prefix("serve: http://") {
            break a.to_string();
        }
    };
    let health = http_get(&addr, "/api/health");
    let queue = http_get(&addr, "/api/queue?per_page=1");
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(health.starts_with("HTTP/1.1 200"), "{health}");
    assert!(health.contains("\"revision\":0"));
    assert!(queue.contains("\"total\":50"));
    assert_eq!(morph(&["serve", "--store", p(&dir.path().join("empty"))]).status.code(), Some(2));
}
