mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::{topical_corpus, write_jsonl};
use findability::accessibility::{AccessScores, Metric};
use findability::cli::run_command;
use findability::metrics::{gini, lorenz, mean_score, CorrelationReport};
use findability::retrieval::RetrievalModel;
use findability::scores::{read_csv, write_score_file, Provenance};
use findability::Error;

struct Workspace {
    _tmp: tempfile::TempDir,
    dir: PathBuf,
}

impl Workspace {
    /// Corpus, index and query file for a small synthetic collection.
    fn new(n_docs: usize) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().to_owned();
        write_jsonl(&dir.join("corpus.jsonl"), &topical_corpus(11, n_docs));
        let ws = Workspace { _tmp: tmp, dir };
        ws.run(&["index", "--corpus", &ws.p("corpus.jsonl"), "--out", &ws.p("idx")]).unwrap();
        ws.run(&["genqueries", "--index", &ws.p("idx"), "--out", &ws.p("q.jsonl")]).unwrap();
        ws
    }

    fn p(&self, name: &str) -> String {
        self.dir.join(name).to_str().unwrap().to_owned()
    }

    fn run(&self, args: &[&str]) -> findability::Result<()> {
        let mut argv = vec!["findability"];
        argv.extend_from_slice(args);
        argv.push("--quiet");
        run_command(argv)
    }

    fn findability(&self, out: &str) {
        self.run(&[
            "findability", "--index", &self.p("idx"), "--queries", &self.p("q.jsonl"), "--model", "bm25",
            "--c", "100", "--xi", "inverse", "--out", &self.p(out),
        ])
        .unwrap();
    }
}

fn scores_of(path: &str) -> BTreeMap<String, f64> {
    read_csv(fs::File::open(path).unwrap()).unwrap()
}

#[test]
fn findability_writes_one_row_per_scored_doc() {
    let ws = Workspace::new(120);
    ws.findability("f.csv");
    let text = fs::read_to_string(ws.p("f.csv")).unwrap();
    assert!(text.starts_with("doc_id,score\n"));
    assert!(!text.contains('\r'));
    let scores = scores_of(&ws.p("f.csv"));
    assert_eq!(scores.len(), 120);
    assert!(scores.values().all(|&f| (0.0..=1.0).contains(&f)));

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.p("f.csv.meta.json")).unwrap()).unwrap();
    for key in ["config_fingerprint", "index_fingerprint", "scores_fingerprint", "query_source"] {
        assert!(meta[key].as_str().is_some_and(|s| s.len() == 32), "{key}");
    }
    assert_eq!(meta["seed"], 1);
    assert!(Path::new(&ws.p("idx.stats.json")).exists());
}

#[test]
fn report_matches_metrics_on_parsed_scores() {
    let ws = Workspace::new(80);
    ws.findability("f.csv");
    ws.run(&[
        "report", "--scores", &ws.p("f.csv"), "--out", &ws.p("report.json"), "--lorenz", &ws.p("lorenz.csv"),
        "--svg", &ws.p("lorenz.svg"),
    ])
    .unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.p("report.json")).unwrap()).unwrap();
    let values: Vec<f64> = scores_of(&ws.p("f.csv")).into_values().collect();
    assert_eq!(report["gini"].as_f64().unwrap(), gini(&values).unwrap());
    assert_eq!(report["mean"].as_f64().unwrap(), mean_score(&values).unwrap());
    assert_eq!(report["n_docs"], 80);

    let lorenz_text = fs::read_to_string(ws.p("lorenz.csv")).unwrap();
    let mut lines = lorenz_text.lines();
    assert_eq!(lines.next(), Some("pop_share,score_share"));
    assert_eq!(lines.count(), lorenz(&values).unwrap().len());
    assert!(fs::read_to_string(ws.p("lorenz.svg")).unwrap().contains("stroke-dasharray"));
}

#[test]
fn output_destination_is_required() {
    let ws = Workspace::new(30);
    let err = ws.run(&["findability", "--index", &ws.p("idx"), "--queries", &ws.p("q.jsonl")]).unwrap_err();
    assert!(err.to_string().contains("--out"), "{err}");
}

fn fake_scores(ids: &[&str]) -> AccessScores {
    AccessScores {
        metric: Metric::Findability,
        scores: ids.iter().enumerate().map(|(i, id)| (id.to_string(), i as f64)).collect(),
        model: RetrievalModel::Bm25 { k1: 1.2, b: 0.75 },
        convenience: None,
        cutoff: 100,
        skipped: Vec::new(),
        num_queries: ids.len(),
    }
}

#[test]
fn correlate_disjoint_ids_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let provenance = Provenance {
        index_fingerprint: "0".repeat(32),
        ..Provenance::default()
    };
    let a = tmp.path().join("f.csv");
    let b = tmp.path().join("r.csv");
    write_score_file(&a, &fake_scores(&["a", "b", "c"]), provenance.clone()).unwrap();
    write_score_file(&b, &fake_scores(&["x", "y", "z"]), provenance).unwrap();
    let out = tmp.path().join("corr.json");
    let err = run_command([
        "findability", "correlate", "--a", a.to_str().unwrap(), "--b", b.to_str().unwrap(), "--out",
        out.to_str().unwrap(),
    ])
    .unwrap_err();
    assert!(matches!(err, Error::NoOverlap));
    assert_eq!(err.to_string(), "no overlapping documents");
    assert!(!out.exists());
}

#[test]
fn correlate_findability_with_retrievability() {
    let ws = Workspace::new(150);
    ws.findability("f.csv");
    ws.run(&["retrievability", "--index", &ws.p("idx"), "--model", "bm25", "--c", "10", "--out", &ws.p("r.csv")])
        .unwrap();
    ws.run(&["correlate", "--a", &ws.p("f.csv"), "--b", &ws.p("r.csv"), "--out", &ws.p("corr.json")]).unwrap();
    let report: CorrelationReport =
        serde_json::from_str(&fs::read_to_string(ws.p("corr.json")).unwrap()).unwrap();
    assert_eq!(report.n, 150);
    for v in [report.pearson_r, report.kendall_tau] {
        assert!(v.is_finite() && (-1.0..=1.0).contains(&v));
    }
    for p in [report.pearson_p, report.kendall_p] {
        assert!((0.0..=1.0).contains(&p));
    }

    ws.run(&["correlate", "--a", &ws.p("f.csv"), "--b", &ws.p("f.csv"), "--out", &ws.p("self.json")]).unwrap();
    let own: CorrelationReport = serde_json::from_str(&fs::read_to_string(ws.p("self.json")).unwrap()).unwrap();
    assert_eq!((own.pearson_r, own.kendall_tau), (1.0, 1.0));

    ws.run(&[
        "report", "--scores", &ws.p("f.csv"), "--scores", &ws.p("r.csv"), "--summary", &ws.p("summary.json"),
        "--correlation", &ws.p("corr.json"),
    ])
    .unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(ws.p("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"].as_array().unwrap().len(), 2);
    assert_eq!(summary["rows"][1]["metric"], "retrievability");
    assert_eq!(summary["correlation"]["n"], 150);
}

#[test]
fn tampered_or_foreign_scores_are_refused_without_force() {
    let ws = Workspace::new(60);
    ws.findability("f.csv");
    let mut text = fs::read_to_string(ws.p("f.csv")).unwrap();
    text.push_str("extra,0.5\n");
    fs::write(ws.p("edited.csv"), &text).unwrap();
    fs::copy(ws.p("f.csv.meta.json"), ws.p("edited.csv.meta.json")).unwrap();

    let err = ws.run(&["report", "--scores", &ws.p("edited.csv"), "--out", &ws.p("r.json")]).unwrap_err();
    assert!(err.to_string().contains("scores_fingerprint"), "{err}");
    ws.run(&["report", "--scores", &ws.p("edited.csv"), "--out", &ws.p("r.json"), "--force"]).unwrap();

    fs::write(ws.p("bare.csv"), &text).unwrap();
    let err = ws.run(&["report", "--scores", &ws.p("bare.csv"), "--out", &ws.p("r.json")]).unwrap_err();
    assert!(err.to_string().contains("sidecar"), "{err}");

    // scores from a differently analysed index
    let other = Workspace::new(60);
    other
        .run(&["index", "--corpus", &other.p("corpus.jsonl"), "--out", &other.p("idx"), "--stem", "true"])
        .unwrap();
    other
        .run(&["retrievability", "--index", &other.p("idx"), "--c", "10", "--out", &other.p("r.csv")])
        .unwrap();
    let err = ws
        .run(&["correlate", "--a", &ws.p("f.csv"), "--b", &other.p("r.csv"), "--out", &ws.p("c.json")])
        .unwrap_err();
    assert!(err.to_string().contains("index_fingerprint"), "{err}");
    ws.run(&["correlate", "--a", &ws.p("f.csv"), "--b", &other.p("r.csv"), "--out", &ws.p("c.json"), "--force"])
        .unwrap();
}

#[test]
fn queries_from_another_index_are_refused() {
    let ws = Workspace::new(40);
    ws.run(&["index", "--corpus", &ws.p("corpus.jsonl"), "--out", &ws.p("idx2"), "--min-len", "3"]).unwrap();
    let args = ["findability", "--index", &ws.p("idx2"), "--queries", &ws.p("q.jsonl"), "--out", &ws.p("f.csv")];
    let err = ws.run(&args).unwrap_err();
    assert!(err.to_string().contains("index_fingerprint"), "{err}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let ws = Workspace::new(50);
    fs::write(
        ws.p("run.json"),
        format!(
            r#"{{"index": {:?}, "queries": {:?}, "model": "pl2", "pl2.c": 2.0, "c": 20, "xi": "exponential"}}"#,
            ws.p("idx"),
            ws.p("q.jsonl")
        ),
    )
    .unwrap();
    ws.run(&["findability", "--config", &ws.p("run.json"), "--out", &ws.p("a.csv")]).unwrap();
    ws.run(&["findability", "--config", &ws.p("run.json"), "--c", "50", "--out", &ws.p("b.csv")]).unwrap();
    let meta = |name: &str| -> serde_json::Value {
        serde_json::from_str(&fs::read_to_string(ws.p(&format!("{name}.meta.json"))).unwrap()).unwrap()
    };
    let (a, b) = (meta("a.csv"), meta("b.csv"));
    assert_eq!(a["model"]["kind"], "dfr_pl2");
    assert_eq!(a["model"]["c"], 2.0);
    assert_eq!(a["cutoff"], 20);
    assert_eq!(b["cutoff"], 50);
    assert_ne!(a["config_fingerprint"], b["config_fingerprint"]);

    fs::write(ws.p("bad.json"), r#"{"modle": "bm25"}"#).unwrap();
    let err = ws.run(&["findability", "--config", &ws.p("bad.json"), "--stdout"]).unwrap_err();
    assert!(err.to_string().contains("modle"), "{err}");
}

#[test]
fn tsv_corpus_and_analysis_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c.tsv");
    fs::write(&corpus, "d1\tRunning runners run\nd2\tThe cat sat\n").unwrap();
    let idx = tmp.path().join("idx");
    run_command([
        "findability", "index", "--corpus", corpus.to_str().unwrap(), "--out", idx.to_str().unwrap(), "--stem",
        "true", "--stopwords", "none", "--quiet",
    ])
    .unwrap();
    let index = findability::index::Index::load(&idx).unwrap();
    assert_eq!(index.num_docs(), 2);
    assert!(index.term_id("run").is_some());
    assert!(index.term_id("the").is_some());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_findability"))
}

#[test]
fn binary_exit_codes_and_diagnostics() {
    let out = binary().args(["index", "--frobnicate"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--frobnicate"));

    let out = binary()
        .args(["index", "--corpus", "/nonexistent/corpus.jsonl", "--out", "/nonexistent/idx"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/corpus.jsonl"));

    let ws = Workspace::new(20);
    let out = binary()
        .args(["findability", "--index", &ws.p("idx"), "--queries", &ws.p("q.jsonl"), "--stdout"])
        .env("FINDABILITY_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    ws.findability("f.csv");
    assert_eq!(out.stdout, fs::read(ws.p("f.csv")).unwrap());
    assert!(String::from_utf8_lossy(&out.stderr).contains("scored 20 documents"));
}
