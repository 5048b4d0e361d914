mod common;

use std::collections::BTreeMap;

use common::{run_cli, toy_workspace, HttpServer};
use taxoenrich::dataset::load_tsv;
use taxoenrich::evaluation::evaluate;
use taxoenrich::ranker::load_predictions;
use taxoenrich::taxonomy::Taxonomy;

fn path(dir: &std::path::Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn help_exits_zero_for_every_subcommand() {
    for sub in [
        "build-dataset",
        "embed-graph",
        "fit-meta",
        "train-ranker",
        "predict",
        "evaluate",
        "serve",
    ] {
        let out = run_cli(&[sub, "--help"], &[]);
        assert!(out.status.success(), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--"), "{sub}");
    }
    assert!(run_cli(&["--help"], &[]).status.success());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run_cli(&["no-such-command"], &[]).status.code(), Some(1));
    assert_eq!(run_cli(&["evaluate"], &[]).status.code(), Some(1));
    assert_eq!(
        run_cli(&["embed-graph", "--method", "nope", "--taxonomy", "t", "--out", "o"], &[]).status.code(),
        Some(1)
    );
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_cli(
        &[
            "build-dataset",
            "--old",
            &path(dir.path(), "absent.jsonl"),
            "--new",
            &path(dir.path(), "absent.jsonl"),
            "--out",
            &path(dir.path(), "q.tsv"),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent.jsonl"));
}

#[test]
fn build_dataset_then_evaluate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let w = toy_workspace(dir.path());
    let ok = |args: &[String]| {
        let out = run_cli(args, &[]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        out
    };
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    ok(&s(&["build-dataset", "--old", &path(&w, "old.jsonl"), "--new", &path(&w, "new.jsonl"), "--out", &path(&w, "q.tsv")]));
    let gold = load_tsv(w.join("q.tsv")).unwrap();
    let words: Vec<&str> = gold.iter().map(|e| e.word.as_str()).collect();
    assert_eq!(words, ["kitten", "puppy", "sapling"]);
    let puppy = gold.iter().find(|e| e.word == "puppy").unwrap();
    assert_eq!(puppy.gold_ids.iter().map(String::as_str).collect::<Vec<_>>(), ["s2", "s3"]);

    ok(&s(&[
        "train-ranker", "--taxonomy", &path(&w, "old.jsonl"), "--vectors", &path(&w, "v.vec"), "--n-pseudo", "10",
        "--k-assoc", "3", "--out", &path(&w, "ranker.json"),
    ]));
    ok(&s(&[
        "predict", "--taxonomy", &path(&w, "old.jsonl"), "--vectors", &path(&w, "v.vec"), "--ranker",
        &path(&w, "ranker.json"), "--words", &path(&w, "q.tsv"), "--k", "3", "--k-assoc", "3", "--out",
        &path(&w, "p.tsv"),
    ]));
    let preds = load_predictions(&w.join("p.tsv")).unwrap();
    assert_eq!(preds.len(), 3);
    assert!(preds.values().all(|p| !p.is_empty() && p.len() <= 3));

    let out = ok(&s(&[
        "evaluate", "--pred", &path(&w, "p.tsv"), "--gold", &path(&w, "q.tsv"), "--taxonomy",
        &path(&w, "old.jsonl"), "--per-query", &path(&w, "pq.tsv"),
    ]));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let old = Taxonomy::load(w.join("old.jsonl")).unwrap();
    let want = evaluate(&preds, &gold, &old, 10, 0).unwrap();
    assert_eq!(report["map"].as_f64().unwrap(), want.map);
    assert_eq!(report["n_queries"], 3);
    assert_eq!(std::fs::read_to_string(w.join("pq.tsv")).unwrap(), want.per_query_tsv());
}

#[test]
fn evaluate_scores_missing_words_as_zero() {
    let dir = tempfile::tempdir().unwrap();
    let w = toy_workspace(dir.path());
    std::fs::write(w.join("gold.tsv"), "puppy\ts3,s2\nkitten\ts4,s2\n").unwrap();
    std::fs::write(w.join("p.tsv"), "puppy\t1\ts3\t0.9\n").unwrap();
    let out = run_cli(
        &[
            "evaluate", "--pred", &path(&w, "p.tsv"), "--gold", &path(&w, "gold.tsv"), "--taxonomy",
            &path(&w, "old.jsonl"),
        ],
        &[],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["map"].as_f64().unwrap(), 0.5);
    let _: BTreeMap<String, f64> = serde_json::from_value(report["precision"].clone()).unwrap();
}

#[test]
fn serve_end_to_end_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let w = toy_workspace(dir.path());
    let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    std::fs::write(w.join("queue.txt"), "puppy\nkitten\n").unwrap();
    let out = run_cli(
        &s(&[
            "train-ranker", "--taxonomy", &path(&w, "old.jsonl"), "--vectors", &path(&w, "v.vec"), "--n-pseudo",
            "10", "--k-assoc", "3", "--out", &path(&w, "ranker.json"),
        ]),
        &[],
    );
    assert!(out.status.success());
    let args = s(&[
        "serve", "--state-dir", &path(&w, "state"), "--taxonomy", &path(&w, "old.jsonl"), "--queue",
        &path(&w, "queue.txt"), "--vectors", &path(&w, "v.vec"), "--ranker", &path(&w, "ranker.json"), "--k-assoc",
        "3",
    ]);
    {
        let server = HttpServer::start(&args).unwrap();
        let (status, body) = server.request("GET", "/words/next", None).unwrap();
        assert_eq!(status, 200);
        assert_eq!(
            serde_json::from_slice::<serde_json::Value>(&body).unwrap(),
            serde_json::json!({"word": "puppy", "remaining_count": 2})
        );
        let (status, body) = server.request("GET", "/candidates?word=puppy&k=3", None).unwrap();
        assert_eq!(status, 200);
        let list: serde_json::Value = serde_json::from_slice(&body).unwrap();
        assert!(list.as_array().unwrap().iter().any(|c| c["synset_id"] == "s3"));
        let decision = r#"{"word":"puppy","synset_id":"s3","verdict":"accept","annotator":"x"}"#;
        assert_eq!(server.request("POST", "/decision", Some(decision)).unwrap().0, 204);
        let (status, body) = server.request("POST", "/commit", Some(r#"{"word":"puppy"}"#)).unwrap();
        assert_eq!(status, 200);
        assert_eq!(
            serde_json::from_slice::<serde_json::Value>(&body).unwrap(),
            serde_json::json!({"new_synset_id": "new-1"})
        );
    }
    // a restarted server replays the log without needing the seed files
    let restart = s(&[
        "serve", "--state-dir", &path(&w, "state"), "--vectors", &path(&w, "v.vec"), "--ranker",
        &path(&w, "ranker.json"), "--k-assoc", "3",
    ]);
    let server = HttpServer::start(&restart).unwrap();
    let (_, body) = server.request("GET", "/taxonomy/export", None).unwrap();
    let exported = Taxonomy::read_jsonl(body.as_slice()).unwrap();
    assert_eq!(exported.parents("new-1"), ["s3".to_string()]);
    let (_, next) = server.request("GET", "/words/next", None).unwrap();
    assert!(String::from_utf8_lossy(&next).contains("kitten"));
}
