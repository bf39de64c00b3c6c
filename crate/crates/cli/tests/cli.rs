use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn combinefl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combinefl"))
        .args(args)
        .output()
        .expect("run combinefl")
}

fn ok(args: &[&str]) -> String {
    let out = combinefl(args);
    assert!(
        out.status.success(),
        "combinefl {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn localize_ranks_the_seeded_bug_first() {
    let fault = corpus().join("numeric-01-clamp");
    let text = ok(&["localize", path(&fault), "-t", "ochiai", "--top", "1"]);
    let first = text.lines().nth(1).unwrap();
    assert!(first.contains("bounds.ml:6:0"), "{text}");
}

#[test]
fn localize_jsonl_feeds_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.jsonl");
    let fault = corpus().join("collections-07-index");
    ok(&["localize", path(&fault), "-t", "dstar", "--format", "jsonl", "--out", path(&scores)]);
    let line = std::fs::read_to_string(&scores).unwrap();
    assert!(line.starts_with(r#"{"fault":"collections-07-index","technique":"dstar","#), "{line}");

    let report = ok(&[
        "evaluate", path(&corpus()), "--preset", "level2", "--scores", path(&scores),
        "--format", "json", "--mask-timing",
    ]);
    let v: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["sources"]["dstar"], "analysis+records");
    assert_eq!(v["sources"]["ochiai"], "analysis");
}

#[test]
fn localize_reads_interchange_files() {
    let dir = tempfile::tempdir().unwrap();
    let spectrum = dir.path().join("spectrum.json");
    std::fs::write(
        &spectrum,
        r#"{"elements": [{"id": "a.ml:1:0", "ef": 2, "ep": 1, "nf": 0, "np": 5},
                         {"id": "a.ml:2:0", "ef": 1, "ep": 0, "nf": 1, "np": 6}]}"#,
    )
    .unwrap();
    let text = ok(&["localize", "--spectrum", path(&spectrum)]);
    assert!(text.contains("ochiai") && text.contains("dstar") && text.contains("0.8165"), "{text}");

    let traces = dir.path().join("traces.json");
    std::fs::write(
        &traces,
        r#"[{"test": "t1", "frames": [{"method": "inner", "line": 3}, {"method": "outer", "line": 9}]}]"#,
    )
    .unwrap();
    let text = ok(&["localize", "--stack-traces", path(&traces)]);
    assert!(text.contains("inner") && text.contains("0.5000  outer"), "{text}");
}

#[test]
fn evaluate_is_deterministic_with_masked_timing() {
    let c = corpus();
    let args = [
        "evaluate", path(&c), "--preset", "level3", "--seed", "7",
        "--format", "json", "--mask-timing",
    ];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn report_rerenders_saved_json() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("report.json");
    ok(&[
        "evaluate", path(&corpus()), "--preset", "level1", "--cv", "cross-project", "--format",
        "json", "--out", path(&saved),
    ]);
    let text = ok(&["report", path(&saved)]);
    for needle in ["Standalone techniques", "Time levels", "Leave one family out", "Wall-clock seconds (this run)"] {
        assert!(text.contains(needle), "{needle}");
    }
    let csv = ok(&["report", path(&saved), "--format", "csv"]);
    assert_eq!(csv.lines().count(), 1 + 3);
    assert!(ok(&["report", path(&saved), "--mask-timing"]).contains("masked"));
}

#[test]
fn correlate_matrix_is_symmetric() {
    let json = ok(&["correlate", path(&corpus()), "--preset", "level2", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let cells = v["cells"].as_array().unwrap();
    for (i, row) in cells.iter().enumerate() {
        for (j, cell) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(*cell, cells[j][i]);
        }
    }
}

#[test]
fn combine_train_then_apply() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    ok(&["combine", "train", path(&corpus()), "--preset", "level2", "--seed", "3", "--out", path(&model)]);
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["techniques"].as_array().unwrap().len(), m["weights"].as_array().unwrap().len());

    let text = ok(&["combine", "apply", path(&corpus()), "--preset", "level2", "--model", path(&model), "--top", "1"]);
    assert!(text.contains("numeric-01-clamp (combined)"));
    let jsonl = ok(&[
        "combine", "apply", path(&corpus()), "--preset", "level2", "--model", path(&model), "--format", "jsonl",
    ]);
    assert_eq!(jsonl.lines().count(), 10);

    let out = combinefl(&["combine", "apply", path(&corpus()), "--preset", "level1", "--model", path(&model)]);
    assert!(!out.status.success(), "a level-2 model cannot rank level-1 features");
}

#[test]
fn method_granularity_evaluates() {
    let json = ok(&["evaluate", path(&corpus()), "--preset", "level2", "--granularity", "method", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["config"]["granularity"], "method");
}

#[test]
fn missing_inputs_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let fault = dir.path().join("f1");
    std::fs::create_dir(&fault).unwrap();
    std::fs::write(fault.join("a.ml"), "fn f(x) {\n  return x;\n}\n").unwrap();
    std::fs::write(fault.join("truth.json"), r#"{"faulty": ["a.ml:2:0"]}"#).unwrap();
    let out = combinefl(&["evaluate", path(dir.path()), "--preset", "level1"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("report.txt") && err.contains("history.json") && err.contains("tests.json"), "{err}");
}

#[test]
fn bad_flags_are_rejected() {
    for args in [
        vec!["evaluate", "corpus", "--preset", "level5"],
        vec!["evaluate", "corpus", "--cv", "loo"],
        vec!["evaluate", "corpus", "--granularity", "file"],
        vec!["evaluate", "corpus", "--format", "xml"],
        vec!["localize", "corpus/x", "-t", "tarantula"],
    ] {
        assert!(!combinefl(&args).status.success(), "{args:?}");
    }
}
