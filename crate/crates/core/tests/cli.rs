use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pathcheck::cli::HomQuery;
use pathcheck::homotopy::TypedFunctorJson;
use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

fn pathcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathcheck")).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path(name: &str) -> String {
    corpus(name).to_str().unwrap().to_string()
}

#[test]
fn exit_codes() {
    assert_eq!(pathcheck(&["check", &path("idconv.mltt")]).status.code(), Some(0));
    assert_eq!(pathcheck(&["check", &path("reflection.mltt")]).status.code(), Some(1));
    assert_eq!(pathcheck(&["--extensional", "check", &path("reflection.mltt")]).status.code(), Some(0));
    assert_eq!(pathcheck(&["check", &path("empty.mltt")]).status.code(), Some(0));
    assert_eq!(pathcheck(&["check", "/nonexistent/file.mltt"]).status.code(), Some(2));
    assert_eq!(pathcheck(&["interpret", &path("pi.mltt")]).status.code(), Some(1));
}

#[test]
fn bad_query_is_an_error() {
    let dir = std::env::temp_dir().join(format!("pathcheck-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let q = dir.join("bad.json");
    std::fs::write(&q, r#"{"query": "nope"}"#).unwrap();
    let out = pathcheck(&["--json", "hom", q.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["goals"][0]["status"], "error");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn report_schema() {
    let out = pathcheck(&["--json", "check", &path("rules.mltt")]);
    let v = json(&out);
    assert_eq!(v["tool"], "pathcheck");
    assert!(v["version"].is_string());
    let goals = v["goals"].as_array().unwrap();
    assert!(!goals.is_empty());
    for g in goals {
        assert!(g["name"].is_string());
        assert_eq!(g["status"], "accepted");
        assert!(g["trace"].is_array());
    }
    let refl = json(&pathcheck(&["--json", "check", &path("reflection.mltt")]));
    let g = &refl["goals"][0];
    assert_eq!(g["status"], "rejected");
    assert!(g["error"].is_string());
    assert!(g["name"].as_str().unwrap().contains("line"));
}

#[test]
fn empty_program_has_no_goals() {
    let v = json(&pathcheck(&["--json", "check", &path("empty.mltt")]));
    assert_eq!(v["goals"].as_array().unwrap().len(), 0);
}

#[test]
fn interpret_paths() {
    let out = pathcheck(&["--json", "interpret", &path("paths.mltt")]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let w = &v["goals"][0]["witness"];
    assert_eq!(v["goals"][0]["status"], "passed");
    assert_eq!(w["type"]["total"]["objects"], 4);
    assert_eq!(w["context"]["fibrations"], true);
}

#[test]
fn interpret_pi_is_unsupported() {
    let v = json(&pathcheck(&["--json", "interpret", &path("pi.mltt")]));
    let g = &v["goals"][0];
    assert_eq!(g["status"], "failed");
    assert!(g["error"].as_str().unwrap().contains("unsupported"));
}

#[test]
fn interpret_with_preset() {
    let out = pathcheck(&["--json", "interpret", &path("sigma.mltt"), "--preset", "z2"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn hom_examples_pass() {
    for ex in ["lift-interval", "factor-diagonal", "classify-diagonal", "path-object-interval"] {
        let out = pathcheck(&["--json", "hom", "--example", ex]);
        assert_eq!(out.status.code(), Some(0), "{ex}");
    }
    for q in ["lift_interval", "factor_diagonal", "classify_diagonal", "path_object_interval"] {
        let out = pathcheck(&["--json", "hom", &path(&format!("queries/{q}.json"))]);
        assert_eq!(out.status.code(), Some(0), "{q}");
    }
}

#[test]
fn lift_witness_revalidates() {
    let text = std::fs::read_to_string(corpus("queries/lift_interval.json")).unwrap();
    let HomQuery::Lift { problem } = serde_json::from_str(&text).unwrap() else { panic!() };
    let prob = problem.to_problem().unwrap();
    let v = json(&pathcheck(&["--json", "hom", &path("queries/lift_interval.json")]));
    let filler: TypedFunctorJson = serde_json::from_value(v["goals"][0]["witness"]["filler"].clone()).unwrap();
    assert!(prob.is_filler(&filler.to_functor().unwrap()));
}

#[test]
fn demos_exit_zero() {
    for d in ["countermodel", "extensional-set", "coherence", "wfs"] {
        assert_eq!(pathcheck(&["demo", d]).status.code(), Some(0), "{d}");
    }
}

#[test]
fn human_output_lists_goals() {
    let out = pathcheck(&["check", &path("idconv.mltt")]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.contains("accepted")).count() >= 4, "{text}");
}
