//! Subcommands end to end through `main_with`, against the shipped fixtures.

use std::path::{Path, PathBuf};

use hive::ckg::NodeId;
use hive::cli::main_with;
use hive::pipeline::{load_graph_file, load_specs_file};

const SCENARIO: &str = "Transcribe the audio from ./audio_1.wav and find entity tokens";

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse")
}

fn fx(name: &str) -> String {
    fixtures().join(name).to_string_lossy().into_owned()
}

struct Run {
    code: i32,
    out: String,
    err: String,
}

fn hive(args: &[&str]) -> Run {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hive").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    Run { code, out: String::from_utf8(out).unwrap(), err: String::from_utf8(err).unwrap() }
}

fn with_config(args: &[&str]) -> Run {
    let config = fx("hive.toml");
    let mut all = vec!["--config", config.as_str()];
    all.extend_from_slice(args);
    hive(&all)
}

/// Config over the shipped data with a replacement registry.
fn config_with_registry(dir: &Path, registry: &str) -> PathBuf {
    std::fs::write(dir.join("registry.json"), registry).unwrap();
    let toml = format!(
        "[provider]\noffline = true\nfixtures = {:?}\n[ckg]\npath = {:?}\n[pddl]\ndomains = {:?}\n[registry]\npath = \"registry.json\"\n",
        fx("replies"),
        fx("graph.jsonl"),
        fx("domains"),
    );
    let path = dir.join("hive.toml");
    std::fs::write(&path, toml).unwrap();
    path
}

#[test]
fn plan_prints_models_for_both_steps() {
    let r = with_config(&["plan", SCENARIO]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("1. (automatic_speech_recognition a0)  model: openai/whisper-large-v2"), "{}", r.out);
    assert!(r.out.contains("2. (named_entity_recognition a0)  model: dslim/bert-base-NER"), "{}", r.out);
}

#[test]
fn license_whitelist_returns_nothing() {
    let r = with_config(&["plan", SCENARIO, "--licenses", "openrail++,deepseek"]);
    assert_eq!(r.code, 2);
    assert_eq!(r.out.matches("-> NoCompliantModel").count(), 2, "{}", r.out);
}

#[test]
fn benchmark_rule_picks_lower_wer() {
    let r = with_config(&[
        "plan",
        SCENARIO,
        "--benchmark",
        "speech recognition on common voice english",
        "--metric",
        "wer",
    ]);
    assert!(r.out.contains("automatic_speech_recognition -> nvidia/parakeet-rnnt-1.1b"), "{}", r.out);
    // NER has no result on that benchmark, so the selection is incomplete.
    assert_eq!(r.code, 2);
}

#[test]
fn smallest_and_benchmark_conflict() {
    let r = with_config(&["plan", SCENARIO, "--smallest", "--benchmark", "b", "--metric", "m"]);
    assert_eq!(r.code, 1);
}

#[test]
fn plan_leaves_graph_untouched() {
    let before = std::fs::read(fixtures().join("graph.jsonl")).unwrap();
    with_config(&["plan", SCENARIO, "--smallest"]);
    assert_eq!(std::fs::read(fixtures().join("graph.jsonl")).unwrap(), before);
}

#[test]
fn run_chains_transcript_into_ner() {
    let r = with_config(&["run", SCENARIO]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("[type:step0.automatic_speech_recognition]"), "{}", r.out);
    assert!(r.out.contains("\"United States of America\""), "{}", r.out);
}

#[test]
fn run_json_is_the_trace() {
    let r = with_config(&["run", SCENARIO, "--json"]);
    assert_eq!(r.code, 0);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["final_status"], "Ok");
    assert_eq!(v["steps"].as_array().unwrap().len(), 2);
    assert_eq!(v["config"]["provider"]["offline"], true);
}

#[test]
fn failing_first_step_exits_3_and_skips_the_rest() {
    let dir = tempfile::tempdir().unwrap();
    let registry = std::fs::read_to_string(fixtures().join("registry.json")).unwrap().replace("\"asr\"", "\"fail\"");
    let config = config_with_registry(dir.path(), &registry);
    let trace = dir.path().join("trace.json");
    let r = hive(&["--config", config.to_str().unwrap(), "run", SCENARIO, "--trace", trace.to_str().unwrap()]);
    assert_eq!(r.code, 3, "{}", r.err);
    assert!(r.out.contains("status: skipped"), "{}", r.out);
    let t: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(t["final_status"], "Err");
    assert_eq!(t["steps"].as_array().unwrap().len(), 1);
}

#[test]
fn greeting_is_an_empty_run() {
    let r = with_config(&["run", "Hello there!"]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(r.out.contains("[plan] 0 step(s)"), "{}", r.out);
}

#[test]
fn live_sample_eval_balances() {
    let r =
        with_config(&["eval", "--bench", &fx("bench.jsonl"), "--live", "--judge", &fx("judge.json"), "--jobs", "3"]);
    assert_eq!(r.code, 0, "{}", r.err);
    for section in
        ["[scores]", "[trustworthiness]", "[failures]", "[latency to model selection, s]", "accounting: PASS"]
    {
        assert!(r.out.contains(section), "missing {section}\n{}", r.out);
    }
    assert!(r.out.contains("records: 12"));
}

#[test]
fn live_outcomes_round_trip_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let saved = dir.path().join("outcomes.jsonl");
    let bench = fx("bench.jsonl");
    let judge = fx("judge.json");
    let live = with_config(&[
        "eval",
        "--bench",
        &bench,
        "--live",
        "--judge",
        &judge,
        "--save-outcomes",
        saved.to_str().unwrap(),
    ]);
    assert_eq!(live.code, 0, "{}", live.err);
    let replay = with_config(&["eval", "--bench", &bench, "--outcomes", saved.to_str().unwrap()]);
    assert_eq!(replay.code, 0, "{}", replay.err);
    let scores = |s: &str| s.split("[latency").next().unwrap().to_string();
    assert_eq!(scores(&live.out), scores(&replay.out));
}

#[test]
fn recorded_outcomes_reproduce_the_profile() {
    let r = with_config(&["eval", "--bench", &fx("hive_bench.jsonl"), "--outcomes", &fx("hive_outcomes.jsonl")]);
    assert_eq!(r.code, 0, "{}", r.err);
    for line in [
        "Overall    100   0.74   0.73   0.62",
        "Single      24   0.88   0.88   0.79",
        "Two         58   0.71   0.69   0.58",
        "Three       18   0.67   0.67   0.46",
        "(T,T) 58  (T,F) 10  (F,T) 0  (F,F) 26  Err 6",
        "Overall    5.05 (97 timed)",
        "Three      6.40 (15 timed)",
    ] {
        assert!(r.out.contains(line), "missing {line:?}\n{}", r.out);
    }
}

#[test]
fn eval_json_report() {
    let r =
        with_config(&["eval", "--bench", &fx("hive_bench.jsonl"), "--outcomes", &fx("hive_outcomes.jsonl"), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&r.out).unwrap();
    assert_eq!(v["failures"]["top_err"], 3);
    assert_eq!(v["failures"]["err_err"], 3);
    assert_eq!(v["accounting_ok"], true);
}

#[test]
fn err_as_zero_lowers_the_means() {
    let r = with_config(&[
        "eval",
        "--bench",
        &fx("hive_bench.jsonl"),
        "--outcomes",
        &fx("hive_outcomes.jsonl"),
        "--err-as-zero",
    ]);
    // 72 / 100 once the three all-Err rows count as zeros.
    assert!(r.out.contains("Overall    100   0.72"), "{}", r.out);
}

#[test]
fn ingest_three_cards() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("kg/graph.jsonl");
    let r =
        with_config(&["ingest", "--cards", &fx("cards"), "--pwc", &fx("pwc.jsonl"), "--out", out.to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.err);

    let g = load_graph_file(&out).unwrap();
    assert_eq!(g.models().len(), 3);
    for task in ["automatic_speech_recognition", "named_entity_recognition", "summarization"] {
        assert_eq!(g.models_for_task(&NodeId::task(task)).len(), 1, "{task}");
    }
    // Hand count over pwc.jsonl: variants other than the card's own are dropped.
    let results = |m: &str| g.results_for(&NodeId::model(m), None).len();
    assert_eq!(results("openai/whisper-large-v2"), 2);
    assert_eq!(results("dslim/bert-base-NER"), 1);
    assert_eq!(results("facebook/bart-large-cnn"), 1);
    // The summarization card has no code, so no snippet.
    let specs = load_specs_file(&dir.path().join("kg/graph.specs.jsonl")).unwrap();
    assert_eq!(specs.len(), 2);
    assert!(g.record(&NodeId::model("facebook/bart-large-cnn")).snippet.is_none());
}

#[test]
fn ingest_empty_cards_dir() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("cards")).unwrap();
    let out = dir.path().join("graph.jsonl");
    let r = with_config(&[
        "ingest",
        "--cards",
        dir.path().join("cards").to_str().unwrap(),
        "--pwc",
        &fx("pwc.jsonl"),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.err);
    assert!(load_graph_file(&out).unwrap().is_empty());
}

#[test]
fn malformed_pwc_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let pwc = dir.path().join("pwc.jsonl");
    std::fs::write(&pwc, "{\"arxiv_id\": \"2212.04356\", \"value\": \"high\"}\n").unwrap();
    let out = dir.path().join("graph.jsonl");
    let r = with_config(&[
        "ingest",
        "--cards",
        &fx("cards"),
        "--pwc",
        pwc.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("pwc.jsonl"), "{}", r.err);
    assert!(!out.exists());
    assert!(!dir.path().join("graph.specs.jsonl").exists());
}

#[test]
fn ckg_commands() {
    let s = with_config(&["ckg", "stats"]);
    assert_eq!(s.code, 0);
    assert!(s.out.contains("models: 15"), "{}", s.out);
    let q = with_config(&["ckg", "query", "--task", "automatic_speech_recognition"]);
    assert_eq!(q.code, 0);
    assert!(q.out.starts_with("2 model(s)"), "{}", q.out);
    let none = with_config(&["ckg", "query", "--task", "no_such_task"]);
    assert!(none.out.starts_with("0 model(s)"), "{}", none.out);
}

#[test]
fn missing_graph_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = with_config(&["--ckg", dir.path().join("absent.jsonl").to_str().unwrap(), "plan", SCENARIO]);
    assert_eq!(r.code, 1);
    assert!(r.err.contains("absent.jsonl"), "{}", r.err);
}
