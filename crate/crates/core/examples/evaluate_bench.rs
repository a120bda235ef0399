//! Score recorded outcomes, then run the 12-record sample live and score
//! that too.

use std::path::Path;

use hive::config::Config;
use hive::evalbench::{evaluate, load_bench, load_outcomes, render_eval, score_all, EvalConfig, StringMatchJudge};
use hive::pipeline::Engine;
use hive::selection::ConstraintSet;

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).expect("fixture file reads")
}

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse");
    let cfg = EvalConfig::default();

    let records = load_bench(&read(&dir, "hive_bench.jsonl")).expect("bench loads");
    let outcomes = load_outcomes(&read(&dir, "hive_outcomes.jsonl")).expect("outcomes load");
    let scored = score_all(&records, &outcomes, &cfg).expect("outcomes score");
    println!("== recorded outcomes\n{}", render_eval(&evaluate(&scored, &cfg)));

    let config = Config::from_file(&dir.join("hive.toml")).expect("fixture config loads");
    let engine = Engine::from_config(&config).expect("engine builds");
    let records = load_bench(&read(&dir, "bench.jsonl")).expect("sample loads");
    let judge = StringMatchJudge::from_json(&read(&dir, "judge.json")).expect("judge loads");
    let outcomes = engine.run_bench(&records, &ConstraintSet::default(), &judge, 4).expect("sample runs");
    let scored = score_all(&records, &outcomes, &cfg).expect("outcomes score");
    println!("== live sample\n{}", render_eval(&evaluate(&scored, &cfg)));
}
