//! Plan and execute a two-step query offline with stub backends, printing
//! the justification report.
//!
//! Pass a query as the first argument to try another one.

use std::path::Path;

use hive::config::Config;
use hive::exec::render_report;
use hive::pipeline::{render_plan, Engine};
use hive::selection::ConstraintSet;

fn main() {
    let file = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse/hive.toml");
    let config = Config::from_file(&file).expect("fixture config loads");
    let engine = Engine::from_config(&config).expect("engine builds");

    let query = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Transcribe the audio from ./audio_1.wav and find entity tokens".into());
    let cs = ConstraintSet::default();

    let plan = engine.plan(&query, &cs).expect("query plans");
    println!("{}", render_plan(&plan));

    let trace = engine.run(&query, &cs).expect("query runs");
    print!("{}", render_report(&trace));
}
