//! Load the shipped capability graph and query it by task and benchmark.

use std::path::Path;

use hive::ckg::NodeId;
use hive::pipeline::load_graph_file;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse/graph.jsonl");
    let graph = load_graph_file(&path).expect("fixture graph loads");

    let s = graph.stats();
    println!(
        "{} triples, {} entities, {} models, {} tasks",
        s.triples,
        s.entities,
        graph.models().len(),
        graph.tasks().len()
    );

    let asr = NodeId::task("automatic_speech_recognition");
    for m in graph.models_for_task(&asr) {
        println!(
            "{}  license={}  size_bytes={}",
            m.model.local_name,
            m.license.as_deref().unwrap_or("-"),
            m.size_bytes.map_or("-".into(), |b| b.to_string())
        );
        for r in graph.results_for(&m.model, Some("speech recognition on common voice english")) {
            println!("  {} {} = {} ({})", r.benchmark, r.metric, r.value, r.direction.as_str());
        }
    }
}
