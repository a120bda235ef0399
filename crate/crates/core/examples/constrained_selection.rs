//! Assign models to planned tasks under license, size and benchmark rules.

use std::path::Path;

use hive::ckg::NodeId;
use hive::pipeline::load_graph_file;
use hive::selection::{explain_selection, select_models, BenchmarkConstraint, ConstraintSet};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse/graph.jsonl");
    let graph = load_graph_file(&path).expect("fixture graph loads");
    let plan: Vec<(String, NodeId)> = ["automatic_speech_recognition", "named_entity_recognition"]
        .iter()
        .map(|a| (a.to_string(), NodeId::task(a)))
        .collect();

    let scenarios = [
        ("default", ConstraintSet::default()),
        (
            "licenses openrail++, deepseek",
            ConstraintSet::new(Some(["openrail++".into(), "deepseek".into()].into()), false, None).unwrap(),
        ),
        ("smallest", ConstraintSet::new(None, true, None).unwrap()),
        (
            "best common voice WER",
            ConstraintSet::new(
                None,
                false,
                Some(BenchmarkConstraint {
                    name: "speech recognition on common voice english".into(),
                    metric: "wer".into(),
                }),
            )
            .unwrap(),
        ),
    ];
    for (name, cs) in &scenarios {
        let r = select_models(&plan, &graph, cs);
        println!("== {name} (complete: {})", r.is_complete());
        print!("{}", explain_selection(&r));
    }
}
