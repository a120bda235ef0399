//! Build a capability graph from model cards and benchmark records, then
//! grow a task taxonomy from the tasks it covers.

use std::path::Path;

use hive::embed::TrigramEmbedder;
use hive::ingest::{build_taxonomy_traced, flatten_taxonomy, ingest_cards, load_cards, load_pwc, Taxonomy};
use hive::nlu::{GenerationParams, HeuristicProvider};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse");
    let cards = load_cards(&dir.join("cards")).expect("cards parse");
    let pwc = std::fs::read_to_string(dir.join("pwc.jsonl")).expect("pwc reads");
    let records = load_pwc(&pwc).expect("pwc parses");

    let out = ingest_cards(&cards, &records, &HeuristicProvider, &GenerationParams::default()).expect("cards ingest");
    let s = out.graph.stats();
    println!("{} cards -> {} triples, {} specs", cards.len(), s.triples, out.specs.len());
    for spec in out.specs.iter() {
        println!("--- {}\n{}", spec.model_id.local_name, spec.snippet);
    }

    let seed: Taxonomy =
        serde_json::from_str(&std::fs::read_to_string(dir.join("taxonomy_seed.json")).expect("seed reads"))
            .expect("seed parses");
    let tasks: Vec<String> = out.graph.tasks().iter().map(|t| t.local_name.replace('_', " ")).collect();
    let (tax, decisions) = build_taxonomy_traced(&seed, &tasks, &TrigramEmbedder).expect("taxonomy builds");
    for d in &decisions {
        println!("{:32} {:?} (nearest {:?}, {:.3})", d.task, d.action, d.nearest, d.similarity);
    }
    println!(
        "seed {} labels -> {} labels, {} at level 3 or above",
        seed.len(),
        tax.len(),
        flatten_taxonomy(&tax, 3).len()
    );
}
