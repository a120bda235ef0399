//! Parse the fixture domains, merge two of them and build a problem for a
//! parsed query.

use std::path::Path;

use hive::nlu::fallback_parse;
use hive::pddl::{ground, merge_domains, parse_domain, print_domain, print_problem, synthesize_problem};
use hive::pipeline::load_domains;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/muse/domains");
    let domains = load_domains(&dir).expect("fixture domains parse");
    for d in &domains {
        let again = parse_domain(&print_domain(d)).expect("printed domain parses");
        println!("{:22} actions={} round_trip={}", d.name, d.actions.len(), again == *d);
    }

    let chosen: Vec<_> =
        domains.into_iter().filter(|d| d.name == "audio" || d.name == "token_classification").collect();
    let merged = merge_domains(&chosen).expect("domains merge");
    println!("\n{}", print_domain(&merged));

    let pq = fallback_parse("Transcribe the audio from ./audio_1.wav and find entity tokens");
    let selected = vec!["automatic_speech_recognition".to_string(), "named_entity_recognition".to_string()];
    let problem = synthesize_problem(&pq, &selected, &merged).expect("problem synthesizes");
    println!("{}", print_problem(&problem));

    let task = ground(&merged, &problem, 1000).expect("grounds");
    println!("{} atoms, {} ground actions", task.num_atoms(), task.actions.len());
}
