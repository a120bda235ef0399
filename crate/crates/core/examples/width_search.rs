//! Best-first width search on a hand-built propositional task, checked
//! against breadth-first search.

use hive::bitset::AtomSet;
use hive::pddl::{GroundAction, GroundAtom, GroundedTask};
use hive::planner::{bfs_oracle, bfws_plan, validate_plan, SearchConfig};

fn action(n: usize, name: &str, pre: &[usize], add: &[usize], del: &[usize]) -> GroundAction {
    GroundAction {
        schema: name.into(),
        args: vec![],
        pre: AtomSet::from_indices(n, pre.iter().copied()),
        add: AtomSet::from_indices(n, add.iter().copied()),
        del: AtomSet::from_indices(n, del.iter().copied()),
    }
}

fn main() {
    // 0 audio, 1 transcript, 2 entities, 3 summary, 4 speech_out
    let names = ["audio", "transcript", "entities", "summary", "speech_out"];
    let n = names.len();
    let atoms = names.iter().map(|s| GroundAtom::new(*s, vec![])).collect();
    let actions = vec![
        action(n, "tts", &[3], &[4], &[]),
        action(n, "summarize", &[1], &[3], &[]),
        action(n, "ner", &[1], &[2], &[]),
        action(n, "asr", &[0], &[1], &[]),
    ];
    let task =
        GroundedTask::from_parts(atoms, AtomSet::from_indices(n, [0]), AtomSet::from_indices(n, [2, 4]), actions);

    for width in [1, 2] {
        let cfg = SearchConfig { max_width: width, ..SearchConfig::default() };
        match bfws_plan(&task, &cfg) {
            Ok(p) => println!("width {width}: {:?} valid={}", p.action_names(), validate_plan(&task, &p)),
            Err(e) => println!("width {width}: {e}"),
        }
    }
    let oracle = bfs_oracle(&task).expect("oracle solves");
    println!("oracle:  {:?}", oracle.action_names());
}
