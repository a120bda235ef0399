use serde::{Deserialize, Serialize};

use crate::embed::{EmbedderError, TextEmbedder};

/// Similarity at or above which a task counts as already present.
pub const DUPLICATE_THRESHOLD: f64 = 0.9;
/// Lowest similarity at which a task is attached under its closest label.
pub const INSERT_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<TaxonomyNode>,
}

impl TaxonomyNode {
    pub fn leaf(label: impl Into<String>) -> Self {
        TaxonomyNode { label: label.into(), children: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Taxonomy {
    pub roots: Vec<TaxonomyNode>,
}

impl Taxonomy {
    /// `(depth, label)` in pre-order; roots have depth 1.
    pub fn preorder(&self) -> Vec<(usize, &str)> {
        fn walk<'a>(n: &'a TaxonomyNode, d: usize, out: &mut Vec<(usize, &'a str)>) {
            out.push((d, &n.label));
            for c in &n.children {
                walk(c, d + 1, out);
            }
        }
        let mut out = Vec::new();
        for r in &self.roots {
            walk(r, 1, &mut out);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.preorder().len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.preorder().iter().map(|(d, _)| *d).max().unwrap_or(0)
    }

    /// Mutable node at pre-order position `idx`.
    fn node_mut(&mut self, idx: usize) -> Option<&mut TaxonomyNode> {
        fn walk<'a>(n: &'a mut TaxonomyNode, idx: &mut usize) -> Option<&'a mut TaxonomyNode> {
            if *idx == 0 {
                return Some(n);
            }
            *idx -= 1;
            for c in &mut n.children {
                if let Some(found) = walk(c, idx) {
                    return Some(found);
                }
            }
            None
        }
        let mut idx = idx;
        for r in &mut self.roots {
            if let Some(found) = walk(r, &mut idx) {
                return Some(found);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxonomyAction {
    Ignored,
    Inserted,
    Irrelevant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyDecision {
    pub task: String,
    pub nearest: String,
    pub similarity: f64,
    pub action: TaxonomyAction,
}

/// Same as [`build_taxonomy`], also returning one decision per task.
pub fn build_taxonomy_traced(
    seed: &Taxonomy,
    tasks: &[String],
    embedder: &dyn TextEmbedder,
) -> Result<(Taxonomy, Vec<TaxonomyDecision>), EmbedderError> {
    assert!(!seed.is_empty(), "seed taxonomy is empty");
    let mut t = seed.clone();
    let mut decisions = Vec::new();
    for task in tasks {
        let task_emb = embedder.embed(task)?;
        let mut best: Option<(usize, f64, String)> = None;
        for (i, (_, label)) in t.preorder().into_iter().enumerate() {
            let s = task_emb.cosine(&embedder.embed(label)?);
            if best.as_ref().is_none_or(|(_, b, _)| s > *b) {
                best = Some((i, s, label.to_string()));
            }
        }
        let (idx, s, nearest) = best.expect("taxonomy is non-empty");
        let action = if s >= DUPLICATE_THRESHOLD {
            TaxonomyAction::Ignored
        } else if s >= INSERT_THRESHOLD {
            t.node_mut(idx).expect("index from pre-order").children.push(TaxonomyNode::leaf(task.clone()));
            TaxonomyAction::Inserted
        } else {
            TaxonomyAction::Irrelevant
        };
        decisions.push(TaxonomyDecision { task: task.clone(), nearest, similarity: s, action });
    }
    Ok((t, decisions))
}

/// Adds tasks in the similarity band under their closest label. Order
/// matters: inserted tasks are candidates for later ones.
pub fn build_taxonomy(
    seed: &Taxonomy,
    tasks: &[String],
    embedder: &dyn TextEmbedder,
) -> Result<Taxonomy, EmbedderError> {
    build_taxonomy_traced(seed, tasks, embedder).map(|(t, _)| t)
}

/// Labels at depth `level` or shallower, pre-order, first occurrence kept.
pub fn flatten_taxonomy(t: &Taxonomy, level: usize) -> Vec<String> {
    assert!(level >= 1, "level must be at least 1");
    let mut out: Vec<String> = Vec::new();
    for (d, l) in t.preorder() {
        if d <= level && !out.iter().any(|x| x == l) {
            out.push(l.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{Embedding, TrigramEmbedder};
    use std::collections::BTreeMap;

    /// Fixed integer vectors so cosines are exact.
    struct Table(BTreeMap<&'static str, Vec<f64>>);

    impl TextEmbedder for Table {
        fn embed(&self, text: &str) -> Result<Embedding, EmbedderError> {
            self.0
                .get(text)
                .map(|v| Embedding::from_dense(v))
                .ok_or_else(|| EmbedderError(format!("no vector for {text}")))
        }
    }

    fn table() -> Table {
        Table(
            [
                ("root", vec![0.0, 0.0, 0.0, 0.0, 1.0]),
                ("speech", vec![1.0, 0.0, 0.0, 0.0, 0.0]),
                ("at 0.9", vec![9.0, 3.0, 3.0, 1.0, 0.0]),
                ("at 0.8", vec![4.0, 3.0, 0.0, 0.0, 0.0]),
                ("at 0.799", vec![799.0, 601.0, 19.0, 6.0, 1.0]),
            ]
            .into(),
        )
    }

    fn seed() -> Taxonomy {
        Taxonomy { roots: vec![TaxonomyNode { label: "root".into(), children: vec![TaxonomyNode::leaf("speech")] }] }
    }

    #[test]
    fn threshold_boundaries() {
        let e = table();
        let s = |t: &str| e.similarity("speech", t).unwrap();
        assert_eq!(s("at 0.9"), 0.9);
        assert_eq!(s("at 0.8"), 0.8);
        assert_eq!(s("at 0.799"), 0.799);

        // Each boundary case on a fresh seed, so earlier insertions do not
        // become the nearest label.
        let action = |task: &str| build_taxonomy_traced(&seed(), &[task.to_string()], &e).unwrap().1[0].action;
        assert_eq!(action("at 0.9"), TaxonomyAction::Ignored);
        assert_eq!(action("at 0.8"), TaxonomyAction::Inserted);
        assert_eq!(action("at 0.799"), TaxonomyAction::Irrelevant);

        let t = build_taxonomy(&seed(), &["at 0.8".into()], &e).unwrap();
        assert_eq!(t.roots[0].children[0].children, vec![TaxonomyNode::leaf("at 0.8")]);
        assert_eq!(flatten_taxonomy(&t, 3), vec!["root", "speech", "at 0.8"]);
    }

    #[test]
    fn order_sensitivity() {
        // Once "at 0.8" is in, "at 0.799" sits right next to it.
        let tasks: Vec<String> = ["at 0.8", "at 0.799"].map(String::from).to_vec();
        let (_, d) = build_taxonomy_traced(&seed(), &tasks, &table()).unwrap();
        assert_eq!(d[1].nearest, "at 0.8");
        assert_eq!(d[1].action, TaxonomyAction::Ignored);
    }

    #[test]
    fn identical_label_is_ignored() {
        let t = build_taxonomy(&seed(), &["speech".into()], &table()).unwrap();
        assert_eq!(t, seed());
    }

    #[test]
    fn flatten_cuts_deep_chains() {
        let mut n = TaxonomyNode::leaf("e");
        for l in ["d", "c", "b", "a"] {
            n = TaxonomyNode { label: l.into(), children: vec![n] };
        }
        let t = Taxonomy { roots: vec![n] };
        assert_eq!(flatten_taxonomy(&t, 3), vec!["a", "b", "c"]);
        assert_eq!(t.depth(), 5);
    }

    #[test]
    fn trigram_band_inserts_under_argmax() {
        let seed = Taxonomy {
            roots: vec![
                TaxonomyNode::leaf("speech recognition"),
                TaxonomyNode::leaf("image classification"),
                TaxonomyNode::leaf("text summarization"),
            ],
        };
        let e = TrigramEmbedder;
        let task = "audio speech recognition";
        let s = e.similarity(task, "speech recognition").unwrap();
        assert!((s - 0.8660).abs() < 1e-4, "{s}");
        let t = build_taxonomy(&seed, &[task.to_string()], &e).unwrap();
        assert_eq!(t.roots[0].children, vec![TaxonomyNode::leaf(task)]);
        // Rerunning with the same tasks changes nothing.
        assert_eq!(build_taxonomy(&t, &[task.to_string()], &e).unwrap(), t);
    }
}
