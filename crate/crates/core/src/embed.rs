//! Text embeddings used for taxonomy placement and argument matching.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("embedder failed: {0}")]
pub struct EmbedderError(pub String);

/// Sparse embedding keyed by feature name. Ordered so that dot products
/// are summed in a fixed order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Embedding(pub BTreeMap<String, f64>);

impl Embedding {
    pub fn from_dense(values: &[f64]) -> Self {
        Embedding(values.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| (format!("{i:04}"), *v)).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Embedding) -> f64 {
        let (small, large) = if self.0.len() <= other.0.len() { (self, other) } else { (other, self) };
        small.0.iter().filter_map(|(k, v)| large.0.get(k).map(|w| v * w)).sum()
    }

    /// Cosine similarity; zero when either side is the zero vector.
    pub fn cosine(&self, other: &Embedding) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            self.dot(other) / denom
        }
    }
}

pub trait TextEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, EmbedderError>;

    fn similarity(&self, a: &str, b: &str) -> Result<f64, EmbedderError> {
        Ok(self.embed(a)?.cosine(&self.embed(b)?))
    }
}

/// Deterministic offline embedder: L2-normalized character-trigram counts.
///
/// Text is lowercased and padded with one space on each side before the
/// trigram window slides over it, so word boundaries contribute features.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl TextEmbedder for TrigramEmbedder {
    fn embed(&self, text: &str) -> Result<Embedding, EmbedderError> {
        let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
        let mut counts: BTreeMap<String, f64> = BTreeMap::new();
        for window in padded.windows(3) {
            *counts.entry(window.iter().collect()).or_default() += 1.0;
        }
        let mut emb = Embedding(counts);
        let norm = emb.norm();
        if norm > 0.0 {
            for v in emb.0.values_mut() {
                *v /= norm;
            }
        }
        Ok(emb)
    }
}
