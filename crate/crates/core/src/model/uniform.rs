use super::{GenQuery, Generator, TagDist, Tagger};
use crate::vocab::TokenId;

/// Tagger assigning 1/4 to every tag at every position.
#[derive(Debug, Clone)]
pub struct UniformTagger {
    vocab_size: usize,
}

impl UniformTagger {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }
}

impl Tagger for UniformTagger {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_tags(&self, x: &[TokenId], _source: Option<&[TokenId]>) -> Vec<TagDist> {
        vec![[0.25; 4]; x.len() + 1]
    }
}

/// Generator assigning 1/|V| to every vocabulary entry.
#[derive(Debug, Clone)]
pub struct UniformGenerator {
    vocab_size: usize,
}

impl UniformGenerator {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size }
    }
}

impl Generator for UniformGenerator {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_dist(&self, _query: &GenQuery<'_>) -> Vec<f64> {
        vec![1.0 / self.vocab_size as f64; self.vocab_size]
    }
}
