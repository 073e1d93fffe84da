//! Deterministic untrained scorers for tests and diagnostics.
//!
//! The hashed scorers derive a fixed pseudo-random distribution from every
//! input they are shown, so search procedures can be checked against
//! exhaustive enumeration without training anything.

use std::ops::Range;

use super::{GenQuery, Generator, TagDist, Tagger};
use crate::rng::splitmix64;
use crate::vocab::{TokenId, END_OF_SPAN};

fn mix_seq(mut h: u64, seq: &[TokenId]) -> u64 {
    h = splitmix64(h ^ seq.len() as u64);
    for &t in seq {
        h = splitmix64(h ^ u64::from(t));
    }
    h
}

fn unit(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn softmax_from(h: u64, n: usize, sharpness: f64) -> Vec<f64> {
    let mut state = h;
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            state = splitmix64(state);
            (sharpness * (2.0 * unit(state) - 1.0)).exp()
        })
        .collect();
    let z: f64 = out.iter().sum();
    for v in &mut out {
        *v /= z;
    }
    out
}

#[derive(Debug, Clone)]
pub struct HashedTagger {
    pub vocab_size: usize,
    pub seed: u64,
    pub sharpness: f64,
}

impl Tagger for HashedTagger {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_tags(&self, x: &[TokenId], source: Option<&[TokenId]>) -> Vec<TagDist> {
        let mut h = mix_seq(self.seed, x);
        if let Some(s) = source {
            h = mix_seq(h ^ 0x5eed, s);
        }
        (0..=x.len())
            .map(|pos| {
                let p = softmax_from(splitmix64(h ^ pos as u64), 4, self.sharpness);
                [p[0], p[1], p[2], p[3]]
            })
            .collect()
    }
}

/// Spreads mass over `content` and END_OF_SPAN only.
#[derive(Debug, Clone)]
pub struct HashedGenerator {
    pub vocab_size: usize,
    pub content: Range<TokenId>,
    pub seed: u64,
    pub sharpness: f64,
}

impl Generator for HashedGenerator {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_dist(&self, q: &GenQuery<'_>) -> Vec<f64> {
        let mut h = splitmix64(self.seed ^ q.kind.index() as u64);
        for part in [q.left, q.prefix, q.right, q.replaced] {
            h = mix_seq(h, part);
        }
        if let Some(s) = q.source {
            h = mix_seq(h ^ 0x5eed, s);
        }
        let support: Vec<TokenId> = std::iter::once(END_OF_SPAN).chain(self.content.clone()).collect();
        let p = softmax_from(h, support.len(), self.sharpness);
        let mut dist = vec![0.0; self.vocab_size];
        for (t, v) in support.iter().zip(p) {
            dist[*t as usize] = v;
        }
        dist
    }
}

/// The same tag distribution at every position.
#[derive(Debug, Clone)]
pub struct ConstantTagger {
    pub vocab_size: usize,
    pub dist: TagDist,
}

impl Tagger for ConstantTagger {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_tags(&self, x: &[TokenId], _source: Option<&[TokenId]>) -> Vec<TagDist> {
        vec![self.dist; x.len() + 1]
    }
}

/// The same token distribution for every query.
#[derive(Debug, Clone)]
pub struct ConstantGenerator {
    pub dist: Vec<f64>,
}

impl Generator for ConstantGenerator {
    fn vocab_size(&self) -> usize {
        self.dist.len()
    }

    fn next_token_dist(&self, _q: &GenQuery<'_>) -> Vec<f64> {
        self.dist.clone()
    }
}
