//! Posterior edit tags of one corruption step.
//!
//! Given a clean sequence `x0` and a corrupted `x`, [`EditPrior::tag_marginals`]
//! returns for every tag position of `x` the posterior probability of each
//! gold tag, summing over all walk corruptions that turn `x0` into `x`.
//!
//! A maximal run of non-KEEP ops forms one region. Its tokens are tagged
//! DELETE when it consumes nothing, REPLACE when it consumes and emits, and a
//! region that only deletes turns the preceding KEEP (or the gap) into INSERT.
//! The forward-backward below commits to the region type when a region opens,
//! so every tag hangs off a single edge.

use serde::{Deserialize, Serialize};

use super::checkpoint::{ByteReader, ByteWriter};
use super::TagDist;
use crate::error::{Error, Result};
use crate::corruption::{CorruptionConfig, LengthDist, TypeDist};
use crate::vocab::TokenId;

/// Spans longer than this carry negligible probability and are skipped.
const MAX_SPAN: usize = 32;

/// Corruption parameters the posterior is computed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditPrior {
    pub type_dist: TypeDist,
    pub length_dist: LengthDist,
    /// Number of content tokens distractors are drawn from.
    pub content_len: usize,
}

impl EditPrior {
    pub fn from_config(cfg: &CorruptionConfig, content_len: usize) -> Self {
        Self { type_dist: cfg.type_dist, length_dist: cfg.length_dist, content_len }
    }

    fn lengths(&self) -> (Vec<f64>, Vec<f64>) {
        let pmf: Vec<f64> = match self.length_dist {
            LengthDist::Poisson { lambda } => {
                let mut p = (-lambda).exp();
                let z = 1.0 - p;
                (0..=MAX_SPAN)
                    .map(|k| {
                        if k > 0 {
                            p *= lambda / k as f64;
                        }
                        if k == 0 { 0.0 } else { p / z }
                    })
                    .collect()
            }
            LengthDist::Uniform { max } => {
                (0..=MAX_SPAN).map(|k| if k >= 1 && k <= max { 1.0 / max as f64 } else { 0.0 }).collect()
            }
        };
        // tail[r] = P(length >= r)
        let mut tail = vec![0.0; MAX_SPAN + 2];
        let mut acc = 0.0;
        for r in (1..=MAX_SPAN).rev() {
            acc += pmf[r];
            tail[r] = acc;
        }
        tail[0] = 1.0;
        (pmf, tail)
    }

    /// Posterior tag distribution per position of `x` (gap first). Returns
    /// `None` when no walk explains `x` or the computation underflows.
    pub fn tag_marginals(&self, x: &[TokenId], x0: &[TokenId]) -> Option<Vec<TagDist>> {
        Lattice::new(self, x, x0).marginals()
    }
}

pub(crate) fn write_prior(w: &mut ByteWriter, prior: Option<&EditPrior>) {
    let Some(p) = prior else {
        w.u64(0);
        return;
    };
    w.u64(1);
    let t = p.type_dist;
    for v in [t.keep, t.replace, t.insert, t.delete] {
        w.f64(v);
    }
    match p.length_dist {
        LengthDist::Poisson { lambda } => {
            w.u64(0);
            w.f64(lambda);
        }
        LengthDist::Uniform { max } => {
            w.u64(1);
            w.u64(max as u64);
        }
    }
    w.u64(p.content_len as u64);
}

pub(crate) fn read_prior(r: &mut ByteReader<'_>) -> Result<Option<EditPrior>> {
    match r.u64()? {
        0 => return Ok(None),
        1 => {}
        v => return Err(Error::Checkpoint(format!("bad prior flag {v}"))),
    }
    let type_dist = TypeDist { keep: r.f64()?, replace: r.f64()?, insert: r.f64()?, delete: r.f64()? };
    let length_dist = match r.u64()? {
        0 => LengthDist::Poisson { lambda: r.f64()? },
        1 => LengthDist::Uniform { max: r.usize()? },
        v => return Err(Error::Checkpoint(format!("bad length distribution tag {v}"))),
    };
    Ok(Some(EditPrior { type_dist, length_dist, content_len: r.usize()? }))
}

// Lattice states at each (i, j): after a KEEP (or the start), or inside a
// region of a committed type. Mixed regions track whether they have consumed
// and emitted yet.
const K: usize = 0;
const N: usize = 1;
const D: usize = 2;
const Y01: usize = 3;
const Y10: usize = 4;
const Y11: usize = 5;
const STATES: usize = 6;

fn mixed(consumed: bool, emitted: bool) -> usize {
    match (consumed, emitted) {
        (false, true) => Y01,
        (true, false) => Y10,
        _ => Y11,
    }
}

/// What an edge contributes to the tag marginals.
#[derive(Clone, Copy)]
enum Mark {
    /// KEEP of `x[j]`.
    Keep,
    /// Tokens emitted by this edge get DELETE (non-consuming region).
    EmitDelete,
    /// Tokens emitted by this edge get REPLACE (mixed region).
    EmitReplace,
    /// A pure-deletion region opens: the preceding KEEP becomes INSERT.
    OpenDeletion,
    None,
}

#[derive(Clone, Copy)]
struct Edge {
    /// Target state, or `None` for the end of the walk.
    to: Option<(usize, usize, usize)>,
    weight: f64,
    mark: Mark,
}

struct Lattice<'a> {
    x: &'a [TokenId],
    x0: &'a [TokenId],
    t: TypeDist,
    pmf: Vec<f64>,
    tail: Vec<f64>,
    /// Per emitted distractor: q scaled by 1/q, i.e. one; kept tokens carry
    /// `1/q`. Consumed tokens are scaled by `q / keep` so that a KEEP edge
    /// weighs one. Every path emits |x| and consumes |x0| tokens, so the
    /// scaling cancels in the posterior.
    keep_weight: f64,
    consume_scale: f64,
}

impl<'a> Lattice<'a> {
    fn new(prior: &EditPrior, x: &'a [TokenId], x0: &'a [TokenId]) -> Self {
        let (pmf, tail) = prior.lengths();
        let q = 1.0 / prior.content_len.max(1) as f64;
        let t = prior.type_dist;
        let consume_scale = if t.keep > 0.0 { q / t.keep } else { q };
        Self { x, x0, t, pmf, tail, keep_weight: t.keep / q * consume_scale, consume_scale }
    }

    /// Probability that a consuming span of the walk takes `k` tokens when
    /// `rem` remain.
    fn span(&self, k: usize, rem: usize) -> f64 {
        if k < rem {
            self.pmf.get(k).copied().unwrap_or(0.0)
        } else if rem <= MAX_SPAN {
            self.tail[rem]
        } else {
            0.0
        }
    }

    fn edges(&self, i: usize, j: usize, s: usize, out: &mut Vec<Edge>) {
        out.clear();
        let (n, m) = (self.x0.len(), self.x.len());
        let t = self.t;
        let closable = matches!(s, K | N | D | Y11);
        if i == n {
            // One more draw ends the walk; an INSERT there emits the rest of x.
            if j == m && closable {
                out.push(Edge { to: None, weight: t.keep + t.replace + t.delete, mark: Mark::None });
            }
            let l = m - j;
            if l >= 1 && l <= MAX_SPAN {
                let w = t.insert * self.pmf[l];
                match s {
                    K | N => out.push(Edge { to: None, weight: w, mark: Mark::EmitDelete }),
                    Y10 | Y11 => out.push(Edge { to: None, weight: w, mark: Mark::EmitReplace }),
                    _ => {}
                }
            }
            return;
        }
        if closable && j < m && self.x0[i] == self.x[j] {
            out.push(Edge { to: Some((i + 1, j + 1, K)), weight: self.keep_weight, mark: Mark::Keep });
        }
        let rem = n - i;
        let in_mixed = matches!(s, Y01 | Y10 | Y11);
        let emitted = matches!(s, Y01 | Y11);
        for k in 1..=rem.min(MAX_SPAN) {
            let p = self.span(k, rem) * self.consume_scale.powi(k as i32);
            if p == 0.0 {
                continue;
            }
            // REPLACE: consumes and emits k distractors (unit weight each).
            if j + k <= m && self.x[j..j + k] != self.x0[i..i + k] && (s == K || in_mixed) {
                out.push(Edge { to: Some((i + k, j + k, Y11)), weight: t.replace * p, mark: Mark::EmitReplace });
            }
            // DELETE
            let w = t.delete * p;
            match s {
                K => {
                    out.push(Edge { to: Some((i + k, j, D)), weight: w, mark: Mark::OpenDeletion });
                    out.push(Edge { to: Some((i + k, j, Y10)), weight: w, mark: Mark::None });
                }
                D => out.push(Edge { to: Some((i + k, j, D)), weight: w, mark: Mark::None }),
                _ if in_mixed => out.push(Edge { to: Some((i + k, j, mixed(true, emitted))), weight: w, mark: Mark::None }),
                _ => {}
            }
        }
        for l in 1..=(m - j).min(MAX_SPAN) {
            let w = t.insert * self.pmf[l];
            if w == 0.0 {
                continue;
            }
            match s {
                K => {
                    out.push(Edge { to: Some((i, j + l, N)), weight: w, mark: Mark::EmitDelete });
                    out.push(Edge { to: Some((i, j + l, Y01)), weight: w, mark: Mark::EmitReplace });
                }
                N => out.push(Edge { to: Some((i, j + l, N)), weight: w, mark: Mark::EmitDelete }),
                Y01 => out.push(Edge { to: Some((i, j + l, Y01)), weight: w, mark: Mark::EmitReplace }),
                Y10 | Y11 => out.push(Edge { to: Some((i, j + l, Y11)), weight: w, mark: Mark::EmitReplace }),
                _ => {}
            }
        }
    }

    fn idx(&self, i: usize, j: usize, s: usize) -> usize {
        (i * (self.x.len() + 1) + j) * STATES + s
    }

    fn marginals(&self) -> Option<Vec<TagDist>> {
        let (n, m) = (self.x0.len(), self.x.len());
        let size = (n + 1) * (m + 1) * STATES;
        let mut edges = Vec::new();
        // Backward pass: completion weight of every state.
        let mut beta = vec![0.0f64; size];
        for i in (0..=n).rev() {
            for j in (0..=m).rev() {
                for s in 0..STATES {
                    self.edges(i, j, s, &mut edges);
                    beta[self.idx(i, j, s)] = edges
                        .iter()
                        .map(|e| e.weight * e.to.map_or(1.0, |(i2, j2, s2)| beta[self.idx(i2, j2, s2)]))
                        .sum();
                }
            }
        }
        let z = beta[self.idx(0, 0, K)];
        if !(z.is_finite() && z > 0.0) {
            return None;
        }
        let mut alpha = vec![0.0f64; size];
        alpha[self.idx(0, 0, K)] = 1.0;
        let mut tags = vec![[0.0f64; 4]; m + 1];
        tags[0][0] = 1.0;
        for i in 0..=n {
            for j in 0..=m {
                for s in 0..STATES {
                    let a = alpha[self.idx(i, j, s)];
                    if a == 0.0 {
                        continue;
                    }
                    self.edges(i, j, s, &mut edges);
                    for e in &edges {
                        let (j2, b) = match e.to {
                            Some((i2, j2, s2)) => {
                                let k = self.idx(i2, j2, s2);
                                alpha[k] += a * e.weight;
                                (j2, beta[k])
                            }
                            None => (m, 1.0),
                        };
                        let mass = a * e.weight * b / z;
                        match e.mark {
                            Mark::Keep => tags[j + 1][0] += mass,
                            Mark::EmitDelete => tags[j + 1..=j2].iter_mut().for_each(|t| t[1] += mass),
                            Mark::EmitReplace => tags[j + 1..=j2].iter_mut().for_each(|t| t[2] += mass),
                            Mark::OpenDeletion => {
                                tags[j][0] -= mass;
                                tags[j][3] += mass;
                            }
                            Mark::None => {}
                        }
                    }
                }
            }
        }
        for d in &mut tags {
            for v in d.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
            let total: f64 = d.iter().sum();
            if !(total > 0.0) {
                return None;
            }
            for v in d.iter_mut() {
                *v /= total;
            }
        }
        Some(tags)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::script::{invert_script, normalize_script, EditOp, EditScript, EditTag, TaggedEdits};

    /// Enumerates every walk turning `x0` into `x` and sums the probability
    /// of each resulting tag sequence.
    fn brute_force(prior: &EditPrior, x: &[TokenId], x0: &[TokenId]) -> Vec<TagDist> {
        struct Walk<'a> {
            x: &'a [TokenId],
            x0: &'a [TokenId],
            t: TypeDist,
            pmf: Vec<f64>,
            tail: Vec<f64>,
            q: f64,
            post: HashMap<Vec<EditTag>, f64>,
        }
        impl Walk<'_> {
            fn span(&self, k: usize, rem: usize) -> f64 {
                if k < rem { self.pmf[k] } else { self.tail[rem] }
            }
            fn go(&mut self, i: usize, j: usize, ops: &mut Vec<EditOp>, p: f64) {
                let (n, m) = (self.x0.len(), self.x.len());
                if i == n {
                    if j == m {
                        self.finish(ops, p * (1.0 - self.t.insert));
                    } else {
                        ops.push(EditOp::insert(self.x[j..].to_vec()));
                        let l = m - j;
                        self.finish(ops, p * self.t.insert * self.pmf[l] * self.q.powi(l as i32));
                        ops.pop();
                    }
                    return;
                }
                if j < m && self.x[j] == self.x0[i] {
                    ops.push(EditOp::keep());
                    self.go(i + 1, j + 1, ops, p * self.t.keep);
                    ops.pop();
                }
                let rem = n - i;
                for k in 1..=rem {
                    let pl = self.span(k, rem);
                    if j + k <= m && self.x[j..j + k] != self.x0[i..i + k] {
                        ops.push(EditOp::replace(k, self.x[j..j + k].to_vec()));
                        self.go(i + k, j + k, ops, p * self.t.replace * pl * self.q.powi(k as i32));
                        ops.pop();
                    }
                    ops.push(EditOp::delete(k));
                    self.go(i + k, j, ops, p * self.t.delete * pl);
                    ops.pop();
                }
                for l in 1..=(m - j) {
                    ops.push(EditOp::insert(self.x[j..j + l].to_vec()));
                    self.go(i, j + l, ops, p * self.t.insert * self.pmf[l] * self.q.powi(l as i32));
                    ops.pop();
                }
            }
            fn finish(&mut self, ops: &[EditOp], p: f64) {
                let fwd = normalize_script(&EditScript::new(ops.to_vec()), self.x0).unwrap();
                assert_eq!(fwd.apply(self.x0).unwrap(), self.x);
                let inv = normalize_script(&invert_script(&fwd, self.x0).unwrap(), self.x).unwrap();
                let tags = TaggedEdits::from_script(&inv, self.x.len()).unwrap().tags;
                *self.post.entry(tags).or_insert(0.0) += p;
            }
        }
        let (pmf, tail) = prior.lengths();
        let mut w = Walk { x, x0, t: prior.type_dist, pmf, tail, q: 1.0 / prior.content_len as f64, post: HashMap::new() };
        w.go(0, 0, &mut Vec::new(), 1.0);
        let z: f64 = w.post.values().sum();
        let mut out = vec![[0.0; 4]; x.len() + 1];
        for (tags, p) in &w.post {
            for (pos, t) in tags.iter().enumerate() {
                out[pos][t.index()] += p / z;
            }
        }
        out
    }

    fn prior() -> EditPrior {
        EditPrior { type_dist: TypeDist::default(), length_dist: LengthDist::default(), content_len: 6 }
    }

    #[test]
    fn matches_brute_force_enumeration() {
        let cases: [(&[TokenId], &[TokenId]); 7] = [
            (&[5, 6, 7], &[5, 6, 7]),
            (&[5, 7], &[5, 6, 7]),
            (&[5, 9, 6, 7], &[5, 6, 7]),
            (&[8, 8], &[5, 6, 7]),
            (&[], &[5, 6]),
            (&[5, 6], &[]),
            (&[6, 5, 10, 7], &[5, 6, 7, 5]),
        ];
        for (x, x0) in cases {
            let fast = prior().tag_marginals(x, x0).unwrap();
            let slow = brute_force(&prior(), x, x0);
            for (a, b) in fast.iter().zip(&slow) {
                for k in 0..4 {
                    assert!((a[k] - b[k]).abs() < 1e-9, "{x:?} from {x0:?}: {fast:?} vs {slow:?}");
                }
            }
        }
    }

    #[test]
    fn uniform_lengths_and_sparse_types() {
        let p = EditPrior {
            type_dist: TypeDist { keep: 0.5, replace: 0.0, insert: 0.25, delete: 0.25 },
            length_dist: LengthDist::Uniform { max: 2 },
            content_len: 4,
        };
        let (x, x0): (&[TokenId], &[TokenId]) = (&[5, 8, 7], &[5, 6, 7]);
        let fast = p.tag_marginals(x, x0).unwrap();
        let slow = brute_force(&p, x, x0);
        for (a, b) in fast.iter().zip(&slow) {
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn long_sequences_stay_finite() {
        let x0: Vec<TokenId> = (0..120).map(|i| 5 + i % 40).collect();
        let x: Vec<TokenId> = (0..130).map(|i| 5 + (i * 7) % 40).collect();
        let p = EditPrior { content_len: 40, ..prior() };
        let m = p.tag_marginals(&x, &x0).unwrap();
        for d in m {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}
