//! Feature-based scorers: a log-linear tagger over sparse hashed features and
//! an interpolated count-based span generator.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::checkpoint::{ByteReader, ByteWriter};
use super::posterior::{read_prior, write_prior, EditPrior};
use super::features::{length_bucket, pointer_context, AlignKind, SourceAlignment, TokenAlignment, MATCHING_COSTS};
use super::{GenQuery, Generator, StepLayout, TagDist, Tagger};
use crate::error::Result;
use crate::rng::splitmix64;
use crate::script::EditTag;
use crate::vocab::{TokenId, BOS, END_OF_SPAN, EOS, RESERVED_COUNT};

const NONE: u64 = u64::MAX;

fn key(parts: &[u64]) -> u64 {
    let mut h = 0x243f_6a88_85a3_08d3u64;
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

fn opt(t: Option<TokenId>) -> u64 {
    t.map_or(NONE, u64::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogLinearConfig {
    /// AdaGrad base step size for the tagger.
    pub learning_rate: f64,
    /// Pseudo-count pulling each generator component toward uniform.
    pub smoothing: f64,
    /// EM passes fitting the generator's interpolation weights.
    pub em_iterations: usize,
}

impl Default for LogLinearConfig {
    fn default() -> Self {
        Self { learning_rate: 0.2, smoothing: 1.0, em_iterations: 25 }
    }
}

fn align_features(out: &mut Vec<u64>, base: u64, a: &TokenAlignment, prev: Option<&TokenAlignment>, next: Option<&TokenAlignment>, tok: TokenId, bucket: u64) {
    let kind = a.kind.index();
    let missing = u64::from(a.missing_after);
    let side = |n: Option<&TokenAlignment>| n.map_or(NONE, |n| n.kind.index() * 2 + u64::from(n.missing_after));
    out.push(key(&[base, kind, missing]));
    out.push(key(&[base + 1, kind, missing, u64::from(tok)]));
    out.push(key(&[base + 2, u64::from(tok), opt(a.source_token)]));
    out.push(key(&[base + 3, kind, missing, bucket]));
    out.push(key(&[base + 4, kind, missing, side(prev), side(next)]));
    if a.kind == AlignKind::Match {
        out.push(key(&[base + 5, u64::from(tok), missing]));
    }
}

fn posterior_features(out: &mut [Vec<u64>], base: u64, marginals: Option<Vec<TagDist>>) {
    let Some(marginals) = marginals else {
        return;
    };
    for (f, d) in out.iter_mut().zip(&marginals) {
        for (k, p) in d.iter().enumerate() {
            f.push(key(&[base, k as u64, (p * 10.0).min(9.0) as u64]));
        }
        let best = (0..4).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(0);
        f.push(key(&[base + 1, best as u64, (d[best] * 4.0).min(3.0) as u64]));
    }
}

/// Active feature keys for every position of `x` (gap first). With a prior,
/// the posterior tags of one corruption step from the source (and from the
/// reversed source) are added.
pub fn tag_features(x: &[TokenId], source: Option<&[TokenId]>, prior: Option<&EditPrior>) -> Vec<Vec<u64>> {
    let aligned = source.map(|src| {
        let rev: Vec<TokenId> = src.iter().rev().copied().collect();
        (SourceAlignment::new(x, src), SourceAlignment::new(x, &rev), length_bucket(x.len(), src.len()))
    });
    let matched = source.map(|src| SourceAlignment::with_costs(x, src, &MATCHING_COSTS));
    let mut out = Vec::with_capacity(x.len() + 1);
    let first = x.first().copied().unwrap_or(EOS);
    let mut gap = vec![key(&[1]), key(&[2, u64::from(first)])];
    if let Some((fwd, rev, bucket)) = &aligned {
        gap.push(key(&[3, u64::from(fwd.missing_before), *bucket]));
        gap.push(key(&[4, u64::from(rev.missing_before), *bucket]));
        gap.push(key(&[5, u64::from(fwd.missing_before), opt(fwd.tokens.first().map(|t| t.kind.index() as u32))]));
    }
    if let (Some((fwd, ..)), Some(m)) = (&aligned, &matched) {
        gap.push(key(&[6, u64::from(fwd.missing_before), u64::from(m.missing_before)]));
    }
    out.push(gap);
    for (i, &tok) in x.iter().enumerate() {
        let prev = if i == 0 { BOS } else { x[i - 1] };
        let next = x.get(i + 1).copied().unwrap_or(EOS);
        let t = u64::from(tok);
        let mut f = vec![
            key(&[10]),
            key(&[11, t]),
            key(&[12, u64::from(prev)]),
            key(&[13, u64::from(next)]),
            key(&[14, u64::from(prev), t]),
            key(&[15, t, u64::from(next)]),
        ];
        if let Some((fwd, rev, bucket)) = &aligned {
            for (base, a) in [(100, fwd), (200, rev)] {
                let prev = i.checked_sub(1).map(|p| &a.tokens[p]);
                align_features(&mut f, base, &a.tokens[i], prev, a.tokens.get(i + 1), tok, *bucket);
            }
            if let Some(m) = &matched {
                let prev = i.checked_sub(1).map(|p| &m.tokens[p]);
                align_features(&mut f, 300, &m.tokens[i], prev, m.tokens.get(i + 1), tok, *bucket);
                let (u, l) = (&fwd.tokens[i], &m.tokens[i]);
                let both = [u.kind.index(), u64::from(u.missing_after), l.kind.index(), u64::from(l.missing_after)];
                f.push(key(&[400, both[0], both[1], both[2], both[3]]));
            }
        }
        out.push(f);
    }
    if let (Some(src), Some(prior)) = (source, prior) {
        let rev: Vec<TokenId> = src.iter().rev().copied().collect();
        posterior_features(&mut out, 500, prior.tag_marginals(x, src));
        posterior_features(&mut out, 510, prior.tag_marginals(x, &rev));
    }
    out
}

fn softmax4(logits: [f64; 4]) -> TagDist {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p = [0.0; 4];
    let mut z = 0.0;
    for k in 0..4 {
        p[k] = (logits[k] - max).exp();
        z += p[k];
    }
    for v in &mut p {
        *v /= z;
    }
    p
}

#[derive(Debug, Clone, Default)]
pub struct LogLinearTagger {
    vocab_size: usize,
    prior: Option<EditPrior>,
    weights: HashMap<u64, [f64; 4]>,
    squared: HashMap<u64, [f64; 4]>,
}

impl LogLinearTagger {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, ..Self::default() }
    }

    /// Corruption parameters used for posterior features.
    pub fn set_prior(&mut self, prior: Option<EditPrior>) {
        self.prior = prior;
    }

    pub fn prior(&self) -> Option<&EditPrior> {
        self.prior.as_ref()
    }

    fn dist(&self, feats: &[u64]) -> TagDist {
        let mut logits = [0.0; 4];
        for f in feats {
            if let Some(w) = self.weights.get(f) {
                for k in 0..4 {
                    logits[k] += w[k];
                }
            }
        }
        softmax4(logits)
    }

    /// One AdaGrad step on the tag cross-entropy of a single sequence;
    /// returns the loss before the update.
    pub fn update(&mut self, x: &[TokenId], source: Option<&[TokenId]>, gold: &[EditTag], lr: f64) -> f64 {
        let feats = tag_features(x, source, self.prior.as_ref());
        let mut loss = 0.0;
        for (fs, tag) in feats.iter().zip(gold) {
            let p = self.dist(fs);
            loss -= p[tag.index()].ln();
            let mut g = p;
            g[tag.index()] -= 1.0;
            for f in fs {
                let sq = self.squared.entry(*f).or_insert([0.0; 4]);
                let w = self.weights.entry(*f).or_insert([0.0; 4]);
                for k in 0..4 {
                    sq[k] += g[k] * g[k];
                    if sq[k] > 0.0 {
                        w[k] -= lr * g[k] / sq[k].sqrt();
                    }
                }
            }
        }
        loss
    }

    pub fn feature_count(&self) -> usize {
        self.weights.len()
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        let mut keys: Vec<&u64> = self.weights.keys().collect();
        keys.sort_unstable();
        w.u64(self.vocab_size as u64);
        write_prior(w, self.prior.as_ref());
        w.u64(keys.len() as u64);
        for k in keys {
            w.u64(*k);
            for v in self.weights[k] {
                w.f64(v);
            }
        }
    }

    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let vocab_size = r.usize()?;
        let prior = read_prior(r)?;
        let n = r.usize()?;
        let mut weights = HashMap::with_capacity(n);
        for _ in 0..n {
            let k = r.u64()?;
            let mut v = [0.0; 4];
            for x in &mut v {
                *x = r.f64()?;
            }
            weights.insert(k, v);
        }
        Ok(Self { vocab_size, prior, weights, squared: HashMap::new() })
    }
}

impl Tagger for LogLinearTagger {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn score_tags(&self, x: &[TokenId], source: Option<&[TokenId]>) -> Vec<TagDist> {
        tag_features(x, source, self.prior.as_ref()).iter().map(|f| self.dist(f)).collect()
    }
}

/// Number of count-based components in the generator's mixture; a uniform
/// floor is added on top.
pub const COMPONENTS: usize = 7;

/// Context keys for each mixture component, most specific first.
pub fn gen_contexts(q: &GenQuery<'_>) -> [u64; COMPONENTS] {
    let kind = q.kind.index() as u64;
    let mut out: Vec<TokenId> = Vec::with_capacity(q.left.len() + q.prefix.len());
    out.extend_from_slice(q.left);
    out.extend_from_slice(q.prefix);
    let prev = out.last().copied().unwrap_or(BOS);
    let right1 = q.right.first().copied().unwrap_or(EOS);
    let rep = q.replaced.get(q.prefix.len()).copied();
    let (fwd, rev) = match q.source {
        Some(src) => {
            let reversed: Vec<TokenId> = src.iter().rev().copied().collect();
            let (s, b) = pointer_context(&out, q.right, src);
            let (rs, rb) = pointer_context(&out, q.right, &reversed);
            ((opt(s), u64::from(b)), (opt(rs), u64::from(rb)))
        }
        None => ((NONE - 1, 0), (NONE - 1, 0)),
    };
    [
        key(&[1, kind, fwd.0, fwd.1, opt(rep)]),
        key(&[2, kind, fwd.0, fwd.1]),
        key(&[3, kind, rev.0, rev.1, opt(rep)]),
        key(&[4, kind, rev.0, rev.1]),
        key(&[5, kind, u64::from(prev), u64::from(right1)]),
        key(&[6, kind, u64::from(prev)]),
        key(&[7, kind]),
    ]
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Counts {
    total: u64,
    by_token: HashMap<TokenId, u64>,
}

/// Linear interpolation of smoothed count tables with weights fitted by
/// leave-one-out EM; one weight vector per span kind.
#[derive(Debug, Clone)]
pub struct InterpolatedGenerator {
    vocab_size: usize,
    smoothing: f64,
    tables: Vec<HashMap<u64, Counts>>,
    /// `[insert, replace]` weights over the components plus the uniform floor.
    weights: [[f64; COMPONENTS + 1]; 2],
    events: Vec<(usize, [u64; COMPONENTS], TokenId)>,
}

fn kind_slot(kind: EditTag) -> usize {
    usize::from(kind == EditTag::Replace)
}

impl InterpolatedGenerator {
    pub fn new(vocab_size: usize, smoothing: f64) -> Self {
        Self {
            vocab_size,
            smoothing,
            tables: vec![HashMap::new(); COMPONENTS],
            weights: [[1.0 / (COMPONENTS + 1) as f64; COMPONENTS + 1]; 2],
            events: Vec::new(),
        }
    }

    fn support(&self) -> f64 {
        (self.vocab_size - RESERVED_COUNT + 1) as f64
    }

    fn in_support(&self, t: TokenId) -> bool {
        t == END_OF_SPAN || (t as usize >= RESERVED_COUNT && (t as usize) < self.vocab_size)
    }

    fn component_probs(&self, ctx: &[u64; COMPONENTS], token: TokenId, held_out: bool) -> [f64; COMPONENTS + 1] {
        let u = 1.0 / self.support();
        let mut p = [u; COMPONENTS + 1];
        let drop = u64::from(held_out);
        for (k, table) in self.tables.iter().enumerate() {
            if let Some(c) = table.get(&ctx[k]) {
                let own = c.by_token.get(&token).copied().unwrap_or(0);
                let total = (c.total - drop) as f64;
                p[k] = ((own - drop.min(own)) as f64 + self.smoothing * u) / (total + self.smoothing);
            }
        }
        p
    }

    fn mix(weights: &[f64; COMPONENTS + 1], p: &[f64; COMPONENTS + 1]) -> f64 {
        let mut s = 0.0;
        for k in 0..=COMPONENTS {
            s += weights[k] * p[k];
        }
        s
    }

    /// Adds one observed event; returns its negative log-probability under
    /// the model as it stood before the event.
    pub fn observe(&mut self, q: &GenQuery<'_>, token: TokenId) -> f64 {
        let ctx = gen_contexts(q);
        let slot = kind_slot(q.kind);
        let nll = if self.in_support(token) {
            -Self::mix(&self.weights[slot], &self.component_probs(&ctx, token, false)).ln()
        } else {
            f64::INFINITY
        };
        for (k, table) in self.tables.iter_mut().enumerate() {
            let c = table.entry(ctx[k]).or_default();
            c.total += 1;
            *c.by_token.entry(token).or_insert(0) += 1;
        }
        self.events.push((slot, ctx, token));
        nll
    }

    /// Fits the interpolation weights by EM on leave-one-out probabilities
    /// of every observed event.
    pub fn fit_weights(&mut self, iterations: usize) {
        let probs: Vec<(usize, [f64; COMPONENTS + 1])> =
            self.events.iter().map(|(slot, ctx, tok)| (*slot, self.component_probs(ctx, *tok, true))).collect();
        for slot in 0..2 {
            if !probs.iter().any(|(s, _)| *s == slot) {
                continue;
            }
            for _ in 0..iterations {
                let w = self.weights[slot];
                let mut acc = [0.0; COMPONENTS + 1];
                let mut n = 0.0;
                for (_, p) in probs.iter().filter(|(s, _)| *s == slot) {
                    let z = Self::mix(&w, p);
                    for k in 0..=COMPONENTS {
                        acc[k] += w[k] * p[k] / z;
                    }
                    n += 1.0;
                }
                for k in 0..=COMPONENTS {
                    self.weights[slot][k] = acc[k] / n;
                }
            }
        }
    }

    /// Drops the per-event log kept for weight fitting.
    pub fn finish(&mut self) {
        self.events = Vec::new();
    }

    pub fn weights(&self, kind: EditTag) -> &[f64; COMPONENTS + 1] {
        &self.weights[kind_slot(kind)]
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.u64(self.vocab_size as u64);
        w.f64(self.smoothing);
        for row in &self.weights {
            for v in row {
                w.f64(*v);
            }
        }
        for table in &self.tables {
            let mut keys: Vec<&u64> = table.keys().collect();
            keys.sort_unstable();
            w.u64(keys.len() as u64);
            for k in keys {
                let c = &table[k];
                w.u64(*k);
                w.u64(c.total);
                let mut toks: Vec<(&TokenId, &u64)> = c.by_token.iter().collect();
                toks.sort_unstable();
                w.u64(toks.len() as u64);
                for (t, n) in toks {
                    w.u32(*t);
                    w.u64(*n);
                }
            }
        }
    }

    pub(crate) fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let vocab_size = r.usize()?;
        let smoothing = r.f64()?;
        let mut g = Self::new(vocab_size, smoothing);
        for row in &mut g.weights {
            for v in row.iter_mut() {
                *v = r.f64()?;
            }
        }
        for table in &mut g.tables {
            let n = r.usize()?;
            for _ in 0..n {
                let k = r.u64()?;
                let total = r.u64()?;
                let m = r.usize()?;
                let mut by_token = HashMap::with_capacity(m);
                for _ in 0..m {
                    let t = r.u32()?;
                    by_token.insert(t, r.u64()?);
                }
                table.insert(k, Counts { total, by_token });
            }
        }
        Ok(g)
    }
}

impl Generator for InterpolatedGenerator {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_token_dist(&self, q: &GenQuery<'_>) -> Vec<f64> {
        let ctx = gen_contexts(q);
        let w = &self.weights[kind_slot(q.kind)];
        let u = 1.0 / self.support();
        let mut floor = w[COMPONENTS] * u;
        let mut found: Vec<(f64, &Counts)> = Vec::with_capacity(COMPONENTS);
        for (k, table) in self.tables.iter().enumerate() {
            match table.get(&ctx[k]) {
                Some(c) => {
                    let denom = c.total as f64 + self.smoothing;
                    floor += w[k] * self.smoothing * u / denom;
                    found.push((w[k] / denom, c));
                }
                None => floor += w[k] * u,
            }
        }
        let mut dist = vec![0.0; self.vocab_size];
        dist[END_OF_SPAN as usize] = floor;
        for d in dist.iter_mut().skip(RESERVED_COUNT) {
            *d = floor;
        }
        for (scale, c) in found {
            for (&t, &n) in &c.by_token {
                dist[t as usize] += scale * n as f64;
            }
        }
        dist
    }
}

/// Feature-based tagger and generator trained together.
#[derive(Debug, Clone)]
pub struct LogLinearModel {
    pub tagger: LogLinearTagger,
    pub generator: InterpolatedGenerator,
    pub config: LogLinearConfig,
}

impl LogLinearModel {
    pub fn new(vocab_size: usize, config: LogLinearConfig) -> Self {
        Self {
            tagger: LogLinearTagger::new(vocab_size),
            generator: InterpolatedGenerator::new(vocab_size, config.smoothing),
            config,
        }
    }

    /// Trains on one example; returns `(tag loss, generation loss, events)`.
    pub fn update(
        &mut self,
        x: &[TokenId],
        source: Option<&[TokenId]>,
        tags: &[EditTag],
        payloads: &[Vec<TokenId>],
    ) -> Result<(f64, f64, usize)> {
        let tag_loss = self.tagger.update(x, source, tags, self.config.learning_rate);
        let layout = StepLayout::new(x, tags)?;
        let mut gen_loss = 0.0;
        let mut events = 0;
        for (s, payload) in payloads.iter().enumerate() {
            let left = layout.left(s, payloads);
            for k in 0..=payload.len() {
                let token = payload.get(k).copied().unwrap_or(END_OF_SPAN);
                gen_loss += self.generator.observe(&layout.query(s, &left, &payload[..k], source), token);
                events += 1;
            }
        }
        Ok((tag_loss, gen_loss, events))
    }

    pub fn finish(&mut self) {
        self.generator.fit_weights(self.config.em_iterations);
        self.generator.finish();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn query<'a>(left: &'a [TokenId], right: &'a [TokenId], src: &'a [TokenId]) -> GenQuery<'a> {
        GenQuery { kind: EditTag::Insert, left, prefix: &[], right, replaced: &[], source: Some(src) }
    }

    #[test]
    fn generator_distribution_is_normalized() {
        let mut g = InterpolatedGenerator::new(12, 1.0);
        let src = [5, 6, 7];
        g.observe(&query(&[5], &[7], &src), 6);
        g.observe(&query(&[5], &[7], &src), 6);
        g.observe(&query(&[5, 6], &[7], &src), END_OF_SPAN);
        g.fit_weights(5);
        for q in [query(&[5], &[7], &src), query(&[], &[], &src), query(&[9, 9], &[5], &src)] {
            let d = g.next_token_dist(&q);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(d[END_OF_SPAN as usize] > 0.0);
            assert_eq!(d[0], 0.0);
        }
        let d = g.next_token_dist(&query(&[5], &[7], &src));
        let best = (0..d.len()).max_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap()).unwrap();
        assert_eq!(best, 6);
    }

    #[test]
    fn tagger_learns_a_constant_tag() {
        let mut t = LogLinearTagger::new(10);
        let x = [5, 6];
        let gold = [EditTag::Keep, EditTag::Delete, EditTag::Keep];
        let first = t.update(&x, None, &gold, 0.5);
        let mut last = first;
        for _ in 0..50 {
            last = t.update(&x, None, &gold, 0.5);
        }
        assert!(last < first * 0.1);
        let d = t.score_tags(&x, None);
        assert_eq!(d.len(), 3);
        assert!(d[1][EditTag::Delete.index()] > 0.9);
        for p in d {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn leave_one_out_em_prefers_informative_component() {
        let mut g = InterpolatedGenerator::new(20, 1.0);
        for a in 5..15u32 {
            let src = [a];
            for _ in 0..5 {
                g.observe(&query(&[], &[], &src), a);
            }
        }
        g.fit_weights(30);
        let w = g.weights(EditTag::Insert);
        let pointer_mass: f64 = w[..4].iter().sum();
        assert!(pointer_mass > 0.8, "{w:?}");
    }
}
