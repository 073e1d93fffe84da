//! Small from-scratch neural scorers with hand-written backpropagation.
//!
//! Both networks are one-hidden-layer MLPs over embedded local context. The
//! generator adds a learned per-kind (INSERT / REPLACE) vector to its hidden
//! pre-activation. Source conditioning enters through the embedding of the
//! aligned (tagger) or pointed-at (generator) source token plus a handful of
//! alignment indicator inputs.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::checkpoint::{ByteReader, ByteWriter};
use super::features::{length_bucket, pointer_context, AlignKind, SourceAlignment, TokenAlignment};
use super::{GenQuery, Generator, StepLayout, TagDist, Tagger};
use crate::error::{Error, Result};
use crate::rng::{self, EngineRng};
use crate::script::EditTag;
use crate::vocab::{TokenId, BOS, END_OF_SPAN, EOS, PAD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeuralConfig {
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub learning_rate: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        Self { embed_dim: 16, hidden_dim: 64, learning_rate: 0.003, init_scale: 0.1, seed: 7 }
    }
}

impl NeuralConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.embed_dim > 0
            && self.hidden_dim > 0
            && self.learning_rate.is_finite()
            && self.learning_rate > 0.0
            && self.init_scale.is_finite()
            && self.init_scale >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("neural sizes must be positive and rates finite".into()))
        }
    }
}

/// One network input: embedded token slots, dense indicators, optional kind.
#[derive(Debug, Clone, PartialEq)]
pub struct NetInput {
    pub ids: Vec<TokenId>,
    pub dense: Vec<f64>,
    pub kind: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
struct Shape {
    vocab: usize,
    embed: usize,
    hidden: usize,
    slots: usize,
    dense: usize,
    kinds: usize,
    out: usize,
}

impl Shape {
    fn input(&self) -> usize {
        self.slots * self.embed + self.dense
    }
    fn w1(&self) -> usize {
        self.vocab * self.embed
    }
    fn b1(&self) -> usize {
        self.w1() + self.hidden * self.input()
    }
    fn kind(&self) -> usize {
        self.b1() + self.hidden
    }
    fn w2(&self) -> usize {
        self.kind() + self.kinds * self.hidden
    }
    fn b2(&self) -> usize {
        self.w2() + self.out * self.hidden
    }
    fn total(&self) -> usize {
        self.b2() + self.out
    }
}

/// MLP with embedding lookup, tanh hidden layer and softmax output.
#[derive(Debug, Clone)]
pub struct Mlp {
    shape: Shape,
    pub params: Vec<f64>,
}

struct Forward {
    input: Vec<f64>,
    hidden: Vec<f64>,
    probs: Vec<f64>,
}

impl Mlp {
    fn new(shape: Shape, init_scale: f64, rng: &mut EngineRng) -> Self {
        let mut params = vec![0.0; shape.total()];
        if init_scale > 0.0 {
            let normal = Normal::new(0.0, init_scale).expect("valid scale");
            for p in &mut params[..shape.b1()] {
                *p = normal.sample(rng);
            }
            for p in &mut params[shape.kind()..shape.b2()] {
                *p = normal.sample(rng);
            }
        }
        Self { shape, params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    fn forward(&self, inp: &NetInput) -> Forward {
        let s = &self.shape;
        let p = &self.params;
        let mut input = Vec::with_capacity(s.input());
        for &id in &inp.ids {
            let row = id as usize * s.embed;
            input.extend_from_slice(&p[row..row + s.embed]);
        }
        input.extend_from_slice(&inp.dense);
        let n_in = s.input();
        let mut hidden = vec![0.0; s.hidden];
        for (j, h) in hidden.iter_mut().enumerate() {
            let w = &p[s.w1() + j * n_in..s.w1() + (j + 1) * n_in];
            let mut z = p[s.b1() + j];
            for (a, b) in w.iter().zip(&input) {
                z += a * b;
            }
            if let Some(k) = inp.kind {
                z += p[s.kind() + k * s.hidden + j];
            }
            *h = z.tanh();
        }
        let mut logits = vec![0.0; s.out];
        for (o, l) in logits.iter_mut().enumerate() {
            let w = &p[s.w2() + o * s.hidden..s.w2() + (o + 1) * s.hidden];
            let mut z = p[s.b2() + o];
            for (a, b) in w.iter().zip(&hidden) {
                z += a * b;
            }
            *l = z;
        }
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for l in &mut logits {
            *l = (*l - max).exp();
            z += *l;
        }
        for l in &mut logits {
            *l /= z;
        }
        Forward { input, hidden, probs: logits }
    }

    pub fn probs(&self, inp: &NetInput) -> Vec<f64> {
        self.forward(inp).probs
    }

    /// Adds `weight * d(-log p[gold])/d(params)` into `grad`; returns the
    /// unweighted loss.
    fn accumulate(&self, inp: &NetInput, gold: usize, weight: f64, grad: &mut [f64]) -> f64 {
        let s = &self.shape;
        let p = &self.params;
        let f = self.forward(inp);
        let loss = -f.probs[gold].ln();
        let mut dlogits = f.probs;
        dlogits[gold] -= 1.0;
        let mut dh = vec![0.0; s.hidden];
        for (o, g) in dlogits.iter().enumerate() {
            let g = g * weight;
            grad[s.b2() + o] += g;
            let row = s.w2() + o * s.hidden;
            for j in 0..s.hidden {
                grad[row + j] += g * f.hidden[j];
                dh[j] += g * p[row + j];
            }
        }
        let n_in = s.input();
        let mut dinput = vec![0.0; n_in];
        for j in 0..s.hidden {
            let dz = dh[j] * (1.0 - f.hidden[j] * f.hidden[j]);
            grad[s.b1() + j] += dz;
            if let Some(k) = inp.kind {
                grad[s.kind() + k * s.hidden + j] += dz;
            }
            let row = s.w1() + j * n_in;
            for i in 0..n_in {
                grad[row + i] += dz * f.input[i];
                dinput[i] += dz * p[row + i];
            }
        }
        for (slot, &id) in inp.ids.iter().enumerate() {
            let row = id as usize * s.embed;
            for e in 0..s.embed {
                grad[row + e] += dinput[slot * s.embed + e];
            }
        }
        loss
    }
}

#[derive(Debug, Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t);
        let c2 = 1.0 - B2.powi(self.t);
        for i in 0..params.len() {
            if grad[i] == 0.0 && self.m[i] == 0.0 {
                continue;
            }
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grad[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + 1e-8);
        }
    }
}

const TAG_SLOTS: usize = 5;
const TAG_DENSE: usize = 2 * 4 + 1 + 7;
const GEN_SLOTS: usize = 6;
const GEN_DENSE: usize = 4;

fn align_dense(out: &mut Vec<f64>, a: Option<&TokenAlignment>, missing_before: bool) {
    let mut kind = [0.0; 3];
    if let Some(a) = a {
        kind[a.kind.index() as usize] = 1.0;
    }
    out.extend_from_slice(&kind);
    let missing = a.map_or(missing_before, |a| a.missing_after);
    out.push(f64::from(u8::from(missing)));
}

fn aligned_token(a: &TokenAlignment) -> TokenId {
    match a.kind {
        AlignKind::Extra => EOS,
        _ => a.source_token.unwrap_or(EOS),
    }
}

/// Network inputs for every tag position of `x` (gap first).
pub fn tagger_inputs(x: &[TokenId], source: Option<&[TokenId]>) -> Vec<NetInput> {
    let aligned = source.map(|src| {
        let rev: Vec<TokenId> = src.iter().rev().copied().collect();
        (SourceAlignment::new(x, src), SourceAlignment::new(x, &rev), length_bucket(x.len(), src.len()))
    });
    let mut out = Vec::with_capacity(x.len() + 1);
    for pos in 0..=x.len() {
        let (prev, cur, next) = if pos == 0 {
            (BOS, PAD, x.first().copied().unwrap_or(EOS))
        } else {
            let i = pos - 1;
            (if i == 0 { BOS } else { x[i - 1] }, x[i], x.get(i + 1).copied().unwrap_or(EOS))
        };
        let mut dense = Vec::with_capacity(TAG_DENSE);
        let (src_fwd, src_rev) = match &aligned {
            Some((fwd, rev, bucket)) => {
                let tok = |a: &SourceAlignment| if pos == 0 { None } else { Some(a.tokens[pos - 1]) };
                let (f, r) = (tok(fwd), tok(rev));
                align_dense(&mut dense, f.as_ref(), fwd.missing_before);
                align_dense(&mut dense, r.as_ref(), rev.missing_before);
                dense.push(f64::from(u8::from(pos == 0)));
                let mut len = [0.0; 7];
                len[*bucket as usize] = 1.0;
                dense.extend_from_slice(&len);
                (f.map_or(BOS, |a| aligned_token(&a)), r.map_or(BOS, |a| aligned_token(&a)))
            }
            None => {
                dense.resize(TAG_DENSE, 0.0);
                dense[8] = f64::from(u8::from(pos == 0));
                (PAD, PAD)
            }
        };
        out.push(NetInput { ids: vec![prev, cur, next, src_fwd, src_rev], dense, kind: None });
    }
    out
}

/// Network input for one generation query.
pub fn generator_input(q: &GenQuery<'_>) -> NetInput {
    let mut out: Vec<TokenId> = Vec::with_capacity(q.left.len() + q.prefix.len());
    out.extend_from_slice(q.left);
    out.extend_from_slice(q.prefix);
    let p1 = out.last().copied().unwrap_or(BOS);
    let p2 = if out.len() >= 2 { out[out.len() - 2] } else { BOS };
    let right1 = q.right.first().copied().unwrap_or(EOS);
    let rep = q.replaced.get(q.prefix.len()).copied().unwrap_or(PAD);
    let (s_fwd, b_fwd, s_rev, b_rev, has_source) = match q.source {
        Some(src) => {
            let reversed: Vec<TokenId> = src.iter().rev().copied().collect();
            let (s, b) = pointer_context(&out, q.right, src);
            let (rs, rb) = pointer_context(&out, q.right, &reversed);
            (s.unwrap_or(EOS), b, rs.unwrap_or(EOS), rb, true)
        }
        None => (PAD, false, PAD, false, false),
    };
    let flag = |b: bool| f64::from(u8::from(b));
    NetInput {
        ids: vec![p2, p1, right1, s_fwd, s_rev, rep],
        dense: vec![flag(b_fwd), flag(b_rev), flag(has_source), flag(q.prefix.is_empty())],
        kind: Some(usize::from(q.kind == EditTag::Replace)),
    }
}

#[derive(Debug, Clone)]
pub struct NeuralTagger {
    pub net: Mlp,
}

impl Tagger for NeuralTagger {
    fn vocab_size(&self) -> usize {
        self.net.shape.vocab
    }

    fn score_tags(&self, x: &[TokenId], source: Option<&[TokenId]>) -> Vec<TagDist> {
        tagger_inputs(x, source)
            .iter()
            .map(|inp| {
                let p = self.net.probs(inp);
                [p[0], p[1], p[2], p[3]]
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct NeuralGenerator {
    pub net: Mlp,
}

impl Generator for NeuralGenerator {
    fn vocab_size(&self) -> usize {
        self.net.shape.vocab
    }

    fn next_token_dist(&self, q: &GenQuery<'_>) -> Vec<f64> {
        self.net.probs(&generator_input(q))
    }
}

/// A supervised example for both networks: one reverse step.
#[derive(Debug, Clone, Copy)]
pub struct StepExample<'a> {
    pub x: &'a [TokenId],
    pub source: Option<&'a [TokenId]>,
    pub tags: &'a [EditTag],
    pub payloads: &'a [Vec<TokenId>],
}

/// Losses and parameter gradients of one example.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub tag_loss: f64,
    pub gen_loss: f64,
    pub events: usize,
    pub tagger: Vec<f64>,
    pub generator: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct NeuralModel {
    pub tagger: NeuralTagger,
    pub generator: NeuralGenerator,
    pub config: NeuralConfig,
    adam: (Adam, Adam),
}

impl NeuralModel {
    pub fn new(vocab_size: usize, config: NeuralConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(config.seed);
        let tag_shape = Shape {
            vocab: vocab_size,
            embed: config.embed_dim,
            hidden: config.hidden_dim,
            slots: TAG_SLOTS,
            dense: TAG_DENSE,
            kinds: 0,
            out: 4,
        };
        let gen_shape = Shape { slots: GEN_SLOTS, dense: GEN_DENSE, kinds: 2, out: vocab_size, ..tag_shape };
        let tagger = NeuralTagger { net: Mlp::new(tag_shape, config.init_scale, &mut rng) };
        let generator = NeuralGenerator { net: Mlp::new(gen_shape, config.init_scale, &mut rng) };
        let adam = (Adam::new(tagger.net.len()), Adam::new(generator.net.len()));
        Ok(Self { tagger, generator, config, adam })
    }

    /// Loss `tag_weight * tag CE + gen_weight * payload CE` of one example
    /// together with its analytic gradient.
    pub fn gradients(&self, ex: &StepExample<'_>, tag_weight: f64, gen_weight: f64) -> Result<Gradients> {
        let mut g = Gradients {
            tag_loss: 0.0,
            gen_loss: 0.0,
            events: 0,
            tagger: vec![0.0; self.tagger.net.len()],
            generator: vec![0.0; self.generator.net.len()],
        };
        let inputs = tagger_inputs(ex.x, ex.source);
        if inputs.len() != ex.tags.len() {
            return Err(Error::LengthMismatch { expected: inputs.len(), actual: ex.tags.len() });
        }
        for (inp, tag) in inputs.iter().zip(ex.tags) {
            g.tag_loss += self.tagger.net.accumulate(inp, tag.index(), tag_weight, &mut g.tagger);
        }
        let layout = StepLayout::new(ex.x, ex.tags)?;
        for (s, payload) in ex.payloads.iter().enumerate() {
            let left = layout.left(s, ex.payloads);
            for k in 0..=payload.len() {
                let token = payload.get(k).copied().unwrap_or(END_OF_SPAN);
                let inp = generator_input(&layout.query(s, &left, &payload[..k], ex.source));
                g.gen_loss += self.generator.net.accumulate(&inp, token as usize, gen_weight, &mut g.generator);
                g.events += 1;
            }
        }
        Ok(g)
    }

    /// Weighted loss only, recomputed from scratch (used by finite differences).
    pub fn loss(&self, ex: &StepExample<'_>, tag_weight: f64, gen_weight: f64) -> Result<f64> {
        let g = self.gradients(ex, tag_weight, gen_weight)?;
        Ok(tag_weight * g.tag_loss + gen_weight * g.gen_loss)
    }

    /// Central finite difference of [`NeuralModel::loss`] in one parameter
    /// (`generator` picks the network). The parameter is restored afterwards.
    pub fn numeric_gradient(
        &mut self,
        ex: &StepExample<'_>,
        generator: bool,
        index: usize,
        eps: f64,
        weights: (f64, f64),
    ) -> Result<f64> {
        fn param(m: &mut NeuralModel, generator: bool, index: usize) -> &mut f64 {
            if generator { &mut m.generator.net.params[index] } else { &mut m.tagger.net.params[index] }
        }
        let orig = *param(self, generator, index);
        *param(self, generator, index) = orig + eps;
        let up = self.loss(ex, weights.0, weights.1);
        *param(self, generator, index) = orig - eps;
        let down = self.loss(ex, weights.0, weights.1);
        *param(self, generator, index) = orig;
        Ok((up? - down?) / (2.0 * eps))
    }

    pub fn apply(&mut self, g: &Gradients) {
        let lr = self.config.learning_rate;
        self.adam.0.step(&mut self.tagger.net.params, &g.tagger, lr);
        self.adam.1.step(&mut self.generator.net.params, &g.generator, lr);
    }

    pub(crate) fn write(&self, w: &mut ByteWriter) {
        w.u64(self.tagger.net.shape.vocab as u64);
        w.f64s(&self.tagger.net.params);
        w.f64s(&self.generator.net.params);
    }

    pub(crate) fn read(r: &mut ByteReader<'_>, config: NeuralConfig) -> Result<Self> {
        let vocab = r.usize()?;
        let mut model = Self::new(vocab, NeuralConfig { init_scale: 0.0, ..config })?;
        model.config = config;
        let tagger = r.f64s()?;
        let generator = r.f64s()?;
        if tagger.len() != model.tagger.net.len() || generator.len() != model.generator.net.len() {
            return Err(Error::Checkpoint("neural parameter count disagrees with its configuration".into()));
        }
        model.tagger.net.params = tagger;
        model.generator.net.params = generator;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn outputs_are_normalized() {
        let m = NeuralModel::new(12, NeuralConfig::default()).unwrap();
        let x = [5, 6, 7];
        for d in m.tagger.score_tags(&x, Some(&[5, 7])) {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let q = GenQuery { kind: EditTag::Replace, left: &[5], prefix: &[], right: &[7], replaced: &[6], source: None };
        let d = m.generator.next_token_dist(&q);
        assert_eq!(d.len(), 12);
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn input_widths_are_fixed() {
        for src in [None, Some(&[5u32, 6][..])] {
            for inp in tagger_inputs(&[5, 9], src) {
                assert_eq!(inp.ids.len(), TAG_SLOTS);
                assert_eq!(inp.dense.len(), TAG_DENSE);
            }
        }
    }
}
