//! Forward process: stochastic corruption of token sequences with sampled
//! edit operations.
//!
//! A step walks the sequence left to right. At each position it draws an
//! edit type; non-KEEP types also draw a span length. REPLACE overwrites the
//! span with distractors, INSERT injects distractors in front of the
//! position, DELETE drops the span. One extra draw at the end of the
//! sequence may append distractors. The inverse of every step is derived
//! structurally from the forward script and is the denoising supervision.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::chain::RevisionChain;
use crate::error::{Error, Result};
use crate::rng::EngineRng;
use crate::script::{invert_script, normalize_script, EditOp, EditScript, EditTag, TaggedEdits};
use crate::vocab::{TokenId, Vocab};

/// Resampling budget when a step would empty the sequence while KEEP has
/// zero probability.
pub const MAX_EMPTY_RETRIES: usize = 16;

/// Categorical distribution over edit types.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeDist {
    pub keep: f64,
    pub replace: f64,
    pub insert: f64,
    pub delete: f64,
}

impl Default for TypeDist {
    fn default() -> Self {
        Self { keep: 0.6, replace: 0.2, insert: 0.1, delete: 0.1 }
    }
}

impl TypeDist {
    pub fn only_keep() -> Self {
        Self { keep: 1.0, replace: 0.0, insert: 0.0, delete: 0.0 }
    }

    pub fn prob(&self, tag: EditTag) -> f64 {
        match tag {
            EditTag::Keep => self.keep,
            EditTag::Replace => self.replace,
            EditTag::Insert => self.insert,
            EditTag::Delete => self.delete,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.keep, self.replace, self.insert, self.delete];
        if all.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidConfig("edit type probabilities must be non-negative".into()));
        }
        let total: f64 = all.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("edit type probabilities sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Distribution over edit span lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LengthDist {
    /// Poisson(lambda) with zero draws rejected.
    Poisson { lambda: f64 },
    /// Uniform over 1..=max.
    Uniform { max: usize },
}

impl Default for LengthDist {
    fn default() -> Self {
        LengthDist::Poisson { lambda: 3.0 }
    }
}

impl LengthDist {
    /// Mean of the accepted (>= 1) lengths.
    pub fn mean(&self) -> f64 {
        match *self {
            LengthDist::Poisson { lambda } => lambda / (1.0 - (-lambda).exp()),
            LengthDist::Uniform { max } => (1 + max) as f64 / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistractorSource {
    #[default]
    Uniform,
    /// Empirical unigram frequencies of the training targets.
    Unigram,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorruptionMode {
    /// Left-to-right walk with possibly many edits per step.
    #[default]
    Walk,
    /// Exactly one non-KEEP edit per step.
    Single,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    #[serde(default)]
    pub type_dist: TypeDist,
    #[serde(default)]
    pub length_dist: LengthDist,
    #[serde(default)]
    pub distractors: DistractorSource,
    /// Largest number of corruption steps (T_max).
    pub max_steps: usize,
    #[serde(default)]
    pub mode: CorruptionMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            type_dist: TypeDist::default(),
            length_dist: LengthDist::default(),
            distractors: DistractorSource::Uniform,
            max_steps: 12,
            mode: CorruptionMode::Walk,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    pub fn validate(&self) -> Result<()> {
        self.type_dist.validate()?;
        match self.length_dist {
            LengthDist::Poisson { lambda } if !(lambda.is_finite() && lambda > 0.0) => {
                return Err(Error::InvalidConfig(format!("poisson lambda must be positive, got {lambda}")))
            }
            LengthDist::Uniform { max: 0 } => {
                return Err(Error::InvalidConfig("uniform length max must be at least 1".into()))
            }
            _ => {}
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One sampled edit: its type and, for non-KEEP types, the drawn length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EditDraw {
    pub tag: EditTag,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionStepRecord {
    pub before: Vec<TokenId>,
    pub after: Vec<TokenId>,
    pub forward_script: EditScript,
    /// Rewrites `after` back into `before`.
    pub inverse_script: EditScript,
    /// Every draw made by the step, in order.
    pub draws: Vec<EditDraw>,
}

/// Supervision for one denoising step.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    /// The corrupted revision x_t.
    pub input: Vec<TokenId>,
    /// The revision x_{t-1} that the gold edits recover.
    pub previous: Vec<TokenId>,
    /// Inverse script of the last corruption step.
    pub script: EditScript,
    /// Tag per position, leading gap first.
    pub tags: Vec<EditTag>,
    /// Payload per generated span, left to right.
    pub payloads: Vec<Vec<TokenId>>,
    /// Number of corruption steps applied.
    pub steps: usize,
}

#[derive(Debug, Clone)]
enum Distractors {
    Uniform { lo: TokenId, hi: TokenId },
    Weighted { ids: Vec<TokenId>, index: WeightedIndex<f64> },
}

/// Samples corruption steps under one configuration.
#[derive(Debug, Clone)]
pub struct Corruptor {
    cfg: CorruptionConfig,
    types: Option<WeightedIndex<f64>>,
    edit_types: Option<WeightedIndex<f64>>,
    distractors: Distractors,
}

// Column order for the type samplers.
const TYPE_ORDER: [EditTag; 4] = [EditTag::Keep, EditTag::Replace, EditTag::Insert, EditTag::Delete];

impl Corruptor {
    /// Uniform distractors over the content vocabulary.
    pub fn new(cfg: CorruptionConfig, vocab: &Vocab) -> Result<Self> {
        if cfg.distractors == DistractorSource::Unigram {
            return Err(Error::InvalidConfig("unigram distractors need corpus counts".into()));
        }
        Self::build(cfg, vocab, None)
    }

    /// Distractors follow `counts[id]`; uniform configs ignore the counts.
    pub fn with_counts(cfg: CorruptionConfig, vocab: &Vocab, counts: &[u64]) -> Result<Self> {
        Self::build(cfg, vocab, Some(counts))
    }

    fn build(cfg: CorruptionConfig, vocab: &Vocab, counts: Option<&[u64]>) -> Result<Self> {
        cfg.validate()?;
        if vocab.content_len() == 0 {
            return Err(Error::InvalidVocab("no content tokens to draw distractors from".into()));
        }
        let weights: Vec<f64> = TYPE_ORDER.iter().map(|&t| cfg.type_dist.prob(t)).collect();
        let types = WeightedIndex::new(&weights).ok();
        let edit_weights: Vec<f64> = TYPE_ORDER[1..].iter().map(|&t| cfg.type_dist.prob(t)).collect();
        let edit_types = WeightedIndex::new(&edit_weights).ok();
        let range = vocab.content_ids();
        let distractors = match (cfg.distractors, counts) {
            (DistractorSource::Unigram, Some(counts)) => {
                let ids: Vec<TokenId> = range.clone().filter(|&id| counts.get(id as usize).is_some_and(|&c| c > 0)).collect();
                let w: Vec<f64> = ids.iter().map(|&id| counts[id as usize] as f64).collect();
                let index = WeightedIndex::new(&w)
                    .map_err(|_| Error::InvalidConfig("unigram counts are all zero".into()))?;
                Distractors::Weighted { ids, index }
            }
            (DistractorSource::Unigram, None) => {
                return Err(Error::InvalidConfig("unigram distractors need corpus counts".into()))
            }
            (DistractorSource::Uniform, _) => Distractors::Uniform { lo: range.start, hi: range.end },
        };
        Ok(Self { cfg, types, edit_types, distractors })
    }

    pub fn config(&self) -> &CorruptionConfig {
        &self.cfg
    }

    fn sample_type(&self, rng: &mut EngineRng) -> EditTag {
        match &self.types {
            Some(w) => TYPE_ORDER[w.sample(rng)],
            None => EditTag::Keep,
        }
    }

    /// Draws a span length; zero-length Poisson draws are rejected.
    pub fn sample_length(&self, rng: &mut EngineRng) -> usize {
        match self.cfg.length_dist {
            LengthDist::Poisson { lambda } => {
                let poisson = Poisson::new(lambda).expect("validated lambda");
                loop {
                    let k: f64 = poisson.sample(rng);
                    if k >= 1.0 {
                        return k as usize;
                    }
                }
            }
            LengthDist::Uniform { max } => rng.gen_range(1..=max),
        }
    }

    fn distractor(&self, rng: &mut EngineRng) -> TokenId {
        match &self.distractors {
            Distractors::Uniform { lo, hi } => rng.gen_range(*lo..*hi),
            Distractors::Weighted { ids, index } => ids[index.sample(rng)],
        }
    }

    fn distractors(&self, n: usize, rng: &mut EngineRng) -> Vec<TokenId> {
        (0..n).map(|_| self.distractor(rng)).collect()
    }

    fn walk(&self, x: &[TokenId], rng: &mut EngineRng, draws: &mut Vec<EditDraw>) -> EditScript {
        let n = x.len();
        let mut ops = Vec::new();
        let mut i = 0;
        loop {
            let tag = self.sample_type(rng);
            let length = if tag == EditTag::Keep { 0 } else { self.sample_length(rng) };
            draws.push(EditDraw { tag, length });
            if i == n {
                if tag == EditTag::Insert {
                    ops.push(EditOp::insert(self.distractors(length, rng)));
                }
                break;
            }
            match tag {
                EditTag::Keep => {
                    ops.push(EditOp::keep());
                    i += 1;
                }
                EditTag::Replace => {
                    let k = length.min(n - i);
                    ops.push(EditOp::replace(k, self.distractors(k, rng)));
                    i += k;
                }
                EditTag::Delete => {
                    let k = length.min(n - i);
                    ops.push(EditOp::delete(k));
                    i += k;
                }
                EditTag::Insert => ops.push(EditOp::insert(self.distractors(length, rng))),
            }
        }
        EditScript::new(ops)
    }

    fn single(&self, x: &[TokenId], rng: &mut EngineRng, draws: &mut Vec<EditDraw>) -> EditScript {
        let n = x.len();
        let Some(edit_types) = &self.edit_types else {
            return EditScript::all_keep(n);
        };
        let mut tag = TYPE_ORDER[1 + edit_types.sample(rng)];
        if n == 0 {
            if self.cfg.type_dist.insert == 0.0 {
                return EditScript::default();
            }
            tag = EditTag::Insert;
        }
        let length = self.sample_length(rng);
        draws.push(EditDraw { tag, length });
        let mut ops = Vec::new();
        if tag == EditTag::Insert {
            let gap = rng.gen_range(0..=n);
            ops.extend(std::iter::repeat_with(EditOp::keep).take(gap));
            ops.push(EditOp::insert(self.distractors(length, rng)));
            ops.extend(std::iter::repeat_with(EditOp::keep).take(n - gap));
        } else {
            let start = rng.gen_range(0..n);
            let k = length.min(n - start);
            ops.extend(std::iter::repeat_with(EditOp::keep).take(start));
            ops.push(if tag == EditTag::Delete {
                EditOp::delete(k)
            } else {
                EditOp::replace(k, self.distractors(k, rng))
            });
            ops.extend(std::iter::repeat_with(EditOp::keep).take(n - start - k));
        }
        EditScript::new(ops)
    }

    /// One forward corruption step `x -> after`.
    pub fn corrupt_step(&self, x: &[TokenId], rng: &mut EngineRng) -> Result<CorruptionStepRecord> {
        let mut attempts = 0;
        loop {
            let mut draws = Vec::new();
            let raw = match self.cfg.mode {
                CorruptionMode::Walk => self.walk(x, rng, &mut draws),
                CorruptionMode::Single => self.single(x, rng, &mut draws),
            };
            let forward = normalize_script(&raw, x)?;
            let after = forward.apply(x)?;
            if after.is_empty() && !x.is_empty() && self.cfg.type_dist.keep == 0.0 {
                attempts += 1;
                if attempts >= MAX_EMPTY_RETRIES {
                    return Err(Error::CorruptionExhausted { attempts });
                }
                continue;
            }
            let inverse = normalize_script(&invert_script(&forward, x)?, &after)?;
            return Ok(CorruptionStepRecord {
                before: x.to_vec(),
                after,
                forward_script: forward,
                inverse_script: inverse,
                draws,
            });
        }
    }

    /// Forward records x_0 -> x_1 -> ... -> x_steps.
    pub fn corrupt_records(&self, x0: &[TokenId], steps: usize, rng: &mut EngineRng) -> Result<Vec<CorruptionStepRecord>> {
        if steps == 0 || steps > self.cfg.max_steps {
            return Err(Error::InvalidConfig(format!(
                "corruption steps must be in 1..={}, got {steps}",
                self.cfg.max_steps
            )));
        }
        let mut records = Vec::with_capacity(steps);
        let mut cur = x0.to_vec();
        for _ in 0..steps {
            let rec = self.corrupt_step(&cur, rng)?;
            cur = rec.after.clone();
            records.push(rec);
        }
        Ok(records)
    }

    /// Chain `[x_steps, ..., x_0]` linked by the inverse scripts, i.e. the
    /// gold denoising trajectory.
    pub fn corrupt_chain(&self, x0: &[TokenId], steps: usize, rng: &mut EngineRng) -> Result<RevisionChain> {
        let records = self.corrupt_records(x0, steps, rng)?;
        let mut revisions = Vec::with_capacity(steps + 1);
        let mut scripts = Vec::with_capacity(steps);
        for rec in records.iter().rev() {
            revisions.push(rec.after.clone());
            scripts.push(rec.inverse_script.clone());
        }
        revisions.push(x0.to_vec());
        Ok(RevisionChain { revisions, scripts })
    }

    /// Draws t uniformly from 1..=max_steps, corrupts `x0` for t steps and
    /// returns x_t with the tagged inverse of the last step.
    pub fn make_training_example(&self, x0: &[TokenId], rng: &mut EngineRng) -> Result<TrainingExample> {
        let steps = rng.gen_range(1..=self.cfg.max_steps);
        self.make_training_example_with_steps(x0, steps, rng)
    }

    pub fn make_training_example_with_steps(
        &self,
        x0: &[TokenId],
        steps: usize,
        rng: &mut EngineRng,
    ) -> Result<TrainingExample> {
        let mut records = self.corrupt_records(x0, steps, rng)?;
        let last = records.pop().expect("at least one step");
        let tagged = TaggedEdits::from_script(&last.inverse_script, last.after.len())?;
        Ok(TrainingExample {
            input: last.after,
            previous: last.before,
            script: last.inverse_script,
            tags: tagged.tags,
            payloads: tagged.payloads,
            steps,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn vocab() -> Vocab {
        Vocab::from_content((0..20).map(|i| format!("w{i}"))).unwrap()
    }

    fn seq(v: &Vocab, n: u32) -> Vec<TokenId> {
        (0..n).map(|i| v.content_ids().start + i).collect()
    }

    #[test]
    fn keep_only_is_identity() {
        let v = vocab();
        let cfg = CorruptionConfig { type_dist: TypeDist::only_keep(), ..Default::default() };
        let c = Corruptor::new(cfg, &v).unwrap();
        let x = seq(&v, 6);
        let rec = c.corrupt_step(&x, &mut seeded(1)).unwrap();
        assert_eq!(rec.after, x);
        assert!(rec.forward_script.is_all_keep() && rec.inverse_script.is_all_keep());
    }

    #[test]
    fn config_validation() {
        let bad = TypeDist { keep: 0.5, replace: 0.2, insert: 0.1, delete: 0.1 };
        assert!(CorruptionConfig { type_dist: bad, ..Default::default() }.validate().is_err());
        let neg = TypeDist { keep: 1.1, replace: -0.1, insert: 0.0, delete: 0.0 };
        assert!(CorruptionConfig { type_dist: neg, ..Default::default() }.validate().is_err());
        let zero = CorruptionConfig { length_dist: LengthDist::Poisson { lambda: 0.0 }, ..Default::default() };
        assert!(zero.validate().is_err());
        assert!(CorruptionConfig { max_steps: 0, ..Default::default() }.validate().is_err());
        let unigram = CorruptionConfig { distractors: DistractorSource::Unigram, ..Default::default() };
        assert!(Corruptor::new(unigram, &vocab()).is_err());
    }

    #[test]
    fn delete_only_without_keep_exhausts_retries() {
        let v = vocab();
        let cfg = CorruptionConfig {
            type_dist: TypeDist { keep: 0.0, replace: 0.0, insert: 0.0, delete: 1.0 },
            ..Default::default()
        };
        let c = Corruptor::new(cfg, &v).unwrap();
        let err = c.corrupt_step(&seq(&v, 3), &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::CorruptionExhausted { attempts: MAX_EMPTY_RETRIES }));
    }

    #[test]
    fn distractors_avoid_reserved_ids() {
        let v = vocab();
        let cfg = CorruptionConfig {
            type_dist: TypeDist { keep: 0.0, replace: 0.5, insert: 0.5, delete: 0.0 },
            ..Default::default()
        };
        let c = Corruptor::new(cfg, &v).unwrap();
        let mut rng = seeded(3);
        for _ in 0..200 {
            let rec = c.corrupt_step(&seq(&v, 5), &mut rng).unwrap();
            assert!(rec.after.iter().all(|&id| !Vocab::is_reserved(id)));
        }
    }

    #[test]
    fn unigram_distractors_follow_counts() {
        let v = vocab();
        let cfg = CorruptionConfig {
            type_dist: TypeDist { keep: 0.0, replace: 1.0, insert: 0.0, delete: 0.0 },
            distractors: DistractorSource::Unigram,
            ..Default::default()
        };
        let mut counts = vec![0u64; v.len()];
        counts[7] = 5;
        let c = Corruptor::with_counts(cfg, &v, &counts).unwrap();
        let rec = c.corrupt_step(&seq(&v, 8), &mut seeded(9)).unwrap();
        assert!(rec.after.iter().all(|&id| id == 7));
    }

    #[test]
    fn single_mode_makes_one_edit() {
        let v = vocab();
        let cfg = CorruptionConfig { mode: CorruptionMode::Single, ..Default::default() };
        let c = Corruptor::new(cfg, &v).unwrap();
        let mut rng = seeded(4);
        for _ in 0..100 {
            let x = seq(&v, 6);
            let rec = c.corrupt_step(&x, &mut rng).unwrap();
            assert_eq!(rec.draws.len(), 1);
            let edits = rec.forward_script.ops.iter().filter(|op| op.tag != EditTag::Keep).count();
            assert!(edits <= 1);
            assert_eq!(rec.inverse_script.apply(&rec.after).unwrap(), x);
        }
    }

    #[test]
    fn chain_base_case_and_determinism() {
        let v = vocab();
        let c = Corruptor::new(CorruptionConfig::default(), &v).unwrap();
        let x = seq(&v, 8);
        let chain = c.corrupt_chain(&x, 1, &mut seeded(5)).unwrap();
        assert_eq!(chain.revisions.len(), 2);
        assert_eq!(chain.last(), x.as_slice());
        chain.validate().unwrap();
        let again = c.corrupt_chain(&x, 1, &mut seeded(5)).unwrap();
        assert_eq!(chain, again);
        assert!(c.corrupt_chain(&x, 0, &mut seeded(5)).is_err());
        assert!(c.corrupt_chain(&x, 13, &mut seeded(5)).is_err());
    }

    #[test]
    fn keep_only_training_example_has_no_payloads() {
        let v = vocab();
        let cfg = CorruptionConfig { type_dist: TypeDist::only_keep(), max_steps: 1, ..Default::default() };
        let c = Corruptor::new(cfg, &v).unwrap();
        let ex = c.make_training_example(&seq(&v, 4), &mut seeded(2)).unwrap();
        assert_eq!(ex.steps, 1);
        assert!(ex.tags.iter().all(|&t| t == EditTag::Keep));
        assert_eq!(ex.tags.len(), 5);
        assert!(ex.payloads.is_empty());
    }

    #[test]
    fn deleting_the_middle_yields_an_insert_after_the_first_token() {
        // Search seeds for a step that deletes exactly [b] from [a, b, c].
        let v = vocab();
        let cfg = CorruptionConfig {
            type_dist: TypeDist { keep: 0.7, replace: 0.0, insert: 0.0, delete: 0.3 },
            length_dist: LengthDist::Uniform { max: 1 },
            max_steps: 1,
            ..Default::default()
        };
        let c = Corruptor::new(cfg, &v).unwrap();
        let x = seq(&v, 3);
        let ex = (0..1000)
            .map(|s| c.make_training_example(&x, &mut seeded(s)).unwrap())
            .find(|ex| ex.input == vec![x[0], x[2]])
            .expect("some seed deletes the middle token");
        assert_eq!(ex.tags, vec![EditTag::Keep, EditTag::Insert, EditTag::Keep]);
        assert_eq!(ex.payloads, vec![vec![x[1]]]);
    }
}
