//! Scoring interfaces for the reverse process and the two shipped scorer
//! families.
//!
//! A [`Tagger`] gives every position of `x_t` (the leading insertion gap
//! first, then each token) a distribution over the four edit tags. A
//! [`Generator`] produces INSERT and REPLACE payloads one token at a time,
//! ending each span with [`END_OF_SPAN`](crate::vocab::END_OF_SPAN).

pub mod checkpoint;
pub mod features;
pub mod loglinear;
pub mod neural;
pub mod posterior;
pub mod train;
pub mod toy;
mod uniform;

pub use checkpoint::{Checkpoint, Family};
pub use train::{train, TrainConfig, TrainOutcome, TrainPair};
pub use uniform::{UniformGenerator, UniformTagger};

use crate::chain::RevisionChain;
use crate::error::{Error, Result};
use crate::script::{EditScript, EditTag, SpanSlot, TaggedEdits};
use crate::vocab::{TokenId, END_OF_SPAN};

/// Probabilities over `[KEEP, DELETE, REPLACE, INSERT]`.
pub type TagDist = [f64; 4];

pub trait Tagger: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// One distribution per position; the result has `x.len() + 1` entries,
    /// the first for the gap before `x[0]`.
    fn score_tags(&self, x: &[TokenId], source: Option<&[TokenId]>) -> Vec<TagDist>;
}

/// Everything a generator may condition on when producing the next payload
/// token of a span.
#[derive(Debug, Clone, Copy)]
pub struct GenQuery<'a> {
    /// INSERT or REPLACE.
    pub kind: EditTag,
    /// Output produced before this span: surviving tokens and earlier payloads.
    pub left: &'a [TokenId],
    /// Payload tokens generated so far for this span.
    pub prefix: &'a [TokenId],
    /// Surviving (non-deleted) tokens of `x_t` after this span.
    pub right: &'a [TokenId],
    /// Tokens being rewritten; empty for INSERT.
    pub replaced: &'a [TokenId],
    pub source: Option<&'a [TokenId]>,
}

pub trait Generator: Send + Sync {
    fn vocab_size(&self) -> usize;

    /// Distribution over the whole vocabulary (END_OF_SPAN included) for the
    /// next payload token.
    fn next_token_dist(&self, query: &GenQuery<'_>) -> Vec<f64>;
}

/// Layout of one denoising step once tags are fixed: surviving tokens and
/// span slots in output order.
#[derive(Debug, Clone)]
pub struct StepLayout {
    pieces: Vec<Piece>,
    slots: Vec<SpanSlot>,
    rights: Vec<Vec<TokenId>>,
    replaced: Vec<Vec<TokenId>>,
    surviving: usize,
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Token(TokenId),
    Slot(usize),
}

impl StepLayout {
    pub fn new(x: &[TokenId], tags: &[EditTag]) -> Result<Self> {
        if tags.len() != x.len() + 1 {
            return Err(Error::InvalidTags(format!(
                "{} tags for a sequence of length {}",
                tags.len(),
                x.len()
            )));
        }
        let slots = TaggedEdits::slots(tags)?;
        let mut pieces = Vec::with_capacity(x.len() + slots.len());
        let mut slot_iter = slots.iter().enumerate().peekable();
        let mut surviving = 0;
        if tags[0] == EditTag::Insert {
            let (s, _) = slot_iter.next().expect("gap slot");
            pieces.push(Piece::Slot(s));
        }
        let mut i = 0;
        while i < x.len() {
            match tags[i + 1] {
                EditTag::Keep => {
                    pieces.push(Piece::Token(x[i]));
                    surviving += 1;
                }
                EditTag::Delete => {}
                EditTag::Insert => {
                    pieces.push(Piece::Token(x[i]));
                    surviving += 1;
                    let (s, _) = slot_iter.next().expect("insert slot");
                    pieces.push(Piece::Slot(s));
                }
                EditTag::Replace => {
                    let (s, slot) = slot_iter.next().expect("replace slot");
                    pieces.push(Piece::Slot(s));
                    i = slot.replaced.end;
                    continue;
                }
            }
            i += 1;
        }
        let survives = |j: usize| tags[j + 1] != EditTag::Delete;
        let rights = slots
            .iter()
            .map(|slot| {
                let from = match slot.kind {
                    EditTag::Replace => slot.replaced.end,
                    _ => slot.first_position,
                };
                (from..x.len()).filter(|&j| survives(j)).map(|j| x[j]).collect()
            })
            .collect();
        let replaced = slots.iter().map(|slot| x[slot.replaced.clone()].to_vec()).collect();
        Ok(Self { pieces, slots, rights, replaced, surviving })
    }

    pub fn slots(&self) -> &[SpanSlot] {
        &self.slots
    }

    /// Number of `x_t` tokens carried into the output unchanged.
    pub fn surviving(&self) -> usize {
        self.surviving
    }

    pub fn right(&self, slot: usize) -> &[TokenId] {
        &self.rights[slot]
    }

    pub fn replaced(&self, slot: usize) -> &[TokenId] {
        &self.replaced[slot]
    }

    /// Output tokens that precede `slot`, given payloads of earlier slots.
    pub fn left(&self, slot: usize, payloads: &[Vec<TokenId>]) -> Vec<TokenId> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            match *piece {
                Piece::Token(t) => out.push(t),
                Piece::Slot(s) if s == slot => break,
                Piece::Slot(s) => out.extend_from_slice(&payloads[s]),
            }
        }
        out
    }

    pub fn output(&self, payloads: &[Vec<TokenId>]) -> Vec<TokenId> {
        let mut out = Vec::new();
        for piece in &self.pieces {
            match *piece {
                Piece::Token(t) => out.push(t),
                Piece::Slot(s) => out.extend_from_slice(&payloads[s]),
            }
        }
        out
    }

    pub fn query<'a>(
        &'a self,
        slot: usize,
        left: &'a [TokenId],
        prefix: &'a [TokenId],
        source: Option<&'a [TokenId]>,
    ) -> GenQuery<'a> {
        GenQuery {
            kind: self.slots[slot].kind,
            left,
            prefix,
            right: &self.rights[slot],
            replaced: &self.replaced[slot],
            source,
        }
    }
}

/// Log-likelihood of one reverse step, split into its two factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepScore {
    pub tag: f64,
    pub generation: f64,
    /// Scored generation events (payload tokens plus one END_OF_SPAN per span).
    pub events: usize,
}

impl StepScore {
    pub fn total(&self) -> f64 {
        self.tag + self.generation
    }
}

fn check_ids(seq: &[TokenId], size: usize) -> Result<()> {
    match seq.iter().find(|&&id| id as usize >= size) {
        Some(&id) => Err(Error::VocabMismatch { id, size }),
        None => Ok(()),
    }
}

/// Sum of log tag probabilities of `tags` under `dists`, in position order.
pub fn tag_log_prob(dists: &[TagDist], tags: &[EditTag]) -> f64 {
    let mut lp = 0.0;
    for (d, t) in dists.iter().zip(tags) {
        lp += d[t.index()].ln();
    }
    lp
}

/// `log p_tag(e_t | x_t) + log p_gen(payloads | x_t, e_t)` for the step that
/// applies `script` to `x`.
pub fn step_log_likelihood(
    x: &[TokenId],
    script: &EditScript,
    tagger: &dyn Tagger,
    generator: &dyn Generator,
    source: Option<&[TokenId]>,
) -> Result<StepScore> {
    for size in [tagger.vocab_size(), generator.vocab_size()] {
        check_ids(x, size)?;
        if let Some(src) = source {
            check_ids(src, size)?;
        }
        for op in &script.ops {
            check_ids(&op.payload, size)?;
        }
    }
    let tagged = TaggedEdits::from_script(script, x.len())?;
    let dists = tagger.score_tags(x, source);
    let tag = tag_log_prob(&dists, &tagged.tags);
    let layout = StepLayout::new(x, &tagged.tags)?;
    let mut generation = 0.0;
    let mut events = 0;
    for (s, payload) in tagged.payloads.iter().enumerate() {
        let left = layout.left(s, &tagged.payloads);
        for k in 0..=payload.len() {
            let next = payload.get(k).copied().unwrap_or(END_OF_SPAN);
            let dist = generator.next_token_dist(&layout.query(s, &left, &payload[..k], source));
            generation += dist[next as usize].ln();
            events += 1;
        }
    }
    Ok(StepScore { tag, generation, events })
}

/// Sum of step log-likelihoods along `chain`; negative infinity when some
/// step has zero probability.
pub fn chain_log_likelihood(
    chain: &RevisionChain,
    tagger: &dyn Tagger,
    generator: &dyn Generator,
    source: Option<&[TokenId]>,
) -> Result<f64> {
    chain.validate()?;
    let mut total = 0.0;
    for (k, script) in chain.scripts.iter().enumerate() {
        total += step_log_likelihood(&chain.revisions[k], script, tagger, generator, source)?.total();
    }
    Ok(total)
}

/// A trained tagger and generator pair.
pub enum Model {
    LogLinear(loglinear::LogLinearModel),
    Neural(neural::NeuralModel),
}

impl Model {
    pub fn tagger(&self) -> &dyn Tagger {
        match self {
            Model::LogLinear(m) => &m.tagger,
            Model::Neural(m) => &m.tagger,
        }
    }

    pub fn generator(&self) -> &dyn Generator {
        match self {
            Model::LogLinear(m) => &m.generator,
            Model::Neural(m) => &m.generator,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            Model::LogLinear(_) => Family::LogLinear,
            Model::Neural(_) => Family::Neural,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::EditOp;

    #[test]
    fn layout_contexts() {
        // x = [a b c d], tags: gap INSERT, a KEEP, b DELETE, c REPLACE, d INSERT
        let x = [10, 11, 12, 13];
        let tags = [EditTag::Insert, EditTag::Keep, EditTag::Delete, EditTag::Replace, EditTag::Insert];
        let layout = StepLayout::new(&x, &tags).unwrap();
        assert_eq!(layout.slots().len(), 3);
        assert_eq!(layout.surviving(), 2);
        let payloads = vec![vec![1u32 + 20], vec![21], vec![22, 23]];
        assert_eq!(layout.left(0, &payloads), Vec::<TokenId>::new());
        assert_eq!(layout.left(1, &payloads), vec![21, 10]);
        assert_eq!(layout.left(2, &payloads), vec![21, 10, 21, 13]);
        assert_eq!(layout.right(0), &[10, 12, 13]);
        assert_eq!(layout.right(1), &[13]);
        assert_eq!(layout.replaced(1), &[12]);
        assert_eq!(layout.right(2), &[] as &[TokenId]);
        assert_eq!(layout.output(&payloads), vec![21, 10, 21, 13, 22, 23]);
        let script = TaggedEdits { tags: tags.to_vec(), payloads: payloads.clone() }.to_script().unwrap();
        assert_eq!(script.apply(&x).unwrap(), layout.output(&payloads));
    }

    #[test]
    fn uniform_all_keep_closed_form() {
        let tagger = UniformTagger::new(30);
        let generator = UniformGenerator::new(30);
        let x = [7, 8, 9];
        let s = step_log_likelihood(&x, &EditScript::all_keep(3), &tagger, &generator, None).unwrap();
        assert!((s.total() - 4.0 * (0.25f64).ln()).abs() < 1e-12);
        assert_eq!(s.generation, 0.0);
    }

    #[test]
    fn uniform_single_insert_closed_form() {
        let v = 30usize;
        let tagger = UniformTagger::new(v);
        let generator = UniformGenerator::new(v);
        let x = [7, 8];
        let script = EditScript::new(vec![EditOp::keep(), EditOp::insert(vec![9]), EditOp::keep()]);
        let s = step_log_likelihood(&x, &script, &tagger, &generator, None).unwrap();
        let expected = 3.0 * (0.25f64).ln() + 2.0 * (1.0 / v as f64).ln();
        assert!((s.total() - expected).abs() < 1e-12);
        assert_eq!(s.events, 2);
    }

    #[test]
    fn vocab_mismatch_is_reported() {
        let tagger = UniformTagger::new(10);
        let generator = UniformGenerator::new(10);
        let err = step_log_likelihood(&[12], &EditScript::all_keep(1), &tagger, &generator, None).unwrap_err();
        assert!(matches!(err, Error::VocabMismatch { id: 12, size: 10 }));
    }
}
