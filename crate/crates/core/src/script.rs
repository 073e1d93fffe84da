//! Edit tags and edit scripts.
//!
//! An [`EditScript`] is an aligned list of span operations. Applying it walks
//! the source left to right: KEEP copies one token, DELETE drops a span,
//! REPLACE drops a span and emits its payload, INSERT emits its payload in
//! the gap after the previous operation without consuming anything.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alignment::AlignmentCosts;
use crate::error::{Error, Result};
use crate::vocab::TokenId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditTag {
    Keep,
    Delete,
    Replace,
    Insert,
}

impl EditTag {
    pub const ALL: [EditTag; 4] = [EditTag::Keep, EditTag::Delete, EditTag::Replace, EditTag::Insert];

    /// Column of this tag in a per-position tag distribution.
    pub const fn index(self) -> usize {
        match self {
            EditTag::Keep => 0,
            EditTag::Delete => 1,
            EditTag::Replace => 2,
            EditTag::Insert => 3,
        }
    }

    pub const fn from_index(i: usize) -> EditTag {
        Self::ALL[i]
    }

    pub const fn name(self) -> &'static str {
        match self {
            EditTag::Keep => "KEEP",
            EditTag::Delete => "DELETE",
            EditTag::Replace => "REPLACE",
            EditTag::Insert => "INSERT",
        }
    }
}

impl fmt::Display for EditTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One span operation of an [`EditScript`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditOp {
    pub tag: EditTag,
    /// Number of source tokens consumed.
    pub consume: usize,
    /// Tokens produced; empty for KEEP (the kept token comes from the source).
    pub payload: Vec<TokenId>,
}

impl EditOp {
    pub fn keep() -> Self {
        Self { tag: EditTag::Keep, consume: 1, payload: Vec::new() }
    }

    pub fn delete(n: usize) -> Self {
        Self { tag: EditTag::Delete, consume: n, payload: Vec::new() }
    }

    pub fn replace(n: usize, payload: Vec<TokenId>) -> Self {
        Self { tag: EditTag::Replace, consume: n, payload }
    }

    pub fn insert(payload: Vec<TokenId>) -> Self {
        Self { tag: EditTag::Insert, consume: 0, payload }
    }

    fn check(&self) -> Result<()> {
        let ok = match self.tag {
            EditTag::Keep => self.consume == 1 && self.payload.is_empty(),
            EditTag::Delete => self.consume >= 1 && self.payload.is_empty(),
            EditTag::Replace => self.consume >= 1 && !self.payload.is_empty(),
            EditTag::Insert => self.consume == 0 && !self.payload.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidScript(format!(
                "{} consuming {} with {} payload tokens",
                self.tag,
                self.consume,
                self.payload.len()
            )))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
}

impl EditScript {
    pub fn new(ops: Vec<EditOp>) -> Self {
        Self { ops }
    }

    pub fn all_keep(n: usize) -> Self {
        Self { ops: vec![EditOp::keep(); n] }
    }

    pub fn consumed(&self) -> usize {
        self.ops.iter().map(|op| op.consume).sum()
    }

    pub fn is_all_keep(&self) -> bool {
        self.ops.iter().all(|op| op.tag == EditTag::Keep)
    }

    /// Checks per-op invariants and that the script consumes exactly `src_len` tokens.
    pub fn validate(&self, src_len: usize) -> Result<()> {
        for op in &self.ops {
            op.check()?;
        }
        let consumed = self.consumed();
        if consumed != src_len {
            return Err(Error::LengthMismatch { expected: src_len, actual: consumed });
        }
        Ok(())
    }

    pub fn apply(&self, src: &[TokenId]) -> Result<Vec<TokenId>> {
        apply_script(self, src)
    }

    /// Total cost of the script under `costs`. A REPLACE of `k` tokens by
    /// `m` tokens costs `min(k, m)` substitutions plus the surplus as
    /// deletions or insertions.
    pub fn cost(&self, costs: &AlignmentCosts) -> f64 {
        self.ops
            .iter()
            .map(|op| match op.tag {
                EditTag::Keep => 0.0,
                EditTag::Delete => op.consume as f64 * costs.delete,
                EditTag::Insert => op.payload.len() as f64 * costs.insert,
                EditTag::Replace => {
                    let (k, m) = (op.consume, op.payload.len());
                    k.min(m) as f64 * costs.replace
                        + k.saturating_sub(m) as f64 * costs.delete
                        + m.saturating_sub(k) as f64 * costs.insert
                }
            })
            .sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("edit scripts always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Applies `script` to `src`.
pub fn apply_script(script: &EditScript, src: &[TokenId]) -> Result<Vec<TokenId>> {
    script.validate(src.len())?;
    let mut out = Vec::with_capacity(src.len());
    let mut pos = 0;
    for op in &script.ops {
        match op.tag {
            EditTag::Keep => out.push(src[pos]),
            EditTag::Delete => {}
            EditTag::Replace | EditTag::Insert => out.extend_from_slice(&op.payload),
        }
        pos += op.consume;
    }
    Ok(out)
}

/// Returns the script that undoes `script`: applying it to
/// `apply(script, src)` yields `src` again.
pub fn invert_script(script: &EditScript, src: &[TokenId]) -> Result<EditScript> {
    script.validate(src.len())?;
    let mut pos = 0;
    let mut ops = Vec::with_capacity(script.ops.len());
    for op in &script.ops {
        let consumed = &src[pos..pos + op.consume];
        ops.push(match op.tag {
            EditTag::Keep => EditOp::keep(),
            EditTag::Delete => EditOp::insert(consumed.to_vec()),
            EditTag::Insert => EditOp::delete(op.payload.len()),
            EditTag::Replace => EditOp::replace(op.payload.len(), consumed.to_vec()),
        });
        pos += op.consume;
    }
    Ok(EditScript::new(ops))
}

/// Canonical form: adjacent DELETE, INSERT and REPLACE ops are merged into
/// single spans, and a REPLACE whose payload equals the tokens it consumes
/// becomes a run of KEEPs.
pub fn normalize_script(script: &EditScript, src: &[TokenId]) -> Result<EditScript> {
    script.validate(src.len())?;
    let mut ops: Vec<EditOp> = Vec::with_capacity(script.ops.len());
    let mut pos = 0;
    for op in &script.ops {
        let consumed = &src[pos..pos + op.consume];
        pos += op.consume;
        if op.tag == EditTag::Replace && op.payload.as_slice() == consumed {
            ops.extend(std::iter::repeat_with(EditOp::keep).take(op.consume));
            continue;
        }
        match (ops.last_mut(), op.tag) {
            (Some(last), EditTag::Delete | EditTag::Insert | EditTag::Replace) if last.tag == op.tag => {
                last.consume += op.consume;
                last.payload.extend_from_slice(&op.payload);
            }
            _ => ops.push(op.clone()),
        }
    }
    Ok(EditScript::new(ops))
}

/// Per-position view of a script: one tag for the leading insertion gap and
/// one per source token, plus one payload per generated span.
///
/// Token tags mean: KEEP keeps the token; INSERT keeps it and inserts a span
/// after it; DELETE drops it; a maximal run of REPLACE tags is rewritten by
/// one payload. The gap tag is KEEP or INSERT (insert before the first token).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedEdits {
    pub tags: Vec<EditTag>,
    pub payloads: Vec<Vec<TokenId>>,
}

/// A generated span in a tag sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanSlot {
    /// INSERT or REPLACE.
    pub kind: EditTag,
    /// Tag position that opens the span (0 is the leading gap, i + 1 is token i).
    pub first_position: usize,
    /// Source tokens rewritten by a REPLACE span; empty range for INSERT.
    pub replaced: std::ops::Range<usize>,
}

impl TaggedEdits {
    /// Expands a script over a source of length `src_len`.
    ///
    /// Adjacent non-KEEP ops are fused into one span: DELETE if it produces
    /// nothing, INSERT if it consumes nothing, REPLACE otherwise. Different
    /// op orders over the same unmatched region thus get the same tags.
    pub fn from_script(script: &EditScript, src_len: usize) -> Result<Self> {
        script.validate(src_len)?;
        let mut merged: Vec<EditOp> = Vec::with_capacity(script.ops.len());
        for op in &script.ops {
            let mut op = op.clone();
            while let Some(top) = merged.last() {
                if top.tag == EditTag::Keep || op.tag == EditTag::Keep {
                    break;
                }
                let top = merged.pop().expect("checked non-empty");
                let mut payload = top.payload;
                payload.extend_from_slice(&op.payload);
                let consume = top.consume + op.consume;
                let tag = match (consume, payload.is_empty()) {
                    (0, _) => EditTag::Insert,
                    (_, true) => EditTag::Delete,
                    _ => EditTag::Replace,
                };
                op = EditOp { tag, consume, payload };
            }
            merged.push(op);
        }

        let mut tags = vec![EditTag::Keep; src_len + 1];
        let mut payloads = Vec::new();
        let mut pos = 0;
        for op in merged {
            match op.tag {
                EditTag::Keep => tags[pos + 1] = EditTag::Keep,
                EditTag::Delete | EditTag::Replace => {
                    for t in &mut tags[pos + 1..pos + 1 + op.consume] {
                        *t = op.tag;
                    }
                    if op.tag == EditTag::Replace {
                        payloads.push(op.payload);
                    }
                }
                // After merging, an INSERT is either leading or follows a KEEP.
                EditTag::Insert => {
                    tags[pos] = EditTag::Insert;
                    payloads.push(op.payload);
                }
            }
            pos += op.consume;
        }
        Ok(Self { tags, payloads })
    }

    /// Span slots implied by `tags`, in left-to-right order.
    pub fn slots(tags: &[EditTag]) -> Result<Vec<SpanSlot>> {
        if tags.is_empty() {
            return Err(Error::InvalidTags("missing leading gap position".into()));
        }
        let mut slots = Vec::new();
        match tags[0] {
            EditTag::Keep => {}
            EditTag::Insert => slots.push(SpanSlot { kind: EditTag::Insert, first_position: 0, replaced: 0..0 }),
            other => return Err(Error::InvalidTags(format!("leading gap tagged {other}"))),
        }
        let n = tags.len() - 1;
        let mut i = 0;
        while i < n {
            match tags[i + 1] {
                EditTag::Keep | EditTag::Delete => i += 1,
                EditTag::Insert => {
                    slots.push(SpanSlot { kind: EditTag::Insert, first_position: i + 1, replaced: i + 1..i + 1 });
                    i += 1;
                }
                EditTag::Replace => {
                    let start = i;
                    while i < n && tags[i + 1] == EditTag::Replace {
                        i += 1;
                    }
                    slots.push(SpanSlot { kind: EditTag::Replace, first_position: start + 1, replaced: start..i });
                }
            }
        }
        Ok(slots)
    }

    /// Rebuilds the script described by these tags.
    pub fn to_script(&self) -> Result<EditScript> {
        let slots = Self::slots(&self.tags)?;
        if slots.len() != self.payloads.len() {
            return Err(Error::InvalidTags(format!(
                "{} spans but {} payloads",
                slots.len(),
                self.payloads.len()
            )));
        }
        if let Some(i) = self.payloads.iter().position(Vec::is_empty) {
            return Err(Error::InvalidTags(format!("payload {i} is empty")));
        }
        let mut payloads = self.payloads.iter();
        let mut ops = Vec::new();
        if self.tags[0] == EditTag::Insert {
            ops.push(EditOp::insert(payloads.next().expect("counted").clone()));
        }
        let n = self.tags.len() - 1;
        let mut i = 0;
        while i < n {
            match self.tags[i + 1] {
                EditTag::Keep => ops.push(EditOp::keep()),
                EditTag::Insert => {
                    ops.push(EditOp::keep());
                    ops.push(EditOp::insert(payloads.next().expect("counted").clone()));
                }
                EditTag::Delete => {
                    let start = i;
                    while i + 1 < n && self.tags[i + 2] == EditTag::Delete {
                        i += 1;
                    }
                    ops.push(EditOp::delete(i + 1 - start));
                }
                EditTag::Replace => {
                    let start = i;
                    while i + 1 < n && self.tags[i + 2] == EditTag::Replace {
                        i += 1;
                    }
                    ops.push(EditOp::replace(i + 1 - start, payloads.next().expect("counted").clone()));
                }
            }
            i += 1;
        }
        Ok(EditScript::new(ops))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: TokenId = 10;
    const B: TokenId = 11;
    const C: TokenId = 12;
    const X: TokenId = 20;
    const Y: TokenId = 21;

    #[test]
    fn replace_in_the_middle() {
        let script = EditScript::new(vec![EditOp::keep(), EditOp::replace(1, vec![X]), EditOp::keep()]);
        assert_eq!(apply_script(&script, &[A, B, C]).unwrap(), vec![A, X, C]);
    }

    #[test]
    fn empty_identity() {
        assert_eq!(apply_script(&EditScript::default(), &[]).unwrap(), Vec::<TokenId>::new());
    }

    #[test]
    fn length_mismatch_reports_both_sides() {
        let script = EditScript::new(vec![EditOp::keep(), EditOp::delete(2)]);
        match apply_script(&script, &[A, B]) {
            Err(Error::LengthMismatch { expected: 2, actual: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_ops_rejected() {
        let bad = [
            EditOp { tag: EditTag::Keep, consume: 2, payload: vec![] },
            EditOp { tag: EditTag::Delete, consume: 0, payload: vec![] },
            EditOp { tag: EditTag::Replace, consume: 1, payload: vec![] },
            EditOp { tag: EditTag::Insert, consume: 0, payload: vec![] },
            EditOp { tag: EditTag::Keep, consume: 1, payload: vec![A] },
        ];
        for op in bad {
            let consumed = op.consume;
            assert!(EditScript::new(vec![op]).validate(consumed).is_err());
        }
    }

    #[test]
    fn delete_inverts_to_insert() {
        let script = EditScript::new(vec![EditOp::keep(), EditOp::delete(1)]);
        let inv = invert_script(&script, &[A, B]).unwrap();
        assert_eq!(inv, EditScript::new(vec![EditOp::keep(), EditOp::insert(vec![B])]));
    }

    #[test]
    fn all_keep_is_its_own_inverse() {
        let script = EditScript::all_keep(3);
        assert_eq!(invert_script(&script, &[A, B, C]).unwrap(), script);
    }

    #[test]
    fn normalization_merges_and_canonicalizes() {
        let src = [A, B, C];
        let script = EditScript::new(vec![
            EditOp::replace(1, vec![A]),
            EditOp::delete(1),
            EditOp::delete(1),
            EditOp::insert(vec![X]),
            EditOp::insert(vec![Y]),
        ]);
        let norm = normalize_script(&script, &src).unwrap();
        assert_eq!(
            norm,
            EditScript::new(vec![EditOp::keep(), EditOp::delete(2), EditOp::insert(vec![X, Y])])
        );
        assert_eq!(norm.apply(&src).unwrap(), script.apply(&src).unwrap());
    }

    #[test]
    fn json_shape_is_stable() {
        let script = EditScript::new(vec![EditOp::keep(), EditOp::replace(2, vec![7, 8]), EditOp::insert(vec![9])]);
        let json = script.to_json();
        assert_eq!(
            json,
            r#"[{"tag":"KEEP","consume":1,"payload":[]},{"tag":"REPLACE","consume":2,"payload":[7,8]},{"tag":"INSERT","consume":0,"payload":[9]}]"#
        );
        assert_eq!(EditScript::from_json(&json).unwrap(), script);
    }

    #[test]
    fn tagged_view_of_prefix_insert_and_spans() {
        let src = [A, B, C];
        let script = EditScript::new(vec![
            EditOp::insert(vec![X]),
            EditOp::keep(),
            EditOp::delete(1),
            EditOp::insert(vec![Y]),
            EditOp::keep(),
            EditOp::insert(vec![X, X]),
        ]);
        let tagged = TaggedEdits::from_script(&script, 3).unwrap();
        assert_eq!(
            tagged.tags,
            vec![EditTag::Insert, EditTag::Keep, EditTag::Replace, EditTag::Insert]
        );
        assert_eq!(tagged.payloads, vec![vec![X], vec![Y], vec![X, X]]);
        let back = tagged.to_script().unwrap();
        assert_eq!(back.apply(&src).unwrap(), script.apply(&src).unwrap());
    }

    #[test]
    fn gap_cannot_be_deleted() {
        let tagged = TaggedEdits { tags: vec![EditTag::Delete, EditTag::Keep], payloads: vec![] };
        assert!(tagged.to_script().is_err());
    }
}
