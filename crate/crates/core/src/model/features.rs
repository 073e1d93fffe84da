//! Source-alignment features shared by both scorer families.

use crate::alignment::{align_moves, AlignmentCosts, Move};
use crate::vocab::TokenId;

/// How a token of `x` lines up with the source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignKind {
    Match,
    Substitute,
    /// No source counterpart; the source would delete it.
    Extra,
}

impl AlignKind {
    pub fn index(self) -> u64 {
        match self {
            AlignKind::Match => 0,
            AlignKind::Substitute => 1,
            AlignKind::Extra => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenAlignment {
    pub kind: AlignKind,
    /// Aligned source token for Match / Substitute.
    pub source_token: Option<TokenId>,
    /// The alignment inserts source material right after this token.
    pub missing_after: bool,
}

/// Alignment of every token of `x` to `source`, plus whether source material
/// is missing before `x[0]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceAlignment {
    pub tokens: Vec<TokenAlignment>,
    pub missing_before: bool,
}

/// Costs under which the alignment maximizes matched tokens.
pub const MATCHING_COSTS: AlignmentCosts = AlignmentCosts { insert: 1.0, delete: 1.0, replace: 2.0 };

impl SourceAlignment {
    /// Unit-cost alignment.
    pub fn new(x: &[TokenId], source: &[TokenId]) -> Self {
        Self::with_costs(x, source, &AlignmentCosts::UNIT)
    }

    pub fn with_costs(x: &[TokenId], source: &[TokenId], costs: &AlignmentCosts) -> Self {
        let moves = align_moves(x, source, costs);
        let mut tokens: Vec<TokenAlignment> = Vec::with_capacity(x.len());
        let mut missing_before = false;
        let mut j = 0;
        for mv in moves {
            match mv {
                Move::Keep | Move::Replace => {
                    let kind = if mv == Move::Keep { AlignKind::Match } else { AlignKind::Substitute };
                    tokens.push(TokenAlignment { kind, source_token: Some(source[j]), missing_after: false });
                    j += 1;
                }
                Move::Delete => {
                    tokens.push(TokenAlignment { kind: AlignKind::Extra, source_token: None, missing_after: false })
                }
                Move::Insert => {
                    match tokens.last_mut() {
                        Some(t) => t.missing_after = true,
                        None => missing_before = true,
                    }
                    j += 1;
                }
            }
        }
        Self { tokens, missing_before }
    }
}

/// Bucketed `len(x) - len(source)`, in `0..=6`.
pub fn length_bucket(x_len: usize, source_len: usize) -> u64 {
    ((x_len as i64 - source_len as i64).clamp(-3, 3) + 3) as u64
}

/// Where in `source` the sequence `out` has progressed: the `j` minimizing the
/// edit distance between `out` and `source[..j]`, preferring larger `j`.
pub fn source_pointer(out: &[TokenId], source: &[TokenId]) -> usize {
    let m = source.len();
    let mut row: Vec<u32> = vec![0; m + 1];
    let mut next = vec![0u32; m + 1];
    for j in 0..=m {
        row[j] = j as u32;
    }
    for (i, &t) in out.iter().enumerate() {
        next[0] = i as u32 + 1;
        for j in 1..=m {
            let diag = row[j - 1] + u32::from(source[j - 1] != t);
            next[j] = diag.min(row[j] + 1).min(next[j - 1] + 1);
        }
        std::mem::swap(&mut row, &mut next);
    }
    let mut best = 0;
    for j in 0..=m {
        if row[j] <= row[best] {
            best = j;
        }
    }
    best
}

/// Source token at the pointer (None past the end) and whether the right
/// context already starts with it.
pub fn pointer_context(out: &[TokenId], right: &[TokenId], source: &[TokenId]) -> (Option<TokenId>, bool) {
    let j = source_pointer(out, source);
    let next = source.get(j).copied();
    let boundary = match (next, right.first()) {
        (Some(s), Some(r)) => s == *r,
        (None, _) => true,
        _ => false,
    };
    (next, boundary)
}
