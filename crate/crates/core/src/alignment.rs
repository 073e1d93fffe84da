//! Minimal edit scripts between sequences (weighted Levenshtein).
//!
//! Backtrace tie-break among equal-cost paths: KEEP > REPLACE > DELETE >
//! INSERT. Inputs whose DP table would exceed [`FULL_TABLE_LIMIT`] cells are
//! aligned with Hirschberg's divide and conquer in linear memory.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::script::{normalize_script, EditOp, EditScript};
use crate::vocab::{segment_words, TokenId, Vocab};

/// Largest DP table (in cells) built in one piece: 4097 x 4097.
pub const FULL_TABLE_LIMIT: usize = 4097 * 4097;

/// Per-operation costs. KEEP always costs zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCosts {
    pub insert: f64,
    pub delete: f64,
    pub replace: f64,
}

impl Default for AlignmentCosts {
    fn default() -> Self {
        Self::UNIT
    }
}

impl AlignmentCosts {
    pub const UNIT: AlignmentCosts = AlignmentCosts { insert: 1.0, delete: 1.0, replace: 1.0 };

    pub fn new(insert: f64, delete: f64, replace: f64) -> Result<Self> {
        let costs = Self { insert, delete, replace };
        costs.validate()?;
        Ok(costs)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.insert, self.delete, self.replace].iter().all(|c| c.is_finite() && *c >= 0.0);
        if !finite {
            return Err(Error::InvalidConfig("alignment costs must be finite and non-negative".into()));
        }
        if self.replace > self.insert + self.delete {
            return Err(Error::InvalidConfig("replace cost exceeds insert + delete".into()));
        }
        Ok(())
    }
}

/// A single-element alignment move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Move {
    Keep,
    Replace,
    Delete,
    Insert,
}

/// Minimal cost of rewriting `a` into `b`. Uses two rows of memory.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts) -> f64 {
    last_row(a, b, costs)[b.len()]
}

/// Last row of the DP table for `a` against every prefix of `b`.
fn last_row<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts) -> Vec<f64> {
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64 * costs.insert).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64 * costs.delete;
        for (j, y) in b.iter().enumerate() {
            let diag = prev[j] + if x == y { 0.0 } else { costs.replace };
            cur[j + 1] = diag.min(prev[j + 1] + costs.delete).min(cur[j] + costs.insert);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev
}

/// Same as [`last_row`] but aligning the reversed sequences.
fn last_row_rev<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts) -> Vec<f64> {
    let ar: Vec<&T> = a.iter().rev().collect();
    let br: Vec<&T> = b.iter().rev().collect();
    last_row(&ar, &br, costs)
}

fn table_moves<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts) -> Vec<Move> {
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut d = vec![0.0f64; (n + 1) * w];
    for j in 0..=m {
        d[j] = j as f64 * costs.insert;
    }
    for i in 1..=n {
        d[i * w] = i as f64 * costs.delete;
        for j in 1..=m {
            let diag = d[(i - 1) * w + j - 1] + if a[i - 1] == b[j - 1] { 0.0 } else { costs.replace };
            d[i * w + j] = diag.min(d[(i - 1) * w + j] + costs.delete).min(d[i * w + j - 1] + costs.insert);
        }
    }
    let mut moves = Vec::with_capacity(n.max(m));
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 && a[i - 1] == b[j - 1] && d[(i - 1) * w + j - 1] == here {
            moves.push(Move::Keep);
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && a[i - 1] != b[j - 1] && d[(i - 1) * w + j - 1] + costs.replace == here {
            moves.push(Move::Replace);
            i -= 1;
            j -= 1;
        } else if i > 0 && d[(i - 1) * w + j] + costs.delete == here {
            moves.push(Move::Delete);
            i -= 1;
        } else {
            moves.push(Move::Insert);
            j -= 1;
        }
    }
    moves.reverse();
    moves
}

fn hirschberg_moves<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts, limit: usize, out: &mut Vec<Move>) {
    if a.len() <= 1 || b.is_empty() || (a.len() + 1) * (b.len() + 1) <= limit {
        out.extend(table_moves(a, b, costs));
        return;
    }
    let mid = a.len() / 2;
    let fwd = last_row(&a[..mid], b, costs);
    let bwd = last_row_rev(&a[mid..], b, costs);
    let m = b.len();
    let mut split = 0;
    let mut best = f64::INFINITY;
    for k in 0..=m {
        let total = fwd[k] + bwd[m - k];
        if total < best {
            best = total;
            split = k;
        }
    }
    hirschberg_moves(&a[..mid], &b[..split], costs, limit, out);
    hirschberg_moves(&a[mid..], &b[split..], costs, limit, out);
}

/// Optimal single-element moves rewriting `a` into `b`.
pub fn align_moves<T: PartialEq>(a: &[T], b: &[T], costs: &AlignmentCosts) -> Vec<Move> {
    align_moves_with_limit(a, b, costs, FULL_TABLE_LIMIT)
}

pub(crate) fn align_moves_with_limit<T: PartialEq>(
    a: &[T],
    b: &[T],
    costs: &AlignmentCosts,
    limit: usize,
) -> Vec<Move> {
    let mut out = Vec::with_capacity(a.len().max(b.len()));
    hirschberg_moves(a, b, costs, limit, &mut out);
    out
}

fn moves_to_script(moves: &[Move], a: &[TokenId], b: &[TokenId]) -> EditScript {
    let mut ops = Vec::with_capacity(moves.len());
    let mut j = 0;
    for mv in moves {
        match mv {
            Move::Keep => {
                ops.push(EditOp::keep());
                j += 1;
            }
            Move::Replace => {
                ops.push(EditOp::replace(1, vec![b[j]]));
                j += 1;
            }
            Move::Delete => ops.push(EditOp::delete(1)),
            Move::Insert => {
                ops.push(EditOp::insert(vec![b[j]]));
                j += 1;
            }
        }
    }
    normalize_script(&EditScript::new(ops), a).expect("alignment moves form a valid script")
}

/// Minimal-cost script rewriting `a` into `b`, with adjacent single-token
/// operations of the same kind merged into spans.
pub fn min_edit_script(a: &[TokenId], b: &[TokenId], costs: &AlignmentCosts) -> EditScript {
    moves_to_script(&align_moves(a, b, costs), a, b)
}

#[cfg(test)]
pub(crate) fn min_edit_script_with_limit(
    a: &[TokenId],
    b: &[TokenId],
    costs: &AlignmentCosts,
    limit: usize,
) -> EditScript {
    moves_to_script(&align_moves_with_limit(a, b, costs, limit), a, b)
}

/// Minimal script computed over whole words (unit costs per word), then
/// expanded back to token spans.
pub fn word_level_script(a: &[TokenId], b: &[TokenId], vocab: &Vocab) -> EditScript {
    let wa: Vec<&[TokenId]> = segment_words(a, vocab).into_iter().map(|r| &a[r]).collect();
    let wb: Vec<&[TokenId]> = segment_words(b, vocab).into_iter().map(|r| &b[r]).collect();
    let moves = align_moves(&wa, &wb, &AlignmentCosts::UNIT);
    let mut ops = Vec::new();
    let (mut i, mut j) = (0, 0);
    for mv in moves {
        match mv {
            Move::Keep => {
                ops.extend(std::iter::repeat_with(EditOp::keep).take(wa[i].len()));
                i += 1;
                j += 1;
            }
            Move::Replace => {
                ops.push(EditOp::replace(wa[i].len(), wb[j].to_vec()));
                i += 1;
                j += 1;
            }
            Move::Delete => {
                ops.push(EditOp::delete(wa[i].len()));
                i += 1;
            }
            Move::Insert => {
                ops.push(EditOp::insert(wb[j].to_vec()));
                j += 1;
            }
        }
    }
    normalize_script(&EditScript::new(ops), a).expect("word moves form a valid script")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(s: &str) -> Vec<TokenId> {
        s.bytes().map(TokenId::from).collect()
    }

    #[test]
    fn identical_sequences_cost_nothing() {
        let a = ids("abc");
        assert_eq!(edit_distance(&a, &a, &AlignmentCosts::UNIT), 0.0);
        assert_eq!(min_edit_script(&a, &a, &AlignmentCosts::UNIT), EditScript::all_keep(3));
    }

    #[test]
    fn pure_insertion() {
        let b = ids("abc");
        assert_eq!(edit_distance(&[], &b, &AlignmentCosts::UNIT), 3.0);
        let b = ids("xy");
        assert_eq!(
            min_edit_script(&[], &b, &AlignmentCosts::UNIT),
            EditScript::new(vec![EditOp::insert(b.clone())])
        );
    }

    #[test]
    fn tie_break_prefers_replace_over_delete_insert() {
        let script = min_edit_script(&ids("ab"), &ids("xb"), &AlignmentCosts::UNIT);
        assert_eq!(script, EditScript::new(vec![EditOp::replace(1, ids("x")), EditOp::keep()]));
    }

    #[test]
    fn weighted_costs_change_the_path() {
        let costs = AlignmentCosts::new(1.0, 1.0, 2.0).unwrap();
        let (a, b) = (ids("a"), ids("b"));
        assert_eq!(edit_distance(&a, &b, &costs), 2.0);
        let script = min_edit_script(&a, &b, &costs);
        assert_eq!(script.cost(&costs), 2.0);
        assert_eq!(script.apply(&a).unwrap(), b);
        assert!(AlignmentCosts::new(1.0, 1.0, 2.5).is_err());
        assert!(AlignmentCosts::new(-1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn hirschberg_matches_full_table_cost() {
        let a = ids("the quick brown fox jumps over the lazy dog");
        let b = ids("a quick brown dog leaps over lazy foxes");
        let costs = AlignmentCosts::UNIT;
        let full = min_edit_script(&a, &b, &costs);
        let split = min_edit_script_with_limit(&a, &b, &costs, 16);
        assert_eq!(split.apply(&a).unwrap(), b);
        assert_eq!(split.cost(&costs), full.cost(&costs));
        assert_eq!(full.cost(&costs), edit_distance(&a, &b, &costs));
    }

    #[test]
    fn word_level_replaces_whole_words() {
        let v = Vocab::from_content(["Ge", "##werk", "##schaften", "von", "die", "Partei"]).unwrap();
        let a = v.encode("die Ge ##werk ##schaften von");
        let b = v.encode("die Partei von");
        let script = word_level_script(&a, &b, &v);
        assert_eq!(
            script,
            EditScript::new(vec![EditOp::keep(), EditOp::replace(3, v.encode("Partei")), EditOp::keep()])
        );
        assert_eq!(word_level_script(&a, &a, &v), EditScript::all_keep(a.len()));
    }
}
