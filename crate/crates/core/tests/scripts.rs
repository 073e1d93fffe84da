use editdiff::alignment::{align_moves, Move};
use editdiff::{
    apply_script, edit_distance, invert_script, min_edit_script, normalize_script, AlignmentCosts, EditOp,
    EditScript, EditTag, TaggedEdits, TokenId,
};
use proptest::prelude::*;

fn tokens(max_len: usize) -> impl Strategy<Value = Vec<TokenId>> {
    prop::collection::vec(5u32..10, 0..=max_len)
}

/// A source plus an arbitrary valid script over it.
fn source_and_script() -> impl Strategy<Value = (Vec<TokenId>, EditScript)> {
    let raw = prop::collection::vec((0u8..4, 1usize..4, prop::collection::vec(5u32..10, 1..4)), 0..16);
    (tokens(10), raw).prop_map(|(src, raw)| {
        let mut ops = Vec::new();
        let mut pos = 0;
        for (kind, n, payload) in raw {
            let left = src.len() - pos;
            let op = match kind {
                0 if left > 0 => EditOp::keep(),
                1 if left > 0 => EditOp::delete(n.min(left)),
                2 if left > 0 => EditOp::replace(n.min(left), payload),
                _ => EditOp::insert(payload),
            };
            pos += op.consume;
            ops.push(op);
        }
        ops.extend(std::iter::repeat_with(EditOp::keep).take(src.len() - pos));
        (src, EditScript::new(ops))
    })
}

/// Applies ops by walking an iterator over the source.
fn apply_oracle(script: &EditScript, src: &[TokenId]) -> Vec<TokenId> {
    let mut it = src.iter();
    let mut out = Vec::new();
    for op in &script.ops {
        let taken: Vec<TokenId> = it.by_ref().take(op.consume).copied().collect();
        assert_eq!(taken.len(), op.consume);
        if op.tag == EditTag::Keep {
            out.extend(taken);
        } else {
            out.extend(&op.payload);
        }
    }
    assert!(it.next().is_none());
    out
}

/// Memoized recursive edit distance, independent of the library's tables.
fn distance_oracle(a: &[TokenId], b: &[TokenId], c: &AlignmentCosts) -> f64 {
    fn go(i: usize, j: usize, a: &[TokenId], b: &[TokenId], c: &AlignmentCosts, memo: &mut Vec<Vec<Option<f64>>>) -> f64 {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            (b.len() - j) as f64 * c.insert
        } else if j == b.len() {
            (a.len() - i) as f64 * c.delete
        } else {
            let sub = if a[i] == b[j] { 0.0 } else { c.replace };
            (go(i + 1, j + 1, a, b, c, memo) + sub)
                .min(go(i + 1, j, a, b, c, memo) + c.delete)
                .min(go(i, j + 1, a, b, c, memo) + c.insert)
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(0, 0, a, b, c, &mut memo)
}

fn costs() -> impl Strategy<Value = AlignmentCosts> {
    (1u8..4, 1u8..4, 0u8..4).prop_filter_map("replace within insert + delete", |(i, d, r)| {
        AlignmentCosts::new(i as f64, d as f64, r as f64).ok()
    })
}

proptest! {
    #[test]
    fn apply_matches_oracle((src, script) in source_and_script()) {
        prop_assert_eq!(apply_script(&script, &src).unwrap(), apply_oracle(&script, &src));
    }

    #[test]
    fn inverse_restores_source((src, script) in source_and_script()) {
        let out = apply_script(&script, &src).unwrap();
        let inv = invert_script(&script, &src).unwrap();
        prop_assert_eq!(apply_script(&inv, &out).unwrap(), src);
    }

    #[test]
    fn consumption_and_production_are_conserved((src, script) in source_and_script()) {
        let out = apply_script(&script, &src).unwrap();
        prop_assert_eq!(script.consumed(), src.len());
        let produced: usize = script
            .ops
            .iter()
            .map(|op| if op.tag == EditTag::Keep { 1 } else { op.payload.len() })
            .sum();
        prop_assert_eq!(produced, out.len());
    }

    #[test]
    fn normalization_preserves_output_and_is_idempotent((src, script) in source_and_script()) {
        let norm = normalize_script(&script, &src).unwrap();
        prop_assert_eq!(apply_script(&norm, &src).unwrap(), apply_script(&script, &src).unwrap());
        prop_assert_eq!(normalize_script(&norm, &src).unwrap(), norm.clone());
        prop_assert_eq!(EditScript::from_json(&norm.to_json()).unwrap(), norm);
    }

    #[test]
    fn tagged_view_round_trips((src, script) in source_and_script()) {
        let tagged = TaggedEdits::from_script(&script, src.len()).unwrap();
        prop_assert_eq!(tagged.tags.len(), src.len() + 1);
        let rebuilt = tagged.to_script().unwrap();
        prop_assert_eq!(apply_script(&rebuilt, &src).unwrap(), apply_script(&script, &src).unwrap());
        prop_assert_eq!(TaggedEdits::from_script(&rebuilt, src.len()).unwrap(), tagged);
    }

    #[test]
    fn minimal_scripts_are_optimal_and_replay(a in tokens(12), b in tokens(12), c in costs()) {
        let script = min_edit_script(&a, &b, &c);
        prop_assert_eq!(apply_script(&script, &a).unwrap(), b.clone());
        let oracle = distance_oracle(&a, &b, &c);
        prop_assert_eq!(script.cost(&c), oracle);
        prop_assert_eq!(edit_distance(&a, &b, &c), oracle);
    }

    #[test]
    fn alignment_moves_are_monotone(a in tokens(12), b in tokens(12)) {
        let moves = align_moves(&a, &b, &AlignmentCosts::UNIT);
        let (mut i, mut j) = (0usize, 0usize);
        for mv in moves {
            match mv {
                Move::Keep => {
                    prop_assert_eq!(a[i], b[j]);
                    i += 1;
                    j += 1;
                }
                Move::Replace => {
                    i += 1;
                    j += 1;
                }
                Move::Delete => i += 1,
                Move::Insert => j += 1,
            }
        }
        prop_assert_eq!((i, j), (a.len(), b.len()));
    }
}
