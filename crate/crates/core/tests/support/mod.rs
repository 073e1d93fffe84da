//! Brute-force search oracle shared by integration tests.

use editdiff::decoding::{DecodeConfig, Decoder, Strategy};
use editdiff::model::{step_log_likelihood, Generator, Tagger};
use editdiff::rng::seeded;
use editdiff::{TaggedEdits, TokenId};

/// Every payload assignment for `spans` spans, each 1..=max_span tokens
/// from `content`, with at most `budget` tokens in total.
fn fillings(spans: usize, max_span: usize, budget: usize, content: &[TokenId]) -> Vec<Vec<Vec<TokenId>>> {
    if spans == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    let mut payload: Vec<TokenId> = Vec::new();
    fn grow(
        payload: &mut Vec<TokenId>,
        spans: usize,
        max_span: usize,
        budget: usize,
        content: &[TokenId],
        out: &mut Vec<Vec<Vec<TokenId>>>,
    ) {
        let len = payload.len();
        // the remaining spans need a token each
        if len >= 1 && len + spans - 1 <= budget {
            for mut rest in fillings(spans - 1, max_span, budget - len, content) {
                rest.insert(0, payload.clone());
                out.push(rest);
            }
        }
        if len < max_span && len + spans <= budget {
            for &t in content {
                payload.push(t);
                grow(payload, spans, max_span, budget, content, out);
                payload.pop();
            }
        }
    }
    grow(&mut payload, spans, max_span, budget, content, &mut out);
    out
}

/// Highest total log-likelihood over every chain of `cfg.steps` steps the
/// decoder can reach from `x`: argmax tags at each step, any payloads.
pub fn best_chain_logp(
    tagger: &dyn Tagger,
    generator: &dyn Generator,
    content: &[TokenId],
    cfg: &DecodeConfig,
    x: &[TokenId],
    source: Option<&[TokenId]>,
    steps: usize,
) -> f64 {
    if steps == 0 {
        return 0.0;
    }
    let range = content[0]..content[content.len() - 1] + 1;
    let d = Decoder::with_content(tagger, generator, range, cfg.clone()).unwrap();
    let greedy = d.propose(x, Strategy::Greedy, source, None, &mut seeded(0)).unwrap();
    let tags = TaggedEdits::from_script(&greedy[0].script, x.len()).unwrap().tags;
    let spans = TaggedEdits::slots(&tags).unwrap().len();
    let surviving = tags[1..].iter().filter(|t| t.index() == 0 || t.index() == 3).count();
    let mut best = f64::NEG_INFINITY;
    for payloads in fillings(spans, cfg.max_span_len, cfg.max_len - surviving, content) {
        let script = TaggedEdits { tags: tags.clone(), payloads }.to_script().unwrap();
        let next = script.apply(x).unwrap();
        let here = step_log_likelihood(x, &script, tagger, generator, source).unwrap().total();
        best = best.max(here + best_chain_logp(tagger, generator, content, cfg, &next, source, steps - 1));
    }
    best
}
