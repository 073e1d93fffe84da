use crate::chain::RevisionChain;
use crate::script::{EditScript, EditTag};
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStyle {
    /// `[-deleted-]`, `{+inserted+}`, `{~old => new~}`.
    Plain,
    /// Red struck deletions, blue insertions, orange replacements.
    Ansi,
}

const RESET: &str = "\x1b[0m";
const RED_STRIKE: &str = "\x1b[9;31m";
const BLUE: &str = "\x1b[34m";
const ORANGE: &str = "\x1b[38;5;208m";
const ORANGE_STRIKE: &str = "\x1b[9;38;5;208m";

fn words(vocab: &Vocab, ids: &[TokenId]) -> String {
    vocab.decode(ids)
}

fn show(vocab: &Vocab, ids: &[TokenId]) -> String {
    if ids.is_empty() {
        "<empty>".to_string()
    } else {
        words(vocab, ids)
    }
}

/// One step marked up against the revision it edits.
pub fn render_step(src: &[TokenId], script: &EditScript, vocab: &Vocab, style: TraceStyle) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    for op in &script.ops {
        let consumed = &src[i..i + op.consume];
        i += op.consume;
        let (old, new) = (words(vocab, consumed), words(vocab, &op.payload));
        parts.push(match (op.tag, style) {
            (EditTag::Keep, _) => old,
            (EditTag::Delete, TraceStyle::Plain) => format!("[-{old}-]"),
            (EditTag::Delete, TraceStyle::Ansi) => format!("{RED_STRIKE}{old}{RESET}"),
            (EditTag::Insert, TraceStyle::Plain) => format!("{{+{new}+}}"),
            (EditTag::Insert, TraceStyle::Ansi) => format!("{BLUE}{new}{RESET}"),
            (EditTag::Replace, TraceStyle::Plain) => format!("{{~{old} => {new}~}}"),
            (EditTag::Replace, TraceStyle::Ansi) => format!("{ORANGE_STRIKE}{old}{RESET} {ORANGE}{new}{RESET}"),
        });
    }
    if parts.is_empty() { "<empty>".to_string() } else { parts.join(" ") }
}

/// One line per revision: the starting sequence, then each step marked up
/// against the revision it edits.
pub fn render_trace(chain: &RevisionChain, vocab: &Vocab, style: TraceStyle) -> String {
    let steps = chain.step_count();
    let mut out = format!("step 0/{steps}: {}\n", show(vocab, chain.first()));
    for (k, script) in chain.scripts.iter().enumerate() {
        let body = render_step(&chain.revisions[k], script, vocab, style);
        out.push_str(&format!("step {}/{steps}: {body}\n", k + 1));
    }
    out
}
