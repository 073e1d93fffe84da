//! JSONL artifacts. Every file starts with a header line carrying the tool
//! version and the resolved run configuration; readers skip it.

use std::io::Write;
use std::path::Path;

use editdiff::tasks::{split_of, Record, Split};
use editdiff::{TokenId, Vocab};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub kind: String,
    pub tool_version: String,
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderLine {
    header: Header,
}

pub fn header_line(kind: &str, config: &serde_json::Value) -> String {
    let h = HeaderLine { header: Header { kind: kind.into(), tool_version: TOOL_VERSION.into(), config: config.clone() } };
    serde_json::to_string(&h).expect("header serializes")
}

/// Non-empty lines of a JSONL file with the header removed.
pub fn body_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("{\"header\""))
}

/// A corpus line; `id` and `split` are optional so that plain
/// `{"source": .., "target": ..}` pairs are accepted.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairLine {
    id: Option<u64>,
    split: Option<Split>,
    source: Option<Vec<TokenId>>,
    target: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub id: u64,
    pub split: Split,
    pub source: Option<Vec<TokenId>>,
    pub target: Vec<TokenId>,
}

pub fn read_corpus(path: &Path, vocab: &Vocab) -> CliResult<Vec<Pair>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (index, (line_no, line)) in body_lines(&text).enumerate() {
        let bad = |m: String| CliError::Data(format!("{}:{line_no}: {m}", path.display()));
        let p: PairLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        vocab.check_content(&p.target).map_err(|e| bad(e.to_string()))?;
        if let Some(s) = &p.source {
            vocab.check_content(s).map_err(|e| bad(e.to_string()))?;
        }
        let id = p.id.unwrap_or(index as u64);
        out.push(Pair { id, split: p.split.unwrap_or_else(|| split_of(id)), source: p.source, target: p.target });
    }
    Ok(out)
}

pub fn corpus_text(records: &[Record], config: &serde_json::Value) -> String {
    let mut out = header_line("corpus", config);
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Writes `text` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Data(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                // A closed pipe (`| head`) is not an error.
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

/// Surface-text input lines: a file, or stdin for `None` or `-`.
pub fn read_text_lines(path: Option<&Path>) -> CliResult<Vec<String>> {
    let text = match path {
        Some(p) if p != Path::new("-") => std::fs::read_to_string(p)?,
        _ => std::io::read_to_string(std::io::stdin())?,
    };
    Ok(text.lines().map(str::to_string).collect())
}
