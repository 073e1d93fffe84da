//! Vocabulary with reserved control tokens and word segmentation.
//!
//! File format: one surface form per line, UTF-8. The first
//! [`RESERVED.len()`](RESERVED) lines are the fixed reserved header, so the
//! line number of every entry is its id.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
/// Terminates an INSERT or REPLACE payload during generation.
pub const END_OF_SPAN: TokenId = 3;
pub const UNK: TokenId = 4;

/// Surface forms of the reserved ids, in id order.
pub const RESERVED: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<eos_span>", "<unk>"];

/// Number of reserved ids; the first content id.
pub const RESERVED_COUNT: usize = RESERVED.len();

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, TokenId>,
}

impl Vocab {
    /// Builds a vocabulary from content surface forms. Reserved tokens are
    /// prepended automatically.
    pub fn from_content<I, S>(content: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(content.into_iter().map(Into::into))
            .collect::<Vec<_>>();
        Self::from_tokens(tokens)
    }

    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(Error::InvalidVocab(format!(
                    "entry {i} ({tok:?}) is empty or contains whitespace"
                )));
            }
            if i >= RESERVED_COUNT && RESERVED.contains(&tok.as_str()) {
                return Err(Error::InvalidVocab(format!("reserved token {tok} listed as content")));
            }
            if ids.insert(tok.clone(), i as TokenId).is_some() {
                return Err(Error::InvalidVocab(format!("duplicate entry {tok:?}")));
            }
        }
        Ok(Self { tokens, ids })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let lines: Vec<String> = text.lines().map(str::to_string).collect();
        if lines.len() < RESERVED_COUNT {
            return Err(Error::InvalidVocab("missing reserved header".into()));
        }
        for (i, expected) in RESERVED.iter().enumerate() {
            if lines[i] != *expected {
                return Err(Error::InvalidVocab(format!(
                    "line {} must be {expected}, found {:?}",
                    i + 1,
                    lines[i]
                )));
            }
        }
        Self::from_tokens(lines)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for tok in &self.tokens {
            out.push_str(tok);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_file_string().as_bytes());
        let mut hex = String::with_capacity(64);
        for b in digest {
            let _ = write!(hex, "{b:02x}");
        }
        hex
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == RESERVED_COUNT
    }

    pub fn id(&self, surface: &str) -> Option<TokenId> {
        self.ids.get(surface).copied()
    }

    pub fn surface(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// Ids that may appear in content and be drawn as distractors.
    pub fn content_ids(&self) -> Range<TokenId> {
        RESERVED_COUNT as TokenId..self.tokens.len() as TokenId
    }

    pub fn content_len(&self) -> usize {
        self.tokens.len() - RESERVED_COUNT
    }

    pub fn is_reserved(id: TokenId) -> bool {
        (id as usize) < RESERVED_COUNT
    }

    /// Whitespace tokenization; unknown words map to UNK.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.split_whitespace().map(|w| self.id(w).unwrap_or(UNK)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .map(|&id| self.surface(id).unwrap_or("<?>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks the content-sequence invariant: every id is in range and none
    /// of PAD, BOS, EOS or END_OF_SPAN occurs.
    pub fn check_content(&self, seq: &[TokenId]) -> Result<()> {
        for &id in seq {
            if id as usize >= self.len() {
                return Err(Error::VocabMismatch { id, size: self.len() });
            }
            if matches!(id, PAD | BOS | EOS | END_OF_SPAN) {
                return Err(Error::Data(format!("control token {id} inside content")));
            }
        }
        Ok(())
    }

    /// A token continues the previous word when it carries a leading `##`.
    pub fn is_continuation(&self, id: TokenId) -> bool {
        !Self::is_reserved(id) && self.surface(id).is_some_and(|s| s.starts_with("##") && s.len() > 2)
    }

    /// A token joins the next one when it carries a trailing `@@`.
    pub fn joins_next(&self, id: TokenId) -> bool {
        !Self::is_reserved(id) && self.surface(id).is_some_and(|s| s.ends_with("@@") && s.len() > 2)
    }
}

/// Partitions `seq` into contiguous word spans using subword continuation
/// markers (`##piece` or `piece@@`).
pub fn segment_words(seq: &[TokenId], vocab: &Vocab) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = 0;
    for i in 1..seq.len() {
        let continues = vocab.is_continuation(seq[i]) || vocab.joins_next(seq[i - 1]);
        if !continues {
            spans.push(start..i);
            start = i;
        }
    }
    if !seq.is_empty() {
        spans.push(start..seq.len());
    }
    spans
}
