//! Synthetic sequence-to-sequence tasks over a small fixed vocabulary.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, splitmix64};
use crate::vocab::{TokenId, Vocab};

/// Plain words every task draws from.
pub const WORDS: [&str; 40] = [
    "the", "a", "cat", "dog", "bird", "man", "woman", "child", "house", "tree", "river", "city", "road", "car",
    "book", "song", "food", "day", "night", "rain", "sees", "finds", "takes", "makes", "likes", "walks", "runs",
    "reads", "eats", "sings", "near", "under", "over", "with", "and", "or", "old", "small", "red", "quiet",
];

/// Word swaps applied by the substitute task.
pub const LEXICON: [(&str, &str); 8] = [
    ("good", "bad"),
    ("great", "awful"),
    ("love", "hate"),
    ("happy", "sad"),
    ("best", "worst"),
    ("nice", "rude"),
    ("fresh", "stale"),
    ("friendly", "hostile"),
];

pub const OPEN: &str = "(";
pub const CLOSE: &str = ")";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "copy")]
    Copy,
    #[serde(rename = "reverse")]
    Reverse,
    #[serde(rename = "substitute")]
    Substitute,
    #[serde(rename = "summarize-synthetic")]
    SummarizeSynthetic,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Copy, Task::Reverse, Task::Substitute, Task::SummarizeSynthetic];

    pub fn name(self) -> &'static str {
        match self {
            Task::Copy => "copy",
            Task::Reverse => "reverse",
            Task::Substitute => "substitute",
            Task::SummarizeSynthetic => "summarize-synthetic",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Task::ALL.into_iter().find(|t| t.name() == s).ok_or_else(|| Error::Data(format!("unknown task `{s}`")))
    }
}

/// Vocabulary shared by all synthetic tasks.
pub fn task_vocab() -> Vocab {
    let words = WORDS
        .iter()
        .copied()
        .chain(LEXICON.iter().map(|p| p.0))
        .chain(LEXICON.iter().map(|p| p.1))
        .chain([OPEN, CLOSE]);
    Vocab::from_content(words).expect("built-in words are distinct")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "dev" => Some(Split::Dev),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// 80/10/10 assignment by a hash of the example index.
pub fn split_of(index: u64) -> Split {
    match splitmix64(index ^ 0x7370_6c69_7473) % 10 {
        0..=7 => Split::Train,
        8 => Split::Dev,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub id: u64,
    pub split: Split,
    pub source: Vec<TokenId>,
    pub target: Vec<TokenId>,
}

fn ids(vocab: &Vocab, words: &[&str]) -> Vec<TokenId> {
    words.iter().map(|w| vocab.id(w).expect("task word in vocabulary")).collect()
}

/// `size` examples of `task`; example `i` depends only on `(seed, i)`.
pub fn synthesize(task: Task, size: usize, seed: u64) -> Vec<Record> {
    let vocab = task_vocab();
    (0..size as u64)
        .map(|id| {
            let mut r = rng::stream(seed, id);
            let (source, target): (Vec<&str>, Vec<&str>) = match task {
                Task::Copy | Task::Reverse => {
                    let len = r.gen_range(4..=10);
                    let s: Vec<&str> = (0..len).map(|_| *WORDS.choose(&mut r).expect("words")).collect();
                    let t = if task == Task::Copy { s.clone() } else { s.iter().rev().copied().collect() };
                    (s, t)
                }
                Task::Substitute => {
                    let len = r.gen_range(4..=10);
                    let mut s = Vec::with_capacity(len);
                    let mut t = Vec::with_capacity(len);
                    for _ in 0..len {
                        if r.gen_bool(0.3) {
                            let (from, to) = *LEXICON.choose(&mut r).expect("lexicon");
                            s.push(from);
                            t.push(to);
                        } else {
                            let w = *WORDS.choose(&mut r).expect("words");
                            s.push(w);
                            t.push(w);
                        }
                    }
                    (s, t)
                }
                Task::SummarizeSynthetic => {
                    let len = r.gen_range(4..=8);
                    let t: Vec<&str> = (0..len).map(|_| *WORDS.choose(&mut r).expect("words")).collect();
                    let mut s = t.clone();
                    for _ in 0..r.gen_range(1..=2) {
                        let at = r.gen_range(0..=s.len());
                        let mut aside = vec![OPEN];
                        aside.extend((0..r.gen_range(1..=3)).map(|_| *WORDS.choose(&mut r).expect("words")));
                        aside.push(CLOSE);
                        s.splice(at..at, aside);
                    }
                    (s, t)
                }
            };
            Record { id, split: split_of(id), source: ids(&vocab, &source), target: ids(&vocab, &target) }
        })
        .collect()
}

/// True when `sub` can be obtained from `seq` by deleting tokens.
pub fn is_subsequence(sub: &[TokenId], seq: &[TokenId]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|t| it.any(|s| s == t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tasks_have_their_defining_shape() {
        let v = task_vocab();
        let open = v.id(OPEN).unwrap();
        for r in synthesize(Task::Copy, 20, 1) {
            assert_eq!(r.source, r.target);
        }
        for r in synthesize(Task::Reverse, 20, 1) {
            assert_eq!(r.source.iter().rev().copied().collect::<Vec<_>>(), r.target);
        }
        for r in synthesize(Task::Substitute, 50, 1) {
            assert_eq!(r.source.len(), r.target.len());
            for (s, t) in r.source.iter().zip(&r.target) {
                let sw = v.surface(*s).unwrap();
                match LEXICON.iter().find(|p| p.0 == sw) {
                    Some(p) => assert_eq!(v.surface(*t).unwrap(), p.1),
                    None => assert_eq!(s, t),
                }
            }
        }
        for r in synthesize(Task::SummarizeSynthetic, 50, 1) {
            assert!(is_subsequence(&r.target, &r.source));
            assert!(r.source.contains(&open));
            assert!(!r.target.contains(&open));
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_split() {
        assert_eq!(synthesize(Task::Reverse, 30, 9), synthesize(Task::Reverse, 30, 9));
        assert_ne!(synthesize(Task::Reverse, 30, 9), synthesize(Task::Reverse, 30, 10));
        let n = 10_000;
        let train = (0..n).filter(|&i| split_of(i) == Split::Train).count() as f64 / n as f64;
        assert!((train - 0.8).abs() < 0.02);
        assert_eq!("summarize-synthetic".parse::<Task>().unwrap(), Task::SummarizeSynthetic);
        assert!("translate".parse::<Task>().is_err());
    }

    #[test]
    fn subsequence_check() {
        assert!(is_subsequence(&[1, 3], &[1, 2, 3]));
        assert!(!is_subsequence(&[3, 1], &[1, 2, 3]));
        assert!(is_subsequence(&[], &[]));
    }
}
