//! Run configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use editdiff::decoding::{DecodeConfig, InitMode, InitSpec, Method, RandomLenPolicy};
use editdiff::evaluation::Metric;
use editdiff::model::TrainConfig;
use editdiff::tasks::{task_vocab, Split, Task};
use editdiff::{CorruptionConfig, Vocab};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub size: usize,
    pub seed: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self { size: 1000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub method: Method,
    pub init: InitMode,
    pub random_len: RandomLenPolicy,
}

impl Default for SearchSection {
    fn default() -> Self {
        Self { method: Method::Greedy, init: InitMode::Source, random_len: RandomLenPolicy::default() }
    }
}

impl SearchSection {
    pub fn init_spec(&self) -> InitSpec {
        InitSpec { mode: self.init, random_len: self.random_len }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub split: Split,
    /// Evaluate at most this many examples of the split.
    pub limit: Option<usize>,
    /// Step counts for the steps-versus-score curve; empty disables it.
    pub curve: Vec<usize>,
    pub metric: Metric,
    pub bench: bool,
    pub repetitions: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self { split: Split::Test, limit: None, curve: Vec::new(), metric: Metric::Bleu, bench: false, repetitions: 5 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub corpus: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: Task,
    /// Vocabulary file; the built-in task vocabulary when absent.
    pub vocab: Option<PathBuf>,
    pub synth: SynthSection,
    pub corruption: CorruptionConfig,
    pub model: TrainConfig,
    pub decode: DecodeConfig,
    pub search: SearchSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Copy,
            vocab: None,
            synth: SynthSection::default(),
            // Models learn to reverse the last corruption step; one step per
            // example trains best on the synthetic tasks.
            corruption: CorruptionConfig { max_steps: 1, ..CorruptionConfig::default() },
            model: TrainConfig::default(),
            decode: DecodeConfig::default(),
            search: SearchSection::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Usage(format!("config: {}", e.message())))
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.corruption.validate()?;
        self.model.validate()?;
        self.decode.validate()?;
        if self.eval.repetitions < 3 && self.eval.bench {
            return Err(CliError::Usage("eval.repetitions must be at least 3".into()));
        }
        if self.eval.curve.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::Usage("eval.curve must be strictly ascending".into()));
        }
        if let Some(v) = &self.vocab {
            require_file(v, "vocabulary")?;
        }
        Ok(())
    }

    /// The configuration as echoed into artifacts.
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    pub fn vocab(&self) -> CliResult<Vocab> {
        match &self.vocab {
            None => Ok(task_vocab()),
            Some(p) => Ok(Vocab::load(p)?),
        }
    }
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!("{what} file {} does not exist", path.display())))
    }
}

/// Checks that `path` can be created: its directory must exist.
pub fn require_writable(path: &Path, what: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if dir.is_dir() {
        Ok(())
    } else {
        Err(CliError::Data(format!("directory for {what} {} does not exist", path.display())))
    }
}

pub fn required<'a>(path: &'a Option<PathBuf>, what: &str, flag: &str) -> CliResult<&'a Path> {
    path.as_deref().ok_or_else(|| CliError::Usage(format!("no {what} given (use {flag} or paths in the config)")))
}
