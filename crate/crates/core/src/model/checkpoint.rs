//! Checkpoint container: magic bytes, a length-prefixed JSON header, then a
//! little-endian parameter blob.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loglinear::{InterpolatedGenerator, LogLinearConfig, LogLinearModel, LogLinearTagger};
use super::neural::{NeuralConfig, NeuralModel};
use super::Model;
use crate::error::{Error, Result};
use crate::vocab::Vocab;

pub const MAGIC: &[u8; 8] = b"EDITDIFF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    LogLinear,
    Neural,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::LogLinear => "loglinear",
            Family::Neural => "neural",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub vocab_hash: String,
    pub family: Family,
    pub hyperparameters: serde_json::Value,
    /// Resolved configuration the checkpoint was trained under.
    pub config: serde_json::Value,
    pub step: u64,
}

pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub model: Model,
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    pub buf: Vec<u8>,
}

impl ByteWriter {
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for x in v {
            self.f64(*x);
        }
    }
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or_else(|| Error::Checkpoint("parameter blob is truncated".into()))?;
        self.pos = end;
        Ok(bytes.try_into().expect("slice length"))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.buf.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible length {v}")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    pub fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.usize()?;
        (0..n).map(|_| self.f64()).collect()
    }

    pub fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

impl Checkpoint {
    pub fn new(model: Model, vocab: &Vocab, config: serde_json::Value, step: u64) -> Self {
        let hyperparameters = match &model {
            Model::LogLinear(m) => serde_json::to_value(m.config),
            Model::Neural(m) => serde_json::to_value(m.config),
        }
        .expect("hyperparameters serialize");
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            vocab_hash: vocab.hash(),
            family: model.family(),
            hyperparameters,
            config,
            step,
        };
        Self { header, model }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serializes");
        let mut blob = ByteWriter::default();
        match &self.model {
            Model::LogLinear(m) => {
                m.tagger.write(&mut blob);
                m.generator.write(&mut blob);
            }
            Model::Neural(m) => m.write(&mut blob),
        }
        let mut out = Vec::with_capacity(MAGIC.len() + 12 + header.len() + blob.buf.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        out.extend_from_slice(&(blob.buf.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob.buf);
        out
    }

    /// Parses a checkpoint, rejecting it unless it was trained under `vocab`.
    pub fn from_bytes(bytes: &[u8], vocab: &Vocab) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        if r.take::<8>().ok().as_ref() != Some(MAGIC) {
            return Err(Error::Checkpoint("not a checkpoint file".into()));
        }
        let header_len = r.u32()? as usize;
        let header_bytes = bytes
            .get(r.pos..r.pos + header_len)
            .ok_or_else(|| Error::Checkpoint("header is truncated".into()))?;
        r.pos += header_len;
        let header: CheckpointHeader = serde_json::from_slice(header_bytes)?;
        if header.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", header.format_version)));
        }
        let expected = vocab.hash();
        if header.vocab_hash != expected {
            return Err(Error::VocabHashMismatch { expected, actual: header.vocab_hash });
        }
        let blob_len = r.usize()?;
        let blob = bytes
            .get(r.pos..r.pos + blob_len)
            .ok_or_else(|| Error::Checkpoint("parameter blob is truncated".into()))?;
        if r.pos + blob_len != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after parameter blob".into()));
        }
        let mut br = ByteReader::new(blob);
        let model = match header.family {
            Family::LogLinear => {
                let config: LogLinearConfig = serde_json::from_value(header.hyperparameters.clone())?;
                let tagger = LogLinearTagger::read(&mut br)?;
                let generator = InterpolatedGenerator::read(&mut br)?;
                Model::LogLinear(LogLinearModel { tagger, generator, config })
            }
            Family::Neural => {
                let config: NeuralConfig = serde_json::from_value(header.hyperparameters.clone())?;
                Model::Neural(NeuralModel::read(&mut br, config)?)
            }
        };
        if !br.finished() {
            return Err(Error::Checkpoint("parameter blob has unread bytes".into()));
        }
        if model.tagger().vocab_size() != vocab.len() {
            return Err(Error::Checkpoint("parameter shapes disagree with the vocabulary".into()));
        }
        Ok(Self { header, model })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>, vocab: &Vocab) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?, vocab)
    }
}
