//! Training loop: one corrupted example per target per epoch, tag
//! cross-entropy plus teacher-forced payload cross-entropy.

use serde::{Deserialize, Serialize};

use super::checkpoint::{Checkpoint, Family};
use super::loglinear::{LogLinearConfig, LogLinearModel};
use super::neural::{NeuralConfig, NeuralModel, StepExample};
use super::posterior::EditPrior;
use super::Model;
use crate::corruption::Corruptor;
use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::{TokenId, Vocab};

/// A training pair; `source` is absent for unconditional tasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainPair {
    pub source: Option<Vec<TokenId>>,
    pub target: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub family: Family,
    pub epochs: usize,
    pub tag_weight: f64,
    pub gen_weight: f64,
    pub seed: u64,
    pub loglinear: LogLinearConfig,
    pub neural: NeuralConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            family: Family::LogLinear,
            epochs: 3,
            tag_weight: 1.0,
            gen_weight: 1.0,
            seed: 0,
            loglinear: LogLinearConfig::default(),
            neural: NeuralConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let weights_ok = [self.tag_weight, self.gen_weight].iter().all(|w| w.is_finite() && *w >= 0.0);
        if !weights_ok {
            return Err(Error::InvalidConfig("loss weights must be finite and non-negative".into()));
        }
        if self.family == Family::Neural {
            self.neural.validate()?;
        }
        Ok(())
    }
}

pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    /// Weighted loss of every update, in order.
    pub losses: Vec<f64>,
}

/// Trains a fresh model of `cfg.family` on `pairs`. `config` is echoed into
/// the checkpoint header.
pub fn train(
    pairs: &[TrainPair],
    vocab: &Vocab,
    corruptor: &Corruptor,
    cfg: &TrainConfig,
    config: serde_json::Value,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    for pair in pairs {
        vocab.check_content(&pair.target)?;
        if let Some(src) = &pair.source {
            vocab.check_content(src)?;
        }
    }
    let mut model = match cfg.family {
        Family::LogLinear => {
            let mut m = LogLinearModel::new(vocab.len(), cfg.loglinear);
            m.tagger.set_prior(Some(EditPrior::from_config(corruptor.config(), vocab.content_len())));
            Model::LogLinear(m)
        }
        Family::Neural => Model::Neural(NeuralModel::new(vocab.len(), cfg.neural)?),
    };
    let mut losses = Vec::with_capacity(cfg.epochs * pairs.len());
    for epoch in 0..cfg.epochs {
        for (i, pair) in pairs.iter().enumerate() {
            let step = losses.len();
            let mut r = rng::stream(cfg.seed, (epoch * pairs.len() + i) as u64);
            let ex = corruptor.make_training_example(&pair.target, &mut r)?;
            let source = pair.source.as_deref();
            let loss = match &mut model {
                Model::LogLinear(m) => {
                    let (tag, generation, _) = m.update(&ex.input, source, &ex.tags, &ex.payloads)?;
                    cfg.tag_weight * tag + cfg.gen_weight * generation
                }
                Model::Neural(m) => {
                    let step_ex = StepExample { x: &ex.input, source, tags: &ex.tags, payloads: &ex.payloads };
                    let g = m.gradients(&step_ex, cfg.tag_weight, cfg.gen_weight)?;
                    let loss = cfg.tag_weight * g.tag_loss + cfg.gen_weight * g.gen_loss;
                    if loss.is_finite() {
                        m.apply(&g);
                    }
                    loss
                }
            };
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step, loss });
            }
            losses.push(loss);
        }
    }
    if let Model::LogLinear(m) = &mut model {
        m.finish();
    }
    let step = losses.len() as u64;
    Ok(TrainOutcome { checkpoint: Checkpoint::new(model, vocab, config, step), losses })
}

/// Mean of the first and last `fraction` of `losses`.
pub fn loss_ends(losses: &[f64], fraction: f64) -> (f64, f64) {
    let k = ((losses.len() as f64 * fraction).ceil() as usize).clamp(1, losses.len().max(1));
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len().max(1) as f64;
    (mean(&losses[..k.min(losses.len())]), mean(&losses[losses.len().saturating_sub(k)..]))
}
