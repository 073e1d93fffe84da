//! Flags and dispatch. Flags override the TOML configuration.

use std::io::IsTerminal;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use editdiff::decoding::{Decoder, TraceStyle};
use serde::de::DeserializeOwned;

use crate::artifacts::emit;
use crate::commands::{self, DecodeArgs};
use crate::config::{require_writable, RunConfig};
use crate::error::{CliError, CliResult};
use crate::session::Session;

#[derive(Debug, Parser)]
#[command(name = "editdiff", version, about = "Edit-based text diffusion: train, decode and inspect revision chains")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// copy, reverse, substitute or summarize-synthetic.
    #[arg(long, global = true)]
    pub task: Option<String>,
    /// Vocabulary file (one surface form per line).
    #[arg(long, global = true)]
    pub vocab: Option<PathBuf>,
    /// Seed of the command's own randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        size: Option<usize>,
        /// Corpus file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Train a tagger and generator on the train split of a corpus.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// loglinear or neural.
        #[arg(long)]
        family: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Denoise sources read line by line, or draw unconditional samples.
    Decode {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Source text, one per line; stdin when absent or `-`.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Draw this many unconditional samples instead of reading input.
        #[arg(long)]
        count: Option<usize>,
        #[command(flatten)]
        search: SearchFlags,
        /// Print every revision step.
        #[arg(long)]
        trace: bool,
        /// Colour the trace with ANSI escapes.
        #[arg(long)]
        color: bool,
        /// Write the revision chains as JSONL.
        #[arg(long)]
        trace_json: Option<PathBuf>,
    },
    /// Score a checkpoint on one split of a corpus.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// train, dev or test.
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        limit: Option<usize>,
        #[command(flatten)]
        search: SearchFlags,
        /// Comma-separated step counts for a steps-versus-score curve.
        #[arg(long, value_delimiter = ',')]
        curve: Option<Vec<usize>>,
        /// bleu or exact_match, for the curve.
        #[arg(long)]
        metric: Option<String>,
        /// Time every search method.
        #[arg(long)]
        bench: bool,
        #[arg(long)]
        reps: Option<usize>,
        /// Report file; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample corruption chains from the targets of a corpus.
    Corrupt {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Corruption steps per chain.
        #[arg(long)]
        steps: Option<usize>,
        /// Chains file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print each chain as text.
        #[arg(long)]
        trace: bool,
    },
    /// Revise a prototype step by step with the model.
    Interactive {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        source: Option<String>,
        #[arg(long)]
        prototype: Option<String>,
        /// Session log (JSONL).
        #[arg(long, default_value = "session.jsonl")]
        log: PathBuf,
        #[arg(long)]
        color: bool,
    },
}

#[derive(Debug, Args)]
pub struct SearchFlags {
    /// null, random, ar or source.
    #[arg(long)]
    pub init: Option<String>,
    /// greedy, beam, nucleus or 2dbeam.
    #[arg(long)]
    pub method: Option<String>,
    /// Denoising steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Token-level beam width.
    #[arg(long)]
    pub b: Option<usize>,
    /// Hypotheses kept across steps by 2dbeam.
    #[arg(long)]
    pub r: Option<usize>,
    /// Nucleus mass.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub early_stop: bool,
}

/// Parses a flag value the way the configuration file spells it.
fn named<T: DeserializeOwned>(value: &str, flag: &str) -> CliResult<T> {
    serde_json::from_value(serde_json::Value::String(value.into()))
        .map_err(|_| CliError::Usage(format!("invalid value `{value}` for --{flag}")))
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl SearchFlags {
    fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        if let Some(v) = &self.init {
            cfg.search.init = named(v, "init")?;
        }
        if let Some(v) = &self.method {
            cfg.search.method = named(v, "method")?;
        }
        let d = &mut cfg.decode;
        set(&mut d.steps, self.steps);
        set(&mut d.intra_width, self.b);
        set(&mut d.inter_width, self.r);
        set(&mut d.nucleus_p, self.p);
        set(&mut d.max_len, self.max_len);
        d.early_stop |= self.early_stop;
        Ok(())
    }
}

/// The resolved configuration: file, then common flags, then command flags.
pub fn resolve(common: &Common, command: &Command) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref())?;
    if let Some(t) = &common.task {
        cfg.task = named(t, "task")?;
    }
    set(&mut cfg.vocab, common.vocab.clone().map(Some));
    let seed = common.seed;
    match command {
        Command::Synth { size, .. } => {
            set(&mut cfg.synth.size, *size);
            set(&mut cfg.synth.seed, seed);
        }
        Command::Train { corpus, checkpoint, family, epochs } => {
            set(&mut cfg.paths.corpus, corpus.clone().map(Some));
            set(&mut cfg.paths.checkpoint, checkpoint.clone().map(Some));
            if let Some(f) = family {
                cfg.model.family = named(f, "family")?;
            }
            set(&mut cfg.model.epochs, *epochs);
            set(&mut cfg.model.seed, seed);
        }
        Command::Decode { checkpoint, search, .. } => {
            set(&mut cfg.paths.checkpoint, checkpoint.clone().map(Some));
            search.apply(&mut cfg)?;
            set(&mut cfg.decode.seed, seed);
        }
        Command::Eval { checkpoint, corpus, split, limit, search, curve, metric, bench, reps, report } => {
            set(&mut cfg.paths.checkpoint, checkpoint.clone().map(Some));
            set(&mut cfg.paths.corpus, corpus.clone().map(Some));
            set(&mut cfg.paths.report, report.clone().map(Some));
            if let Some(s) = split {
                cfg.eval.split = named(s, "split")?;
            }
            if let Some(m) = metric {
                cfg.eval.metric = named(m, "metric")?;
            }
            set(&mut cfg.eval.limit, limit.map(Some));
            set(&mut cfg.eval.curve, curve.clone());
            set(&mut cfg.eval.repetitions, *reps);
            cfg.eval.bench |= bench;
            search.apply(&mut cfg)?;
            set(&mut cfg.decode.seed, seed);
        }
        Command::Corrupt { corpus, steps, .. } => {
            set(&mut cfg.paths.corpus, corpus.clone().map(Some));
            set(&mut cfg.corruption.max_steps, *steps);
            set(&mut cfg.corruption.seed, seed);
        }
        Command::Interactive { checkpoint, .. } => {
            set(&mut cfg.paths.checkpoint, checkpoint.clone().map(Some));
            set(&mut cfg.decode.seed, seed);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(cli: Cli) -> CliResult<()> {
    let cfg = resolve(&cli.common, &cli.command)?;
    match cli.command {
        Command::Synth { out, vocab_out, .. } => commands::synth(&cfg, out.as_deref(), vocab_out.as_deref()),
        Command::Train { .. } => commands::train_cmd(&cfg),
        Command::Decode { input, count, trace, color, trace_json, .. } => {
            commands::decode(&cfg, &DecodeArgs { input, count, trace, color, trace_json })
        }
        Command::Eval { .. } => commands::eval(&cfg),
        Command::Corrupt { out, trace, .. } => commands::corrupt(&cfg, out.as_deref(), trace),
        Command::Interactive { source, prototype, log, color, .. } => {
            interactive(&cfg, source.as_deref(), prototype.as_deref(), &log, color)
        }
    }
}

fn interactive(
    cfg: &RunConfig,
    source: Option<&str>,
    prototype: Option<&str>,
    log: &std::path::Path,
    color: bool,
) -> CliResult<()> {
    require_writable(log, "session log")?;
    let vocab = cfg.vocab()?;
    let ckpt = commands::load_checkpoint(cfg, &vocab)?;
    let d = Decoder::new(ckpt.model.tagger(), ckpt.model.generator(), &vocab, cfg.decode.clone())?;
    let style = if color { TraceStyle::Ansi } else { TraceStyle::Plain };
    let mut s = Session::new(&d, &vocab, cfg.decode.seed, style);
    if let Some(src) = source {
        s.set_source(src);
    }
    s.set_prototype(prototype.unwrap_or("")).map_err(CliError::Data)?;
    let stdin = std::io::stdin();
    let prompt = stdin.is_terminal();
    s.run(stdin.lock(), std::io::stdout().lock(), prompt)?;
    emit(Some(log), &s.log(&cfg.echo()))
}
