//! Batch commands.

use std::path::{Path, PathBuf};

use editdiff::decoding::{render_trace, Decoder, InitMode, Method, TraceStyle};
use editdiff::evaluation::{
    evaluate, hardware_description, latency_bench, steps_curve, BenchEntry, EvalExample,
};
use editdiff::model::{train, Checkpoint, TrainPair};
use editdiff::rng;
use editdiff::tasks::{synthesize, Split};
use editdiff::{ChainRecord, CorruptionConfig, Corruptor, TokenId, Vocab};

use crate::artifacts::{corpus_text, emit, header_line, read_corpus, read_text_lines, Pair};
use crate::config::{require_file, require_writable, required, RunConfig};
use crate::error::{CliError, CliResult};

/// Distractor counts for unigram corruption, taken from the targets.
pub fn corruptor(cfg: &CorruptionConfig, vocab: &Vocab, targets: &[&[TokenId]]) -> CliResult<Corruptor> {
    let mut counts = vec![0u64; vocab.len()];
    for t in targets {
        for &id in *t {
            counts[id as usize] += 1;
        }
    }
    Ok(Corruptor::with_counts(cfg.clone(), vocab, &counts)?)
}

pub fn synth(cfg: &RunConfig, out: Option<&Path>, vocab_out: Option<&Path>) -> CliResult<()> {
    for p in out.into_iter().chain(vocab_out) {
        require_writable(p, "output")?;
    }
    if cfg.vocab.is_some() {
        return Err(CliError::Usage("synthetic tasks use their built-in vocabulary; drop `vocab`".into()));
    }
    let records = synthesize(cfg.task, cfg.synth.size, cfg.synth.seed);
    emit(out, &corpus_text(&records, &cfg.echo()))?;
    if let Some(p) = vocab_out {
        cfg.vocab()?.save(p)?;
    }
    Ok(())
}

fn corpus(cfg: &RunConfig, vocab: &Vocab) -> CliResult<Vec<Pair>> {
    let path = required(&cfg.paths.corpus, "corpus", "--corpus")?;
    require_file(path, "corpus")?;
    read_corpus(path, vocab)
}

pub fn train_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ckpt_path = required(&cfg.paths.checkpoint, "checkpoint path", "--checkpoint")?;
    require_writable(ckpt_path, "checkpoint")?;
    let vocab = cfg.vocab()?;
    let pairs: Vec<TrainPair> = corpus(cfg, &vocab)?
        .into_iter()
        .filter(|p| p.split == Split::Train)
        .map(|p| TrainPair { source: p.source, target: p.target })
        .collect();
    if pairs.is_empty() {
        return Err(CliError::Data("the corpus has no training examples".into()));
    }
    let targets: Vec<&[TokenId]> = pairs.iter().map(|p| p.target.as_slice()).collect();
    let c = corruptor(&cfg.corruption, &vocab, &targets)?;
    let out = train(&pairs, &vocab, &c, &cfg.model, cfg.echo())?;
    out.checkpoint.save(ckpt_path)?;
    let (first, last) = editdiff::model::train::loss_ends(&out.losses, 0.1);
    println!(
        "trained {} model on {} pairs: {} updates, loss {first:.4} -> {last:.4}; wrote {}",
        cfg.model.family,
        pairs.len(),
        out.losses.len(),
        ckpt_path.display()
    );
    Ok(())
}

pub fn load_checkpoint(cfg: &RunConfig, vocab: &Vocab) -> CliResult<Checkpoint> {
    let path = required(&cfg.paths.checkpoint, "checkpoint", "--checkpoint")?;
    require_file(path, "checkpoint")?;
    Ok(Checkpoint::load(path, vocab)?)
}

pub struct DecodeArgs {
    pub input: Option<PathBuf>,
    /// Unconditional samples instead of reading sources.
    pub count: Option<usize>,
    pub trace: bool,
    pub color: bool,
    pub trace_json: Option<PathBuf>,
}

pub fn decode(cfg: &RunConfig, args: &DecodeArgs) -> CliResult<()> {
    if let Some(p) = &args.input {
        if p != Path::new("-") {
            require_file(p, "input")?;
        }
    }
    if let Some(p) = &args.trace_json {
        require_writable(p, "trace")?;
    }
    let vocab = cfg.vocab()?;
    let ckpt = load_checkpoint(cfg, &vocab)?;
    let d = Decoder::new(ckpt.model.tagger(), ckpt.model.generator(), &vocab, cfg.decode.clone())?;
    let sources: Vec<Option<Vec<TokenId>>> = match args.count {
        Some(n) => {
            if matches!(cfg.search.init, InitMode::Source | InitMode::Ar) {
                return Err(CliError::Usage("--count needs --init null or random".into()));
            }
            vec![None; n]
        }
        None => read_text_lines(args.input.as_deref())?.iter().map(|l| Some(vocab.encode(l))).collect(),
    };
    let init = cfg.search.init_spec();
    let style = if args.color { TraceStyle::Ansi } else { TraceStyle::Plain };
    let mut text = String::new();
    let mut chains = header_line("chains", &cfg.echo());
    chains.push('\n');
    for (i, src) in sources.iter().enumerate() {
        let mut r = rng::stream(cfg.decode.seed, i as u64);
        let out = d
            .decode(src.as_deref(), &init, cfg.search.method, &mut r)
            .map_err(|e| CliError::Data(format!("input {}: {e}", i + 1)))?;
        if args.trace {
            text.push_str(&render_trace(&out.chain, &vocab, style));
            text.push_str(&format!("result: {}\n\n", vocab.decode(&out.tokens)));
        } else {
            text.push_str(&vocab.decode(&out.tokens));
            text.push('\n');
        }
        chains.push_str(&ChainRecord::new(&out.chain, cfg.decode.seed).to_line());
        chains.push('\n');
    }
    emit(None, &text)?;
    if let Some(p) = &args.trace_json {
        emit(Some(p), &chains)?;
    }
    Ok(())
}

pub fn eval(cfg: &RunConfig) -> CliResult<()> {
    if let Some(p) = &cfg.paths.report {
        require_writable(p, "report")?;
    }
    let vocab = cfg.vocab()?;
    let pairs = corpus(cfg, &vocab)?;
    let ckpt = load_checkpoint(cfg, &vocab)?;
    let examples: Vec<EvalExample> = pairs
        .into_iter()
        .filter(|p| p.split == cfg.eval.split)
        .take(cfg.eval.limit.unwrap_or(usize::MAX))
        .map(|p| EvalExample { id: p.id, source: p.source, reference: p.target })
        .collect();
    if examples.is_empty() {
        return Err(CliError::Data(format!("the corpus has no {:?} examples", cfg.eval.split)));
    }
    let d = Decoder::new(ckpt.model.tagger(), ckpt.model.generator(), &vocab, cfg.decode.clone())?;
    let init = cfg.search.init_spec();
    let seed = cfg.decode.seed;
    let mut report = evaluate(&d, &examples, &init, cfg.search.method, seed, cfg.echo())?;
    if !cfg.eval.curve.is_empty() {
        report.steps_curve = steps_curve(&d, &examples, &init, cfg.search.method, &cfg.eval.curve, cfg.eval.metric, seed)?;
    }
    if cfg.eval.bench {
        let entries: Vec<BenchEntry> = [Method::Greedy, Method::Nucleus, Method::Beam, Method::Beam2d]
            .into_iter()
            .map(|m| BenchEntry { label: m.name().into(), method: m, cfg: cfg.decode.clone() })
            .collect();
        report.latency = latency_bench(&d, &examples, &init, &entries, cfg.eval.repetitions, seed)?;
        report.hardware = Some(hardware_description());
    }
    let json = serde_json::to_string_pretty(&report)? + "\n";
    emit(cfg.paths.report.as_deref(), &json)?;
    if let Some(p) = &cfg.paths.report {
        if !report.steps_curve.is_empty() {
            emit(Some(&p.with_extension("curve.csv")), &report.curve_csv()?)?;
        }
        if !report.latency.is_empty() {
            emit(Some(&p.with_extension("latency.csv")), &report.latency_csv()?)?;
        }
    }
    eprintln!(
        "{} examples, {}: bleu {:.2} exact {:.4} edit distance {:.4}",
        report.records.len(),
        cfg.search.method.name(),
        report.bleu,
        report.exact_match,
        report.mean_edit_distance
    );
    Ok(())
}

pub fn corrupt(cfg: &RunConfig, out: Option<&Path>, trace: bool) -> CliResult<()> {
    if let Some(p) = out {
        require_writable(p, "output")?;
    }
    let vocab = cfg.vocab()?;
    let pairs = corpus(cfg, &vocab)?;
    let targets: Vec<&[TokenId]> = pairs.iter().map(|p| p.target.as_slice()).collect();
    let c = corruptor(&cfg.corruption, &vocab, &targets)?;
    let steps = cfg.corruption.max_steps;
    let mut lines = header_line("chains", &cfg.echo());
    lines.push('\n');
    let mut rendered = String::new();
    for (i, p) in pairs.iter().enumerate() {
        let mut r = rng::stream(cfg.corruption.seed, i as u64);
        let chain = c.corrupt_chain(&p.target, steps, &mut r)?;
        lines.push_str(&ChainRecord::new(&chain, cfg.corruption.seed).to_line());
        lines.push('\n');
        if trace {
            rendered.push_str(&render_trace(&chain, &vocab, TraceStyle::Plain));
            rendered.push('\n');
        }
    }
    match (out, trace) {
        (Some(p), true) => {
            emit(Some(p), &lines)?;
            emit(None, &rendered)
        }
        (Some(p), false) => emit(Some(p), &lines),
        (None, true) => emit(None, &rendered),
        (None, false) => emit(None, &lines),
    }
}
