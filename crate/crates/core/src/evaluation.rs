//! Metrics, steps-versus-score curves and decoding latency.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::alignment::{edit_distance, AlignmentCosts};
use crate::decoding::{DecodeConfig, Decoder, InitSpec, Method};
use crate::error::{Error, Result};
use crate::rng;
use crate::vocab::TokenId;

fn check_parallel(hyps: &[Vec<TokenId>], refs: &[Vec<TokenId>]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(Error::LengthMismatch { expected: refs.len(), actual: hyps.len() });
    }
    if hyps.is_empty() {
        return Err(Error::Data("metrics need at least one example".into()));
    }
    Ok(())
}

fn ngram_counts(seq: &[TokenId], n: usize) -> HashMap<&[TokenId], usize> {
    let mut counts = HashMap::new();
    for g in seq.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Corpus BLEU in `[0, 100]` with brevity penalty; precisions above unigrams
/// use add-one smoothing.
pub fn bleu(hyps: &[Vec<TokenId>], refs: &[Vec<TokenId>], max_n: usize) -> Result<f64> {
    check_parallel(hyps, refs)?;
    if max_n == 0 {
        return Err(Error::InvalidConfig("max_n must be positive".into()));
    }
    let mut matches = vec![0usize; max_n];
    let mut totals = vec![0usize; max_n];
    for (h, r) in hyps.iter().zip(refs) {
        for n in 1..=max_n {
            let rc = ngram_counts(r, n);
            for (g, c) in ngram_counts(h, n) {
                matches[n - 1] += c.min(rc.get(g).copied().unwrap_or(0));
            }
            totals[n - 1] += h.len().saturating_sub(n - 1);
        }
    }
    let hyp_len: usize = hyps.iter().map(Vec::len).sum();
    let ref_len: usize = refs.iter().map(Vec::len).sum();
    if hyp_len == 0 || matches[0] == 0 {
        return Ok(0.0);
    }
    let mut log_p = (matches[0] as f64 / totals[0] as f64).ln();
    for n in 1..max_n {
        log_p += ((matches[n] + 1) as f64 / (totals[n] + 1) as f64).ln();
    }
    let bp = if hyp_len > ref_len { 1.0 } else { (1.0 - ref_len as f64 / hyp_len as f64).exp() };
    Ok(100.0 * bp * (log_p / max_n as f64).exp())
}

pub fn exact_match(hyps: &[Vec<TokenId>], refs: &[Vec<TokenId>]) -> Result<f64> {
    check_parallel(hyps, refs)?;
    Ok(hyps.iter().zip(refs).filter(|(h, r)| h == r).count() as f64 / hyps.len() as f64)
}

pub fn mean_edit_distance(hyps: &[Vec<TokenId>], refs: &[Vec<TokenId>]) -> Result<f64> {
    check_parallel(hyps, refs)?;
    let total: f64 = hyps.iter().zip(refs).map(|(h, r)| edit_distance(h, r, &AlignmentCosts::UNIT)).sum();
    Ok(total / hyps.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Bleu,
    ExactMatch,
}

impl Metric {
    pub fn score(self, hyps: &[Vec<TokenId>], refs: &[Vec<TokenId>]) -> Result<f64> {
        match self {
            Metric::Bleu => bleu(hyps, refs, 4),
            Metric::ExactMatch => exact_match(hyps, refs),
        }
    }
}

/// An evaluation example: optional conditioning source and the reference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalExample {
    pub id: u64,
    pub source: Option<Vec<TokenId>>,
    pub reference: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: u64,
    pub hypothesis: Vec<TokenId>,
    pub reference: Vec<TokenId>,
    pub exact: bool,
    pub edit_distance: f64,
    pub logp: f64,
    pub normalized_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub steps: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub label: String,
    /// Median over examples of each example's median decode time.
    pub median_seconds: f64,
    pub iqr_seconds: f64,
    pub examples: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool_version: String,
    pub config: serde_json::Value,
    pub method: Method,
    pub records: Vec<ExampleRecord>,
    pub bleu: f64,
    pub exact_match: f64,
    pub mean_edit_distance: f64,
    pub steps_curve: Vec<CurvePoint>,
    pub latency: Vec<LatencyStats>,
    pub hardware: Option<String>,
}

impl EvalReport {
    /// `(bleu, exact_match, mean_edit_distance)` recomputed from the records.
    pub fn recompute(&self) -> Result<(f64, f64, f64)> {
        let hyps: Vec<Vec<TokenId>> = self.records.iter().map(|r| r.hypothesis.clone()).collect();
        let refs: Vec<Vec<TokenId>> = self.records.iter().map(|r| r.reference.clone()).collect();
        Ok((bleu(&hyps, &refs, 4)?, exact_match(&hyps, &refs)?, mean_edit_distance(&hyps, &refs)?))
    }

    pub fn curve_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["steps", "score"]).map_err(csv_error)?;
        for p in &self.steps_curve {
            w.write_record([p.steps.to_string(), p.score.to_string()]).map_err(csv_error)?;
        }
        finish_csv(w)
    }

    pub fn latency_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "median_seconds", "iqr_seconds", "examples", "repetitions"]).map_err(csv_error)?;
        for s in &self.latency {
            w.write_record([
                s.label.clone(),
                s.median_seconds.to_string(),
                s.iqr_seconds.to_string(),
                s.examples.to_string(),
                s.repetitions.to_string(),
            ])
            .map_err(csv_error)?;
        }
        finish_csv(w)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Data(format!("csv: {e}"))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Data(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

/// Decodes every example (example `i` uses random stream `(seed, i)`).
pub fn decode_all(
    decoder: &Decoder<'_>,
    examples: &[EvalExample],
    init: &InitSpec,
    method: Method,
    seed: u64,
) -> Result<Vec<ExampleRecord>> {
    examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let out = decoder.decode(ex.source.as_deref(), init, method, &mut rng::stream(seed, i as u64))?;
            Ok(ExampleRecord {
                id: ex.id,
                exact: out.tokens == ex.reference,
                edit_distance: edit_distance(&out.tokens, &ex.reference, &AlignmentCosts::UNIT),
                hypothesis: out.tokens,
                reference: ex.reference.clone(),
                logp: out.logp,
                normalized_score: out.normalized_score,
            })
        })
        .collect()
}

/// Decodes and aggregates into a report with empty curve and latency series.
pub fn evaluate(
    decoder: &Decoder<'_>,
    examples: &[EvalExample],
    init: &InitSpec,
    method: Method,
    seed: u64,
    config: serde_json::Value,
) -> Result<EvalReport> {
    let records = decode_all(decoder, examples, init, method, seed)?;
    let mut report = EvalReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        method,
        records,
        bleu: 0.0,
        exact_match: 0.0,
        mean_edit_distance: 0.0,
        steps_curve: Vec::new(),
        latency: Vec::new(),
        hardware: None,
    };
    (report.bleu, report.exact_match, report.mean_edit_distance) = report.recompute()?;
    Ok(report)
}

/// Score of the whole dataset after each number of steps in `grid`, with
/// the same per-example seeds at every point.
pub fn steps_curve(
    decoder: &Decoder<'_>,
    examples: &[EvalExample],
    init: &InitSpec,
    method: Method,
    grid: &[usize],
    metric: Metric,
    seed: u64,
) -> Result<Vec<CurvePoint>> {
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("step grid must be strictly ascending".into()));
    }
    let refs: Vec<Vec<TokenId>> = examples.iter().map(|e| e.reference.clone()).collect();
    grid.iter()
        .map(|&steps| {
            let d = decoder.reconfigured(DecodeConfig { steps, ..decoder.cfg.clone() })?;
            let hyps: Vec<Vec<TokenId>> =
                decode_all(&d, examples, init, method, seed)?.into_iter().map(|r| r.hypothesis).collect();
            Ok(CurvePoint { steps, score: metric.score(&hyps, &refs)? })
        })
        .collect()
}

/// One decoding configuration timed by [`latency_bench`].
#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub label: String,
    pub method: Method,
    pub cfg: DecodeConfig,
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Wall-clock per example for each entry. Repetitions are interleaved across
/// entries so drift affects all of them alike.
pub fn latency_bench(
    decoder: &Decoder<'_>,
    examples: &[EvalExample],
    init: &InitSpec,
    entries: &[BenchEntry],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<LatencyStats>> {
    if repetitions < 3 {
        return Err(Error::InvalidConfig("latency benchmarks need at least 3 repetitions".into()));
    }
    if examples.is_empty() {
        return Err(Error::Data("latency benchmarks need at least one example".into()));
    }
    let decoders = entries.iter().map(|e| decoder.reconfigured(e.cfg.clone())).collect::<Result<Vec<_>>>()?;
    let mut times = vec![vec![Vec::with_capacity(repetitions); examples.len()]; entries.len()];
    // Entries take turns on each example so that drift in machine speed
    // hits all of them alike, and the turn order rotates with the
    // repetition so no entry always follows the same one. Each timed run
    // follows an identical untimed one; otherwise whichever entry runs
    // first on an example pays for cold caches and fresh allocations.
    for rep in 0..repetitions {
        for (i, ex) in examples.iter().enumerate() {
            for turn in 0..entries.len() {
                let k = (turn + rep + i) % entries.len();
                let entry = &entries[k];
                decoders[k].decode(ex.source.as_deref(), init, entry.method, &mut rng::stream(seed, i as u64))?;
                let mut r = rng::stream(seed, i as u64);
                let start = Instant::now();
                decoders[k].decode(ex.source.as_deref(), init, entry.method, &mut r)?;
                times[k][i].push(start.elapsed().as_secs_f64());
            }
        }
    }
    Ok(entries
        .iter()
        .zip(times)
        .map(|(entry, per_example)| {
            let medians = sorted(per_example.into_iter().map(|t| quantile(&sorted(t), 0.5)).collect());
            LatencyStats {
                label: entry.label.clone(),
                median_seconds: quantile(&medians, 0.5),
                iqr_seconds: quantile(&medians, 0.75) - quantile(&medians, 0.25),
                examples: examples.len(),
                repetitions,
            }
        })
        .collect())
}

/// CPU model and logical core count, as far as the platform reveals them.
pub fn hardware_description() -> String {
    let cpuinfo = std::fs::read_to_string("/proc/cpuinfo").unwrap_or_default();
    let model = cpuinfo
        .lines()
        .find_map(|l| l.strip_prefix("model name").and_then(|r| r.split_once(':')).map(|(_, v)| v.trim().to_string()));
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("{} ({} logical cores, {})", model.unwrap_or_else(|| "unknown cpu".into()), cores, std::env::consts::ARCH)
}
