//! The reverse process: iterative denoising from an initial sequence.

mod nucleus;
mod trace;

pub use nucleus::top_p_set;
pub use trace::{render_step, render_trace, TraceStyle};

use std::cmp::Ordering;
use std::ops::Range;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::RevisionChain;
use crate::error::{Error, Result};
use crate::model::{tag_log_prob, Generator, StepLayout, TagDist, Tagger};
use crate::rng::EngineRng;
use crate::script::{EditScript, EditTag, TaggedEdits};
use crate::vocab::{TokenId, Vocab, END_OF_SPAN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecodeConfig {
    pub steps: usize,
    /// Token-level beam width within one step.
    pub intra_width: usize,
    /// Hypotheses carried across steps by the 2D beam.
    pub inter_width: usize,
    pub nucleus_p: f64,
    pub max_len: usize,
    /// Longest payload a single span may receive.
    pub max_span_len: usize,
    pub early_stop: bool,
    pub length_norm_alpha: f64,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            steps: 12,
            intra_width: 5,
            inter_width: 3,
            nucleus_p: 0.6,
            max_len: 64,
            max_span_len: 16,
            early_stop: false,
            length_norm_alpha: 0.7,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.intra_width == 0 || self.inter_width == 0 {
            return fail("beam widths must be positive");
        }
        if !(self.nucleus_p > 0.0 && self.nucleus_p <= 1.0) {
            return fail("nucleus_p must lie in (0, 1]");
        }
        if self.max_len == 0 || self.max_span_len == 0 {
            return fail("max_len and max_span_len must be positive");
        }
        if !(self.length_norm_alpha.is_finite() && self.length_norm_alpha >= 0.0) {
            return fail("length_norm_alpha must be finite and non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Greedy,
    Beam,
    Nucleus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "greedy")]
    Greedy,
    #[serde(rename = "beam")]
    Beam,
    #[serde(rename = "nucleus")]
    Nucleus,
    #[serde(rename = "2dbeam")]
    Beam2d,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Greedy, Method::Beam, Method::Nucleus, Method::Beam2d];

    pub fn name(self) -> &'static str {
        match self {
            Method::Greedy => "greedy",
            Method::Beam => "beam",
            Method::Nucleus => "nucleus",
            Method::Beam2d => "2dbeam",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Null,
    Random,
    Ar,
    Source,
}

impl InitMode {
    pub fn parse(s: &str) -> Option<InitMode> {
        match s {
            "null" => Some(InitMode::Null),
            "random" => Some(InitMode::Random),
            "ar" => Some(InitMode::Ar),
            "source" => Some(InitMode::Source),
            _ => None,
        }
    }
}

/// Length of a RANDOM initialization: a uniform draw from
/// `[floor(min_ratio * n), ceil(max_ratio * n)]` for a source of length `n`,
/// else from `[min_len, max_len]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomLenPolicy {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub min_len: usize,
}

impl Default for RandomLenPolicy {
    fn default() -> Self {
        Self { min_ratio: 0.8, max_ratio: 1.2, min_len: 5 }
    }
}

impl RandomLenPolicy {
    pub fn range(&self, source_len: Option<usize>, max_len: usize) -> (usize, usize) {
        let (lo, hi) = match source_len {
            Some(n) => ((self.min_ratio * n as f64).floor() as usize, (self.max_ratio * n as f64).ceil() as usize),
            None => (self.min_len, max_len),
        };
        let hi = hi.min(max_len);
        (lo.min(hi), hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitSpec {
    pub mode: InitMode,
    pub random_len: RandomLenPolicy,
}

impl InitSpec {
    pub fn new(mode: InitMode) -> Self {
        Self { mode, random_len: RandomLenPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<TokenId>,
    /// Sum of step log-likelihoods so far.
    pub cumulative_logp: f64,
    /// Generator decisions scored so far (payload tokens and span ends).
    pub generated: usize,
    pub step_index: usize,
    pub trace: Vec<EditScript>,
    pub last_all_keep: bool,
}

impl Hypothesis {
    pub fn initial(tokens: Vec<TokenId>) -> Self {
        Self { tokens, cumulative_logp: 0.0, generated: 0, step_index: 0, trace: Vec::new(), last_all_keep: false }
    }

    /// `cumulative_logp / max(1, generated)^alpha`.
    pub fn normalized_score(&self, alpha: f64) -> f64 {
        self.cumulative_logp / (self.generated.max(1) as f64).powf(alpha)
    }
}

/// Result of a full decode.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub tokens: Vec<TokenId>,
    pub chain: RevisionChain,
    pub logp: f64,
    pub normalized_score: f64,
    pub generated: usize,
}

/// One filled-in step before it is attached to a hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub tokens: Vec<TokenId>,
    pub script: EditScript,
    pub tag_logp: f64,
    pub gen_logp: f64,
    pub generated: usize,
}

impl Proposal {
    pub fn logp(&self) -> f64 {
        self.tag_logp + self.gen_logp
    }
}

#[derive(Debug, Clone, Copy)]
struct SpanLimits {
    min_len: usize,
    max_span: usize,
}

#[derive(Debug, Clone)]
struct Filled {
    payloads: Vec<Vec<TokenId>>,
    gen_logp: f64,
    generated: usize,
}

#[derive(Debug, Clone)]
struct SpanState {
    done: Vec<Vec<TokenId>>,
    current: Vec<TokenId>,
    gen_logp: f64,
    generated: usize,
}

impl SpanState {
    fn start() -> Self {
        Self { done: Vec::new(), current: Vec::new(), gen_logp: 0.0, generated: 0 }
    }

    fn advance(&mut self, token: TokenId, lp: f64) {
        self.gen_logp += lp;
        self.generated += 1;
        if token == END_OF_SPAN {
            self.done.push(std::mem::take(&mut self.current));
        } else {
            self.current.push(token);
        }
    }
}

/// Observer for nucleus draws: the renormalized distribution sampled from
/// and the chosen index.
pub type SampleObserver<'a> = &'a dyn Fn(&[f64], usize);

pub struct Decoder<'a> {
    tagger: &'a dyn Tagger,
    generator: &'a dyn Generator,
    content: Range<TokenId>,
    pub cfg: DecodeConfig,
    observer: Option<SampleObserver<'a>>,
}

fn argmax_first(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

impl<'a> Decoder<'a> {
    pub fn new(tagger: &'a dyn Tagger, generator: &'a dyn Generator, vocab: &Vocab, cfg: DecodeConfig) -> Result<Self> {
        cfg.validate()?;
        if tagger.vocab_size() != vocab.len() || generator.vocab_size() != vocab.len() {
            return Err(Error::InvalidConfig("scorers were built for a different vocabulary size".into()));
        }
        Ok(Self { tagger, generator, content: vocab.content_ids(), cfg, observer: None })
    }

    /// Decoder over an explicit content-id range (for toy vocabularies).
    pub fn with_content(
        tagger: &'a dyn Tagger,
        generator: &'a dyn Generator,
        content: Range<TokenId>,
        cfg: DecodeConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { tagger, generator, content, cfg, observer: None })
    }

    /// The same scorers under a different configuration.
    pub fn reconfigured(&self, cfg: DecodeConfig) -> Result<Decoder<'a>> {
        cfg.validate()?;
        Ok(Decoder { tagger: self.tagger, generator: self.generator, content: self.content.clone(), cfg, observer: self.observer })
    }

    pub fn with_observer(mut self, observer: SampleObserver<'a>) -> Self {
        self.observer = Some(observer);
        self
    }

    fn check_input(&self, x: &[TokenId]) -> Result<()> {
        if x.len() > self.cfg.max_len {
            return Err(Error::TooLong { len: x.len(), max_len: self.cfg.max_len });
        }
        let size = self.generator.vocab_size();
        match x.iter().find(|&&t| t as usize >= size) {
            Some(&id) => Err(Error::VocabMismatch { id, size }),
            None => Ok(()),
        }
    }

    /// Tags allowed at `pos`: the gap may only KEEP or INSERT (only INSERT
    /// when `x` is empty); pinned tokens may only KEEP, and a pinned first
    /// token also locks the gap before it.
    fn allowed(pos: usize, x_len: usize, pins: Option<&[bool]>) -> [bool; 4] {
        let pinned = |i: usize| pins.map_or(false, |p| p[i]);
        if pos == 0 {
            [x_len > 0, false, false, x_len == 0 || !pinned(0)]
        } else if pinned(pos - 1) {
            [true, false, false, false]
        } else {
            [true; 4]
        }
    }

    /// Picks tags left to right. A tag that would fuse with its left
    /// neighbour into a different span is masked, so the chosen tags are
    /// exactly the tags of the resulting script.
    fn choose_tags(
        &self,
        dists: &[TagDist],
        x_len: usize,
        strategy: Strategy,
        pins: Option<&[bool]>,
        rng: &mut EngineRng,
    ) -> Vec<EditTag> {
        let mut tags: Vec<EditTag> = Vec::with_capacity(dists.len());
        for (pos, d) in dists.iter().enumerate() {
            let mut ok = Self::allowed(pos, x_len, pins);
            match tags.last() {
                Some(EditTag::Insert) => (ok[1], ok[2]) = (false, false),
                Some(EditTag::Delete) => ok[2] = false,
                Some(EditTag::Replace) => ok[1] = false,
                _ => {}
            }
            let first_ok = ok.iter().position(|&b| b).expect("some tag is allowed");
            let k = match strategy {
                Strategy::Greedy | Strategy::Beam => {
                    argmax_first((0..4).filter(|&k| ok[k]).map(|k| (k, d[k]))).unwrap_or(first_ok)
                }
                Strategy::Nucleus => {
                    let masked: Vec<f64> = (0..4).map(|k| if ok[k] { d[k] } else { 0.0 }).collect();
                    nucleus::sample(&masked, self.cfg.nucleus_p, rng).map_or(first_ok, |(k, _)| k)
                }
            };
            tags.push(EditTag::from_index(k));
        }
        tags
    }

    /// Demotes INSERT tags (rightmost first) until every span can receive at
    /// least one token within `max_len`; replaces an empty outcome by all-KEEP.
    fn fit_tags(&self, tags: &mut [EditTag], x_len: usize) {
        let count = |tags: &[EditTag]| {
            let surviving = tags[1..].iter().filter(|t| matches!(t, EditTag::Keep | EditTag::Insert)).count();
            let spans = TaggedEdits::slots(tags).map_or(0, |s| s.len());
            (surviving, spans)
        };
        let (surviving, spans) = count(tags);
        let mut need = surviving + spans;
        for pos in (0..tags.len()).rev() {
            if need <= self.cfg.max_len {
                break;
            }
            if tags[pos] == EditTag::Insert && (pos > 0 || x_len > 0) {
                tags[pos] = EditTag::Keep;
                need -= 1;
            }
        }
        let (surviving, spans) = count(tags);
        if surviving == 0 && spans == 0 && x_len > 0 {
            tags.fill(EditTag::Keep);
        }
    }

    fn candidates(&self, state: &SpanState, used: usize, later: usize, limits: SpanLimits) -> (bool, bool) {
        let len = state.current.len();
        let can_add = len < limits.max_span && used + len + 1 + later <= self.cfg.max_len;
        let can_end = len >= limits.min_len;
        (can_add, can_end)
    }

    fn used_before(layout: &StepLayout, state: &SpanState) -> usize {
        layout.surviving() + state.done.iter().map(Vec::len).sum::<usize>()
    }

    fn fill_greedy(
        &self,
        layout: &StepLayout,
        source: Option<&[TokenId]>,
        limits: SpanLimits,
        sample: Option<&mut EngineRng>,
    ) -> Filled {
        let mut rng = sample;
        let mut st = SpanState::start();
        let n = layout.slots().len();
        while st.done.len() < n {
            let s = st.done.len();
            let left = layout.left(s, &st.done);
            let (can_add, can_end) = self.candidates(&st, Self::used_before(layout, &st), n - s - 1, limits);
            let dist = self.generator.next_token_dist(&layout.query(s, &left, &st.current, source));
            let token = if !can_add {
                END_OF_SPAN
            } else {
                let allowed = |t: TokenId| (t == END_OF_SPAN && can_end) || self.content.contains(&t);
                match rng.as_deref_mut() {
                    None => argmax_first(
                        (0..dist.len()).filter(|&t| allowed(t as TokenId)).map(|t| (t, dist[t])),
                    )
                    .map_or(self.content.start, |t| t as TokenId),
                    Some(r) => {
                        let masked: Vec<f64> =
                            (0..dist.len()).map(|t| if allowed(t as TokenId) { dist[t] } else { 0.0 }).collect();
                        match nucleus::sample(&masked, self.cfg.nucleus_p, r) {
                            Some((t, renormed)) => {
                                if let Some(obs) = self.observer {
                                    obs(&renormed, t);
                                }
                                t as TokenId
                            }
                            None => self.content.start,
                        }
                    }
                }
            };
            st.advance(token, dist[token as usize].ln());
        }
        Filled { payloads: st.done, gen_logp: st.gen_logp, generated: st.generated }
    }

    fn fill_beam(&self, layout: &StepLayout, source: Option<&[TokenId]>, limits: SpanLimits, width: usize) -> Vec<Filled> {
        let n = layout.slots().len();
        let mut beam = vec![SpanState::start()];
        loop {
            if beam.iter().all(|st| st.done.len() == n) {
                break;
            }
            // (score, token, parent); finished parents carry over with token MAX.
            let mut cands: Vec<(f64, TokenId, usize, f64)> = Vec::new();
            for (pi, st) in beam.iter().enumerate() {
                if st.done.len() == n {
                    cands.push((st.gen_logp, TokenId::MAX, pi, 0.0));
                    continue;
                }
                let s = st.done.len();
                let left = layout.left(s, &st.done);
                let (can_add, can_end) = self.candidates(st, Self::used_before(layout, st), n - s - 1, limits);
                let dist = self.generator.next_token_dist(&layout.query(s, &left, &st.current, source));
                if !can_add {
                    let lp = dist[END_OF_SPAN as usize].ln();
                    cands.push((st.gen_logp + lp, END_OF_SPAN, pi, lp));
                    continue;
                }
                if can_end {
                    let lp = dist[END_OF_SPAN as usize].ln();
                    cands.push((st.gen_logp + lp, END_OF_SPAN, pi, lp));
                }
                for t in self.content.clone() {
                    let lp = dist[t as usize].ln();
                    cands.push((st.gen_logp + lp, t, pi, lp));
                }
            }
            cands.sort_by(|a, b| {
                b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
            });
            cands.truncate(width);
            beam = cands
                .into_iter()
                .map(|(_, tok, pi, lp)| {
                    let mut st = beam[pi].clone();
                    if tok != TokenId::MAX {
                        st.advance(tok, lp);
                    }
                    st
                })
                .collect();
        }
        beam.into_iter()
            .map(|st| Filled { payloads: st.done, gen_logp: st.gen_logp, generated: st.generated })
            .collect()
    }

    /// Proposals for one denoising step of `x`: one for GREEDY and NUCLEUS,
    /// up to `intra_width` for BEAM, best first.
    pub fn propose(
        &self,
        x: &[TokenId],
        strategy: Strategy,
        source: Option<&[TokenId]>,
        pins: Option<&[bool]>,
        rng: &mut EngineRng,
    ) -> Result<Vec<Proposal>> {
        self.check_input(x)?;
        if let Some(p) = pins {
            if p.len() != x.len() {
                return Err(Error::LengthMismatch { expected: x.len(), actual: p.len() });
            }
        }
        let mut dists = self.tagger.score_tags(x, source);
        if dists.len() != x.len() + 1 {
            return Err(Error::LengthMismatch { expected: x.len() + 1, actual: dists.len() });
        }
        if pins.is_some() {
            // Pinned positions renormalize to KEEP with probability one.
            for (pos, d) in dists.iter_mut().enumerate() {
                if Self::allowed(pos, x.len(), pins) == [true, false, false, false] {
                    *d = [1.0, 0.0, 0.0, 0.0];
                }
            }
        }
        let mut tags = self.choose_tags(&dists, x.len(), strategy, pins, rng);
        self.fit_tags(&mut tags, x.len());
        let tag_logp = tag_log_prob(&dists, &tags);
        let layout = StepLayout::new(x, &tags)?;
        let limits = SpanLimits { min_len: 1, max_span: self.cfg.max_span_len };
        let filled = match strategy {
            Strategy::Greedy => vec![self.fill_greedy(&layout, source, limits, None)],
            Strategy::Nucleus => vec![self.fill_greedy(&layout, source, limits, Some(rng))],
            Strategy::Beam => self.fill_beam(&layout, source, limits, self.cfg.intra_width),
        };
        filled
            .into_iter()
            .map(|f| {
                let tokens = layout.output(&f.payloads);
                let script = TaggedEdits { tags: tags.clone(), payloads: f.payloads }.to_script()?;
                Ok(Proposal { tokens, script, tag_logp, gen_logp: f.gen_logp, generated: f.generated })
            })
            .collect()
    }

    fn extend(hyp: &Hypothesis, p: Proposal) -> Hypothesis {
        let mut trace = hyp.trace.clone();
        let last_all_keep = p.script.is_all_keep();
        let logp = p.logp();
        trace.push(p.script);
        Hypothesis {
            tokens: p.tokens,
            cumulative_logp: hyp.cumulative_logp + logp,
            generated: hyp.generated + p.generated,
            step_index: hyp.step_index + 1,
            trace,
            last_all_keep,
        }
    }

    /// One reverse step applied to `hyp`; see [`Decoder::propose`].
    pub fn denoise_step(
        &self,
        hyp: &Hypothesis,
        strategy: Strategy,
        source: Option<&[TokenId]>,
        pins: Option<&[bool]>,
        rng: &mut EngineRng,
    ) -> Result<Vec<Hypothesis>> {
        Ok(self.propose(&hyp.tokens, strategy, source, pins, rng)?.into_iter().map(|p| Self::extend(hyp, p)).collect())
    }

    /// Left-to-right generation from the empty sequence as a single INSERT
    /// span; may return an empty sequence.
    pub fn ar_generate(&self, source: Option<&[TokenId]>, strategy: Strategy, rng: &mut EngineRng) -> Result<Vec<TokenId>> {
        let layout = StepLayout::new(&[], &[EditTag::Insert])?;
        let limits = SpanLimits { min_len: 0, max_span: self.cfg.max_len };
        let mut filled = match strategy {
            Strategy::Greedy => self.fill_greedy(&layout, source, limits, None),
            Strategy::Nucleus => self.fill_greedy(&layout, source, limits, Some(rng)),
            Strategy::Beam => self.fill_beam(&layout, source, limits, self.cfg.intra_width).swap_remove(0),
        };
        Ok(filled.payloads.swap_remove(0))
    }

    pub fn init_sequence(&self, spec: &InitSpec, source: Option<&[TokenId]>, rng: &mut EngineRng) -> Result<Vec<TokenId>> {
        let x = match spec.mode {
            InitMode::Null => Vec::new(),
            InitMode::Source => source.ok_or(Error::MissingSource("source bootstrap"))?.to_vec(),
            InitMode::Ar => {
                let src = source.ok_or(Error::MissingSource("autoregressive bootstrap"))?;
                self.ar_generate(Some(src), Strategy::Beam, rng)?
            }
            InitMode::Random => {
                let (lo, hi) = spec.random_len.range(source.map(<[TokenId]>::len), self.cfg.max_len);
                let len = rng.gen_range(lo..=hi);
                (0..len).map(|_| rng.gen_range(self.content.clone())).collect()
            }
        };
        self.check_input(&x)?;
        Ok(x)
    }

    fn best_by_norm(&self, hyps: Vec<Hypothesis>) -> Hypothesis {
        let alpha = self.cfg.length_norm_alpha;
        let mut best: Option<Hypothesis> = None;
        for h in hyps {
            if best.as_ref().map_or(true, |b| h.normalized_score(alpha) > b.normalized_score(alpha)) {
                best = Some(h);
            }
        }
        best.expect("a step yields at least one hypothesis")
    }

    /// Follows one method's hypotheses for up to `cfg.steps` steps and
    /// returns its best final hypothesis.
    fn search(&self, init: &[TokenId], source: Option<&[TokenId]>, method: Method, rng: &mut EngineRng) -> Result<Hypothesis> {
        let alpha = self.cfg.length_norm_alpha;
        let mut beams = vec![Hypothesis::initial(init.to_vec())];
        for _ in 0..self.cfg.steps {
            beams = match method {
                Method::Greedy => self.denoise_step(&beams[0], Strategy::Greedy, source, None, rng)?,
                Method::Nucleus => self.denoise_step(&beams[0], Strategy::Nucleus, source, None, rng)?,
                Method::Beam => vec![self.best_by_norm(self.denoise_step(&beams[0], Strategy::Beam, source, None, rng)?)],
                Method::Beam2d => {
                    let mut pool: Vec<(f64, usize, Hypothesis)> = Vec::new();
                    for h in &beams {
                        for c in self.denoise_step(h, Strategy::Beam, source, None, rng)? {
                            pool.push((c.normalized_score(alpha), pool.len(), c));
                        }
                    }
                    assert!(pool.len() <= self.cfg.inter_width * self.cfg.intra_width, "2D pool exceeds r x b");
                    pool.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
                    let mut kept: Vec<Hypothesis> = Vec::with_capacity(self.cfg.inter_width);
                    for (_, _, h) in pool {
                        if kept.len() == self.cfg.inter_width {
                            break;
                        }
                        if !kept.iter().any(|k| k.tokens == h.tokens) {
                            kept.push(h);
                        }
                    }
                    kept
                }
            };
            if self.cfg.early_stop && beams[0].last_all_keep {
                break;
            }
        }
        Ok(beams.swap_remove(0))
    }

    /// Runs up to `cfg.steps` reverse steps from `init`.
    ///
    /// BEAM keeps the GREEDY result as an incumbent and BEAM2D keeps the BEAM
    /// result; the incumbent is returned only when its normalized score is
    /// strictly higher. A wider search therefore never ends below a narrower one.
    pub fn decode_from(
        &self,
        init: Vec<TokenId>,
        source: Option<&[TokenId]>,
        method: Method,
        rng: &mut EngineRng,
    ) -> Result<DecodeOutput> {
        self.check_input(&init)?;
        let alpha = self.cfg.length_norm_alpha;
        let mut best = self.search(&init, source, method, rng)?;
        let narrower = match method {
            Method::Beam2d => vec![Method::Beam, Method::Greedy],
            Method::Beam => vec![Method::Greedy],
            Method::Greedy | Method::Nucleus => Vec::new(),
        };
        for m in narrower {
            let h = self.search(&init, source, m, rng)?;
            if h.normalized_score(alpha) > best.normalized_score(alpha) {
                best = h;
            }
        }
        let chain = RevisionChain::replay(init, best.trace.clone())?;
        Ok(DecodeOutput {
            normalized_score: best.normalized_score(alpha),
            tokens: best.tokens,
            chain,
            logp: best.cumulative_logp,
            generated: best.generated,
        })
    }

    /// Initializes per `init` and decodes with `method`.
    pub fn decode(&self, source: Option<&[TokenId]>, init: &InitSpec, method: Method, rng: &mut EngineRng) -> Result<DecodeOutput> {
        let x = self.init_sequence(init, source, rng)?;
        self.decode_from(x, source, method, rng)
    }
}
