//! Interactive prototype revision: the user supplies a sequence, the model
//! proposes one denoising step at a time, and the user accepts, edits or
//! pins regions between steps.

use std::io::{BufRead, Write};

use editdiff::decoding::{render_step, Decoder, Proposal, Strategy, TraceStyle};
use editdiff::rng::{seeded, EngineRng};
use editdiff::{min_edit_script, AlignmentCosts, EditScript, EditTag, TokenId, Vocab};
use serde::Serialize;

use crate::artifacts::header_line;

const HELP: &str = "\
commands:
  proto <text>          start over from a new prototype
  source [text]         set (or clear) the conditioning source
  show                  print the sequence with positions; * marks pins
  step                  propose one denoising step
  accept                apply the pending proposal
  reject                drop the pending proposal
  run <n>               step and accept n times
  edit <i> <j> [text]   replace tokens i..j (half-open) by text
  pin <i> <j> | all     lock tokens i..j as KEEP
  unpin <i> <j> | all   release locked tokens
  method <greedy|beam|nucleus>
  finalize              print the result and end the session
";

#[derive(Debug, Clone, Serialize)]
pub struct Revision {
    pub index: usize,
    /// `prototype`, `model` or `user`.
    pub origin: &'static str,
    pub tokens: Vec<TokenId>,
    pub text: String,
    /// Script from the previous revision; absent for a prototype.
    pub script: Option<EditScript>,
}

pub struct Session<'a> {
    decoder: &'a Decoder<'a>,
    vocab: &'a Vocab,
    style: TraceStyle,
    rng: EngineRng,
    strategy: Strategy,
    tokens: Vec<TokenId>,
    pins: Vec<bool>,
    source: Option<Vec<TokenId>>,
    pending: Option<Proposal>,
    revisions: Vec<Revision>,
    finished: bool,
}

/// Pin flags carried through `script`: kept tokens keep theirs, new ones are free.
fn carry_pins(pins: &[bool], script: &EditScript) -> Vec<bool> {
    let mut out = Vec::new();
    let mut i = 0;
    for op in &script.ops {
        if op.tag == EditTag::Keep {
            out.push(pins[i]);
        } else {
            out.extend(std::iter::repeat(false).take(op.payload.len()));
        }
        i += op.consume;
    }
    out
}

impl<'a> Session<'a> {
    pub fn new(decoder: &'a Decoder<'a>, vocab: &'a Vocab, seed: u64, style: TraceStyle) -> Self {
        Self {
            decoder,
            vocab,
            style,
            rng: seeded(seed),
            strategy: Strategy::Greedy,
            tokens: Vec::new(),
            pins: Vec::new(),
            source: None,
            pending: None,
            revisions: Vec::new(),
            finished: false,
        }
    }

    pub fn set_source(&mut self, text: &str) {
        self.source = (!text.trim().is_empty()).then(|| self.vocab.encode(text));
    }

    pub fn set_prototype(&mut self, text: &str) -> Result<(), String> {
        let tokens = self.vocab.encode(text);
        self.check_len(tokens.len())?;
        self.tokens = tokens;
        self.pins = vec![false; self.tokens.len()];
        self.pending = None;
        self.record("prototype", None);
        Ok(())
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    fn record(&mut self, origin: &'static str, script: Option<EditScript>) {
        let text = self.vocab.decode(&self.tokens);
        self.revisions.push(Revision { index: self.revisions.len(), origin, tokens: self.tokens.clone(), text, script });
    }

    fn text(&self) -> String {
        self.vocab.decode(&self.tokens)
    }

    fn check_len(&self, len: usize) -> Result<(), String> {
        let max = self.decoder.cfg.max_len;
        if len > max {
            return Err(format!("{len} tokens exceed max_len {max}"));
        }
        Ok(())
    }

    fn range(&self, a: Option<&str>, b: Option<&str>) -> Result<(usize, usize), String> {
        if a == Some("all") && b.is_none() {
            return Ok((0, self.tokens.len()));
        }
        let parse = |s: Option<&str>| -> Result<usize, String> {
            s.ok_or("expected two positions")?.parse().map_err(|_| "positions must be numbers".to_string())
        };
        let (i, j) = (parse(a)?, parse(b)?);
        if i > j || j > self.tokens.len() {
            return Err(format!("range {i}..{j} is outside 0..{}", self.tokens.len()));
        }
        Ok((i, j))
    }

    fn propose(&mut self) -> Result<String, String> {
        let src = self.source.clone();
        let proposals = self
            .decoder
            .propose(&self.tokens, self.strategy, src.as_deref(), Some(&self.pins), &mut self.rng)
            .map_err(|e| e.to_string())?;
        let p = proposals.into_iter().next().ok_or("no proposal")?;
        let shown = render_step(&self.tokens, &p.script, self.vocab, self.style);
        let line = format!("proposal (logp {:.4}): {shown}", p.logp());
        self.pending = Some(p);
        Ok(line)
    }

    fn accept(&mut self) -> Result<String, String> {
        let p = self.pending.take().ok_or("nothing to accept; use step first")?;
        self.pins = carry_pins(&self.pins, &p.script);
        self.tokens = p.tokens;
        self.record("model", Some(p.script));
        Ok(format!("accepted: {}", self.text()))
    }

    fn run_steps(&mut self, n: usize) -> Vec<String> {
        let mut out = Vec::new();
        for _ in 0..n {
            match self.propose().and_then(|p| Ok([p, self.accept()?])) {
                Ok(lines) => out.extend(lines),
                Err(e) => {
                    out.push(format!("error: {e}"));
                    break;
                }
            }
        }
        out
    }

    /// Handles one input line and returns the lines to print.
    pub fn command(&mut self, line: &str) -> Vec<String> {
        let mut words = line.split_whitespace();
        let Some(cmd) = words.next() else {
            return Vec::new();
        };
        let rest = line.trim_start()[cmd.len()..].trim();
        let result: Result<Vec<String>, String> = match cmd {
            "help" => Ok(HELP.lines().map(str::to_string).collect()),
            "proto" => self.set_prototype(rest).map(|()| vec![format!("current: {}", self.text())]),
            "source" => {
                self.set_source(rest);
                Ok(vec![format!("source: {}", self.source.as_ref().map_or("<none>".into(), |s| self.vocab.decode(s)))])
            }
            "show" => {
                let cells: Vec<String> = self
                    .tokens
                    .iter()
                    .zip(&self.pins)
                    .enumerate()
                    .map(|(i, (&t, &p))| format!("[{i}]{}{}", self.vocab.decode(&[t]), if p { "*" } else { "" }))
                    .collect();
                Ok(vec![format!("current: {}", if cells.is_empty() { "<empty>".into() } else { cells.join(" ") })])
            }
            "step" => self.propose().map(|l| vec![l]),
            "accept" => self.accept().map(|l| vec![l]),
            "reject" => match self.pending.take() {
                Some(_) => Ok(vec!["proposal dropped".into()]),
                None => Err("nothing to reject".into()),
            },
            "run" => match rest.parse::<usize>() {
                Ok(n) => Ok(self.run_steps(n)),
                Err(_) => Err("run needs a step count".into()),
            },
            "edit" => {
                let (a, b) = (words.next(), words.next());
                self.range(a, b).and_then(|(i, j)| {
                    let replacement = self.vocab.encode(&words.collect::<Vec<_>>().join(" "));
                    let mut next = self.tokens[..i].to_vec();
                    next.extend_from_slice(&replacement);
                    next.extend_from_slice(&self.tokens[j..]);
                    self.check_len(next.len())?;
                    let script = min_edit_script(&self.tokens, &next, &AlignmentCosts::UNIT);
                    let mut pins = self.pins[..i].to_vec();
                    pins.extend(std::iter::repeat(false).take(replacement.len()));
                    pins.extend_from_slice(&self.pins[j..]);
                    self.pins = pins;
                    self.tokens = next;
                    self.pending = None;
                    self.record("user", Some(script));
                    Ok(vec![format!("current: {}", self.text())])
                })
            }
            "pin" | "unpin" => {
                let (a, b) = (words.next(), words.next());
                self.range(a, b).map(|(i, j)| {
                    self.pins[i..j].fill(cmd == "pin");
                    self.pending = None;
                    let n = self.pins.iter().filter(|&&p| p).count();
                    vec![format!("{n} of {} tokens pinned", self.tokens.len())]
                })
            }
            "method" => match rest {
                "greedy" => Ok(Strategy::Greedy),
                "beam" => Ok(Strategy::Beam),
                "nucleus" => Ok(Strategy::Nucleus),
                other => Err(format!("unknown method `{other}`")),
            }
            .map(|s| {
                self.strategy = s;
                vec![format!("method: {rest}")]
            }),
            "finalize" | "quit" | "exit" => {
                self.finished = true;
                Ok(vec![format!("final: {}", self.text())])
            }
            other => Err(format!("unknown command `{other}`; try help")),
        };
        result.unwrap_or_else(|e| vec![format!("error: {e}")])
    }

    /// Reads commands until `finalize` or end of input.
    pub fn run(&mut self, input: impl BufRead, mut output: impl Write, prompt: bool) -> std::io::Result<()> {
        let mut lines = input.lines();
        loop {
            if prompt {
                write!(output, "> ")?;
                output.flush()?;
            }
            let Some(line) = lines.next() else {
                break;
            };
            for l in self.command(&line?) {
                writeln!(output, "{l}")?;
            }
            if self.finished {
                return Ok(());
            }
        }
        for l in self.command("finalize") {
            writeln!(output, "{l}")?;
        }
        Ok(())
    }

    /// Session log: a header line, one line per revision, then the result.
    pub fn log(&self, config: &serde_json::Value) -> String {
        let mut out = header_line("session", config);
        out.push('\n');
        for r in &self.revisions {
            out.push_str(&serde_json::to_string(r).expect("revisions serialize"));
            out.push('\n');
        }
        let last = serde_json::json!({ "final": self.tokens, "text": self.text() });
        out.push_str(&last.to_string());
        out.push('\n');
        out
    }
}
