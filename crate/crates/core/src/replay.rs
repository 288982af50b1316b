//! Logged-feedback files and replay evaluation.
//!
//! A log starts with `#schema v1 d=<d> m=<m>` and holds one event per line,
//! fields separated by whitespace:
//!
//! ```text
//! t x_1 … x_d n_candidates (arm_id y_1 … y_m){n_candidates} logged_arm_id reward
//! ```
//!
//! Blank lines and other lines starting with `#` are skipped. Replay feeds an
//! event to the policy only when its choice equals the logged arm.

use std::io::{BufRead, Write};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArmFeature, ArmId, Candidate, ContextEvent, UserFeature};
use crate::policy::Policy;

pub const SCHEMA_VERSION: &str = "v1";

/// Slack allowed on `‖x‖ ≤ 1` before a feature counts as too long.
const NORM_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub event: ContextEvent,
    pub logged_arm: ArmId,
    pub reward: f64,
}

/// What to do with features longer than 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormHandling {
    #[default]
    Reject,
    Normalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub norms: NormHandling,
    /// Keep each event independently with this probability.
    pub subsample: Option<f64>,
    pub subsample_seed: u64,
}

/// Dimensions declared by a log header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogSchema {
    pub d: usize,
    pub m: usize,
}

impl LogSchema {
    pub fn parse(line: &str) -> Result<Self> {
        let bad = || Error::Log { line: 1, message: format!("expected `#schema {SCHEMA_VERSION} d=<d> m=<m>`, got `{line}`") };
        let mut parts = line.split_whitespace();
        if parts.next() != Some("#schema") {
            return Err(bad());
        }
        match parts.next() {
            Some(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Log { line: 1, message: format!("unsupported schema version `{v}`") }),
            None => return Err(bad()),
        }
        let mut d = None;
        let mut m = None;
        for p in parts {
            let (key, value) = p.split_once('=').ok_or_else(bad)?;
            let value: usize = value.parse().map_err(|_| bad())?;
            match key {
                "d" => d = Some(value),
                "m" => m = Some(value),
                _ => return Err(bad()),
            }
        }
        match (d, m) {
            (Some(d), Some(m)) if d > 0 && m > 0 => Ok(LogSchema { d, m }),
            _ => Err(bad()),
        }
    }
}

pub fn write_header(out: &mut impl Write, d: usize, m: usize) -> Result<()> {
    writeln!(out, "#schema {SCHEMA_VERSION} d={d} m={m}")?;
    Ok(())
}

pub fn write_record(out: &mut impl Write, record: &LoggedEvent) -> Result<()> {
    let e = &record.event;
    write!(out, "{}", e.t)?;
    for v in e.user.as_slice() {
        write!(out, " {v}")?;
    }
    write!(out, " {}", e.candidates.len())?;
    for c in &e.candidates {
        write!(out, " {}", c.arm)?;
        for v in c.feature.as_slice() {
            write!(out, " {v}")?;
        }
    }
    writeln!(out, " {} {}", record.logged_arm, record.reward)?;
    Ok(())
}

struct Fields<'a> {
    iter: std::str::SplitWhitespace<'a>,
    line: usize,
}

impl Fields<'_> {
    fn parse<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let line = self.line;
        let s = self
            .iter
            .next()
            .ok_or_else(|| Error::Log { line, message: format!("record ends before {what}") })?;
        s.parse().map_err(|_| Error::Log { line, message: format!("`{s}` is not a valid {what}") })
    }

    fn float(&mut self, what: &str) -> Result<f64> {
        let v: f64 = self.parse(what)?;
        if !v.is_finite() {
            return Err(Error::Log { line: self.line, message: format!("non-finite value in {what}") });
        }
        Ok(v)
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n).map(|_| self.float(what)).collect()
    }
}

/// Streaming reader over a log file.
pub struct LogReader<R> {
    input: R,
    schema: Option<LogSchema>,
    options: LoadOptions,
    sampler: ChaCha8Rng,
    line_no: usize,
    buf: String,
}

impl<R: BufRead> LogReader<R> {
    /// Read the header. An empty input is an empty log.
    pub fn new(mut input: R, options: LoadOptions) -> Result<Self> {
        if let Some(p) = options.subsample {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("subsample probability must lie in (0, 1], got {p}")));
            }
        }
        let mut header = String::new();
        let schema = if input.read_line(&mut header)? == 0 { None } else { Some(LogSchema::parse(header.trim())?) };
        Ok(LogReader {
            input,
            schema,
            options,
            sampler: ChaCha8Rng::seed_from_u64(options.subsample_seed),
            line_no: 1,
            buf: String::new(),
        })
    }

    pub fn schema(&self) -> Option<LogSchema> {
        self.schema
    }

    fn parse_line(&self, line: &str, schema: LogSchema) -> Result<LoggedEvent> {
        let err = |message: String| Error::Log { line: self.line_no, message };
        let mut fields = Fields { iter: line.split_whitespace(), line: self.line_no };
        let t: u64 = fields.parse("t")?;
        let x = fields.floats(schema.d, "user feature")?;
        let n: usize = fields.parse("n_candidates")?;
        if n == 0 {
            return Err(err("event has no candidates".into()));
        }
        let mut candidates = Vec::with_capacity(n);
        for _ in 0..n {
            let arm = ArmId::new(fields.parse("arm id")?).map_err(|e| err(e.to_string()))?;
            let y = self.checked_norm(fields.floats(schema.m, "arm feature")?, "arm feature").map_err(err)?;
            candidates.push(Candidate { arm, feature: ArmFeature::new(y).map_err(|e| err(e.to_string()))? });
        }
        let logged_arm = ArmId::new(fields.parse("logged arm")?).map_err(|e| err(e.to_string()))?;
        let reward = fields.float("reward")?;
        if let Some(extra) = fields.iter.next() {
            return Err(err(format!("unexpected trailing field `{extra}`; check d={} m={}", schema.d, schema.m)));
        }
        let x = self.checked_norm(x, "user feature").map_err(err)?;
        let event = ContextEvent::new(t, UserFeature::new(x).map_err(|e| err(e.to_string()))?, candidates)
            .map_err(|e| err(e.to_string()))?;
        if !event.contains(logged_arm) {
            return Err(err(format!("logged arm {logged_arm} is not among the candidates")));
        }
        Ok(LoggedEvent { event, logged_arm, reward })
    }

    fn checked_norm(&self, mut v: Vec<f64>, what: &str) -> std::result::Result<Vec<f64>, String> {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm <= 1.0 + NORM_SLACK {
            return Ok(v);
        }
        match self.options.norms {
            NormHandling::Reject => Err(format!("{what} has norm {norm} > 1")),
            NormHandling::Normalize => {
                v.iter_mut().for_each(|a| *a /= norm);
                Ok(v)
            }
        }
    }
}

impl<R: BufRead> Iterator for LogReader<R> {
    type Item = Result<LoggedEvent>;

    fn next(&mut self) -> Option<Self::Item> {
        let schema = self.schema?;
        loop {
            self.buf.clear();
            match self.input.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(e.into())),
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed = self.parse_line(line, schema);
            if parsed.is_ok() {
                if let Some(p) = self.options.subsample {
                    if self.sampler.random::<f64>() >= p {
                        continue;
                    }
                }
            }
            return Some(parsed);
        }
    }
}

/// Load a whole log into memory.
pub fn load_log(input: impl BufRead, options: LoadOptions) -> Result<(Option<LogSchema>, Vec<LoggedEvent>)> {
    let reader = LogReader::new(input, options)?;
    let schema = reader.schema();
    let events = reader.collect::<Result<Vec<_>>>()?;
    Ok((schema, events))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub label: String,
    pub total_events: u64,
    pub matched_count: u64,
    pub cumulative_reward: f64,
    /// `(events read so far, CTR)` after every matched event.
    pub ctr_series: Vec<(u64, f64)>,
    pub prewarmed: bool,
}

impl ReplayResult {
    /// Mean reward over matched events; `None` before the first match.
    pub fn ctr(&self) -> Option<f64> {
        (self.matched_count > 0).then(|| self.cumulative_reward / self.matched_count as f64)
    }
}

/// Replay `events` through `policy`. Set `prewarmed` when the policy has already learned.
pub fn replay_evaluate<I>(policy: &mut dyn Policy, events: I, rng: &mut dyn RngCore, prewarmed: bool) -> Result<ReplayResult>
where
    I: IntoIterator<Item = Result<LoggedEvent>>,
{
    if !prewarmed && policy.steps() != 0 {
        return Err(Error::InvalidParameter(format!(
            "policy `{}` has already observed {} rewards; mark the replay as pre-warmed",
            policy.label(),
            policy.steps()
        )));
    }
    let mut result = ReplayResult {
        label: policy.label().to_string(),
        total_events: 0,
        matched_count: 0,
        cumulative_reward: 0.0,
        ctr_series: Vec::new(),
        prewarmed,
    };
    for record in events {
        let record = record?;
        result.total_events += 1;
        let selection = policy.select(&record.event, rng)?;
        if selection.arm() != record.logged_arm {
            continue;
        }
        policy.observe(&record.event, selection, record.reward)?;
        result.matched_count += 1;
        result.cumulative_reward += record.reward;
        result.ctr_series.push((result.total_events, result.cumulative_reward / result.matched_count as f64));
    }
    Ok(result)
}
