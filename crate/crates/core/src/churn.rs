//! Good-ID churn traces: generation, parsing, serialization and validation.
//!
//! A trace lists join and depart events of honest identities in time order.
//! Identities are dense `u32` indices; loaded traces keep the original labels
//! so that serialization reproduces the input.

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Weibull};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChurnKind {
    Join,
    Depart,
}

impl ChurnKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ChurnKind::Join => "join",
            ChurnKind::Depart => "depart",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEvent {
    pub time: f64,
    pub id: u32,
    pub kind: ChurnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChurnTrace {
    pub events: Vec<TraceEvent>,
    pub n_init: usize,
    labels: Option<Vec<String>>,
}

impl ChurnTrace {
    /// Builds a trace with numeric labels. `n_init` is derived from the events.
    pub fn from_events(events: Vec<TraceEvent>) -> Self {
        let n_init = count_initial(&events);
        ChurnTrace { events, n_init, labels: None }
    }

    pub fn with_labels(events: Vec<TraceEvent>, labels: Vec<String>) -> Self {
        let n_init = count_initial(&events);
        ChurnTrace { events, n_init, labels: Some(labels) }
    }

    pub fn empty() -> Self {
        Self::from_events(Vec::new())
    }

    pub fn label(&self, id: u32) -> Cow<'_, str> {
        match &self.labels {
            Some(l) => Cow::Borrowed(l[id as usize].as_str()),
            None => Cow::Owned(id.to_string()),
        }
    }

    /// Number of distinct identity slots referenced by the trace.
    pub fn id_space(&self) -> usize {
        match &self.labels {
            Some(l) => l.len(),
            None => self.events.iter().map(|e| e.id as usize + 1).max().unwrap_or(0),
        }
    }

    pub fn last_time(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    /// Keeps only events with `time <= t`.
    pub fn truncated(&self, t: f64) -> ChurnTrace {
        let end = self.events.partition_point(|e| e.time <= t);
        ChurnTrace {
            events: self.events[..end].to_vec(),
            n_init: self.n_init,
            labels: self.labels.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate(self)
    }
}

fn count_initial(events: &[TraceEvent]) -> usize {
    events
        .iter()
        .take_while(|e| e.time == 0.0)
        .filter(|e| e.kind == ChurnKind::Join)
        .count()
}

/// Checks time order and join/depart pairing; reports the first offending event.
pub fn validate(trace: &ChurnTrace) -> Result<()> {
    let mut live = vec![false; trace.id_space()];
    let mut prev = 0.0f64;
    for (index, ev) in trace.events.iter().enumerate() {
        if !ev.time.is_finite() || ev.time < 0.0 {
            return Err(Error::Validation { index, msg: format!("invalid time {}", ev.time) });
        }
        if ev.time < prev {
            return Err(Error::Validation {
                index,
                msg: format!("time {} precedes previous event at {}", ev.time, prev),
            });
        }
        prev = ev.time;
        let slot = live.get_mut(ev.id as usize).ok_or_else(|| Error::Validation {
            index,
            msg: format!("id {} outside label table", ev.id),
        })?;
        match ev.kind {
            ChurnKind::Join if *slot => {
                return Err(Error::Validation {
                    index,
                    msg: format!("duplicate live join of {}", trace.label(ev.id)),
                })
            }
            ChurnKind::Depart if !*slot => {
                return Err(Error::Validation {
                    index,
                    msg: format!("depart of {} which is not live", trace.label(ev.id)),
                })
            }
            ChurnKind::Join => *slot = true,
            ChurnKind::Depart => *slot = false,
        }
    }
    Ok(())
}

/// Parses the `time_seconds,id,join|depart` text format and validates the result.
pub fn parse_trace(text: &str) -> Result<ChurnTrace> {
    let mut labels: Vec<String> = Vec::new();
    let mut index: HashMap<String, u32> = HashMap::new();
    let mut events = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: lineno + 1, msg };
        let mut fields = line.split(',').map(str::trim);
        let (Some(t), Some(id), Some(kind), None) =
            (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(err(format!("expected 3 comma-separated fields, got `{line}`")));
        };
        let time: f64 = t.parse().map_err(|_| err(format!("bad time `{t}`")))?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(format!("time must be a non-negative number, got `{t}`")));
        }
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        let kind = match kind {
            "join" => ChurnKind::Join,
            "depart" => ChurnKind::Depart,
            other => return Err(err(format!("unknown event kind `{other}`"))),
        };
        let next = labels.len() as u32;
        let id = *index.entry(id.to_string()).or_insert_with(|| {
            labels.push(id.to_string());
            next
        });
        events.push(TraceEvent { time, id, kind });
    }
    let trace = ChurnTrace::with_labels(events, labels);
    validate(&trace)?;
    Ok(trace)
}

pub fn load_trace<R: Read>(mut source: R) -> Result<ChurnTrace> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    parse_trace(&text)
}

pub fn load_trace_file(path: &std::path::Path) -> Result<ChurnTrace> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    load_trace(std::io::BufReader::new(f))
}

pub fn serialize(trace: &ChurnTrace) -> String {
    let mut out = String::with_capacity(trace.events.len() * 16);
    for ev in &trace.events {
        let _ = writeln!(out, "{},{},{}", ev.time, trace.label(ev.id), ev.kind.as_str());
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SessionModel {
    /// Weibull session lengths; `scale` in seconds.
    Weibull { shape: f64, scale: f64 },
    /// Exponential session lengths with the given mean in seconds.
    Exponential { mean: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceDuration {
    Seconds(f64),
    /// Generate until the trace contains this many complete epochs.
    Epochs(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorSpec {
    pub session: SessionModel,
    /// Poisson arrival rate in IDs per second.
    pub arrival_mean: f64,
    pub n_init: usize,
    pub duration: TraceDuration,
}

pub const MINUTE: f64 = 60.0;
pub const HOUR: f64 = 3600.0;

impl GeneratorSpec {
    pub fn bittorrent(n_init: usize, duration: TraceDuration) -> Self {
        GeneratorSpec {
            session: SessionModel::Weibull { shape: 0.59, scale: 41.0 * MINUTE },
            arrival_mean: 1.0,
            n_init,
            duration,
        }
    }

    pub fn ethereum(n_init: usize, duration: TraceDuration) -> Self {
        GeneratorSpec {
            session: SessionModel::Weibull { shape: 0.52, scale: 9.8 * MINUTE },
            arrival_mean: 1.0,
            n_init,
            duration,
        }
    }

    pub fn gnutella(n_init: usize, duration: TraceDuration) -> Self {
        GeneratorSpec {
            session: SessionModel::Exponential { mean: 2.3 * HOUR },
            arrival_mean: 1.0,
            n_init,
            duration,
        }
    }

    pub fn check(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be positive and finite, got {v}")))
            }
        };
        match self.session {
            SessionModel::Weibull { shape, scale } => {
                pos(shape, "weibull shape")?;
                pos(scale, "weibull scale")?;
            }
            SessionModel::Exponential { mean } => pos(mean, "session mean")?,
        }
        pos(self.arrival_mean, "arrival_mean")?;
        match self.duration {
            TraceDuration::Seconds(d) if !(d >= 0.0 && d.is_finite()) => {
                Err(Error::Config(format!("duration must be non-negative, got {d}")))
            }
            TraceDuration::Epochs(0) => Err(Error::Config("epoch target must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

enum SessionSampler {
    Weibull(Weibull<f64>),
    Exp(Exp<f64>),
}

impl SessionSampler {
    fn new(model: SessionModel) -> Result<Self> {
        match model {
            SessionModel::Weibull { shape, scale } => Weibull::new(scale, shape)
                .map(SessionSampler::Weibull)
                .map_err(|e| Error::Config(format!("weibull: {e}"))),
            SessionModel::Exponential { mean } => Exp::new(1.0 / mean)
                .map(SessionSampler::Exp)
                .map_err(|e| Error::Config(format!("exponential: {e}"))),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            SessionSampler::Weibull(d) => d.sample(rng),
            SessionSampler::Exp(d) => d.sample(rng),
        }
    }
}

/// Weibull-session trace with Poisson arrivals.
pub fn gen_weibull(spec: &GeneratorSpec, seed: u64) -> Result<ChurnTrace> {
    if !matches!(spec.session, SessionModel::Weibull { .. }) {
        return Err(Error::Config("gen_weibull requires a Weibull session model".into()));
    }
    generate(spec, seed)
}

/// Exponential-session trace with Poisson arrivals.
pub fn gen_exp_poisson(spec: &GeneratorSpec, seed: u64) -> Result<ChurnTrace> {
    if !matches!(spec.session, SessionModel::Exponential { .. }) {
        return Err(Error::Config("gen_exp_poisson requires an exponential session model".into()));
    }
    generate(spec, seed)
}

/// Generates a trace for either session family.
///
/// Random draws are consumed in a fixed order (initial sessions, then one
/// inter-arrival and one session per arrival), so a longer duration with the
/// same seed extends the trace without changing its prefix.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<ChurnTrace> {
    spec.check()?;
    match spec.duration {
        TraceDuration::Seconds(d) => generate_for(spec, seed, d),
        TraceDuration::Epochs(target) => generate_for_epochs(spec, seed, target),
    }
}

fn generate_for(spec: &GeneratorSpec, seed: u64, duration: f64) -> Result<ChurnTrace> {
    let sessions = SessionSampler::new(spec.session)?;
    let gaps = Exp::new(spec.arrival_mean).map_err(|e| Error::Config(format!("arrivals: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expected = (duration * spec.arrival_mean * 2.2).min(1e8) as usize;
    let mut events = Vec::with_capacity(spec.n_init * 2 + expected);
    let mut next_id: u32 = 0;
    let push_session = |events: &mut Vec<TraceEvent>, t: f64, s: f64, id: u32| {
        events.push(TraceEvent { time: t, id, kind: ChurnKind::Join });
        let end = t + s;
        if end <= duration {
            events.push(TraceEvent { time: end, id, kind: ChurnKind::Depart });
        }
    };
    for _ in 0..spec.n_init {
        let s = sessions.sample(&mut rng);
        push_session(&mut events, 0.0, s, next_id);
        next_id += 1;
    }
    let mut t = 0.0;
    loop {
        t += gaps.sample(&mut rng);
        if t > duration {
            break;
        }
        let s = sessions.sample(&mut rng);
        push_session(&mut events, t, s, next_id);
        next_id += 1;
    }
    // Stable sort keeps each join ahead of a same-instant departure of that ID.
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(ChurnTrace::from_events(events))
}

/// Grows the horizon until the trace holds `target` complete epochs, then cuts
/// it at the end of the last one.
fn generate_for_epochs(spec: &GeneratorSpec, seed: u64, target: usize) -> Result<ChurnTrace> {
    let mut horizon = 4.0 * (spec.n_init.max(1) as f64) / spec.arrival_mean * target as f64;
    horizon = horizon.max(1.0);
    for _ in 0..64 {
        let trace = generate_for(spec, seed, horizon)?;
        let ep = crate::analysis::detect_epochs(&trace);
        if ep.epochs.len() >= target {
            let end = ep.epochs[target - 1].end;
            return Ok(trace.truncated(end));
        }
        horizon *= 2.0;
    }
    Err(Error::InsufficientData(format!("could not reach {target} epochs")))
}
