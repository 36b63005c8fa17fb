//! Flat `key = value` configuration files.
//!
//! Keys carry a section prefix (`experiment.`, `churn.`, `adversary.`,
//! `defense.`, `bootstrap.`). The heuristic switches `h1`, `h2`,
//! `h3_accuracy` and `h2_margin` are also accepted without a prefix. Blank
//! lines and `#` comments are ignored; unknown keys are errors.
//!
//! Heuristic keys override the heuristic settings of every listed defense.

use std::path::{Path, PathBuf};

use crate::adversary::Strategy;
use crate::error::{Error, Result};
use crate::experiments::{parse_defenses, ExperimentSpec};
use crate::heuristics::Screening;
use crate::togcom::WindowMode;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(Error::Parse { line, msg: format!("expected key = value, got `{body}`") });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Parse { line, msg: "empty key".into() });
        }
        if out.iter().any(|e: &Entry| e.key == key) {
            return Err(Error::Parse { line, msg: format!("duplicate key `{key}`") });
        }
        out.push(Entry { line, key: key.to_string(), value: value.trim().to_string() });
    }
    Ok(out)
}

/// Decimal numbers, plus `2^k` powers.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.trim().parse().ok()?;
        let e: f64 = e.trim().parse().ok()?;
        return Some(b.powf(e));
    }
    s.parse().ok()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

fn bad(e: &Entry, what: &str) -> Error {
    Error::Parse { line: e.line, msg: format!("`{}` expects {what}, got `{}`", e.key, e.value) }
}

fn num(e: &Entry) -> Result<f64> {
    parse_number(&e.value).filter(|x| !x.is_nan()).ok_or_else(|| bad(e, "a number"))
}

fn count(e: &Entry) -> Result<u64> {
    let x = num(e)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(bad(e, "a non-negative integer"))
    }
}

fn flag(e: &Entry) -> Result<bool> {
    parse_bool(&e.value).ok_or_else(|| bad(e, "true or false"))
}

fn list(e: &Entry) -> Result<Vec<f64>> {
    e.value.split(',').filter(|s| !s.trim().is_empty()).map(|s| parse_number(s).ok_or_else(|| bad(e, "a list of numbers"))).collect()
}

#[derive(Default)]
struct HeuristicOverrides {
    h1: Option<bool>,
    h2: Option<bool>,
    h3_accuracy: Option<f64>,
    h2_margin: Option<f64>,
    screening: Option<Screening>,
}

/// Applies every entry of `text` to `spec`.
pub fn apply_config(spec: &mut ExperimentSpec, text: &str) -> Result<()> {
    let entries = parse_entries(text)?;
    let mut h = HeuristicOverrides::default();
    let mut defense_name = None;
    let mut strategy = None;
    let mut burst_period = None;
    for e in &entries {
        let key = e.key.as_str();
        match key {
            "experiment.kind" => spec.kind = e.value.parse()?,
            "experiment.network" | "churn.network" => spec.churn.network = e.value.parse()?,
            "experiment.t_values" => spec.t_values = list(e)?,
            "experiment.runs" => spec.runs = count(e)? as usize,
            "experiment.seed" => spec.seed = count(e)?,
            "experiment.sim_seconds" => spec.sim_seconds = num(e)?,
            "experiment.output_dir" => spec.output_dir = PathBuf::from(&e.value),
            "experiment.defenses" => spec.defenses = parse_defenses(&e.value)?,
            "experiment.x_values" => spec.x_values = list(e)?,
            "experiment.epochs" => spec.epochs = count(e)? as usize,
            "experiment.check_bounds" => spec.check_bounds = flag(e)?,
            "experiment.emit_plot_data" => spec.emit_plot_data = flag(e)?,

            "churn.trace" => spec.churn.trace_file = Some(PathBuf::from(&e.value)),
            "churn.n_init" => spec.churn.n_init = count(e)? as usize,
            "churn.arrival_rate" => spec.churn.arrival_rate = Some(num(e)?),

            "adversary.rate" => spec.adversary.rate = num(e)?,
            "adversary.strategy" => strategy = Some(e),
            "adversary.burst_period" => burst_period = Some(num(e)?),
            "adversary.pays_purge" => spec.adversary.pays_purge = flag(e)?,
            "adversary.purge_share" => spec.adversary.purge_share = Some(num(e)?),

            "defense.name" => defense_name = Some(e),
            "defense.alpha" => spec.base.alpha = num(e)?,
            "defense.c_comm" => spec.base.c_comm = num(e)?,
            "defense.window" => {
                spec.base.window = match e.value.as_str() {
                    "trailing" => WindowMode::Trailing,
                    "truncated" | "iteration_truncated" => WindowMode::IterationTruncated,
                    _ => return Err(bad(e, "trailing or truncated")),
                }
            }
            "defense.log_retention" => spec.base.log_retention = num(e)?,
            "defense.c_je_high" => spec.base.c_je_high = num(e)?,
            "defense.gmcom_failure_factor" => spec.base.gmcom_failure_factor = num(e)?,
            "defense.test_cost" => spec.base.test_cost = count(e)?,
            "defense.fast_forward" => spec.base.fast_forward = flag(e)?,
            "defense.screening" => {
                h.screening = Some(match e.value.as_str() {
                    "after_puzzle" => Screening::AfterPuzzle,
                    "before_puzzle" => Screening::BeforePuzzle,
                    _ => return Err(bad(e, "after_puzzle or before_puzzle")),
                })
            }
            "h1" | "defense.h1" => h.h1 = Some(flag(e)?),
            "h2" | "defense.h2" => h.h2 = Some(flag(e)?),
            "h3_accuracy" | "defense.h3_accuracy" => h.h3_accuracy = Some(num(e)?),
            "h2_margin" | "defense.h2_margin" => h.h2_margin = Some(num(e)?),

            "bootstrap.n0" => spec.base.n0 = count(e)? as usize,
            "bootstrap.initial_bad_fraction" => spec.base.initial_bad_fraction = num(e)?,
            "bootstrap.jg0" | "defense.jg0" => spec.base.jg0 = Some(num(e)?),
            "bootstrap.warmup" | "defense.warmup" => spec.base.warmup = num(e)?,

            _ => return Err(Error::Parse { line: e.line, msg: format!("unknown key `{key}`") }),
        }
    }

    if let Some(e) = strategy {
        spec.adversary.strategy = match e.value.as_str() {
            "greedy" | "greedy_uniform" => Strategy::GreedyUniform,
            "burst" => Strategy::Burst { period: burst_period.unwrap_or(1.0) },
            _ => return Err(bad(e, "greedy or burst")),
        };
    } else if let (Some(p), Strategy::Burst { .. }) = (burst_period, spec.adversary.strategy) {
        spec.adversary.strategy = Strategy::Burst { period: p };
    }

    if let Some(e) = defense_name {
        let d = parse_defenses(&e.value)?;
        let [one] = d.as_slice() else {
            return Err(bad(e, "a single defense"));
        };
        spec.base.defense = one.defense;
        spec.base.heuristics = one.heuristics;
        if !entries.iter().any(|e| e.key == "experiment.defenses") {
            spec.defenses = d;
        }
    }

    let targets = spec.defenses.iter_mut().map(|d| &mut d.heuristics).chain(std::iter::once(&mut spec.base.heuristics));
    for hc in targets {
        if let Some(v) = h.h1 {
            hc.h1_enabled = v;
        }
        if let Some(v) = h.h2 {
            hc.h2_enabled = v;
        }
        if let Some(v) = h.h3_accuracy {
            hc.h3_accuracy = v;
        }
        if let Some(v) = h.h2_margin {
            hc.h2_margin = v;
        }
        if let Some(v) = h.screening {
            hc.screening = v;
        }
    }
    if let Some(a) = h.h3_accuracy {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::Config(format!("h3_accuracy must lie in [0, 1], got {a}")));
        }
    }
    Ok(())
}

pub fn load_config(spec: &mut ExperimentSpec, path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    apply_config(spec, &text)
}
