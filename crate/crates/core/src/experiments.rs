//! Experiment drivers: spend-rate sweeps, the GMCom close-join experiment,
//! assumption measurement and single configured runs.
//!
//! Sweeps fan out over `(defense, T, seed)` with rayon and collect results
//! in that order, so every CSV is a pure function of the spec.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adversary::AdversaryConfig;
use crate::analysis::{
    check_corollary_windows, check_interval_epochs, check_lemma_algcost, check_lemma_joinbad, check_theorem1,
    check_theorem2, default_windows, detect_epochs, A2Options, AssumptionConstants, CheckReport, EpochAnalysis,
};
use crate::baselines::remp_spend_rate;
use crate::churn::{generate, load_trace_file, ChurnKind, ChurnTrace, GeneratorSpec, TraceDuration, TraceEvent};
use crate::engine::{run, Defense, SimConfig, SimResult};
use crate::error::{Error, Result};
use crate::heuristics::HeuristicConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Network {
    BitcoinTrace,
    BitTorrent,
    Ethereum,
    Gnutella,
}

impl Network {
    pub fn name(self) -> &'static str {
        match self {
            Network::BitcoinTrace => "bitcoin_trace",
            Network::BitTorrent => "bittorrent",
            Network::Ethereum => "ethereum",
            Network::Gnutella => "gnutella",
        }
    }

    pub fn generator(self, n_init: usize, duration: TraceDuration) -> Option<GeneratorSpec> {
        match self {
            Network::BitcoinTrace => None,
            Network::BitTorrent => Some(GeneratorSpec::bittorrent(n_init, duration)),
            Network::Ethereum => Some(GeneratorSpec::ethereum(n_init, duration)),
            Network::Gnutella => Some(GeneratorSpec::gnutella(n_init, duration)),
        }
    }
}

impl FromStr for Network {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "bitcoin_trace" | "bitcoin" => Network::BitcoinTrace,
            "bittorrent" => Network::BitTorrent,
            "ethereum" => Network::Ethereum,
            "gnutella" => Network::Gnutella,
            other => return Err(Error::Config(format!("unknown network `{other}`"))),
        })
    }
}

impl fmt::Display for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    AvtSweep,
    HeuristicSweep,
    GmcomFailure,
    Assumptions,
    SingleRun,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AvtSweep => "avt_sweep",
            ExperimentKind::HeuristicSweep => "heuristic_sweep",
            ExperimentKind::GmcomFailure => "gmcom_failure",
            ExperimentKind::Assumptions => "assumptions",
            ExperimentKind::SingleRun => "single_run",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "avt_sweep" | "sweep" => ExperimentKind::AvtSweep,
            "heuristic_sweep" | "heuristics" => ExperimentKind::HeuristicSweep,
            "gmcom_failure" | "gmcom-failure" => ExperimentKind::GmcomFailure,
            "assumptions" => ExperimentKind::Assumptions,
            "single_run" | "run" => ExperimentKind::SingleRun,
            other => return Err(Error::Config(format!("unknown experiment kind `{other}`"))),
        })
    }
}

/// A defense as it appears in sweep output, with its own label.
#[derive(Debug, Clone, PartialEq)]
pub struct DefenseSpec {
    pub label: String,
    pub defense: Defense,
    pub heuristics: HeuristicConfig,
}

impl FromStr for DefenseSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let label = s.trim().to_ascii_lowercase();
        let plain = |d: Defense| DefenseSpec { label: label.clone(), defense: d, heuristics: HeuristicConfig::default() };
        if let Some(rest) = label.strip_prefix("remp-").or_else(|| label.strip_prefix("remp_")) {
            let t_max: f64 = rest.parse().map_err(|_| Error::Config(format!("bad REMP bound in `{label}`")))?;
            return Ok(plain(Defense::Remp { t_max }));
        }
        if let Some(rest) = label.strip_prefix("tgch_sf").filter(|r| !r.is_empty()) {
            let pct: f64 = rest.parse().map_err(|_| Error::Config(format!("bad accuracy in `{label}`")))?;
            if !(0.0..=100.0).contains(&pct) {
                return Err(Error::Config(format!("accuracy out of range in `{label}`")));
            }
            return Ok(DefenseSpec {
                label: label.clone(),
                defense: Defense::TgchSf,
                heuristics: HeuristicConfig::tgch_sf(pct / 100.0),
            });
        }
        let d: Defense = label.parse()?;
        let heuristics = match d {
            Defense::Tgch => HeuristicConfig::tgch(),
            Defense::TgchSf => HeuristicConfig::tgch_sf(0.98),
            _ => HeuristicConfig::default(),
        };
        Ok(DefenseSpec { label, defense: d, heuristics })
    }
}

pub fn parse_defenses(list: &str) -> Result<Vec<DefenseSpec>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Where traces come from.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnSource {
    pub network: Network,
    pub trace_file: Option<PathBuf>,
    pub n_init: usize,
    /// Overrides the generator's arrival rate.
    pub arrival_rate: Option<f64>,
}

impl ChurnSource {
    pub fn new(network: Network) -> Self {
        ChurnSource { network, trace_file: None, n_init: 1000, arrival_rate: None }
    }

    fn spec(&self, duration: TraceDuration) -> Result<GeneratorSpec> {
        let mut g = self.network.generator(self.n_init, duration).ok_or_else(|| {
            Error::Config(format!("network `{}` needs churn.trace to point at a trace file", self.network))
        })?;
        if let Some(r) = self.arrival_rate {
            g.arrival_mean = r;
        }
        Ok(g)
    }

    /// A trace covering `[0, duration]`.
    pub fn trace(&self, seed: u64, duration: f64) -> Result<ChurnTrace> {
        match &self.trace_file {
            Some(p) => Ok(load_trace_file(p)?.truncated(duration)),
            None => generate(&self.spec(TraceDuration::Seconds(duration))?, trace_seed(seed)),
        }
    }

    pub fn trace_for_epochs(&self, seed: u64, epochs: usize) -> Result<ChurnTrace> {
        match &self.trace_file {
            Some(p) => load_trace_file(p),
            None => generate(&self.spec(TraceDuration::Epochs(epochs))?, trace_seed(seed)),
        }
    }
}

/// Trace generation draws from a different stream than the simulation.
fn trace_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub churn: ChurnSource,
    pub t_values: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub sim_seconds: f64,
    pub output_dir: PathBuf,
    pub defenses: Vec<DefenseSpec>,
    /// Settings shared by every simulated run; `defense`, `seed`, `t_end`
    /// and `n0` are filled in per run.
    pub base: SimConfig,
    pub adversary: AdversaryConfig,
    pub x_values: Vec<f64>,
    pub epochs: usize,
    pub a2: A2Options,
    pub emit_plot_data: bool,
    /// Evaluate the bound checkers on every ToGCom-family run.
    pub check_bounds: bool,
}

/// `{0} ∪ {2^0, 2^step, ...}` up to `2^max_exp`.
pub fn t_grid(step: u32, max_exp: u32, with_zero: bool) -> Vec<f64> {
    let mut v = if with_zero { vec![0.0] } else { Vec::new() };
    v.extend((0..=max_exp).step_by(step as usize).map(|e| 2f64.powi(e as i32)));
    v
}

impl ExperimentSpec {
    /// Desk-scale defaults.
    pub fn new(kind: ExperimentKind, network: Network) -> Self {
        let defenses = match kind {
            ExperimentKind::HeuristicSweep => "togcom,tgch,tgch_sf92,tgch_sf98",
            _ => "togcom,gmcom,ccom,sybilcontrol,remp-1e4,remp-1e7",
        };
        let mut base = SimConfig::new(Defense::ToGCom, 1000, 2000.0, 0);
        base.alpha = 1.0 / 18.0;
        ExperimentSpec {
            kind,
            churn: ChurnSource::new(network),
            t_values: t_grid(2, 30, true),
            runs: 5,
            seed: 1,
            sim_seconds: 2000.0,
            output_dir: PathBuf::from("out"),
            defenses: parse_defenses(defenses).expect("built-in defense names"),
            base,
            adversary: AdversaryConfig::greedy(0.0),
            x_values: t_grid(1, 30, false),
            epochs: 1000,
            a2: A2Options::default(),
            emit_plot_data: false,
            check_bounds: false,
        }
    }

    /// Restores the full grid: every power of two, 20 runs of 10^4 seconds.
    pub fn paper_scale(mut self) -> Self {
        self.t_values = t_grid(1, 30, true);
        self.runs = 20;
        self.sim_seconds = 1e4;
        self
    }

    pub fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        let sweep = matches!(self.kind, ExperimentKind::AvtSweep | ExperimentKind::HeuristicSweep);
        if sweep && self.t_values.is_empty() {
            return Err(Error::Config("t_values must not be empty".into()));
        }
        if sweep && self.defenses.is_empty() {
            return Err(Error::Config("no defenses listed".into()));
        }
        if self.t_values.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("t_values must be non-negative".into()));
        }
        if !(self.sim_seconds > 0.0 && self.sim_seconds.is_finite()) {
            return Err(Error::Config("sim_seconds must be positive".into()));
        }
        self.adversary.check()?;
        Ok(())
    }

    pub fn output_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}_{}.csv", self.kind.name(), self.churn.network))
    }

    fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.runs as u64).map(|r| self.seed.wrapping_add(r))
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sample standard deviation; 0 for fewer than two values.
/// Zero for a single value, NaN for none.
pub fn sample_sd(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => return f64::NAN,
        1 => return 0.0,
        _ => {}
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Least-squares slope of `log2 y` against `log2 x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.log2(), y.log2()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData("need two positive points for a slope".into()));
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all x values are equal".into()));
    }
    Ok(sxy / sxx)
}

/// Bound checks on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundChecks {
    pub constants: AssumptionConstants,
    pub theorem1: CheckReport,
    pub theorem2: CheckReport,
    pub joinbad: CheckReport,
    pub algcost: CheckReport,
    pub corollary: CheckReport,
    pub interval_epochs: CheckReport,
}

impl BoundChecks {
    pub fn reports(&self) -> [&CheckReport; 6] {
        [&self.theorem1, &self.theorem2, &self.joinbad, &self.algcost, &self.corollary, &self.interval_epochs]
    }
}

/// Runs every checker on a run, with constants measured on its own trace.
pub fn check_run(run: &SimResult, ep: &EpochAnalysis, a2: &A2Options) -> Result<BoundChecks> {
    let constants = AssumptionConstants::measure(ep, a2)?;
    let closed = run.rows().iter().filter(|r| r.closed).map(|r| r.repeat).sum::<u64>();
    let corollary = if run.fast_forwarded_iterations == 0 {
        // windows start once the estimator has completed its first interval
        let warm = run.intervals.first().map_or(f64::INFINITY, |&(_, b)| b);
        let from = run.rows().iter().find(|r| r.start >= warm).map_or(u64::MAX, |r| r.iteration);
        check_corollary_windows(run, ep, &constants, &default_windows(from, closed))?
    } else {
        CheckReport { name: "corollary", checked: 0, failed: 0, worst_ratio: 0.0, first_failure: None }
    };
    Ok(BoundChecks {
        theorem1: check_theorem1(run, ep, &constants),
        theorem2: check_theorem2(run, ep, &constants),
        joinbad: check_lemma_joinbad(run),
        algcost: check_lemma_algcost(run, &constants),
        corollary,
        interval_epochs: check_interval_epochs(&run.intervals, ep),
        constants,
    })
}

/// One simulated (or closed-form) run of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub defense: String,
    pub t: f64,
    pub seed: u64,
    pub alg_rate: f64,
    pub adv_rate: f64,
    pub valid: bool,
    pub max_bad_fraction: f64,
    pub population_violations: u64,
    pub committee_violations: u64,
    pub iterations: u64,
    pub checks: Option<BoundChecks>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub defense: String,
    pub t: f64,
    pub mean_alg: f64,
    pub sd_alg: f64,
    pub mean_adv: f64,
    pub valid_runs: usize,
    pub runs: usize,
}

impl SweepRow {
    /// A row is valid only when every run was.
    pub fn valid(&self) -> bool {
        self.valid_runs == self.runs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunSummary>,
}

impl SweepResult {
    pub fn row(&self, defense: &str, t: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.defense == defense && r.t == t)
    }

    /// `(T, mean A)` over valid rows of one defense, in T order.
    pub fn series(&self, defense: &str) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.defense == defense && r.valid()).map(|r| (r.t, r.mean_alg)).collect()
    }
}

fn simulate_one(
    spec: &ExperimentSpec,
    d: &DefenseSpec,
    t: f64,
    seed: u64,
    trace: &ChurnTrace,
    ep: Option<&EpochAnalysis>,
) -> Result<RunSummary> {
    if let Defense::Remp { t_max } = d.defense {
        let a = remp_spend_rate(spec.base.alpha, t_max)?;
        return Ok(RunSummary {
            defense: d.label.clone(),
            t,
            seed,
            alg_rate: a,
            adv_rate: t,
            valid: t <= t_max,
            max_bad_fraction: 0.0,
            population_violations: 0,
            committee_violations: 0,
            iterations: 0,
            checks: None,
        });
    }
    let mut cfg = spec.base.clone();
    cfg.defense = d.defense;
    cfg.heuristics = d.heuristics;
    cfg.seed = seed;
    cfg.t_end = spec.sim_seconds;
    cfg.n0 = if trace.n_init > 0 { trace.n_init } else { cfg.n0 };
    let adv = AdversaryConfig { rate: t, ..spec.adversary };
    let res = run(&cfg, trace, &adv)?;
    let checks = match ep {
        Some(ep) if spec.check_bounds && d.defense.uses_window() => Some(check_run(&res, ep, &spec.a2)?),
        _ => None,
    };
    Ok(RunSummary {
        defense: d.label.clone(),
        t,
        seed,
        alg_rate: res.alg_spend_rate(),
        adv_rate: res.adv_spend_rate(),
        valid: res.valid,
        max_bad_fraction: res.invariant_log.max_bad_fraction,
        population_violations: res.invariant_log.population_violations,
        committee_violations: res.invariant_log.committee_violations,
        iterations: res.ledger.iteration_count(),
        checks,
    })
}

/// Spend-rate sweep over `spec.defenses × spec.t_values × runs`.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    spec.check()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let needs_trace = spec.defenses.iter().any(|d| !matches!(d.defense, Defense::Remp { .. }));
    let traces: Vec<ChurnTrace> = if needs_trace {
        seeds.par_iter().map(|&s| spec.churn.trace(s, spec.sim_seconds)).collect::<Result<_>>()?
    } else {
        seeds.iter().map(|_| ChurnTrace::empty()).collect()
    };
    let epochs: Vec<Option<EpochAnalysis>> =
        traces.iter().map(|t| spec.check_bounds.then(|| detect_epochs(t))).collect();
    let mut jobs = Vec::new();
    for d in &spec.defenses {
        for &t in &spec.t_values {
            for k in 0..seeds.len() {
                jobs.push((d, t, k));
            }
        }
    }
    let runs: Vec<RunSummary> = jobs
        .par_iter()
        .map(|&(d, t, k)| simulate_one(spec, d, t, seeds[k], &traces[k], epochs[k].as_ref()))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for chunk in runs.chunks(seeds.len()) {
        let valid: Vec<&RunSummary> = chunk.iter().filter(|r| r.valid).collect();
        let a: Vec<f64> = valid.iter().map(|r| r.alg_rate).collect();
        let b: Vec<f64> = valid.iter().map(|r| r.adv_rate).collect();
        rows.push(SweepRow {
            defense: chunk[0].defense.clone(),
            t: chunk[0].t,
            mean_alg: mean(&a),
            sd_alg: sample_sd(&a),
            mean_adv: mean(&b),
            valid_runs: valid.len(),
            runs: chunk.len(),
        });
    }
    Ok(SweepResult { rows, runs })
}

pub fn avt_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    sweep(spec)
}

pub fn heuristic_sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    sweep(spec)
}

fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NA".to_string()
    } else {
        format!("{x}")
    }
}

pub fn write_sweep_csv<W: Write>(res: &SweepResult, plot: bool, mut out: W) -> std::io::Result<()> {
    write!(out, "defense,T,mean_A,sd_A,mean_T_spent,valid_runs,runs,valid")?;
    if plot {
        write!(out, ",log2_T,log2_A")?;
    }
    writeln!(out)?;
    for r in &res.rows {
        write!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.defense,
            r.t,
            fmt_num(r.mean_alg),
            fmt_num(r.sd_alg),
            fmt_num(r.mean_adv),
            r.valid_runs,
            r.runs,
            r.valid()
        )?;
        if plot {
            let lx = if r.t > 0.0 { fmt_num(r.t.log2()) } else { "NA".into() };
            let ly = if r.valid() && r.mean_alg > 0.0 { fmt_num(r.mean_alg.log2()) } else { "NA".into() };
            write!(out, ",{lx},{ly}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// One point of the close-join experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmcomFailureRow {
    pub x: f64,
    /// Algorithmic spend in the third iteration per unit of time.
    pub a_gmcom: f64,
    pub a_ccom: f64,
    /// Whole-run spend rates.
    pub a_gmcom_run: f64,
    pub a_ccom_run: f64,
}

const GMCOM_POPULATION: u32 = 10_000;

/// Constant-size churn: a departure at every integer time and a join half a
/// step later, for two iterations, then one join `1/x` after the last one.
pub fn gmcom_failure_trace(x: f64, seed: u64) -> ChurnTrace {
    let n = GMCOM_POPULATION;
    let per_iteration = (n as u64).div_ceil(11).div_ceil(2) as u32;
    let mut events: Vec<TraceEvent> = (0..n).map(|i| TraceEvent { time: 0.0, id: i, kind: ChurnKind::Join }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (id, join time); entries joined before the current iteration are candidates
    let mut live: Vec<(u32, f64)> = (0..n).map(|i| (i, 0.0)).collect();
    let mut next = n;
    let mut iter_start = 0.0;
    for k in 1..=2 * per_iteration {
        let t = k as f64;
        let cand: Vec<usize> = (0..live.len()).filter(|&i| live[i].1 <= iter_start).collect();
        let &pick = cand.choose(&mut rng).expect("population never empties");
        let (id, _) = live.swap_remove(pick);
        events.push(TraceEvent { time: t, id, kind: ChurnKind::Depart });
        events.push(TraceEvent { time: t + 0.5, id: next, kind: ChurnKind::Join });
        live.push((next, t + 0.5));
        next += 1;
        if k % per_iteration == 0 {
            iter_start = t + 0.5;
        }
    }
    let last = 2.0 * per_iteration as f64 + 0.5;
    events.push(TraceEvent { time: last + 1.0 / x, id: next, kind: ChurnKind::Join });
    ChurnTrace::from_events(events)
}

/// Algorithmic cost of the third iteration, which holds only the final join.
fn third_iteration_cost(res: &SimResult) -> f64 {
    let row = res.ledger.current;
    if row.iteration != 3 {
        return f64::NAN;
    }
    row.alg_total() as f64
}

pub fn gmcom_failure(x_values: &[f64], seed: u64, base: &SimConfig) -> Result<Vec<GmcomFailureRow>> {
    x_values
        .par_iter()
        .map(|&x| {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::Config(format!("X must be positive, got {x}")));
            }
            let trace = gmcom_failure_trace(x, seed);
            let end = trace.last_time();
            let mut out = [0.0; 4];
            for (k, d) in [Defense::GMCom, Defense::CCom].into_iter().enumerate() {
                let mut cfg = base.clone();
                cfg.defense = d;
                cfg.n0 = GMCOM_POPULATION as usize;
                cfg.t_end = end;
                cfg.seed = seed;
                cfg.jg0 = Some(1.0);
                cfg.heuristics = HeuristicConfig::default();
                let res = run(&cfg, &trace, &AdversaryConfig::none())?;
                out[k] = third_iteration_cost(&res);
                out[k + 2] = res.alg_spend_rate();
            }
            Ok(GmcomFailureRow { x, a_gmcom: out[0], a_ccom: out[1], a_gmcom_run: out[2], a_ccom_run: out[3] })
        })
        .collect()
}

pub fn write_gmcom_failure_csv<W: Write>(rows: &[GmcomFailureRow], plot: bool, mut out: W) -> std::io::Result<()> {
    write!(out, "X,A_gmcom,A_ccom,A_gmcom_run,A_ccom_run")?;
    if plot {
        write!(out, ",log2_X,log2_A_gmcom,log2_A_ccom")?;
    }
    writeln!(out)?;
    for r in rows {
        write!(out, "{},{},{},{},{}", r.x, r.a_gmcom, r.a_ccom, r.a_gmcom_run, r.a_ccom_run)?;
        if plot {
            write!(out, ",{},{},{}", r.x.log2(), r.a_gmcom.log2(), r.a_ccom.log2())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionRow {
    pub network: String,
    pub constants: AssumptionConstants,
    pub epochs: usize,
}

/// Measures A1/A2 over `runs` generated traces and reports the envelope.
pub fn assumptions(spec: &ExperimentSpec) -> Result<AssumptionRow> {
    spec.check()?;
    let seeds: Vec<u64> = spec.seeds().collect();
    let per_seed: Vec<(AssumptionConstants, usize)> = seeds
        .par_iter()
        .map(|&s| {
            let trace = spec.churn.trace_for_epochs(s, spec.epochs)?;
            let ep = detect_epochs(&trace);
            let a2 = A2Options { seed: s, include_tail: false, ..spec.a2 };
            Ok((AssumptionConstants::measure(&ep, &a2)?, ep.epochs.len()))
        })
        .collect::<Result<_>>()?;
    let fold = |f: fn(&AssumptionConstants) -> f64, lo: bool| {
        per_seed.iter().map(|(c, _)| f(c)).fold(if lo { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| {
            if lo {
                a.min(b)
            } else {
                a.max(b)
            }
        })
    };
    Ok(AssumptionRow {
        network: spec.churn.network.name().to_string(),
        constants: AssumptionConstants::new(
            fold(|c| c.a1_low, true),
            fold(|c| c.a1_high, false),
            fold(|c| c.a2_low, true),
            fold(|c| c.a2_high, false),
        ),
        epochs: per_seed.iter().map(|p| p.1).min().unwrap_or(0),
    })
}

pub fn write_assumptions_csv<W: Write>(rows: &[AssumptionRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "network,a1_low,a1_high,a2_low,a2_high")?;
    for r in rows {
        let c = r.constants;
        writeln!(out, "{},{},{},{},{}", r.network, c.a1_low, c.a1_high, c.a2_low, c.a2_high)?;
    }
    Ok(())
}

pub fn write_derived_csv<W: Write>(rows: &[AssumptionRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "network,c_je_low,c_je_high,d1,d2")?;
    for r in rows {
        let c = r.constants;
        writeln!(out, "{},{},{},{},{}", r.network, c.c_je_low(), c.c_je_high(), c.d1(), c.d2())?;
    }
    Ok(())
}

/// One configured simulation.
pub fn single_run(spec: &ExperimentSpec) -> Result<SimResult> {
    spec.check()?;
    let trace = spec.churn.trace(spec.seed, spec.sim_seconds)?;
    let mut cfg = spec.base.clone();
    cfg.seed = spec.seed;
    cfg.t_end = spec.sim_seconds;
    if trace.n_init > 0 {
        cfg.n0 = trace.n_init;
    }
    run(&cfg, &trace, &spec.adversary)
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

/// Fails early when the output directory cannot be written.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"")?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

/// Runs an experiment and writes its CSV files; returns the paths written.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    prepare_output_dir(&spec.output_dir)?;
    let main = spec.output_path();
    let mut written = vec![main.clone()];
    match spec.kind {
        ExperimentKind::AvtSweep | ExperimentKind::HeuristicSweep => {
            let res = sweep(spec)?;
            let mut f = create(&main)?;
            write_sweep_csv(&res, spec.emit_plot_data, &mut f)?;
            f.flush()?;
        }
        ExperimentKind::GmcomFailure => {
            let rows = gmcom_failure(&spec.x_values, spec.seed, &spec.base)?;
            let mut f = create(&main)?;
            write_gmcom_failure_csv(&rows, spec.emit_plot_data, &mut f)?;
            f.flush()?;
        }
        ExperimentKind::Assumptions => {
            let row = assumptions(spec)?;
            let mut f = create(&main)?;
            write_assumptions_csv(std::slice::from_ref(&row), &mut f)?;
            f.flush()?;
            let derived = spec.output_dir.join(format!("assumptions_derived_{}.csv", spec.churn.network));
            let mut f = create(&derived)?;
            write_derived_csv(std::slice::from_ref(&row), &mut f)?;
            f.flush()?;
            written.push(derived);
        }
        ExperimentKind::SingleRun => {
            let res = single_run(spec)?;
            let mut f = create(&main)?;
            res.write_timeseries_csv(&mut f)?;
            f.flush()?;
            let iters = spec.output_dir.join(format!("single_run_iterations_{}.csv", spec.churn.network));
            let mut f = create(&iters)?;
            res.write_iterations_csv(&mut f)?;
            f.flush()?;
            written.push(iters);
        }
    }
    Ok(written)
}
