//! Event-driven simulation kernel.
//!
//! Trace events, periodic ticks and adversary injections are merged in
//! `(time, seq)` order. Trace events carry their trace index as `seq`; ticks
//! and manually queued events get larger sequence numbers, and adversary
//! injections sort after everything else at the same instant.
//!
//! Under a flat entrance price (CCom, or GMCom after it has fallen back to
//! flat pricing) a greedy attack produces identical purge cycles. Those are
//! applied in closed form when `fast_forward` is set; the ledger totals are
//! the same as with event-by-event processing.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adversary::{next_injection, purge_response, AdversaryConfig, AdversaryLedger, FlatPrice, PriceSchedule, Strategy};
use crate::baselines::{gmcom_after_join, gmcom_estimator_update, sybilcontrol_step, GmComState, SYBILCONTROL_PERIOD};
use crate::churn::{ChurnKind, ChurnTrace};
use crate::error::{Error, Result};
use crate::heuristics::{
    h2_at_risk, h2_bad_upper_bound, h3_admit, purge_decision, Admission, H2State, HeuristicConfig, Screening,
};
use crate::initialization::{bootstrap, default_jg0, BootstrapConfig};
use crate::togcom::{
    estimator_update, execute_purge, CostLedger, EstimatorState, IterationRow, JoinLog, SystemState, TogcomParams,
    WindowMode,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Defense {
    ToGCom,
    CCom,
    GMCom,
    SybilControl,
    /// Closed-form only; provisioned for attacks up to `t_max`.
    Remp { t_max: f64 },
    Tgch,
    TgchSf,
}

impl Defense {
    /// Defenses priced by the sliding join window and Estimate-GoodJR.
    pub fn uses_window(self) -> bool {
        matches!(self, Defense::ToGCom | Defense::Tgch | Defense::TgchSf)
    }

    pub fn purges(self) -> bool {
        !matches!(self, Defense::SybilControl | Defense::Remp { .. })
    }
}

impl FromStr for Defense {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "togcom" => Defense::ToGCom,
            "ccom" => Defense::CCom,
            "gmcom" => Defense::GMCom,
            "sybilcontrol" => Defense::SybilControl,
            "remp" => Defense::Remp { t_max: 1e4 },
            "tgch" => Defense::Tgch,
            "tgch_sf" | "tgch-sf" => Defense::TgchSf,
            other => return Err(Error::Config(format!("unknown defense `{other}`"))),
        })
    }
}

impl fmt::Display for Defense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Defense::ToGCom => write!(f, "togcom"),
            Defense::CCom => write!(f, "ccom"),
            Defense::GMCom => write!(f, "gmcom"),
            Defense::SybilControl => write!(f, "sybilcontrol"),
            Defense::Remp { .. } => write!(f, "remp"),
            Defense::Tgch => write!(f, "tgch"),
            Defense::TgchSf => write!(f, "tgch_sf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub alpha: f64,
    pub t_end: f64,
    pub seed: u64,
    pub defense: Defense,
    pub n0: usize,
    pub c_comm: f64,
    pub window: WindowMode,
    pub log_retention: f64,
    /// Initial join-rate estimate; `None` uses `n0 / warmup`.
    pub jg0: Option<f64>,
    pub warmup: f64,
    pub initial_bad_fraction: f64,
    pub heuristics: HeuristicConfig,
    /// Upper estimator bracket used by H2's good-join credit.
    pub c_je_high: f64,
    pub gmcom_failure_factor: f64,
    pub test_cost: u64,
    pub fast_forward: bool,
}

impl SimConfig {
    pub fn new(defense: Defense, n0: usize, t_end: f64, seed: u64) -> Self {
        SimConfig {
            alpha: 1.0 / 18.0,
            t_end,
            seed,
            defense,
            n0,
            c_comm: 3.0,
            window: WindowMode::Trailing,
            log_retention: 10.0,
            jg0: None,
            warmup: 100.0,
            initial_bad_fraction: 0.0,
            heuristics: match defense {
                Defense::Tgch => HeuristicConfig::tgch(),
                Defense::TgchSf => HeuristicConfig::tgch_sf(0.98),
                _ => HeuristicConfig::default(),
            },
            c_je_high: 160.0,
            gmcom_failure_factor: 10.0,
            test_cost: 1,
            fast_forward: true,
        }
    }

    pub fn jg0(&self) -> f64 {
        self.jg0.unwrap_or_else(|| default_jg0(self.n0, self.warmup))
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!("alpha must lie in (0, 1/2), got {}", self.alpha)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be at least 1".into()));
        }
        if !(self.c_comm > 0.0) || !(self.warmup > 0.0) || !(self.c_je_high > 0.0) {
            return Err(Error::Config("c_comm, warmup and c_je_high must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.heuristics.h3_accuracy) {
            return Err(Error::Config("h3_accuracy must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    JoinGood,
    JoinBad,
    Depart,
    PeriodicTick,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    /// Trace identity for good joins and departures.
    pub id: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued(Event);

impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.time.total_cmp(&other.0.time).then(self.0.seq.cmp(&other.0.seq))
    }
}

/// Priority queue over a pre-sorted trace plus ad-hoc events.
#[derive(Debug, Clone)]
pub struct EventQueue<'a> {
    trace: &'a ChurnTrace,
    cursor: usize,
    heap: BinaryHeap<Reverse<Queued>>,
    next_seq: u64,
}

impl<'a> EventQueue<'a> {
    pub fn new(trace: &'a ChurnTrace, start: usize) -> Self {
        EventQueue { trace, cursor: start, heap: BinaryHeap::new(), next_seq: trace.events.len() as u64 }
    }

    fn trace_event(&self, i: usize) -> Option<Event> {
        self.trace.events.get(i).map(|e| Event {
            time: e.time,
            seq: i as u64,
            kind: match e.kind {
                ChurnKind::Join => EventKind::JoinGood,
                ChurnKind::Depart => EventKind::Depart,
            },
            id: Some(e.id),
        })
    }

    pub fn push(&mut self, time: f64, kind: EventKind, id: Option<u32>) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Queued(Event { time, seq, kind, id })));
        seq
    }

    /// Pushes an event with an explicit sequence number.
    pub fn push_event(&mut self, ev: Event) {
        self.next_seq = self.next_seq.max(ev.seq + 1);
        self.heap.push(Reverse(Queued(ev)));
    }

    pub fn peek(&self) -> Option<Event> {
        let a = self.trace_event(self.cursor);
        let b = self.heap.peek().map(|r| r.0 .0);
        match (a, b) {
            (Some(x), Some(y)) => Some(if Queued(x) <= Queued(y) { x } else { y }),
            (x, y) => x.or(y),
        }
    }

    pub fn pop(&mut self) -> Option<Event> {
        let ev = self.peek()?;
        if self.trace_event(self.cursor) == Some(ev) {
            self.cursor += 1;
        } else {
            self.heap.pop();
        }
        Some(ev)
    }

    pub fn is_empty(&self) -> bool {
        self.peek().is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub time: f64,
    pub n_system: usize,
    pub bad_fraction: f64,
    pub jg_estimate: f64,
    pub alg_spend_rate: f64,
    pub adv_spend_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViolationKind {
    Population,
    Committee,
    H2Unsound,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub time: f64,
    pub kind: ViolationKind,
    pub value: f64,
}

/// Summary of the per-event invariant checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantLog {
    pub population_checks: u64,
    pub population_violations: u64,
    pub max_bad_fraction: f64,
    pub committee_checks: u64,
    pub committee_violations: u64,
    pub max_committee_bad_fraction: f64,
    pub h2_checks: u64,
    pub h2_unsound: u64,
    pub budget_violations: u64,
    /// First few violations in time order.
    pub first: Vec<Violation>,
}

impl InvariantLog {
    const KEEP: usize = 16;

    fn record(&mut self, v: Violation) {
        if self.first.len() < Self::KEEP {
            self.first.push(v);
        }
    }

    pub fn population_ok(&self) -> bool {
        self.population_violations == 0
    }

    pub fn clean(&self) -> bool {
        self.population_violations == 0
            && self.committee_violations == 0
            && self.h2_unsound == 0
            && self.budget_violations == 0
    }
}

/// A departure or eviction of an ID that had been part of some `S_x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Departure {
    pub iteration: u64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub defense: Defense,
    pub ledger: CostLedger,
    pub invariant_log: InvariantLog,
    pub timeseries: Vec<Sample>,
    pub adversary: AdversaryLedger,
    /// Time the run ended: `t_end`, or the instant it became invalid.
    pub duration: f64,
    pub valid: bool,
    pub intervals: Vec<(f64, f64)>,
    pub departures: Vec<Departure>,
    /// Snapshot marks of `S_k` as `(k, mark)`; fast-forwarded blocks record
    /// only their last iteration.
    pub marks: Vec<(u64, u64)>,
    pub good_joins: u64,
    pub bad_joins: u64,
    pub bad_attempts: u64,
    pub fast_forwarded_iterations: u64,
}

impl SimResult {
    pub fn rows(&self) -> Vec<IterationRow> {
        self.ledger.finished_rows(self.duration)
    }

    /// Join-sequence mark of `S_k`, the membership right after iteration `k` closed.
    pub fn mark_of(&self, k: u64) -> Option<u64> {
        let i = self.marks.partition_point(|&(it, _)| it < k);
        self.marks.get(i).filter(|&&(it, _)| it == k).map(|&(_, m)| m)
    }

    pub fn alg_spend_rate(&self) -> f64 {
        rate(self.ledger.algorithmic_total(), self.duration)
    }

    pub fn adv_spend_rate(&self) -> f64 {
        rate(self.ledger.adversarial_total(), self.duration)
    }

    pub fn write_timeseries_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "time,n_system,bad_fraction,jg_estimate,alg_spend_rate,adv_spend_rate")?;
        for s in &self.timeseries {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                s.time, s.n_system, s.bad_fraction, s.jg_estimate, s.alg_spend_rate, s.adv_spend_rate
            )?;
        }
        Ok(())
    }

    pub fn write_iterations_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        crate::togcom::write_iterations_csv(&self.rows(), out)
    }
}

fn rate(total: u64, duration: f64) -> f64 {
    if duration > 0.0 {
        total as f64 / duration
    } else {
        0.0
    }
}

const ABSENT: u32 = u32::MAX;
const REJECTED: u32 = u32::MAX - 1;

enum Pricing<'a> {
    Window(&'a JoinLog, f64),
    Flat,
    Gm(crate::baselines::GmComPrice),
}

impl PriceSchedule for Pricing<'_> {
    fn price_at(&self, t: f64) -> u64 {
        match self {
            Pricing::Window(log, w) => log.price_at(t, *w),
            Pricing::Flat => 1,
            Pricing::Gm(p) => p.price_at(t),
        }
    }
    fn next_drop(&self, t: f64) -> Option<f64> {
        match self {
            Pricing::Window(log, w) => log.next_drop(t, *w),
            Pricing::Flat => None,
            Pricing::Gm(p) => p.next_drop(t),
        }
    }
    fn earliest_affordable(&self, t: f64, rate: f64, spent: u64) -> f64 {
        match self {
            Pricing::Flat => FlatPrice(1).earliest_affordable(t, rate, spent),
            Pricing::Gm(p) => p.earliest_affordable(t, rate, spent),
            Pricing::Window(log, w) => log.earliest_affordable(t, *w, rate, spent),
        }
    }
}

/// A simulation in progress.
pub struct Simulation<'a> {
    cfg: SimConfig,
    adv_cfg: AdversaryConfig,
    queue: EventQueue<'a>,
    state: SystemState,
    est: EstimatorState,
    ledger: CostLedger,
    gm: GmComState,
    h2: H2State,
    adv: AdversaryLedger,
    adv_next: Option<Option<f64>>,
    labels: Vec<u32>,
    rng: ChaCha8Rng,
    classifier: ChaCha8Rng,
    clock: f64,
    next_sample: f64,
    last_sample: f64,
    log: InvariantLog,
    timeseries: Vec<Sample>,
    departures: Vec<Departure>,
    marks: Vec<(u64, u64)>,
    valid: bool,
    stopped_at: Option<f64>,
    good_joins: u64,
    bad_joins: u64,
    bad_attempts: u64,
    fast_forwarded: u64,
    finished: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(cfg: SimConfig, trace: &'a ChurnTrace, adversary: AdversaryConfig) -> Result<Self> {
        cfg.check()?;
        adversary.check()?;
        if matches!(cfg.defense, Defense::Remp { .. }) {
            return Err(Error::Config("REMP is evaluated in closed form, not simulated".into()));
        }
        let mut adv_cfg = adversary;
        if adv_cfg.purge_share.is_none() {
            adv_cfg.purge_share = Some(cfg.alpha);
        }
        if trace.n_init != 0 && trace.n_init != cfg.n0 {
            return Err(Error::Config(format!(
                "n0 = {} does not match the {} initial IDs in the trace",
                cfg.n0, trace.n_init
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut classifier = ChaCha8Rng::seed_from_u64(cfg.seed);
        classifier.set_stream(1);
        let params = TogcomParams { n0: cfg.n0, c_comm: cfg.c_comm, window: cfg.window, log_retention: cfg.log_retention };
        let boot = BootstrapConfig { n0: cfg.n0, initial_bad_fraction: cfg.initial_bad_fraction, jg0: cfg.jg0() };
        let b = bootstrap(&boot, cfg.alpha, params, &mut rng)?;
        let mut labels = vec![ABSENT; trace.id_space()];
        let mut start = 0;
        if trace.n_init > 0 {
            for (k, ev) in trace.events.iter().take(trace.n_init).enumerate() {
                labels[ev.id as usize] = b.good_ids[k];
            }
            start = trace.n_init;
        }
        let mut queue = EventQueue::new(trace, start);
        if cfg.defense == Defense::SybilControl {
            queue.push(SYBILCONTROL_PERIOD, EventKind::PeriodicTick, None);
        }
        let mut gm = GmComState::new(cfg.jg0());
        gm.failure_factor = cfg.gmcom_failure_factor;
        let mut h2 = H2State::default();
        h2.reset(b.state.size(), cfg.alpha);
        let mut sim = Simulation {
            adv: AdversaryLedger::new(adv_cfg.rate),
            adv_cfg,
            queue,
            state: b.state,
            est: b.estimator,
            ledger: b.ledger,
            gm,
            h2,
            adv_next: None,
            labels,
            rng,
            classifier,
            clock: 0.0,
            next_sample: 1.0,
            last_sample: f64::NEG_INFINITY,
            log: InvariantLog::default(),
            timeseries: Vec::new(),
            departures: Vec::new(),
            marks: Vec::new(),
            valid: true,
            stopped_at: None,
            good_joins: 0,
            bad_joins: 0,
            bad_attempts: 0,
            fast_forwarded: 0,
            finished: false,
            cfg,
        };
        sim.adv.bad_live = sim.state.bad_count();
        sim.check_committee(0.0);
        Ok(sim)
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn state(&self) -> &SystemState {
        &self.state
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    /// Queues an extra event (testing and scripted scenarios).
    pub fn push_event(&mut self, ev: Event) {
        self.queue.push_event(ev);
        self.adv_next = None;
    }

    fn pricing(&self) -> Pricing<'_> {
        if self.cfg.defense.uses_window() {
            Pricing::Window(&self.state.join_log, self.est.window())
        } else if self.cfg.defense == Defense::GMCom && !self.gm.failure_mode {
            Pricing::Gm(self.gm.schedule(self.state.n_a, self.state.iter_start))
        } else {
            Pricing::Flat
        }
    }

    fn price_now(&self, t: f64) -> u64 {
        self.pricing().price_at(t)
    }

    fn adversary_time(&mut self) -> Option<f64> {
        if let Some(x) = self.adv_next {
            return x;
        }
        let x = next_injection(&self.adv, &self.adv_cfg, &self.pricing(), self.clock);
        self.adv_next = Some(x);
        x
    }

    /// Processes one event. `Ok(None)` signals the end of the simulation.
    pub fn step(&mut self) -> Result<Option<Event>> {
        if self.finished {
            return Ok(None);
        }
        let queued = self.queue.peek();
        let adv = self.adversary_time();
        let pick_adv = match (adv, queued) {
            (Some(a), Some(q)) => a < q.time,
            (Some(_), None) => true,
            _ => false,
        };
        let ev = if pick_adv {
            let t = adv.expect("adversary time");
            Event { time: t, seq: u64::MAX, kind: EventKind::JoinBad, id: None }
        } else {
            match queued {
                Some(q) => q,
                None => return Ok(self.finish()),
            }
        };
        if ev.time > self.cfg.t_end {
            return Ok(self.finish());
        }
        if !pick_adv {
            self.queue.pop();
        }
        self.flush_samples(ev.time, false);
        debug_assert!(ev.time >= self.clock);
        self.clock = ev.time;
        self.adv_next = None;
        match ev.kind {
            EventKind::JoinGood => self.join_good(ev)?,
            EventKind::JoinBad => self.join_bad(ev.time),
            EventKind::Depart => self.depart(ev)?,
            EventKind::PeriodicTick => self.tick(ev.time),
        }
        if self.stopped_at.is_some() {
            self.finish();
        }
        Ok(Some(ev))
    }

    fn finish(&mut self) -> Option<Event> {
        if !self.finished {
            let end = self.stopped_at.unwrap_or(self.cfg.t_end);
            self.flush_samples(end, true);
            self.finished = true;
        }
        None
    }

    fn flush_samples(&mut self, t: f64, inclusive: bool) {
        while self.next_sample <= self.cfg.t_end && (self.next_sample < t || (inclusive && self.next_sample <= t)) {
            let k = self.next_sample;
            self.sample(k);
            self.next_sample += 1.0;
        }
    }

    fn sample(&mut self, t: f64) {
        if t <= self.last_sample {
            return;
        }
        self.last_sample = t;
        let jg = if self.cfg.defense.uses_window() {
            self.est.jg_active
        } else if self.cfg.defense == Defense::GMCom {
            self.gm.jg_estimate
        } else {
            0.0
        };
        self.timeseries.push(Sample {
            time: t,
            n_system: self.state.size(),
            bad_fraction: self.state.bad_fraction(),
            jg_estimate: jg,
            alg_spend_rate: rate(self.ledger.algorithmic_total(), t),
            adv_spend_rate: rate(self.ledger.adversarial_total(), t),
        });
    }

    fn join_good(&mut self, ev: Event) -> Result<()> {
        let label = ev.id.expect("good join carries an id") as usize;
        if label >= self.labels.len() {
            self.labels.resize(label + 1, ABSENT);
        }
        if self.labels[label] != ABSENT && self.labels[label] != REJECTED {
            return Err(Error::Validation { index: ev.seq as usize, msg: format!("duplicate live join of id {label}") });
        }
        let t = ev.time;
        let h = self.cfg.heuristics;
        let screened = self.cfg.defense.uses_window() && h.h3_enabled();
        if screened && h.screening == Screening::BeforePuzzle {
            if h3_admit(true, h.h3_accuracy, &mut self.classifier) == Admission::Reject {
                self.labels[label] = REJECTED;
                return Ok(());
            }
        }
        let price = self.price_now(t);
        if screened && h.screening == Screening::AfterPuzzle {
            if h3_admit(true, h.h3_accuracy, &mut self.classifier) == Admission::Reject {
                self.ledger.book_rejected(true, price);
                self.state.log_join(t);
                self.state.prune_log(t, &self.est);
                self.labels[label] = REJECTED;
                return Ok(());
            }
        }
        let id = self.state.fresh_good_id();
        self.labels[label] = id;
        self.state.admit(Some(id), t)?;
        self.ledger.book_entrance(true, price);
        self.good_joins += 1;
        self.after_join(t);
        Ok(())
    }

    fn join_bad(&mut self, t: f64) {
        let price = self.price_now(t);
        self.adv.pay(price);
        self.adv.injections += 1;
        if !self.adv.feasible(t) {
            self.log.budget_violations += 1;
            self.log.record(Violation { time: t, kind: ViolationKind::Budget, value: self.adv.spent as f64 });
        }
        let h = self.cfg.heuristics;
        let screened = self.cfg.defense.uses_window() && h.h3_enabled();
        if screened {
            self.bad_attempts += 1;
            let verdict = h3_admit(false, h.h3_accuracy, &mut self.classifier);
            if verdict == Admission::Reject {
                if h.screening == Screening::AfterPuzzle {
                    self.ledger.book_rejected(false, price);
                    self.state.log_join(t);
                    self.state.prune_log(t, &self.est);
                } else {
                    // refused before solving: the adversary keeps its budget
                    self.adv.spent -= price;
                }
                return;
            }
        } else {
            self.bad_attempts += 1;
        }
        self.state.admit(None, t).expect("bad ids are always fresh");
        self.ledger.book_entrance(false, price);
        self.bad_joins += 1;
        self.adv.bad_live = self.state.bad_count();
        self.after_join(t);
    }

    fn after_join(&mut self, t: f64) {
        if self.cfg.defense.uses_window() {
            self.state.prune_log(t, &self.est);
        }
        if self.cfg.defense == Defense::GMCom && !self.gm.failure_mode {
            gmcom_after_join(&mut self.gm, self.state.n_a, self.state.iter_start, t);
        }
        self.after_change(t);
    }

    fn depart(&mut self, ev: Event) -> Result<()> {
        let label = ev.id.expect("depart carries an id") as usize;
        match self.labels.get(label).copied() {
            Some(REJECTED) => {
                self.labels[label] = ABSENT;
                return Ok(());
            }
            Some(id) if id != ABSENT => {
                let seq = self.state.depart_good(id, &mut self.est, &mut self.rng)?;
                self.labels[label] = ABSENT;
                self.ledger.note_departure();
                if seq < self.state_mark_prev() {
                    self.departures.push(Departure { iteration: self.state.iteration, seq });
                }
                self.check_committee(ev.time);
            }
            _ => {
                return Err(Error::Validation {
                    index: ev.seq as usize,
                    msg: format!("depart of id {label} which is not live"),
                })
            }
        }
        self.after_change(ev.time);
        Ok(())
    }

    fn state_mark_prev(&self) -> u64 {
        self.state.snapshot_mark_prev()
    }

    fn tick(&mut self, t: f64) {
        let keep = purge_response(
            &mut self.adv,
            &self.adv_cfg,
            self.state.bad_count(),
            self.state.good_count(),
            t,
            self.cfg.test_cost,
        );
        self.state.retain_oldest_bad(keep, &mut self.est);
        let (a, b) = sybilcontrol_step(self.state.good_count(), keep, self.cfg.test_cost);
        self.ledger.book_periodic(a, b);
        self.adv.bad_live = self.state.bad_count();
        self.queue.push(t + SYBILCONTROL_PERIOD, EventKind::PeriodicTick, None);
    }

    fn after_change(&mut self, t: f64) {
        if self.cfg.defense.uses_window() {
            estimator_update(&self.state, &mut self.est, t);
        }
        let frac = self.state.bad_fraction();
        self.log.population_checks += 1;
        self.log.max_bad_fraction = self.log.max_bad_fraction.max(frac);
        if self.cfg.defense == Defense::SybilControl {
            if frac >= 0.5 {
                self.valid = false;
                self.stopped_at = Some(t);
            }
            return;
        }
        if frac >= 1.0 / 6.0 {
            self.log.population_violations += 1;
            self.log.record(Violation { time: t, kind: ViolationKind::Population, value: frac });
        }
        let h = self.cfg.heuristics;
        let heur = self.cfg.defense.uses_window();
        let risk = if heur && h.h2_enabled {
            let bound = h2_bad_upper_bound(&self.state, &self.est, &self.h2, self.cfg.c_je_high, t);
            self.log.h2_checks += 1;
            if frac > bound + 1e-12 {
                self.log.h2_unsound += 1;
                self.log.record(Violation { time: t, kind: ViolationKind::H2Unsound, value: frac - bound });
            }
            Some(h2_at_risk(bound, h.h2_margin))
        } else {
            None
        };
        let due = if heur { purge_decision(&h, &self.state, risk) } else { crate::togcom::purge_due(&self.state) };
        if due {
            self.purge(t);
        }
    }

    fn purge(&mut self, t: f64) {
        self.sample(t);
        let keep = purge_response(&mut self.adv, &self.adv_cfg, self.state.bad_count(), self.state.good_count(), t, 1);
        // Bad IDs evicted now were live at the end of an earlier iteration
        // only if they were retained before; record those for window checks.
        let mark = self.state.snapshot_mark_prev();
        let evicted_old = self.state.bad_seqs_below(mark).saturating_sub(keep);
        for k in 0..evicted_old {
            self.departures.push(Departure { iteration: self.state.iteration, seq: mark.saturating_sub(1 + k as u64) });
        }
        let n_a = self.state.n_a;
        let length = t - self.state.iter_start;
        let closing = self.state.iteration;
        execute_purge(&mut self.state, &mut self.est, &mut self.ledger, keep, t, &mut self.rng);
        self.marks.push((closing, self.state.snapshot_mark_prev()));
        self.adv.bad_live = self.state.bad_count();
        if self.cfg.defense == Defense::GMCom {
            gmcom_estimator_update(&mut self.gm, n_a, length);
            self.ledger.current.jg = self.gm.jg_estimate;
        } else if !self.cfg.defense.uses_window() {
            self.ledger.current.jg = 0.0;
        }
        self.h2.reset(self.state.size(), self.cfg.alpha);
        self.check_committee(t);
        if self.cfg.defense.uses_window() {
            estimator_update(&self.state, &mut self.est, t);
        }
        if self.cfg.fast_forward {
            self.fast_forward(t);
        }
    }

    fn check_committee(&mut self, t: f64) {
        let f = self.state.committee_bad_fraction();
        self.log.committee_checks += 1;
        self.log.max_committee_bad_fraction = self.log.max_committee_bad_fraction.max(f);
        if f >= 0.5 {
            self.log.committee_violations += 1;
            self.log.record(Violation { time: t, kind: ViolationKind::Committee, value: f });
        }
    }

    /// Applies whole purge cycles of a flat-price greedy attack in closed form.
    fn fast_forward(&mut self, t: f64) {
        let flat = matches!(self.cfg.defense, Defense::CCom)
            || (self.cfg.defense == Defense::GMCom && self.gm.failure_mode);
        if !flat
            || self.adv_cfg.strategy != Strategy::GreedyUniform
            || self.adv_cfg.pays_purge
            || !(self.adv_cfg.rate > 0.0)
            || self.state.bad_count() != 0
            || self.state.n_a + self.state.n_d != 0
        {
            return;
        }
        let g = self.state.good_count() as u64;
        let theta = g.div_ceil(11).max(1);
        let rate = self.adv_cfg.rate;
        let s = self.adv.spent;
        let t_ext = self
            .queue
            .peek()
            .map_or(f64::INFINITY, |e| e.time)
            .min(self.next_sample)
            .min(self.cfg.t_end.next_up());
        let end_of = |c: u64| t.max((s + c * theta) as f64 / rate);
        let guess = ((t_ext * rate - s as f64) / theta as f64).floor();
        if !(guess >= 2.0) {
            return;
        }
        let mut c = guess.min(1e15) as u64;
        while c > 0 && end_of(c) >= t_ext {
            c -= 1;
        }
        while end_of(c + 1) < t_ext {
            c += 1;
        }
        if c < 2 {
            return;
        }
        let t_last = end_of(c);
        let t_prev = end_of(c - 1);
        let row = IterationRow {
            start: t,
            length: (t_last - t) / c as f64,
            alg_purge: g,
            adv_entrance: theta,
            bad_joins: theta,
            s_prev: g,
            jg: self.ledger.current.jg,
            repeat: c,
            ..IterationRow::default()
        };
        self.ledger.push_block(row);
        self.adv.pay(c * theta);
        self.adv.injections += c * theta;
        self.bad_joins += c * theta;
        self.bad_attempts += c * theta;
        self.state.skip_iterations(c, c * theta, t_last);
        self.ledger.current.start = t_last;
        self.ledger.current.s_prev = self.state.size() as u64;
        self.marks.push((self.state.iteration - 1, self.state.snapshot_mark_prev()));
        if self.cfg.defense == Defense::GMCom {
            gmcom_estimator_update(&mut self.gm, theta, t_last - t_prev);
            self.ledger.current.jg = self.gm.jg_estimate;
        }
        let peak = theta as f64 / (g + theta) as f64;
        self.log.population_checks += c * theta;
        self.log.max_bad_fraction = self.log.max_bad_fraction.max(peak);
        if peak >= 1.0 / 6.0 {
            self.log.population_violations += c;
            self.log.record(Violation { time: t_last, kind: ViolationKind::Population, value: peak });
        }
        self.log.committee_checks += c;
        self.state.rotate_committee(&mut self.rng);
        self.fast_forwarded += c;
        self.sample(t_last);
        self.clock = t_last;
    }

    pub fn into_result(mut self) -> SimResult {
        self.finish();
        let duration = self.stopped_at.unwrap_or(self.cfg.t_end);
        SimResult {
            defense: self.cfg.defense,
            ledger: self.ledger,
            invariant_log: self.log,
            timeseries: self.timeseries,
            adversary: self.adv,
            duration,
            valid: self.valid,
            intervals: self.est.intervals,
            departures: self.departures,
            marks: self.marks,
            good_joins: self.good_joins,
            bad_joins: self.bad_joins,
            bad_attempts: self.bad_attempts,
            fast_forwarded_iterations: self.fast_forwarded,
        }
    }
}

/// Runs a whole simulation.
pub fn run(config: &SimConfig, trace: &ChurnTrace, adversary: &AdversaryConfig) -> Result<SimResult> {
    let mut sim = Simulation::new(config.clone(), trace, *adversary)?;
    while sim.step()?.is_some() {}
    Ok(sim.into_result())
}
