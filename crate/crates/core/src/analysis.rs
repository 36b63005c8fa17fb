//! Ground-truth epochs, assumption constants, and numeric checks of the
//! proved cost and estimation bounds against recorded runs.
//!
//! Everything here may look at good/bad labels; the defenses never do.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::churn::{ChurnKind, ChurnTrace};
use crate::engine::SimResult;
use crate::error::{Error, Result};
use crate::togcom::IterationRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epoch {
    pub start: f64,
    pub end: f64,
    /// Good joins in `(start, end]`.
    pub joins: usize,
    /// Good join rate ρ.
    pub rate: f64,
    /// Good population when the epoch closed.
    pub good_size: usize,
    /// Index range of this epoch's joins in [`EpochAnalysis::join_times`].
    pub first_join: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpochAnalysis {
    pub epochs: Vec<Epoch>,
    /// Joins after the last boundary, up to the end of the trace.
    pub tail: Option<Epoch>,
    /// Times of every good join after the initial population.
    pub join_times: Vec<f64>,
}

impl EpochAnalysis {
    pub fn boundaries(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.end).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.rate).collect()
    }

    /// Complete epochs followed by the tail, if any.
    pub fn all(&self) -> impl Iterator<Item = &Epoch> {
        self.epochs.iter().chain(self.tail.iter())
    }

    /// End of the last epoch (complete or not); join rates are undefined later.
    pub fn covered_until(&self) -> f64 {
        self.all().last().map_or(0.0, |e| e.end)
    }

    fn joins_of(&self, e: &Epoch) -> &[f64] {
        &self.join_times[e.first_join..e.first_join + e.joins]
    }

    /// Good joins in `(a, b]`.
    pub fn joins_between(&self, a: f64, b: f64) -> usize {
        let lo = self.join_times.partition_point(|&x| x <= a);
        let hi = self.join_times.partition_point(|&x| x <= b);
        hi.saturating_sub(lo)
    }

    /// Time-weighted good join rate over `[a, a + len)`.
    pub fn rate_over(&self, a: f64, len: f64) -> f64 {
        if len <= 0.0 {
            return self.all().find(|e| e.start <= a && a < e.end).map_or(0.0, |e| e.rate);
        }
        let b = a + len;
        let start = self.epochs.partition_point(|e| e.end <= a);
        let mut acc = 0.0;
        for e in self.epochs[start..].iter().chain(self.tail.iter()) {
            if e.start >= b {
                break;
            }
            let overlap = e.end.min(b) - e.start.max(a);
            if overlap > 0.0 {
                acc += e.rate * overlap;
            }
        }
        acc / len
    }
}

fn make_epoch(start: f64, end: f64, joins: usize, good_size: usize, first_join: usize) -> Epoch {
    let len = end - start;
    let rate = if len > 0.0 { joins as f64 / len } else if joins > 0 { f64::INFINITY } else { 0.0 };
    Epoch { start, end, joins, rate, good_size, first_join }
}

fn closes(new: usize, size: usize) -> bool {
    size > 0 && 4 * new >= 3 * size
}

/// Splits a trace into epochs: an epoch ends at the first event after which
/// at least three quarters of the live good IDs were absent at its start.
pub fn detect_epochs(trace: &ChurnTrace) -> EpochAnalysis {
    let n = trace.id_space();
    let mut live = vec![false; n];
    let mut joined_in = vec![0u64; n];
    let mut epoch = 0u64;
    let mut size = 0usize;
    for ev in trace.events.iter().take(trace.n_init) {
        live[ev.id as usize] = true;
        size += 1;
    }
    let mut out = EpochAnalysis::default();
    epoch += 1;
    let mut new = 0usize;
    let mut start = 0.0;
    let mut first = 0usize;
    for ev in trace.events.iter().skip(trace.n_init) {
        let i = ev.id as usize;
        match ev.kind {
            ChurnKind::Join => {
                live[i] = true;
                joined_in[i] = epoch;
                size += 1;
                new += 1;
                out.join_times.push(ev.time);
            }
            ChurnKind::Depart => {
                if live[i] {
                    live[i] = false;
                    size -= 1;
                    if joined_in[i] == epoch {
                        new -= 1;
                    }
                }
            }
        }
        if closes(new, size) {
            let joins = out.join_times.len() - first;
            out.epochs.push(make_epoch(start, ev.time, joins, size, first));
            epoch += 1;
            new = 0;
            start = ev.time;
            first = out.join_times.len();
        }
    }
    let end = trace.last_time().max(start);
    let joins = out.join_times.len() - first;
    if end > start || joins > 0 {
        out.tail = Some(make_epoch(start, end, joins, size, first));
    }
    out
}

/// Reference implementation of [`detect_epochs`]: after every event the new
/// members are recounted from scratch against the stored boundary set.
pub fn detect_epochs_brute_force(trace: &ChurnTrace) -> Vec<f64> {
    use std::collections::BTreeSet;
    let mut generation = vec![0u64; trace.id_space()];
    let mut live: BTreeSet<(u32, u64)> = BTreeSet::new();
    for ev in trace.events.iter().take(trace.n_init) {
        live.insert((ev.id, 0));
    }
    let mut boundary = live.clone();
    let mut out = Vec::new();
    for ev in trace.events.iter().skip(trace.n_init) {
        let i = ev.id as usize;
        match ev.kind {
            ChurnKind::Join => {
                generation[i] += 1;
                live.insert((ev.id, generation[i]));
            }
            ChurnKind::Depart => {
                live.remove(&(ev.id, generation[i]));
            }
        }
        let new = live.difference(&boundary).count();
        if closes(new, live.len()) {
            out.push(ev.time);
            boundary = live.clone();
        }
    }
    out
}

/// `(min, max)` of consecutive epoch rate ratios.
pub fn measure_a1(ep: &EpochAnalysis) -> Result<(f64, f64)> {
    if ep.epochs.len() < 2 {
        return Err(Error::InsufficientData(format!("{} complete epochs, need 2", ep.epochs.len())));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for w in ep.epochs.windows(2) {
        let r = w[1].rate / w[0].rate;
        if r.is_finite() {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    if !lo.is_finite() {
        return Err(Error::InsufficientData("no finite epoch rate ratio".into()));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A2Options {
    /// Seconds added to every window span.
    pub pad: f64,
    /// Epochs with at most this many joins are enumerated exhaustively.
    pub exact_limit: usize,
    /// Longest run of consecutive joins always examined in larger epochs.
    pub local_span: usize,
    pub random_pairs: usize,
    pub seed: u64,
    pub include_tail: bool,
}

impl Default for A2Options {
    fn default() -> Self {
        A2Options { pad: 1.0, exact_limit: 2000, local_span: 64, random_pairs: 10_000, seed: 0, include_tail: true }
    }
}

/// `(min, max)` over epochs of window join rate relative to the epoch rate.
pub fn measure_a2(ep: &EpochAnalysis, opts: &A2Options) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let tail = if opts.include_tail { ep.tail.as_ref() } else { None };
    for (idx, e) in ep.epochs.iter().chain(tail).enumerate() {
        let xs = ep.joins_of(e);
        if xs.len() < 2 || !(e.rate > 0.0 && e.rate.is_finite()) {
            continue;
        }
        let mut visit = |a: usize, b: usize| {
            let span = xs[b] - xs[a] + opts.pad;
            let r = (b - a + 1) as f64 / span / e.rate;
            if r.is_finite() {
                lo = lo.min(r);
                hi = hi.max(r);
            } else {
                hi = f64::INFINITY;
            }
        };
        let k = xs.len();
        if k <= opts.exact_limit {
            for a in 0..k {
                for b in a + 1..k {
                    visit(a, b);
                }
            }
        } else {
            for a in 0..k {
                for b in a + 1..(a + opts.local_span).min(k) {
                    visit(a, b);
                }
            }
            visit(0, k - 1);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream(idx as u64);
            for _ in 0..opts.random_pairs {
                let a = rng.random_range(0..k);
                let b = rng.random_range(0..k);
                if a != b {
                    visit(a.min(b), a.max(b));
                }
            }
        }
    }
    if !lo.is_finite() && hi == f64::NEG_INFINITY {
        return Err(Error::InsufficientData("no epoch with two or more joins".into()));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub a1_low: f64,
    pub a1_high: f64,
    pub a2_low: f64,
    pub a2_high: f64,
}

impl AssumptionConstants {
    /// Widens the bounds so that each bracket contains 1.
    pub fn new(a1_low: f64, a1_high: f64, a2_low: f64, a2_high: f64) -> Self {
        AssumptionConstants {
            a1_low: a1_low.min(1.0),
            a1_high: a1_high.max(1.0),
            a2_low: a2_low.min(1.0),
            a2_high: a2_high.max(1.0),
        }
    }

    /// Measured values for a trace. With fewer than two complete epochs the
    /// A1 bracket is taken as `(1, 1)`.
    pub fn measure(ep: &EpochAnalysis, opts: &A2Options) -> Result<Self> {
        let (l1, h1) = measure_a1(ep).unwrap_or((1.0, 1.0));
        let (l2, h2) = measure_a2(ep, opts)?;
        Ok(Self::new(l1, h1, l2, h2))
    }

    /// Published constants for the four reference networks.
    pub fn reference(network: &str) -> Option<Self> {
        let (a, b, c, d) = match network {
            "bitcoin" | "bitcoin_trace" => (0.1, 10.0, 0.0005, 30.0),
            "bittorrent" => (0.125, 8.0, 0.067, 15.0),
            "ethereum" => (0.5, 2.0, 0.4, 2.0),
            "gnutella" => (0.5, 2.0, 0.1, 4.0),
            _ => return None,
        };
        Some(Self::new(a, b, c, d))
    }

    pub fn c_je_low(&self) -> f64 {
        5.0 / 6.0 * self.a1_low * self.a1_low * self.a2_low / self.a1_high
    }

    pub fn c_je_high(&self) -> f64 {
        5.0 * self.a1_high * self.a1_high * self.a2_high / self.a1_low
    }

    pub fn d1(&self) -> f64 {
        (2.0 * self.c_je_high()).sqrt()
    }

    pub fn d2(&self) -> f64 {
        12.0 / 11.0 + self.a1_high * self.a2_high / (11.0 * self.c_je_low())
    }
}

/// Outcome of one checker over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub checked: u64,
    pub failed: u64,
    /// Largest observed `lhs / rhs`; below 1 means every check had slack.
    pub worst_ratio: f64,
    /// Iteration (or window start) of the first failure.
    pub first_failure: Option<u64>,
}

impl CheckReport {
    fn new(name: &'static str) -> Self {
        CheckReport { name, checked: 0, failed: 0, worst_ratio: 0.0, first_failure: None }
    }

    fn observe(&mut self, at: u64, lhs: f64, rhs: f64) {
        self.checked += 1;
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
        if lhs > rhs * (1.0 + 1e-9) + 1e-12 {
            self.failed += 1;
            self.first_failure.get_or_insert(at);
        }
    }

    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn pass_rate(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            1.0 - self.failed as f64 / self.checked as f64
        }
    }

    pub fn merge(&mut self, other: &CheckReport) {
        if other.failed > 0 && self.first_failure.is_none() {
            self.first_failure = other.first_failure;
        }
        self.checked += other.checked;
        self.failed += other.failed;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
    }
}

/// Closed iterations with positive length, excluding fast-forwarded blocks.
fn checkable(rows: &[IterationRow]) -> impl Iterator<Item = &IterationRow> {
    rows.iter().filter(|r| r.closed && r.repeat == 1 && r.length > 0.0)
}

/// Estimator bracket per iteration. Iterations priced by the initial estimate
/// (before the first estimator interval completed) are skipped.
pub fn check_theorem1(run: &SimResult, ep: &EpochAnalysis, ac: &AssumptionConstants) -> CheckReport {
    let mut rep = CheckReport::new("theorem1");
    let Some(&(_, warm)) = run.intervals.first() else {
        return rep;
    };
    let (lo, hi) = (ac.c_je_low(), ac.c_je_high());
    let end = ep.covered_until();
    for r in checkable(&run.rows()).filter(|r| r.iteration > 1 && r.start >= warm && r.start + r.length <= end) {
        let jg = ep.rate_over(r.start, r.length);
        // both sides of the bracket are folded into one ratio test
        rep.observe(r.iteration, (lo * jg / r.jg).max(r.jg / (hi * jg)), 1.0);
    }
    rep
}

/// Run-level spend-rate bound with the true good join rate.
pub fn check_theorem2(run: &SimResult, ep: &EpochAnalysis, ac: &AssumptionConstants) -> CheckReport {
    let mut rep = CheckReport::new("theorem2");
    if run.duration <= 0.0 {
        return rep;
    }
    let a = run.alg_spend_rate();
    let t = run.adv_spend_rate();
    let jg = ep.joins_between(0.0, run.duration) as f64 / run.duration;
    rep.observe(0, a, theorem2_bound(ac, t, jg, 0.0));
    rep
}

/// `11 d2 (2Δ + d1 sqrt(2T(c_H J + 1)) + J)`.
pub fn theorem2_bound(ac: &AssumptionConstants, t: f64, jg: f64, delta: f64) -> f64 {
    11.0 * ac.d2() * (2.0 * delta + ac.d1() * (2.0 * t * (ac.c_je_high() * jg + 1.0)).sqrt() + jg)
}

/// Bad joins per iteration against the adversary's spend in that iteration:
/// `b^2 <= 2 C (jg l + 1)` with `b` bad joins and `C` adversary cost.
pub fn check_lemma_joinbad(run: &SimResult) -> CheckReport {
    let mut rep = CheckReport::new("joinbad");
    for r in checkable(&run.rows()) {
        let b = r.bad_joins as f64 / r.length;
        let t = r.adv_total() as f64 / r.length;
        rep.observe(r.iteration, b, (2.0 * t * (r.jg + 1.0 / r.length)).sqrt());
    }
    rep
}

/// `A_i <= d2 |S_{i-1}| / l_i` for every iteration after the first.
pub fn check_lemma_algcost(run: &SimResult, ac: &AssumptionConstants) -> CheckReport {
    let mut rep = CheckReport::new("algcost");
    let d2 = ac.d2();
    for r in checkable(&run.rows()).filter(|r| r.iteration > 1) {
        rep.observe(r.iteration, r.alg_total() as f64, d2 * r.s_prev as f64);
    }
    rep
}

/// A contiguous range of iterations `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub first: u64,
    pub last: u64,
}

/// Every iteration in `from..=iterations` alone, aligned blocks of 4, 16,
/// 64, ... iterations, and the whole range. `from` is raised to 2.
pub fn default_windows(from: u64, iterations: u64) -> Vec<Window> {
    let from = from.max(2);
    let mut out = Vec::new();
    if iterations < from {
        return out;
    }
    let count = iterations - from + 1;
    let mut len = 1u64;
    while len < count {
        let mut first = from;
        while first + len - 1 <= iterations {
            out.push(Window { first, last: first + len - 1 });
            first += len;
        }
        len *= 4;
    }
    out.push(Window { first: from, last: iterations });
    out
}

/// Windowed cost bound over contiguous iterations after the first.
pub fn check_corollary_windows(
    run: &SimResult,
    ep: &EpochAnalysis,
    ac: &AssumptionConstants,
    windows: &[Window],
) -> Result<CheckReport> {
    let mut rep = CheckReport::new("corollary");
    let rows: Vec<IterationRow> = run.rows().into_iter().filter(|r| r.closed).collect();
    if rows.iter().any(|r| r.repeat != 1) {
        return Err(Error::Domain("window checks need per-iteration rows".into()));
    }
    let n = rows.len() as u64;
    let mut alg = vec![0u64; rows.len() + 1];
    let mut adv = vec![0u64; rows.len() + 1];
    let mut len = vec![0f64; rows.len() + 1];
    for (k, r) in rows.iter().enumerate() {
        alg[k + 1] = alg[k] + r.alg_total();
        adv[k + 1] = adv[k] + r.adv_total();
        len[k + 1] = len[k] + r.length;
    }
    for w in windows {
        if w.first < 2 {
            return Err(Error::Domain(format!("window starting at iteration {} includes iteration 1", w.first)));
        }
        if w.last < w.first || w.last > n {
            return Err(Error::Domain(format!("window {}..={} outside the {n} closed iterations", w.first, w.last)));
        }
        let (a, b) = ((w.first - 1) as usize, w.last as usize);
        let span = len[b] - len[a];
        if span <= 0.0 {
            continue;
        }
        let start = rows[a].start;
        let alg_rate = (alg[b] - alg[a]) as f64 / span;
        let adv_rate = (adv[b] - adv[a]) as f64 / span;
        let jg = ep.joins_between(start, start + span) as f64 / span;
        let mark = run
            .mark_of(w.first - 1)
            .ok_or_else(|| Error::Domain(format!("no membership record for iteration {}", w.first - 1)))?;
        let lo = run.departures.partition_point(|d| d.iteration < w.first);
        let hi = run.departures.partition_point(|d| d.iteration <= w.last);
        let delta = run.departures[lo..hi].iter().filter(|d| d.seq < mark).count() as f64 / span;
        rep.observe(w.first, alg_rate, theorem2_bound(ac, adv_rate, jg, delta));
    }
    Ok(rep)
}

/// Each completed estimator interval overlaps at most two epochs and
/// contains none entirely.
pub fn check_interval_epochs(intervals: &[(f64, f64)], ep: &EpochAnalysis) -> CheckReport {
    let mut rep = CheckReport::new("interval_epochs");
    let all: Vec<&Epoch> = ep.all().collect();
    for (k, &(a, b)) in intervals.iter().enumerate() {
        let from = all.partition_point(|e| e.end <= a);
        let mut touched = 0;
        let mut contains = false;
        for e in &all[from..] {
            if e.start >= b {
                break;
            }
            touched += 1;
            if a <= e.start && e.end <= b && ep.epochs.iter().any(|c| std::ptr::eq(c, *e)) {
                contains = true;
            }
        }
        let bad = touched > 2 || contains;
        rep.observe(k as u64, if bad { 1.0 } else { 0.0 }, 0.0);
    }
    rep
}

/// `sum s_i^2 >= (sum s_i)^2 / n` for non-negative entries.
pub fn cs2_holds(s: &[f64]) -> bool {
    if s.is_empty() {
        return true;
    }
    let total: f64 = s.iter().sum();
    let squares: f64 = s.iter().map(|x| x * x).sum();
    squares >= total * total / s.len() as f64 * (1.0 - 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::churn::TraceEvent;

    fn ev(time: f64, id: u32, kind: ChurnKind) -> TraceEvent {
        TraceEvent { time, id, kind }
    }

    fn monotone(n_init: u32, joins: u32, gap: f64) -> ChurnTrace {
        let mut v: Vec<TraceEvent> = (0..n_init).map(|i| ev(0.0, i, ChurnKind::Join)).collect();
        for k in 0..joins {
            v.push(ev((k + 1) as f64 * gap, n_init + k, ChurnKind::Join));
        }
        ChurnTrace::from_events(v)
    }

    #[test]
    fn first_epoch_closes_at_300th_join() {
        let ep = detect_epochs(&monotone(100, 400, 1.0));
        assert_eq!(ep.epochs[0].end, 300.0);
        assert_eq!(ep.epochs[0].joins, 300);
        assert!((ep.epochs[0].rate - 1.0).abs() < 1e-12);
        assert_eq!(detect_epochs_brute_force(&monotone(100, 400, 1.0))[0], 300.0);
    }

    #[test]
    fn empty_trace_has_no_epochs() {
        let ep = detect_epochs(&ChurnTrace::empty());
        assert!(ep.epochs.is_empty());
        assert!(detect_epochs_brute_force(&ChurnTrace::empty()).is_empty());
    }

    #[test]
    fn a1_ratios() {
        let mk = |rates: &[f64]| EpochAnalysis {
            epochs: rates.iter().map(|&r| Epoch { start: 0.0, end: 1.0, joins: 0, rate: r, good_size: 1, first_join: 0 }).collect(),
            ..Default::default()
        };
        assert_eq!(measure_a1(&mk(&[2.0, 4.0, 2.0])).unwrap(), (0.5, 2.0));
        assert_eq!(measure_a1(&mk(&[3.0, 3.0, 3.0])).unwrap(), (1.0, 1.0));
        assert!(matches!(measure_a1(&mk(&[3.0])), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn a2_windows() {
        let ep = detect_epochs(&monotone(100, 300, 1.0));
        let (lo, hi) = measure_a2(&ep, &A2Options { pad: 0.0, ..Default::default() }).unwrap();
        // k joins over k-1 seconds: the tightest pair is 2/1
        assert!((hi - 2.0).abs() < 1e-12);
        assert!((lo - 300.0 / 299.0).abs() < 1e-12);
        let (lo, hi) = measure_a2(&ep, &A2Options::default()).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);

        // two joins 0.1 s apart in a 1/s epoch
        let mut v: Vec<TraceEvent> = (0..100).map(|i| ev(0.0, i, ChurnKind::Join)).collect();
        for k in 1..=300u32 {
            let t = if k == 150 { 149.1 } else { k as f64 };
            v.push(ev(t, 99 + k, ChurnKind::Join));
        }
        let ep = detect_epochs(&ChurnTrace::from_events(v));
        assert!((ep.epochs[0].rate - 1.0).abs() < 1e-12);
        let (_, hi) = measure_a2(&ep, &A2Options { pad: 0.0, include_tail: false, ..Default::default() }).unwrap();
        assert!((hi - 20.0).abs() < 1e-9, "{hi}");
    }

    #[test]
    fn a2_sampling_covers_extremes() {
        // uniform joins with one tight pair: the adjacent pass must find it
        let mut v: Vec<TraceEvent> = (0..10).map(|i| ev(0.0, i, ChurnKind::Join)).collect();
        for k in 0..5000u32 {
            let t = (k + 1) as f64 + if k == 2500 { 0.999 } else { 0.0 };
            v.push(ev(t, 10 + k, ChurnKind::Join));
        }
        let ep = detect_epochs(&ChurnTrace::from_events(v));
        let big = ep.all().filter(|e| e.joins > 2000).count();
        assert!(big > 0);
        let opts = A2Options { pad: 0.0, ..Default::default() };
        let exact = A2Options { exact_limit: usize::MAX, ..opts };
        assert_eq!(measure_a2(&ep, &opts).unwrap().1, measure_a2(&ep, &exact).unwrap().1);
    }

    #[test]
    fn derived_constants() {
        let e = AssumptionConstants::reference("ethereum").unwrap();
        assert!((e.c_je_low() - 5.0 / 6.0 * 0.25 * 0.4 / 2.0).abs() < 1e-12);
        assert!((e.c_je_low() - 0.0417).abs() < 1e-4);
        assert!((e.c_je_high() - 80.0).abs() < 1e-12);
        assert!((e.d1() - 160f64.sqrt()).abs() < 1e-12);
        assert!((e.d1() - 12.649).abs() < 1e-3);
        let g = AssumptionConstants::reference("gnutella").unwrap();
        assert!((g.c_je_high() - 160.0).abs() < 1e-12);
        let c = AssumptionConstants::new(1.5, 0.8, 2.0, 0.5);
        assert_eq!((c.a1_low, c.a1_high, c.a2_low, c.a2_high), (1.0, 1.0, 1.0, 1.0));
        assert!(c.c_je_low() <= 1.0 && c.c_je_high() >= 1.0);
    }

    #[test]
    fn cs2_examples() {
        assert!(cs2_holds(&[1.0, 2.0, 3.0]));
        assert!(cs2_holds(&[]));
        assert!(cs2_holds(&[4.0, 4.0]));
    }

    #[test]
    fn windows_cover_and_exclude_first_iteration() {
        let w = default_windows(1, 10);
        assert!(w.iter().all(|w| w.first >= 2 && w.last <= 10));
        assert_eq!(w.iter().filter(|w| w.first == w.last).count(), 9);
        assert_eq!(w.iter().filter(|w| w.last + 1 - w.first == 4).count(), 2);
        assert_eq!(*w.last().unwrap(), Window { first: 2, last: 10 });
        assert!(default_windows(0, 1).is_empty());
        let w = default_windows(6, 10);
        assert!(w.iter().all(|w| w.first >= 6));
        assert_eq!(*w.last().unwrap(), Window { first: 6, last: 10 });
        assert_eq!(default_windows(10, 10), vec![Window { first: 10, last: 10 }]);
    }

    #[test]
    fn interval_epoch_fixture() {
        let ep = EpochAnalysis {
            epochs: vec![
                Epoch { start: 0.0, end: 10.0, joins: 10, rate: 1.0, good_size: 10, first_join: 0 },
                Epoch { start: 10.0, end: 20.0, joins: 10, rate: 1.0, good_size: 10, first_join: 0 },
                Epoch { start: 20.0, end: 30.0, joins: 10, rate: 1.0, good_size: 10, first_join: 0 },
                Epoch { start: 30.0, end: 40.0, joins: 10, rate: 1.0, good_size: 10, first_join: 0 },
            ],
            ..Default::default()
        };
        assert!(check_interval_epochs(&[], &ep).passed());
        assert!(check_interval_epochs(&[(2.0, 8.0), (8.0, 15.0), (15.0, 24.0)], &ep).passed());
        let bad = check_interval_epochs(&[(5.0, 35.0)], &ep);
        assert!(!bad.passed());
        assert!(!check_interval_epochs(&[(10.0, 20.0)], &ep).passed());
    }
}
