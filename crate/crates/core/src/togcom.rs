//! ToGCom protocol state: membership with iteration bookkeeping, the
//! sliding join window that prices entrance puzzles, purges with committee
//! rotation, and the Estimate-GoodJR join-rate estimator.
//!
//! Membership differences (`|S_cur - S_est|`, `|S_cur Δ S_prev|`) are kept
//! in O(1) per event. Every join gets a monotone sequence number; a snapshot
//! taken at sequence `mark` contains exactly the members with `seq < mark`
//! that were live at the time, so it suffices to count how many of them have
//! left since.

use std::cell::Cell;
use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Member {
    Good(u32),
    Bad(u64),
}

impl Member {
    pub fn is_good(self) -> bool {
        matches!(self, Member::Good(_))
    }
}

/// Membership of `S_cur` at the moment of a snapshot, tracked by join sequence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Snapshot {
    mark: u64,
    size: usize,
    left: usize,
}

impl Snapshot {
    pub fn size(&self) -> usize {
        self.size
    }

    fn note_left(&mut self, seq: u64) {
        if seq < self.mark {
            self.left += 1;
        }
    }

    /// Snapshot members that are still live.
    pub fn retained(&self) -> usize {
        self.size - self.left
    }

    /// Members that left since the snapshot.
    pub fn departed(&self) -> usize {
        self.left
    }

    /// Live members that were not part of the snapshot.
    pub fn new_members(&self, current: usize) -> usize {
        current - self.retained()
    }
}

/// How far back the entrance window may reach.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowMode {
    /// Joins in the trailing `1/J̃G` seconds count regardless of purges.
    Trailing,
    /// Only joins since the start of the current iteration count.
    IterationTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TogcomParams {
    pub n0: usize,
    pub c_comm: f64,
    pub window: WindowMode,
    /// Minimum span of join history kept for window queries, in seconds.
    pub log_retention: f64,
}

impl TogcomParams {
    pub fn new(n0: usize) -> Self {
        TogcomParams { n0, c_comm: 3.0, window: WindowMode::Trailing, log_retention: 10.0 }
    }

    pub fn committee_size(&self) -> usize {
        committee_size(self.n0, self.c_comm)
    }
}

pub fn committee_size(n0: usize, c_comm: f64) -> usize {
    let k = (c_comm * (n0.max(1) as f64).ln()).ceil();
    (k as usize).max(1)
}

/// Time-ordered join timestamps backing the entrance window.
#[derive(Debug, Clone, Default)]
pub struct JoinLog {
    times: VecDeque<f64>,
    // index of the last search result; window cutoffs mostly move forward
    hint: Cell<usize>,
}

impl JoinLog {
    pub fn push(&mut self, t: f64) {
        self.times.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn clear(&mut self) {
        self.times.clear();
        self.hint.set(0);
    }

    /// Index of the first entry strictly later than `cutoff`.
    fn first_after(&self, cutoff: f64) -> usize {
        let n = self.times.len();
        let mut i = self.hint.get().min(n);
        if i > 0 && self.times[i - 1] > cutoff {
            i = self.times.partition_point(|&x| x <= cutoff);
        } else {
            let mut steps = 0;
            while i < n && self.times[i] <= cutoff {
                i += 1;
                steps += 1;
                if steps == 16 {
                    i = self.times.partition_point(|&x| x <= cutoff);
                    break;
                }
            }
        }
        self.hint.set(i);
        i
    }

    /// Entries strictly later than `cutoff`.
    pub fn count_after(&self, cutoff: f64) -> usize {
        self.times.len() - self.first_after(cutoff)
    }

    pub fn oldest_after(&self, cutoff: f64) -> Option<f64> {
        self.times.get(self.first_after(cutoff)).copied()
    }

    pub fn prune_through(&mut self, cutoff: f64) {
        while self.times.front().is_some_and(|&x| x <= cutoff) {
            self.times.pop_front();
            self.hint.set(self.hint.get().saturating_sub(1));
        }
    }

    /// Difficulty a join at `t` would pay with window length `w`.
    pub fn price_at(&self, t: f64, w: f64) -> u64 {
        self.count_after(t - w) as u64 + 1
    }

    /// First instant after `t` at which the window price falls, if any.
    pub fn next_drop(&self, t: f64, w: f64) -> Option<f64> {
        let x0 = self.oldest_after(t - w)?;
        Some(drop_time(x0, w, t))
    }

    /// Earliest `t' >= t` at which a budget `rate * t' - spent` covers the
    /// window price. Walks the log forward from a single search.
    pub fn earliest_affordable(&self, t: f64, w: f64, rate: f64, spent: u64) -> f64 {
        let n = self.times.len();
        let mut i = self.first_after(t - w);
        let mut t = t;
        loop {
            let p = (n - i) as u64 + 1;
            let ta = t.max((spent + p) as f64 / rate);
            if i == n {
                return ta;
            }
            let td = drop_time(self.times[i], w, t);
            if td > ta {
                return ta;
            }
            t = td;
            while i < n && self.times[i] <= t - w {
                i += 1;
            }
        }
    }
}

/// Smallest `td > t` with `td - w >= x0`.
fn drop_time(x0: f64, w: f64, t: f64) -> f64 {
    let mut td = x0 + w;
    while td - w < x0 {
        td = td.next_up();
    }
    while td.next_down() - w >= x0 && td.next_down() > t {
        td = td.next_down();
    }
    td
}

/// One iteration's cost record. `repeat > 1` encodes identical consecutive
/// iterations produced by fast-forwarding a flat-price attack.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IterationRow {
    pub iteration: u64,
    pub start: f64,
    pub length: f64,
    pub alg_entrance: u64,
    pub alg_purge: u64,
    pub adv_entrance: u64,
    pub adv_purge: u64,
    pub good_joins: u64,
    pub bad_joins: u64,
    pub departures: u64,
    /// `|S_{i-1}|`, the membership size when the iteration began.
    pub s_prev: u64,
    /// Join-rate estimate that priced this iteration.
    pub jg: f64,
    pub repeat: u64,
    /// False for the trailing iteration cut off by the end of the run.
    pub closed: bool,
}

impl IterationRow {
    pub fn alg_total(&self) -> u64 {
        self.alg_entrance + self.alg_purge
    }

    pub fn adv_total(&self) -> u64 {
        self.adv_entrance + self.adv_purge
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CostLedger {
    pub alg_entrance: u64,
    pub alg_purge: u64,
    pub alg_periodic: u64,
    pub adv_entrance: u64,
    pub adv_purge: u64,
    pub adv_periodic: u64,
    pub rows: Vec<IterationRow>,
    pub current: IterationRow,
}

impl CostLedger {
    pub fn new(start: f64, s_prev: usize, jg: f64) -> Self {
        CostLedger {
            current: IterationRow {
                iteration: 1,
                start,
                s_prev: s_prev as u64,
                jg,
                repeat: 1,
                ..IterationRow::default()
            },
            ..CostLedger::default()
        }
    }

    pub fn algorithmic_total(&self) -> u64 {
        self.alg_entrance + self.alg_purge + self.alg_periodic
    }

    pub fn adversarial_total(&self) -> u64 {
        self.adv_entrance + self.adv_purge + self.adv_periodic
    }

    pub fn book_entrance(&mut self, good: bool, charge: u64) {
        if good {
            self.alg_entrance += charge;
            self.current.alg_entrance += charge;
            self.current.good_joins += 1;
        } else {
            self.adv_entrance += charge;
            self.current.adv_entrance += charge;
            self.current.bad_joins += 1;
        }
    }

    /// Entrance work for an attempt that was refused admission.
    pub fn book_rejected(&mut self, good: bool, charge: u64) {
        if good {
            self.alg_entrance += charge;
            self.current.alg_entrance += charge;
        } else {
            self.adv_entrance += charge;
            self.current.adv_entrance += charge;
        }
    }

    pub fn book_purge(&mut self, good_units: u64, bad_units: u64) {
        self.alg_purge += good_units;
        self.adv_purge += bad_units;
        self.current.alg_purge += good_units;
        self.current.adv_purge += bad_units;
    }

    pub fn book_periodic(&mut self, good_units: u64, bad_units: u64) {
        self.alg_periodic += good_units;
        self.adv_periodic += bad_units;
    }

    pub fn note_departure(&mut self) {
        self.current.departures += 1;
    }

    /// Closes the open iteration at `t` and opens the next one.
    pub fn close_iteration(&mut self, t: f64, s_prev_next: usize, jg_next: f64) {
        let mut row = self.current;
        row.length = t - row.start;
        row.closed = true;
        self.rows.push(row);
        self.current = IterationRow {
            iteration: row.iteration + 1,
            start: t,
            s_prev: s_prev_next as u64,
            jg: jg_next,
            repeat: 1,
            ..IterationRow::default()
        };
    }

    /// Appends `repeat` identical closed iterations in one row.
    pub fn push_block(&mut self, mut row: IterationRow) {
        row.iteration = self.current.iteration;
        row.closed = true;
        self.alg_entrance += row.alg_entrance * row.repeat;
        self.alg_purge += row.alg_purge * row.repeat;
        self.adv_entrance += row.adv_entrance * row.repeat;
        self.adv_purge += row.adv_purge * row.repeat;
        self.current.iteration += row.repeat;
        self.rows.push(row);
    }

    /// Rows including the still-open trailing iteration, cut at `t_end`.
    pub fn finished_rows(&self, t_end: f64) -> Vec<IterationRow> {
        let mut rows = self.rows.clone();
        let mut last = self.current;
        last.length = (t_end - last.start).max(0.0);
        last.closed = false;
        rows.push(last);
        rows
    }

    pub fn iteration_count(&self) -> u64 {
        self.rows.iter().map(|r| r.repeat).sum::<u64>() + 1
    }
}

/// Writes the per-iteration CSV, expanding repeated blocks row by row.
pub fn write_iterations_csv<W: std::io::Write>(rows: &[IterationRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,start,length,alg_entrance,alg_purge,adv_entrance,adv_purge")?;
    for r in rows {
        for k in 0..r.repeat {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration + k,
                r.start + k as f64 * r.length,
                r.length,
                r.alg_entrance,
                r.alg_purge,
                r.adv_entrance,
                r.adv_purge
            )?;
        }
    }
    Ok(())
}

/// Estimate-GoodJR. `jg_hat` is the latest estimate; `jg_active` is the value
/// latched when the current iteration began and is the one used for pricing.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorState {
    pub jg_hat: f64,
    pub jg_active: f64,
    pub l_est: Option<f64>,
    pub last_change: f64,
    pub s_est: Snapshot,
    /// Completed intervals as `(start, end)`.
    pub intervals: Vec<(f64, f64)>,
}

impl EstimatorState {
    pub fn new(jg0: f64, s_est: Snapshot) -> Self {
        EstimatorState { jg_hat: jg0, jg_active: jg0, l_est: None, last_change: 0.0, s_est, intervals: Vec::new() }
    }

    pub fn window(&self) -> f64 {
        1.0 / self.jg_active
    }
}

#[derive(Debug, Clone)]
pub struct SystemState {
    pub params: TogcomParams,
    good_live: Vec<u32>,
    good_pos: Vec<u32>,
    good_seq: Vec<u64>,
    bad_live: VecDeque<(u64, u64)>,
    next_bad: u64,
    next_seq: u64,
    pub iteration: u64,
    pub n_a: u64,
    pub n_d: u64,
    pub prev: Snapshot,
    pub iter_start: f64,
    pub join_log: JoinLog,
    pub committee: Vec<Member>,
}

const NOT_LIVE: u32 = u32::MAX;

impl SystemState {
    pub fn new(params: TogcomParams) -> Self {
        SystemState {
            params,
            good_live: Vec::new(),
            good_pos: Vec::new(),
            good_seq: Vec::new(),
            bad_live: VecDeque::new(),
            next_bad: 0,
            next_seq: 0,
            iteration: 1,
            n_a: 0,
            n_d: 0,
            prev: Snapshot::default(),
            iter_start: 0.0,
            join_log: JoinLog::default(),
            committee: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.good_live.len() + self.bad_live.len()
    }

    pub fn good_count(&self) -> usize {
        self.good_live.len()
    }

    pub fn bad_count(&self) -> usize {
        self.bad_live.len()
    }

    pub fn bad_fraction(&self) -> f64 {
        let n = self.size();
        if n == 0 {
            0.0
        } else {
            self.bad_live.len() as f64 / n as f64
        }
    }

    pub fn s_prev(&self) -> usize {
        self.prev.size()
    }

    pub fn is_live_good(&self, id: u32) -> bool {
        self.good_pos.get(id as usize).is_some_and(|&p| p != NOT_LIVE)
    }

    pub fn contains(&self, m: Member) -> bool {
        match m {
            Member::Good(g) => self.is_live_good(g),
            Member::Bad(b) => self.bad_live.iter().any(|&(id, _)| id == b),
        }
    }

    /// Takes a snapshot of the current membership.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot { mark: self.next_seq, size: self.size(), left: 0 }
    }

    /// Allocates a fresh good identity (never reused).
    pub fn fresh_good_id(&mut self) -> u32 {
        let id = self.good_pos.len() as u32;
        self.good_pos.push(NOT_LIVE);
        self.good_seq.push(0);
        id
    }

    /// Adds a member without touching iteration counters (bootstrap).
    pub fn insert_initial(&mut self, good: bool) -> Member {
        let seq = self.next_seq;
        self.next_seq += 1;
        if good {
            let id = self.fresh_good_id();
            self.good_pos[id as usize] = self.good_live.len() as u32;
            self.good_seq[id as usize] = seq;
            self.good_live.push(id);
            Member::Good(id)
        } else {
            let id = self.next_bad;
            self.next_bad += 1;
            self.bad_live.push_back((id, seq));
            Member::Bad(id)
        }
    }

    /// Admits a joining ID: membership, `n_a`, and the join log.
    pub fn admit(&mut self, good: Option<u32>, t: f64) -> Result<Member> {
        let seq = self.next_seq;
        let m = match good {
            Some(id) => {
                let slot = self
                    .good_pos
                    .get(id as usize)
                    .copied()
                    .ok_or_else(|| Error::Validation { index: 0, msg: format!("unknown good id {id}") })?;
                if slot != NOT_LIVE {
                    return Err(Error::Validation { index: 0, msg: format!("good id {id} is already live") });
                }
                self.good_pos[id as usize] = self.good_live.len() as u32;
                self.good_seq[id as usize] = seq;
                self.good_live.push(id);
                Member::Good(id)
            }
            None => {
                let id = self.next_bad;
                self.next_bad += 1;
                self.bad_live.push_back((id, seq));
                Member::Bad(id)
            }
        };
        self.next_seq += 1;
        self.n_a += 1;
        self.log_join(t);
        Ok(m)
    }

    /// Records a join attempt in the entrance window without admitting it.
    pub fn log_join(&mut self, t: f64) {
        self.join_log.push(t);
    }

    pub fn prune_log(&mut self, t: f64, est: &EstimatorState) {
        let keep = est.window().max(1.0 / est.jg_hat).max(self.params.log_retention);
        self.join_log.prune_through(t - keep);
    }

    /// Removes a departing good ID. Returns its join sequence number.
    pub fn depart_good<R: Rng>(&mut self, id: u32, est: &mut EstimatorState, rng: &mut R) -> Result<u64> {
        let pos = match self.good_pos.get(id as usize) {
            Some(&p) if p != NOT_LIVE => p as usize,
            _ => return Err(Error::Validation { index: 0, msg: format!("depart of good id {id} which is not live") }),
        };
        let last = *self.good_live.last().expect("non-empty");
        self.good_live.swap_remove(pos);
        if last != id {
            self.good_pos[last as usize] = pos as u32;
        }
        self.good_pos[id as usize] = NOT_LIVE;
        let seq = self.good_seq[id as usize];
        self.prev.note_left(seq);
        est.s_est.note_left(seq);
        self.n_d += 1;
        if let Some(k) = self.committee.iter().position(|&m| m == Member::Good(id)) {
            self.committee.swap_remove(k);
            self.refill_committee(rng);
        }
        Ok(seq)
    }

    /// Keeps the `keep` oldest bad IDs and removes the rest.
    pub fn retain_oldest_bad(&mut self, keep: usize, est: &mut EstimatorState) -> usize {
        let keep = keep.min(self.bad_live.len());
        let removed = self.bad_live.len() - keep;
        // bad_live is in join order, so removed IDs form a suffix sorted by seq.
        let below = |mark: u64, q: &VecDeque<(u64, u64)>| {
            q.partition_point(|&(_, s)| s < mark).saturating_sub(keep)
        };
        let prev_left = below(self.prev.mark, &self.bad_live);
        let est_left = below(est.s_est.mark, &self.bad_live);
        self.prev.left += prev_left;
        est.s_est.left += est_left;
        self.bad_live.truncate(keep);
        if removed > 0 {
            let bad = &self.bad_live;
            self.committee
                .retain(|m| match m {
                    Member::Good(_) => true,
                    Member::Bad(b) => bad.iter().any(|&(x, _)| x == *b),
                });
        }
        removed
    }

    /// Join-sequence mark of `S_prev`: members with a smaller sequence number belong to it.
    pub fn snapshot_mark_prev(&self) -> u64 {
        self.prev.mark
    }

    /// Live bad IDs that joined before `mark`.
    pub fn bad_seqs_below(&self, mark: u64) -> usize {
        self.bad_live.partition_point(|&(_, s)| s < mark)
    }

    /// Accounts for `iterations` purge cycles in which `joins` bad IDs joined
    /// and were evicted again, ending with a purge at `t`. Membership is
    /// unchanged; only sequence numbers and iteration counters advance.
    pub fn skip_iterations(&mut self, iterations: u64, joins: u64, t: f64) {
        debug_assert!(self.bad_live.is_empty() && self.n_a == 0 && self.n_d == 0);
        self.next_seq += joins;
        self.next_bad += joins;
        self.iteration += iterations;
        self.iter_start = t;
        self.prev = self.snapshot();
        self.join_log.clear();
    }

    fn member_at(&self, i: usize) -> Member {
        if i < self.good_live.len() {
            Member::Good(self.good_live[i])
        } else {
            Member::Bad(self.bad_live[i - self.good_live.len()].0)
        }
    }

    fn refill_committee<R: Rng>(&mut self, rng: &mut R) {
        let target = self.params.committee_size().min(self.size());
        if self.size() <= target {
            self.committee = (0..self.size()).map(|i| self.member_at(i)).collect();
            return;
        }
        while self.committee.len() < target {
            let cand = self.member_at(rng.random_range(0..self.size()));
            if !self.committee.contains(&cand) {
                self.committee.push(cand);
            }
        }
    }

    pub fn committee_bad_fraction(&self) -> f64 {
        if self.committee.is_empty() {
            return 0.0;
        }
        self.committee.iter().filter(|m| !m.is_good()).count() as f64 / self.committee.len() as f64
    }

    pub fn rotate_committee<R: Rng>(&mut self, rng: &mut R) {
        let k = self.params.committee_size().min(self.size());
        self.committee = sample(rng, self.size(), k).into_iter().map(|i| self.member_at(i)).collect();
    }

    /// Membership symmetric difference with `S_prev`.
    pub fn symmetric_difference(&self) -> usize {
        self.prev.new_members(self.size()) + self.prev.departed()
    }

    /// Live IDs absent from the estimator snapshot.
    pub fn new_since(&self, snap: &Snapshot) -> usize {
        snap.new_members(self.size())
    }
}

/// Members as a uniform-sampling view, for [`select_committee`].
pub fn select_committee<R: Rng>(members: &[Member], n0: usize, c_comm: f64, rng: &mut R) -> Vec<Member> {
    let k = committee_size(n0, c_comm).min(members.len());
    sample(rng, members.len(), k).into_iter().map(|i| members[i]).collect()
}

/// Count of IDs that joined in the window `(t - 1/J̃G, t]`, plus the joiner.
pub fn entrance_difficulty(state: &SystemState, est: &EstimatorState, t: f64) -> Result<u64> {
    if !(est.jg_active > 0.0) {
        return Err(Error::EstimatorUninitialized);
    }
    // In truncated mode the log is cleared at every purge, so it never
    // reaches back past iter_start.
    Ok(state.join_log.price_at(t, est.window()))
}

/// Prices and admits a join under ToGCom's window rule.
pub fn on_join(
    state: &mut SystemState,
    est: &mut EstimatorState,
    ledger: &mut CostLedger,
    good: Option<u32>,
    t: f64,
) -> Result<(Member, u64)> {
    let charge = entrance_difficulty(state, est, t)?;
    let m = state.admit(good, t)?;
    ledger.book_entrance(good.is_some(), charge);
    state.prune_log(t, est);
    Ok((m, charge))
}

/// `n_a + n_d >= |S_{i-1}| / 11`.
pub fn purge_due(state: &SystemState) -> bool {
    11 * (state.n_a + state.n_d) >= state.s_prev() as u64
}

/// Runs a purge at `t`: good IDs each solve one unit, the `retain_bad` oldest
/// bad IDs are kept (paid for by the adversary), the rest are evicted.
pub fn execute_purge<R: Rng>(
    state: &mut SystemState,
    est: &mut EstimatorState,
    ledger: &mut CostLedger,
    retain_bad: usize,
    t: f64,
    rng: &mut R,
) {
    let good = state.good_count() as u64;
    state.retain_oldest_bad(retain_bad, est);
    ledger.book_purge(good, state.bad_count() as u64);
    est.jg_active = est.jg_hat;
    ledger.close_iteration(t, state.size(), est.jg_active);
    state.prev = state.snapshot();
    state.iteration += 1;
    state.n_a = 0;
    state.n_d = 0;
    state.iter_start = t;
    if state.params.window == WindowMode::IterationTruncated {
        state.join_log.clear();
    }
    state.rotate_committee(rng);
}

/// Applies the interval rule; returns true when the estimate changed.
pub fn estimator_update(state: &SystemState, est: &mut EstimatorState, t: f64) -> bool {
    let cur = state.size();
    let new = state.new_since(&est.s_est);
    if cur == 0 || 5 * new < 3 * cur {
        return false;
    }
    let l = t - est.last_change;
    if !(l > 0.0) {
        return false;
    }
    est.l_est = Some(l);
    est.jg_hat = cur as f64 / l;
    est.intervals.push((est.last_change, t));
    est.s_est = state.snapshot();
    est.last_change = t;
    true
}
