//! Purge-deferral heuristics and admission screening.
//!
//! * H1 measures membership change as the symmetric difference with `S_prev`.
//! * H2 keeps a conservative upper bound on the bad fraction and purges only
//!   when that bound approaches 1/6.
//! * H3 is a Bernoulli classifier applied to every join attempt.

use rand::Rng;

use crate::togcom::{EstimatorState, SystemState};

/// When H3 screens a joining ID relative to its entrance puzzle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Screening {
    /// The attempt solves the entrance puzzle, is counted in the entrance
    /// window, and is classified afterwards.
    AfterPuzzle,
    /// The attempt is classified first; refused IDs pay nothing and leave no trace.
    BeforePuzzle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicConfig {
    pub h1_enabled: bool,
    pub h2_enabled: bool,
    /// 0 disables H3.
    pub h3_accuracy: f64,
    pub h2_margin: f64,
    pub screening: Screening,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            h1_enabled: false,
            h2_enabled: false,
            h3_accuracy: 0.0,
            h2_margin: 1.0 / 60.0,
            screening: Screening::AfterPuzzle,
        }
    }
}

impl HeuristicConfig {
    pub fn tgch() -> Self {
        HeuristicConfig { h1_enabled: true, h2_enabled: true, ..Self::default() }
    }

    pub fn tgch_sf(accuracy: f64) -> Self {
        HeuristicConfig { h3_accuracy: accuracy, ..Self::tgch() }
    }

    pub fn any_enabled(&self) -> bool {
        self.h1_enabled || self.h2_enabled || self.h3_enabled()
    }

    pub fn h3_enabled(&self) -> bool {
        self.h3_accuracy > 0.0
    }
}

/// `|S_cur Δ S_prev| >= |S_prev| / 11`.
pub fn h1_purge_due(state: &SystemState) -> bool {
    11 * state.symmetric_difference() as u64 >= state.s_prev() as u64
}

/// Bad IDs that may have survived the last purge, as far as the system can tell.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct H2State {
    pub carried_bad_upper: u64,
}

impl H2State {
    /// After a purge at most an `alpha` share of the survivors can be bad.
    pub fn reset(&mut self, survivors: usize, alpha: f64) {
        self.carried_bad_upper = (alpha * survivors as f64).floor() as u64;
    }
}

/// Upper bound on the current bad fraction.
pub fn h2_bad_upper_bound(state: &SystemState, est: &EstimatorState, h2: &H2State, c_je_high: f64, t: f64) -> f64 {
    let n = state.size();
    if n == 0 {
        return 0.0;
    }
    let elapsed = (t - state.iter_start).max(0.0);
    let credit = (elapsed * est.jg_active / c_je_high).floor();
    let credit = if credit.is_finite() && credit > 0.0 { credit as u64 } else { 0 };
    let possibly_bad = state.n_a.saturating_sub(credit);
    (h2.carried_bad_upper + possibly_bad) as f64 / n as f64
}

pub fn h2_at_risk(bound: f64, margin: f64) -> bool {
    bound + margin >= 1.0 / 6.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Reject,
}

/// Classifier verdict: correct with probability `accuracy`.
pub fn h3_admit<R: Rng>(is_good: bool, accuracy: f64, rng: &mut R) -> Admission {
    if accuracy <= 0.0 {
        return Admission::Admit;
    }
    let correct = rng.random_bool(accuracy.min(1.0));
    if correct == is_good {
        Admission::Admit
    } else {
        Admission::Reject
    }
}

/// Purge decision for a configuration of H1/H2.
///
/// With both enabled, a purge fires when both consider it necessary, and H2
/// alone can force one when its bound reaches the risk threshold.
pub fn purge_decision(cfg: &HeuristicConfig, state: &SystemState, h2_risk: Option<bool>) -> bool {
    let h1 = if cfg.h1_enabled { h1_purge_due(state) } else { crate::togcom::purge_due(state) };
    match (cfg.h2_enabled, h2_risk) {
        (true, Some(risk)) => {
            let forced = risk;
            (h1 && risk) || forced
        }
        _ => h1,
    }
}
