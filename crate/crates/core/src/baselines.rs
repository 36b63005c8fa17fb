//! Comparison defenses: CCom, GMCom, SybilControl and REMP.
//!
//! CCom and GMCom reuse ToGCom's purge machinery and differ only in entrance
//! pricing. SybilControl replaces purges with periodic tests. REMP is a
//! closed-form cost model.

use crate::adversary::PriceSchedule;
use crate::error::{Error, Result};

pub fn ccom_entrance() -> u64 {
    1
}

/// Period of SybilControl's neighbor tests, in seconds.
pub const SYBILCONTROL_PERIOD: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmComState {
    pub jg_estimate: f64,
    pub failure_mode: bool,
    pub measured_iter_rate: f64,
    pub failure_factor: f64,
}

impl GmComState {
    pub fn new(jg_estimate: f64) -> Self {
        GmComState { jg_estimate, failure_mode: !(jg_estimate > 0.0), measured_iter_rate: 0.0, failure_factor: 10.0 }
    }

    /// Pricing view for a join at some future time in the current iteration.
    pub fn schedule(&self, n_a: u64, iter_start: f64) -> GmComPrice {
        GmComPrice {
            q: if self.failure_mode { 0.0 } else { (n_a + 1) as f64 / self.jg_estimate },
            iter_start,
        }
    }
}

/// `ceil(max(1, measured_rate / estimate))` for the given rates.
pub fn gmcom_entrance(gm: &GmComState) -> u64 {
    if gm.failure_mode || !(gm.jg_estimate > 0.0) {
        return 1;
    }
    ratio_price(gm.measured_iter_rate / gm.jg_estimate)
}

fn ratio_price(r: f64) -> u64 {
    if r.is_nan() || r <= 1.0 {
        1
    } else if r >= u64::MAX as f64 {
        u64::MAX / 4
    } else {
        r.ceil() as u64
    }
}

/// GMCom's price as a function of time: the joining ID counts toward the
/// measured rate `(n_a + 1) / (t - iter_start)`, so the price falls as the
/// iteration ages.
#[derive(Debug, Clone, Copy)]
pub struct GmComPrice {
    q: f64,
    iter_start: f64,
}

impl PriceSchedule for GmComPrice {
    fn price_at(&self, t: f64) -> u64 {
        if self.q == 0.0 {
            return 1;
        }
        let u = t - self.iter_start;
        if u <= 0.0 {
            return ratio_price(f64::INFINITY);
        }
        ratio_price(self.q / u)
    }

    fn next_drop(&self, t: f64) -> Option<f64> {
        let p = self.price_at(t);
        if p <= 1 {
            return None;
        }
        let mut td = (self.iter_start + self.q / (p - 1) as f64).max(t.next_up());
        while self.price_at(td) >= p {
            td = td.next_up();
        }
        Some(td)
    }

    fn earliest_affordable(&self, t: f64, rate: f64, spent: u64) -> f64 {
        let mut t0 = t;
        if self.q > 0.0 {
            // Continuous relaxation: rate*(s+u) - spent >= q/u gives a lower
            // bound on the first affordable instant.
            let b = rate * self.iter_start - spent as f64;
            let u = (-b + (b * b + 4.0 * rate * self.q).sqrt()) / (2.0 * rate);
            if u.is_finite() {
                t0 = t0.max(self.iter_start + u * (1.0 - 1e-12));
            }
        }
        let mut t = t0;
        loop {
            let p = self.price_at(t);
            let ta = t.max((spent + p) as f64 / rate);
            match self.next_drop(t) {
                Some(td) if td <= ta => t = td,
                _ => return ta,
            }
        }
    }
}

/// Post-join bookkeeping: failure detection on the current iteration's rate.
pub fn gmcom_after_join(gm: &mut GmComState, n_a: u64, iter_start: f64, t: f64) {
    let elapsed = t - iter_start;
    gm.measured_iter_rate = if elapsed > 0.0 { n_a as f64 / elapsed } else { f64::INFINITY };
    if gm.measured_iter_rate > gm.failure_factor * gm.jg_estimate {
        gm.failure_mode = true;
    }
}

/// At a purge: the next iteration is priced against this iteration's total join rate.
pub fn gmcom_estimator_update(gm: &mut GmComState, n_a: u64, length: f64) {
    gm.jg_estimate = if length > 0.0 { n_a as f64 / length } else { 0.0 };
    if !(gm.jg_estimate > 0.0) {
        gm.failure_mode = true;
    }
}

/// Charges for one SybilControl test round: `(algorithmic, adversarial)`.
pub fn sybilcontrol_step(good_live: usize, bad_kept: usize, test_cost: u64) -> (u64, u64) {
    (good_live as u64 * test_cost, bad_kept as u64 * test_cost)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RempParams {
    pub alpha: f64,
    pub t_max: f64,
}

impl RempParams {
    pub fn spend_rate(&self) -> Result<f64> {
        remp_spend_rate(self.alpha, self.t_max)
    }

    pub fn valid_for(&self, t: f64) -> bool {
        t <= self.t_max
    }
}

/// REMP's algorithmic spend rate, provisioned for attacks up to `t_max`.
pub fn remp_spend_rate(alpha: f64, t_max: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !(t_max > 0.0) {
        return Err(Error::Domain(format!("T_max must be positive, got {t_max}")));
    }
    Ok((1.0 - alpha) * t_max / alpha)
}
