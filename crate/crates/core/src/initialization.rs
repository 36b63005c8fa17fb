//! Time-zero state: an initial population, committee and join-rate estimate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::togcom::{CostLedger, EstimatorState, SystemState, TogcomParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub n0: usize,
    /// Share of bad IDs added on top of the good population, at most `alpha`.
    pub initial_bad_fraction: f64,
    pub jg0: f64,
}

impl BootstrapConfig {
    pub fn new(n0: usize, jg0: f64) -> Self {
        BootstrapConfig { n0, initial_bad_fraction: 0.0, jg0 }
    }

    pub fn bad_count(&self) -> usize {
        (self.initial_bad_fraction * self.n0 as f64).floor() as usize
    }
}

/// Default initial estimate: the whole population joined over `warmup` seconds.
pub fn default_jg0(n0: usize, warmup: f64) -> f64 {
    n0 as f64 / warmup
}

pub struct Bootstrapped {
    pub state: SystemState,
    pub estimator: EstimatorState,
    pub ledger: CostLedger,
    /// Good IDs in insertion order.
    pub good_ids: Vec<u32>,
}

pub fn bootstrap<R: Rng>(cfg: &BootstrapConfig, alpha: f64, params: TogcomParams, rng: &mut R) -> Result<Bootstrapped> {
    if cfg.n0 == 0 {
        return Err(Error::Config("n0 must be at least 1".into()));
    }
    if !(cfg.jg0 > 0.0 && cfg.jg0.is_finite()) {
        return Err(Error::Config(format!("jg0 must be positive, got {}", cfg.jg0)));
    }
    if !(0.0..=alpha).contains(&cfg.initial_bad_fraction) {
        return Err(Error::Config(format!(
            "initial bad fraction {} must lie in [0, alpha = {alpha}]",
            cfg.initial_bad_fraction
        )));
    }
    let mut state = SystemState::new(params);
    let good_ids = (0..cfg.n0)
        .map(|_| match state.insert_initial(true) {
            crate::togcom::Member::Good(g) => g,
            crate::togcom::Member::Bad(_) => unreachable!(),
        })
        .collect();
    for _ in 0..cfg.bad_count() {
        state.insert_initial(false);
    }
    state.prev = state.snapshot();
    state.rotate_committee(rng);
    let estimator = EstimatorState::new(cfg.jg0, state.snapshot());
    let ledger = CostLedger::new(0.0, state.size(), cfg.jg0);
    Ok(Bootstrapped { state, estimator, ledger, good_ids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_good_population() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = bootstrap(&BootstrapConfig::new(1000, 10.0), 1.0 / 18.0, TogcomParams::new(1000), &mut rng).unwrap();
        assert_eq!(b.state.size(), 1000);
        assert_eq!(b.state.bad_fraction(), 0.0);
        assert_eq!(b.state.committee.len(), 21);
        assert_eq!(b.state.iteration, 1);
        assert_eq!(b.estimator.jg_hat, 10.0);
        assert_eq!(b.estimator.last_change, 0.0);
        assert_eq!(b.state.new_since(&b.estimator.s_est), 0);
    }

    #[test]
    fn adversarial_bootstrap() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let alpha = 1.0 / 18.0;
        let cfg = BootstrapConfig { initial_bad_fraction: alpha, ..BootstrapConfig::new(1000, 10.0) };
        let b = bootstrap(&cfg, alpha, TogcomParams::new(1000), &mut rng).unwrap();
        assert_eq!(b.state.bad_count(), 55);
        assert!(b.state.bad_fraction() <= alpha);
    }

    #[test]
    fn invalid_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = TogcomParams::new(10);
        assert!(bootstrap(&BootstrapConfig::new(0, 1.0), 0.05, p, &mut rng).is_err());
        assert!(bootstrap(&BootstrapConfig::new(10, 0.0), 0.05, p, &mut rng).is_err());
        let over = BootstrapConfig { initial_bad_fraction: 0.1, ..BootstrapConfig::new(10, 1.0) };
        assert!(bootstrap(&over, 0.05, p, &mut rng).is_err());
        assert_eq!(default_jg0(1000, 100.0), 10.0);
    }
}
