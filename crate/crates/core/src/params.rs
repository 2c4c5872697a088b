use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the per-element support/amplitude Markov prior.
///
/// Support evolves as a two-state chain with death rate `p01` and birth rate
/// `p10`; amplitudes follow `r' = (1 - beta) r + beta w`, `w ~ N(0, xi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub lambda: f64,
    pub gamma: f64,
    pub p01: f64,
    pub p10: f64,
    pub beta: f64,
    pub xi: f64,
    pub epsilon: f64,
}

impl ChainParams {
    /// Builds a parameter set whose `p10` and `xi` keep the chain stationary
    /// with marginal activity `lambda` and amplitude variance `gamma`.
    pub fn stationary(lambda: f64, gamma: f64, p01: f64, beta: f64, epsilon: f64) -> Result<Self> {
        let p = ChainParams {
            lambda,
            gamma,
            p01,
            p10: stationary_p10(lambda, p01),
            beta,
            xi: stationary_xi(beta, gamma),
            epsilon,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("p01", self.p01),
            ("p10", self.p10),
            ("beta", self.beta),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.xi > 0.0) {
            return Err(Error::invalid(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0, 1e-3], got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// `P{s' = 1}` after one transition from marginal `prev`.
    pub fn support_step(&self, prev: f64) -> f64 {
        self.p10 * (1.0 - prev) + (1.0 - self.p01) * prev
    }

    /// Variance of the amplitude innovation, `beta^2 xi`.
    pub fn innovation_var(&self) -> f64 {
        if self.beta == 0.0 {
            0.0
        } else {
            self.beta * self.beta * self.xi
        }
    }
}

/// Birth rate that keeps the support marginal fixed at `lambda`.
pub fn stationary_p10(lambda: f64, p01: f64) -> f64 {
    if lambda >= 1.0 {
        1.0
    } else {
        (lambda * p01 / (1.0 - lambda)).min(1.0)
    }
}

/// Innovation variance that keeps the amplitude variance fixed at `gamma`.
/// Infinite when `beta == 0` (the amplitude never changes).
pub fn stationary_xi(beta: f64, gamma: f64) -> f64 {
    (2.0 - beta) * gamma / beta
}

/// Per-round system configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub n_model: usize,
    pub s_channel: usize,
    pub k_sparsity: usize,
    pub p_bar: f64,
    pub sigma_e: f64,
    pub eta: f64,
    pub e_local: usize,
    pub i_max: usize,
    pub t_rounds: usize,
    pub t0_window: usize,
    pub seed: u64,
}

impl RoundConfig {
    /// Checks the dimensional constraints. `allow_k_above_s` admits the
    /// regime where more entries survive sparsification than there are
    /// sub-channels, which only temporal recovery can handle.
    pub fn validate(&self, allow_k_above_s: bool) -> Result<()> {
        let (n, s, k) = (self.n_model, self.s_channel, self.k_sparsity);
        if n == 0 || s == 0 || k == 0 || s > n || k > n {
            return Err(Error::invalid(format!(
                "need 0 < k <= n and 0 < s <= n, got n={n} s={s} k={k}"
            )));
        }
        if k > s && !allow_k_above_s {
            return Err(Error::invalid(format!("k={k} exceeds s={s}")));
        }
        if !(self.p_bar > 0.0) || !(self.eta > 0.0) || !(self.sigma_e >= 0.0) {
            return Err(Error::invalid("p_bar and eta must be positive, sigma_e nonnegative"));
        }
        if self.e_local == 0 || self.i_max == 0 {
            return Err(Error::invalid("e_local and i_max must be at least 1"));
        }
        Ok(())
    }
}
