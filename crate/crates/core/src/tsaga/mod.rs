//! Turbo message-passing recovery of the sparse aggregate.
//!
//! Each round alternates a linear estimator exploiting `A Aᵀ = I` with an
//! elementwise Bernoulli-Gaussian denoiser. Between rounds, support and
//! amplitude beliefs are carried forward through the Markov prior.

mod denoise;
mod linear;
mod messages;
mod tracker;
mod turbo;

pub use denoise::{denoise_bg, denoiser_pass, DenoiserOutput};
pub use linear::{linear_estimate, LinearOutput};
pub use messages::{
    forward_amplitude, forward_amplitude_scalar, forward_support, forward_support_scalar,
    message_delta_to_r, message_delta_to_r_scalar, message_delta_to_s, message_delta_to_s_scalar,
    next_prior, ForwardState, TaylorOutcome,
};
pub use tracker::{RoundOutcome, TemporalRecovery, TrackerConfig, Variant};
pub use turbo::{run_round, IterationTrace, RecoveryFlags, RecoveryResult, TurboConfig, VarInit};

/// Gaussian message with elementwise means and a shared scalar variance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtrinsicGaussian {
    pub mean: Vec<f64>,
    pub var: f64,
}

/// Elementwise Bernoulli-Gaussian prior `pi N(x; mean, var) + (1 - pi) δ(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorMessage {
    pub pi: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl PriorMessage {
    /// The same prior for every element.
    pub fn uniform(n: usize, pi: f64, mean: f64, var: f64) -> Self {
        PriorMessage {
            pi: vec![pi; n],
            mean: vec![mean; n],
            var: vec![var; n],
        }
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn validate(&self) -> crate::Result<()> {
        crate::error::check_len(self.pi.len(), self.mean.len())?;
        crate::error::check_len(self.pi.len(), self.var.len())?;
        if self.pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(crate::Error::invalid("prior activity outside [0, 1]"));
        }
        if self.var.iter().any(|v| !(*v > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(crate::Error::invalid("prior variances must be positive and means finite"));
        }
        Ok(())
    }

    /// Prior variance of `x` itself, averaged over elements.
    pub fn mean_second_moment(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .pi
            .iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((p, m), v)| p * (v + m * m) - (p * m).powi(2))
            .sum();
        total / self.len() as f64
    }
}
