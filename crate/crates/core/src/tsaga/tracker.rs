use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::messages::{
    forward_amplitude, forward_support, message_delta_to_r, message_delta_to_s, next_prior, ForwardState,
};
use super::turbo::{run_round, RecoveryResult, TurboConfig};
use super::PriorMessage;
use crate::channel::MacObservation;
use crate::em::{em_step, schedule, EmFlags, RoundRecord, WindowArchive};
use crate::error::{Error, Result};
use crate::params::{stationary_xi, ChainParams};
use crate::sensing::SensingOperator;
use crate::vector::norm_sq;

/// Which temporal structure the server exploits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    TsaGa,
    NoSupport,
    NoAmplitude,
    Memoryless,
    ErrorFree,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::TsaGa,
        Variant::NoSupport,
        Variant::NoAmplitude,
        Variant::Memoryless,
        Variant::ErrorFree,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::TsaGa => "tsa-ga",
            Variant::NoSupport => "no-support",
            Variant::NoAmplitude => "no-amplitude",
            Variant::Memoryless => "memoryless",
            Variant::ErrorFree => "error-free",
        }
    }

    /// Whether this variant carries any belief across rounds.
    pub fn is_temporal(&self) -> bool {
        matches!(self, Variant::TsaGa | Variant::NoSupport | Variant::NoAmplitude)
    }

    /// Replaces the parts of the forward prior the variant ignores.
    pub fn adjust_prior(&self, mut prior: PriorMessage, params: &ChainParams) -> PriorMessage {
        let (reset_s, reset_r) = match self {
            Variant::NoSupport => (true, false),
            Variant::NoAmplitude => (false, true),
            Variant::Memoryless => (true, true),
            Variant::TsaGa | Variant::ErrorFree => (false, false),
        };
        if reset_s {
            prior.pi.fill(params.lambda);
        }
        if reset_r {
            prior.mean.fill(0.0);
            prior.var.fill(params.gamma);
        }
        prior
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrackerConfig {
    pub turbo: TurboConfig,
    pub em_enabled: bool,
    pub t0: usize,
    pub warmup: usize,
    /// Re-estimate γ from the first observation.
    pub gamma_from_obs: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            turbo: TurboConfig::default(),
            em_enabled: true,
            t0: 5,
            warmup: 10,
            gamma_from_obs: true,
        }
    }
}

/// What happened in one call to [`TemporalRecovery::recover`].
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub result: RecoveryResult,
    /// Parameters used for this round's prior.
    pub params_used: ChainParams,
    pub em_ran: bool,
    pub em_flags: EmFlags,
}

/// Server-side recovery across rounds: prior construction, turbo recovery,
/// forward messages, and the windowed parameter update.
#[derive(Clone, Debug)]
pub struct TemporalRecovery {
    n: usize,
    params: ChainParams,
    variant: Variant,
    cfg: TrackerConfig,
    forward: ForwardState,
    archive: WindowArchive,
    rounds_done: usize,
}

impl TemporalRecovery {
    pub fn new(n: usize, params: ChainParams, variant: Variant, cfg: TrackerConfig) -> Result<Self> {
        params.validate()?;
        if variant == Variant::ErrorFree {
            return Err(Error::invalid("the error-free benchmark bypasses recovery"));
        }
        if cfg.t0 < 2 && cfg.em_enabled {
            return Err(Error::invalid("EM window must span at least two rounds"));
        }
        Ok(TemporalRecovery {
            n,
            params,
            variant,
            cfg,
            forward: ForwardState::initial(n, &params),
            archive: WindowArchive::new(cfg.t0.max(2)),
            rounds_done: 0,
        })
    }

    pub fn params(&self) -> &ChainParams {
        &self.params
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn rounds_done(&self) -> usize {
        self.rounds_done
    }

    pub fn forward_state(&self) -> &ForwardState {
        &self.forward
    }

    /// Prior for the upcoming round.
    pub fn prior(&self) -> PriorMessage {
        let base = next_prior(&self.forward, &self.params, self.rounds_done);
        self.variant.adjust_prior(base, &self.params)
    }

    fn estimate_gamma(&mut self, obs: &MacObservation) -> Result<()> {
        let s = obs.y.len() as f64;
        let energy = norm_sq(&obs.y) - s * obs.sigma2;
        let gamma = energy / (s * self.params.lambda);
        if gamma.is_finite() && gamma > 0.0 {
            self.params.gamma = gamma;
            self.params.xi = stationary_xi(self.params.beta, gamma);
            self.params.validate()?;
        }
        Ok(())
    }

    pub fn recover(
        &mut self,
        obs: &MacObservation,
        op: &SensingOperator,
        truth: Option<&[f64]>,
    ) -> Result<RoundOutcome> {
        if op.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: op.n(),
            });
        }
        if self.rounds_done == 0 && self.cfg.gamma_from_obs {
            self.estimate_gamma(obs)?;
            self.forward = ForwardState::initial(self.n, &self.params);
        }
        let params_used = self.params;
        let prior = self.prior();
        let mut result = run_round(obs, op, &prior, self.params.gamma, &self.cfg.turbo, truth)?;

        let ext = &result.ext_linear;
        let lambda_delta = message_delta_to_s(ext, &prior.mean, &prior.var)?;
        let taylor = message_delta_to_r(ext, &prior.pi, self.params.epsilon)?;
        result.flags.taylor_fallbacks = taylor.iter().filter(|t| t.fallback).count();
        let lambda_fwd = forward_support(&lambda_delta, &prior.pi, &self.params)?;
        let (mu_fwd, v_fwd) = forward_amplitude(&taylor, &prior.mean, &prior.var, &self.params)?;

        self.archive.push(RoundRecord {
            lambda_delta,
            mu_bar: taylor.iter().map(|t| t.mean).collect(),
            v_bar: taylor.iter().map(|t| t.var).collect(),
            pi_in: prior.pi,
            m_in: prior.mean,
            phi_in: prior.var,
        })?;
        self.forward = ForwardState {
            lambda_s_fwd: lambda_fwd,
            mu_r_fwd: mu_fwd,
            v_r_fwd: v_fwd,
        };
        self.rounds_done += 1;

        let mut em_ran = false;
        let mut em_flags = EmFlags::default();
        if self.cfg.em_enabled && schedule(self.rounds_done, self.cfg.t0, self.cfg.warmup) && self.archive.is_full() {
            let (next, flags) = em_step(&self.archive, &self.params)?;
            self.params = next;
            em_ran = true;
            em_flags = flags;
        }
        Ok(RoundOutcome {
            result,
            params_used,
            em_ran,
            em_flags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), v);
        }
        assert!("amp".parse::<Variant>().is_err());
    }

    #[test]
    fn adjust_prior_resets_requested_parts() {
        let p = ChainParams::stationary(0.2, 2.0, 0.01, 0.05, 1e-7).unwrap();
        let base = PriorMessage {
            pi: vec![0.9, 0.1],
            mean: vec![1.0, -1.0],
            var: vec![0.3, 0.4],
        };
        let ns = Variant::NoSupport.adjust_prior(base.clone(), &p);
        assert_eq!(ns.pi, vec![0.2, 0.2]);
        assert_eq!(ns.mean, base.mean);
        let na = Variant::NoAmplitude.adjust_prior(base.clone(), &p);
        assert_eq!(na.pi, base.pi);
        assert_eq!(na.var, vec![2.0, 2.0]);
        let ml = Variant::Memoryless.adjust_prior(base.clone(), &p);
        assert_eq!(ml, PriorMessage::uniform(2, 0.2, 0.0, 2.0));
        assert_eq!(Variant::TsaGa.adjust_prior(base.clone(), &p), base);
    }

    #[test]
    fn first_round_matches_memoryless() {
        let n = 512;
        let mut rng = SeededRng::new(2);
        let op = SensingOperator::build(n, 256, &mut rng).unwrap();
        let x: Vec<f64> = (0..n).map(|_| if rng.uniform() < 0.1 { rng.normal() } else { 0.0 }).collect();
        let mut y = op.forward(&x).unwrap();
        y.iter_mut().for_each(|v| *v += 0.01 * rng.normal());
        let obs = MacObservation { y, sigma2: 1e-4, round: 1 };
        let p = ChainParams::stationary(0.1, 1.0, 0.01, 0.05, 1e-7).unwrap();
        let mut a = TemporalRecovery::new(n, p, Variant::TsaGa, TrackerConfig::default()).unwrap();
        let mut b = TemporalRecovery::new(n, p, Variant::Memoryless, TrackerConfig::default()).unwrap();
        let ra = a.recover(&obs, &op, None).unwrap();
        let rb = b.recover(&obs, &op, None).unwrap();
        assert_eq!(ra.result.x_hat, rb.result.x_hat);
        assert_eq!(a.rounds_done(), 1);
    }

    #[test]
    fn error_free_is_not_a_recovery_variant() {
        let p = ChainParams::stationary(0.1, 1.0, 0.01, 0.05, 1e-7).unwrap();
        assert!(TemporalRecovery::new(8, p, Variant::ErrorFree, TrackerConfig::default()).is_err());
    }
}
