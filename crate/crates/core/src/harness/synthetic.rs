use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ChainParams;
use crate::rng::SeededRng;
use crate::sensing::SensingOperator;
use crate::tsaga::{TemporalRecovery, TrackerConfig, Variant};
use crate::vector::nmse;
use crate::channel::MacObservation;

/// Draws `rounds` consecutive signals from the support/amplitude chain,
/// starting from its stationary marginals.
pub fn simulate_chain(params: &ChainParams, n: usize, rounds: usize, rng: &mut SeededRng) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let mut support: Vec<bool> = (0..n).map(|_| rng.uniform() < params.lambda).collect();
    let mut amp: Vec<f64> = (0..n).map(|_| params.gamma.sqrt() * rng.normal()).collect();
    let q = params.innovation_var().sqrt();
    let mut out = Vec::with_capacity(rounds);
    for t in 0..rounds {
        if t > 0 {
            for k in 0..n {
                let on = if support[k] { 1.0 - params.p01 } else { params.p10 };
                support[k] = rng.uniform() < on;
                amp[k] = (1.0 - params.beta) * amp[k] + q * rng.normal();
            }
        }
        out.push(support.iter().zip(&amp).map(|(&s, &r)| if s { r } else { 0.0 }).collect());
    }
    Ok(out)
}

/// One round of [`track_synthetic`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrackingRound {
    pub round: usize,
    pub nmse: f64,
    pub params: ChainParams,
    pub em_ran: bool,
}

/// Recovers a chain drawn from `truth` through `y = A x + n` observations,
/// starting the tracker from `init`. The error-free variant is rejected.
#[allow(clippy::too_many_arguments)]
pub fn track_synthetic(
    truth: &ChainParams,
    init: &ChainParams,
    n: usize,
    s: usize,
    sigma2: f64,
    rounds: usize,
    variant: Variant,
    cfg: TrackerConfig,
    seed: u64,
) -> Result<Vec<TrackingRound>> {
    if !(sigma2 >= 0.0) {
        return Err(Error::invalid("noise variance must be nonnegative"));
    }
    let root = SeededRng::new(seed);
    let xs = simulate_chain(truth, n, rounds, &mut root.spawn("chain"))?;
    let mut tracker = TemporalRecovery::new(n, *init, variant, cfg)?;
    let mut out = Vec::with_capacity(rounds);
    for (t, x) in xs.iter().enumerate() {
        let op = SensingOperator::for_round(n, s, seed, t as u64 + 1)?;
        let mut noise = root.spawn_indexed("noise", t as u64);
        let y = op.forward(x)?.into_iter().map(|v| v + sigma2.sqrt() * noise.normal()).collect();
        let obs = MacObservation { y, sigma2, round: t + 1 };
        let o = tracker.recover(&obs, &op, Some(x))?;
        out.push(TrackingRound {
            round: t + 1,
            nmse: nmse(&o.result.x_hat, x),
            params: *tracker.params(),
            em_ran: o.em_ran,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_marginals_are_stationary() {
        let p = ChainParams::stationary(0.2, 2.0, 0.05, 0.1, 1e-7).unwrap();
        let xs = simulate_chain(&p, 20_000, 6, &mut SeededRng::new(5)).unwrap();
        for x in &xs {
            let active = x.iter().filter(|v| **v != 0.0).count() as f64 / x.len() as f64;
            let e2 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
            assert!((active - 0.2).abs() < 0.015, "{active}");
            assert!((e2 - 0.4).abs() < 0.04, "{e2}");
        }
    }

    #[test]
    fn frozen_chain_repeats() {
        let p = ChainParams {
            p01: 0.0,
            p10: 0.0,
            beta: 0.0,
            ..ChainParams::stationary(0.3, 1.0, 0.01, 0.1, 1e-7).unwrap()
        };
        let xs = simulate_chain(&p, 50, 4, &mut SeededRng::new(1)).unwrap();
        assert!(xs.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn temporal_tracking_beats_memoryless() {
        let p = ChainParams::stationary(0.1, 1.0, 0.02, 0.05, 1e-7).unwrap();
        let cfg = TrackerConfig {
            em_enabled: false,
            ..TrackerConfig::default()
        };
        let run = |v| track_synthetic(&p, &p, 1000, 300, 1e-3, 8, v, cfg, 9).unwrap();
        let tsa: f64 = run(Variant::TsaGa)[4..].iter().map(|r| r.nmse).sum();
        let mem: f64 = run(Variant::Memoryless)[4..].iter().map(|r| r.nmse).sum();
        assert!(tsa < mem, "{tsa} vs {mem}");
    }
}
