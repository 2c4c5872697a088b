use serde::Serialize;

use crate::channel::{rescale, transmit};
use crate::edge::{accumulate_and_sparsify, choose_alpha, compress, local_update, DeviceState, Objective, PowerScaling};
use crate::em::EmFlags;
use crate::error::{Error, Result};
use crate::params::ChainParams;
use crate::rng::SeededRng;
use crate::sensing::SensingOperator;
use crate::tsaga::{IterationTrace, RecoveryFlags, TemporalRecovery, TrackerConfig, Variant};
use crate::vector::{all_finite, nmse, norm_sq};

/// Everything a round of the learning loop needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub p_bar: f64,
    pub sigma_e: f64,
    pub eta: f64,
    pub e_local: usize,
    pub seed: u64,
    pub variant: Variant,
    pub tracker: TrackerConfig,
    pub initial_params: ChainParams,
}

impl PipelineConfig {
    /// Initial chain parameters: activity `k/N`, slow support and amplitude
    /// drift; γ is re-estimated from the first observation.
    pub fn default_params(n: usize, k: usize, epsilon: f64) -> Result<ChainParams> {
        ChainParams::stationary(k as f64 / n as f64, 1.0, 0.005, 0.005, epsilon)
    }
}

/// Per-round measurements.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    pub alpha: f64,
    pub sigma2: f64,
    /// Weighted aggregate of the sparsified updates.
    pub x_sparse: Vec<f64>,
    /// Weighted aggregate of the unsparsified updates.
    pub x_full: Vec<f64>,
    pub x_hat: Vec<f64>,
    pub nmse: f64,
    pub v_post: f64,
    pub iterations: usize,
    pub flags: RecoveryFlags,
    pub em_ran: bool,
    pub em_flags: EmFlags,
    /// Parameters used for this round's prior (none for the error-free run).
    pub params: Option<ChainParams>,
    pub trace: Vec<IterationTrace>,
    /// Largest local gradient norm `‖g_m‖ / (η E)` this round.
    pub max_grad_norm: f64,
}

/// The full over-the-air learning loop for devices with objective `O`.
pub struct FeelSimulation<O> {
    cfg: PipelineConfig,
    devices: Vec<DeviceState<O>>,
    counts: Vec<usize>,
    theta: Vec<f64>,
    tracker: Option<TemporalRecovery>,
    root: SeededRng,
    round: usize,
}

impl<O: Objective> FeelSimulation<O> {
    pub fn new(cfg: PipelineConfig, objectives: Vec<O>, theta0: Vec<f64>) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::invalid("at least one device is required"));
        }
        if cfg.n != theta0.len() || objectives.iter().any(|o| o.dim() != cfg.n) {
            return Err(Error::DimensionMismatch {
                expected: cfg.n,
                actual: theta0.len(),
            });
        }
        if cfg.s == 0 || cfg.s > cfg.n || cfg.k == 0 || cfg.k > cfg.n {
            return Err(Error::invalid(format!(
                "need 0 < s <= n and 0 < k <= n, got n={} s={} k={}",
                cfg.n, cfg.s, cfg.k
            )));
        }
        let counts: Vec<usize> = objectives.iter().map(|o| o.weight()).collect();
        let tracker = if cfg.variant == Variant::ErrorFree {
            None
        } else {
            Some(TemporalRecovery::new(cfg.n, cfg.initial_params, cfg.variant, cfg.tracker)?)
        };
        Ok(FeelSimulation {
            root: SeededRng::new(cfg.seed),
            devices: objectives.into_iter().enumerate().map(|(i, o)| DeviceState::new(i, o)).collect(),
            counts,
            theta: theta0,
            tracker,
            cfg,
            round: 0,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn devices(&self) -> &[DeviceState<O>] {
        &self.devices
    }

    pub fn params(&self) -> Option<&ChainParams> {
        self.tracker.as_ref().map(|t| t.params())
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Runs one communication round and applies the recovered update.
    pub fn step(&mut self, keep_truth: bool) -> Result<RoundStats> {
        self.round += 1;
        let t = self.round;
        let cfg = &self.cfg;
        let total: f64 = self.counts.iter().sum::<usize>() as f64;

        let mut sparse = Vec::with_capacity(self.devices.len());
        let mut x_sparse = vec![0.0; cfg.n];
        let mut x_full = vec![0.0; cfg.n];
        let mut max_grad_norm: f64 = 0.0;
        for dev in self.devices.iter_mut() {
            let g = local_update(&dev.objective, &self.theta, cfg.eta, cfg.e_local)?;
            let w = dev.objective.weight() as f64 / total;
            max_grad_norm = max_grad_norm.max(norm_sq(&g).sqrt() / (cfg.eta * cfg.e_local as f64));
            let sp = accumulate_and_sparsify(&mut dev.delta, &g, cfg.k)?;
            for ((xs, xf), (a, b)) in x_sparse.iter_mut().zip(x_full.iter_mut()).zip(sp.iter().zip(&g)) {
                *xs += w * a;
                *xf += w * b;
            }
            sparse.push(sp);
        }

        let (x_hat, alpha, sigma2, res) = match self.tracker.as_mut() {
            None => (x_sparse.clone(), f64::NAN, 0.0, None),
            Some(tracker) => {
                let op = SensingOperator::for_round(cfg.n, cfg.s, cfg.seed, t as u64)?;
                let compressed: Vec<Vec<f64>> =
                    sparse.iter().map(|g| compress(g, &op)).collect::<Result<_>>()?;
                let weights = PowerScaling::from_counts(1.0, &self.counts).weights;
                let alpha = choose_alpha(&compressed, &weights, cfg.p_bar)?;
                let scaling = PowerScaling::from_counts(alpha, &self.counts);
                let signals: Vec<Vec<f64>> = compressed
                    .into_iter()
                    .enumerate()
                    .map(|(m, c)| {
                        let a = scaling.amplitude(m);
                        c.into_iter().map(|v| a * v).collect()
                    })
                    .collect();
                let mut ch = self.root.spawn_indexed("channel", t as u64);
                let y_raw = transmit(&signals, cfg.sigma_e, &mut ch)?;
                let obs = rescale(&y_raw, &scaling, cfg.sigma_e, &self.counts, t)?;
                let truth = if keep_truth { Some(x_sparse.as_slice()) } else { None };
                let out = tracker.recover(&obs, &op, truth)?;
                (out.result.x_hat.clone(), alpha, obs.sigma2, Some(out))
            }
        };

        if !all_finite(&x_hat) {
            return Err(Error::Diverged {
                round: t,
                reason: "recovered update is not finite".into(),
            });
        }
        for (th, u) in self.theta.iter_mut().zip(&x_hat) {
            *th += u;
        }
        if !all_finite(&self.theta) {
            return Err(Error::Diverged {
                round: t,
                reason: "model parameters are not finite".into(),
            });
        }

        let err = if norm_sq(&x_sparse) > 0.0 { nmse(&x_hat, &x_sparse) } else { 0.0 };
        let stats = match res {
            None => RoundStats {
                round: t,
                alpha,
                sigma2,
                nmse: err,
                v_post: 0.0,
                iterations: 0,
                flags: RecoveryFlags::default(),
                em_ran: false,
                em_flags: EmFlags::default(),
                params: None,
                trace: vec![],
                x_sparse,
                x_full,
                x_hat,
                max_grad_norm,
            },
            Some(out) => RoundStats {
                round: t,
                alpha,
                sigma2,
                nmse: err,
                v_post: out.result.v_post,
                iterations: out.result.iterations_run,
                flags: out.result.flags,
                em_ran: out.em_ran,
                em_flags: out.em_flags,
                params: Some(out.params_used),
                trace: out.result.trace,
                x_sparse,
                x_full,
                x_hat,
                max_grad_norm,
            },
        };
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::QuadraticObjective;

    fn quad(n: usize, seed: u64) -> QuadraticObjective {
        let mut rng = SeededRng::new(seed);
        QuadraticObjective {
            curvature: (0..n).map(|j| 1.0 + 3.0 * j as f64 / n as f64).collect(),
            center: (0..n).map(|_| rng.normal()).collect(),
            samples: 10 + seed as usize,
        }
    }

    fn config(n: usize, variant: Variant) -> PipelineConfig {
        PipelineConfig {
            n,
            s: n,
            k: n,
            p_bar: 10.0,
            sigma_e: 0.0,
            eta: 0.25,
            e_local: 1,
            seed: 5,
            variant,
            tracker: TrackerConfig::default(),
            initial_params: PipelineConfig::default_params(n, n / 2, 1e-7).unwrap(),
        }
    }

    #[test]
    fn lossless_round_matches_across_variants() {
        let n = 32;
        let mut finals = Vec::new();
        for v in Variant::ALL {
            let mut sim = FeelSimulation::new(config(n, v), vec![quad(n, 1)], vec![0.0; n]).unwrap();
            sim.step(true).unwrap();
            finals.push(sim.theta().to_vec());
        }
        for f in &finals[1..] {
            for (a, b) in f.iter().zip(&finals[0]) {
                assert!((a - b).abs() < 1e-9, "{a} {b}");
            }
        }
    }

    #[test]
    fn error_free_is_plain_sparsified_descent() {
        let n = 16;
        let mut cfg = config(n, Variant::ErrorFree);
        cfg.k = 4;
        let objs = vec![quad(n, 1), quad(n, 2)];
        let mut sim = FeelSimulation::new(cfg.clone(), objs.clone(), vec![0.0; n]).unwrap();
        let mut theta = vec![0.0; n];
        let mut deltas = vec![vec![0.0; n]; 2];
        let total = (objs[0].samples + objs[1].samples) as f64;
        for _ in 0..5 {
            sim.step(false).unwrap();
            let mut upd = vec![0.0; n];
            for (m, o) in objs.iter().enumerate() {
                let g = local_update(o, &theta, cfg.eta, 1).unwrap();
                let sp = accumulate_and_sparsify(&mut deltas[m], &g, cfg.k).unwrap();
                for (u, v) in upd.iter_mut().zip(&sp) {
                    *u += o.samples as f64 / total * v;
                }
            }
            for (t, u) in theta.iter_mut().zip(&upd) {
                *t += u;
            }
        }
        assert_eq!(sim.theta(), theta.as_slice());
    }

    #[test]
    fn runs_are_deterministic() {
        let n = 64;
        let mut cfg = config(n, Variant::TsaGa);
        cfg.s = 32;
        cfg.k = 8;
        cfg.sigma_e = 1.0;
        let run = || {
            let mut sim = FeelSimulation::new(cfg.clone(), vec![quad(n, 1), quad(n, 3)], vec![0.0; n]).unwrap();
            (0..4).map(|_| sim.step(true).unwrap().x_hat).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }
}
