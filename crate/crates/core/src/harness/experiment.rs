use std::time::Instant;

use serde::Serialize;

use super::config::{DatasetKind, ExperimentConfig, PartitionKind};
use super::pipeline::{FeelSimulation, PipelineConfig};
use crate::channel::MacObservation;
use crate::edge::{load_idx_dataset, partition, synthetic_classification, DatasetShard, ModelState, Objective, ShardManifest};
use crate::error::{Error, Result};
use crate::params::ChainParams;
use crate::rng::SeededRng;
use crate::sensing::SensingOperator;
use crate::tsaga::{run_round, PriorMessage, RecoveryResult, TrackerConfig, TurboConfig, Variant, VarInit};
use crate::vector::DenseVector;

pub use crate::edge::evaluate;

/// One row of `rounds.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundLog {
    pub round: usize,
    pub accuracy: Option<f64>,
    pub train_loss: Option<f64>,
    pub nmse: f64,
    pub v_final: f64,
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub sigma2: f64,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub p01: Option<f64>,
    pub p10: Option<f64>,
    pub beta: Option<f64>,
    pub xi: Option<f64>,
    pub diverged: bool,
    pub linear_clamps: usize,
    pub denoiser_clamps: usize,
    pub taylor_fallbacks: usize,
    /// Kept out of `rounds.csv` so that file stays reproducible.
    #[serde(skip)]
    pub wall_ms: f64,
}

/// One row of `params.csv`: parameters in force after the round.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParamRow {
    pub round: usize,
    pub lambda: f64,
    pub p01: f64,
    pub p10: f64,
    pub beta: f64,
    pub gamma: f64,
    pub xi: f64,
    pub em_ran: bool,
    pub p01_kept: bool,
    pub beta_clamped: bool,
    pub lambda_clamped: bool,
    pub gamma_floored: bool,
    pub flat_backward: bool,
}

/// One row of the optional per-iteration trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub round: usize,
    pub iteration: usize,
    pub v: f64,
    pub tau: f64,
    pub v_post: f64,
    pub nmse: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub n: usize,
    pub s: usize,
    pub k: usize,
    pub logs: Vec<RoundLog>,
    pub params: Vec<ParamRow>,
    pub trace: Vec<TraceRow>,
    pub manifests: Vec<ShardManifest>,
    /// Set when the run stopped early on a non-finite model.
    pub aborted: Option<String>,
}

impl ExperimentOutput {
    pub fn has_divergence(&self) -> bool {
        self.aborted.is_some() || self.logs.iter().any(|l| l.diverged)
    }

    pub fn final_accuracy(&self) -> Option<f64> {
        self.logs.iter().rev().find_map(|l| l.accuracy)
    }
}

/// Recovers one round under `variant` from the forward prior `prior`.
pub fn recovery_variant(
    variant: Variant,
    obs: &MacObservation,
    op: &SensingOperator,
    prior: PriorMessage,
    params: &ChainParams,
    cfg: &TurboConfig,
    truth: Option<&[f64]>,
) -> Result<RecoveryResult> {
    if variant == Variant::ErrorFree {
        return Err(Error::invalid("the error-free benchmark bypasses recovery"));
    }
    let prior = variant.adjust_prior(prior, params);
    run_round(obs, op, &prior, params.gamma, cfg, truth)
}

fn load_data(cfg: &ExperimentConfig, rng: &SeededRng) -> Result<(DatasetShard, DatasetShard)> {
    match cfg.dataset {
        DatasetKind::Idx => {
            let [ti, tl, vi, vl] = cfg.idx_paths()?;
            Ok((load_idx_dataset(&ti, &tl)?, load_idx_dataset(&vi, &vl)?))
        }
        DatasetKind::Synthetic => {
            let surplus = if cfg.partition == PartitionKind::Chi { 2 } else { 1 };
            synthetic_classification(
                cfg.devices * cfg.samples_per_device * surplus,
                cfg.synthetic_test,
                cfg.synthetic_features,
                cfg.synthetic_classes,
                cfg.synthetic_separation,
                &mut rng.spawn("dataset"),
            )
        }
    }
}

/// Runs the configured experiment end to end.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let root = SeededRng::new(cfg.seed);
    let (train, test) = load_data(cfg, &root)?;
    let chi = (cfg.partition == PartitionKind::Chi).then_some(cfg.chi);
    let (shards, manifests) =
        partition(&train, cfg.devices, cfg.samples_per_device, chi, &mut root.spawn("partition"))?;
    let n = train.model_dim();
    let (s, k) = cfg.channel_dims(n);

    let pcfg = PipelineConfig {
        n,
        s,
        k,
        p_bar: cfg.p_bar,
        sigma_e: cfg.sigma_e,
        eta: cfg.eta,
        e_local: cfg.local_steps,
        seed: cfg.seed,
        variant: cfg.variant,
        tracker: TrackerConfig {
            turbo: TurboConfig {
                i_max: cfg.i_max,
                tol: cfg.tol,
                damping: cfg.damping,
                clamp_lo: 1e-12,
                clamp_hi: 1e6,
                var_init: VarInit::PriorMoments,
            },
            em_enabled: cfg.em,
            t0: cfg.t0_window,
            warmup: cfg.em_warmup,
            gamma_from_obs: true,
        },
        initial_params: PipelineConfig::default_params(n, k, cfg.epsilon)?,
    };
    let total: f64 = shards.iter().map(|d| d.k_m()).sum::<usize>() as f64;
    let mut sim = FeelSimulation::new(pcfg, shards, vec![0.0; n])?;

    let mut out = ExperimentOutput {
        config: cfg.clone(),
        n,
        s,
        k,
        logs: Vec::with_capacity(cfg.rounds),
        params: Vec::new(),
        trace: Vec::new(),
        manifests,
        aborted: None,
    };
    for t in 1..=cfg.rounds {
        let start = Instant::now();
        let st = match sim.step(true) {
            Ok(st) => st,
            Err(e @ Error::Diverged { .. }) => {
                out.aborted = Some(e.to_string());
                break;
            }
            Err(e) => return Err(e),
        };
        let (accuracy, train_loss) = if t % cfg.metric_every == 0 || t == cfg.rounds {
            let model = ModelState {
                theta: DenseVector::new(sim.theta().to_vec())?,
                round: t,
            };
            let (acc, _) = evaluate(&model, &test)?;
            let loss: f64 = sim
                .devices()
                .iter()
                .map(|d| d.objective.k_m() as f64 / total * d.objective.loss(sim.theta()))
                .sum();
            (Some(acc), Some(loss))
        } else {
            (None, None)
        };
        let p = st.params;
        out.logs.push(RoundLog {
            round: t,
            accuracy,
            train_loss,
            nmse: st.nmse,
            v_final: st.v_post,
            iterations: st.iterations,
            alpha: st.alpha.is_finite().then_some(st.alpha),
            sigma2: st.sigma2,
            lambda: p.map(|p| p.lambda),
            gamma: p.map(|p| p.gamma),
            p01: p.map(|p| p.p01),
            p10: p.map(|p| p.p10),
            beta: p.map(|p| p.beta),
            xi: p.map(|p| p.xi),
            diverged: st.flags.diverged,
            linear_clamps: st.flags.linear_clamps,
            denoiser_clamps: st.flags.denoiser_clamps,
            taylor_fallbacks: st.flags.taylor_fallbacks,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(p) = sim.params() {
            let f = st.em_flags;
            out.params.push(ParamRow {
                round: t,
                lambda: p.lambda,
                p01: p.p01,
                p10: p.p10,
                beta: p.beta,
                gamma: p.gamma,
                xi: p.xi,
                em_ran: st.em_ran,
                p01_kept: f.p01_kept,
                beta_clamped: f.beta_clamped,
                lambda_clamped: f.lambda_clamped,
                gamma_floored: f.gamma_floored,
                flat_backward: f.flat_backward,
            });
        }
        if cfg.trace {
            out.trace.extend(st.trace.iter().map(|r| TraceRow {
                round: t,
                iteration: r.iteration,
                v: r.v,
                tau: r.tau,
                v_post: r.v_post,
                nmse: r.nmse,
            }));
        }
    }
    Ok(out)
}
