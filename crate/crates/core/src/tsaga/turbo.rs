use serde::Serialize;

use super::denoise::denoiser_pass;
use super::linear::linear_estimate;
use super::{ExtrinsicGaussian, PriorMessage};
use crate::channel::MacObservation;
use crate::error::{check_len, Error, Result};
use crate::sensing::SensingOperator;
use crate::vector::nmse;

/// How the first linear step is seeded.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Default)]
pub enum VarInit {
    /// Mean `π m` and variance `Var[x]` implied by the prior.
    #[default]
    PriorMoments,
    /// Zero mean and the average slab variance of the prior.
    Slab,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TurboConfig {
    pub i_max: usize,
    pub tol: f64,
    /// Weight on the new extrinsic message; 1 disables damping.
    pub damping: f64,
    /// Extrinsic variances are kept in `[clamp_lo, clamp_hi]` times the
    /// reference variance passed to [`run_round`].
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    pub var_init: VarInit,
}

impl Default for TurboConfig {
    fn default() -> Self {
        TurboConfig {
            i_max: 25,
            tol: 1e-4,
            damping: 1.0,
            clamp_lo: 1e-12,
            clamp_hi: 1e6,
            var_init: VarInit::PriorMoments,
        }
    }
}

/// One row of the per-iteration trace. Empirical fields need the truth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub tau: f64,
    pub v: f64,
    pub v_post: f64,
    pub emp_tau: Option<f64>,
    pub emp_v: Option<f64>,
    pub nmse: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RecoveryFlags {
    pub linear_clamps: usize,
    pub denoiser_clamps: usize,
    pub taylor_fallbacks: usize,
    pub diverged: bool,
}

impl RecoveryFlags {
    pub fn any(&self) -> bool {
        self.linear_clamps + self.denoiser_clamps + self.taylor_fallbacks > 0 || self.diverged
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub v_post: f64,
    pub iterations_run: usize,
    pub trace: Vec<IterationTrace>,
    pub flags: RecoveryFlags,
    /// Linear-step extrinsic message of the returned iterate, used by the
    /// inter-round messages.
    pub ext_linear: ExtrinsicGaussian,
}

fn mean_sq_err(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len().max(1) as f64
}

/// Turbo iterations for one round.
///
/// `var_ref` scales the extrinsic variance clamps (the amplitude variance γ
/// in the round loop).
pub fn run_round(
    obs: &MacObservation,
    op: &SensingOperator,
    prior: &PriorMessage,
    var_ref: f64,
    cfg: &TurboConfig,
    truth: Option<&[f64]>,
) -> Result<RecoveryResult> {
    prior.validate()?;
    check_len(op.n(), prior.len())?;
    if let Some(x) = truth {
        check_len(op.n(), x.len())?;
    }
    if cfg.i_max == 0 || !(cfg.damping > 0.0 && cfg.damping <= 1.0) || !(var_ref > 0.0) {
        return Err(Error::invalid("turbo needs i_max >= 1, damping in (0, 1], positive reference variance"));
    }
    let bounds = (cfg.clamp_lo * var_ref, cfg.clamp_hi * var_ref);

    let n = prior.len();
    let mut ext_dn = match cfg.var_init {
        VarInit::PriorMoments => ExtrinsicGaussian {
            mean: prior.pi.iter().zip(&prior.mean).map(|(p, m)| p * m).collect(),
            var: prior.mean_second_moment(),
        },
        VarInit::Slab => ExtrinsicGaussian {
            mean: vec![0.0; n],
            var: prior.var.iter().sum::<f64>() / n.max(1) as f64,
        },
    };
    ext_dn.var = ext_dn.var.clamp(bounds.0, bounds.1);

    let mut flags = RecoveryFlags::default();
    let mut trace = Vec::with_capacity(cfg.i_max);
    let mut best: Option<(Vec<f64>, f64, ExtrinsicGaussian, usize)> = None;
    let mut last: Option<(Vec<f64>, f64, ExtrinsicGaussian)> = None;
    let mut prev_v: Option<f64> = None;
    let mut rises = 0;

    for it in 1..=cfg.i_max {
        let lin = linear_estimate(obs, op, &ext_dn, bounds)?;
        flags.linear_clamps += lin.clamped as usize;
        let den = denoiser_pass(&lin.ext, prior, bounds)?;
        flags.denoiser_clamps += den.clamped as usize;

        trace.push(IterationTrace {
            iteration: it,
            tau: lin.ext.var,
            v: den.ext.var,
            v_post: den.post_var,
            emp_tau: truth.map(|x| mean_sq_err(&lin.ext.mean, x)),
            emp_v: truth.map(|x| mean_sq_err(&den.ext.mean, x)),
            nmse: truth.map(|x| nmse(&den.post_mean, x)),
        });

        let v = den.post_var;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((den.post_mean.clone(), v, lin.ext.clone(), it));
        }

        if cfg.damping < 1.0 && it > 1 {
            let d = cfg.damping;
            for (o, nw) in ext_dn.mean.iter_mut().zip(&den.ext.mean) {
                *o = d * nw + (1.0 - d) * *o;
            }
            ext_dn.var = d * den.ext.var + (1.0 - d) * ext_dn.var;
        } else {
            ext_dn = den.ext;
        }
        last = Some((den.post_mean, v, lin.ext));

        if let Some(p) = prev_v {
            rises = if v > p { rises + 1 } else { 0 };
            if rises >= 3 {
                flags.diverged = true;
                break;
            }
            if v == 0.0 || (v - p).abs() < cfg.tol * p {
                break;
            }
        } else if v == 0.0 {
            break;
        }
        prev_v = Some(v);
    }

    let iterations_run = trace.len();
    let (x_hat, v_post, ext_linear) = if flags.diverged {
        let (x, v, e, _) = best.expect("at least one iteration");
        (x, v, e)
    } else {
        last.expect("at least one iteration")
    };
    Ok(RecoveryResult {
        x_hat,
        v_post,
        iterations_run,
        trace,
        flags,
        ext_linear,
    })
}
