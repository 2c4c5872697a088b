use super::{ExtrinsicGaussian, PriorMessage};
use crate::error::{check_len, Result};
use crate::gauss::{gaussian_product, log_normal, sigmoid};
use crate::params::ChainParams;

/// Messages carried from round `t` into round `t + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardState {
    pub lambda_s_fwd: Vec<f64>,
    pub mu_r_fwd: Vec<f64>,
    pub v_r_fwd: Vec<f64>,
}

impl ForwardState {
    /// The prior used before any round has been observed.
    pub fn initial(n: usize, params: &ChainParams) -> Self {
        ForwardState {
            lambda_s_fwd: vec![params.lambda; n],
            mu_r_fwd: vec![0.0; n],
            v_r_fwd: vec![params.gamma; n],
        }
    }

    pub fn len(&self) -> usize {
        self.lambda_s_fwd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_s_fwd.is_empty()
    }
}

/// Probability that an element is active given only this round's extrinsic
/// evidence `N(mu_e, v_e)` and the amplitude message `N(mr, vr)`.
pub fn message_delta_to_s_scalar(mu_e: f64, v_e: f64, mr: f64, vr: f64) -> f64 {
    if vr.is_infinite() {
        return 0.0;
    }
    sigmoid(log_normal(mu_e, mr, vr + v_e) - log_normal(mu_e, 0.0, v_e))
}

pub fn message_delta_to_s(ext: &ExtrinsicGaussian, r_mean: &[f64], r_var: &[f64]) -> Result<Vec<f64>> {
    check_len(ext.mean.len(), r_mean.len())?;
    check_len(ext.mean.len(), r_var.len())?;
    Ok(ext
        .mean
        .iter()
        .zip(r_mean.iter().zip(r_var))
        .map(|(&z, (&m, &v))| message_delta_to_s_scalar(z, ext.var, m, v))
        .collect())
}

/// Gaussian approximation of the amplitude message and whether the
/// dominant-component fallback was used.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TaylorOutcome {
    pub mean: f64,
    pub var: f64,
    pub fallback: bool,
}

/// Components `(log-weight, mean, var)` of the relaxed amplitude message.
fn mixture(mu_e: f64, v_e: f64, lambda: f64, eps: f64) -> [(f64, f64, f64); 2] {
    let omega = eps * lambda / ((1.0 - lambda) + eps * lambda);
    [
        ((1.0 - omega).ln(), mu_e / eps, v_e / (eps * eps)),
        (omega.ln(), mu_e, v_e),
    ]
}

/// First and second derivatives of the log-mixture at `r`.
fn log_mixture_derivatives(r: f64, comps: &[(f64, f64, f64); 2]) -> (f64, f64) {
    let logs: Vec<f64> = comps.iter().map(|&(lw, m, v)| lw + log_normal(r, m, v)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    let (mut d1, mut curv, mut sq) = (0.0, 0.0, 0.0);
    for (wi, &(_, m, v)) in w.iter().zip(comps) {
        let wi = wi / total;
        if wi == 0.0 {
            continue;
        }
        let g = -(r - m) / v;
        d1 += wi * g;
        curv -= wi / v;
        sq += wi * g * g;
    }
    (d1, curv + sq - d1 * d1)
}

/// Second-order log-Taylor approximation at `r = mu_e` of the mixture
/// `(1 - Ω) N(r; mu_e/ε, v_e/ε²) + Ω N(r; mu_e, v_e)`.
pub fn message_delta_to_r_scalar(mu_e: f64, v_e: f64, lambda: f64, eps: f64) -> TaylorOutcome {
    let comps = mixture(mu_e, v_e, lambda, eps);
    let (d1, d2) = log_mixture_derivatives(mu_e, &comps);
    if d2 < 0.0 && d1.is_finite() && d2.is_finite() {
        return TaylorOutcome {
            mean: mu_e - d1 / d2,
            var: -1.0 / d2,
            fallback: false,
        };
    }
    let dominant = if comps[1].0 >= comps[0].0 { comps[1] } else { comps[0] };
    TaylorOutcome {
        mean: dominant.1,
        var: dominant.2,
        fallback: true,
    }
}

pub fn message_delta_to_r(ext: &ExtrinsicGaussian, s_fwd: &[f64], eps: f64) -> Result<Vec<TaylorOutcome>> {
    check_len(ext.mean.len(), s_fwd.len())?;
    Ok(ext
        .mean
        .iter()
        .zip(s_fwd)
        .map(|(&z, &l)| message_delta_to_r_scalar(z, ext.var, l, eps))
        .collect())
}

/// Activity probability propagated one step through the support chain.
pub fn forward_support_scalar(lambda_delta: f64, lambda_prev: f64, p: &ChainParams) -> f64 {
    let off = (1.0 - lambda_prev) * (1.0 - lambda_delta);
    let on = lambda_prev * lambda_delta;
    let den = off + on;
    if den <= 0.0 {
        // Contradictory certainties: keep only the chain step.
        return p.support_step(lambda_prev);
    }
    (p.p10 * off + (1.0 - p.p01) * on) / den
}

pub fn forward_support(lambda_delta: &[f64], lambda_prev: &[f64], p: &ChainParams) -> Result<Vec<f64>> {
    check_len(lambda_delta.len(), lambda_prev.len())?;
    Ok(lambda_delta
        .iter()
        .zip(lambda_prev)
        .map(|(&d, &q)| forward_support_scalar(d, q, p))
        .collect())
}

/// Amplitude message propagated through the AR(1) kernel.
pub fn forward_amplitude_scalar(m_delta: f64, v_delta: f64, m_prev: f64, v_prev: f64, p: &ChainParams) -> (f64, f64) {
    let keep = 1.0 - p.beta;
    let q = p.innovation_var();
    if keep == 0.0 {
        return (0.0, q);
    }
    let (m, v) = gaussian_product(m_delta, v_delta, m_prev, v_prev);
    (keep * m, keep * keep * v + q)
}

pub fn forward_amplitude(
    delta: &[TaylorOutcome],
    prev_mean: &[f64],
    prev_var: &[f64],
    p: &ChainParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_len(delta.len(), prev_mean.len())?;
    check_len(delta.len(), prev_var.len())?;
    Ok(delta
        .iter()
        .zip(prev_mean.iter().zip(prev_var))
        .map(|(d, (&m, &v))| forward_amplitude_scalar(d.mean, d.var, m, v, p))
        .unzip())
}

/// Prior for the round after `t` completed rounds.
pub fn next_prior(state: &ForwardState, params: &ChainParams, t: usize) -> PriorMessage {
    if t == 0 {
        return PriorMessage::uniform(state.len(), params.lambda, 0.0, params.gamma);
    }
    PriorMessage {
        pi: state.lambda_s_fwd.clone(),
        mean: state.mu_r_fwd.clone(),
        var: state.v_r_fwd.clone(),
    }
}
