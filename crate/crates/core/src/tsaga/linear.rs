use super::ExtrinsicGaussian;
use crate::channel::MacObservation;
use crate::error::{check_len, Error, Result};
use crate::sensing::SensingOperator;

/// Posterior and extrinsic outputs of the linear step.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearOutput {
    pub post_mean: Vec<f64>,
    pub post_var: f64,
    pub ext: ExtrinsicGaussian,
    pub clamped: bool,
}

/// LMMSE estimate of `x` from `y = A x + n` under `x ~ N(prior.mean, prior.var I)`,
/// plus the extrinsic message with the prior divided out.
///
/// `var_bounds` limits the extrinsic variance.
pub fn linear_estimate(
    obs: &MacObservation,
    op: &SensingOperator,
    prior: &ExtrinsicGaussian,
    var_bounds: (f64, f64),
) -> Result<LinearOutput> {
    check_len(op.n(), prior.mean.len())?;
    check_len(op.s(), obs.y.len())?;
    let v = prior.var;
    if !(v > 0.0) {
        return Err(Error::invalid("linear prior variance must be positive"));
    }
    let sigma2 = obs.sigma2.max(0.0);
    let n = op.n() as f64;
    let s = op.s() as f64;

    let ax = op.forward(&prior.mean)?;
    let resid: Vec<f64> = obs.y.iter().zip(&ax).map(|(y, a)| y - a).collect();
    let back = op.adjoint(&resid)?;

    let gain = if v.is_infinite() { 1.0 } else { v / (v + sigma2) };
    let post_mean: Vec<f64> = prior.mean.iter().zip(&back).map(|(m, b)| m + gain * b).collect();
    let post_var = if v.is_infinite() {
        f64::INFINITY
    } else {
        (v - (s / n) * v * v / (v + sigma2)).max(0.0)
    };

    // Dividing the posterior by the prior collapses to these closed forms,
    // which stay finite when the posterior variance reaches zero.
    let ratio = n / s;
    let raw_var = if v.is_infinite() {
        f64::INFINITY
    } else {
        ratio * (v + sigma2) - v
    };
    let ext_mean: Vec<f64> = prior.mean.iter().zip(&back).map(|(m, b)| m + ratio * b).collect();
    let (lo, hi) = var_bounds;
    let ext_var = raw_var.clamp(lo, hi);
    let clamped = ext_var != raw_var;

    if !post_mean.iter().chain(&ext_mean).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("linear estimate"));
    }
    Ok(LinearOutput {
        post_mean,
        post_var,
        ext: ExtrinsicGaussian {
            mean: ext_mean,
            var: ext_var,
        },
        clamped,
    })
}
