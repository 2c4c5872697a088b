use super::{ExtrinsicGaussian, PriorMessage};
use crate::error::{check_len, Error, Result};
use crate::gauss::{log_normal, sigmoid};

/// Posterior mean and variance of `x` under the prior
/// `pi N(x; m, phi) + (1 - pi) δ(x)` and likelihood `N(z; x, tau)`.
///
/// `phi` may be infinite (flat slab).
pub fn denoise_bg(z: f64, tau: f64, pi: f64, m: f64, phi: f64) -> (f64, f64) {
    let (a, b) = if phi.is_infinite() {
        (z, tau)
    } else {
        let prec = 1.0 / phi + 1.0 / tau;
        ((m / phi + z / tau) / prec, 1.0 / prec)
    };
    let r = if pi >= 1.0 {
        1.0
    } else if pi <= 0.0 || phi.is_infinite() {
        0.0
    } else {
        sigmoid(log_normal(z, m, phi + tau) + pi.ln() - log_normal(z, 0.0, tau) - (-pi).ln_1p())
    };
    let mean = r * a;
    let var = (r * (b + a * a) - mean * mean).max(0.0);
    (mean, var)
}

/// Result of one elementwise denoising sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserOutput {
    pub post_mean: Vec<f64>,
    pub post_var: f64,
    pub ext: ExtrinsicGaussian,
    pub clamped: bool,
}

/// Denoises every element against its own prior, averages the posterior
/// variances, and divides out the incoming message to form the extrinsic
/// feedback. `var_bounds` limits the extrinsic variance.
pub fn denoiser_pass(
    ext_in: &ExtrinsicGaussian,
    prior: &PriorMessage,
    var_bounds: (f64, f64),
) -> Result<DenoiserOutput> {
    check_len(prior.len(), ext_in.mean.len())?;
    let tau = ext_in.var;
    if !(tau > 0.0) {
        return Err(Error::invalid("denoiser input variance must be positive"));
    }
    let n = prior.len();
    let mut post_mean = Vec::with_capacity(n);
    let mut var_sum = 0.0;
    for i in 0..n {
        let (mu, v) = denoise_bg(ext_in.mean[i], tau, prior.pi[i], prior.mean[i], prior.var[i]);
        post_mean.push(mu);
        var_sum += v;
    }
    let post_var = if n == 0 { 0.0 } else { var_sum / n as f64 };

    let (lo, hi) = var_bounds;
    let precision = if post_var > 0.0 { 1.0 / post_var - 1.0 / tau } else { f64::INFINITY };
    let (mean, var, clamped) = if post_var <= 0.0 {
        (post_mean.clone(), lo, true)
    } else if precision <= 1.0 / hi {
        // The denoiser sharpened nothing on average; pass its estimate with a
        // nearly flat variance.
        (post_mean.clone(), hi, true)
    } else {
        let raw = 1.0 / precision;
        let mean = post_mean
            .iter()
            .zip(&ext_in.mean)
            .map(|(mu, z)| raw * (mu / post_var - z / tau))
            .collect();
        (mean, raw.max(lo), raw < lo)
    };
    if !post_mean.iter().chain(&mean).all(|x| x.is_finite()) {
        return Err(Error::NonFinite("denoiser output"));
    }
    Ok(DenoiserOutput {
        post_mean,
        post_var,
        ext: ExtrinsicGaussian { mean, var },
        clamped,
    })
}
