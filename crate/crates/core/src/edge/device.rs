use std::cmp::Ordering;

use super::Objective;
use crate::error::{check_len, Error, Result};
use crate::sensing::SensingOperator;
use crate::vector::norm_sq;

/// A device's local objective plus its error-feedback buffer `Δ_m`.
#[derive(Clone, Debug)]
pub struct DeviceState<O> {
    pub device_id: usize,
    pub objective: O,
    pub delta: Vec<f64>,
}

impl<O: Objective> DeviceState<O> {
    pub fn new(device_id: usize, objective: O) -> Self {
        let n = objective.dim();
        DeviceState {
            device_id,
            objective,
            delta: vec![0.0; n],
        }
    }

    pub fn k_m(&self) -> usize {
        self.objective.weight()
    }
}

/// `E` full-batch gradient steps from `theta`; returns the model delta
/// `θ_m[E+1] − θ_m[1]`.
pub fn local_update<O: Objective>(
    objective: &O,
    theta: &[f64],
    eta: f64,
    e_local: usize,
) -> Result<Vec<f64>> {
    if objective.weight() == 0 {
        return Err(Error::invalid("local dataset is empty"));
    }
    if e_local == 0 {
        return Err(Error::invalid("e_local must be at least 1"));
    }
    check_len(objective.dim(), theta.len())?;
    let mut local = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    for _ in 0..e_local {
        objective.gradient(&local, &mut grad);
        for (w, g) in local.iter_mut().zip(&grad) {
            *w -= eta * g;
        }
    }
    Ok(local.iter().zip(theta).map(|(a, b)| a - b).collect())
}

/// Adds the carried error to `g`, keeps the `k` largest magnitudes and stores
/// the discarded remainder back in `delta`. Ties go to the lower index.
pub fn accumulate_and_sparsify(delta: &mut [f64], g: &[f64], k: usize) -> Result<Vec<f64>> {
    check_len(delta.len(), g.len())?;
    let n = g.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("top-k needs 1 <= k <= {n}, got {k}")));
    }
    let ec: Vec<f64> = g.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let rank = |a: &usize, b: &usize| -> Ordering {
        ec[*b]
            .abs()
            .partial_cmp(&ec[*a].abs())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(b))
    };
    if k < n {
        order.select_nth_unstable_by(k - 1, rank);
    }
    let mut sp = vec![0.0; n];
    for &i in &order[..k] {
        sp[i] = ec[i];
    }
    for i in 0..n {
        delta[i] = ec[i] - sp[i];
    }
    Ok(sp)
}

/// Common power coefficient and the per-device weights `M K_m / K`.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerScaling {
    pub alpha: f64,
    pub weights: Vec<f64>,
}

impl PowerScaling {
    pub fn from_counts(alpha: f64, counts: &[usize]) -> Self {
        let k: usize = counts.iter().sum();
        let m = counts.len() as f64;
        PowerScaling {
            alpha,
            weights: counts.iter().map(|&km| m * km as f64 / k as f64).collect(),
        }
    }

    /// The scalar `√α · M K_m / K` each device sends alongside its signal.
    pub fn amplitude(&self, device: usize) -> f64 {
        self.alpha.sqrt() * self.weights[device]
    }
}

/// `A g_sp`.
pub fn compress(g_sp: &[f64], op: &SensingOperator) -> Result<Vec<f64>> {
    op.forward(g_sp)
}

/// Channel input `√α (M K_m / K) A g_sp` for `device`.
pub fn compress_and_scale(
    g_sp: &[f64],
    op: &SensingOperator,
    scaling: &PowerScaling,
    device: usize,
) -> Result<Vec<f64>> {
    let a = scaling.amplitude(device);
    Ok(op.forward(g_sp)?.into_iter().map(|v| a * v).collect())
}

/// Largest common `α` keeping every device's per-round energy
/// `α (M K_m / K)² ‖A g_sp,m‖²` within `p_bar`. Silent devices do not
/// constrain `α`; if all are silent, `α = 1`.
pub fn choose_alpha(signals: &[Vec<f64>], weights: &[f64], p_bar: f64) -> Result<f64> {
    if signals.is_empty() {
        return Err(Error::invalid("choose_alpha needs at least one device"));
    }
    check_len(signals.len(), weights.len())?;
    let mut alpha = f64::INFINITY;
    for (sig, w) in signals.iter().zip(weights) {
        let e = w * w * norm_sq(sig);
        if e > 0.0 {
            alpha = alpha.min(p_bar / e);
        }
    }
    Ok(if alpha.is_finite() { alpha } else { 1.0 })
}
