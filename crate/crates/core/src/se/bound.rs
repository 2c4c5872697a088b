use serde::Serialize;

use crate::edge::{Objective, QuadraticObjective};
use crate::error::{Error, Result};
use crate::harness::pipeline::{FeelSimulation, PipelineConfig};
use crate::rng::SeededRng;
use crate::tsaga::{TrackerConfig, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityConstants {
    pub c: f64,
    pub l: f64,
    pub g_bound: f64,
    pub rho: f64,
}

impl ConvexityConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c <= self.l) {
            return Err(Error::invalid(format!("need 0 < c <= L, got c={} L={}", self.c, self.l)));
        }
        if !(self.g_bound >= 0.0) {
            return Err(Error::invalid("gradient bound must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::invalid(format!("sparsification factor must lie in [0, 1), got {}", self.rho)));
        }
        Ok(())
    }
}

/// Per-round error term: recovery error plus the sparsification residual
/// accumulated over `t` rounds.
pub fn kappa(phi: f64, g_bound: f64, rho: f64, t: usize) -> f64 {
    let geo = if rho == 0.0 { 0.0 } else { (1.0 + rho) * (1.0 - rho.powi(t as i32)) / (1.0 - rho) };
    phi + (g_bound * rho * (geo + 1.0)).powi(2)
}

/// Expected optimality gap after `t` rounds at step size `1/L`, given the
/// per-round error terms `kappas[0..t]`.
pub fn loss_bound(k: &ConvexityConstants, kappas: &[f64], initial_gap: f64, t: usize) -> Result<f64> {
    k.validate()?;
    if kappas.len() < t {
        return Err(Error::invalid(format!("need {t} kappa values, got {}", kappas.len())));
    }
    let q = 1.0 - k.c / k.l;
    let mut acc = initial_gap * q.powi(t as i32);
    for (i, kap) in kappas[..t].iter().enumerate() {
        acc += q.powi((t - 1 - i) as i32) * kap / k.l;
    }
    Ok(acc)
}

/// Devices sharing a diagonal quadratic curvature with distinct centers.
#[derive(Clone, Debug)]
pub struct BoundProblem {
    pub devices: Vec<QuadraticObjective>,
}

impl BoundProblem {
    /// Curvatures spread over `[c, l]`, device centers drawn `N(0, 1)`.
    pub fn random(dim: usize, devices: usize, samples: usize, c: f64, l: f64, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed).spawn("bound-problem");
        let curvature: Vec<f64> = (0..dim)
            .map(|j| if dim == 1 { c } else { c + (l - c) * j as f64 / (dim - 1) as f64 })
            .collect();
        BoundProblem {
            devices: (0..devices)
                .map(|_| QuadraticObjective {
                    curvature: curvature.clone(),
                    center: (0..dim).map(|_| rng.normal()).collect(),
                    samples,
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.devices[0].dim()
    }

    fn weights(&self) -> Vec<f64> {
        let total: usize = self.devices.iter().map(|d| d.samples).sum();
        self.devices.iter().map(|d| d.samples as f64 / total as f64).collect()
    }

    /// Sample-weighted global loss.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        self.devices.iter().zip(self.weights()).map(|(d, w)| w * d.loss(theta)).sum()
    }

    /// Minimizer of the global loss (per-coordinate weighted center).
    pub fn optimum(&self) -> Vec<f64> {
        let w = self.weights();
        (0..self.dim())
            .map(|j| {
                let num: f64 = self.devices.iter().zip(&w).map(|(d, w)| w * d.curvature[j] * d.center[j]).sum();
                let den: f64 = self.devices.iter().zip(&w).map(|(d, w)| w * d.curvature[j]).sum();
                num / den
            })
            .collect()
    }

    /// Strong convexity and smoothness moduli of the global loss.
    pub fn moduli(&self) -> (f64, f64) {
        let w = self.weights();
        let h: Vec<f64> = (0..self.dim())
            .map(|j| self.devices.iter().zip(&w).map(|(d, w)| w * d.curvature[j]).sum())
            .collect();
        let c = h.iter().cloned().fold(f64::INFINITY, f64::min);
        let l = h.iter().cloned().fold(0.0, f64::max);
        (c, l)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    pub t: usize,
    pub empirical_gap: f64,
    pub bound: f64,
    pub bound_without_kappa: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub constants: ConvexityConstants,
    pub initial_gap: f64,
    /// Mean over seeds of `‖x̂ − x_sp‖² / η²` per round.
    pub phi: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Mean over seeds of the optimality gap after each round.
    pub gaps: Vec<f64>,
    pub checks: Vec<BoundCheck>,
}

impl BoundReport {
    pub fn bound_holds(&self) -> bool {
        self.checks.iter().all(|c| c.empirical_gap <= c.bound)
    }

    pub fn control_violated(&self) -> bool {
        self.checks.iter().any(|c| c.empirical_gap > c.bound_without_kappa)
    }
}

/// Runs the learning loop at `η = 1/L`, `E = 1` on `problem` for every seed
/// and compares the mean optimality gap against the bound.
///
/// The recovery term of κ is the measured squared error of the recovered
/// gradient, and `G` is the largest local gradient norm seen on any
/// trajectory.
#[allow(clippy::too_many_arguments)]
pub fn verify_bound_empirically(
    problem: &BoundProblem,
    s: usize,
    k: usize,
    sigma_e: f64,
    p_bar: f64,
    variant: Variant,
    seeds: &[u64],
    checkpoints: &[usize],
) -> Result<BoundReport> {
    let n = problem.dim();
    let rounds = checkpoints.iter().cloned().max().unwrap_or(0);
    if seeds.is_empty() || rounds == 0 {
        return Err(Error::invalid("need at least one seed and one checkpoint"));
    }
    let (c, l) = problem.moduli();
    let eta = 1.0 / l;
    let theta_star = problem.optimum();
    let best = problem.loss(&theta_star);
    let theta0 = vec![0.0; n];
    let initial_gap = problem.loss(&theta0) - best;

    let mut phi = vec![0.0; rounds];
    let mut gaps = vec![0.0; rounds];
    let mut g_bound: f64 = 0.0;
    for &seed in seeds {
        let cfg = PipelineConfig {
            n,
            s,
            k,
            p_bar,
            sigma_e,
            eta,
            e_local: 1,
            seed,
            variant,
            tracker: TrackerConfig::default(),
            initial_params: PipelineConfig::default_params(n, k, 1e-7)?,
        };
        let mut sim = FeelSimulation::new(cfg, problem.devices.clone(), theta0.clone())?;
        for t in 0..rounds {
            let st = sim.step(false)?;
            let err: f64 = st.x_hat.iter().zip(&st.x_sparse).map(|(a, b)| (a - b).powi(2)).sum();
            phi[t] += err / (eta * eta) / seeds.len() as f64;
            gaps[t] += (problem.loss(sim.theta()) - best) / seeds.len() as f64;
            g_bound = g_bound.max(st.max_grad_norm);
        }
    }
    let rho = ((n - k) as f64 / n as f64).sqrt();
    let constants = ConvexityConstants { c, l, g_bound, rho };
    let kappas: Vec<f64> = phi.iter().enumerate().map(|(t, p)| kappa(*p, g_bound, rho, t + 1)).collect();
    let zero = vec![0.0; rounds];
    let checks = checkpoints
        .iter()
        .map(|&t| {
            Ok(BoundCheck {
                t,
                empirical_gap: gaps[t - 1],
                bound: loss_bound(&constants, &kappas, initial_gap, t)?,
                bound_without_kappa: loss_bound(&constants, &zero, initial_gap, t)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BoundReport {
        constants,
        initial_gap,
        phi,
        kappas,
        gaps,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(rho: f64) -> ConvexityConstants {
        ConvexityConstants {
            c: 1.0,
            l: 4.0,
            g_bound: 2.0,
            rho,
        }
    }

    #[test]
    fn zero_kappa_is_geometric() {
        let b = loss_bound(&consts(0.5), &[0.0; 7], 3.0, 7).unwrap();
        assert!((b - 3.0 * 0.75f64.powi(7)).abs() < 1e-15);
    }

    #[test]
    fn dense_updates_leave_only_recovery_error() {
        for t in 1..5 {
            assert_eq!(kappa(0.3, 5.0, 0.0, t), 0.3);
        }
    }

    #[test]
    fn stationary_bound_approaches_cap_from_below() {
        let k = consts(0.6);
        let phi = 0.2;
        let kap: Vec<f64> = (1..=1000).map(|t| kappa(phi, k.g_bound, k.rho, t)).collect();
        let cap = (phi + (k.g_bound * k.rho * ((1.0 + k.rho) / (1.0 - k.rho) + 1.0)).powi(2)) / k.c;
        let b = loss_bound(&k, &kap, 0.0, 1000).unwrap();
        assert!(b <= cap && (cap - b) / cap < 1e-6, "{b} {cap}");
    }

    #[test]
    fn rejects_undefined_cases() {
        assert!(loss_bound(&consts(1.0), &[0.0], 1.0, 1).is_err());
        let bad = ConvexityConstants { c: 5.0, ..consts(0.5) };
        assert!(loss_bound(&bad, &[0.0], 1.0, 1).is_err());
        assert!(loss_bound(&consts(0.5), &[0.0], 1.0, 2).is_err());
    }

    #[test]
    fn noiseless_dense_run_is_gradient_descent() {
        let p = BoundProblem::random(32, 3, 20, 1.0, 4.0, 1);
        let r = verify_bound_empirically(&p, 32, 32, 0.0, 10.0, Variant::ErrorFree, &[1], &[5, 10]).unwrap();
        assert!(r.bound_holds());
        let q: f64 = 1.0 - r.constants.c / r.constants.l;
        for c in &r.checks {
            assert!(c.empirical_gap <= r.initial_gap * q.powi(c.t as i32) + 1e-12);
        }
    }
}
