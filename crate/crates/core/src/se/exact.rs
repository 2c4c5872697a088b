//! Exact MMSE of small scalar chains by numerical integration.

use crate::gauss::gauss_pdf;
use crate::params::ChainParams;
use crate::quad::{integrate_panels, window};

fn panels(sd_max: f64, sd_min: f64) -> usize {
    ((24.0 * sd_max / sd_min).ceil() as usize).clamp(24, 400)
}

/// MMSE of `x ~ λ N(0, γ) + (1 − λ) δ` from `x + √τ w`.
pub fn single_round_mmse(lambda: f64, gamma: f64, tau: f64) -> f64 {
    let shrink = gamma / (gamma + tau);
    let f = |z: f64| {
        let on = lambda * gauss_pdf(z, 0.0, gamma + tau).unwrap();
        let off = (1.0 - lambda) * gauss_pdf(z, 0.0, tau).unwrap();
        let num = on * shrink * z;
        if on + off > 0.0 {
            num * num / (on + off)
        } else {
            0.0
        }
    };
    let sd_max = (gamma + tau).sqrt();
    let br = window(0.0, sd_max, 14.0, panels(sd_max, tau.sqrt()));
    lambda * gamma - integrate_panels(&f, &br, 1e-13)
}

/// `(det, inverse)` of a symmetric 2x2 matrix `[[a, b], [b, d]]`.
fn inv2(a: f64, b: f64, d: f64) -> (f64, [f64; 3]) {
    let det = a * d - b * b;
    (det, [d / det, -b / det, a / det])
}

/// MMSE of the second-round value `x₂ = s₂ r₂` of a two-round chain from
/// `z₁ = x₁ + √τ₁ w₁` and `z₂ = x₂ + √τ₂ w₂`, with the first round drawn
/// from the stationary marginal. An infinite `tau1` discards the past.
pub fn two_round_mmse(p: &ChainParams, tau1: f64, tau2: f64) -> f64 {
    let g1 = p.gamma;
    let keep = 1.0 - p.beta;
    let g2 = keep * keep * g1 + p.innovation_var();
    let cross = keep * g1;
    if tau1.is_infinite() {
        let lambda2 = p.support_step(p.lambda);
        return single_round_mmse(lambda2, g2, tau2);
    }

    struct Comp {
        w: f64,
        det: f64,
        inv: [f64; 3],
        gain: [f64; 2],
    }
    let mut comps = Vec::with_capacity(4);
    let mut ex2 = 0.0;
    for s1 in 0..2 {
        for s2 in 0..2 {
            let p1 = if s1 == 1 { p.lambda } else { 1.0 - p.lambda };
            let t = match (s1, s2) {
                (0, 0) => 1.0 - p.p10,
                (0, _) => p.p10,
                (_, 0) => p.p01,
                _ => 1.0 - p.p01,
            };
            let w = p1 * t;
            let (f1, f2) = (s1 as f64, s2 as f64);
            let (a, b, d) = (f1 * g1 + tau1, f1 * f2 * cross, f2 * g2 + tau2);
            let (det, inv) = inv2(a, b, d);
            // Cov(x₂, z) = [s₁ s₂ cross, s₂ g₂]
            let c = [f1 * f2 * cross, f2 * g2];
            let gain = [c[0] * inv[0] + c[1] * inv[1], c[0] * inv[1] + c[1] * inv[2]];
            ex2 += w * f2 * g2;
            comps.push(Comp { w, det, inv, gain });
        }
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI);
    let integrand = |z1: f64, z2: f64| {
        let mut pz = 0.0;
        let mut num = 0.0;
        for c in &comps {
            let q = c.inv[0] * z1 * z1 + 2.0 * c.inv[1] * z1 * z2 + c.inv[2] * z2 * z2;
            let dens = c.w * norm / c.det.sqrt() * (-0.5 * q).exp();
            pz += dens;
            num += dens * (c.gain[0] * z1 + c.gain[1] * z2);
        }
        if pz > 0.0 {
            num * num / pz
        } else {
            0.0
        }
    };
    let sd1 = (g1 + tau1).sqrt();
    let sd2 = (g2 + tau2).sqrt();
    let b1 = window(0.0, sd1, 12.0, panels(sd1, tau1.sqrt()));
    let b2 = window(0.0, sd2, 12.0, panels(sd2, tau2.sqrt()));
    let outer = |z1: f64| integrate_panels(&|z2| integrand(z1, z2), &b2, 1e-12);
    ex2 - integrate_panels(&outer, &b1, 1e-11)
}
