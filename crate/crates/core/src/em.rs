//! Sliding-window EM learning of the chain parameters.
//!
//! Forward messages are reused from the recovery rounds; a backward pass over
//! the window yields approximate smoothed moments for the M-step.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{check_len, Error, Result};
use crate::gauss::gaussian_product;
use crate::params::{stationary_p10, stationary_xi, ChainParams};

/// Messages retained for one round of the window.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// Local support evidence from this round's observation.
    pub lambda_delta: Vec<f64>,
    /// Local amplitude evidence `N(mu_bar, v_bar)`.
    pub mu_bar: Vec<f64>,
    pub v_bar: Vec<f64>,
    /// Forward messages into this round.
    pub pi_in: Vec<f64>,
    pub m_in: Vec<f64>,
    pub phi_in: Vec<f64>,
}

impl RoundRecord {
    pub fn len(&self) -> usize {
        self.lambda_delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_delta.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        for l in [&self.mu_bar, &self.v_bar, &self.pi_in, &self.m_in, &self.phi_in] {
            check_len(n, l.len())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowArchive {
    capacity: usize,
    records: VecDeque<RoundRecord>,
}

impl WindowArchive {
    pub fn new(capacity: usize) -> Self {
        WindowArchive {
            capacity: capacity.max(1),
            records: VecDeque::with_capacity(capacity.max(1)),
        }
    }

    pub fn push(&mut self, rec: RoundRecord) -> Result<()> {
        rec.check()?;
        if let Some(first) = self.records.front() {
            check_len(first.len(), rec.len())?;
        }
        if self.records.len() == self.capacity {
            self.records.pop_front();
        }
        self.records.push_back(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.records.len() == self.capacity
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn get(&self, i: usize) -> &RoundRecord {
        &self.records[i]
    }

    pub fn n(&self) -> usize {
        self.records.front().map_or(0, |r| r.len())
    }
}

/// Support message into round `i` from round `i + 1`, given that round's
/// local evidence `e` and its own backward message `b`.
fn support_back_step(e: f64, b: f64, p: &ChainParams) -> f64 {
    let off = (1.0 - e) * (1.0 - b);
    let on = e * b;
    let num = p.p01 * off + (1.0 - p.p01) * on;
    let den = (1.0 - p.p10 + p.p01) * off + (1.0 - p.p01 + p.p10) * on;
    if den <= 0.0 {
        0.5
    } else {
        num / den
    }
}

/// Backward support messages for every round of the window. The last round
/// receives the uninformative message 1/2.
pub fn backward_support(archive: &WindowArchive, p: &ChainParams) -> Result<Vec<Vec<f64>>> {
    let w = archive.len();
    if w < 2 {
        return Err(Error::invalid("backward pass needs at least two rounds"));
    }
    let n = archive.n();
    let mut out = vec![vec![0.5; n]; w];
    for j in (0..w - 1).rev() {
        let next = archive.get(j + 1);
        let (head, tail) = out.split_at_mut(j + 1);
        for (k, dst) in head[j].iter_mut().enumerate() {
            *dst = support_back_step(next.lambda_delta[k], tail[0][k], p);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BackwardAmplitude {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    /// Set when `β = 1` severs the chain and the messages are flat.
    pub flat: bool,
}

/// Backward amplitude messages through the AR(1) kernel. The last round's
/// message is flat (infinite variance).
pub fn backward_amplitude(archive: &WindowArchive, p: &ChainParams) -> Result<BackwardAmplitude> {
    let w = archive.len();
    if w < 2 {
        return Err(Error::invalid("backward pass needs at least two rounds"));
    }
    let n = archive.n();
    let mut mean = vec![vec![0.0; n]; w];
    let mut var = vec![vec![f64::INFINITY; n]; w];
    let keep = 1.0 - p.beta;
    if keep <= 0.0 {
        return Ok(BackwardAmplitude { mean, var, flat: true });
    }
    let q = p.innovation_var();
    for j in (0..w - 1).rev() {
        let next = archive.get(j + 1);
        for k in 0..n {
            let (mc, vc) = gaussian_product(next.mu_bar[k], next.v_bar[k], mean[j + 1][k], var[j + 1][k]);
            if vc.is_infinite() {
                continue;
            }
            mean[j][k] = mc / keep;
            var[j][k] = (vc + q) / (keep * keep);
        }
    }
    Ok(BackwardAmplitude { mean, var, flat: false })
}

/// Smoothed moments per round (outer index) and element (inner index).
/// Pairwise entries at round 0 are empty.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PosteriorMoments {
    pub e_s: Vec<Vec<f64>>,
    pub e_ss_prev: Vec<Vec<f64>>,
    pub e_r: Vec<Vec<f64>>,
    pub var_r: Vec<Vec<f64>>,
    pub e_rr_prev: Vec<Vec<f64>>,
}

impl PosteriorMoments {
    pub fn rounds(&self) -> usize {
        self.e_s.len()
    }
}

/// Pairwise support posterior `p(s_prev = a, s = b)`, indexed `[a][b]`.
pub fn pairwise_support(
    pi_prev: f64,
    e_prev: f64,
    e_cur: f64,
    b_cur: f64,
    p: &ChainParams,
) -> [[f64; 2]; 2] {
    let left = [(1.0 - pi_prev) * (1.0 - e_prev), pi_prev * e_prev];
    let right = [(1.0 - e_cur) * (1.0 - b_cur), e_cur * b_cur];
    let trans = [[1.0 - p.p10, p.p10], [p.p01, 1.0 - p.p01]];
    let mut out = [[0.0; 2]; 2];
    let mut total = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] = left[a] * trans[a][b] * right[b];
            total += out[a][b];
        }
    }
    if total > 0.0 {
        for row in out.iter_mut() {
            for v in row.iter_mut() {
                *v /= total;
            }
        }
    }
    out
}

fn singleton_support(pi: f64, e: f64, b: f64) -> f64 {
    let on = pi * e * b;
    let off = (1.0 - pi) * (1.0 - e) * (1.0 - b);
    if on + off <= 0.0 {
        pi
    } else {
        on / (on + off)
    }
}

/// Cross moment `E[r r_prev]` of the bivariate Gaussian formed by
/// `N(r_prev; ma, va)`, the kernel `N(r; keep·r_prev, q)`, and `N(r; mc, vc)`.
pub fn gaussian_cross_moment(ma: f64, va: f64, keep: f64, q: f64, mc: f64, vc: f64) -> f64 {
    // Joint prior of (r_prev, r), then a scalar update on r.
    let m0 = ma;
    let m1 = keep * ma;
    let p01 = keep * va;
    let p11 = keep * keep * va + q;
    if vc.is_infinite() {
        return p01 + m0 * m1;
    }
    let s = p11 + vc;
    let innov = mc - m1;
    let k0 = p01 / s;
    let k1 = p11 / s;
    let post0 = m0 + k0 * innov;
    let post1 = m1 + k1 * innov;
    let cov = p01 - k0 * p11;
    cov + post0 * post1
}

/// Smoothed support and amplitude moments from forward, local and backward
/// messages.
pub fn posterior_moments(
    archive: &WindowArchive,
    back_s: &[Vec<f64>],
    back_r: &BackwardAmplitude,
    p: &ChainParams,
) -> Result<PosteriorMoments> {
    let w = archive.len();
    check_len(w, back_s.len())?;
    check_len(w, back_r.mean.len())?;
    let n = archive.n();
    let keep = 1.0 - p.beta;
    let q = p.innovation_var();
    let mut m = PosteriorMoments::default();
    for j in 0..w {
        let rec = archive.get(j);
        let mut es = Vec::with_capacity(n);
        let mut er = Vec::with_capacity(n);
        let mut vr = Vec::with_capacity(n);
        for k in 0..n {
            es.push(singleton_support(rec.pi_in[k], rec.lambda_delta[k], back_s[j][k]));
            let (ma, va) = gaussian_product(rec.m_in[k], rec.phi_in[k], rec.mu_bar[k], rec.v_bar[k]);
            let (mm, vv) = gaussian_product(ma, va, back_r.mean[j][k], back_r.var[j][k]);
            er.push(mm);
            vr.push(vv);
        }
        let mut ess = Vec::new();
        let mut err = Vec::new();
        if j > 0 {
            let prev = archive.get(j - 1);
            ess.reserve(n);
            err.reserve(n);
            for k in 0..n {
                let pw = pairwise_support(
                    prev.pi_in[k],
                    prev.lambda_delta[k],
                    rec.lambda_delta[k],
                    back_s[j][k],
                    p,
                );
                ess.push(pw[1][1]);
                let (ma, va) = gaussian_product(prev.m_in[k], prev.phi_in[k], prev.mu_bar[k], prev.v_bar[k]);
                let (mc, vc) = gaussian_product(rec.mu_bar[k], rec.v_bar[k], back_r.mean[j][k], back_r.var[j][k]);
                err.push(gaussian_cross_moment(ma, va, keep, q, mc, vc));
            }
        }
        m.e_s.push(es);
        m.e_ss_prev.push(ess);
        m.e_r.push(er);
        m.var_r.push(vr);
        m.e_rr_prev.push(err);
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EmFlags {
    pub p01_kept: bool,
    pub beta_clamped: bool,
    pub lambda_clamped: bool,
    pub gamma_floored: bool,
    pub flat_backward: bool,
}

impl EmFlags {
    pub fn any(&self) -> bool {
        self.p01_kept || self.beta_clamped || self.lambda_clamped || self.gamma_floored || self.flat_backward
    }
}

const BETA_MIN: f64 = 1e-4;
const LAMBDA_MIN: f64 = 1e-6;

/// One M-step over the window.
pub fn em_update(moments: &PosteriorMoments, current: &ChainParams) -> Result<(ChainParams, EmFlags)> {
    let w = moments.rounds();
    if w < 2 {
        return Err(Error::invalid("EM needs at least two rounds of moments"));
    }
    let n = moments.e_s[0].len();
    if n == 0 {
        return Err(Error::invalid("EM needs a nonempty model"));
    }
    let mut flags = EmFlags::default();

    let total_s: f64 = moments.e_s.iter().flatten().sum();
    let mut lambda = total_s / (w * n) as f64;
    if !(LAMBDA_MIN..=1.0 - LAMBDA_MIN).contains(&lambda) {
        lambda = lambda.clamp(LAMBDA_MIN, 1.0 - LAMBDA_MIN);
        flags.lambda_clamped = true;
    }

    // Amplitude statistics are weighted by the support posterior: where an
    // element is inactive its amplitude is unobserved and the relaxed local
    // message would otherwise pin it near zero.
    let (mut joint, mut prev) = (0.0, 0.0);
    let (mut s_ur, mut s_uu) = (0.0, 0.0);
    for j in 1..w {
        joint += moments.e_ss_prev[j].iter().sum::<f64>();
        prev += moments.e_s[j - 1].iter().sum::<f64>();
        for k in 0..n {
            let wt = moments.e_ss_prev[j][k];
            let cur2 = moments.var_r[j][k] + moments.e_r[j][k].powi(2);
            let prev2 = moments.var_r[j - 1][k] + moments.e_r[j - 1][k].powi(2);
            let cross = moments.e_rr_prev[j][k];
            s_ur += wt * (cross - prev2);
            s_uu += wt * (cur2 + prev2 - 2.0 * cross);
        }
    }
    let p01 = if prev < 1e-9 {
        flags.p01_kept = true;
        current.p01
    } else {
        (1.0 - joint / prev).clamp(0.0, 1.0)
    };

    // Root of K ξ β² − S_ur β − S_uu = 0 with ξ held at its current value
    // and K the expected number of active pairs.
    let pairs = joint;
    let xi = current.xi;
    let s_uu = s_uu.max(0.0);
    let raw_beta = if pairs < 1e-9 {
        f64::NAN
    } else {
        (s_ur + (s_ur * s_ur + 4.0 * pairs * xi * s_uu).sqrt()) / (2.0 * pairs * xi)
    };
    let beta = if raw_beta.is_finite() && (BETA_MIN..=1.0).contains(&raw_beta) {
        raw_beta
    } else {
        flags.beta_clamped = true;
        if raw_beta.is_finite() {
            raw_beta.clamp(BETA_MIN, 1.0)
        } else {
            current.beta.clamp(BETA_MIN, 1.0)
        }
    };

    let second: f64 = moments
        .var_r
        .iter()
        .flatten()
        .zip(moments.e_r.iter().flatten())
        .zip(moments.e_s.iter().flatten())
        .map(|((v, m), s)| s * (v + m * m))
        .sum();
    let mut gamma = second / total_s;
    if !(gamma > 1e-300) || !gamma.is_finite() {
        gamma = current.gamma;
        flags.gamma_floored = true;
    }

    let next = ChainParams {
        lambda,
        gamma,
        p01,
        p10: stationary_p10(lambda, p01),
        beta,
        xi: stationary_xi(beta, gamma),
        epsilon: current.epsilon,
    };
    next.validate()?;
    Ok((next, flags))
}

/// Whether the EM step runs after round `t`.
pub fn schedule(t: usize, t0: usize, warmup: usize) -> bool {
    t > warmup.max(t0)
}

/// Runs the backward pass and one M-step over a full window.
pub fn em_step(archive: &WindowArchive, current: &ChainParams) -> Result<(ChainParams, EmFlags)> {
    let bs = backward_support(archive, current)?;
    let br = backward_amplitude(archive, current)?;
    let moments = posterior_moments(archive, &bs, &br, current)?;
    let (next, mut flags) = em_update(&moments, current)?;
    flags.flat_backward = br.flat;
    Ok((next, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::gauss_pdf;
    use crate::quad::{integrate_panels, window};
    use crate::rng::SeededRng;
    use crate::tsaga::forward_support_scalar;

    fn params(lambda: f64, p01: f64, beta: f64) -> ChainParams {
        ChainParams::stationary(lambda, 1.0, p01, beta, 1e-7).unwrap()
    }

    fn record(ld: f64, pi: f64) -> RoundRecord {
        RoundRecord {
            lambda_delta: vec![ld],
            mu_bar: vec![0.0],
            v_bar: vec![f64::INFINITY],
            pi_in: vec![pi],
            m_in: vec![0.0],
            phi_in: vec![1.0],
        }
    }

    #[test]
    fn schedule_cases() {
        assert!(!schedule(5, 5, 10));
        assert!(schedule(11, 5, 10));
        assert!(!schedule(10, 5, 10));
        assert!(!schedule(4, 6, 0));
    }

    #[test]
    fn uninformative_future_stays_half() {
        let p = ChainParams { p01: 0.3, p10: 0.3, ..params(0.5, 0.3, 0.1) };
        let mut a = WindowArchive::new(4);
        for _ in 0..4 {
            a.push(record(0.5, 0.5)).unwrap();
        }
        for row in backward_support(&a, &p).unwrap() {
            assert!((row[0] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn frozen_chain_multiplies_downstream_evidence() {
        let p = ChainParams { p01: 0.0, p10: 0.0, ..params(0.3, 0.0, 0.1) };
        let mut a = WindowArchive::new(3);
        for ld in [0.5, 0.7, 0.8] {
            a.push(record(ld, 0.3)).unwrap();
        }
        let b = backward_support(&a, &p).unwrap();
        let on = 0.7 * 0.8;
        let off = 0.3 * 0.2;
        assert!((b[0][0] - on / (on + off)).abs() < 1e-14);
    }

    #[test]
    fn three_round_support_matches_enumeration() {
        let mut rng = SeededRng::new(17);
        for _ in 0..200 {
            let p = ChainParams {
                p01: rng.uniform(),
                p10: rng.uniform(),
                ..params(0.3, 0.1, 0.1)
            };
            let f1 = rng.uniform();
            let e = [rng.uniform(), rng.uniform(), rng.uniform()];
            let f2 = forward_support_scalar(e[0], f1, &p);
            let f3 = forward_support_scalar(e[1], f2, &p);
            let mut a = WindowArchive::new(3);
            for (ld, pi) in e.iter().zip([f1, f2, f3]) {
                a.push(record(*ld, pi)).unwrap();
            }
            let bs = backward_support(&a, &p).unwrap();
            let br = backward_amplitude(&a, &p).unwrap();
            let m = posterior_moments(&a, &bs, &br, &p).unwrap();

            let trans = |x: usize, y: usize| match (x, y) {
                (0, 0) => 1.0 - p.p10,
                (0, _) => p.p10,
                (_, 0) => p.p01,
                _ => 1.0 - p.p01,
            };
            let bern = |q: f64, s: usize| if s == 1 { q } else { 1.0 - q };
            let mut joint = [[[0.0; 2]; 2]; 2];
            let mut total = 0.0;
            for s1 in 0..2 {
                for s2 in 0..2 {
                    for s3 in 0..2 {
                        let w = bern(f1, s1) * bern(e[0], s1) * trans(s1, s2) * bern(e[1], s2) * trans(s2, s3) * bern(e[2], s3);
                        joint[s1][s2][s3] = w;
                        total += w;
                    }
                }
            }
            let marg = |pred: &dyn Fn(usize, usize, usize) -> bool| {
                let mut acc = 0.0;
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        for s3 in 0..2 {
                            if pred(s1, s2, s3) {
                                acc += joint[s1][s2][s3];
                            }
                        }
                    }
                }
                acc / total
            };
            assert!((m.e_s[0][0] - marg(&|a, _, _| a == 1)).abs() < 1e-10);
            assert!((m.e_s[1][0] - marg(&|_, b, _| b == 1)).abs() < 1e-10);
            assert!((m.e_s[2][0] - marg(&|_, _, c| c == 1)).abs() < 1e-10);
            assert!((m.e_ss_prev[1][0] - marg(&|a, b, _| a == 1 && b == 1)).abs() < 1e-10);
            assert!((m.e_ss_prev[2][0] - marg(&|_, b, c| b == 1 && c == 1)).abs() < 1e-10);
            // All four pairwise cells for the first pair.
            let pw = pairwise_support(f1, e[0], e[1], bs[1][0], &p);
            for a_ in 0..2 {
                for b_ in 0..2 {
                    assert!((pw[a_][b_] - marg(&|x, y, _| x == a_ && y == b_)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn uninformative_messages_give_stationary_marginal() {
        let p = params(0.2, 0.05, 0.1);
        let mut a = WindowArchive::new(3);
        for _ in 0..3 {
            a.push(record(0.5, 0.2)).unwrap();
        }
        let bs = backward_support(&a, &p).unwrap();
        let br = backward_amplitude(&a, &p).unwrap();
        let m = posterior_moments(&a, &bs, &br, &p).unwrap();
        for row in &m.e_s {
            assert!((row[0] - 0.2).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_local_evidence_gives_flat_backward() {
        let p = params(0.2, 0.05, 0.1);
        let mut a = WindowArchive::new(3);
        for _ in 0..3 {
            a.push(record(0.5, 0.2)).unwrap();
        }
        let br = backward_amplitude(&a, &p).unwrap();
        assert!(br.var.iter().flatten().all(|v| v.is_infinite()));
        let p1 = ChainParams { beta: 1.0, xi: 1.0, ..p };
        assert!(backward_amplitude(&a, &p1).unwrap().flat);
    }

    #[test]
    fn deterministic_chain_backward_mean() {
        let p = ChainParams {
            beta: 0.2,
            xi: 1e-30,
            ..params(0.2, 0.05, 0.2)
        };
        let mut a = WindowArchive::new(2);
        a.push(record(0.5, 0.2)).unwrap();
        let mut r = record(0.5, 0.2);
        r.mu_bar = vec![1.6];
        r.v_bar = vec![0.3];
        a.push(r).unwrap();
        let br = backward_amplitude(&a, &p).unwrap();
        assert!((br.mean[0][0] - 1.6 / 0.8).abs() < 1e-14);
        assert!((br.var[0][0] - 0.3 / 0.64).abs() < 1e-12);
    }

    #[test]
    fn static_amplitude_smoothing_matches_closed_form() {
        // β = 0 makes r constant across rounds, so every smoothed mean is the
        // product of the initial prior and all local messages.
        let p = ChainParams { beta: 0.0, ..params(0.2, 0.05, 0.1) };
        let locals = [(0.9, 0.5), (1.4, 0.8), (0.6, 0.3)];
        let prior = (0.1, 2.0);
        let mut a = WindowArchive::new(3);
        let mut fwd = prior;
        for &(m, v) in &locals {
            let mut r = record(0.5, 0.2);
            r.mu_bar = vec![m];
            r.v_bar = vec![v];
            r.m_in = vec![fwd.0];
            r.phi_in = vec![fwd.1];
            a.push(r).unwrap();
            fwd = gaussian_product(fwd.0, fwd.1, m, v);
        }
        let bs = backward_support(&a, &p).unwrap();
        let br = backward_amplitude(&a, &p).unwrap();
        let mom = posterior_moments(&a, &bs, &br, &p).unwrap();
        for j in 0..3 {
            assert!((mom.e_r[j][0] - fwd.0).abs() < 1e-12);
            assert!((mom.var_r[j][0] - fwd.1).abs() < 1e-12);
        }
        // Perfectly correlated neighbours: E[r r'] = Var + mean².
        assert!((mom.e_rr_prev[2][0] - (fwd.1 + fwd.0 * fwd.0)).abs() < 1e-12);
    }

    #[test]
    fn cross_moment_matches_two_dimensional_quadrature() {
        let (ma, va, keep, q, mc, vc) = (0.3, 0.8, 0.85, 0.2, -0.4, 0.5);
        let got = gaussian_cross_moment(ma, va, keep, q, mc, vc);
        let dens = |a: f64, b: f64| {
            gauss_pdf(a, ma, va).unwrap() * gauss_pdf(b, keep * a, q).unwrap() * gauss_pdf(b, mc, vc).unwrap()
        };
        let ba = window(ma, va.sqrt(), 10.0, 40);
        let inner = |a: f64, g: &dyn Fn(f64, f64) -> f64| {
            integrate_panels(&|b| g(a, b), &window(keep * a, 1.0, 10.0, 40), 1e-13)
        };
        let z = integrate_panels(&|a| inner(a, &dens), &ba, 1e-12);
        let c = integrate_panels(&|a| inner(a, &|x, y| x * y * dens(x, y)), &ba, 1e-12);
        assert!((got - c / z).abs() < 1e-7, "{got} {}", c / z);
    }

    #[test]
    fn frozen_support_moments_give_zero_death_rate() {
        let w = 4;
        let n = 10;
        let m = PosteriorMoments {
            e_s: vec![vec![1.0; n]; w],
            e_ss_prev: (0..w).map(|j| if j == 0 { vec![] } else { vec![1.0; n] }).collect(),
            e_r: vec![vec![0.5; n]; w],
            var_r: vec![vec![0.1; n]; w],
            e_rr_prev: (0..w).map(|j| if j == 0 { vec![] } else { vec![0.35; n] }).collect(),
        };
        let (next, _) = em_update(&m, &params(0.5, 0.1, 0.1)).unwrap();
        assert_eq!(next.p01, 0.0);
        assert!((next.lambda - (1.0 - LAMBDA_MIN)).abs() < 1e-15);
    }

    #[test]
    fn exact_moments_move_toward_truth() {
        let truth = params(0.2, 0.01, 0.05);
        let n = 10_000;
        let w = 5;
        let mut rng = SeededRng::new(99);
        let mut s = vec![vec![0.0; n]; w];
        let mut r = vec![vec![0.0; n]; w];
        for k in 0..n {
            s[0][k] = (rng.uniform() < truth.lambda) as u8 as f64;
            r[0][k] = rng.normal();
            for j in 1..w {
                let stay = if s[j - 1][k] == 1.0 { 1.0 - truth.p01 } else { truth.p10 };
                s[j][k] = (rng.uniform() < stay) as u8 as f64;
                r[j][k] = (1.0 - truth.beta) * r[j - 1][k] + truth.beta * truth.xi.sqrt() * rng.normal();
            }
        }
        let m = PosteriorMoments {
            e_s: s.clone(),
            e_ss_prev: (0..w)
                .map(|j| if j == 0 { vec![] } else { (0..n).map(|k| s[j][k] * s[j - 1][k]).collect() })
                .collect(),
            e_r: r.clone(),
            var_r: vec![vec![0.0; n]; w],
            e_rr_prev: (0..w)
                .map(|j| if j == 0 { vec![] } else { (0..n).map(|k| r[j][k] * r[j - 1][k]).collect() })
                .collect(),
        };
        let start = params(0.05, 0.005, 0.005);
        let (next, _) = em_update(&m, &start).unwrap();
        assert!((next.lambda - truth.lambda).abs() <= (start.lambda - truth.lambda).abs());
        assert!((next.p01 - truth.p01).abs() <= (start.p01 - truth.p01).abs());
        assert!((next.beta - truth.beta).abs() <= (start.beta - truth.beta).abs());
        assert!((next.gamma - truth.gamma).abs() <= (start.gamma - truth.gamma).abs() + 0.05);
        assert!(next.validate().is_ok());
    }

    #[test]
    fn inactive_elements_leave_amplitude_statistics_alone() {
        // element 0 active with a known AR path, element 1 inactive with
        // arbitrary amplitude moments
        let path = [1.0, 0.9, 0.7, 0.8];
        let junk = [5.0, -3.0, 0.0, 7.0];
        let w = path.len();
        let mut m = PosteriorMoments::default();
        for j in 0..w {
            m.e_s.push(vec![1.0, 0.0]);
            m.e_r.push(vec![path[j], junk[j]]);
            m.var_r.push(vec![0.0, 0.3]);
            if j == 0 {
                m.e_ss_prev.push(vec![]);
                m.e_rr_prev.push(vec![]);
            } else {
                m.e_ss_prev.push(vec![1.0, 0.0]);
                m.e_rr_prev.push(vec![path[j] * path[j - 1], junk[j] * junk[j - 1]]);
            }
        }
        let cur = params(0.5, 0.1, 0.2);
        let (next, _) = em_update(&m, &cur).unwrap();
        let gamma = path.iter().map(|r| r * r).sum::<f64>() / w as f64;
        assert!((next.gamma - gamma).abs() < 1e-14);
        let (mut s_ur, mut s_uu) = (0.0, 0.0);
        for j in 1..w {
            s_ur += path[j - 1] * (path[j] - path[j - 1]);
            s_uu += (path[j] - path[j - 1]).powi(2);
        }
        let k = (w - 1) as f64;
        let beta = (s_ur + (s_ur * s_ur + 4.0 * k * cur.xi * s_uu).sqrt()) / (2.0 * k * cur.xi);
        assert!((next.beta - beta).abs() < 1e-14);
        assert_eq!(next.lambda, 0.5);
    }
}
