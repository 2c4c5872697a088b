use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::ChainParams;
use crate::rng::SeededRng;
use crate::tsaga::{
    denoise_bg, forward_amplitude, forward_support, message_delta_to_r, message_delta_to_s, ExtrinsicGaussian,
};

/// Linear-module state update `τ = (N/s − 1) v + σ²`.
///
/// `sigma2` is the noise seen by the denoiser, which for a partial
/// orthogonal operator is `N/s` times the channel noise.
pub fn se_f(v: f64, n: usize, s: usize, sigma2: f64) -> f64 {
    (n as f64 / s as f64 - 1.0) * v + sigma2
}

/// One element of a population prior: its true value and the prior message
/// the denoiser sees for it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PopulationEntry {
    pub x: f64,
    pub pi: f64,
    pub mean: f64,
    pub var: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SePrior {
    /// Every element drawn from `pi N(mean, var) + (1 - pi) δ`.
    Iid { pi: f64, mean: f64, var: f64 },
    /// Elements with their own prior messages and jointly drawn truths.
    Population(Vec<PopulationEntry>),
}

impl SePrior {
    /// Variance of `x` around the prior mean, averaged over elements.
    pub fn prior_variance(&self) -> f64 {
        let one = |pi: f64, m: f64, v: f64| pi * (v + m * m) - (pi * m).powi(2);
        match self {
            SePrior::Iid { pi, mean, var } => one(*pi, *mean, *var),
            SePrior::Population(p) => {
                p.iter().map(|e| one(e.pi, e.mean, e.var)).sum::<f64>() / p.len().max(1) as f64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
}

/// Monte Carlo MMSE of `x` from `z = x + √τ w`. The generator is cloned, so
/// repeated calls with the same `rng` share their random numbers.
pub fn mmse_mc(tau: f64, prior: &SePrior, samples: usize, rng: &SeededRng) -> McEstimate {
    let mut rng = rng.clone();
    let sd = tau.max(0.0).sqrt();
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let samples = samples.max(1);
    for i in 0..samples {
        let (x, pi, m, v) = match prior {
            SePrior::Iid { pi, mean, var } => {
                let on = rng.uniform() < *pi;
                let amp = mean + var.sqrt() * rng.normal();
                (if on { amp } else { 0.0 }, *pi, *mean, *var)
            }
            SePrior::Population(p) => {
                let e = p[i % p.len()];
                (e.x, e.pi, e.mean, e.var)
            }
        };
        let z = x + sd * rng.normal();
        let est = if tau > 0.0 { denoise_bg(z, tau, pi, m, v).0 } else { x };
        let e2 = (x - est).powi(2);
        sum += e2;
        sum2 += e2 * e2;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum2 / n - mean * mean).max(0.0);
    McEstimate {
        value: mean,
        stderr: (var / n).sqrt(),
    }
}

/// How the recursion evaluates the MMSE function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum MmseOracle {
    MonteCarlo { samples: usize, seed: u64 },
    /// Closed form, valid only for a zero-mean purely Gaussian i.i.d. prior.
    ExactGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeConfig {
    pub oracle: MmseOracle,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SeConfig {
    fn default() -> Self {
        SeConfig {
            oracle: MmseOracle::MonteCarlo {
                samples: 100_000,
                seed: 0,
            },
            tol: 1e-4,
            max_iter: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeTrace {
    pub sigma2: f64,
    pub ratio: f64,
    pub tau: Vec<f64>,
    pub v: Vec<f64>,
    pub mmse: Vec<f64>,
    pub mmse_stderr: Vec<f64>,
    pub tau_star: f64,
    pub v_star: f64,
    pub mmse_star: f64,
    pub iterations: usize,
    pub flagged: bool,
}

impl SeTrace {
    /// Standard error of `v_i`, propagated from the MMSE estimate.
    pub fn v_stderr(&self, i: usize) -> f64 {
        let m = self.mmse[i];
        if m > 0.0 {
            self.mmse_stderr[i] * (self.v[i] / m).powi(2)
        } else {
            0.0
        }
    }
}

fn evaluate(tau: f64, prior: &SePrior, oracle: &MmseOracle, scale: usize) -> Result<McEstimate> {
    match oracle {
        MmseOracle::MonteCarlo { samples, seed } => {
            let rng = SeededRng::new(*seed).spawn("se-mmse");
            Ok(mmse_mc(tau, prior, samples * scale, &rng))
        }
        MmseOracle::ExactGaussian => match prior {
            SePrior::Iid { pi, mean, var } if *pi == 1.0 && *mean == 0.0 => Ok(McEstimate {
                value: if tau > 0.0 { var * tau / (var + tau) } else { 0.0 },
                stderr: 0.0,
            }),
            _ => Err(Error::invalid("exact MMSE needs a zero-mean Gaussian i.i.d. prior")),
        },
    }
}

/// Denoiser-module state update `v = (1/mmse − 1/τ)⁻¹`.
fn g_of(tau: f64, mmse: f64, cap: f64) -> f64 {
    if tau <= 0.0 || mmse <= 0.0 {
        return 0.0;
    }
    let prec = 1.0 / mmse - 1.0 / tau;
    if prec <= 1.0 / cap {
        cap
    } else {
        1.0 / prec
    }
}

/// Runs the scalar recursion from `v0` to its fixed point.
pub fn se_recursion(
    n: usize,
    s: usize,
    sigma2: f64,
    prior: &SePrior,
    v0: f64,
    cfg: &SeConfig,
) -> Result<SeTrace> {
    if s == 0 || s > n || !(v0 >= 0.0) || !(sigma2 >= 0.0) {
        return Err(Error::invalid("state evolution needs 0 < s <= n, v0 >= 0, sigma2 >= 0"));
    }
    let cap = 1e6 * prior.prior_variance().max(f64::MIN_POSITIVE);
    let mut t = SeTrace {
        sigma2,
        ratio: n as f64 / s as f64,
        tau: vec![],
        v: vec![],
        mmse: vec![],
        mmse_stderr: vec![],
        tau_star: 0.0,
        v_star: v0,
        mmse_star: 0.0,
        iterations: 0,
        flagged: false,
    };
    let mut v_prev = v0;
    for i in 0..cfg.max_iter.max(1) {
        let tau = se_f(v_prev, n, s, sigma2);
        let mut est = evaluate(tau, prior, &cfg.oracle, 1)?;
        let mut v = g_of(tau, est.value, cap);
        if i > 0 {
            let se_v = |e: &McEstimate, v: f64| if e.value > 0.0 { e.stderr * (v / e.value).powi(2) } else { 0.0 };
            if v > v_prev + 3.0 * se_v(&est, v) && matches!(cfg.oracle, MmseOracle::MonteCarlo { .. }) {
                est = evaluate(tau, prior, &cfg.oracle, 4)?;
                v = g_of(tau, est.value, cap);
                if v > v_prev + 3.0 * se_v(&est, v) {
                    t.flagged = true;
                }
            }
        }
        t.tau.push(tau);
        t.v.push(v);
        t.mmse.push(est.value);
        t.mmse_stderr.push(est.stderr);
        let prev_tau = if i > 0 { Some(t.tau[i - 1]) } else { None };
        v_prev = v;
        if tau == 0.0 {
            break;
        }
        if let Some(p) = prev_tau {
            if (tau - p).abs() < cfg.tol * p {
                break;
            }
        }
    }
    t.iterations = t.tau.len();
    t.tau_star = *t.tau.last().unwrap_or(&0.0);
    t.v_star = *t.v.last().unwrap_or(&v0);
    t.mmse_star = *t.mmse.last().unwrap_or(&0.0);
    Ok(t)
}

/// `(τ, g(τ), stderr of g)` along a grid, sharing random numbers.
pub fn g_curve(taus: &[f64], prior: &SePrior, samples: usize, seed: u64) -> Vec<(f64, f64, f64)> {
    let rng = SeededRng::new(seed).spawn("se-mmse");
    let cap = 1e6 * prior.prior_variance().max(f64::MIN_POSITIVE);
    taus.iter()
        .map(|&tau| {
            let e = mmse_mc(tau, prior, samples, &rng);
            let g = g_of(tau, e.value, cap);
            let se = if e.value > 0.0 { e.stderr * (g / e.value).powi(2) } else { 0.0 };
            (tau, g, se)
        })
        .collect()
}

/// Violations found by a monotonicity check. `hard` entries exceed the
/// Monte Carlo tolerance; `soft` ones are within it.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TheoremReport {
    pub checks: usize,
    pub soft: Vec<String>,
    pub hard: Vec<String>,
}

impl TheoremReport {
    pub fn passed(&self) -> bool {
        self.hard.is_empty()
    }

    fn compare(&mut self, what: String, later: f64, earlier: f64, slack: f64) {
        self.checks += 1;
        if later > earlier + slack {
            self.hard.push(format!("{what}: {later} > {earlier} (slack {slack})"));
        } else if later > earlier {
            self.soft.push(format!("{what}: {later} > {earlier}"));
        }
    }
}

/// Lower bounds and within-round monotonicity of a trace, allowing three
/// standard errors of Monte Carlo noise.
pub fn check_theorem1(trace: &SeTrace) -> TheoremReport {
    let mut r = TheoremReport::default();
    let slope = trace.ratio - 1.0;
    for i in 0..trace.tau.len() {
        r.checks += 1;
        if trace.tau[i] < trace.sigma2 * (1.0 - 1e-12) {
            r.hard.push(format!("tau[{i}] = {} below sigma2 = {}", trace.tau[i], trace.sigma2));
        }
        if trace.v[i] < 0.0 {
            r.hard.push(format!("v[{i}] negative"));
        }
        if i == 0 {
            continue;
        }
        let sv = 3.0 * (trace.v_stderr(i) + trace.v_stderr(i - 1)) + 1e-12 * trace.v[i - 1];
        r.compare(format!("v[{i}]"), trace.v[i], trace.v[i - 1], sv);
        let st = if i >= 2 {
            3.0 * slope * (trace.v_stderr(i - 1) + trace.v_stderr(i - 2))
        } else {
            3.0 * slope * trace.v_stderr(i - 1)
        } + 1e-12 * trace.tau[i - 1];
        r.compare(format!("tau[{i}]"), trace.tau[i], trace.tau[i - 1], st);
    }
    r
}

/// Fixed points non-increasing across rounds.
pub fn check_theorem2(traces: &[SeTrace]) -> TheoremReport {
    let mut r = TheoremReport::default();
    for t in 1..traces.len() {
        let (a, b) = (&traces[t - 1], &traces[t]);
        let (ia, ib) = (a.iterations.saturating_sub(1), b.iterations.saturating_sub(1));
        let sv = 3.0 * (a.v_stderr(ia) + b.v_stderr(ib)) + 1e-12 * a.v_star;
        r.compare(format!("v* round {}", t + 1), b.v_star, a.v_star, sv);
        r.compare(
            format!("tau* round {}", t + 1),
            b.tau_star,
            a.tau_star,
            (a.ratio - 1.0) * sv + 1e-12 * a.tau_star,
        );
    }
    r
}

/// State evolution over `rounds` rounds of a scalar Markov chain population.
///
/// Each round's prior messages are produced from the previous round's fixed
/// point by the same message functions the recovery uses.
#[allow(clippy::too_many_arguments)]
pub fn se_population(
    params: &ChainParams,
    population: usize,
    rounds: usize,
    n: usize,
    s: usize,
    sigma2: f64,
    cfg: &SeConfig,
    seed: u64,
) -> Result<Vec<SeTrace>> {
    params.validate()?;
    if population == 0 {
        return Err(Error::invalid("population must be nonempty"));
    }
    let root = SeededRng::new(seed);
    let mut chain = root.spawn("se-chain");
    let mut support: Vec<bool> = (0..population).map(|_| chain.uniform() < params.lambda).collect();
    let mut amp: Vec<f64> = (0..population).map(|_| params.gamma.sqrt() * chain.normal()).collect();
    let mut pi = vec![params.lambda; population];
    let mut mean = vec![0.0; population];
    let mut var = vec![params.gamma; population];
    let mut traces = Vec::with_capacity(rounds);

    for t in 0..rounds {
        if t > 0 {
            let q = params.innovation_var().sqrt();
            for k in 0..population {
                let stay = if support[k] { 1.0 - params.p01 } else { params.p10 };
                support[k] = chain.uniform() < stay;
                amp[k] = (1.0 - params.beta) * amp[k] + q * chain.normal();
            }
        }
        let x: Vec<f64> = support.iter().zip(&amp).map(|(&s, &r)| if s { r } else { 0.0 }).collect();
        let prior = SePrior::Population(
            (0..population)
                .map(|k| PopulationEntry {
                    x: x[k],
                    pi: pi[k],
                    mean: mean[k],
                    var: var[k],
                })
                .collect(),
        );
        let round_cfg = match cfg.oracle {
            MmseOracle::MonteCarlo { samples, seed } => SeConfig {
                oracle: MmseOracle::MonteCarlo {
                    samples,
                    seed: seed.wrapping_add(t as u64),
                },
                ..*cfg
            },
            MmseOracle::ExactGaussian => *cfg,
        };
        let trace = se_recursion(n, s, sigma2, &prior, prior.prior_variance(), &round_cfg)?;

        let tau = trace.tau_star.max(f64::MIN_POSITIVE);
        let mut obs_rng = root.spawn_indexed("se-obs", t as u64);
        let ext = ExtrinsicGaussian {
            mean: x.iter().map(|v| v + tau.sqrt() * obs_rng.normal()).collect(),
            var: tau,
        };
        let lambda_delta = message_delta_to_s(&ext, &mean, &var)?;
        let taylor = message_delta_to_r(&ext, &pi, params.epsilon)?;
        let next_pi = forward_support(&lambda_delta, &pi, params)?;
        let (next_mean, next_var) = forward_amplitude(&taylor, &mean, &var, params)?;
        pi = next_pi;
        mean = next_mean;
        var = next_var;
        traces.push(trace);
    }
    Ok(traces)
}

/// One row of the state-evolution / bound CSV.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SeRow {
    pub round: usize,
    pub i: Option<usize>,
    pub tau: Option<f64>,
    pub v: Option<f64>,
    pub tau_star: Option<f64>,
    pub v_star: Option<f64>,
    pub kappa: Option<f64>,
    pub bound: Option<f64>,
    pub empirical_gap: Option<f64>,
}

impl SeRow {
    /// Rows for every iteration of every round's trace.
    pub fn from_traces(traces: &[SeTrace]) -> Vec<SeRow> {
        let mut rows = Vec::new();
        for (t, tr) in traces.iter().enumerate() {
            for i in 0..tr.tau.len() {
                rows.push(SeRow {
                    round: t + 1,
                    i: Some(i + 1),
                    tau: Some(tr.tau[i]),
                    v: Some(tr.v[i]),
                    tau_star: Some(tr.tau_star),
                    v_star: Some(tr.v_star),
                    ..SeRow::default()
                });
            }
        }
        rows
    }
}

pub fn write_se_csv(path: &Path, rows: &[SeRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    w.write_record(["round", "i", "tau", "v", "tau_star", "v_star", "kappa", "bound", "empirical_gap"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se_f_cases() {
        assert_eq!(se_f(0.0, 100, 10, 0.01), 0.01);
        assert_eq!(se_f(0.7, 64, 64, 0.2), 0.2);
        assert!((se_f(0.3, 100, 10, 0.01) - 2.71).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mmse_within_three_standard_errors() {
        let prior = SePrior::Iid { pi: 1.0, mean: 0.0, var: 2.0 };
        let rng = SeededRng::new(3);
        for tau in [0.05, 0.5, 4.0] {
            let e = mmse_mc(tau, &prior, 100_000, &rng);
            let exact = 2.0 * tau / (2.0 + tau);
            assert!((e.value - exact).abs() < 3.0 * e.stderr, "{} vs {exact}", e.value);
        }
    }

    #[test]
    fn mmse_limits() {
        let prior = SePrior::Iid { pi: 0.2, mean: 0.0, var: 1.0 };
        let rng = SeededRng::new(4);
        assert!(mmse_mc(1e-10, &prior, 20_000, &rng).value < 1e-8);
        let far = mmse_mc(1e8, &prior, 100_000, &rng);
        assert!((far.value - 0.2).abs() < 0.01);
    }

    #[test]
    fn full_noiseless_recursion_stops_at_zero() {
        let prior = SePrior::Iid { pi: 0.2, mean: 0.0, var: 1.0 };
        let t = se_recursion(64, 64, 0.0, &prior, 0.2, &SeConfig::default()).unwrap();
        assert_eq!((t.tau_star, t.v_star, t.iterations), (0.0, 0.0, 1));
    }

    #[test]
    fn exact_gaussian_recursion_has_no_violations() {
        let prior = SePrior::Iid { pi: 1.0, mean: 0.0, var: 1.0 };
        let cfg = SeConfig {
            oracle: MmseOracle::ExactGaussian,
            ..SeConfig::default()
        };
        let t = se_recursion(100, 40, 0.05, &prior, 1.0, &cfg).unwrap();
        assert!(check_theorem1(&t).hard.is_empty());
        // a Gaussian denoiser returns the prior variance as its extrinsic
        assert!(t.v.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let tau = (100.0 / 40.0 - 1.0) * 1.0 + 0.05;
        assert!((t.tau_star - tau).abs() < 1e-12);
    }

    #[test]
    fn bg_fixed_point_respects_noise_floor() {
        let prior = SePrior::Iid { pi: 0.2, mean: 0.0, var: 1.0 };
        let cfg = SeConfig {
            oracle: MmseOracle::MonteCarlo { samples: 20_000, seed: 1 },
            ..SeConfig::default()
        };
        let t = se_recursion(100, 10, 0.01, &prior, 0.2, &cfg).unwrap();
        assert!(t.tau_star >= 0.01);
        assert!(check_theorem1(&t).passed());
    }

    #[test]
    fn increasing_trace_is_reported() {
        let t = SeTrace {
            sigma2: 0.1,
            ratio: 2.0,
            tau: vec![0.5, 0.6],
            v: vec![0.4, 0.5],
            mmse: vec![0.2, 0.25],
            mmse_stderr: vec![0.0, 0.0],
            tau_star: 0.6,
            v_star: 0.5,
            mmse_star: 0.25,
            iterations: 2,
            flagged: false,
        };
        let r = check_theorem1(&t);
        assert_eq!(r.hard.len(), 2);
        assert!(check_theorem2(&[t]).passed());
    }

    #[test]
    fn csv_has_stable_header() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("se.csv");
        write_se_csv(&p, &[]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.trim(), "round,i,tau,v,tau_star,v_star,kappa,bound,empirical_gap");
    }
}
