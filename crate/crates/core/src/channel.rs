//! Gaussian multiple-access channel and server-side rescaling.

use crate::edge::PowerScaling;
use crate::error::{check_len, Error, Result};
use crate::rng::SeededRng;

/// Rescaled server observation `y = A x + n`, `n ~ N(0, sigma2 I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MacObservation {
    pub y: Vec<f64>,
    pub sigma2: f64,
    pub round: usize,
}

/// Superposes the device signals and adds `N(0, sigma_e²)` noise per sub-channel.
pub fn transmit(signals: &[Vec<f64>], sigma_e: f64, rng: &mut SeededRng) -> Result<Vec<f64>> {
    let s = signals
        .first()
        .map(|v| v.len())
        .ok_or_else(|| Error::invalid("no device signals"))?;
    let mut out = vec![0.0; s];
    for sig in signals {
        check_len(s, sig.len())?;
        for (o, v) in out.iter_mut().zip(sig) {
            *o += v;
        }
    }
    if sigma_e > 0.0 {
        for o in out.iter_mut() {
            *o += sigma_e * rng.normal();
        }
    }
    Ok(out)
}

/// Normalizes the superposed signal by `K / (M Σ_m √α K_m)` so its noiseless
/// part is `A x` with `x = Σ K_m g_sp,m / Σ K_m`.
pub fn rescale(
    y_raw: &[f64],
    scaling: &PowerScaling,
    sigma_e: f64,
    counts: &[usize],
    round: usize,
) -> Result<MacObservation> {
    check_len(scaling.weights.len(), counts.len())?;
    if !(scaling.alpha > 0.0) {
        return Err(Error::invalid("power coefficient must be positive"));
    }
    let k: usize = counts.iter().sum();
    let m = counts.len() as f64;
    let denom = m * counts.iter().map(|&km| scaling.alpha.sqrt() * km as f64).sum::<f64>();
    if !(denom > 0.0) || k == 0 {
        return Err(Error::invalid("rescale denominator is zero"));
    }
    let factor = k as f64 / denom;
    let sigma = factor * sigma_e;
    Ok(MacObservation {
        y: y_raw.iter().map(|v| v * factor).collect(),
        sigma2: sigma * sigma,
        round,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::edge::{compress, compress_and_scale, PowerScaling};
    use crate::sensing::SensingOperator;

    #[test]
    fn noiseless_single_device_passes_through() {
        let sig = vec![vec![1.0, -2.0, 0.5]];
        let out = transmit(&sig, 0.0, &mut SeededRng::new(1)).unwrap();
        assert_eq!(out, sig[0]);
    }

    #[test]
    fn pure_noise_variance() {
        let s = 10_000;
        let out = transmit(&[vec![0.0; s]], 1.7, &mut SeededRng::new(2)).unwrap();
        let var = out.iter().map(|v| v * v).sum::<f64>() / s as f64;
        assert!((var / (1.7 * 1.7) - 1.0).abs() < 0.05);
    }

    #[test]
    fn additive_with_shared_noise_stream() {
        let a = vec![1.0, 2.0, 3.0];
        let b = vec![-0.5, 0.25, 4.0];
        let ab: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let ya = transmit(&[a.clone(), b.clone()], 0.3, &mut SeededRng::new(9)).unwrap();
        let yb = transmit(&[ab], 0.3, &mut SeededRng::new(9)).unwrap();
        for (p, q) in ya.iter().zip(&yb) {
            assert!((p - q).abs() < 1e-15);
        }
        assert!(transmit(&[a, vec![0.0; 2]], 0.0, &mut SeededRng::new(0)).is_err());
    }

    #[test]
    fn rescale_recovers_weighted_aggregate() {
        let op = SensingOperator::build(48, 20, &mut SeededRng::new(4)).unwrap();
        let mut rng = SeededRng::new(5);
        let g1: Vec<f64> = (0..48).map(|_| rng.normal()).collect();
        let g2: Vec<f64> = (0..48).map(|_| rng.normal()).collect();
        let counts = [100usize, 300];
        let scaling = PowerScaling::from_counts(0.37, &counts);
        let sigs = vec![
            compress_and_scale(&g1, &op, &scaling, 0).unwrap(),
            compress_and_scale(&g2, &op, &scaling, 1).unwrap(),
        ];
        let raw = transmit(&sigs, 0.0, &mut SeededRng::new(0)).unwrap();
        let obs = rescale(&raw, &scaling, 0.0, &counts, 0).unwrap();
        let x: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| 0.25 * a + 0.75 * b).collect();
        let ax = compress(&x, &op).unwrap();
        for (p, q) in obs.y.iter().zip(&ax) {
            assert!((p - q).abs() < 1e-10);
        }
        assert_eq!(obs.sigma2, 0.0);
    }

    #[test]
    fn noise_shrinks_with_alpha() {
        let counts = [10usize, 10];
        let mut last = f64::INFINITY;
        for alpha in [0.1, 1.0, 10.0, 1e6] {
            let sc = PowerScaling::from_counts(alpha, &counts);
            let obs = rescale(&[0.0], &sc, 1.0, &counts, 0).unwrap();
            assert!(obs.sigma2 < last);
            last = obs.sigma2;
        }
        assert!(last < 1e-6);
        let zero = PowerScaling::from_counts(0.0, &counts);
        assert!(rescale(&[0.0], &zero, 1.0, &counts, 0).is_err());
    }
}
