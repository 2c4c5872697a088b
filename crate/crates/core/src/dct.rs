//! Orthonormal type-II DCT and its inverse for arbitrary lengths.
//!
//! Uses the length-N FFT reordering (even samples forward, odd samples
//! reversed), so both directions cost one complex FFT of size N.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Dct {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `exp(-i pi k / 2N)`
    twiddle: Vec<Complex64>,
    scale0: f64,
    scale: f64,
}

impl fmt::Debug for Dct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dct").field("n", &self.n).finish()
    }
}

impl Dct {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "DCT length must be positive");
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let twiddle = (0..n)
            .map(|k| Complex64::from_polar(1.0, -PI * k as f64 / (2.0 * n as f64)))
            .collect();
        Dct {
            n,
            fwd,
            inv,
            twiddle,
            scale0: (1.0 / n as f64).sqrt(),
            scale: (2.0 / n as f64).sqrt(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `out = F x` with `F` the orthonormal DCT-II matrix.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(x.len(), n);
        assert_eq!(out.len(), n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let half = n.div_ceil(2);
        for i in 0..half {
            buf[i].re = x[2 * i];
        }
        for i in 0..n / 2 {
            buf[n - 1 - i].re = x[2 * i + 1];
        }
        self.fwd.process(&mut buf);
        for k in 0..n {
            let s = if k == 0 { self.scale0 } else { self.scale };
            out[k] = (self.twiddle[k] * buf[k]).re * s;
        }
    }

    /// `out = Fᵀ y` (the inverse, since `F` is orthogonal).
    pub fn inverse(&self, y: &[f64], out: &mut [f64]) {
        let n = self.n;
        assert_eq!(y.len(), n);
        assert_eq!(out.len(), n);
        let unscaled = |k: usize| {
            if k == 0 {
                y[0] / self.scale0
            } else {
                y[k] / self.scale
            }
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf[0] = Complex64::new(unscaled(0), 0.0);
        for k in 1..n {
            let z = Complex64::new(unscaled(k), -unscaled(n - k));
            buf[k] = self.twiddle[k].conj() * z;
        }
        self.inv.process(&mut buf);
        let norm = 1.0 / n as f64;
        let half = n.div_ceil(2);
        for i in 0..half {
            out[2 * i] = buf[i].re * norm;
        }
        for i in 0..n / 2 {
            out[2 * i + 1] = buf[n - 1 - i].re * norm;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dct_matrix(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|k| {
                let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                (0..n)
                    .map(|j| c * (PI * (2 * j + 1) as f64 * k as f64 / (2.0 * n as f64)).cos())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn matches_explicit_matrix() {
        for n in [1usize, 2, 3, 5, 8, 13, 16, 31, 64] {
            let dct = Dct::new(n);
            let m = dct_matrix(n);
            let x: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 - 4.5).collect();
            let mut y = vec![0.0; n];
            dct.forward(&x, &mut y);
            for k in 0..n {
                let expect: f64 = m[k].iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((y[k] - expect).abs() < 1e-10, "n={n} k={k}");
            }
            let mut back = vec![0.0; n];
            dct.inverse(&y, &mut back);
            for i in 0..n {
                assert!((back[i] - x[i]).abs() < 1e-10, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn inverse_is_transpose() {
        let n = 12;
        let dct = Dct::new(n);
        let m = dct_matrix(n);
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = vec![0.0; n];
        dct.inverse(&y, &mut x);
        for j in 0..n {
            let expect: f64 = (0..n).map(|k| m[k][j] * y[k]).sum();
            assert!((x[j] - expect).abs() < 1e-12);
        }
    }
}
