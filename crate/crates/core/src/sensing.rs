//! Seeded partial-DCT compression operator `A = R F D`.
//!
//! `D` flips signs, `F` is the orthonormal DCT-II and `R` keeps `s` rows, so
//! `A Aᵀ = I_s`. A fresh operator is built every round from
//! [`operator_seed`](crate::rng::operator_seed).

use crate::dct::Dct;
use crate::error::{check_len, Error, Result};
use crate::rng::{operator_seed, SeededRng};

/// A linear map `R^N -> R^s` with an adjoint.
///
/// The turbo linear estimator assumes row-orthonormality (`A Aᵀ = I`).
pub trait LinearOperator {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Clone, Debug)]
pub struct SensingOperator {
    n: usize,
    s: usize,
    row_subset: Vec<usize>,
    signs: Vec<f64>,
    round_seed: u64,
    dct: Dct,
}

impl SensingOperator {
    /// Draws signs and a uniform `s`-subset of DCT rows from `rng`.
    pub fn build(n: usize, s: usize, rng: &mut SeededRng) -> Result<Self> {
        if s == 0 || s > n {
            return Err(Error::invalid(format!("operator needs 0 < s <= n, got s={s} n={n}")));
        }
        let signs = (0..n)
            .map(|_| if rng.next_bit() { 1.0 } else { -1.0 })
            .collect();
        // partial Fisher-Yates
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..s {
            let j = i + rng.below(n - i);
            idx.swap(i, j);
        }
        let mut row_subset = idx[..s].to_vec();
        row_subset.sort_unstable();
        Ok(SensingOperator {
            n,
            s,
            row_subset,
            signs,
            round_seed: rng.seed(),
            dct: Dct::new(n),
        })
    }

    /// Operator shared by all parties in round `round` of a run seeded with `seed`.
    pub fn for_round(n: usize, s: usize, seed: u64, round: u64) -> Result<Self> {
        let rs = operator_seed(seed, round);
        let mut rng = SeededRng::new(rs);
        Self::build(n, s, &mut rng)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn row_subset(&self) -> &[usize] {
        &self.row_subset
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn round_seed(&self) -> u64 {
        self.round_seed
    }

    /// `y = A x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let scrambled: Vec<f64> = x.iter().zip(&self.signs).map(|(v, s)| v * s).collect();
        let mut full = vec![0.0; self.n];
        self.dct.forward(&scrambled, &mut full);
        Ok(self.row_subset.iter().map(|&r| full[r]).collect())
    }

    /// `x = Aᵀ y`.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.s, y.len())?;
        let mut full = vec![0.0; self.n];
        for (&r, &v) in self.row_subset.iter().zip(y) {
            full[r] = v;
        }
        let mut out = vec![0.0; self.n];
        self.dct.inverse(&full, &mut out);
        for (o, s) in out.iter_mut().zip(&self.signs) {
            *o *= s;
        }
        Ok(out)
    }

    /// Dense `s × N` matrix, row-major. Intended for small-N checks.
    pub fn materialize(&self) -> Vec<Vec<f64>> {
        let mut cols = Vec::with_capacity(self.n);
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            cols.push(self.forward(&e).expect("dims match"));
            e[j] = 0.0;
        }
        (0..self.s)
            .map(|i| (0..self.n).map(|j| cols[j][i]).collect())
            .collect()
    }
}

impl LinearOperator for SensingOperator {
    fn input_dim(&self) -> usize {
        self.n
    }

    fn output_dim(&self) -> usize {
        self.s
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward(x)
    }

    fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.adjoint(y)
    }
}
