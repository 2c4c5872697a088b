use super::DatasetShard;
use crate::error::{Error, Result};
use crate::vector::DenseVector;

/// A differentiable local loss `L_m(θ)`.
pub trait Objective {
    fn dim(&self) -> usize;
    fn loss(&self, theta: &[f64]) -> f64;
    /// Writes `∇L_m(θ)` into `grad`.
    fn gradient(&self, theta: &[f64], grad: &mut [f64]);
    /// Number of samples backing the loss (`K_m`).
    fn weight(&self) -> usize;
}

/// Global parameters broadcast by the server.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    pub theta: DenseVector,
    pub round: usize,
}

impl ModelState {
    pub fn zeros(n: usize) -> Self {
        ModelState {
            theta: DenseVector::zeros(n),
            round: 0,
        }
    }
}

// Multinomial logistic regression with bias. Parameter layout: class-major
// weights `W[c][j]` at `c * n_features + j`, then the `n_classes` biases.
impl DatasetShard {
    fn logits(&self, theta: &[f64], row: &[f64], out: &mut [f64]) {
        let f = self.n_features;
        let bias = &theta[self.n_classes * f..];
        for (c, o) in out.iter_mut().enumerate() {
            let w = &theta[c * f..(c + 1) * f];
            *o = bias[c] + w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

fn softmax_in_place(z: &mut [f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
    max + sum.ln()
}

impl Objective for DatasetShard {
    fn dim(&self) -> usize {
        self.model_dim()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let mut z = vec![0.0; self.n_classes];
        let mut total = 0.0;
        for i in 0..self.k_m() {
            self.logits(theta, self.row(i), &mut z);
            let y = z[self.labels[i]];
            let lse = softmax_in_place(&mut z);
            total += lse - y;
        }
        total / self.k_m().max(1) as f64
    }

    fn gradient(&self, theta: &[f64], grad: &mut [f64]) {
        let (f, nc) = (self.n_features, self.n_classes);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut z = vec![0.0; nc];
        for i in 0..self.k_m() {
            let row = self.row(i);
            self.logits(theta, row, &mut z);
            softmax_in_place(&mut z);
            z[self.labels[i]] -= 1.0;
            for c in 0..nc {
                let d = z[c];
                if d != 0.0 {
                    for (g, x) in grad[c * f..(c + 1) * f].iter_mut().zip(row) {
                        *g += d * x;
                    }
                }
                grad[nc * f + c] += d;
            }
        }
        let inv = 1.0 / self.k_m().max(1) as f64;
        grad.iter_mut().for_each(|g| *g *= inv);
    }

    fn weight(&self) -> usize {
        self.k_m()
    }
}

/// `L(θ) = ½ Σ_j h_j (θ_j − b_j)²` with positive diagonal curvature `h`.
#[derive(Clone, Debug)]
pub struct QuadraticObjective {
    pub curvature: Vec<f64>,
    pub center: Vec<f64>,
    pub samples: usize,
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * theta
            .iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((t, b), h)| h * (t - b) * (t - b))
            .sum::<f64>()
    }

    fn gradient(&self, theta: &[f64], grad: &mut [f64]) {
        for (((g, t), b), h) in grad.iter_mut().zip(theta).zip(&self.center).zip(&self.curvature) {
            *g = h * (t - b);
        }
    }

    fn weight(&self) -> usize {
        self.samples
    }
}

/// Test accuracy (argmax rule) and mean cross-entropy of `model` on `test`.
pub fn evaluate(model: &ModelState, test: &DatasetShard) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    if model.theta.len() != test.model_dim() {
        return Err(Error::DimensionMismatch {
            expected: test.model_dim(),
            actual: model.theta.len(),
        });
    }
    let theta = model.theta.as_slice();
    let mut z = vec![0.0; test.n_classes];
    let mut correct = 0usize;
    let mut loss = 0.0;
    for i in 0..test.k_m() {
        test.logits(theta, test.row(i), &mut z);
        // first maximum wins on ties
        let mut best = 0;
        for c in 1..z.len() {
            if z[c] > z[best] {
                best = c;
            }
        }
        if best == test.labels[i] {
            correct += 1;
        }
        let y = z[test.labels[i]];
        loss += softmax_in_place(&mut z) - y;
    }
    let n = test.k_m() as f64;
    Ok((correct as f64 / n, loss / n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn small_shard() -> DatasetShard {
        let mut rng = SeededRng::new(12);
        let (f, c, n) = (2, 3, 6);
        let features = (0..n * f).map(|_| rng.normal()).collect();
        let labels = (0..n).map(|i| i % c).collect();
        DatasetShard::new(features, labels, f, c).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let shard = small_shard();
        let mut rng = SeededRng::new(1);
        let theta: Vec<f64> = (0..shard.dim()).map(|_| 0.3 * rng.normal()).collect();
        let mut g = vec![0.0; shard.dim()];
        shard.gradient(&theta, &mut g);
        let h = 1e-5;
        for j in 0..theta.len() {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += h;
            tm[j] -= h;
            let fd = (shard.loss(&tp) - shard.loss(&tm)) / (2.0 * h);
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3), "j={j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn ten_parameter_instance() {
        // 4 features, 2 classes: 8 weights + 2 biases
        let mut rng = SeededRng::new(33);
        let features = (0..5 * 4).map(|_| rng.normal()).collect();
        let shard = DatasetShard::new(features, vec![0, 1, 1, 0, 1], 4, 2).unwrap();
        assert_eq!(shard.dim(), 10);
        let theta: Vec<f64> = (0..10).map(|_| rng.normal()).collect();
        let mut g = vec![0.0; 10];
        shard.gradient(&theta, &mut g);
        for j in 0..10 {
            let mut tp = theta.clone();
            let mut tm = theta.clone();
            tp[j] += 1e-5;
            tm[j] -= 1e-5;
            let fd = (shard.loss(&tp) - shard.loss(&tm)) / 2e-5;
            assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1e-3));
        }
    }

    #[test]
    fn evaluate_matches_rescoring() {
        let shard = small_shard();
        let mut rng = SeededRng::new(4);
        let theta: Vec<f64> = (0..shard.dim()).map(|_| rng.normal()).collect();
        let model = ModelState {
            theta: DenseVector::new(theta.clone()).unwrap(),
            round: 0,
        };
        let (acc, loss) = evaluate(&model, &shard).unwrap();
        // independent scalar re-scoring
        let (f, c) = (shard.n_features, shard.n_classes);
        let mut hits = 0;
        for i in 0..shard.k_m() {
            let x = shard.row(i);
            let scores: Vec<f64> = (0..c)
                .map(|k| theta[c * f + k] + (0..f).map(|j| theta[k * f + j] * x[j]).sum::<f64>())
                .collect();
            let arg = scores
                .iter()
                .enumerate()
                .fold(0, |b, (k, &s)| if s > scores[b] { k } else { b });
            if arg == shard.labels[i] {
                hits += 1;
            }
        }
        assert_eq!(acc, hits as f64 / shard.k_m() as f64);
        assert!((loss - shard.loss(&theta)).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_empty() {
        let empty = DatasetShard::new(vec![], vec![], 2, 2).unwrap();
        assert!(evaluate(&ModelState::zeros(6), &empty).is_err());
    }
}
