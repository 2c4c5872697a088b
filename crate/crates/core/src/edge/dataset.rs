use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Labelled samples held by one device (or a test split).
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetShard {
    /// Row-major `k_m × n_features`.
    pub features: Vec<f64>,
    pub labels: Vec<usize>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl DatasetShard {
    pub fn new(
        features: Vec<f64>,
        labels: Vec<usize>,
        n_features: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if n_features == 0 || n_classes == 0 {
            return Err(Error::invalid("shard needs positive feature and class counts"));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                expected: labels.len() * n_features,
                actual: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::invalid(format!("label {bad} outside [0, {n_classes})")));
        }
        Ok(DatasetShard {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn k_m(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Model dimension of a multinomial logistic regression with bias.
    pub fn model_dim(&self) -> usize {
        self.n_features * self.n_classes + self.n_classes
    }

    pub fn select(&self, idx: &[usize]) -> DatasetShard {
        let mut features = Vec::with_capacity(idx.len() * self.n_features);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        DatasetShard {
            features,
            labels,
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }

    pub fn class_set(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n_classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        (0..self.n_classes).filter(|&c| seen[c]).collect()
    }
}

/// Record of which samples went to which device, logged for reproducibility.
#[derive(Clone, Debug, Serialize)]
pub struct ShardManifest {
    pub device: usize,
    pub k_m: usize,
    pub classes: Vec<usize>,
    pub indices: Vec<usize>,
}

/// Splits `data` into `m_devices` shards of `k_m` samples each, without
/// replacement. With `chi = Some(c)` every device first draws `c` classes
/// uniformly and then samples uniformly among the unused samples of those
/// classes.
pub fn partition(
    data: &DatasetShard,
    m_devices: usize,
    k_m: usize,
    chi: Option<usize>,
    rng: &mut SeededRng,
) -> Result<(Vec<DatasetShard>, Vec<ShardManifest>)> {
    if m_devices == 0 || k_m == 0 {
        return Err(Error::Partition("need at least one device and one sample".into()));
    }
    if m_devices * k_m > data.k_m() {
        return Err(Error::Partition(format!(
            "{m_devices} x {k_m} samples requested from {}",
            data.k_m()
        )));
    }
    let mut shards = Vec::with_capacity(m_devices);
    let mut manifests = Vec::with_capacity(m_devices);
    match chi {
        None => {
            let mut order: Vec<usize> = (0..data.k_m()).collect();
            shuffle(&mut order, rng);
            for m in 0..m_devices {
                let idx = order[m * k_m..(m + 1) * k_m].to_vec();
                let shard = data.select(&idx);
                manifests.push(ShardManifest {
                    device: m,
                    k_m,
                    classes: shard.class_set(),
                    indices: idx,
                });
                shards.push(shard);
            }
        }
        Some(chi) => {
            if chi == 0 || chi > data.n_classes {
                return Err(Error::Partition(format!(
                    "chi={chi} must lie in [1, {}]",
                    data.n_classes
                )));
            }
            let mut pools: Vec<Vec<usize>> = vec![Vec::new(); data.n_classes];
            for (i, &l) in data.labels.iter().enumerate() {
                pools[l].push(i);
            }
            for pool in pools.iter_mut() {
                shuffle(pool, rng);
            }
            for m in 0..m_devices {
                let mut classes: Vec<usize> = (0..data.n_classes).collect();
                shuffle(&mut classes, rng);
                classes.truncate(chi);
                classes.sort_unstable();
                let available: usize = classes.iter().map(|&c| pools[c].len()).sum();
                if available < k_m {
                    return Err(Error::Partition(format!(
                        "device {m}: classes {classes:?} hold only {available} unused samples, need {k_m}"
                    )));
                }
                let mut idx = Vec::with_capacity(k_m);
                for _ in 0..k_m {
                    // uniform over the remaining samples of the chosen classes
                    let remaining: usize = classes.iter().map(|&c| pools[c].len()).sum();
                    let mut pick = rng.below(remaining);
                    for &c in &classes {
                        if pick < pools[c].len() {
                            idx.push(pools[c].swap_remove(pick));
                            break;
                        }
                        pick -= pools[c].len();
                    }
                }
                let shard = data.select(&idx);
                manifests.push(ShardManifest {
                    device: m,
                    k_m,
                    classes,
                    indices: idx,
                });
                shards.push(shard);
            }
        }
    }
    Ok((shards, manifests))
}

fn shuffle<T>(v: &mut [T], rng: &mut SeededRng) {
    for i in (1..v.len()).rev() {
        let j = rng.below(i + 1);
        v.swap(i, j);
    }
}

/// Gaussian class-cluster data for a `n_classes`-way classification task.
///
/// Class means are drawn once from `N(0, separation² / n_features)` per
/// coordinate; samples add unit-variance isotropic noise. Returns
/// `(train, test)` drawn from the same distribution.
pub fn synthetic_classification(
    n_train: usize,
    n_test: usize,
    n_features: usize,
    n_classes: usize,
    separation: f64,
    rng: &mut SeededRng,
) -> Result<(DatasetShard, DatasetShard)> {
    let mut mean_rng = rng.spawn("class-means");
    let scale = separation / (n_features as f64).sqrt();
    let means: Vec<f64> = (0..n_classes * n_features)
        .map(|_| scale * mean_rng.normal())
        .collect();
    let draw = |n: usize, rng: &mut SeededRng| {
        let mut features = Vec::with_capacity(n * n_features);
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let c = rng.below(n_classes);
            labels.push(c);
            let mu = &means[c * n_features..(c + 1) * n_features];
            features.extend(mu.iter().map(|m| m + rng.normal()));
        }
        DatasetShard::new(features, labels, n_features, n_classes)
    };
    let train = draw(n_train, &mut rng.spawn("train"))?;
    let test = draw(n_test, &mut rng.spawn("test"))?;
    Ok((train, test))
}
