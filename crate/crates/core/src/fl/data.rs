use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Stream};

/// A labeled sample matrix (row-major features).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub features: Vec<f64>,
    pub n_features: usize,
    pub labels: Vec<usize>,
}

impl Samples {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    fn gather(&self, rows: &[usize]) -> Samples {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Samples {
            features,
            n_features: self.n_features,
            labels,
        }
    }
}

/// The slice of data held by one device.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetShard {
    pub owner: usize,
    pub data: Samples,
}

impl DatasetShard {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn distinct_labels(&self) -> Vec<usize> {
        let mut l = self.data.labels.clone();
        l.sort_unstable();
        l.dedup();
        l
    }

    /// Deterministic 80/20 train/test split. The training side always keeps at
    /// least one row.
    pub fn split_train_test(&self, run_seed: u64) -> (DatasetShard, DatasetShard) {
        let n = self.len();
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut seed::derive_rng(run_seed, Stream::Split, &[self.owner as u64]));
        let n_train = (n * 4).div_ceil(5);
        let (train, test) = rows.split_at(n_train);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        (
            DatasetShard {
                owner: self.owner,
                data: self.data.gather(&train),
            },
            DatasetShard {
                owner: self.owner,
                data: self.data.gather(&test),
            },
        )
    }
}

/// Gaussian-blob classification data: one random mean per class at distance
/// `class_sep` from the origin, isotropic noise with `noise_std`.
///
/// With `min_feature_scale < 1` every sample is then stretched by a fixed
/// diagonal map whose entries fall geometrically from 1 to
/// `min_feature_scale`. That leaves the classes exactly as separable but makes
/// gradient descent ill-conditioned, so learning takes many more steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub class_sep: f64,
    pub noise_std: f64,
    #[serde(default = "unit_scale")]
    pub min_feature_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl SyntheticSpec {
    pub fn generate(&self, n_samples: usize, seed: u64) -> Result<Samples> {
        if self.n_features == 0 || self.n_classes < 2 {
            return Err(Error::invalid("synthetic data needs >=1 feature and >=2 classes"));
        }
        if !(self.noise_std >= 0.0 && self.class_sep.is_finite()) {
            return Err(Error::invalid("noise_std must be >= 0 and class_sep finite"));
        }
        if !(self.min_feature_scale > 0.0 && self.min_feature_scale <= 1.0) {
            return Err(Error::invalid("min_feature_scale must be in (0, 1]"));
        }
        let scale: Vec<f64> = (0..self.n_features)
            .map(|j| {
                let t = if self.n_features > 1 { j as f64 / (self.n_features - 1) as f64 } else { 0.0 };
                self.min_feature_scale.powf(t)
            })
            .collect();
        let mut rng = seed::derive_rng(seed, Stream::Dataset, &[]);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let means: Vec<Vec<f64>> = (0..self.n_classes)
            .map(|_| {
                let v: Vec<f64> = (0..self.n_features).map(|_| unit.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
                v.into_iter().map(|x| x / norm * self.class_sep).collect()
            })
            .collect();
        let mut features = Vec::with_capacity(n_samples * self.n_features);
        let mut labels = Vec::with_capacity(n_samples);
        for i in 0..n_samples {
            let c = i % self.n_classes;
            labels.push(c);
            features.extend(
                means[c]
                    .iter()
                    .zip(&scale)
                    .map(|(m, s)| s * (m + self.noise_std * unit.sample(&mut rng))),
            );
        }
        Ok(Samples {
            features,
            n_features: self.n_features,
            labels,
        })
    }
}

/// Label-skew partition.
///
/// The samples are grouped by label and cut into `n_devices *
/// shards_per_device` single-label shards (each label gets a number of shards
/// proportional to its frequency, at least one). Shards are shuffled and dealt
/// `shards_per_device` at a time, so a device sees at most that many labels.
/// When there are fewer shards than labels the single-label property cannot
/// hold; the label-sorted sample list is then cut into contiguous shards.
pub fn partition_noniid(
    samples: &Samples,
    n_devices: usize,
    shards_per_device: usize,
    seed: u64,
) -> Result<Vec<DatasetShard>> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if n_devices == 0 || shards_per_device == 0 {
        return Err(Error::invalid("n_devices and shards_per_device must be >= 1"));
    }
    let n_shards = n_devices * shards_per_device;
    if samples.len() < n_shards {
        return Err(Error::InsufficientSamples {
            samples: samples.len(),
            shards: n_shards,
        });
    }

    let mut rng = seed::derive_rng(seed, Stream::Partition, &[]);
    let n_labels = samples.labels.iter().max().map_or(0, |m| m + 1);
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); n_labels];
    for (i, &l) in samples.labels.iter().enumerate() {
        by_label[l].push(i);
    }
    for rows in &mut by_label {
        rows.shuffle(&mut rng);
    }
    let present: Vec<usize> = (0..n_labels).filter(|&l| !by_label[l].is_empty()).collect();

    let mut shards: Vec<Vec<usize>> = if n_shards >= present.len() {
        let counts: Vec<usize> = present.iter().map(|&l| by_label[l].len()).collect();
        let alloc = allocate_shards(&counts, n_shards);
        present
            .iter()
            .zip(alloc)
            .flat_map(|(&l, k)| chunk_evenly(&by_label[l], k))
            .collect()
    } else {
        let sorted: Vec<usize> = present.iter().flat_map(|&l| by_label[l].iter().copied()).collect();
        chunk_evenly(&sorted, n_shards)
    };
    shards.shuffle(&mut rng);

    Ok((0..n_devices)
        .map(|d| {
            let rows: Vec<usize> = shards[d * shards_per_device..(d + 1) * shards_per_device]
                .iter()
                .flatten()
                .copied()
                .collect();
            DatasetShard {
                owner: d,
                data: samples.gather(&rows),
            }
        })
        .collect())
}

/// Split `total` shards across labels proportionally to `counts`, each label
/// getting at least one and at most `counts[l]` shards.
fn allocate_shards(counts: &[usize], total: usize) -> Vec<usize> {
    let n: usize = counts.iter().sum();
    let quota: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 * total as f64 / n as f64)
        .collect();
    let mut alloc: Vec<usize> = quota
        .iter()
        .zip(counts)
        .map(|(q, &c)| (q.floor() as usize).clamp(1, c))
        .collect();
    let mut assigned: usize = alloc.iter().sum();
    while assigned < total {
        // largest remaining quota among labels with spare samples; ties -> lower label
        let l = (0..counts.len())
            .filter(|&l| alloc[l] < counts[l])
            .max_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .partial_cmp(&(quota[b] - alloc[b] as f64))
                    .unwrap()
                    .then(b.cmp(&a))
            })
            .expect("total shards never exceed sample count");
        alloc[l] += 1;
        assigned += 1;
    }
    while assigned > total {
        let l = (0..counts.len())
            .filter(|&l| alloc[l] > 1)
            .min_by(|&a, &b| {
                (quota[a] - alloc[a] as f64)
                    .partial_cmp(&(quota[b] - alloc[b] as f64))
                    .unwrap()
                    .then(a.cmp(&b))
            })
            .expect("at least as many shards as labels");
        alloc[l] -= 1;
        assigned -= 1;
    }
    alloc
}

fn chunk_evenly(rows: &[usize], k: usize) -> Vec<Vec<usize>> {
    let n = rows.len();
    (0..k)
        .map(|i| rows[i * n / k..(i + 1) * n / k].to_vec())
        .collect()
}
