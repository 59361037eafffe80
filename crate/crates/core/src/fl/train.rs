use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::data::DatasetShard;
use super::model::{ModelSpec, ModelWeights};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Local epochs per training call (E).
    pub local_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Weight updates by sample count when aggregating; `false` gives the plain
    /// mean.
    pub weighted_aggregation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            local_epochs: 1,
            batch_size: 10,
            learning_rate: 0.05,
            weighted_aggregation: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.local_epochs == 0 {
            return Err(Error::field("train.local_epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::field("train.batch_size", "must be >= 1"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::field("train.learning_rate", "must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Run `cfg.local_epochs` epochs of mini-batch SGD on `shard`, starting from `w`.
///
/// Rows are reshuffled every epoch from a stream seeded by `seed`; the last
/// batch of an epoch may be short. Returns a new vector, `w` is untouched.
pub fn local_train(
    spec: &ModelSpec,
    w: &ModelWeights,
    shard: &DatasetShard,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<ModelWeights> {
    if shard.is_empty() {
        return Err(Error::Empty("training shard"));
    }
    w.ensure_finite(Some(shard.owner))?;
    let mut out = w.clone();
    if cfg.learning_rate == 0.0 {
        return Ok(out);
    }

    let mut rng = seed::rng_from(seed);
    let mut rows: Vec<usize> = (0..shard.len()).collect();
    let mut grad = vec![0.0; w.len()];
    let batch = cfg.batch_size.max(1);
    for _ in 0..cfg.local_epochs {
        rows.shuffle(&mut rng);
        for chunk in rows.chunks(batch) {
            spec.loss_and_grad(&out.values, &shard.data.features, &shard.data.labels, chunk, &mut grad)?;
            for (wi, gi) in out.values.iter_mut().zip(&grad) {
                *wi -= cfg.learning_rate * gi;
            }
        }
        out.ensure_finite(Some(shard.owner))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fl::data::Samples;

    fn shard() -> DatasetShard {
        DatasetShard {
            owner: 0,
            data: Samples {
                features: vec![1.0, 0.0, 0.0, 1.0, -1.0, 0.5],
                n_features: 2,
                labels: vec![0, 1, 1],
            },
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let spec = ModelSpec::Mlp {
            features: 2,
            hidden: 3,
            classes: 2,
        };
        let w = spec.init(5);
        for epochs in [1, 4] {
            let cfg = TrainConfig {
                local_epochs: epochs,
                batch_size: 2,
                learning_rate: 0.0,
                weighted_aggregation: true,
            };
            assert_eq!(local_train(&spec, &w, &shard(), &cfg, 1).unwrap(), w);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = ModelSpec::Logistic { features: 2, classes: 2 };
        let cfg = TrainConfig {
            local_epochs: 3,
            batch_size: 1,
            learning_rate: 0.3,
            weighted_aggregation: true,
        };
        let w = spec.init(0);
        let a = local_train(&spec, &w, &shard(), &cfg, 9).unwrap();
        let b = local_train(&spec, &w, &shard(), &cfg, 9).unwrap();
        let c = local_train(&spec, &w, &shard(), &cfg, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn huge_step_reports_divergence() {
        let spec = ModelSpec::Logistic { features: 2, classes: 2 };
        let cfg = TrainConfig {
            local_epochs: 50,
            batch_size: 1,
            learning_rate: 1e308,
            weighted_aggregation: true,
        };
        let mut big = shard();
        big.data.features.iter_mut().for_each(|x| *x *= 1e10);
        let err = local_train(&spec, &spec.init(0), &big, &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Diverged { device: Some(0), .. }));
    }

    #[test]
    fn empty_shard_rejected() {
        let spec = ModelSpec::Logistic { features: 2, classes: 2 };
        let empty = DatasetShard {
            owner: 1,
            data: Samples {
                features: vec![],
                n_features: 2,
                labels: vec![],
            },
        };
        assert!(local_train(&spec, &spec.init(0), &empty, &TrainConfig::default(), 0).is_err());
    }
}
