use super::data::DatasetShard;
use super::model::{ModelSpec, ModelWeights};
use crate::error::{Error, Result};

/// Weighted mean `sum(weight_i * w_i) / sum(weight_i)`.
///
/// Equal weights give the plain FedAvg mean; sample-count weights give the
/// sample-proportional objective, and nesting per-group means weighted by group
/// totals reproduces the flat weighted mean.
pub fn aggregate(updates: &[(&ModelWeights, f64)]) -> Result<ModelWeights> {
    let (first, _) = updates.first().ok_or(Error::Empty("aggregation updates"))?;
    let dim = first.len();
    let mut total = 0.0;
    for (w, weight) in updates {
        if w.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: w.len(),
            });
        }
        if !(*weight >= 0.0 && weight.is_finite()) {
            return Err(Error::invalid(format!("aggregation weight {weight} is not a finite nonnegative number")));
        }
        total += weight;
    }
    if total == 0.0 {
        return Err(Error::ZeroWeightSum);
    }
    let mut acc = vec![0.0; dim];
    for (w, weight) in updates {
        let share = weight / total;
        for (a, v) in acc.iter_mut().zip(&w.values) {
            *a += share * v;
        }
    }
    let out = ModelWeights {
        values: acc,
        byte_size: first.byte_size,
    };
    out.ensure_finite(None)?;
    Ok(out)
}

/// Fraction of correctly classified rows over the union of `test_shards`.
pub fn evaluate(spec: &ModelSpec, w: &ModelWeights, test_shards: &[DatasetShard]) -> Result<f64> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for shard in test_shards {
        if shard.data.n_features != spec.features() {
            return Err(Error::DimensionMismatch {
                expected: spec.features(),
                found: shard.data.n_features,
            });
        }
        let pred = spec.predict(w, &shard.data.features)?;
        correct += pred.iter().zip(&shard.data.labels).filter(|(p, l)| p == l).count();
        total += shard.len();
    }
    if total == 0 {
        return Err(Error::Empty("test shards"));
    }
    Ok(correct as f64 / total as f64)
}
