//! Numeric ring all-reduce: weighted reduce-scatter followed by all-gather,
//! chunk by chunk around the ring, ending in a weighted mean on every member.

use crate::error::{Error, Result};
use crate::fl::ModelWeights;

fn chunk_bounds(dim: usize, n: usize, c: usize) -> (usize, usize) {
    (c * dim / n, (c + 1) * dim / n)
}

/// Run the collective and return every member's final buffer, in ring order.
pub fn ring_allreduce_all(updates: &[&ModelWeights], weights: &[f64]) -> Result<Vec<ModelWeights>> {
    let n = updates.len();
    if n < 2 {
        return Err(Error::TooFewMembers { needed: 2, got: n });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let dim = updates[0].len();
    for u in updates {
        if u.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: u.len(),
            });
        }
    }
    if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
        return Err(Error::invalid("ring weights must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroWeightSum);
    }

    let mut bufs: Vec<Vec<f64>> = updates
        .iter()
        .zip(weights)
        .map(|(u, w)| u.values.iter().map(|v| v * w).collect())
        .collect();

    // reduce-scatter: after n-1 steps member r owns the full sum of chunk r+1
    for step in 0..n - 1 {
        let sends: Vec<(usize, usize, Vec<f64>)> = (0..n)
            .map(|r| {
                let c = (r + n - step) % n;
                let (lo, hi) = chunk_bounds(dim, n, c);
                ((r + 1) % n, c, bufs[r][lo..hi].to_vec())
            })
            .collect();
        for (dst, c, data) in sends {
            let (lo, _) = chunk_bounds(dim, n, c);
            for (i, v) in data.into_iter().enumerate() {
                bufs[dst][lo + i] += v;
            }
        }
    }
    // all-gather: circulate the finished chunks
    for step in 0..n - 1 {
        let sends: Vec<(usize, usize, Vec<f64>)> = (0..n)
            .map(|r| {
                let c = (r + 1 + n - step) % n;
                let (lo, hi) = chunk_bounds(dim, n, c);
                ((r + 1) % n, c, bufs[r][lo..hi].to_vec())
            })
            .collect();
        for (dst, c, data) in sends {
            let (lo, hi) = chunk_bounds(dim, n, c);
            bufs[dst][lo..hi].copy_from_slice(&data);
        }
    }

    let byte_size = updates[0].byte_size;
    bufs.into_iter()
        .map(|mut b| {
            b.iter_mut().for_each(|v| *v /= total);
            let w = ModelWeights { values: b, byte_size };
            w.ensure_finite(None)?;
            Ok(w)
        })
        .collect()
}

/// Weighted mean of `updates` computed over a ring.
pub fn ring_allreduce(updates: &[&ModelWeights], weights: &[f64]) -> Result<ModelWeights> {
    let mut all = ring_allreduce_all(updates, weights)?;
    Ok(all.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_inputs() {
        let a = ModelWeights::new(vec![1.0, -2.0, 0.5]);
        let out = ring_allreduce(&[&a, &a], &[1.0, 1.0]).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn all_members_agree() {
        let ws: Vec<ModelWeights> = (0..5)
            .map(|i| ModelWeights::new((0..7).map(|j| (i * 7 + j) as f64).collect()))
            .collect();
        let refs: Vec<&ModelWeights> = ws.iter().collect();
        let all = ring_allreduce_all(&refs, &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(all.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn fewer_elements_than_members() {
        let ws: Vec<ModelWeights> = (0..4).map(|i| ModelWeights::new(vec![i as f64])).collect();
        let refs: Vec<&ModelWeights> = ws.iter().collect();
        let out = ring_allreduce(&refs, &[1.0; 4]).unwrap();
        assert_eq!(out.values, vec![1.5]);
    }

    #[test]
    fn errors() {
        let a = ModelWeights::new(vec![1.0, 2.0]);
        let b = ModelWeights::new(vec![1.0]);
        assert!(ring_allreduce(&[&a], &[1.0]).is_err());
        assert!(matches!(
            ring_allreduce(&[&a, &b], &[1.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(ring_allreduce(&[&a, &a], &[0.0, 0.0]), Err(Error::ZeroWeightSum)));
    }
}
