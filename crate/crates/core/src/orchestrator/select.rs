use rand::seq::index;

use crate::error::{Error, Result};
use crate::seed;

/// Uniform sample of `k` distinct elements of `pool`, returned in pool order.
/// `k = 0` is rejected.
pub fn select_uniform<T: Clone>(pool: &[T], k: usize, seed: u64) -> Result<Vec<T>> {
    if k == 0 {
        return Err(Error::invalid("cannot select zero elements"));
    }
    if k > pool.len() {
        return Err(Error::SampleTooLarge { k, pool: pool.len() });
    }
    if k == pool.len() {
        return Ok(pool.to_vec());
    }
    let mut picked = index::sample(&mut seed::rng_from(seed), pool.len(), k).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| pool[i].clone()).collect())
}
