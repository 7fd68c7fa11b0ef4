//! Negative sampling: uniform draws without replacement from the items a
//! user has not interacted with.

use std::collections::BTreeSet;

use rand::Rng;

/// Draw up to `n` distinct items from `0..n_items` excluding `excluded`.
/// If the candidate pool is smaller than `n` the whole pool is returned.
pub fn sample_negatives<R: Rng>(
    n_items: usize,
    excluded: &BTreeSet<u32>,
    n: usize,
    rng: &mut R,
) -> Vec<u32> {
    let mut pool: Vec<u32> = (0..n_items as u32)
        .filter(|i| !excluded.contains(i))
        .collect();
    if pool.len() <= n {
        return pool;
    }
    // Partial Fisher-Yates: the first n positions end up uniform without
    // replacement.
    for i in 0..n {
        let j = rng.gen_range(i..pool.len());
        pool.swap(i, j);
    }
    pool.truncate(n);
    pool
}
