use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Enumerate all the combinations when there are at most this many.
const ENUMERATE_LIMIT: u128 = 20_000;

fn binomial(n: usize, k: usize) -> u128 {
    (0..k as u128).fold(1u128, |acc, i| acc.saturating_mul(n as u128 - i) / (i + 1))
}

fn all_combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `m` sorted `k`-subsets of `0..n_labels`, distinct while `C(L,k) >= m`.
/// Beyond that every distinct subset appears once and the rest repeat
/// uniformly chosen ones.
pub fn rakel_subsets(n_labels: usize, k: usize, m: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > n_labels {
        return Err(Error::Argument(format!(
            "subset size k={k} must lie in 1..={n_labels}"
        )));
    }
    if m == 0 {
        return Err(Error::Argument("ensemble size m must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let total = binomial(n_labels, k);
    if total <= ENUMERATE_LIMIT.max(4 * m as u128) {
        let mut all = all_combinations(n_labels, k);
        all.shuffle(&mut rng);
        let n_all = all.len();
        if m <= n_all {
            all.truncate(m);
        } else {
            for _ in n_all..m {
                let pick = all[rng.random_range(0..n_all)].clone();
                all.push(pick);
            }
        }
        return Ok(all);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let mut s = sample(&mut rng, n_labels, k).into_vec();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}
