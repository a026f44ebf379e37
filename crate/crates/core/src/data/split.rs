use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Train on `floor(fraction * N)` shuffled rows, test on the rest.
    Holdout(f64),
    KFold(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub seed: u64,
}

impl SplitSpec {
    pub fn holdout(fraction: f64, seed: u64) -> Self {
        Self {
            mode: SplitMode::Holdout(fraction),
            seed,
        }
    }

    pub fn kfold(k: usize, seed: u64) -> Self {
        Self {
            mode: SplitMode::KFold(k),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl FoldIndices {
    /// Order-independent fingerprint of the test rows.
    pub fn test_hash(&self) -> u64 {
        let mut sorted = self.test.clone();
        sorted.sort_unstable();
        sorted.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &i| {
            (h ^ i as u64).wrapping_mul(0x0100_0000_01b3)
        })
    }
}

pub fn split_indices(n: usize, spec: SplitSpec) -> Result<Vec<FoldIndices>> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng_from_seed(spec.seed));
    match spec.mode {
        SplitMode::Holdout(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::Argument(format!(
                    "holdout fraction {f} not in (0,1)"
                )));
            }
            let n_train = (f * n as f64).floor() as usize;
            if n_train == 0 || n_train == n {
                return Err(Error::Argument(format!(
                    "holdout fraction {f} leaves an empty side for N={n}"
                )));
            }
            Ok(vec![FoldIndices {
                train: perm[..n_train].to_vec(),
                test: perm[n_train..].to_vec(),
            }])
        }
        SplitMode::KFold(k) => {
            if k < 2 {
                return Err(Error::Argument(format!("k-fold needs k >= 2, got {k}")));
            }
            if k > n {
                return Err(Error::Argument(format!("k={k} exceeds N={n}")));
            }
            let (base, extra) = (n / k, n % k);
            let mut folds = Vec::with_capacity(k);
            let mut start = 0;
            for i in 0..k {
                let end = start + base + usize::from(i < extra);
                let test = perm[start..end].to_vec();
                let train = perm[..start].iter().chain(&perm[end..]).copied().collect();
                folds.push(FoldIndices { train, test });
                start = end;
            }
            Ok(folds)
        }
    }
}

/// Materialize the (train, test) pairs described by `spec`.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<Vec<(Dataset, Dataset)>> {
    split_indices(ds.n_instances(), spec)?
        .iter()
        .map(|f| Ok((ds.select_rows(&f.train)?, ds.select_rows(&f.test)?)))
        .collect()
}
