//! Multi-label evaluation measures over `N × L` binary matrices.
//!
//! An instance whose true and predicted labelsets are both empty scores 1 under
//! [`accuracy`] and [`exact_match`].

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_shapes(y: ArrayView2<'_, u8>, yhat: ArrayView2<'_, u8>) -> Result<()> {
    if y.dim() != yhat.dim() {
        return Err(Error::Validation(format!(
            "label matrices differ in shape: {:?} vs {:?}",
            y.dim(),
            yhat.dim()
        )));
    }
    Ok(())
}

/// Mean per-instance Jaccard index `|y ∧ ŷ| / |y ∨ ŷ|`. Zero rows score 0 rather than NaN.
pub fn accuracy(y: ArrayView2<'_, u8>, yhat: ArrayView2<'_, u8>) -> Result<f64> {
    check_shapes(y, yhat)?;
    let n = y.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let total: f64 = y
        .rows()
        .into_iter()
        .zip(yhat.rows())
        .map(|(a, b)| {
            let (mut and, mut or) = (0u32, 0u32);
            for (&p, &q) in a.iter().zip(b.iter()) {
                and += u32::from(p & q);
                or += u32::from(p | q);
            }
            if or == 0 {
                1.0
            } else {
                f64::from(and) / f64::from(or)
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Fraction of the `N·L` label bits that disagree.
pub fn hamming_loss(y: ArrayView2<'_, u8>, yhat: ArrayView2<'_, u8>) -> Result<f64> {
    check_shapes(y, yhat)?;
    if y.is_empty() {
        return Ok(0.0);
    }
    let wrong = y.iter().zip(yhat.iter()).filter(|(a, b)| a != b).count();
    Ok(wrong as f64 / y.len() as f64)
}

/// Fraction of instances whose whole labelset is predicted exactly.
pub fn exact_match(y: ArrayView2<'_, u8>, yhat: ArrayView2<'_, u8>) -> Result<f64> {
    check_shapes(y, yhat)?;
    if y.nrows() == 0 {
        return Ok(0.0);
    }
    let hits = y
        .rows()
        .into_iter()
        .zip(yhat.rows())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / y.nrows() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub hamming_loss: f64,
    pub exact_match: f64,
    pub n_test: usize,
}

impl MetricSet {
    pub fn compute(y: ArrayView2<'_, u8>, yhat: ArrayView2<'_, u8>) -> Result<Self> {
        Ok(Self {
            accuracy: accuracy(y, yhat)?,
            hamming_loss: hamming_loss(y, yhat)?,
            exact_match: exact_match(y, yhat)?,
            n_test: y.nrows(),
        })
    }
}

impl std::fmt::Display for MetricSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "accuracy={:.4} hamming_loss={:.4} exact_match={:.4} n_test={}",
            self.accuracy, self.hamming_loss, self.exact_match, self.n_test
        )
    }
}
