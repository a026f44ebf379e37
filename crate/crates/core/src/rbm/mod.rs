//! Bernoulli-Bernoulli restricted Boltzmann machine.
//!
//! Energy of a visible/hidden configuration:
//!
//! ```text
//! E(x, z) = -xᵀ W z - b_visᵀ x - b_hidᵀ z
//! ```
//!
//! With zero biases this is the plain bilinear form `-xᵀWz`. Both conditionals
//! factorize into logistic units sharing the same `W`.

mod persist;
mod train;

pub use train::{cd_train, CdTrainer, RbmHyper, TrainTrace};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Largest `d + u` accepted by [`Rbm::exact_log_likelihood`].
pub const MAX_EXACT_UNITS: usize = 20;

pub(crate) fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbm {
    /// `d × u`; entry `(j, k)` joins visible `j` to hidden `k`.
    weights: Array2<f64>,
    visible_bias: Array1<f64>,
    hidden_bias: Array1<f64>,
    seed: u64,
}

impl Rbm {
    /// Gaussian(0, 0.01) weights, zero biases.
    pub fn init(n_visible: usize, n_hidden: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, "rbm-init", 0));
        let normal = Normal::new(0.0, 0.01).expect("valid stdev");
        let weights =
            Array2::from_shape_simple_fn((n_visible, n_hidden), || normal.sample(&mut rng));
        Self {
            weights,
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            seed,
        }
    }

    pub fn from_parts(
        weights: Array2<f64>,
        visible_bias: Array1<f64>,
        hidden_bias: Array1<f64>,
    ) -> Result<Self> {
        check_dim(weights.nrows(), visible_bias.len())?;
        check_dim(weights.ncols(), hidden_bias.len())?;
        let rbm = Self {
            weights,
            visible_bias,
            hidden_bias,
            seed: 0,
        };
        if !rbm.is_finite() {
            return Err(Error::Validation("RBM parameters must be finite".into()));
        }
        Ok(rbm)
    }

    /// All-zero parameters: every conditional is 0.5.
    pub fn zeros(n_visible: usize, n_hidden: usize) -> Self {
        Self {
            weights: Array2::zeros((n_visible, n_hidden)),
            visible_bias: Array1::zeros(n_visible),
            hidden_bias: Array1::zeros(n_hidden),
            seed: 0,
        }
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn visible_bias(&self) -> ArrayView1<'_, f64> {
        self.visible_bias.view()
    }

    pub fn hidden_bias(&self) -> ArrayView1<'_, f64> {
        self.hidden_bias.view()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.visible_bias)
            .chain(&self.hidden_bias)
            .all(|v| v.is_finite())
    }

    pub fn energy(&self, x: ArrayView1<'_, f64>, z: ArrayView1<'_, f64>) -> Result<f64> {
        check_dim(self.n_visible(), x.len())?;
        check_dim(self.n_hidden(), z.len())?;
        Ok(-x.dot(&self.weights.dot(&z)) - self.visible_bias.dot(&x) - self.hidden_bias.dot(&z))
    }

    /// `P(z_k = 1 | x) = σ(b_hid_k + Σ_j x_j W_jk)`.
    pub fn hidden_probs(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_visible(), x.len())?;
        Ok((x.dot(&self.weights) + &self.hidden_bias).mapv(sigmoid))
    }

    /// `P(x_j = 1 | z) = σ(b_vis_j + Σ_k W_jk z_k)`.
    pub fn visible_probs(&self, z: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_hidden(), z.len())?;
        Ok((self.weights.dot(&z) + &self.visible_bias).mapv(sigmoid))
    }

    /// Row-wise [`Rbm::hidden_probs`].
    pub fn hidden_probs_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.n_visible(), x.ncols())?;
        Ok(self.hidden_probs_unchecked(x))
    }

    pub(crate) fn hidden_probs_unchecked(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = x.dot(&self.weights);
        a += &self.hidden_bias;
        a.mapv_inplace(sigmoid);
        a
    }

    pub(crate) fn visible_probs_unchecked(&self, z: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut a = z.dot(&self.weights.t());
        a += &self.visible_bias;
        a.mapv_inplace(sigmoid);
        a
    }

    /// Row-wise [`Rbm::visible_probs`].
    pub fn visible_probs_batch(&self, z: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.n_hidden(), z.ncols())?;
        Ok(self.visible_probs_unchecked(z))
    }

    /// Deterministic feature map: hidden probabilities, never samples.
    pub fn transform(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        self.hidden_probs(x)
    }

    pub fn transform_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.hidden_probs_batch(x)
    }

    /// Mean log-likelihood of the rows of `x` by full enumeration of the joint.
    ///
    /// Only tractable for tiny models; `d + u` is capped at [`MAX_EXACT_UNITS`].
    pub fn exact_log_likelihood(&self, x: ArrayView2<'_, f64>) -> Result<f64> {
        let (d, u) = (self.n_visible(), self.n_hidden());
        if d + u > MAX_EXACT_UNITS {
            return Err(Error::Capacity(format!(
                "d + u = {} exceeds {MAX_EXACT_UNITS}",
                d + u
            )));
        }
        check_dim(d, x.ncols())?;
        if x.nrows() == 0 {
            return Err(Error::Argument("no instances".into()));
        }
        let mut all = Vec::with_capacity(1 << (d + u));
        let mut xv = Array1::<f64>::zeros(d);
        for xs in 0u64..(1 << d) {
            for j in 0..d {
                xv[j] = ((xs >> j) & 1) as f64;
            }
            all.extend(self.neg_energies_over_hidden(xv.view()));
        }
        let log_z = log_sum_exp(&all);
        let total: f64 = x
            .axis_iter(Axis(0))
            .map(|row| log_sum_exp(&self.neg_energies_over_hidden(row)) - log_z)
            .sum();
        Ok(total / x.nrows() as f64)
    }

    /// `-E(x, z)` for every binary `z`, indexed by the bits of `z`.
    fn neg_energies_over_hidden(&self, x: ArrayView1<'_, f64>) -> Vec<f64> {
        let u = self.n_hidden();
        let act = x.dot(&self.weights) + &self.hidden_bias;
        let base = self.visible_bias.dot(&x);
        (0u64..(1 << u))
            .map(|zs| {
                base + (0..u)
                    .filter(|k| (zs >> k) & 1 == 1)
                    .map(|k| act[k])
                    .sum::<f64>()
            })
            .collect()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>, &mut Array1<f64>) {
        (
            &mut self.weights,
            &mut self.visible_bias,
            &mut self.hidden_bias,
        )
    }
}
