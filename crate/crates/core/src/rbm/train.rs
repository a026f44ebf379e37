//! Contrastive-divergence training.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Rbm;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RbmHyper {
    pub n_hidden: usize,
    pub learning_rate: f64,
    /// Velocity decay, `v <- momentum * v + learning_rate * grad`.
    pub momentum: f64,
    /// L2 penalty on weights (not biases).
    pub weight_cost: f64,
    pub epochs: usize,
    /// Gibbs alternations in the negative phase (CD-k).
    pub cd_steps: usize,
    /// Clipped to the number of instances.
    pub batch_size: usize,
}

impl Default for RbmHyper {
    fn default() -> Self {
        Self {
            n_hidden: 60,
            learning_rate: 0.1,
            momentum: 0.8,
            weight_cost: 2e-5,
            epochs: 1000,
            cd_steps: 1,
            batch_size: 100,
        }
    }
}

impl RbmHyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_hidden == 0 {
            return Err(Error::Argument("n_hidden must be >= 1".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate {} invalid",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Argument(format!(
                "momentum {} not in [0,1)",
                self.momentum
            )));
        }
        if self.weight_cost.is_nan() || self.weight_cost < 0.0 {
            return Err(Error::Argument(format!(
                "weight cost {} negative",
                self.weight_cost
            )));
        }
        if self.cd_steps == 0 || self.batch_size == 0 {
            return Err(Error::Argument(
                "cd_steps and batch_size must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Mean squared reconstruction error per epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub reconstruction_error: Vec<f64>,
}

/// Mutable CD state: the model plus momentum velocities and the sampling RNG.
pub struct CdTrainer {
    rbm: Rbm,
    hyper: RbmHyper,
    vel_w: Array2<f64>,
    vel_vis: Array1<f64>,
    vel_hid: Array1<f64>,
    rng: Rng,
}

impl CdTrainer {
    pub fn new(rbm: Rbm, hyper: RbmHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let (d, u) = (rbm.n_visible(), rbm.n_hidden());
        Ok(Self {
            rbm,
            hyper,
            vel_w: Array2::zeros((d, u)),
            vel_vis: Array1::zeros(d),
            vel_hid: Array1::zeros(u),
            rng: rng_from_seed(derive_seed(seed, "rbm-cd", 0)),
        })
    }

    pub fn rbm(&self) -> &Rbm {
        &self.rbm
    }

    pub fn into_rbm(self) -> Rbm {
        self.rbm
    }

    fn sample(&mut self, probs: &Array2<f64>) -> Array2<f64> {
        probs.mapv(|p| {
            if self.rng.random::<f64>() < p {
                1.0
            } else {
                0.0
            }
        })
    }

    /// The raw CD-k statistic `(⟨x zᵀ⟩_data - ⟨x zᵀ⟩_recon) / B` for one batch,
    /// with the matching bias statistics and the summed squared reconstruction
    /// error of the first Gibbs step. Advances the sampling RNG.
    pub fn cd_statistics(
        &mut self,
        batch: ArrayView2<'_, f64>,
    ) -> (Array2<f64>, Array1<f64>, Array1<f64>, f64) {
        let n = batch.nrows() as f64;
        let pos_hid = self.rbm.hidden_probs_unchecked(batch);
        let mut hid_states = self.sample(&pos_hid);
        let mut recon_err = 0.0;
        let mut neg_vis = Array2::zeros(batch.raw_dim());
        let mut neg_hid = Array2::zeros(pos_hid.raw_dim());
        for step in 0..self.hyper.cd_steps {
            neg_vis = self.rbm.visible_probs_unchecked(hid_states.view());
            if step == 0 {
                recon_err = Zip::from(&batch)
                    .and(&neg_vis)
                    .fold(0.0, |acc, &a, &b| acc + (a - b) * (a - b));
            }
            neg_hid = self.rbm.hidden_probs_unchecked(neg_vis.view());
            if step + 1 < self.hyper.cd_steps {
                hid_states = self.sample(&neg_hid);
            }
        }
        let mut grad_w = batch.t().dot(&pos_hid);
        grad_w -= &neg_vis.t().dot(&neg_hid);
        grad_w /= n;
        let grad_vis = (&batch - &neg_vis).sum_axis(Axis(0)) / n;
        let grad_hid = (&pos_hid - &neg_hid).sum_axis(Axis(0)) / n;
        (grad_w, grad_vis, grad_hid, recon_err)
    }

    /// One CD-k update on `batch`. Returns the summed squared reconstruction error.
    pub fn step(&mut self, batch: ArrayView2<'_, f64>) -> f64 {
        let (grad_w, grad_vis, grad_hid, err) = self.cd_statistics(batch);
        let RbmHyper {
            learning_rate: lr,
            momentum: mom,
            weight_cost: wc,
            ..
        } = self.hyper;
        let (w, vis, hid) = self.rbm.params_mut();
        Zip::from(&mut self.vel_w)
            .and(&grad_w)
            .and(&*w)
            .for_each(|v, &g, &wv| *v = mom * *v + lr * (g - wc * wv));
        *w += &self.vel_w;
        Zip::from(&mut self.vel_vis)
            .and(&grad_vis)
            .for_each(|v, &g| *v = mom * *v + lr * g);
        *vis += &self.vel_vis;
        Zip::from(&mut self.vel_hid)
            .and(&grad_hid)
            .for_each(|v, &g| *v = mom * *v + lr * g);
        *hid += &self.vel_hid;
        err
    }

    /// One pass over `data` in a freshly shuffled order. Returns the mean
    /// squared reconstruction error per visible entry.
    pub fn epoch(&mut self, data: ArrayView2<'_, f64>, epoch: usize) -> Result<f64> {
        let n = data.nrows();
        let batch = self.hyper.batch_size.min(n);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut self.rng);
        let mut err = 0.0;
        for chunk in order.chunks(batch) {
            let rows = data.select(Axis(0), chunk);
            err += self.step(rows.view());
            if !self.rbm.is_finite() {
                return Err(Error::Training {
                    epoch,
                    msg: "non-finite RBM parameters after update".into(),
                });
            }
        }
        Ok(err / (n * data.ncols()) as f64)
    }
}

fn check_unit_interval(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.iter().all(|v| (0.0..=1.0).contains(v)) {
        Ok(())
    } else {
        Err(Error::Argument(
            "RBM inputs must lie in [0,1]; scale features first".into(),
        ))
    }
}

/// Train an RBM with `hyper.n_hidden` hidden units on rows of `features`.
///
/// Bitwise deterministic for a fixed `seed`, hyperparameters and row order.
pub fn cd_train(
    features: ArrayView2<'_, f64>,
    hyper: &RbmHyper,
    seed: u64,
) -> Result<(Rbm, TrainTrace)> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(Error::Argument(
            "cannot train an RBM on an empty dataset".into(),
        ));
    }
    check_unit_interval(features)?;
    let rbm = Rbm::init(features.ncols(), hyper.n_hidden, seed);
    let mut trainer = CdTrainer::new(rbm, *hyper, seed)?;
    let mut trace = TrainTrace::default();
    for epoch in 0..hyper.epochs {
        let err = trainer.epoch(features, epoch)?;
        log::trace!("rbm epoch={epoch} recon_error={err:.6}");
        trace.reconstruction_error.push(err);
    }
    if let Some(last) = trace.reconstruction_error.last() {
        log::debug!(
            "rbm trained d={} u={} epochs={} recon_error={last:.6}",
            features.ncols(),
            hyper.n_hidden,
            hyper.epochs
        );
    }
    Ok((trainer.into_rbm(), trace))
}
