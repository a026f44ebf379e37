//! Deep belief networks built by greedy RBM stacking.
//!
//! Two multi-label heads sit on top of a stack:
//!
//! * the last hidden layer is used as a feature space for any multi-label
//!   classifier (see [`crate::pipeline`]);
//! * a sigmoid label layer is attached and the whole network fine-tuned by
//!   per-instance back-propagation of `ε = y - ŷ` ([`attach_and_finetune`]).
//!
//! [`bpmll_baseline`] builds the same network from random weights with no
//! pretraining.

mod container;

pub use container::{ContainerHeader, DBN_MAGIC};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{split_indices, Dataset, SplitSpec};
use crate::error::{check_dim, Error, Result};
use crate::rbm::{cd_train, sigmoid, Rbm, RbmHyper};
use crate::rng::{derive_seed, rng_from_seed};

/// Supervised sigmoid label layer `ŷ = σ(Wᵀ z + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLayer {
    /// `u_ℓ × L`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnStack {
    layers: Vec<Rbm>,
    output: Option<OutputLayer>,
}

impl DbnStack {
    pub fn new(layers: Vec<Rbm>, output: Option<OutputLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Argument("a stack needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].n_hidden(), pair[1].n_visible())?;
        }
        if let Some(out) = &output {
            check_dim(layers[layers.len() - 1].n_hidden(), out.weights.nrows())?;
            check_dim(out.weights.ncols(), out.bias.len())?;
        }
        Ok(Self { layers, output })
    }

    pub fn layers(&self) -> &[Rbm] {
        &self.layers
    }

    pub fn output(&self) -> Option<&OutputLayer> {
        self.output.as_ref()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].n_visible()
    }

    /// Width of the top hidden layer.
    pub fn feature_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].n_hidden()
    }

    pub fn n_labels(&self) -> Option<usize> {
        self.output.as_ref().map(|o| o.bias.len())
    }

    /// Sigmoid activations of every layer, the label layer last when present.
    pub fn forward(&self, x: ArrayView1<'_, f64>) -> Result<Vec<Array1<f64>>> {
        check_dim(self.input_dim(), x.len())?;
        let mut acts: Vec<Array1<f64>> = Vec::with_capacity(self.layers.len() + 1);
        for rbm in &self.layers {
            let input = acts.last().map_or(x, |a| a.view());
            let next = (input.dot(&rbm.weights()) + rbm.hidden_bias()).mapv(sigmoid);
            acts.push(next);
        }
        if let Some(out) = &self.output {
            let top = acts.last().expect("non-empty stack");
            acts.push((top.dot(&out.weights) + &out.bias).mapv(sigmoid));
        }
        Ok(acts)
    }

    /// Top hidden layer activations for each row of `x`.
    pub fn transform_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        let mut cur = x.to_owned();
        for rbm in &self.layers {
            cur = rbm.hidden_probs_unchecked(cur.view());
        }
        Ok(cur)
    }

    /// Label-layer probabilities for each row of `x`.
    pub fn predict_proba_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let out = self.require_output()?;
        let mut top = self.transform_batch(x)?.dot(&out.weights);
        top += &out.bias;
        top.mapv_inplace(sigmoid);
        Ok(top)
    }

    /// `ŷ_j = 1` iff the label-layer activation is `>= threshold`.
    pub fn predict_labels(&self, x: ArrayView1<'_, f64>, threshold: f64) -> Result<Vec<u8>> {
        self.require_output()?;
        let acts = self.forward(x)?;
        Ok(acts[acts.len() - 1]
            .iter()
            .map(|&p| u8::from(p >= threshold))
            .collect())
    }

    pub fn predict_labels_batch(
        &self,
        x: ArrayView2<'_, f64>,
        threshold: f64,
    ) -> Result<Array2<u8>> {
        Ok(self
            .predict_proba_batch(x)?
            .mapv(|p| u8::from(p >= threshold)))
    }

    fn require_output(&self) -> Result<&OutputLayer> {
        self.output
            .as_ref()
            .ok_or_else(|| Error::State("stack has no label layer; fine-tune it first".into()))
    }

    /// Discriminative parameters flattened as `[W_1, b_hid_1, ..., W_out, b_out]`.
    /// Visible biases take no part in the feed-forward network.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::new();
        for rbm in &self.layers {
            p.extend(rbm.weights().iter());
            p.extend(rbm.hidden_bias().iter());
        }
        if let Some(out) = &self.output {
            p.extend(out.weights.iter());
            p.extend(out.bias.iter());
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        check_dim(self.parameters().len(), params.len())?;
        let mut it = params.iter().copied();
        for rbm in &mut self.layers {
            let (w, _, hid) = rbm.params_mut();
            w.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
            hid.iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
        }
        if let Some(out) = &mut self.output {
            out.weights
                .iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
            out.bias
                .iter_mut()
                .for_each(|v| *v = it.next().expect("length checked"));
        }
        Ok(())
    }

    fn is_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    /// Share of the training rows held out to monitor overfitting.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BpHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub threshold: f64,
    pub early_stop: Option<EarlyStop>,
}

impl Default for BpHyper {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 0.1,
            threshold: 0.5,
            early_stop: None,
        }
    }
}

/// Training loss (`½ Σ (y - ŷ)²` summed over instances) after each epoch.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BpTrace {
    pub initial_loss: f64,
    pub epoch_loss: Vec<f64>,
    pub validation_loss: Vec<f64>,
    /// Epoch whose weights were kept when early stopping fired.
    pub best_epoch: Option<usize>,
}

/// Train `layer_sizes.len()` RBMs greedily, each on the probabilities of the one below.
///
/// The first layer uses `seed` itself, so a one-layer stack equals a plain
/// [`cd_train`] run.
pub fn greedy_pretrain(
    features: ArrayView2<'_, f64>,
    layer_sizes: &[usize],
    hyper: &RbmHyper,
    seed: u64,
) -> Result<DbnStack> {
    if layer_sizes.is_empty() {
        return Err(Error::Argument("layer_sizes must not be empty".into()));
    }
    let mut layers = Vec::with_capacity(layer_sizes.len());
    let mut input = features.to_owned();
    for (i, &u) in layer_sizes.iter().enumerate() {
        let layer_seed = if i == 0 {
            seed
        } else {
            derive_seed(seed, "dbn-layer", i as u64)
        };
        let h = RbmHyper {
            n_hidden: u,
            ..*hyper
        };
        let (rbm, _) = cd_train(input.view(), &h, layer_seed)?;
        log::debug!("dbn layer={i} in={} out={u}", input.ncols());
        if i + 1 < layer_sizes.len() {
            input = rbm.hidden_probs_unchecked(input.view());
        }
        layers.push(rbm);
    }
    DbnStack::new(layers, None)
}

type Blocks = Vec<(Array2<f64>, Array1<f64>)>;

/// Per-layer `(∂W, ∂b)` blocks, bottom layer first, label layer last.
fn gradient_blocks(
    stack: &DbnStack,
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<(f64, Blocks)> {
    let out = stack.require_output()?;
    check_dim(out.bias.len(), y.len())?;
    let acts = stack.forward(x)?;
    let n_layers = stack.layers.len();
    let yhat = &acts[n_layers];
    let err = yhat - &y;
    let loss = 0.5 * err.dot(&err);

    let mut blocks: Blocks = Vec::with_capacity(n_layers + 1);
    let mut delta = &err * &yhat.mapv(|p| p * (1.0 - p));
    blocks.push((
        outer(acts[n_layers - 1].view(), delta.view()),
        delta.clone(),
    ));
    let mut upper_w = out.weights.view();
    for i in (0..n_layers).rev() {
        delta = upper_w.dot(&delta) * acts[i].mapv(|p| p * (1.0 - p));
        let below = if i == 0 { x } else { acts[i - 1].view() };
        blocks.push((outer(below, delta.view()), delta.clone()));
        upper_w = stack.layers[i].weights();
    }
    blocks.reverse();
    Ok((loss, blocks))
}

/// Gradient of `½ Σ_j (y_j - ŷ_j)²` for one instance, flattened like
/// [`DbnStack::parameters`].
pub fn loss_and_gradient(
    stack: &DbnStack,
    x: ArrayView1<'_, f64>,
    y: ArrayView1<'_, f64>,
) -> Result<(f64, Vec<f64>)> {
    let (loss, blocks) = gradient_blocks(stack, x, y)?;
    let mut grad = Vec::new();
    for (w, b) in blocks {
        grad.extend(w.iter());
        grad.extend(b.iter());
    }
    Ok((loss, grad))
}

fn apply_step(stack: &mut DbnStack, blocks: &Blocks, rate: f64) {
    for (rbm, (gw, gb)) in stack.layers.iter_mut().zip(blocks) {
        let (w, _, hid) = rbm.params_mut();
        w.scaled_add(-rate, gw);
        hid.scaled_add(-rate, gb);
    }
    if let (Some(out), Some((gw, gb))) = (stack.output.as_mut(), blocks.last()) {
        out.weights.scaled_add(-rate, gw);
        out.bias.scaled_add(-rate, gb);
    }
}

fn outer(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> Array2<f64> {
    let a2 = a.insert_axis(Axis(1));
    let b2 = b.insert_axis(Axis(0));
    a2.dot(&b2)
}

fn dataset_loss(stack: &DbnStack, x: ArrayView2<'_, f64>, y: ArrayView2<'_, u8>) -> Result<f64> {
    let p = stack.predict_proba_batch(x)?;
    Ok(0.5
        * p.iter()
            .zip(y.iter())
            .map(|(&a, &b)| (a - f64::from(b)).powi(2))
            .sum::<f64>())
}

fn init_output(n_in: usize, n_labels: usize, seed: u64) -> OutputLayer {
    let mut rng = rng_from_seed(derive_seed(seed, "bp-output", 0));
    let normal = Normal::new(0.0, 0.01).expect("valid stdev");
    OutputLayer {
        weights: Array2::from_shape_simple_fn((n_in, n_labels), || normal.sample(&mut rng)),
        bias: Array1::zeros(n_labels),
    }
}

/// Attach a fresh label layer and fine-tune every weight by SGD.
pub fn attach_and_finetune(
    stack: DbnStack,
    ds: &Dataset,
    hyper: &BpHyper,
    seed: u64,
) -> Result<(DbnStack, BpTrace)> {
    check_dim(stack.input_dim(), ds.n_features())?;
    let output = init_output(stack.feature_dim(), ds.n_labels(), seed);
    let stack = DbnStack::new(stack.layers, Some(output))?;
    finetune(stack, ds, hyper, seed)
}

/// Same network as a fine-tuned DBN but every weight random, no pretraining.
///
/// Hidden weights are uniform in `±1/√fan_in`; the label layer is initialized
/// like [`attach_and_finetune`]'s.
pub fn bpmll_baseline(
    ds: &Dataset,
    layer_sizes: &[usize],
    hyper: &BpHyper,
    seed: u64,
) -> Result<(DbnStack, BpTrace)> {
    if layer_sizes.is_empty() {
        return Err(Error::Argument("layer_sizes must not be empty".into()));
    }
    let mut rng = rng_from_seed(derive_seed(seed, "bpnn-init", 0));
    let mut layers = Vec::with_capacity(layer_sizes.len());
    let mut fan_in = ds.n_features();
    for &u in layer_sizes {
        let r = 1.0 / (fan_in as f64).sqrt();
        let w = Array2::from_shape_simple_fn((fan_in, u), || rng.random_range(-r..r));
        layers.push(Rbm::from_parts(w, Array1::zeros(fan_in), Array1::zeros(u))?);
        fan_in = u;
    }
    let stack = DbnStack::new(layers, None)?;
    attach_and_finetune(stack, ds, hyper, seed)
}

fn finetune(
    mut stack: DbnStack,
    ds: &Dataset,
    hyper: &BpHyper,
    seed: u64,
) -> Result<(DbnStack, BpTrace)> {
    if hyper.learning_rate.is_nan() || hyper.learning_rate < 0.0 {
        return Err(Error::Argument("back-propagation rate must be >= 0".into()));
    }
    let (train_idx, valid_idx) = match hyper.early_stop {
        Some(es) => {
            let fold = split_indices(
                ds.n_instances(),
                SplitSpec::holdout(
                    1.0 - es.validation_fraction,
                    derive_seed(seed, "bp-valid", 0),
                ),
            )?
            .remove(0);
            (fold.train, Some(fold.test))
        }
        None => ((0..ds.n_instances()).collect(), None),
    };
    let x = ds.features().select(Axis(0), &train_idx);
    let y = ds.labels().select(Axis(0), &train_idx);
    let yf = y.mapv(f64::from);
    let valid = valid_idx.map(|idx| {
        (
            ds.features().select(Axis(0), &idx),
            ds.labels().select(Axis(0), &idx),
        )
    });

    let mut trace = BpTrace {
        initial_loss: dataset_loss(&stack, x.view(), y.view())?,
        ..BpTrace::default()
    };
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut rng = rng_from_seed(derive_seed(seed, "bp-order", 0));
    let mut order: Vec<usize> = (0..x.nrows()).collect();

    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let (_, blocks) = gradient_blocks(&stack, x.row(i), yf.row(i))?;
            apply_step(&mut stack, &blocks, hyper.learning_rate);
        }
        if !stack.is_finite() {
            return Err(Error::Training {
                epoch,
                msg: "non-finite weights during back-propagation".into(),
            });
        }
        let loss = dataset_loss(&stack, x.view(), y.view())?;
        log::trace!("bp epoch={epoch} loss={loss:.6}");
        trace.epoch_loss.push(loss);

        if let (Some(es), Some((vx, vy))) = (hyper.early_stop, &valid) {
            let vloss = dataset_loss(&stack, vx.view(), vy.view())?;
            trace.validation_loss.push(vloss);
            match &best {
                Some((b, _, _)) if vloss >= *b => {}
                _ => best = Some((vloss, epoch, stack.parameters())),
            }
            let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
            if epoch - best_epoch >= es.patience {
                break;
            }
        }
    }
    if let Some((_, epoch, p)) = best {
        stack.set_parameters(&p)?;
        trace.best_epoch = Some(epoch);
    }
    Ok((stack, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn zero_stack(dims: &[usize]) -> DbnStack {
        let layers = dims.windows(2).map(|w| Rbm::zeros(w[0], w[1])).collect();
        DbnStack::new(layers, None).unwrap()
    }

    #[test]
    fn zero_stack_activations_are_half() {
        let stack = zero_stack(&[4, 3, 2]);
        let acts = stack.forward(array![0.1, 0.9, 0.0, 1.0].view()).unwrap();
        assert_eq!(acts.len(), 2);
        assert!(acts.iter().all(|a| a.iter().all(|&v| v == 0.5)));
    }

    #[test]
    fn rejects_broken_chaining() {
        let layers = vec![Rbm::zeros(4, 3), Rbm::zeros(2, 2)];
        assert!(DbnStack::new(layers, None).is_err());
    }

    #[test]
    fn hand_computed_two_layer_chain() {
        let l1 = Rbm::from_parts(
            array![[1.0, -2.0], [0.5, 0.25]],
            array![0.0, 0.0],
            array![0.1, -0.1],
        )
        .unwrap();
        let l2 = Rbm::from_parts(array![[2.0], [-1.0]], array![0.0, 0.0], array![0.3]).unwrap();
        let stack = DbnStack::new(vec![l1, l2], None).unwrap();
        let acts = stack.forward(array![1.0, 0.5].view()).unwrap();
        let s = |a: f64| 1.0 / (1.0 + (-a).exp());
        let h1 = [s(1.0 + 0.25 + 0.1), s(-2.0 + 0.125 - 0.1)];
        let h2 = s(2.0 * h1[0] - h1[1] + 0.3);
        assert!((acts[0][0] - h1[0]).abs() < 1e-12);
        assert!((acts[0][1] - h1[1]).abs() < 1e-12);
        assert!((acts[1][0] - h2).abs() < 1e-12);
    }

    #[test]
    fn predict_labels_threshold_rules() {
        let out = OutputLayer {
            weights: Array2::zeros((1, 2)),
            bias: array![(0.9f64 / 0.1).ln(), (0.1f64 / 0.9).ln()],
        };
        let stack = DbnStack::new(vec![Rbm::zeros(2, 1)], Some(out)).unwrap();
        let x = array![0.0, 0.0];
        assert_eq!(stack.predict_labels(x.view(), 0.5).unwrap(), vec![1, 0]);
        assert_eq!(stack.predict_labels(x.view(), 0.0).unwrap(), vec![1, 1]);
        assert!(matches!(
            zero_stack(&[2, 1]).predict_labels(x.view(), 0.5),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn parameters_round_trip() {
        let mut stack = zero_stack(&[3, 2, 2]);
        stack.output = Some(OutputLayer {
            weights: Array2::zeros((2, 2)),
            bias: Array1::zeros(2),
        });
        let p: Vec<f64> = (0..stack.parameters().len()).map(|i| i as f64).collect();
        stack.set_parameters(&p).unwrap();
        assert_eq!(stack.parameters(), p);
        assert!(stack.set_parameters(&p[1..]).is_err());
    }

    fn random_network(dims: &[usize], n_labels: usize, seed: u64) -> DbnStack {
        let mut rng = rng_from_seed(seed);
        let mut u = || rng.random_range(-1.0..1.0);
        let layers = dims
            .windows(2)
            .map(|w| {
                Rbm::from_parts(
                    Array2::from_shape_simple_fn((w[0], w[1]), &mut u),
                    Array1::zeros(w[0]),
                    Array1::from_shape_simple_fn(w[1], &mut u),
                )
                .unwrap()
            })
            .collect();
        let top = dims[dims.len() - 1];
        let output = OutputLayer {
            weights: Array2::from_shape_simple_fn((top, n_labels), &mut u),
            bias: Array1::from_shape_simple_fn(n_labels, &mut u),
        };
        DbnStack::new(layers, Some(output)).unwrap()
    }

    #[test]
    fn backprop_matches_central_differences() {
        let h = 1e-5;
        for seed in 0..20u64 {
            let mut stack = random_network(&[4, 3, 2], 2, seed);
            let mut rng = rng_from_seed(1000 + seed);
            let x = Array1::from_shape_simple_fn(4, || rng.random::<f64>());
            let y = Array1::from_shape_simple_fn(2, || f64::from(u8::from(rng.random::<bool>())));
            let (_, grad) = loss_and_gradient(&stack, x.view(), y.view()).unwrap();
            let p0 = stack.parameters();
            let mut num = vec![0.0; p0.len()];
            for k in 0..p0.len() {
                let mut p = p0.clone();
                p[k] = p0[k] + h;
                stack.set_parameters(&p).unwrap();
                let plus = loss_and_gradient(&stack, x.view(), y.view()).unwrap().0;
                p[k] = p0[k] - h;
                stack.set_parameters(&p).unwrap();
                let minus = loss_and_gradient(&stack, x.view(), y.view()).unwrap().0;
                num[k] = (plus - minus) / (2.0 * h);
            }
            stack.set_parameters(&p0).unwrap();
            let diff: f64 = grad
                .iter()
                .zip(&num)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let norm: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt()
                + num.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(
                diff / norm.max(1e-12) < 1e-4,
                "seed {seed}: rel err {}",
                diff / norm
            );
        }
    }

    fn tiny_dataset() -> Dataset {
        Dataset::from_arrays(
            "tiny",
            array![
                [0.9, 0.1, 0.8, 0.0],
                [0.1, 0.9, 0.0, 0.7],
                [0.8, 0.8, 0.9, 0.1],
                [0.0, 0.2, 0.1, 0.9]
            ],
            array![[1, 0], [0, 1], [1, 1], [0, 0]],
        )
        .unwrap()
    }

    fn tiny_rbm_hyper() -> RbmHyper {
        RbmHyper {
            epochs: 50,
            momentum: 0.2,
            ..RbmHyper::default()
        }
    }

    #[test]
    fn zero_epochs_only_attach_label_layer() {
        let ds = tiny_dataset();
        let stack = greedy_pretrain(ds.features(), &[3, 2], &tiny_rbm_hyper(), 3).unwrap();
        let hyper = BpHyper {
            epochs: 0,
            ..BpHyper::default()
        };
        let (tuned, trace) = attach_and_finetune(stack.clone(), &ds, &hyper, 3).unwrap();
        assert_eq!(tuned.layers(), stack.layers());
        assert_eq!(tuned.n_labels(), Some(2));
        assert!(trace.epoch_loss.is_empty());
    }

    #[test]
    fn zero_rate_leaves_weights_unchanged() {
        let ds = tiny_dataset();
        let stack = greedy_pretrain(ds.features(), &[3], &tiny_rbm_hyper(), 1).unwrap();
        let zero = BpHyper {
            epochs: 0,
            ..BpHyper::default()
        };
        let still = BpHyper {
            epochs: 5,
            learning_rate: 0.0,
            ..BpHyper::default()
        };
        let (a, _) = attach_and_finetune(stack.clone(), &ds, &zero, 1).unwrap();
        let (b, trace) = attach_and_finetune(stack, &ds, &still, 1).unwrap();
        assert_eq!(a, b);
        assert!(trace.epoch_loss.iter().all(|&l| l == trace.initial_loss));
    }

    #[test]
    fn small_rate_loss_is_non_increasing() {
        let ds = tiny_dataset();
        let stack = greedy_pretrain(ds.features(), &[3, 2], &tiny_rbm_hyper(), 7).unwrap();
        let hyper = BpHyper {
            epochs: 200,
            learning_rate: 0.01,
            ..BpHyper::default()
        };
        let (_, trace) = attach_and_finetune(stack, &ds, &hyper, 7).unwrap();
        let mut prev = trace.initial_loss;
        for (e, &l) in trace.epoch_loss.iter().enumerate() {
            assert!(l <= prev + 1e-12, "epoch {e}: {l} > {prev}");
            prev = l;
        }
        assert!(prev < trace.initial_loss);
    }

    #[test]
    fn overfits_a_single_instance() {
        let ds = Dataset::from_arrays("one", array![[0.2, 0.8, 0.5]], array![[1, 0, 1]]).unwrap();
        let stack = greedy_pretrain(ds.features(), &[4], &tiny_rbm_hyper(), 2).unwrap();
        let hyper = BpHyper {
            epochs: 2000,
            learning_rate: 0.5,
            ..BpHyper::default()
        };
        let (tuned, trace) = attach_and_finetune(stack, &ds, &hyper, 2).unwrap();
        assert!(*trace.epoch_loss.last().unwrap() < 1e-3);
        assert_eq!(
            tuned.predict_labels(ds.features().row(0), 0.5).unwrap(),
            vec![1, 0, 1]
        );
    }

    #[test]
    fn raising_threshold_never_adds_labels() {
        let stack = random_network(&[4, 3], 5, 11);
        let mut rng = rng_from_seed(12);
        let x = Array2::from_shape_simple_fn((30, 4), || rng.random::<f64>());
        let lo = stack.predict_labels_batch(x.view(), 0.3).unwrap();
        let hi = stack.predict_labels_batch(x.view(), 0.7).unwrap();
        assert!(lo.iter().zip(hi.iter()).all(|(&a, &b)| b <= a));
    }

    #[test]
    fn single_layer_stack_equals_cd_train() {
        let ds = tiny_dataset();
        let h = RbmHyper {
            n_hidden: 3,
            ..tiny_rbm_hyper()
        };
        let stack = greedy_pretrain(ds.features(), &[3], &h, 21).unwrap();
        let (rbm, _) = cd_train(ds.features(), &h, 21).unwrap();
        assert_eq!(stack.layers()[0], rbm);
    }

    #[test]
    fn baseline_has_same_shape_and_no_pretraining() {
        let ds = tiny_dataset();
        let hyper = BpHyper {
            epochs: 0,
            ..BpHyper::default()
        };
        let (net, _) = bpmll_baseline(&ds, &[3, 2], &hyper, 4).unwrap();
        assert_eq!(net.header().layer_dims, vec![4, 3, 2]);
        let r = 0.5;
        assert!(net.layers()[0].weights().iter().all(|w| w.abs() < r));
        assert!(net.layers()[1]
            .weights()
            .iter()
            .all(|w| w.abs() < 1.0 / 3f64.sqrt()));
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let ds = tiny_dataset();
        let stack = greedy_pretrain(ds.features(), &[3], &tiny_rbm_hyper(), 5).unwrap();
        let hyper = BpHyper {
            epochs: 30,
            early_stop: Some(EarlyStop {
                validation_fraction: 0.25,
                patience: 3,
            }),
            ..BpHyper::default()
        };
        let (_, trace) = attach_and_finetune(stack, &ds, &hyper, 5).unwrap();
        let best = trace.best_epoch.unwrap();
        let min = trace
            .validation_loss
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        assert_eq!(trace.validation_loss[best], min);
    }
}
