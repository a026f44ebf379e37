//! Base classifiers: binary logistic regression and K-class softmax regression.
//!
//! Both are fit by full-batch gradient descent on the L2-regularized negative
//! log-likelihood, starting from zero weights. A step that increases the loss
//! is rejected and the rate halved. There is no randomness, so a fit is a pure
//! function of its inputs.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::rbm::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearConfig {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            l2: 1e-4,
            epochs: 500,
            learning_rate: 0.1,
        }
    }
}

impl LinearConfig {
    fn validate(&self) -> Result<()> {
        if self.l2.is_nan()
            || self.l2 < 0.0
            || self.learning_rate.is_nan()
            || self.learning_rate <= 0.0
        {
            return Err(Error::Argument(format!(
                "linear config needs l2 >= 0 and rate > 0 (got {}, {})",
                self.l2, self.learning_rate
            )));
        }
        Ok(())
    }
}

const PRIOR_CLAMP: (f64, f64) = (0.01, 0.99);
const MIN_RATE: f64 = 1e-12;

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

/// Generic halving gradient descent over a flat parameter vector.
fn descend<F>(mut w: Array1<f64>, cfg: &LinearConfig, f: F) -> Array1<f64>
where
    F: Fn(ArrayView1<'_, f64>) -> (f64, Array1<f64>),
{
    let (mut loss, mut grad) = f(w.view());
    let mut rate = cfg.learning_rate;
    for _ in 0..cfg.epochs {
        let cand = &w - &(&grad * rate);
        let (cand_loss, cand_grad) = f(cand.view());
        if cand_loss.is_finite() && cand_loss <= loss {
            w = cand;
            loss = cand_loss;
            grad = cand_grad;
        } else {
            rate *= 0.5;
            if rate < MIN_RATE {
                break;
            }
        }
    }
    w
}

/// Binary logistic regression; `weights[d]` is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    weights: Array1<f64>,
    /// Fitted on a single-class target; predicts a clamped prior.
    degenerate: bool,
}

impl LogisticModel {
    pub fn from_weights(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation(
                "logistic weights must be finite and non-empty".into(),
            ));
        }
        Ok(Self {
            weights,
            degenerate: false,
        })
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn n_features(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub(crate) fn score_unchecked(&self, x: ArrayView1<'_, f64>) -> f64 {
        let d = self.n_features();
        self.weights.slice(s![..d]).dot(&x) + self.weights[d]
    }

    /// `σ(wᵀ[x; 1])`.
    pub fn predict_prob(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        check_dim(self.n_features(), x.len())?;
        Ok(sigmoid(self.score_unchecked(x)))
    }

    pub fn predict_prob_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_features(), x.ncols())?;
        let d = self.n_features();
        Ok((x.dot(&self.weights.slice(s![..d])) + self.weights[d]).mapv(sigmoid))
    }
}

/// Mean negative log-likelihood plus `l2/2 ‖w‖²`, and its gradient.
pub fn logistic_loss_grad(
    w: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, u8>,
    l2: f64,
) -> (f64, Array1<f64>) {
    let (n, d) = x.dim();
    let scores = x.dot(&w.slice(s![..d])) + w[d];
    let mut resid = Array1::<f64>::zeros(n);
    let mut nll = 0.0;
    for i in 0..n {
        let yi = f64::from(y[i]);
        nll += softplus(scores[i]) - yi * scores[i];
        resid[i] = sigmoid(scores[i]) - yi;
    }
    let nf = n as f64;
    let mut grad = Array1::zeros(d + 1);
    grad.slice_mut(s![..d]).assign(&(x.t().dot(&resid) / nf));
    grad[d] = resid.sum() / nf;
    grad.scaled_add(l2, &w);
    (nll / nf + 0.5 * l2 * w.dot(&w), grad)
}

pub fn fit_logistic(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, u8>,
    cfg: &LinearConfig,
) -> Result<LogisticModel> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Argument(
            "logistic regression needs at least one instance".into(),
        ));
    }
    check_dim(n, y.len())?;
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        let p = (positives as f64 / n as f64).clamp(PRIOR_CLAMP.0, PRIOR_CLAMP.1);
        let mut weights = Array1::zeros(d + 1);
        weights[d] = (p / (1.0 - p)).ln();
        return Ok(LogisticModel {
            weights,
            degenerate: true,
        });
    }
    let weights = descend(Array1::zeros(d + 1), cfg, |w| {
        logistic_loss_grad(w, x, y, cfg.l2)
    });
    Ok(LogisticModel {
        weights,
        degenerate: false,
    })
}

/// K-class softmax regression over opaque class ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxModel {
    /// `K × (d+1)`, bias in the last column.
    weights: Array2<f64>,
    class_labels: Vec<usize>,
}

impl SoftmaxModel {
    pub fn from_weights(weights: Array2<f64>, class_labels: Vec<usize>) -> Result<Self> {
        check_dim(weights.nrows(), class_labels.len())?;
        if weights.ncols() == 0 || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation(
                "softmax weights must be finite and non-empty".into(),
            ));
        }
        Ok(Self {
            weights,
            class_labels,
        })
    }

    pub fn class_labels(&self) -> &[usize] {
        &self.class_labels
    }

    pub fn weights(&self) -> ArrayView2<'_, f64> {
        self.weights.view()
    }

    pub fn n_features(&self) -> usize {
        self.weights.ncols() - 1
    }

    fn scores_unchecked(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let d = self.n_features();
        self.weights.slice(s![.., ..d]).dot(&x) + self.weights.column(d)
    }

    /// Raw linear class scores.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_features(), x.len())?;
        Ok(self.scores_unchecked(x))
    }

    /// Class probabilities, aligned with [`SoftmaxModel::class_labels`].
    pub fn predict_dist(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        Ok(softmax(self.scores(x)?.view()))
    }

    /// Most probable class id; ties go to the earlier class.
    pub fn predict_class(&self, x: ArrayView1<'_, f64>) -> Result<usize> {
        let scores = self.scores(x)?;
        Ok(self.class_labels[argmax(scores.view())])
    }
}

pub(crate) fn argmax(v: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

pub fn softmax(scores: ArrayView1<'_, f64>) -> Array1<f64> {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e = scores.mapv(|s| (s - m).exp());
    let z = e.sum();
    e / z
}

/// Mean cross-entropy plus `l2/2 ‖W‖²` over the flattened `K × (d+1)` weights.
/// `targets[i]` is a row index into the class list.
pub fn softmax_loss_grad(
    w_flat: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
    targets: &[usize],
    n_classes: usize,
    l2: f64,
) -> (f64, Array1<f64>) {
    let (n, d) = x.dim();
    let w = w_flat
        .into_shape_with_order((n_classes, d + 1))
        .expect("flat K×(d+1) weights");
    let mut scores = x.dot(&w.slice(s![.., ..d]).t());
    scores += &w.column(d);
    let mut ce = 0.0;
    for (i, mut row) in scores.axis_iter_mut(Axis(0)).enumerate() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|s| (s - m).exp());
        let z = row.sum();
        row /= z;
        ce -= row[targets[i]].max(f64::MIN_POSITIVE).ln();
        row[targets[i]] -= 1.0;
    }
    let nf = n as f64;
    let mut grad = Array2::zeros((n_classes, d + 1));
    grad.slice_mut(s![.., ..d])
        .assign(&(scores.t().dot(&x) / nf));
    grad.column_mut(d).assign(&(scores.sum_axis(Axis(0)) / nf));
    grad.scaled_add(l2, &w);
    let flat = grad
        .into_shape_with_order(n_classes * (d + 1))
        .expect("contiguous");
    (ce / nf + 0.5 * l2 * w_flat.dot(&w_flat), flat)
}

/// Fit over the distinct class ids present in `y`. A single observed class
/// yields a constant model.
pub fn fit_softmax(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    cfg: &LinearConfig,
) -> Result<SoftmaxModel> {
    cfg.validate()?;
    let (n, d) = x.dim();
    if n == 0 {
        return Err(Error::Argument(
            "softmax regression needs at least one instance".into(),
        ));
    }
    check_dim(n, y.len())?;
    let mut class_labels = y.to_vec();
    class_labels.sort_unstable();
    class_labels.dedup();
    let k = class_labels.len();
    if k == 1 {
        return SoftmaxModel::from_weights(Array2::zeros((1, d + 1)), class_labels);
    }
    let targets: Vec<usize> = y
        .iter()
        .map(|c| class_labels.binary_search(c).expect("class seen"))
        .collect();
    let flat = descend(Array1::zeros(k * (d + 1)), cfg, |w| {
        softmax_loss_grad(w, x, &targets, k, cfg.l2)
    });
    let weights = flat.into_shape_with_order((k, d + 1)).expect("contiguous");
    SoftmaxModel::from_weights(weights, class_labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn separable_pair() {
        let x = array![[0.0], [1.0]];
        let m = fit_logistic(x.view(), array![0u8, 1].view(), &LinearConfig::default()).unwrap();
        assert!(m.predict_prob(array![0.0].view()).unwrap() < 0.5);
        assert!(m.predict_prob(array![1.0].view()).unwrap() >= 0.5);
    }

    #[test]
    fn single_class_gives_clamped_prior() {
        let x = array![[0.0], [1.0], [0.3]];
        let m = fit_logistic(x.view(), array![1u8, 1, 1].view(), &LinearConfig::default()).unwrap();
        assert!(m.is_degenerate());
        for v in [-10.0, 0.0, 10.0] {
            let p = m.predict_prob(array![v].view()).unwrap();
            assert!((p - 0.99).abs() < 1e-12);
        }
        let m0 =
            fit_logistic(x.view(), array![0u8, 0, 0].view(), &LinearConfig::default()).unwrap();
        assert!((m0.predict_prob(array![2.0].view()).unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn predict_prob_basics() {
        let zero = LogisticModel::from_weights(Array1::zeros(3)).unwrap();
        assert_eq!(zero.predict_prob(array![1.0, -2.0].view()).unwrap(), 0.5);
        let w = array![0.5, -1.0, 0.25];
        let m = LogisticModel::from_weights(w.clone()).unwrap();
        let neg = LogisticModel::from_weights(-w).unwrap();
        let x = array![2.0, 0.5];
        let p = m.predict_prob(x.view()).unwrap();
        // 0.5*2 - 1*0.5 + 0.25 = 0.75
        assert!((p - 1.0 / (1.0 + (-0.75f64).exp())).abs() < 1e-15);
        assert!((neg.predict_prob(x.view()).unwrap() - (1.0 - p)).abs() < 1e-15);
        assert!(m.predict_prob(array![1.0].view()).is_err());
    }

    #[test]
    fn softmax_zero_epochs_is_uniform() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]];
        let cfg = LinearConfig {
            epochs: 0,
            ..LinearConfig::default()
        };
        let m = fit_softmax(x.view(), &[4, 9, 2], &cfg).unwrap();
        assert_eq!(m.class_labels(), &[2, 4, 9]);
        let p = m.predict_dist(array![0.3, 0.7].view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_separable_three_class() {
        let x = array![
            [1.0, 0.0, 0.0],
            [0.9, 0.1, 0.0],
            [0.0, 1.0, 0.0],
            [0.1, 0.9, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.1, 0.9]
        ];
        let y = [0, 0, 1, 1, 2, 2];
        let m = fit_softmax(x.view(), &y, &LinearConfig::default()).unwrap();
        for (row, &c) in x.axis_iter(Axis(0)).zip(&y) {
            assert_eq!(m.predict_class(row).unwrap(), c);
            let p = m.predict_dist(row).unwrap();
            assert!((p.sum() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_single_class_is_constant() {
        let x = array![[0.0], [1.0]];
        let m = fit_softmax(x.view(), &[7, 7], &LinearConfig::default()).unwrap();
        assert_eq!(m.predict_class(array![5.0].view()).unwrap(), 7);
    }

    #[test]
    fn shift_invariance_exact() {
        let s = array![0.3, -1.2, 2.5, 0.0];
        let a = softmax(s.view());
        let b = softmax((&s + 17.0).view());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn deterministic_refit() {
        let mut rng = rng_from_seed(3);
        let x = Array2::from_shape_simple_fn((30, 4), || rng.random::<f64>());
        let y: Array1<u8> = x.column(0).mapv(|v| u8::from(v > 0.5));
        let cfg = LinearConfig::default();
        assert_eq!(
            fit_logistic(x.view(), y.view(), &cfg).unwrap(),
            fit_logistic(x.view(), y.view(), &cfg).unwrap()
        );
    }

    #[test]
    fn l2_path_shrinks_weights() {
        let mut rng = rng_from_seed(8);
        let x = Array2::from_shape_simple_fn((40, 3), || rng.random::<f64>());
        let y: Array1<u8> = x
            .rows()
            .into_iter()
            .map(|r| u8::from(r[0] + 0.3 * r[1] > 0.6))
            .collect();
        let norms: Vec<f64> = [0.0, 0.01, 1.0, 100.0]
            .iter()
            .map(|&l2| {
                let m = fit_logistic(
                    x.view(),
                    y.view(),
                    &LinearConfig {
                        l2,
                        ..LinearConfig::default()
                    },
                )
                .unwrap();
                m.weights().dot(&m.weights()).sqrt()
            })
            .collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{norms:?}");
    }
}
