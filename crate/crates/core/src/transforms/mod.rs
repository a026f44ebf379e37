//! Problem-transformation multi-label classifiers.
//!
//! Every method reduces the `L`-label problem to binary or multi-class problems
//! solved by [`crate::linear`] learners:
//!
//! | kind  | members                                                   |
//! |-------|-----------------------------------------------------------|
//! | BR    | one logistic model per label                              |
//! | CC    | one chain of logistic models, each seeing its predecessors |
//! | ECC   | `n_chains` chains with random label orders                |
//! | LP    | one softmax over the observed labelsets                   |
//! | RAkEL | `m` LP models over random `k`-subsets of labels           |
//! | FW    | one 4-class softmax per label pair                        |
//!
//! Ensembles pool members' hard 0/1 outputs in a [`VoteMatrix`]; a label is
//! predicted when its vote fraction is `>= threshold`.

mod subsets;

pub use subsets::rakel_subsets;

use std::collections::BTreeMap;

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_dim, Error, Result};
use crate::linear::{fit_logistic, fit_softmax, LinearConfig, LogisticModel, SoftmaxModel};
use crate::par;
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlcKind {
    Br,
    Cc,
    Ecc,
    Lp,
    Rakel,
    Fw,
}

impl MlcKind {
    pub fn name(self) -> &'static str {
        match self {
            MlcKind::Br => "br",
            MlcKind::Cc => "cc",
            MlcKind::Ecc => "ecc",
            MlcKind::Lp => "lp",
            MlcKind::Rakel => "rakel",
            MlcKind::Fw => "fw",
        }
    }
}

/// Settings shared by every transformation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseConfig {
    pub linear: LinearConfig,
    /// In `(0, 1)`. Probabilities and vote fractions equal to it predict 1.
    pub threshold: f64,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            linear: LinearConfig::default(),
            threshold: 0.5,
        }
    }
}

impl BaseConfig {
    fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::Argument(format!(
                "threshold {} not in (0,1)",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlcConfig {
    pub kind: MlcKind,
    pub base: BaseConfig,
    pub n_chains: usize,
    pub rakel_k: usize,
    /// `None` means `2L`.
    pub rakel_m: Option<usize>,
    /// `None` means label order `0..L`.
    pub cc_order: Option<Vec<usize>>,
}

impl Default for MlcConfig {
    fn default() -> Self {
        Self {
            kind: MlcKind::Br,
            base: BaseConfig::default(),
            n_chains: 50,
            rakel_k: 3,
            rakel_m: None,
            cc_order: None,
        }
    }
}

impl MlcConfig {
    pub fn new(kind: MlcKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }
}

/// Per-label vote totals and the number of members able to vote on each label.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    votes: Array1<f64>,
    counts: Array1<f64>,
}

impl VoteMatrix {
    pub fn new(n_labels: usize) -> Self {
        Self {
            votes: Array1::zeros(n_labels),
            counts: Array1::zeros(n_labels),
        }
    }

    pub fn add(&mut self, label: usize, bit: u8) {
        self.votes[label] += f64::from(bit);
        self.counts[label] += 1.0;
    }

    /// Vote fractions in `[0,1]`; labels nobody voted on get 0.
    pub fn fractions(&self) -> Array1<f64> {
        ndarray::Zip::from(&self.votes)
            .and(&self.counts)
            .map_collect(|&v, &c| if c > 0.0 { v / c } else { 0.0 })
    }
}

/// A classifier chain. Link `j` predicts label `order[j]` from
/// `[x, y_order[0], ..., y_order[j-1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub order: Vec<usize>,
    pub links: Vec<LogisticModel>,
}

impl Chain {
    pub fn new(order: Vec<usize>, links: Vec<LogisticModel>, n_features: usize) -> Result<Self> {
        check_permutation(&order, order.len())?;
        check_dim(order.len(), links.len())?;
        for (j, link) in links.iter().enumerate() {
            check_dim(n_features + j, link.n_features())?;
        }
        Ok(Self { order, links })
    }

    /// Per-label link probabilities (in label order) plus the augmented input
    /// each link consumed. Predecessor slots hold thresholded 0/1 outputs.
    pub fn predict_with_trace(
        &self,
        x: ArrayView1<'_, f64>,
        threshold: f64,
    ) -> Result<(Array1<f64>, Vec<Array1<f64>>)> {
        let d = x.len();
        let l = self.order.len();
        let mut aug = Array1::zeros(d + l.saturating_sub(1));
        aug.slice_mut(s![..d]).assign(&x);
        let mut probs = Array1::zeros(l);
        let mut trace = Vec::with_capacity(l);
        for (j, (&label, link)) in self.order.iter().zip(&self.links).enumerate() {
            let input = aug.slice(s![..d + j]);
            let p = link.predict_prob(input)?;
            trace.push(input.to_owned());
            probs[label] = p;
            if j + 1 < l {
                aug[d + j] = f64::from(u8::from(p >= threshold));
            }
        }
        Ok((probs, trace))
    }

    fn probs(&self, x: ArrayView1<'_, f64>, threshold: f64) -> Result<Array1<f64>> {
        Ok(self.predict_with_trace(x, threshold)?.0)
    }
}

/// Softmax over the labelsets observed for `labels` in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPowerset {
    /// Label columns covered, ascending.
    pub labels: Vec<usize>,
    /// Class id `c` decodes to `labelsets[c]`, aligned with `labels`.
    pub labelsets: Vec<Vec<u8>>,
    pub model: SoftmaxModel,
}

impl LabelPowerset {
    pub fn decode(&self, x: ArrayView1<'_, f64>) -> Result<&[u8]> {
        Ok(&self.labelsets[self.model.predict_class(x)?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairModel {
    /// `(j, k)` with `j < k`.
    pub pair: (usize, usize),
    /// Class `2·y_j + y_k`.
    pub model: SoftmaxModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Members {
    Br(Vec<LogisticModel>),
    Cc(Chain),
    Ecc(Vec<Chain>),
    Lp(LabelPowerset),
    Rakel {
        k: usize,
        sets: Vec<LabelPowerset>,
        /// Labels in no subset; always predicted 0.
        uncovered: Vec<usize>,
    },
    Fw(Vec<PairModel>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlcModel {
    n_features: usize,
    n_labels: usize,
    threshold: f64,
    members: Members,
}

impl MlcModel {
    /// Assemble a model from trained or hand-set members.
    pub fn new(
        n_features: usize,
        n_labels: usize,
        threshold: f64,
        members: Members,
    ) -> Result<Self> {
        BaseConfig {
            threshold,
            ..BaseConfig::default()
        }
        .validate()?;
        let model = Self {
            n_features,
            n_labels,
            threshold,
            members,
        };
        model.check_structure()?;
        Ok(model)
    }

    fn check_structure(&self) -> Result<()> {
        let (d, l) = (self.n_features, self.n_labels);
        let check_lp = |lp: &LabelPowerset| -> Result<()> {
            check_dim(d, lp.model.n_features())?;
            check_dim(lp.labelsets.len(), lp.model.class_labels().len())?;
            if lp.labels.iter().any(|&j| j >= l)
                || lp.labelsets.iter().any(|s| s.len() != lp.labels.len())
            {
                return Err(Error::Validation(
                    "labelset table does not match its label subset".into(),
                ));
            }
            Ok(())
        };
        match &self.members {
            Members::Br(models) => {
                check_dim(l, models.len())?;
                models.iter().try_for_each(|m| check_dim(d, m.n_features()))
            }
            Members::Cc(chain) => {
                check_dim(l, chain.order.len())?;
                Chain::new(chain.order.clone(), chain.links.clone(), d).map(|_| ())
            }
            Members::Ecc(chains) => {
                if chains.is_empty() {
                    return Err(Error::Validation("ECC needs at least one chain".into()));
                }
                chains.iter().try_for_each(|c| {
                    check_dim(l, c.order.len())?;
                    Chain::new(c.order.clone(), c.links.clone(), d).map(|_| ())
                })
            }
            Members::Lp(lp) => {
                check_dim(l, lp.labels.len())?;
                check_lp(lp)
            }
            Members::Rakel { sets, .. } => sets.iter().try_for_each(check_lp),
            Members::Fw(pairs) => {
                check_dim(l * l.saturating_sub(1) / 2, pairs.len())?;
                pairs.iter().try_for_each(|p| {
                    check_dim(d, p.model.n_features())?;
                    if p.pair.0 >= p.pair.1 || p.pair.1 >= l {
                        return Err(Error::Validation(format!("bad label pair {:?}", p.pair)));
                    }
                    Ok(())
                })
            }
        }
    }

    pub fn kind(&self) -> MlcKind {
        match self.members {
            Members::Br(_) => MlcKind::Br,
            Members::Cc(_) => MlcKind::Cc,
            Members::Ecc(_) => MlcKind::Ecc,
            Members::Lp(_) => MlcKind::Lp,
            Members::Rakel { .. } => MlcKind::Rakel,
            Members::Fw(_) => MlcKind::Fw,
        }
    }

    pub fn members(&self) -> &Members {
        &self.members
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Number of trained base models.
    pub fn n_base_models(&self) -> usize {
        match &self.members {
            Members::Br(m) => m.len(),
            Members::Cc(c) => c.links.len(),
            Members::Ecc(cs) => cs.iter().map(|c| c.links.len()).sum(),
            Members::Lp(_) => 1,
            Members::Rakel { sets, .. } => sets.len(),
            Members::Fw(p) => p.len(),
        }
    }

    /// Per-label scores in `[0,1]` that [`MlcModel::predict`] thresholds:
    /// probabilities for BR/CC, vote fractions for ensembles, 0/1 bits for LP.
    pub fn scores(&self, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        check_dim(self.n_features, x.len())?;
        let l = self.n_labels;
        let t = self.threshold;
        Ok(match &self.members {
            Members::Br(models) => models
                .iter()
                .map(|m| m.predict_prob(x))
                .collect::<Result<_>>()?,
            Members::Cc(chain) => chain.probs(x, t)?,
            Members::Ecc(chains) => {
                let mut votes = VoteMatrix::new(l);
                for chain in chains {
                    for (j, p) in chain.probs(x, t)?.iter().enumerate() {
                        votes.add(j, u8::from(*p >= t));
                    }
                }
                votes.fractions()
            }
            Members::Lp(lp) => {
                let mut out = Array1::zeros(l);
                for (&j, &b) in lp.labels.iter().zip(lp.decode(x)?) {
                    out[j] = f64::from(b);
                }
                out
            }
            Members::Rakel { sets, .. } => {
                let mut votes = VoteMatrix::new(l);
                for lp in sets {
                    for (&j, &b) in lp.labels.iter().zip(lp.decode(x)?) {
                        votes.add(j, b);
                    }
                }
                votes.fractions()
            }
            Members::Fw(pairs) => {
                let mut votes = VoteMatrix::new(l);
                for p in pairs {
                    let class = p.model.predict_class(x)?;
                    votes.add(p.pair.0, (class >> 1) as u8 & 1);
                    votes.add(p.pair.1, class as u8 & 1);
                }
                votes.fractions()
            }
        })
    }

    /// Binary label vector of length `L`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Vec<u8>> {
        let t = self.threshold;
        Ok(self.scores(x)?.iter().map(|&s| u8::from(s >= t)).collect())
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<u8>> {
        check_dim(self.n_features, x.ncols())?;
        let rows = par::try_map_indexed(x.nrows(), |i| self.predict(x.row(i)))?;
        let flat: Vec<u8> = rows.into_iter().flatten().collect();
        Ok(Array2::from_shape_vec((x.nrows(), self.n_labels), flat).expect("rows of length L"))
    }

    pub fn scores_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.n_features, x.ncols())?;
        let rows = par::try_map_indexed(x.nrows(), |i| self.scores(x.row(i)))?;
        let flat: Vec<f64> = rows.into_iter().flat_map(|r| r.into_iter()).collect();
        Ok(Array2::from_shape_vec((x.nrows(), self.n_labels), flat).expect("rows of length L"))
    }
}

fn check_permutation(order: &[usize], l: usize) -> Result<()> {
    let mut seen = vec![false; l];
    for &j in order {
        if j >= l || std::mem::replace(&mut seen[j], true) {
            return Err(Error::Argument(format!(
                "{order:?} is not a permutation of 0..{l}"
            )));
        }
    }
    if order.len() != l {
        return Err(Error::Argument(format!(
            "{order:?} is not a permutation of 0..{l}"
        )));
    }
    Ok(())
}

/// Fit the transformation named by `cfg.kind`.
pub fn fit(ds: &Dataset, cfg: &MlcConfig, seed: u64) -> Result<MlcModel> {
    match cfg.kind {
        MlcKind::Br => fit_br(ds, &cfg.base),
        MlcKind::Cc => {
            let order = cfg
                .cc_order
                .clone()
                .unwrap_or_else(|| (0..ds.n_labels()).collect());
            fit_cc(ds, &order, &cfg.base)
        }
        MlcKind::Ecc => fit_ecc(ds, cfg.n_chains, &cfg.base, seed),
        MlcKind::Lp => fit_lp(ds, &cfg.base),
        MlcKind::Rakel => {
            let m = cfg.rakel_m.unwrap_or(2 * ds.n_labels());
            fit_rakel(ds, cfg.rakel_k, m, &cfg.base, seed)
        }
        MlcKind::Fw => fit_fw(ds, &cfg.base),
    }
}

pub fn fit_br(ds: &Dataset, base: &BaseConfig) -> Result<MlcModel> {
    base.validate()?;
    let (x, y) = (ds.features(), ds.labels());
    let models = par::try_map_indexed(ds.n_labels(), |j| {
        fit_logistic(x, y.column(j), &base.linear)
    })?;
    MlcModel::new(
        ds.n_features(),
        ds.n_labels(),
        base.threshold,
        Members::Br(models),
    )
}

fn fit_chain(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, u8>,
    order: &[usize],
    lin: &LinearConfig,
) -> Result<Chain> {
    let d = x.ncols();
    let truth = y.select(Axis(1), order).mapv(f64::from);
    let aug = concatenate(Axis(1), &[x, truth.view()]).expect("same row count");
    let links = order
        .iter()
        .enumerate()
        .map(|(j, &label)| fit_logistic(aug.slice(s![.., ..d + j]), y.column(label), lin))
        .collect::<Result<Vec<_>>>()?;
    Ok(Chain {
        order: order.to_vec(),
        links,
    })
}

/// Links train on ground-truth predecessor labels.
pub fn fit_cc(ds: &Dataset, order: &[usize], base: &BaseConfig) -> Result<MlcModel> {
    base.validate()?;
    check_permutation(order, ds.n_labels())?;
    let chain = fit_chain(ds.features(), ds.labels(), order, &base.linear)?;
    MlcModel::new(
        ds.n_features(),
        ds.n_labels(),
        base.threshold,
        Members::Cc(chain),
    )
}

/// Label order of ECC member `index`.
pub fn ecc_chain_order(n_labels: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_labels).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(
        seed,
        "ecc-chain",
        index as u64,
    )));
    order
}

pub fn fit_ecc(ds: &Dataset, n_chains: usize, base: &BaseConfig, seed: u64) -> Result<MlcModel> {
    base.validate()?;
    if n_chains == 0 {
        return Err(Error::Argument("ECC needs at least one chain".into()));
    }
    let (x, y) = (ds.features(), ds.labels());
    let chains = par::try_map_indexed(n_chains, |i| {
        fit_chain(x, y, &ecc_chain_order(ds.n_labels(), seed, i), &base.linear)
    })?;
    MlcModel::new(
        ds.n_features(),
        ds.n_labels(),
        base.threshold,
        Members::Ecc(chains),
    )
}

fn fit_powerset(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, u8>,
    labels: &[usize],
    lin: &LinearConfig,
) -> Result<LabelPowerset> {
    let rows: Vec<Vec<u8>> = y
        .rows()
        .into_iter()
        .map(|r| labels.iter().map(|&j| r[j]).collect())
        .collect();
    let mut ids: BTreeMap<&[u8], usize> = rows.iter().map(|r| (r.as_slice(), 0)).collect();
    for (c, id) in ids.values_mut().enumerate() {
        *id = c;
    }
    let labelsets: Vec<Vec<u8>> = ids.keys().map(|k| k.to_vec()).collect();
    let classes: Vec<usize> = rows.iter().map(|r| ids[r.as_slice()]).collect();
    let model = fit_softmax(x, &classes, lin)?;
    Ok(LabelPowerset {
        labels: labels.to_vec(),
        labelsets,
        model,
    })
}

/// Classes are the distinct labelsets seen in training, in lexicographic order.
pub fn fit_lp(ds: &Dataset, base: &BaseConfig) -> Result<MlcModel> {
    base.validate()?;
    let labels: Vec<usize> = (0..ds.n_labels()).collect();
    let lp = fit_powerset(ds.features(), ds.labels(), &labels, &base.linear)?;
    MlcModel::new(
        ds.n_features(),
        ds.n_labels(),
        base.threshold,
        Members::Lp(lp),
    )
}

pub fn fit_rakel(
    ds: &Dataset,
    k: usize,
    m: usize,
    base: &BaseConfig,
    seed: u64,
) -> Result<MlcModel> {
    base.validate()?;
    let l = ds.n_labels();
    let subsets = rakel_subsets(l, k, m, derive_seed(seed, "rakel-subsets", 0))?;
    let mut covered = vec![false; l];
    subsets.iter().flatten().for_each(|&j| covered[j] = true);
    let uncovered: Vec<usize> = (0..l).filter(|&j| !covered[j]).collect();
    if !uncovered.is_empty() {
        log::warn!("rakel uncovered_labels={uncovered:?} k={k} m={m}");
    }
    let (x, y) = (ds.features(), ds.labels());
    let sets = par::try_map_indexed(subsets.len(), |i| {
        fit_powerset(x, y, &subsets[i], &base.linear)
    })?;
    MlcModel::new(
        ds.n_features(),
        l,
        base.threshold,
        Members::Rakel { k, sets, uncovered },
    )
}

pub fn fit_fw(ds: &Dataset, base: &BaseConfig) -> Result<MlcModel> {
    base.validate()?;
    let l = ds.n_labels();
    if l < 2 {
        return Err(Error::Argument(
            "pairwise four-class method needs L >= 2".into(),
        ));
    }
    let pairs: Vec<(usize, usize)> = (0..l)
        .flat_map(|j| (j + 1..l).map(move |k| (j, k)))
        .collect();
    let (x, y) = (ds.features(), ds.labels());
    let models = par::try_map_indexed(pairs.len(), |i| {
        let (j, k) = pairs[i];
        let classes: Vec<usize> = y
            .rows()
            .into_iter()
            .map(|r| 2 * usize::from(r[j]) + usize::from(r[k]))
            .collect();
        Ok(PairModel {
            pair: (j, k),
            model: fit_softmax(x, &classes, &base.linear)?,
        })
    })?;
    MlcModel::new(ds.n_features(), l, base.threshold, Members::Fw(models))
}

#[cfg(test)]
mod tests;
