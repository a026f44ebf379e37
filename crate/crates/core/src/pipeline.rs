//! End-to-end methods: scale, optionally extract features, then classify.
//!
//! Features are always min-max scaled to `[0,1]` on the training set first,
//! for every method, so raw and RBM-feature variants see the same inputs.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, ScalingParams};
use crate::dbn::{
    attach_and_finetune, bpmll_baseline, greedy_pretrain, BpHyper, BpTrace, DbnStack,
};
use crate::error::{check_dim, Error, Result};
use crate::rbm::{cd_train, Rbm, RbmHyper};
use crate::rng::derive_seed;
use crate::transforms::{self, MlcConfig, MlcKind, MlcModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Br,
    Cc,
    Ecc,
    Lp,
    Rakel,
    Fw,
    BrR,
    CcR,
    EccR,
    RakR,
    FwR,
    Dbn2Ecc,
    Dbn3Bp,
    Bpnn,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Br,
        Method::Cc,
        Method::Ecc,
        Method::Lp,
        Method::Rakel,
        Method::Fw,
        Method::BrR,
        Method::CcR,
        Method::EccR,
        Method::RakR,
        Method::FwR,
        Method::Dbn2Ecc,
        Method::Dbn3Bp,
        Method::Bpnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Br => "br",
            Method::Cc => "cc",
            Method::Ecc => "ecc",
            Method::Lp => "lp",
            Method::Rakel => "rakel",
            Method::Fw => "fw",
            Method::BrR => "br_r",
            Method::CcR => "cc_r",
            Method::EccR => "ecc_r",
            Method::RakR => "rak_r",
            Method::FwR => "fw_r",
            Method::Dbn2Ecc => "dbn2_ecc",
            Method::Dbn3Bp => "dbn3_bp",
            Method::Bpnn => "bpnn",
        }
    }

    /// Transformation used as the classifier head, if any.
    pub fn head_kind(self) -> Option<MlcKind> {
        match self {
            Method::Br | Method::BrR => Some(MlcKind::Br),
            Method::Cc | Method::CcR => Some(MlcKind::Cc),
            Method::Ecc | Method::EccR | Method::Dbn2Ecc => Some(MlcKind::Ecc),
            Method::Lp => Some(MlcKind::Lp),
            Method::Rakel | Method::RakR => Some(MlcKind::Rakel),
            Method::Fw | Method::FwR => Some(MlcKind::Fw),
            Method::Dbn3Bp | Method::Bpnn => None,
        }
    }

    /// Methods whose features come from one RBM of `n_hidden` units.
    pub fn uses_rbm(self) -> bool {
        matches!(
            self,
            Method::BrR | Method::CcR | Method::EccR | Method::RakR | Method::FwR
        )
    }

    /// Methods built on a two-layer stack of width `⌈d/5⌉`.
    pub fn uses_stack(self) -> bool {
        matches!(self, Method::Dbn2Ecc | Method::Dbn3Bp | Method::Bpnn)
    }

    /// The same classifier on the original features.
    pub fn raw_counterpart(self) -> Option<Method> {
        match self {
            Method::BrR => Some(Method::Br),
            Method::CcR => Some(Method::Cc),
            Method::EccR | Method::Dbn2Ecc => Some(Method::Ecc),
            Method::RakR => Some(Method::Rakel),
            Method::FwR => Some(Method::Fw),
            _ => None,
        }
    }

    /// Methods with RBM hyperparameters to select.
    pub fn is_tunable(self) -> bool {
        self.uses_rbm() || matches!(self, Method::Dbn2Ecc | Method::Dbn3Bp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::Argument(format!(
                    "unknown method `{s}`; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// `⌈d/5⌉`, at least 1.
pub fn default_dbn_width(n_features: usize) -> usize {
    n_features.div_ceil(5).max(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub method: Method,
    /// `kind` is overridden by the method.
    pub mlc: MlcConfig,
    /// `n_hidden` applies to single-RBM methods; stacks use `dbn_widths`.
    pub rbm: RbmHyper,
    pub bp: BpHyper,
    /// `None` means two layers of [`default_dbn_width`].
    pub dbn_widths: Option<Vec<usize>>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            method: Method::Br,
            mlc: MlcConfig::default(),
            rbm: RbmHyper::default(),
            bp: BpHyper::default(),
            dbn_widths: None,
        }
    }
}

impl PipelineConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn widths(&self, n_features: usize) -> Vec<usize> {
        self.dbn_widths
            .clone()
            .unwrap_or_else(|| vec![default_dbn_width(n_features); 2])
    }

    pub fn threshold(&self) -> f64 {
        if self.method.head_kind().is_some() {
            self.mlc.base.threshold
        } else {
            self.bp.threshold
        }
    }

    pub fn set_threshold(&mut self, t: f64) {
        self.mlc.base.threshold = t;
        self.bp.threshold = t;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureExtractor {
    Identity,
    Rbm(Rbm),
    Stack(DbnStack),
}

impl FeatureExtractor {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            FeatureExtractor::Identity => Ok(x.to_owned()),
            FeatureExtractor::Rbm(r) => r.transform_batch(x),
            FeatureExtractor::Stack(s) => s.transform_batch(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Head {
    Mlc(MlcModel),
    /// Stack with a label layer, thresholded at `threshold`.
    Network {
        stack: DbnStack,
        threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub method: Method,
    pub seed: u64,
    pub n_labels: usize,
    pub scaling: ScalingParams,
    pub extractor: FeatureExtractor,
    pub head: Head,
}

/// Side information from training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub rbm_reconstruction_error: Option<f64>,
    pub bp: Option<BpTrace>,
}

impl Pipeline {
    pub fn n_features(&self) -> usize {
        self.scaling.n_features()
    }

    pub fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Array2<u8>> {
        check_dim(self.n_features(), x.ncols())?;
        let scaled = self.scaling.apply(x)?;
        let z = self.extractor.transform(scaled.view())?;
        match &self.head {
            Head::Mlc(m) => m.predict_batch(z.view()),
            Head::Network { stack, threshold } => stack.predict_labels_batch(z.view(), *threshold),
        }
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Vec<u8>> {
        let row = x.insert_axis(ndarray::Axis(0));
        Ok(self.predict_batch(row)?.row(0).to_vec())
    }
}

/// Train `cfg.method` on `ds`. Bitwise deterministic in `(ds, cfg, seed)`.
pub fn fit_pipeline(ds: &Dataset, cfg: &PipelineConfig, seed: u64) -> Result<(Pipeline, FitInfo)> {
    let scaling = ScalingParams::fit(ds.features());
    let scaled = scaling.apply_dataset(ds)?;
    let ext_seed = derive_seed(seed, "extractor", 0);
    let head_seed = derive_seed(seed, "head", 0);
    let widths = cfg.widths(ds.n_features());
    let mut info = FitInfo::default();

    let (extractor, head) = match cfg.method {
        Method::Dbn3Bp => {
            let stack = greedy_pretrain(scaled.features(), &widths, &cfg.rbm, ext_seed)?;
            let (net, trace) = attach_and_finetune(stack, &scaled, &cfg.bp, head_seed)?;
            info.bp = Some(trace);
            (FeatureExtractor::Identity, network(net, &cfg.bp))
        }
        Method::Bpnn => {
            let (net, trace) = bpmll_baseline(&scaled, &widths, &cfg.bp, head_seed)?;
            info.bp = Some(trace);
            (FeatureExtractor::Identity, network(net, &cfg.bp))
        }
        method => {
            let kind = method.head_kind().expect("classifier-head method");
            let extractor = if method.uses_rbm() {
                let (rbm, trace) = cd_train(scaled.features(), &cfg.rbm, ext_seed)?;
                info.rbm_reconstruction_error = trace.reconstruction_error.last().copied();
                FeatureExtractor::Rbm(rbm)
            } else if method.uses_stack() {
                FeatureExtractor::Stack(greedy_pretrain(
                    scaled.features(),
                    &widths,
                    &cfg.rbm,
                    ext_seed,
                )?)
            } else {
                FeatureExtractor::Identity
            };
            let z = match &extractor {
                FeatureExtractor::Identity => scaled,
                other => scaled.with_features(other.transform(scaled.features())?)?,
            };
            let mlc_cfg = MlcConfig {
                kind,
                ..cfg.mlc.clone()
            };
            (
                extractor,
                Head::Mlc(transforms::fit(&z, &mlc_cfg, head_seed)?),
            )
        }
    };
    log::debug!(
        "fitted method={} n={} seed={seed}",
        cfg.method,
        ds.n_instances()
    );
    Ok((
        Pipeline {
            method: cfg.method,
            seed,
            n_labels: ds.n_labels(),
            scaling,
            extractor,
            head,
        },
        info,
    ))
}

fn network(stack: DbnStack, bp: &BpHyper) -> Head {
    Head::Network {
        stack,
        threshold: bp.threshold,
    }
}
