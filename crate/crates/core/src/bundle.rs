//! On-disk model bundles.
//!
//! ```text
//! <dir>/manifest.json     method, shape, threshold, seed, orders and subsets
//! <dir>/scaling.json      min-max parameters fitted on the training set
//! <dir>/members/NNN.json  one file per ensemble member (classifier heads)
//! <dir>/extractor.bin     MLRBM1 or MLDBN1 feature extractor, when present
//! <dir>/network.bin       MLDBN1 container with a label layer (network heads)
//! ```
//!
//! Writing is deterministic: the same pipeline always produces the same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::ScalingParams;
use crate::dbn::DbnStack;
use crate::error::{Error, Result};
use crate::linear::LogisticModel;
use crate::pipeline::{FeatureExtractor, Head, Method, Pipeline};
use crate::rbm::Rbm;
use crate::transforms::{Chain, LabelPowerset, Members, MlcKind, MlcModel, PairModel};

pub const BUNDLE_FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCALING_FILE: &str = "scaling.json";
pub const MEMBERS_DIR: &str = "members";
pub const EXTRACTOR_FILE: &str = "extractor.bin";
pub const NETWORK_FILE: &str = "network.bin";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Identity,
    Rbm,
    Stack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub method: Method,
    /// Classifier-head kind; `None` for network heads.
    pub kind: Option<MlcKind>,
    pub seed: u64,
    pub n_features: usize,
    pub n_labels: usize,
    pub threshold: f64,
    pub extractor: ExtractorKind,
    /// Chain orders (CC, ECC), one per member.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<Vec<usize>>,
    /// Label subsets (LP, RAkEL, FW pairs), one per member.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subsets: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rakel_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub uncovered: Vec<usize>,
    /// Member file names relative to the bundle root, in member order.
    pub members: Vec<String>,
}

fn member_name(i: usize) -> String {
    format!("{MEMBERS_DIR}/{i:03}.json")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_slice(&read_file(path)?)
        .map_err(|e| Error::Serde(format!("{}: {e}", path.display())))
}

fn member_files<T: Serialize>(items: &[T]) -> Result<Vec<Vec<u8>>> {
    items.iter().map(json).collect()
}

/// Write `pipeline` to `dir`, creating it if needed. Stale member files from
/// an earlier bundle in the same directory are removed.
pub fn save_bundle(pipeline: &Pipeline, dir: impl AsRef<Path>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let members_dir = dir.join(MEMBERS_DIR);
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if members_dir.exists() {
        for entry in fs::read_dir(&members_dir).map_err(|e| Error::io(&members_dir, e))? {
            let path = entry.map_err(|e| Error::io(&members_dir, e))?.path();
            if path.extension().is_some_and(|e| e == "json") {
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
    }
    for stale in [EXTRACTOR_FILE, NETWORK_FILE] {
        let p = dir.join(stale);
        if p.exists() {
            fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
        }
    }

    let mut manifest = Manifest {
        format_version: BUNDLE_FORMAT_VERSION,
        method: pipeline.method,
        kind: None,
        seed: pipeline.seed,
        n_features: pipeline.n_features(),
        n_labels: pipeline.n_labels,
        threshold: 0.0,
        extractor: ExtractorKind::Identity,
        orders: Vec::new(),
        subsets: Vec::new(),
        rakel_k: None,
        uncovered: Vec::new(),
        members: Vec::new(),
    };

    match &pipeline.extractor {
        FeatureExtractor::Identity => {}
        FeatureExtractor::Rbm(r) => {
            manifest.extractor = ExtractorKind::Rbm;
            write_file(&dir.join(EXTRACTOR_FILE), &r.to_bytes())?;
        }
        FeatureExtractor::Stack(s) => {
            manifest.extractor = ExtractorKind::Stack;
            write_file(&dir.join(EXTRACTOR_FILE), &s.to_container_bytes()?)?;
        }
    }

    let files = match &pipeline.head {
        Head::Network { stack, threshold } => {
            manifest.threshold = *threshold;
            write_file(&dir.join(NETWORK_FILE), &stack.to_container_bytes()?)?;
            Vec::new()
        }
        Head::Mlc(m) => {
            manifest.kind = Some(m.kind());
            manifest.threshold = m.threshold();
            match m.members() {
                Members::Br(models) => member_files(models)?,
                Members::Cc(chain) => {
                    manifest.orders = vec![chain.order.clone()];
                    vec![json(chain)?]
                }
                Members::Ecc(chains) => {
                    manifest.orders = chains.iter().map(|c| c.order.clone()).collect();
                    member_files(chains)?
                }
                Members::Lp(lp) => {
                    manifest.subsets = vec![lp.labels.clone()];
                    vec![json(lp)?]
                }
                Members::Rakel { k, sets, uncovered } => {
                    manifest.rakel_k = Some(*k);
                    manifest.uncovered = uncovered.clone();
                    manifest.subsets = sets.iter().map(|s| s.labels.clone()).collect();
                    member_files(sets)?
                }
                Members::Fw(pairs) => {
                    manifest.subsets = pairs.iter().map(|p| vec![p.pair.0, p.pair.1]).collect();
                    member_files(pairs)?
                }
            }
        }
    };
    if !files.is_empty() {
        fs::create_dir_all(&members_dir).map_err(|e| Error::io(&members_dir, e))?;
    }
    for (i, bytes) in files.iter().enumerate() {
        let name = member_name(i);
        write_file(&dir.join(&name), bytes)?;
        manifest.members.push(name);
    }

    write_file(&dir.join(SCALING_FILE), &json(&pipeline.scaling)?)?;
    write_file(&dir.join(MANIFEST_FILE), &json(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let manifest: Manifest = read_json(&dir.as_ref().join(MANIFEST_FILE))?;
    if manifest.format_version != BUNDLE_FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "bundle format version {} is not supported (expected {BUNDLE_FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

fn load_members<T: DeserializeOwned>(dir: &Path, manifest: &Manifest) -> Result<Vec<T>> {
    manifest
        .members
        .iter()
        .map(|name| read_json(&dir.join(name)))
        .collect()
}

fn single<T>(mut v: Vec<T>, what: &str) -> Result<T> {
    if v.len() != 1 {
        return Err(Error::Validation(format!(
            "{what} bundle must have exactly one member, found {}",
            v.len()
        )));
    }
    Ok(v.pop().expect("one member"))
}

fn agree(what: &str, manifest: &[Vec<usize>], members: Vec<Vec<usize>>) -> Result<()> {
    if manifest != members.as_slice() {
        return Err(Error::Validation(format!(
            "manifest {what} disagree with member files"
        )));
    }
    Ok(())
}

/// Load a bundle written by [`save_bundle`], cross-checking the manifest
/// against the member files.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<Pipeline> {
    let dir = dir.as_ref();
    let manifest = read_manifest(dir)?;
    let scaling: ScalingParams = read_json(&dir.join(SCALING_FILE))?;
    if scaling.n_features() != manifest.n_features {
        return Err(Error::Dimension {
            expected: manifest.n_features,
            got: scaling.n_features(),
        });
    }

    let extractor = match manifest.extractor {
        ExtractorKind::Identity => FeatureExtractor::Identity,
        ExtractorKind::Rbm => {
            FeatureExtractor::Rbm(Rbm::from_bytes(&read_file(&dir.join(EXTRACTOR_FILE))?)?)
        }
        ExtractorKind::Stack => FeatureExtractor::Stack(DbnStack::from_container_bytes(
            &read_file(&dir.join(EXTRACTOR_FILE))?,
        )?),
    };
    let head_dim = match &extractor {
        FeatureExtractor::Identity => manifest.n_features,
        FeatureExtractor::Rbm(r) => {
            crate::error::check_dim(manifest.n_features, r.n_visible())?;
            r.n_hidden()
        }
        FeatureExtractor::Stack(s) => {
            crate::error::check_dim(manifest.n_features, s.input_dim())?;
            s.feature_dim()
        }
    };

    let head = match manifest.kind {
        None => {
            let stack = DbnStack::from_container_bytes(&read_file(&dir.join(NETWORK_FILE))?)?;
            crate::error::check_dim(head_dim, stack.input_dim())?;
            if stack.n_labels() != Some(manifest.n_labels) {
                return Err(Error::Validation(
                    "network label layer does not match the manifest".into(),
                ));
            }
            Head::Network {
                stack,
                threshold: manifest.threshold,
            }
        }
        Some(kind) => {
            let members = match kind {
                MlcKind::Br => Members::Br(load_members::<LogisticModel>(dir, &manifest)?),
                MlcKind::Cc => {
                    let chain: Chain = single(load_members(dir, &manifest)?, "CC")?;
                    agree("orders", &manifest.orders, vec![chain.order.clone()])?;
                    Members::Cc(chain)
                }
                MlcKind::Ecc => {
                    let chains: Vec<Chain> = load_members(dir, &manifest)?;
                    agree(
                        "orders",
                        &manifest.orders,
                        chains.iter().map(|c| c.order.clone()).collect(),
                    )?;
                    Members::Ecc(chains)
                }
                MlcKind::Lp => {
                    let lp: LabelPowerset = single(load_members(dir, &manifest)?, "LP")?;
                    agree("subsets", &manifest.subsets, vec![lp.labels.clone()])?;
                    Members::Lp(lp)
                }
                MlcKind::Rakel => {
                    let sets: Vec<LabelPowerset> = load_members(dir, &manifest)?;
                    agree(
                        "subsets",
                        &manifest.subsets,
                        sets.iter().map(|s| s.labels.clone()).collect(),
                    )?;
                    let k = manifest
                        .rakel_k
                        .ok_or_else(|| Error::Validation("RAkEL bundle without rakel_k".into()))?;
                    Members::Rakel {
                        k,
                        sets,
                        uncovered: manifest.uncovered.clone(),
                    }
                }
                MlcKind::Fw => {
                    let pairs: Vec<PairModel> = load_members(dir, &manifest)?;
                    agree(
                        "subsets",
                        &manifest.subsets,
                        pairs.iter().map(|p| vec![p.pair.0, p.pair.1]).collect(),
                    )?;
                    Members::Fw(pairs)
                }
            };
            Head::Mlc(MlcModel::new(
                head_dim,
                manifest.n_labels,
                manifest.threshold,
                members,
            )?)
        }
    };

    Ok(Pipeline {
        method: manifest.method,
        seed: manifest.seed,
        n_labels: manifest.n_labels,
        scaling,
        extractor,
        head,
    })
}

/// Every file in a bundle, relative path and bytes, sorted by path.
pub fn bundle_files(dir: impl AsRef<Path>) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) -> Result<()> {
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let rel = path.strip_prefix(root).expect("under root").to_path_buf();
                out.push((rel, read_file(&path)?));
            }
        }
        Ok(())
    }
    let dir = dir.as_ref();
    let mut out = Vec::new();
    walk(dir, dir, &mut out)?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::linear::LinearConfig;
    use crate::pipeline::{fit_pipeline, PipelineConfig};
    use crate::rbm::RbmHyper;
    use crate::rng::rng_from_seed;
    use ndarray::Array2;
    use rand::Rng as _;

    fn toy() -> Dataset {
        let mut rng = rng_from_seed(3);
        let x = Array2::from_shape_simple_fn((24, 6), || rng.random::<f64>() * 2.0);
        let y = Array2::from_shape_fn((24, 3), |(i, j)| u8::from(x[[i, j]] + x[[i, j + 3]] > 2.0));
        Dataset::from_arrays("toy", x, y).unwrap()
    }

    fn quick(method: Method) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(method);
        cfg.rbm = RbmHyper {
            n_hidden: 5,
            epochs: 4,
            ..RbmHyper::default()
        };
        cfg.bp.epochs = 3;
        cfg.mlc.n_chains = 4;
        cfg.mlc.base.linear = LinearConfig {
            epochs: 20,
            ..LinearConfig::default()
        };
        cfg
    }

    #[test]
    fn every_method_round_trips_with_identical_predictions() {
        let ds = toy();
        for method in Method::ALL {
            let (p, _) = fit_pipeline(&ds, &quick(method), 11).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_bundle(&p, dir.path()).unwrap();
            let back = load_bundle(dir.path()).unwrap();
            assert_eq!(back, p, "{method}");
            assert_eq!(
                back.predict_batch(ds.features()).unwrap(),
                p.predict_batch(ds.features()).unwrap()
            );
        }
    }

    #[test]
    fn manifest_records_orders_and_subsets() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        let (p, _) = fit_pipeline(&ds, &quick(Method::Ecc), 1).unwrap();
        let m = save_bundle(&p, dir.path()).unwrap();
        assert_eq!(m.orders.len(), 4);
        assert_eq!(
            m.members,
            vec![
                "members/000.json",
                "members/001.json",
                "members/002.json",
                "members/003.json"
            ]
        );

        let (p, _) = fit_pipeline(&ds, &quick(Method::Fw), 1).unwrap();
        let m = save_bundle(&p, dir.path()).unwrap();
        assert_eq!(m.subsets, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(m.extractor, ExtractorKind::Identity);
        // the earlier four-member bundle left nothing behind
        assert_eq!(
            fs::read_dir(dir.path().join(MEMBERS_DIR)).unwrap().count(),
            3
        );
    }

    #[test]
    fn same_seed_same_bytes() {
        let ds = toy();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [&a, &b] {
            let (p, _) = fit_pipeline(&ds, &quick(Method::Dbn2Ecc), 5).unwrap();
            save_bundle(&p, dir.path()).unwrap();
        }
        let fa = bundle_files(a.path()).unwrap();
        assert!(fa.iter().any(|(p, _)| p == Path::new(EXTRACTOR_FILE)));
        assert_eq!(fa, bundle_files(b.path()).unwrap());
    }

    #[test]
    fn network_bundle_has_three_blocks() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        let (p, _) = fit_pipeline(&ds, &quick(Method::Dbn3Bp), 2).unwrap();
        let m = save_bundle(&p, dir.path()).unwrap();
        assert!(m.kind.is_none() && m.members.is_empty());
        let header =
            DbnStack::read_header(&fs::read(dir.path().join(NETWORK_FILE)).unwrap()).unwrap();
        assert_eq!(header.blocks.len(), 3);
        assert_eq!(header.n_labels, Some(3));
    }

    #[test]
    fn tampered_manifest_is_rejected() {
        let ds = toy();
        let dir = tempfile::tempdir().unwrap();
        let (p, _) = fit_pipeline(&ds, &quick(Method::Cc), 2).unwrap();
        let mut m = save_bundle(&p, dir.path()).unwrap();
        m.orders[0].reverse();
        fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_vec(&m).unwrap(),
        )
        .unwrap();
        assert!(matches!(load_bundle(dir.path()), Err(Error::Validation(_))));

        m.format_version = 9;
        fs::write(
            dir.path().join(MANIFEST_FILE),
            serde_json::to_vec(&m).unwrap(),
        )
        .unwrap();
        assert!(load_bundle(dir.path()).is_err());
        assert!(matches!(
            load_bundle(dir.path().join("nope")),
            Err(Error::Io { .. })
        ));
    }
}
