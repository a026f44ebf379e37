//! Declarative experiments: split, tune, fit, evaluate, report.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::grid::{tune, GridCell, GridResult, GridSpec};
use crate::data::{
    load_dataset, split_indices, DataFormat, Dataset, DatasetStats, FoldIndices, SplitSpec,
};
use crate::error::{Error, Result};
use crate::metrics::MetricSet;
use crate::par;
use crate::pipeline::{fit_pipeline, Method, PipelineConfig};
use crate::rng::derive_seed;

pub const ACCURACY_CONVENTION: &str =
    "jaccard; an instance with empty true and predicted labelsets scores 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: PathBuf,
    #[serde(default)]
    pub format: Option<DataFormat>,
    /// ARFF `-C` convention; see [`load_dataset`].
    #[serde(default)]
    pub label_count: Option<i64>,
    pub methods: Vec<Method>,
    /// `None` uses the full default grid.
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default = "two")]
    pub folds: usize,
    #[serde(default)]
    pub fold_index: usize,
    #[serde(default)]
    pub threshold: Option<f64>,
    /// Worker threads; 0 uses the global pool.
    #[serde(default)]
    pub jobs: usize,
    /// Base settings shared by every method; `method` is ignored.
    #[serde(default)]
    pub pipeline: PipelineConfig,
}

fn two() -> usize {
    2
}

impl ExperimentConfig {
    pub fn new(dataset: impl Into<PathBuf>, methods: Vec<Method>) -> Self {
        Self {
            dataset: dataset.into(),
            format: None,
            label_count: None,
            methods,
            grid: None,
            seed: 0,
            out_dir: None,
            folds: 2,
            fold_index: 0,
            threshold: None,
            jobs: 0,
            pipeline: PipelineConfig::default(),
        }
    }

    /// Parse a JSON or TOML file. Relative paths inside resolve against the
    /// file's directory.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"))
        {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        if cfg.dataset.is_relative() {
            cfg.dataset = base.join(&cfg.dataset);
        }
        if let Some(out) = cfg.out_dir.as_mut().filter(|o| o.is_relative()) {
            *out = base.join(&*out);
        }
        Ok(cfg)
    }

    /// Schema checks that need no data.
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("experiment lists no methods".into()));
        }
        if self.folds < 2 || self.fold_index >= self.folds {
            return Err(Error::Config(format!(
                "fold_index {} invalid for {} folds",
                self.fold_index, self.folds
            )));
        }
        if let Some(t) = self.threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("threshold {t} not in (0,1)")));
            }
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        self.pipeline.rbm.validate()?;
        if !self.dataset.is_file() {
            return Err(Error::io(
                &self.dataset,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset not found"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub folds: usize,
    pub fold_index: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_hash: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub fit_seed: u64,
    pub metrics: MetricSet,
    pub chosen: Option<GridCell>,
    pub grid: Option<GridResult>,
    /// Full configuration of the final fit.
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub stats: DatasetStats,
    pub seed: u64,
    pub split: SplitRecord,
    pub accuracy_convention: String,
    pub methods: Vec<MethodReport>,
    /// Wall-clock seconds per phase; the only non-reproducible field.
    pub timings: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn without_timings(&self) -> Self {
        Self {
            timings: BTreeMap::new(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per method × metric.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| Error::Serde(e.to_string());
        w.write_record(["dataset", "method", "metric", "value"])
            .map_err(ser)?;
        for m in &self.methods {
            for (name, v) in [
                ("accuracy", m.metrics.accuracy),
                ("hamming_loss", m.metrics.hamming_loss),
                ("exact_match", m.metrics.exact_match),
            ] {
                w.write_record([
                    self.dataset.as_str(),
                    m.method.name(),
                    name,
                    &format!("{v:.6}"),
                ])
                .map_err(ser)?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
            .map_err(|e| Error::Serde(e.to_string()))
    }

    /// Write `report.json` and `report.csv` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("report.json", self.to_json()?),
            ("report.csv", self.to_csv()?),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Fold `fold_index` of a seeded `folds`-way split: the fold is the test set.
pub fn experiment_split(
    ds: &Dataset,
    folds: usize,
    fold_index: usize,
    seed: u64,
) -> Result<(Dataset, Dataset, FoldIndices)> {
    let split_seed = derive_seed(seed, "experiment-split", 0);
    let mut all = split_indices(ds.n_instances(), SplitSpec::kfold(folds, split_seed))?;
    if fold_index >= all.len() {
        return Err(Error::Argument(format!("fold {fold_index} of {folds}")));
    }
    let fold = all.swap_remove(fold_index);
    Ok((
        ds.select_rows(&fold.train)?,
        ds.select_rows(&fold.test)?,
        fold,
    ))
}

/// Tune (when applicable), fit on `train`, score on `test`.
///
/// The fit seed depends only on `seed` and the method name, so the result does
/// not depend on which other methods run alongside.
pub fn evaluate_method(
    train: &Dataset,
    test: &Dataset,
    base: &PipelineConfig,
    method: Method,
    grid: &GridSpec,
    seed: u64,
    timings: &mut BTreeMap<String, f64>,
) -> Result<MethodReport> {
    let mut cfg = PipelineConfig {
        method,
        ..base.clone()
    };
    let t0 = Instant::now();
    let grid_result = tune(train, &cfg, grid, derive_seed(seed, "grid", 0))?;
    if let Some(g) = &grid_result {
        g.chosen.apply(&mut cfg);
        timings.insert(format!("{method}.tune"), t0.elapsed().as_secs_f64());
        log::info!(
            "tuned method={method} u={} eta={} alpha={}",
            g.chosen.n_hidden,
            g.chosen.learning_rate,
            g.chosen.momentum
        );
    }
    let fit_seed = derive_seed(seed, method.name(), 0);
    let t1 = Instant::now();
    let (model, _) = fit_pipeline(train, &cfg, fit_seed)?;
    timings.insert(format!("{method}.fit"), t1.elapsed().as_secs_f64());
    let t2 = Instant::now();
    let metrics = MetricSet::compute(test.labels(), model.predict_batch(test.features())?.view())?;
    timings.insert(format!("{method}.predict"), t2.elapsed().as_secs_f64());
    log::info!("evaluated method={method} {metrics}");
    Ok(MethodReport {
        method,
        fit_seed,
        metrics,
        chosen: grid_result.as_ref().map(|g| g.chosen),
        grid: grid_result,
        config: cfg,
    })
}

/// Run the configured protocol and write the report when `out_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    par::with_jobs(cfg.jobs, || run_inner(cfg))?
}

fn run_inner(cfg: &ExperimentConfig) -> Result<EvalReport> {
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let ds = load_dataset(&cfg.dataset, cfg.format, cfg.label_count)?;
    timings.insert("load".into(), t0.elapsed().as_secs_f64());
    log::info!("loaded dataset={} {}", ds.name(), ds.stats());

    let (train, test, fold) = experiment_split(&ds, cfg.folds, cfg.fold_index, cfg.seed)?;
    let mut base = cfg.pipeline.clone();
    if let Some(t) = cfg.threshold {
        base.set_threshold(t);
    }
    let grid = cfg.grid.clone().unwrap_or_default();
    let methods = cfg
        .methods
        .iter()
        .map(|&m| evaluate_method(&train, &test, &base, m, &grid, cfg.seed, &mut timings))
        .collect::<Result<Vec<_>>>()?;

    let report = EvalReport {
        dataset: ds.name().to_string(),
        stats: ds.stats(),
        seed: cfg.seed,
        split: SplitRecord {
            seed: derive_seed(cfg.seed, "experiment-split", 0),
            folds: cfg.folds,
            fold_index: cfg.fold_index,
            n_train: train.n_instances(),
            n_test: test.n_instances(),
            test_hash: fold.test_hash(),
        },
        accuracy_convention: ACCURACY_CONVENTION.into(),
        methods,
        timings,
    };
    if let Some(dir) = &cfg.out_dir {
        report.write(dir)?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::write_csv;
    use ndarray::Array2;

    fn fixture_csv(dir: &Path) -> PathBuf {
        let x = Array2::from_shape_fn((10, 3), |(i, j)| ((i * 7 + j * 3) % 10) as f64 / 10.0);
        let y = Array2::from_shape_fn((10, 2), |(i, j)| u8::from(x[[i, j]] > 0.4));
        let ds = Dataset::from_arrays("fixture", x, y).unwrap();
        let p = dir.join("fixture.csv");
        write_csv(&ds, &p).unwrap();
        p
    }

    #[test]
    fn br_smoke_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = ExperimentConfig::new(fixture_csv(dir.path()), vec![Method::Br]);
        cfg.label_count = Some(2);
        cfg.out_dir = Some(dir.path().join("out"));
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.methods.len(), 1);
        assert_eq!(a.split.n_train + a.split.n_test, 10);
        let csv = std::fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(
            a.without_timings().to_json().unwrap(),
            b.without_timings().to_json().unwrap()
        );
    }

    #[test]
    fn schema_errors_surface_before_training() {
        let mut cfg = ExperimentConfig::new("/nonexistent/x.arff", vec![Method::Br]);
        assert!(matches!(run_experiment(&cfg), Err(Error::Io { .. })));
        cfg.methods.clear();
        assert!(matches!(run_experiment(&cfg), Err(Error::Config(_))));
        let err = serde_json::from_str::<ExperimentConfig>(
            r#"{"dataset":"a","methods":["br"],"bogus":1}"#,
        );
        assert!(err.is_err());
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"dataset":"a","methods":["svm"]}"#);
        assert!(err.is_err());
    }

    #[test]
    fn toml_config_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        fixture_csv(dir.path());
        let p = dir.path().join("exp.toml");
        std::fs::write(
            &p,
            "dataset = \"fixture.csv\"\nlabel_count = 2\nmethods = [\"br\", \"lp\"]\nseed = 3\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_path(&p).unwrap();
        assert_eq!(cfg.dataset, dir.path().join("fixture.csv"));
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(
            r.methods.iter().map(|m| m.method).collect::<Vec<_>>(),
            vec![Method::Br, Method::Lp]
        );
    }

    #[test]
    fn split_is_half_and_seeded() {
        let ds = Dataset::from_arrays("t", Array2::zeros((9, 1)), Array2::from_elem((9, 1), 1u8))
            .unwrap();
        let (tr, te, f) = experiment_split(&ds, 2, 0, 1).unwrap();
        assert_eq!((tr.n_instances(), te.n_instances()), (4, 5));
        let (_, _, g) = experiment_split(&ds, 2, 0, 1).unwrap();
        assert_eq!(f, g);
    }
}
