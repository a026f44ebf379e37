//! Cross-validated selection of RBM hyperparameters.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{split_indices, Dataset, FoldIndices, SplitSpec};
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::par;
use crate::pipeline::{fit_pipeline, Method, PipelineConfig};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbnSetting {
    pub learning_rate: f64,
    pub momentum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub u_values: Vec<usize>,
    pub eta_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub folds: usize,
    /// Candidates for stack methods, compared on a single holdout split.
    pub dbn_settings: Vec<DbnSetting>,
    pub dbn_train_fraction: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            u_values: vec![30, 60, 120, 240],
            eta_values: vec![0.1, 0.01, 0.001],
            alpha_values: vec![0.2, 0.4, 0.8],
            folds: 3,
            dbn_settings: vec![DbnSetting {
                learning_rate: 0.1,
                momentum: 0.8,
            }],
            dbn_train_fraction: 0.67,
        }
    }
}

impl GridSpec {
    /// `u ∈ {60,120}`, `η = 0.1`, `α = 0.8`.
    pub fn reduced() -> Self {
        Self {
            u_values: vec![60, 120],
            eta_values: vec![0.1],
            alpha_values: vec![0.8],
            ..Self::default()
        }
    }

    pub fn single(n_hidden: usize, learning_rate: f64, momentum: f64) -> Self {
        Self {
            u_values: vec![n_hidden],
            eta_values: vec![learning_rate],
            alpha_values: vec![momentum],
            dbn_settings: vec![DbnSetting {
                learning_rate,
                momentum,
            }],
            ..Self::default()
        }
    }

    /// JSON, or TOML when the extension is `.toml`.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let grid: GridSpec = if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("toml"))
        {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u_values.is_empty()
            || self.eta_values.is_empty()
            || self.alpha_values.is_empty()
            || self.dbn_settings.is_empty()
        {
            return Err(Error::Config("grid lists must be non-empty".into()));
        }
        if self.u_values.contains(&0) {
            return Err(Error::Config("grid hidden-unit counts must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "grid needs >= 2 folds, got {}",
                self.folds
            )));
        }
        if !(self.dbn_train_fraction > 0.0 && self.dbn_train_fraction < 1.0) {
            return Err(Error::Config("dbn_train_fraction must lie in (0,1)".into()));
        }
        Ok(())
    }

    /// Cells in `u`-major order.
    pub fn cells(&self) -> Vec<GridCell> {
        let mut out = Vec::new();
        for &n_hidden in &self.u_values {
            for &learning_rate in &self.eta_values {
                for &momentum in &self.alpha_values {
                    out.push(GridCell {
                        n_hidden,
                        learning_rate,
                        momentum,
                    });
                }
            }
        }
        out
    }

    fn dbn_cells(&self) -> Vec<GridCell> {
        self.dbn_settings
            .iter()
            .map(|s| GridCell {
                n_hidden: 0,
                learning_rate: s.learning_rate,
                momentum: s.momentum,
            })
            .collect()
    }
}

/// One hyperparameter point. `n_hidden == 0` leaves stack widths untouched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub n_hidden: usize,
    pub learning_rate: f64,
    pub momentum: f64,
}

impl GridCell {
    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if self.n_hidden > 0 {
            cfg.rbm.n_hidden = self.n_hidden;
        }
        cfg.rbm.learning_rate = self.learning_rate;
        cfg.rbm.momentum = self.momentum;
    }

    /// Tie-break order: smaller `u`, then larger `η`, then smaller `α`.
    fn preference(&self, other: &Self) -> Ordering {
        self.n_hidden
            .cmp(&other.n_hidden)
            .then(other.learning_rate.total_cmp(&self.learning_rate))
            .then(self.momentum.total_cmp(&other.momentum))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum Validation {
    KFold { folds: usize },
    Holdout { train_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: GridCell,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: Option<f64>,
    /// Set when a fold failed; the cell is then excluded.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub chosen: GridCell,
    pub validation: Validation,
    /// Test-row fingerprint of each selection fold.
    pub split_hashes: Vec<u64>,
    /// Empty when there was only one candidate.
    pub table: Vec<CellResult>,
}

fn check_disjoint(fold: &FoldIndices) -> Result<()> {
    let test: BTreeSet<usize> = fold.test.iter().copied().collect();
    if fold.train.iter().any(|i| test.contains(i)) {
        return Err(Error::State(
            "selection fold leaks test rows into training".into(),
        ));
    }
    Ok(())
}

/// Score every cell on every fold and pick the best mean accuracy.
///
/// Each `(cell, fold)` pair is one independent job; fold `f` always uses the
/// same fit seed so cells are compared on equal footing.
pub fn grid_search(
    ds: &Dataset,
    cfg: &PipelineConfig,
    cells: &[GridCell],
    validation: Validation,
    seed: u64,
) -> Result<GridResult> {
    let Some(&first) = cells.first() else {
        return Err(Error::Config("grid has no cells".into()));
    };
    if cells.len() == 1 {
        return Ok(GridResult {
            chosen: first,
            validation,
            split_hashes: Vec::new(),
            table: Vec::new(),
        });
    }
    let split_seed = derive_seed(seed, "grid-split", 0);
    let spec = match validation {
        Validation::KFold { folds } => {
            if ds.n_instances() < folds {
                return Err(Error::Validation(format!(
                    "{} instances cannot fill {folds} folds",
                    ds.n_instances()
                )));
            }
            SplitSpec::kfold(folds, split_seed)
        }
        Validation::Holdout { train_fraction } => SplitSpec::holdout(train_fraction, split_seed),
    };
    let folds = split_indices(ds.n_instances(), spec)?;
    folds.iter().try_for_each(check_disjoint)?;
    let parts = folds
        .iter()
        .map(|f| Ok((ds.select_rows(&f.train)?, ds.select_rows(&f.test)?)))
        .collect::<Result<Vec<_>>>()?;
    let n_folds = parts.len();

    let scores = par::map_indexed(cells.len() * n_folds, |job| -> Result<f64> {
        let (c, f) = (job / n_folds, job % n_folds);
        let mut cell_cfg = cfg.clone();
        cells[c].apply(&mut cell_cfg);
        let (train, test) = &parts[f];
        let (model, _) = fit_pipeline(train, &cell_cfg, derive_seed(seed, "grid-fit", f as u64))?;
        let acc = accuracy(test.labels(), model.predict_batch(test.features())?.view())?;
        log::info!(
            "grid method={} cell={c} u={} eta={} alpha={} fold={f} accuracy={acc:.4}",
            cfg.method,
            cells[c].n_hidden,
            cells[c].learning_rate,
            cells[c].momentum
        );
        Ok(acc)
    });

    let mut table = Vec::with_capacity(cells.len());
    for (c, cell) in cells.iter().enumerate() {
        let mut fold_accuracy = Vec::with_capacity(n_folds);
        let mut error = None;
        for r in &scores[c * n_folds..(c + 1) * n_folds] {
            match r {
                Ok(a) => fold_accuracy.push(*a),
                Err(e) => {
                    log::warn!("grid method={} cell={c} skipped error=\"{e}\"", cfg.method);
                    error = Some(e.to_string());
                    break;
                }
            }
        }
        let mean_accuracy = error
            .is_none()
            .then(|| fold_accuracy.iter().sum::<f64>() / n_folds as f64);
        table.push(CellResult {
            cell: *cell,
            fold_accuracy,
            mean_accuracy,
            error,
        });
    }

    let chosen = table
        .iter()
        .filter_map(|r| r.mean_accuracy.map(|a| (a, r.cell)))
        .max_by(|(a, ca), (b, cb)| a.total_cmp(b).then(cb.preference(ca)))
        .map(|(_, cell)| cell)
        .ok_or_else(|| Error::Training {
            epoch: 0,
            msg: format!("every grid cell failed for {}", cfg.method),
        })?;
    Ok(GridResult {
        chosen,
        validation,
        split_hashes: folds.iter().map(FoldIndices::test_hash).collect(),
        table,
    })
}

/// Select hyperparameters for `cfg.method`: k-fold CV over the RBM grid for
/// single-RBM methods, one holdout split over `dbn_settings` for pretrained
/// stacks, nothing for the rest.
pub fn tune(
    ds: &Dataset,
    cfg: &PipelineConfig,
    grid: &GridSpec,
    seed: u64,
) -> Result<Option<GridResult>> {
    grid.validate()?;
    let method = cfg.method;
    if method.uses_rbm() {
        let v = Validation::KFold { folds: grid.folds };
        grid_search(ds, cfg, &grid.cells(), v, seed).map(Some)
    } else if matches!(method, Method::Dbn2Ecc | Method::Dbn3Bp) {
        let v = Validation::Holdout {
            train_fraction: grid.dbn_train_fraction,
        };
        grid_search(ds, cfg, &grid.dbn_cells(), v, seed).map(Some)
    } else {
        Ok(None)
    }
}
