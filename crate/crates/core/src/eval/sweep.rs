//! Accuracy as a function of the number of hidden units.

use serde::{Deserialize, Serialize};

use super::experiment::experiment_split;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::accuracy;
use crate::pipeline::{fit_pipeline, Method, PipelineConfig};
use crate::rng::derive_seed;

pub const SWEEP_LEARNING_RATE: f64 = 0.1;
pub const SWEEP_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    /// `None` marks the raw-feature reference row.
    pub n_hidden: Option<usize>,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn accuracy_at(&self, method: Method, n_hidden: Option<usize>) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.n_hidden == n_hidden)
            .map(|r| r.accuracy)
    }

    /// `method,u,accuracy`; the raw row has `u = raw`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,u,accuracy\n");
        for r in &self.rows {
            let u = r
                .n_hidden
                .map_or_else(|| "raw".to_string(), |u| u.to_string());
            out.push_str(&format!("{},{u},{:.6}\n", r.method, r.accuracy));
        }
        out
    }
}

/// Train `cfg.method` on one half of a seeded 50/50 split for each `u` at
/// `η = 0.1, α = 0.1`, score on the other half, and add the raw-feature
/// counterpart as a reference row.
pub fn sweep_hidden_units(
    ds: &Dataset,
    cfg: &PipelineConfig,
    u_list: &[usize],
    seed: u64,
) -> Result<SweepTable> {
    if u_list.is_empty() {
        return Err(Error::Argument("hidden-unit list is empty".into()));
    }
    let raw = cfg
        .method
        .raw_counterpart()
        .filter(|_| cfg.method.uses_rbm())
        .ok_or_else(|| Error::Argument(format!("{} does not use RBM features", cfg.method)))?;
    let (train, test, _) = experiment_split(ds, 2, 0, seed)?;
    let fit_seed = derive_seed(seed, cfg.method.name(), 0);
    let score = |c: &PipelineConfig| -> Result<f64> {
        let (model, _) = fit_pipeline(&train, c, fit_seed)?;
        accuracy(test.labels(), model.predict_batch(test.features())?.view())
    };

    let mut table = SweepTable::default();
    for &u in u_list {
        let mut c = cfg.clone();
        c.rbm.n_hidden = u;
        c.rbm.learning_rate = SWEEP_LEARNING_RATE;
        c.rbm.momentum = SWEEP_MOMENTUM;
        let acc = score(&c)?;
        log::info!("sweep method={} u={u} accuracy={acc:.4}", cfg.method);
        table.rows.push(SweepRow {
            method: cfg.method,
            n_hidden: Some(u),
            accuracy: acc,
        });
    }
    let acc = score(&PipelineConfig {
        method: raw,
        ..cfg.clone()
    })?;
    table.rows.push(SweepRow {
        method: raw,
        n_hidden: None,
        accuracy: acc,
    });
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::RbmHyper;
    use ndarray::Array2;

    fn toy() -> Dataset {
        let x = Array2::from_shape_fn((12, 4), |(i, j)| ((i * 5 + j * 3) % 7) as f64);
        let y = Array2::from_shape_fn((12, 2), |(i, j)| u8::from(x[[i, j]] > 3.0));
        Dataset::from_arrays("toy", x, y).unwrap()
    }

    #[test]
    fn single_u_gives_one_row_plus_raw() {
        let mut cfg = PipelineConfig::new(Method::BrR);
        cfg.rbm = RbmHyper {
            epochs: 3,
            ..RbmHyper::default()
        };
        cfg.mlc.base.linear.epochs = 10;
        let t = sweep_hidden_units(&toy(), &cfg, &[4], 0).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.rows[1].method, Method::Br);
        let csv = t.to_csv();
        assert!(csv.lines().nth(2).unwrap().starts_with("br,raw,"));
        assert!(t.accuracy_at(Method::BrR, Some(4)).is_some());
    }

    #[test]
    fn rejects_non_rbm_methods_and_empty_lists() {
        assert!(sweep_hidden_units(&toy(), &PipelineConfig::new(Method::Br), &[4], 0).is_err());
        assert!(sweep_hidden_units(&toy(), &PipelineConfig::new(Method::BrR), &[], 0).is_err());
    }
}
