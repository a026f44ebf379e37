//! Multi-label datasets: loading, validation, scaling and splitting.

mod arff;
mod csv_io;
mod scale;
mod split;

pub use arff::{load_arff, parse_arff, write_arff};
pub use csv_io::{load_csv, write_csv};
pub use scale::{scale_features, ScalingParams};
pub use split::{split, split_indices, FoldIndices, SplitMode, SplitSpec};

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Arff,
    Csv,
}

impl std::str::FromStr for DataFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arff" => Ok(DataFormat::Arff),
            "csv" => Ok(DataFormat::Csv),
            other => Err(Error::Argument(format!(
                "unknown data format `{other}` (arff or csv)"
            ))),
        }
    }
}

/// Load `path` as ARFF or CSV; `format` defaults to the file extension.
///
/// `labels` follows the ARFF `-C` convention: positive means the first `L`
/// columns are labels, negative the last `|L|`. ARFF may omit it when the
/// relation name carries `-C`; CSV requires it.
pub fn load_dataset(
    path: impl AsRef<std::path::Path>,
    format: Option<DataFormat>,
    labels: Option<i64>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => match path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref()
        {
            Some("csv") => DataFormat::Csv,
            _ => DataFormat::Arff,
        },
    };
    match format {
        DataFormat::Arff => load_arff(path, labels),
        DataFormat::Csv => {
            let c =
                labels.ok_or_else(|| Error::Argument("CSV input needs a label count".into()))?;
            if c == 0 {
                return Err(Error::Argument("label count must be non-zero".into()));
            }
            load_csv(path, c.unsigned_abs() as usize, c > 0)
        }
    }
}

/// An immutable table of `N` instances with `d` real features and `L` binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Array2<u8>,
    feature_names: Vec<String>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Array2<u8>,
        feature_names: Vec<String>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        let (n_lab, l) = labels.dim();
        if n == 0 {
            return Err(Error::Validation("dataset has no instances".into()));
        }
        if n != n_lab {
            return Err(Error::Validation(format!(
                "feature rows ({n}) and label rows ({n_lab}) differ"
            )));
        }
        if d == 0 || l == 0 {
            return Err(Error::Validation(format!(
                "dataset needs at least one feature and one label (d={d}, L={l})"
            )));
        }
        if feature_names.len() != d || label_names.len() != l {
            return Err(Error::Validation(
                "attribute name count does not match matrix width".into(),
            ));
        }
        for (j, col) in labels.axis_iter(Axis(1)).enumerate() {
            if col.iter().any(|&v| v > 1) {
                return Err(Error::Validation(format!(
                    "label column `{}` holds a value other than 0/1",
                    label_names[j]
                )));
            }
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "feature matrix contains a non-finite value".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            feature_names,
            label_names,
        })
    }

    /// Build a dataset with generated attribute names (`x0..`, `y0..`).
    pub fn from_arrays(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Array2<u8>,
    ) -> Result<Self> {
        let feature_names = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let label_names = (0..labels.ncols()).map(|j| format!("y{j}")).collect();
        Self::new(name, features, labels, feature_names, label_names)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, u8> {
        self.labels.view()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Rows `idx` in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.n_instances()) {
            return Err(Error::Argument(format!("row index {bad} out of range")));
        }
        Self::new(
            self.name.clone(),
            self.features.select(Axis(0), idx),
            self.labels.select(Axis(0), idx),
            self.feature_names.clone(),
            self.label_names.clone(),
        )
    }

    /// Same labels, different feature representation.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        let names = (0..features.ncols()).map(|j| format!("z{j}")).collect();
        Self::new(
            self.name.clone(),
            features,
            self.labels.clone(),
            names,
            self.label_names.clone(),
        )
    }

    pub fn stats(&self) -> DatasetStats {
        stats(self)
    }
}

/// Table-style summary of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_instances: usize,
    pub n_labels: usize,
    pub n_features: usize,
    /// Mean number of relevant labels per instance.
    pub label_cardinality: f64,
}

pub fn stats(ds: &Dataset) -> DatasetStats {
    let total: u64 = ds.labels.iter().map(|&v| u64::from(v)).sum();
    DatasetStats {
        n_instances: ds.n_instances(),
        n_labels: ds.n_labels(),
        n_features: ds.n_features(),
        label_cardinality: total as f64 / ds.n_instances() as f64,
    }
}

impl std::fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "N={} L={} d={} LC={:.2}",
            self.n_instances, self.n_labels, self.n_features, self.label_cardinality
        )
    }
}
