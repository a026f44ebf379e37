use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{check_dim, Result};

/// Per-column min/max fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl ScalingParams {
    pub fn fit(features: ArrayView2<'_, f64>) -> Self {
        let mut mins = Vec::with_capacity(features.ncols());
        let mut maxs = Vec::with_capacity(features.ncols());
        for col in features.axis_iter(Axis(1)) {
            mins.push(col.iter().copied().fold(f64::INFINITY, f64::min));
            maxs.push(col.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Self { mins, maxs }
    }

    pub fn n_features(&self) -> usize {
        self.mins.len()
    }

    /// Map into [0,1] with the stored ranges, clamping values outside them.
    /// Constant training columns map to 0.
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        check_dim(self.n_features(), features.ncols())?;
        let mut out = features.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (lo, hi) = (self.mins[j], self.maxs[j]);
            let range = hi - lo;
            if range > 0.0 {
                col.mapv_inplace(|v| ((v - lo) / range).clamp(0.0, 1.0));
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        let scaled = self.apply(ds.features())?;
        Dataset::new(
            ds.name(),
            scaled,
            ds.labels().to_owned(),
            ds.feature_names().to_vec(),
            ds.label_names().to_vec(),
        )
    }
}

/// Fit min/max scaling on `ds` and return the scaled copy with its parameters.
pub fn scale_features(ds: &Dataset) -> (Dataset, ScalingParams) {
    let params = ScalingParams::fit(ds.features());
    let scaled = params
        .apply_dataset(ds)
        .expect("parameters fitted on this dataset");
    (scaled, params)
}
