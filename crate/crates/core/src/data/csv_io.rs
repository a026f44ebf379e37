use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::error::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        msg: e.to_string(),
    }
}

/// Load a numeric CSV with a header row. `label_count` columns at the front
/// (`labels_first`) or the back become labels.
pub fn load_csv(path: impl AsRef<Path>, label_count: usize, labels_first: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                line: 0,
                msg: format!("{other:?}"),
            },
        })?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let n_cols = header.len();
    if label_count == 0 || label_count >= n_cols {
        return Err(Error::Argument(format!(
            "label count {label_count} impossible with {n_cols} columns"
        )));
    }
    let label_cols: Vec<usize> = if labels_first {
        (0..label_count).collect()
    } else {
        (n_cols - label_count..n_cols).collect()
    };
    let feature_cols: Vec<usize> = (0..n_cols).filter(|j| !label_cols.contains(j)).collect();

    let mut feats = Vec::new();
    let mut labs = Vec::new();
    let mut n = 0usize;
    for record in reader.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let values: Vec<f64> = record
            .iter()
            .map(|c| {
                c.parse::<f64>().map_err(|_| {
                    if c == "?" || c.is_empty() {
                        Error::Validation(format!("missing value at line {line}"))
                    } else {
                        Error::Parse {
                            line,
                            msg: format!("cannot parse `{c}` as a number"),
                        }
                    }
                })
            })
            .collect::<Result<_>>()?;
        for &j in &label_cols {
            let v = values[j];
            if v != 0.0 && v != 1.0 {
                return Err(Error::Validation(format!(
                    "label column `{}` has non-binary value {v} at line {line}",
                    header[j]
                )));
            }
            labs.push(v as u8);
        }
        feats.extend(feature_cols.iter().map(|&j| values[j]));
        n += 1;
    }
    if n == 0 {
        return Err(Error::Validation("CSV file has no data rows".into()));
    }
    let features = Array2::from_shape_vec((n, feature_cols.len()), feats).expect("row-major fill");
    let labels = Array2::from_shape_vec((n, label_count), labs).expect("row-major fill");
    let name = path.file_stem().map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    Dataset::new(
        name,
        features,
        labels,
        feature_cols.iter().map(|&j| header[j].clone()).collect(),
        label_cols.iter().map(|&j| header[j].clone()).collect(),
    )
}

/// Write labels then features, with a header row.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(e.to_string()))?;
    let header: Vec<&str> = ds
        .label_names()
        .iter()
        .chain(ds.feature_names())
        .map(String::as_str)
        .collect();
    w.write_record(&header)
        .map_err(|e| Error::Serde(e.to_string()))?;
    let labels = ds.labels();
    let features = ds.features();
    for r in 0..ds.n_instances() {
        let row: Vec<String> = labels
            .row(r)
            .iter()
            .map(|v| v.to_string())
            .chain(features.row(r).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row)
            .map_err(|e| Error::Serde(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
