//! Desk-scale re-runs of the published accuracy tables.
//!
//! Reference values are the logistic-regression columns where a table has
//! one. The comparison table mixes base learners in its source; its values are
//! listed as published.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::experiment::{evaluate_method, experiment_split};
use super::grid::{GridCell, GridSpec};
use crate::data::{load_arff, Dataset};
use crate::error::{Error, Result};
use crate::pipeline::{Method, PipelineConfig};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableId {
    #[serde(rename = "2a")]
    EccAccuracy,
    #[serde(rename = "3")]
    RakelAccuracy,
    #[serde(rename = "4")]
    PairwiseAccuracy,
    #[serde(rename = "5")]
    Comparison,
}

impl TableId {
    pub const ALL: [TableId; 4] = [
        TableId::EccAccuracy,
        TableId::RakelAccuracy,
        TableId::PairwiseAccuracy,
        TableId::Comparison,
    ];

    pub fn id(self) -> &'static str {
        match self {
            TableId::EccAccuracy => "2a",
            TableId::RakelAccuracy => "3",
            TableId::PairwiseAccuracy => "4",
            TableId::Comparison => "5",
        }
    }

    pub fn methods(self) -> &'static [Method] {
        match self {
            TableId::EccAccuracy => &[Method::EccR, Method::Ecc],
            TableId::RakelAccuracy => &[Method::RakR, Method::Rakel],
            TableId::PairwiseAccuracy => &[Method::FwR, Method::Fw],
            TableId::Comparison => &[
                Method::Dbn3Bp,
                Method::Dbn2Ecc,
                Method::EccR,
                Method::Ecc,
                Method::Rakel,
                Method::Fw,
                Method::Bpnn,
            ],
        }
    }
}

impl fmt::Display for TableId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for TableId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let s = s
            .strip_prefix("table")
            .unwrap_or(&s)
            .trim_start_matches(['-', '_', ' ']);
        match s {
            "2a" | "2" | "ii" | "iia" => Ok(TableId::EccAccuracy),
            "3" | "iii" => Ok(TableId::RakelAccuracy),
            "4" | "iv" => Ok(TableId::PairwiseAccuracy),
            "5" | "v" => Ok(TableId::Comparison),
            other => Err(Error::Argument(format!(
                "unknown table `{other}` (2a, 3, 4 or 5)"
            ))),
        }
    }
}

/// Benchmark name, accepted file stems, label count.
pub const DATASETS: [(&str, &[&str], usize); 7] = [
    ("Music", &["music", "emotions"], 6),
    ("Scene", &["scene"], 6),
    ("Yeast", &["yeast"], 14),
    ("Genbase", &["genbase"], 27),
    ("Medical", &["medical"], 45),
    ("Enron", &["enron"], 53),
    ("Reuters", &["reuters"], 103),
];

/// `None` marks a run that did not finish in the source.
type Row = (&'static str, &'static [Option<f64>]);

const T2A: [Row; 7] = [
    ("Music", &[Some(0.558), Some(0.504)]),
    ("Scene", &[Some(0.709), Some(0.554)]),
    ("Yeast", &[Some(0.513), Some(0.504)]),
    ("Genbase", &[Some(0.971), Some(0.977)]),
    ("Medical", &[Some(0.449), Some(0.706)]),
    ("Enron", &[Some(0.451), Some(0.355)]),
    ("Reuters", &[Some(0.408), Some(0.376)]),
];

const T3: [Row; 7] = [
    ("Music", &[Some(0.538), Some(0.465)]),
    ("Scene", &[Some(0.663), Some(0.469)]),
    ("Yeast", &[Some(0.497), None]),
    ("Genbase", &[Some(0.968), Some(0.976)]),
    ("Medical", &[Some(0.494), Some(0.639)]),
    ("Enron", &[Some(0.376), Some(0.273)]),
    ("Reuters", &[Some(0.285), None]),
];

const T4: [Row; 6] = [
    ("Music", &[Some(0.549), Some(0.492)]),
    ("Scene", &[Some(0.660), Some(0.490)]),
    ("Yeast", &[Some(0.507), Some(0.495)]),
    ("Genbase", &[Some(0.949), Some(0.975)]),
    ("Medical", &[Some(0.492), None]),
    ("Enron", &[Some(0.376), None]),
];

const T5: [Row; 7] = [
    (
        "Music",
        &[
            Some(0.577),
            Some(0.581),
            Some(0.581),
            Some(0.576),
            Some(0.579),
            Some(0.573),
            Some(0.533),
        ],
    ),
    (
        "Scene",
        &[
            Some(0.731),
            Some(0.742),
            Some(0.731),
            Some(0.710),
            Some(0.684),
            Some(0.649),
            Some(0.552),
        ],
    ),
    (
        "Yeast",
        &[
            Some(0.529),
            Some(0.531),
            Some(0.532),
            Some(0.535),
            Some(0.537),
            Some(0.538),
            Some(0.491),
        ],
    ),
    (
        "Genbase",
        &[
            Some(0.984),
            Some(0.985),
            Some(0.979),
            Some(0.981),
            Some(0.984),
            Some(0.985),
            Some(0.049),
        ],
    ),
    (
        "Medical",
        &[
            Some(0.746),
            Some(0.742),
            Some(0.695),
            Some(0.770),
            Some(0.743),
            Some(0.748),
            Some(0.053),
        ],
    ),
    (
        "Enron",
        &[
            Some(0.442),
            Some(0.480),
            Some(0.469),
            Some(0.454),
            Some(0.413),
            Some(0.408),
            Some(0.144),
        ],
    ),
    (
        "Reuters",
        &[
            Some(0.410),
            Some(0.451),
            Some(0.459),
            Some(0.461),
            Some(0.337),
            None,
            Some(0.004),
        ],
    ),
];

/// Published `(dataset, method, accuracy)` triples for `table`.
pub fn published_values(table: TableId) -> Vec<(&'static str, Method, Option<f64>)> {
    let rows: &[Row] = match table {
        TableId::EccAccuracy => &T2A,
        TableId::RakelAccuracy => &T3,
        TableId::PairwiseAccuracy => &T4,
        TableId::Comparison => &T5,
    };
    rows.iter()
        .flat_map(|(ds, vals)| {
            table
                .methods()
                .iter()
                .zip(vals.iter())
                .map(move |(&m, &v)| (*ds, m, v))
        })
        .collect()
}

/// First `<stem>.arff` in `dir` (case-insensitive) for benchmark `name`.
pub fn find_dataset(dir: &Path, name: &str) -> Option<PathBuf> {
    let (_, stems, _) = DATASETS
        .iter()
        .find(|(n, _, _)| n.eq_ignore_ascii_case(name))?;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    entries.into_iter().find(|p| {
        let ext_ok = p
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("arff"));
        let stem = p
            .file_stem()
            .and_then(|s| s.to_str())
            .map(str::to_ascii_lowercase);
        ext_ok && stem.is_some_and(|s| stems.contains(&s.as_str()))
    })
}

/// Load a benchmark ARFF. Uses the relation's `-C` token when present,
/// otherwise the known label count with labels last.
pub fn load_benchmark(path: &Path, name: &str) -> Result<Dataset> {
    match load_arff(path, None) {
        Err(Error::Validation(msg)) if msg.contains("-C") => {
            let l = DATASETS
                .iter()
                .find(|(n, _, _)| n.eq_ignore_ascii_case(name))
                .map(|(_, _, l)| *l)
                .ok_or_else(|| Error::Argument(format!("unknown benchmark `{name}`")))?;
            load_arff(path, Some(-(l as i64)))
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    pub seed: u64,
    pub grid: GridSpec,
    pub rbm_epochs: usize,
    pub bp_epochs: usize,
    pub n_chains: usize,
    /// Seeded subsample of each dataset before splitting.
    pub max_instances: Option<usize>,
    /// Restrict to these benchmarks.
    pub datasets: Option<Vec<String>>,
    pub threshold: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            grid: GridSpec::reduced(),
            rbm_epochs: 1000,
            bp_epochs: 100,
            n_chains: 50,
            max_instances: None,
            datasets: None,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RowStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceRow {
    pub table: TableId,
    pub dataset: String,
    pub method: Method,
    pub published: Option<f64>,
    pub measured: Option<f64>,
    pub status: RowStatus,
    pub chosen: Option<GridCell>,
    pub note: String,
}

impl ReproduceRow {
    pub fn delta(&self) -> Option<f64> {
        Some(self.measured? - self.published?)
    }
}

fn subsample(ds: Dataset, max: Option<usize>, seed: u64) -> Result<Dataset> {
    match max {
        Some(m) if m < ds.n_instances() => {
            let mut idx: Vec<usize> = (0..ds.n_instances()).collect();
            idx.shuffle(&mut rng_from_seed(derive_seed(seed, "subsample", 0)));
            idx.truncate(m);
            idx.sort_unstable();
            ds.select_rows(&idx)
        }
        _ => Ok(ds),
    }
}

/// Run `table`'s methods on every benchmark found in `data_dir`.
///
/// Missing datasets give `SKIPPED` rows and failed fits `FAILED` rows; neither
/// stops the run.
pub fn reproduce(
    table: TableId,
    data_dir: &Path,
    opts: &ReproduceOptions,
) -> Result<Vec<ReproduceRow>> {
    opts.grid.validate()?;
    let mut base = PipelineConfig::default();
    base.rbm.epochs = opts.rbm_epochs;
    base.bp.epochs = opts.bp_epochs;
    base.mlc.n_chains = opts.n_chains;
    base.set_threshold(opts.threshold);

    let mut by_dataset: BTreeMap<usize, Vec<(Method, Option<f64>)>> = BTreeMap::new();
    for (ds, m, v) in published_values(table) {
        let pos = DATASETS
            .iter()
            .position(|(n, _, _)| *n == ds)
            .expect("known benchmark");
        by_dataset.entry(pos).or_default().push((m, v));
    }

    let mut rows = Vec::new();
    for (pos, entries) in by_dataset {
        let name = DATASETS[pos].0;
        if let Some(only) = &opts.datasets {
            if !only.iter().any(|d| d.eq_ignore_ascii_case(name)) {
                continue;
            }
        }
        let row = |m: Method, published: Option<f64>, measured, status, chosen, note: String| {
            ReproduceRow {
                table,
                dataset: name.to_string(),
                method: m,
                published,
                measured,
                status,
                chosen,
                note,
            }
        };
        let Some(path) = find_dataset(data_dir, name) else {
            log::warn!("reproduce table={table} dataset={name} status=SKIPPED reason=not_found");
            rows.extend(entries.iter().map(|&(m, p)| {
                row(
                    m,
                    p,
                    None,
                    RowStatus::Skipped,
                    None,
                    "dataset not found".into(),
                )
            }));
            continue;
        };
        let split = load_benchmark(&path, name)
            .and_then(|ds| subsample(ds, opts.max_instances, opts.seed))
            .and_then(|ds| experiment_split(&ds, 2, 0, opts.seed));
        let (train, test, _) = match split {
            Ok(s) => s,
            Err(e) => {
                rows.extend(
                    entries
                        .iter()
                        .map(|&(m, p)| row(m, p, None, RowStatus::Failed, None, e.to_string())),
                );
                continue;
            }
        };
        for &(m, p) in &entries {
            let mut timings = BTreeMap::new();
            match evaluate_method(&train, &test, &base, m, &opts.grid, opts.seed, &mut timings) {
                Ok(r) => {
                    log::info!(
                        "reproduce table={table} dataset={name} method={m} accuracy={:.4}",
                        r.metrics.accuracy
                    );
                    rows.push(row(
                        m,
                        p,
                        Some(r.metrics.accuracy),
                        RowStatus::Ok,
                        r.chosen,
                        String::new(),
                    ));
                }
                Err(e) => {
                    log::warn!("reproduce table={table} dataset={name} method={m} status=FAILED error=\"{e}\"");
                    rows.push(row(m, p, None, RowStatus::Failed, None, e.to_string()));
                }
            }
        }
    }
    Ok(rows)
}

/// `table,dataset,method,published,measured,delta,status,u,eta,alpha,note`.
pub fn reproduce_csv(rows: &[ReproduceRow]) -> Result<String> {
    let ser = |e: csv::Error| Error::Serde(e.to_string());
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.4}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "table",
        "dataset",
        "method",
        "published",
        "measured",
        "delta",
        "status",
        "u",
        "eta",
        "alpha",
        "note",
    ])
    .map_err(ser)?;
    for r in rows {
        let status = match r.status {
            RowStatus::Ok => "OK",
            RowStatus::Skipped => "SKIPPED",
            RowStatus::Failed => "FAILED",
        };
        let published = r
            .published
            .map_or_else(|| "DNF".to_string(), |v| format!("{v:.3}"));
        let (u, eta, alpha) = match r.chosen {
            Some(c) => (
                if c.n_hidden > 0 {
                    c.n_hidden.to_string()
                } else {
                    String::new()
                },
                c.learning_rate.to_string(),
                c.momentum.to_string(),
            ),
            None => Default::default(),
        };
        w.write_record([
            r.table.id(),
            &r.dataset,
            r.method.name(),
            &published,
            &fmt(r.measured),
            &fmt(r.delta()),
            status,
            &u,
            &eta,
            &alpha,
            &r.note,
        ])
        .map_err(ser)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
        .map_err(|e| Error::Serde(e.to_string()))
}
