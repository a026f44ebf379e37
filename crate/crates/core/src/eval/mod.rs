//! Hyperparameter selection, experiment orchestration, hidden-unit sweeps and
//! table reproduction. Reports live here; metrics live in [`crate::metrics`].

mod experiment;
mod grid;
mod reproduce;
mod sweep;

pub use experiment::{
    evaluate_method, experiment_split, run_experiment, EvalReport, ExperimentConfig, MethodReport,
    SplitRecord, ACCURACY_CONVENTION,
};
pub use grid::{
    grid_search, tune, CellResult, DbnSetting, GridCell, GridResult, GridSpec, Validation,
};
pub use reproduce::{
    find_dataset, load_benchmark, published_values, reproduce, reproduce_csv, ReproduceOptions,
    ReproduceRow, RowStatus, TableId, DATASETS,
};
pub use sweep::{sweep_hidden_units, SweepRow, SweepTable, SWEEP_LEARNING_RATE, SWEEP_MOMENTUM};
