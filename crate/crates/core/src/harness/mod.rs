//! Dataset ingestion, low-resource subsampling, repeated-seed experiments and
//! result tables.

pub mod dataset;
pub mod experiment;
pub mod synthetic;
pub mod table;

pub use dataset::{
    builtin_labels, class_counts, load_dataset, subsample, Dataset, DatasetSpec, FileFormat,
    SplitCounts,
};
pub use experiment::{
    build_stream, load_results, persist, result_file_name, run_experiment, run_repetition,
    ExperimentConfig, Method,
};
pub use table::{average, emit_table, Cell, Table, TableFormat, TableRow};
