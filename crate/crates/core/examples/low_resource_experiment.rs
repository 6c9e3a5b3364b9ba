//! The low-resource protocol end to end on generated data: write a dataset
//! in a native file dialect, run several methods with repeated per-class
//! subsamples, persist the results and print the comparison table.
//!
//! ```bash
//! cargo run --release -p text-smoothing --example low_resource_experiment -- /tmp/ts-results
//! ```

use std::path::PathBuf;

use anyhow::Result;
use text_smoothing::harness::synthetic::{write_synthetic_dataset, SplitSizes};
use text_smoothing::harness::{
    emit_table, load_dataset, load_results, run_experiment, ExperimentConfig, FileFormat, Method,
    TableFormat,
};
use text_smoothing::MlmBackend;

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("text-smoothing-results"));
    let data = tempfile::tempdir()?;
    let sizes = SplitSizes {
        train: 60,
        dev: 60,
        test: 120,
    };
    let spec = write_synthetic_dataset(
        data.path(),
        "topics",
        FileFormat::LabelText,
        &["sports", "science", "travel"],
        sizes,
        4,
    )?;
    let counts = load_dataset(&spec)?.counts();
    println!(
        "{}: train {} dev {} test {}",
        spec.name, counts.train, counts.dev, counts.test
    );

    let backend = MlmBackend::micro()?;
    let runs = [
        (Method::None, false),
        (Method::TextSmoothing, false),
        (Method::Eda, false),
        (Method::Eda, true),
    ];
    for (method, compose) in runs {
        let mut cfg = ExperimentConfig::new(spec.clone(), method);
        cfg.compose_smoothing = compose;
        cfg.n_per_class = 4;
        cfg.repetitions = 3;
        cfg.train.learning_rate = 1e-3;
        cfg.train.epochs = 4;
        let r = run_experiment(&cfg, &backend, Some(&out))?;
        println!("{:<16} {:?}", r.method, r.per_seed_accuracy);
    }

    let table = emit_table(&load_results(&out)?)?;
    println!("\n{}", table.render(TableFormat::Text)?);
    println!("results in {}", out.display());
    Ok(())
}
