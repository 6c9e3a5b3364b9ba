use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use text_smoothing::augment::{
    mlm_replace_augment, read_labeled_tsv, write_tsv, Eda, EdaConfig, LabeledExample,
    MlmReplaceConfig,
};
use text_smoothing::harness::{
    emit_table, load_results, run_experiment, DatasetSpec, ExperimentConfig, Method, TableFormat,
};
use text_smoothing::mlm::{BackendConfig, MlmBackend};
use text_smoothing::seed::derive_seed;
use text_smoothing::{Error, Result};

#[derive(Parser)]
#[command(
    name = "text-smoothing",
    version,
    about = "Text smoothing experiments and augmentation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one dataset over repeated low-resource subsamples.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// none, text_smoothing, eda, mlm_replace or external:<name>
        #[arg(long)]
        method: String,
        #[arg(long)]
        compose_smoothing: bool,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        #[arg(long, default_value_t = 10)]
        n_per_class: usize,
        #[arg(long, default_value_t = 15)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        master_seed: u64,
        /// `micro` or a backend TOML file.
        #[arg(long, default_value = "micro")]
        backend: String,
        #[arg(long)]
        out: PathBuf,
        /// Augmented TSV for external methods.
        #[arg(long)]
        external: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Tabulate the results stored in a run directory.
    Table {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Augment a labeled TSV file offline.
    Augment {
        #[arg(long, value_enum)]
        method: AugmentMethod,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.1)]
        alpha: f64,
        #[arg(long, default_value_t = 1)]
        num_aug: usize,
        #[arg(long, default_value_t = 0.15)]
        mask_ratio: f64,
        #[arg(long, default_value = "micro")]
        backend: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentMethod {
    Eda,
    MlmReplace,
}

fn load_backend(arg: &str) -> Result<MlmBackend> {
    let cfg = backend_config(arg)?;
    MlmBackend::load(&cfg)
}

fn backend_config(arg: &str) -> Result<BackendConfig> {
    if arg == "micro" {
        return Ok(BackendConfig::micro());
    }
    let text = std::fs::read_to_string(arg)
        .map_err(|e| Error::InvalidConfig(format!("backend config {arg}: {e}")))?;
    BackendConfig::from_toml_str(&text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            dataset,
            method,
            compose_smoothing,
            lambda,
            n_per_class,
            reps,
            master_seed,
            backend,
            out,
            external,
            epochs,
            batch_size,
            learning_rate,
        } => {
            let mut cfg = ExperimentConfig::new(
                DatasetSpec::from_toml_file(&dataset)?,
                method.parse::<Method>()?,
            );
            cfg.compose_smoothing = compose_smoothing;
            cfg.lambda = lambda;
            cfg.n_per_class = n_per_class;
            cfg.repetitions = reps;
            cfg.master_seed = master_seed;
            cfg.backend = backend_config(&backend)?;
            cfg.external_path = external;
            cfg.train.epochs = epochs.unwrap_or(cfg.train.epochs);
            cfg.train.batch_size = batch_size.unwrap_or(cfg.train.batch_size);
            cfg.train.learning_rate = learning_rate.unwrap_or(cfg.train.learning_rate);
            cfg.validate()?;
            let backend = MlmBackend::load(&cfg.backend)?;
            let result = run_experiment(&cfg, &backend, Some(&out))?;
            println!(
                "{} {}: {:.2} ({:.2}) over {} repetitions",
                result.dataset,
                result.method,
                result.mean * 100.0,
                result.std * 100.0,
                result.per_seed_accuracy.len()
            );
        }
        Command::Table { input, format } => {
            let results: Vec<_> = load_results(&input)?
                .into_iter()
                .filter(|r| {
                    if !r.is_complete() {
                        log::warn!("skipping failed run {} {}", r.dataset, r.method);
                    }
                    r.is_complete()
                })
                .collect();
            let table = emit_table(&results)?;
            std::fs::write(input.join("table.json"), table.to_json()?)?;
            let format = match format {
                Format::Text => TableFormat::Text,
                Format::Csv => TableFormat::Csv,
                Format::Json => TableFormat::Json,
            };
            print!("{}", table.render(format)?);
        }
        Command::Augment {
            method,
            input,
            out,
            seed,
            alpha,
            num_aug,
            mask_ratio,
            backend,
        } => {
            let examples = read_labeled_tsv(&input)?;
            let augmented = augment_file(
                method, &examples, seed, alpha, num_aug, mask_ratio, &backend,
            )?;
            write_tsv(&out, &augmented)?;
            log::info!(
                "wrote {} augmented examples to {}",
                augmented.len(),
                display(&out)
            );
        }
    }
    Ok(())
}

fn augment_file(
    method: AugmentMethod,
    examples: &[LabeledExample],
    seed: u64,
    alpha: f64,
    num_aug: usize,
    mask_ratio: f64,
    backend: &str,
) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    match method {
        AugmentMethod::Eda => {
            let cfg = EdaConfig {
                alpha,
                num_aug_per_example: num_aug,
                ..EdaConfig::default()
            };
            let eda = Eda::bundled();
            for (i, ex) in examples.iter().enumerate() {
                for a in eda.augment(ex, &cfg, derive_seed(&[seed, i as u64]))? {
                    out.push(a.to_labeled());
                }
            }
        }
        AugmentMethod::MlmReplace => {
            let backend = load_backend(backend)?;
            let cfg = MlmReplaceConfig {
                mask_ratio,
                ..MlmReplaceConfig::default()
            };
            for (i, ex) in examples.iter().enumerate() {
                for k in 0..num_aug {
                    let s = derive_seed(&[seed, i as u64, k as u64]);
                    out.push(mlm_replace_augment(&backend, ex, &cfg, s)?.to_labeled());
                }
            }
        }
    }
    Ok(out)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
