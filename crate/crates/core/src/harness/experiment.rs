use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{load_dataset, subsample, Dataset, DatasetSpec};
use crate::augment::{
    compose_originals_with_smoothing, import_external, mlm_replace_augment, AugmentedExample, Eda,
    EdaConfig, LabeledExample, MlmReplaceConfig, TrainingStream,
};
use crate::error::{Error, Result};
use crate::mlm::{BackendConfig, MlmBackend};
use crate::repr::{check_lambda, DEFAULT_LAMBDA};
use crate::seed::{derive_seed, repetition_seed};
use crate::trainer::{build_classifier, evaluate, fingerprint_of, train, RunResult, TrainConfig};

const INIT_STREAM: u64 = 3;
const AUGMENT_STREAM: u64 = 4;
const PAIRING_STREAM: u64 = 5;
const INDEX_FILE: &str = "index.csv";

/// Training-data treatment of an experiment.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    None,
    TextSmoothing,
    Eda,
    MlmReplace,
    /// Augmented texts read from a TSV file (see [`crate::augment::external`]).
    External(String),
}

impl Method {
    pub fn is_augmenter(&self) -> bool {
        matches!(self, Method::Eda | Method::MlmReplace | Method::External(_))
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::None => f.write_str("none"),
            Method::TextSmoothing => f.write_str("text_smoothing"),
            Method::Eda => f.write_str("eda"),
            Method::MlmReplace => f.write_str("mlm_replace"),
            Method::External(name) => write!(f, "external:{name}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Method::None,
            "text_smoothing" => Method::TextSmoothing,
            "eda" => Method::Eda,
            "mlm_replace" => Method::MlmReplace,
            other => match other.strip_prefix("external:") {
                Some(name) if !name.is_empty() => Method::External(name.to_string()),
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "unknown method {other:?}; expected none, text_smoothing, eda, mlm_replace or external:<name>"
                    )))
                }
            },
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub method: Method,
    /// Route originals and augmented texts through smoothing.
    pub compose_smoothing: bool,
    pub n_per_class: usize,
    pub repetitions: usize,
    pub lambda: f64,
    pub master_seed: u64,
    /// Per-repetition seed, lambda and smoothing switch are filled in by the runner.
    pub train: TrainConfig,
    pub eda: EdaConfig,
    pub mlm_replace: MlmReplaceConfig,
    pub backend: BackendConfig,
    /// TSV file for `external:<name>` methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Low-resource defaults: 10 examples per class, 15 repetitions.
    pub fn new(dataset: DatasetSpec, method: Method) -> Self {
        Self {
            dataset,
            method,
            compose_smoothing: false,
            n_per_class: 10,
            repetitions: 15,
            lambda: DEFAULT_LAMBDA,
            master_seed: 0,
            train: TrainConfig::default(),
            eda: EdaConfig::default(),
            mlm_replace: MlmReplaceConfig::default(),
            backend: BackendConfig::default(),
            external_path: None,
        }
    }

    /// Row name in result tables, e.g. `eda+smoothing`.
    pub fn method_name(&self) -> String {
        if self.compose_smoothing {
            format!("{}+smoothing", self.method)
        } else {
            self.method.to_string()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 || self.n_per_class == 0 {
            return Err(Error::InvalidConfig(
                "repetitions and n_per_class must be positive".into(),
            ));
        }
        check_lambda(self.lambda)?;
        if self.compose_smoothing && !self.method.is_augmenter() {
            return Err(Error::InvalidConfig(format!(
                "composition with smoothing needs an augmenter, not {}",
                self.method
            )));
        }
        if matches!(self.method, Method::External(_)) && self.external_path.is_none() {
            return Err(Error::InvalidConfig(
                "external methods need external_path".into(),
            ));
        }
        self.eda.validate()?;
        self.mlm_replace.validate()?;
        self.train.validate()?;
        self.dataset.validate()
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint_of(self)
    }

    /// Training configuration for one repetition.
    pub fn train_config(&self, rep_seed: u64) -> TrainConfig {
        TrainConfig {
            seed: rep_seed,
            lambda: self.lambda,
            smoothing_enabled: self.method == Method::TextSmoothing || self.compose_smoothing,
            ..self.train.clone()
        }
    }
}

/// Pairs each original with an external text of the same label, cycling
/// through a seeded shuffle of that label's pool.
fn pair_external(
    originals: &[LabeledExample],
    external: &[AugmentedExample],
    seed: u64,
) -> Result<Vec<AugmentedExample>> {
    let mut pools: BTreeMap<&str, Vec<&AugmentedExample>> = BTreeMap::new();
    for e in external {
        pools.entry(e.label()).or_default().push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pool in pools.values_mut() {
        pool.shuffle(&mut rng);
    }
    let mut used: BTreeMap<&str, usize> = BTreeMap::new();
    originals
        .iter()
        .map(|o| {
            let pool =
                pools
                    .get(o.label.as_str())
                    .ok_or_else(|| Error::InsufficientClassExamples {
                        label: o.label.clone(),
                        available: 0,
                        requested: 1,
                    })?;
            let k = used.entry(o.label.as_str()).or_default();
            let pick = pool[*k % pool.len()];
            *k += 1;
            Ok(AugmentedExample {
                base: o.clone(),
                augmented: pick.augmented.clone(),
                augmenter: pick.augmenter.clone(),
                seed,
            })
        })
        .collect()
}

fn augment(
    cfg: &ExperimentConfig,
    backend: &MlmBackend,
    originals: &[LabeledExample],
    external: &[AugmentedExample],
    rep_seed: u64,
) -> Result<Vec<AugmentedExample>> {
    match &cfg.method {
        Method::Eda => {
            let eda = Eda::bundled();
            let mut out = Vec::new();
            for (i, ex) in originals.iter().enumerate() {
                out.extend(eda.augment(
                    ex,
                    &cfg.eda,
                    derive_seed(&[rep_seed, AUGMENT_STREAM, i as u64]),
                )?);
            }
            Ok(out)
        }
        Method::MlmReplace => originals
            .iter()
            .enumerate()
            .map(|(i, ex)| {
                mlm_replace_augment(
                    backend,
                    ex,
                    &cfg.mlm_replace,
                    derive_seed(&[rep_seed, AUGMENT_STREAM, i as u64]),
                )
            })
            .collect(),
        Method::External(_) => pair_external(
            originals,
            external,
            derive_seed(&[rep_seed, PAIRING_STREAM]),
        ),
        Method::None | Method::TextSmoothing => Ok(Vec::new()),
    }
}

/// Training stream of one repetition. Augmenters without composition train on
/// originals plus augmented texts, the same amount as their composed variant.
pub fn build_stream(
    cfg: &ExperimentConfig,
    backend: &MlmBackend,
    train_set: Vec<LabeledExample>,
    external: &[AugmentedExample],
    rep_seed: u64,
) -> Result<TrainingStream> {
    match cfg.method {
        Method::None => Ok(TrainingStream::discrete(train_set)),
        Method::TextSmoothing => TrainingStream::smoothed(train_set, cfg.lambda),
        _ => {
            let augmented = augment(cfg, backend, &train_set, external, rep_seed)?;
            if cfg.compose_smoothing {
                compose_originals_with_smoothing(train_set, &augmented, cfg.lambda)
            } else {
                Ok(TrainingStream::with_augmented(train_set, &augmented))
            }
        }
    }
}

/// Accuracy of one repetition on the full test set, with its stream size.
pub fn run_repetition(
    cfg: &ExperimentConfig,
    backend: &MlmBackend,
    data: &Dataset,
    external: &[AugmentedExample],
    rep: usize,
) -> Result<(f64, usize)> {
    let rep_seed = repetition_seed(cfg.master_seed, rep as u64);
    let (train_set, dev_set) = subsample(
        &data.train,
        &data.dev,
        &data.labels,
        cfg.n_per_class,
        rep_seed,
    )?;
    let stream = build_stream(cfg, backend, train_set, external, rep_seed)?;
    let mut clf = build_classifier(backend, &data.labels, derive_seed(&[rep_seed, INIT_STREAM]))?;
    let outcome = train(
        &mut clf,
        backend,
        &stream,
        &dev_set,
        &cfg.train_config(rep_seed),
    )?;
    let acc = evaluate(&clf, backend, &data.test)?;
    log::info!(
        "{} {} rep {rep}: best dev {:.4} (epoch {}), test {acc:.4}",
        data.name,
        cfg.method_name(),
        outcome.best_dev_accuracy,
        outcome.best_epoch
    );
    Ok((acc, stream.len()))
}

/// Runs every repetition and aggregates. With `out_dir` the result (or the
/// partial result with a failure marker) is written there.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    backend: &MlmBackend,
    out_dir: Option<&Path>,
) -> Result<RunResult> {
    cfg.validate()?;
    let fingerprint = cfg.fingerprint()?;
    let data = load_dataset(&cfg.dataset)?;
    let external = match (&cfg.method, &cfg.external_path) {
        (Method::External(name), Some(path)) => import_external(path, name)?,
        _ => Vec::new(),
    };

    let mut accuracies = Vec::with_capacity(cfg.repetitions);
    let mut stream_size = 0;
    for rep in 0..cfg.repetitions {
        match run_repetition(cfg, backend, &data, &external, rep) {
            Ok((acc, size)) => {
                accuracies.push(acc);
                stream_size = size;
            }
            Err(e) => {
                let mut partial = RunResult::partial(
                    &data.name,
                    cfg.method_name(),
                    accuracies,
                    fingerprint,
                    format!("repetition {rep}: {e}"),
                );
                partial.train_stream_size = stream_size;
                if let Some(dir) = out_dir {
                    persist(dir, &partial)?;
                }
                return Err(e);
            }
        }
    }
    let mut result = RunResult::new(&data.name, cfg.method_name(), accuracies, fingerprint)?;
    result.train_stream_size = stream_size;
    if let Some(dir) = out_dir {
        persist(dir, &result)?;
    }
    Ok(result)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// File name of a persisted result.
pub fn result_file_name(result: &RunResult) -> String {
    format!(
        "{}__{}__{}.json",
        slug(&result.dataset),
        slug(&result.method),
        &result.config_fingerprint[..12.min(result.config_fingerprint.len())]
    )
}

/// Writes the result JSON and appends a row to `index.csv`.
pub fn persist(dir: &Path, result: &RunResult) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(result_file_name(result));
    std::fs::write(&path, serde_json::to_vec_pretty(result)?)?;

    let index = dir.join(INDEX_FILE);
    let new = !index.exists();
    let file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&index)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(file);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    if new {
        w.write_record([
            "dataset",
            "method",
            "mean",
            "std",
            "repetitions",
            "status",
            "config_fingerprint",
            "file",
        ])
        .map_err(csv_err)?;
    }
    let file_name = path
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default();
    w.write_record([
        result.dataset.as_str(),
        result.method.as_str(),
        &format!("{:.6}", result.mean),
        &format!("{:.6}", result.std),
        &result.per_seed_accuracy.len().to_string(),
        if result.is_complete() { "ok" } else { "failed" },
        result.config_fingerprint.as_str(),
        file_name.as_str(),
    ])
    .map_err(csv_err)?;
    w.flush()?;
    Ok(path)
}

/// Reads every result JSON (`*__*.json`) in `dir`, sorted by file name.
pub fn load_results(dir: &Path) -> Result<Vec<RunResult>> {
    if !dir.is_dir() {
        return Err(Error::MissingFile(dir.to_path_buf()));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .filter(|p| {
            p.file_stem()
                .is_some_and(|s| s.to_string_lossy().contains("__"))
        })
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            serde_json::from_slice(&std::fs::read(p)?)
                .map_err(|e| Error::parse(p.display().to_string(), e.line(), e.to_string()))
        })
        .collect()
}
