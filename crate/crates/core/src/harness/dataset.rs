//! Dataset specs, file dialects, label textualization and low-resource subsampling.
//!
//! Dialects:
//!
//! - `label_text`: `label<TAB>text` (`label<TAB>text_a<TAB>text_b` for pairs)
//! - `text_label`: `text<TAB>label` (the GLUE SST-2 layout, usually with a header)
//! - `snips`: a directory holding line-aligned `seq.in` (utterances) and `label` (intents)

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::LabeledExample;
use crate::error::{Error, Result};
use crate::mlm::TextInput;
use crate::seed::derive_seed;

const BUILTIN_LABELS: &str = include_str!("../../assets/labels.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileFormat {
    #[default]
    LabelText,
    TextLabel,
    Snips,
}

fn default_arity() -> usize {
    1
}

/// A dataset description, usually read from TOML. Relative paths are resolved
/// against the TOML file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    #[serde(default)]
    pub format: FileFormat,
    /// Skip the first line of each file.
    #[serde(default)]
    pub header: bool,
    #[serde(default = "default_arity")]
    pub text_arity: usize,
    /// Built-in label table to use; defaults to `name` when such a table exists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<String>,
    /// Ordered label strings; defaults to the built-in table's order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub label_set: Vec<String>,
    /// Raw label to text, layered over the built-in map.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub label_map: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct BuiltinLabels {
    labels: Vec<String>,
    #[serde(default)]
    map: BTreeMap<String, String>,
}

fn builtin_tables() -> HashMap<String, BuiltinLabels> {
    toml::from_str(BUILTIN_LABELS).expect("bundled label table parses")
}

/// Ordered text labels and raw-to-text map of a built-in table.
pub fn builtin_labels(name: &str) -> Option<(Vec<String>, BTreeMap<String, String>)> {
    builtin_tables().remove(name).map(|t| (t.labels, t.map))
}

impl DatasetSpec {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut spec: Self = toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {}", path.display(), e.message())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.train, &mut spec.dev, &mut spec.test] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Ordered label set and raw-to-text map after merging the built-in table.
    pub fn resolve_labels(&self) -> Result<(Vec<String>, BTreeMap<String, String>)> {
        let key = self
            .labels
            .clone()
            .unwrap_or_else(|| self.name.to_lowercase());
        let (mut labels, mut map) = match builtin_labels(&key) {
            Some(found) => found,
            None if self.labels.is_some() => {
                return Err(Error::InvalidConfig(format!(
                    "no built-in label table named {key:?}"
                )))
            }
            None => (Vec::new(), BTreeMap::new()),
        };
        if !self.label_set.is_empty() {
            labels = self.label_set.clone();
        }
        map.extend(self.label_map.clone());
        if labels.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "dataset {:?} has no label set",
                self.name
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(*l)) {
            return Err(Error::InvalidConfig(format!("label {dup:?} listed twice")));
        }
        if let Some((raw, text)) = map.iter().find(|(_, t)| !labels.contains(t)) {
            return Err(Error::InvalidConfig(format!(
                "label map sends {raw:?} to {text:?}, which is not in the label set"
            )));
        }
        Ok((labels, map))
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.text_arity) {
            return Err(Error::InvalidConfig(format!(
                "text_arity must be 1 or 2, got {}",
                self.text_arity
            )));
        }
        if self.format == FileFormat::Snips && self.text_arity != 1 {
            return Err(Error::InvalidConfig(
                "the snips format holds single texts".into(),
            ));
        }
        if self.format == FileFormat::TextLabel && self.text_arity != 1 {
            return Err(Error::InvalidConfig(
                "the text_label format holds single texts".into(),
            ));
        }
        self.resolve_labels().map(|_| ())
    }
}

/// Split sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub labels: Vec<String>,
    pub train: Vec<LabeledExample>,
    pub dev: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

impl Dataset {
    pub fn counts(&self) -> SplitCounts {
        SplitCounts {
            train: self.train.len(),
            dev: self.dev.len(),
            test: self.test.len(),
        }
    }
}

/// Examples per label, in label-set order.
pub fn class_counts(examples: &[LabeledExample], labels: &[String]) -> Vec<(String, usize)> {
    labels
        .iter()
        .map(|l| (l.clone(), examples.iter().filter(|e| &e.label == l).count()))
        .collect()
}

struct LabelResolver<'a> {
    labels: &'a [String],
    map: &'a BTreeMap<String, String>,
}

impl LabelResolver<'_> {
    fn resolve(&self, raw: &str, path: &Path, line: usize) -> Result<String> {
        let raw = raw.trim();
        if let Some(text) = self.map.get(raw) {
            return Ok(text.clone());
        }
        if self.labels.iter().any(|l| l == raw) {
            return Ok(raw.to_string());
        }
        Err(Error::UnknownLabel {
            path: path.display().to_string(),
            line,
            label: raw.to_string(),
        })
    }
}

fn read_lines(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(std::fs::read_to_string(path)?)
}

fn parse_tsv(
    spec: &DatasetSpec,
    path: &Path,
    resolver: &LabelResolver,
) -> Result<Vec<LabeledExample>> {
    let content = read_lines(path)?;
    let origin = path.display().to_string();
    let expected = spec.text_arity + 1;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line_no = i + 1;
        if spec.header && i == 0 {
            continue;
        }
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != expected {
            return Err(Error::parse(
                &origin,
                line_no,
                format!(
                    "expected {expected} tab-separated fields, found {}",
                    fields.len()
                ),
            ));
        }
        let (raw_label, texts) = match spec.format {
            FileFormat::TextLabel => (fields[1], &fields[..1]),
            _ => (fields[0], &fields[1..]),
        };
        let text = match texts {
            [a] => TextInput::Single(a.trim().to_string()),
            [a, b] => TextInput::Pair(a.trim().to_string(), b.trim().to_string()),
            _ => unreachable!("field count checked"),
        };
        if text.is_blank() {
            return Err(Error::parse(&origin, line_no, "empty text"));
        }
        out.push(LabeledExample {
            text,
            label: resolver.resolve(raw_label, path, line_no)?,
        });
    }
    Ok(out)
}

fn parse_snips(dir: &Path, resolver: &LabelResolver) -> Result<Vec<LabeledExample>> {
    let seq_path = dir.join("seq.in");
    let label_path = dir.join("label");
    let seqs = read_lines(&seq_path)?;
    let labels = read_lines(&label_path)?;
    let seqs: Vec<&str> = seqs.lines().collect();
    let labels: Vec<&str> = labels.lines().collect();
    if seqs.len() != labels.len() {
        return Err(Error::parse(
            label_path.display().to_string(),
            labels.len().min(seqs.len()) + 1,
            format!("{} labels for {} utterances", labels.len(), seqs.len()),
        ));
    }
    seqs.iter()
        .zip(&labels)
        .enumerate()
        .map(|(i, (text, raw))| {
            if text.trim().is_empty() {
                return Err(Error::parse(
                    seq_path.display().to_string(),
                    i + 1,
                    "empty text",
                ));
            }
            Ok(LabeledExample {
                text: TextInput::Single(text.trim().to_string()),
                label: resolver.resolve(raw, &label_path, i + 1)?,
            })
        })
        .collect()
}

/// Reads all three splits and textualizes their labels.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    spec.validate()?;
    let (labels, map) = spec.resolve_labels()?;
    let resolver = LabelResolver {
        labels: &labels,
        map: &map,
    };
    let load = |path: &Path| match spec.format {
        FileFormat::Snips => parse_snips(path, &resolver),
        _ => parse_tsv(spec, path, &resolver),
    };
    let dataset = Dataset {
        name: spec.name.clone(),
        train: load(&spec.train)?,
        dev: load(&spec.dev)?,
        test: load(&spec.test)?,
        labels: labels.clone(),
    };
    let c = dataset.counts();
    log::info!(
        "{}: train {} / dev {} / test {}",
        spec.name,
        c.train,
        c.dev,
        c.test
    );
    Ok(dataset)
}

fn subsample_split(
    examples: &[LabeledExample],
    labels: &[String],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::with_capacity(n * labels.len());
    for label in labels {
        let pool: Vec<&LabeledExample> = examples.iter().filter(|e| &e.label == label).collect();
        if pool.len() < n {
            return Err(Error::InsufficientClassExamples {
                label: label.clone(),
                available: pool.len(),
                requested: n,
            });
        }
        out.extend(
            sample(rng, pool.len(), n)
                .into_iter()
                .map(|i| pool[i].clone()),
        );
    }
    Ok(out)
}

/// Exactly `n_per_class` examples of every label from each split, drawn
/// uniformly without replacement. Output is grouped by label.
pub fn subsample(
    train: &[LabeledExample],
    dev: &[LabeledExample],
    labels: &[String],
    n_per_class: usize,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>)> {
    if n_per_class == 0 {
        return Err(Error::InvalidConfig("n_per_class must be positive".into()));
    }
    let mut train_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 0]));
    let mut dev_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, 1]));
    Ok((
        subsample_split(train, labels, n_per_class, &mut train_rng)?,
        subsample_split(dev, labels, n_per_class, &mut dev_rng)?,
    ))
}
