//! Masked-language-model backends producing smoothed representations.
//!
//! A backend runs the whole sentence through a BERT-style encoder once, with
//! dropout switched on in place of explicit `[MASK]` substitution, and turns
//! each position's hidden state into a vocabulary distribution with the tied
//! word-embedding matrix.
//!
//! Two backends share one implementation ([`MlmBackend`]):
//!
//! - `micro`: a 2-layer, 2-head encoder over a 64-token word-level vocabulary
//!   whose weights ship with the crate (`assets/micro/`).
//! - `pretrained`: a Hugging Face BERT checkpoint directory (`config.json`,
//!   `model.safetensors` or `pytorch_model.bin`, `tokenizer.json` or `vocab.txt`).

pub mod archive;
mod backend;
pub mod dropout;
pub mod encoder;
pub mod micro;
pub mod tokenizer;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use backend::MlmBackend;
pub use encoder::EncoderConfig;
pub use tokenizer::TextTokenizer;

use crate::repr::SpecialTokenPolicy;

/// Environment variable naming a directory of pre-staged checkpoints.
/// `checkpoint_id = "bert-base-uncased"` resolves to `$TEXT_SMOOTHING_CHECKPOINTS/bert-base-uncased`.
pub const CHECKPOINT_DIR_ENV: &str = "TEXT_SMOOTHING_CHECKPOINTS";

/// A single sentence or a sentence pair.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TextInput {
    Single(String),
    Pair(String, String),
}

impl TextInput {
    pub fn first(&self) -> &str {
        match self {
            TextInput::Single(a) | TextInput::Pair(a, _) => a,
        }
    }

    pub fn second(&self) -> Option<&str> {
        match self {
            TextInput::Single(_) => None,
            TextInput::Pair(_, b) => Some(b),
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            TextInput::Single(_) => 1,
            TextInput::Pair(..) => 2,
        }
    }

    pub fn is_blank(&self) -> bool {
        self.first().trim().is_empty() && self.second().is_none_or(|b| b.trim().is_empty())
    }
}

impl From<&str> for TextInput {
    fn from(s: &str) -> Self {
        TextInput::Single(s.to_string())
    }
}

impl From<String> for TextInput {
    fn from(s: String) -> Self {
        TextInput::Single(s)
    }
}

impl From<(&str, &str)> for TextInput {
    fn from((a, b): (&str, &str)) -> Self {
        TextInput::Pair(a.to_string(), b.to_string())
    }
}

impl std::fmt::Display for TextInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TextInput::Single(a) => f.write_str(a),
            TextInput::Pair(a, b) => write!(f, "{a} ||| {b}"),
        }
    }
}

/// Token, position and segment ids of one example plus its special-token mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedText {
    pub token_ids: Vec<u32>,
    pub position_ids: Vec<u32>,
    pub segment_ids: Vec<u32>,
    pub special_mask: Vec<bool>,
    pub original: TextInput,
}

impl EncodedText {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of positions that are not delimiters or padding.
    pub fn content_len(&self) -> usize {
        self.special_mask.iter().filter(|s| !**s).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub name: String,
    pub vocab_size: usize,
    pub embed_size: usize,
    pub max_seq_len: usize,
    pub dropout_active: bool,
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Micro,
    Pretrained,
}

/// Backend selection, loadable from TOML.
///
/// ```toml
/// kind = "pretrained"
/// checkpoint_id = "bert-base-uncased"
/// max_seq_len = 128
/// dropout_override = 0.1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub checkpoint_path: Option<PathBuf>,
    pub checkpoint_id: Option<String>,
    pub max_seq_len: Option<usize>,
    /// Replaces both hidden and attention dropout rates of the checkpoint.
    pub dropout_override: Option<f64>,
    pub temperature: f64,
    pub dropout_active: bool,
    pub special_tokens: SpecialTokenPolicy,
    /// Truncate over-long inputs instead of failing with `SequenceTooLong`.
    pub truncate: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::Micro,
            checkpoint_path: None,
            checkpoint_id: None,
            max_seq_len: None,
            dropout_override: None,
            temperature: 1.0,
            dropout_active: true,
            special_tokens: SpecialTokenPolicy::KeepOneHot,
            truncate: false,
        }
    }
}

impl BackendConfig {
    pub fn micro() -> Self {
        Self::default()
    }

    pub fn pretrained(path: impl Into<PathBuf>) -> Self {
        Self {
            kind: BackendKind::Pretrained,
            checkpoint_path: Some(path.into()),
            max_seq_len: Some(128),
            ..Self::default()
        }
    }

    pub fn from_toml_str(s: &str) -> crate::Result<Self> {
        toml::from_str(s).map_err(|e| crate::Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(crate::Error::InvalidConfig(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        if let Some(p) = self.dropout_override {
            if !(0.0..1.0).contains(&p) {
                return Err(crate::Error::InvalidConfig(format!(
                    "dropout rate {p} not in [0, 1)"
                )));
            }
        }
        if self.max_seq_len == Some(0) {
            return Err(crate::Error::InvalidConfig(
                "max_seq_len must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolves the checkpoint directory from `checkpoint_path` or `checkpoint_id`.
    pub fn checkpoint_dir(&self) -> crate::Result<PathBuf> {
        if let Some(path) = &self.checkpoint_path {
            return Ok(path.clone());
        }
        let id = self.checkpoint_id.as_ref().ok_or_else(|| {
            crate::Error::InvalidConfig(
                "pretrained backend needs checkpoint_path or checkpoint_id".into(),
            )
        })?;
        let root = std::env::var_os(CHECKPOINT_DIR_ENV).ok_or_else(|| {
            crate::Error::BackendUnavailable(format!(
                "checkpoint id {id:?} given but {CHECKPOINT_DIR_ENV} is not set"
            ))
        })?;
        Ok(PathBuf::from(root).join(id))
    }
}

/// One smoothing call: the text, the dropout seed, and whether to draw fresh
/// dropout masks (`resample`) or reuse a cached result for the same text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingRequest {
    pub text: TextInput,
    pub seed: u64,
    pub resample: bool,
}

impl SmoothingRequest {
    pub fn new(text: impl Into<TextInput>, seed: u64) -> Self {
        Self {
            text: text.into(),
            seed,
            resample: true,
        }
    }
}
