//! Discrete-text augmenters and their composition with text smoothing.
//!
//! - [`eda`]: synonym replacement, random insertion, random swap, random deletion
//! - [`mlm_replace`]: mask-and-predict contextual replacement (label-unconditioned)
//! - [`external`]: import of augmented data produced elsewhere (TSV)
//! - [`compose`]: training streams mixing originals, augmented texts and smoothing

pub mod compose;
pub mod eda;
pub mod external;
pub mod mlm_replace;
pub mod synonyms;

use serde::{Deserialize, Serialize};

use crate::mlm::TextInput;

pub use compose::{
    compose_originals_with_smoothing, compose_with_smoothing, Origin, StreamItem, TrainingStream,
};
pub use eda::{Eda, EdaConfig, EdaOp};
pub use external::{import_external, read_labeled_tsv, write_tsv};
pub use mlm_replace::{
    mlm_replace_augment, mlm_replace_detailed, MlmReplaceConfig, MlmReplacement, Sampling,
};
pub use synonyms::{Stopwords, SynonymTable};

/// A text (or text pair) with its textual label.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledExample {
    pub text: TextInput,
    pub label: String,
}

impl LabeledExample {
    pub fn new(text: impl Into<TextInput>, label: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            label: label.into(),
        }
    }
}

/// An augmented text with the example it was derived from and its provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentedExample {
    pub base: LabeledExample,
    pub augmented: TextInput,
    pub augmenter: String,
    pub seed: u64,
}

impl AugmentedExample {
    pub fn label(&self) -> &str {
        &self.base.label
    }

    /// The augmented text under the base label.
    pub fn to_labeled(&self) -> LabeledExample {
        LabeledExample {
            text: self.augmented.clone(),
            label: self.base.label.clone(),
        }
    }
}
