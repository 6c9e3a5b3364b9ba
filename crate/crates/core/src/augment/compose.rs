//! Training-stream descriptions: which texts are trained on and whether each
//! one is routed through smoothing and interpolation at training time.

use serde::{Deserialize, Serialize};

use super::{AugmentedExample, LabeledExample};
use crate::error::{Error, Result};
use crate::repr::check_lambda;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original,
    Augmented { augmenter: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamItem {
    pub example: LabeledExample,
    pub origin: Origin,
    /// Routed through smoothing + interpolation when trained on.
    pub smoothed: bool,
}

/// An ordered training set plus the interpolation weight for smoothed items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStream {
    items: Vec<StreamItem>,
    lambda: f64,
    originals: usize,
}

impl TrainingStream {
    /// Plain one-hot training on `examples`.
    pub fn discrete(examples: Vec<LabeledExample>) -> Self {
        Self::from_originals(examples, false, 1.0)
    }

    /// Every example smoothed with weight `lambda` on its one-hot input.
    pub fn smoothed(examples: Vec<LabeledExample>, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self::from_originals(examples, true, lambda))
    }

    fn from_originals(examples: Vec<LabeledExample>, smoothed: bool, lambda: f64) -> Self {
        let originals = examples.len();
        let items = examples
            .into_iter()
            .map(|example| StreamItem {
                example,
                origin: Origin::Original,
                smoothed,
            })
            .collect();
        Self {
            items,
            lambda,
            originals,
        }
    }

    /// Originals followed by augmented texts, all discrete.
    pub fn with_augmented(originals: Vec<LabeledExample>, augmented: &[AugmentedExample]) -> Self {
        let mut stream = Self::discrete(originals);
        stream.items.extend(augmented.iter().map(|a| StreamItem {
            example: a.to_labeled(),
            origin: Origin::Augmented {
                augmenter: a.augmenter.clone(),
            },
            smoothed: false,
        }));
        stream
    }

    pub fn items(&self) -> &[StreamItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of original (non-augmented) examples.
    pub fn originals(&self) -> usize {
        self.originals
    }

    /// Stream size relative to the number of originals.
    pub fn multiplier(&self) -> f64 {
        if self.originals == 0 {
            return 0.0;
        }
        self.items.len() as f64 / self.originals as f64
    }

    pub fn any_smoothed(&self) -> bool {
        self.items.iter().any(|i| i.smoothed)
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|i| i.example.label.as_str())
    }
}

/// Stream of the distinct base examples followed by every augmented text, all
/// smoothed. With `lambda == 1` interpolation returns the one-hot input, so the
/// stream is emitted as discrete training on originals plus augmented texts.
pub fn compose_with_smoothing(
    examples: &[AugmentedExample],
    lambda: f64,
) -> Result<TrainingStream> {
    let mut bases: Vec<LabeledExample> = Vec::new();
    for a in examples {
        if !bases.contains(&a.base) {
            bases.push(a.base.clone());
        }
    }
    compose_originals_with_smoothing(bases, examples, lambda)
}

/// [`compose_with_smoothing`] with the originals given explicitly, so repeated
/// texts in a dataset stay separate items.
pub fn compose_originals_with_smoothing(
    originals: Vec<LabeledExample>,
    augmented: &[AugmentedExample],
    lambda: f64,
) -> Result<TrainingStream> {
    check_lambda(lambda)?;
    if augmented.is_empty() {
        return Err(Error::EmptyDataset("augmented example list"));
    }
    let mut stream = TrainingStream::with_augmented(originals, augmented);
    if lambda < 1.0 {
        stream.lambda = lambda;
        for item in &mut stream.items {
            item.smoothed = true;
        }
    }
    Ok(stream)
}
