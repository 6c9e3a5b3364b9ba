use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Fraction of positions where `predicted` equals `gold`.
pub fn accuracy(predicted: &[usize], gold: &[usize]) -> Result<f64> {
    if predicted.len() != gold.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::EmptyDataset("evaluation set"));
    }
    let correct = predicted.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub std: f64,
    /// Set when there is a single value and the spread is undefined.
    pub degenerate: bool,
}

pub fn aggregate(values: &[f64]) -> Result<Aggregate> {
    if values.is_empty() {
        return Err(Error::EmptyList);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Ok(Aggregate {
            mean,
            std: 0.0,
            degenerate: true,
        });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Aggregate {
        mean,
        std: var.sqrt(),
        degenerate: false,
    })
}

/// Hex SHA-256 of a serializable value's JSON form.
pub fn fingerprint_of<T: Serialize>(value: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

/// Accuracies of one experiment configuration over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub method: String,
    pub per_seed_accuracy: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub degenerate: bool,
    /// Hash of the full experiment configuration.
    pub config_fingerprint: String,
    /// Training items per epoch in the last completed repetition.
    #[serde(default)]
    pub train_stream_size: usize,
    /// Set when the run stopped early; the accuracies cover completed repetitions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunResult {
    pub fn new(
        dataset: impl Into<String>,
        method: impl Into<String>,
        per_seed_accuracy: Vec<f64>,
        config_fingerprint: String,
    ) -> Result<Self> {
        let agg = aggregate(&per_seed_accuracy)?;
        Ok(Self {
            dataset: dataset.into(),
            method: method.into(),
            per_seed_accuracy,
            mean: agg.mean,
            std: agg.std,
            degenerate: agg.degenerate,
            config_fingerprint,
            train_stream_size: 0,
            failure: None,
        })
    }

    /// Result of a run that stopped early. With no completed repetition the
    /// mean and std are 0 and the result is marked degenerate.
    pub fn partial(
        dataset: impl Into<String>,
        method: impl Into<String>,
        per_seed_accuracy: Vec<f64>,
        config_fingerprint: String,
        failure: impl Into<String>,
    ) -> Self {
        let agg = aggregate(&per_seed_accuracy).unwrap_or(Aggregate {
            mean: 0.0,
            std: 0.0,
            degenerate: true,
        });
        Self {
            dataset: dataset.into(),
            method: method.into(),
            per_seed_accuracy,
            mean: agg.mean,
            std: agg.std,
            degenerate: agg.degenerate,
            config_fingerprint,
            train_stream_size: 0,
            failure: Some(failure.into()),
        }
    }

    /// Hash of the configuration together with the exact accuracies.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.config_fingerprint.as_bytes());
        for a in &self.per_seed_accuracy {
            h.update(a.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn is_complete(&self) -> bool {
        self.failure.is_none()
    }
}
