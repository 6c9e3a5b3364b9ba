//! Mask-and-predict replacement: a fraction of the content positions is set to
//! `[MASK]` and refilled from the backend's prediction at that position.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AugmentedExample, LabeledExample};
use crate::error::{Error, Result};
use crate::mlm::{EncodedText, MlmBackend, TextInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Sample from the `k` most probable non-special tokens, renormalized.
    TopK(usize),
    Argmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlmReplaceConfig {
    pub mask_ratio: f64,
    pub sampling: Sampling,
}

impl Default for MlmReplaceConfig {
    fn default() -> Self {
        Self {
            mask_ratio: 0.15,
            sampling: Sampling::TopK(10),
        }
    }
}

impl MlmReplaceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mask_ratio > 0.0 && self.mask_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "mask_ratio {} is outside (0, 1)",
                self.mask_ratio
            )));
        }
        if self.sampling == Sampling::TopK(0) {
            return Err(Error::InvalidConfig("top-k sampling needs k >= 1".into()));
        }
        Ok(())
    }
}

/// Token-level record of one replacement pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MlmReplacement {
    pub original_ids: Vec<u32>,
    pub new_ids: Vec<u32>,
    /// Sorted positions (in `original_ids`) that were masked.
    pub masked_positions: Vec<usize>,
    pub example: AugmentedExample,
}

/// Number of positions masked out of `content_len` maskable ones.
pub fn masked_count(mask_ratio: f64, content_len: usize) -> usize {
    ((mask_ratio * content_len as f64).ceil() as usize).clamp(1, content_len.max(1))
}

pub fn mlm_replace_augment(
    backend: &MlmBackend,
    ex: &LabeledExample,
    cfg: &MlmReplaceConfig,
    seed: u64,
) -> Result<AugmentedExample> {
    Ok(mlm_replace_detailed(backend, ex, cfg, seed)?.example)
}

pub fn mlm_replace_detailed(
    backend: &MlmBackend,
    ex: &LabeledExample,
    cfg: &MlmReplaceConfig,
    seed: u64,
) -> Result<MlmReplacement> {
    cfg.validate()?;
    let tokenizer = backend.tokenizer();
    let mask_id = tokenizer
        .special_ids()
        .mask
        .ok_or_else(|| Error::BackendUnavailable("tokenizer has no [MASK] token".into()))?;
    let enc = match backend.encode(&ex.text) {
        Err(Error::EmptyInput) => return Err(Error::EmptyText),
        other => other?,
    };
    let content: Vec<usize> = (0..enc.len()).filter(|&i| !enc.special_mask[i]).collect();
    if content.is_empty() {
        return Err(Error::EmptyText);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = masked_count(cfg.mask_ratio, content.len());
    let mut masked_positions: Vec<usize> = sample(&mut rng, content.len(), m)
        .into_iter()
        .map(|k| content[k])
        .collect();
    masked_positions.sort_unstable();

    let mut masked = enc.clone();
    for &p in &masked_positions {
        masked.token_ids[p] = mask_id;
    }
    let probs = backend.predict(&masked)?;

    let mut new_ids = enc.token_ids.clone();
    for &p in &masked_positions {
        let mut row: Vec<(usize, f64)> = probs
            .row(p)
            .iter()
            .copied()
            .enumerate()
            .filter(|&(id, _)| !tokenizer.is_special(id as u32))
            .collect();
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let choice = match cfg.sampling {
            Sampling::Argmax => row.first().map(|&(id, _)| id),
            Sampling::TopK(k) => {
                row.truncate(k);
                WeightedIndex::new(row.iter().map(|&(_, w)| w))
                    .ok()
                    .map(|dist| row[dist.sample(&mut rng)].0)
            }
        };
        if let Some(id) = choice {
            new_ids[p] = id as u32;
        }
    }

    let augmented = decode_segments(backend, &enc, &new_ids)?;
    Ok(MlmReplacement {
        original_ids: enc.token_ids,
        new_ids,
        masked_positions,
        example: AugmentedExample {
            base: ex.clone(),
            augmented,
            augmenter: "mlm_replace".to_string(),
            seed,
        },
    })
}

fn decode_segments(backend: &MlmBackend, enc: &EncodedText, ids: &[u32]) -> Result<TextInput> {
    let segment = |s: u32| -> Result<String> {
        let part: Vec<u32> = (0..ids.len())
            .filter(|&i| enc.segment_ids[i] == s && !enc.special_mask[i])
            .map(|i| ids[i])
            .collect();
        backend.tokenizer().decode(&part)
    };
    Ok(match enc.original {
        TextInput::Single(_) => TextInput::Single(segment(0)?),
        TextInput::Pair(..) => TextInput::Pair(segment(0)?, segment(1)?),
    })
}
