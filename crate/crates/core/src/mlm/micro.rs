//! The bundled micro masked LM: a 64-token word-level vocabulary and a
//! 2-layer, 2-head encoder with hidden size 32.
//!
//! The checked-in weights (`assets/micro/weights.tsmw`) were produced by the
//! `train_micro_mlm` example, which pre-trains the encoder on a small
//! templated review corpus. They exist for exact, download-free testing, not
//! for linguistic quality.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::archive::{Archive, ArchiveTensor};
use super::encoder::EncoderConfig;
use super::tokenizer::WordLevelTokenizer;
use crate::error::Result;

pub const VOCAB: &str = include_str!("../../assets/micro/vocab.txt");
pub const WEIGHTS: &[u8] = include_bytes!("../../assets/micro/weights.tsmw");

pub fn config() -> EncoderConfig {
    EncoderConfig {
        vocab_size: 64,
        hidden_size: 32,
        num_hidden_layers: 2,
        num_attention_heads: 2,
        intermediate_size: 64,
        max_position_embeddings: 32,
        type_vocab_size: 2,
        layer_norm_eps: 1e-12,
        hidden_dropout_prob: 0.1,
        attention_probs_dropout_prob: 0.1,
        hidden_act: None,
    }
}

pub fn tokenizer() -> Result<WordLevelTokenizer> {
    WordLevelTokenizer::from_vocab_str(VOCAB)
}

/// The checked-in weights.
pub fn bundled_archive() -> Result<Archive> {
    Archive::read(WEIGHTS)
}

/// Freshly initialized encoder weights: matrices `N(0, std^2)`, biases zero,
/// LayerNorm scales one.
pub fn random_archive(config: &EncoderConfig, seed: u64, std: f64) -> Archive {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, std).expect("std must be finite and non-negative");
    let tensors = config
        .encoder_parameter_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let numel: usize = shape.iter().product();
            let data = if name.ends_with("LayerNorm.weight") {
                vec![1.0; numel]
            } else if name.ends_with(".bias") {
                vec![0.0; numel]
            } else {
                (0..numel).map(|_| normal.sample(&mut rng) as f32).collect()
            };
            (name, ArchiveTensor { shape, data })
        })
        .collect::<BTreeMap<_, _>>();
    Archive {
        config: config.clone(),
        tensors,
    }
}

/// Same parameter set as [`random_archive`] with every value zero.
pub fn zero_archive(config: &EncoderConfig) -> Archive {
    let tensors = config
        .encoder_parameter_shapes()
        .into_iter()
        .map(|(name, shape)| {
            let numel = shape.iter().product();
            (
                name,
                ArchiveTensor {
                    shape,
                    data: vec![0.0; numel],
                },
            )
        })
        .collect();
    Archive {
        config: config.clone(),
        tensors,
    }
}
