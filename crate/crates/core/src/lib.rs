//! Text smoothing: data augmentation by replacing one-hot token inputs with
//! interpolated masked-language-model distributions.
//!
//! A sentence is run once through a masked language model with dropout
//! enabled (no explicit `[MASK]` substitution). Every position yields a
//! distribution over the vocabulary; that distribution is mixed with the
//! token's one-hot vector,
//!
//! ```text
//! smoothed_i = lambda * one_hot_i + (1 - lambda) * softmax(h_i W^T)
//! ```
//!
//! and multiplied with a classifier's word-embedding matrix to produce a
//! "smoothed embedding" used as training input.
//!
//! Module map:
//!
//! - [`repr`]: one-hot encoding, interpolation, embedding mixing, generic mixup
//! - [`mlm`]: the BERT-style encoder, micro and pre-trained backends, smoothing
//! - [`augment`]: EDA, masked-LM replacement, external imports, composition
//! - [`trainer`]: classifier with lookup and mixing input paths, training, evaluation
//! - [`harness`]: dataset ingestion, low-resource subsampling, experiments, tables
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod augment;
pub mod error;
pub mod harness;
pub mod mlm;
pub mod repr;
pub mod seed;
pub mod trainer;

pub use error::{Error, Result};
pub use mlm::{BackendConfig, BackendKind, MlmBackend, SmoothingRequest, TextInput};
pub use repr::{
    interpolate, mix_embeddings, mixup_pair, one_hot_encode, EmbeddingMatrix, OneHotSequence,
    SmoothedSequence, SpecialTokenPolicy, TokenDistribution, DEFAULT_LAMBDA,
};
