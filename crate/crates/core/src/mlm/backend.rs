use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use candle_core::{DType, Device, Tensor, D};
use candle_nn::VarBuilder;

use super::archive::Archive;
use super::dropout::DropoutSampler;
use super::encoder::{compute_dtype, BertEncoder, EncoderConfig, MlmHead, TokenInput};
use super::tokenizer::{HfTokenizer, TextTokenizer, Tokenized};
use super::{
    micro, BackendConfig, BackendDescriptor, BackendKind, EncodedText, SmoothingRequest, TextInput,
};
use crate::error::{Error, Result};
use crate::repr::{
    check_lambda, interpolate, one_hot_encode, DenseMatrix, EmbeddingMatrix, SmoothedSequence,
    SpecialTokenPolicy,
};

/// A frozen masked language model that turns text into smoothed representations.
///
/// Read-only after construction apart from the forward-pass counter (atomic)
/// and the cache used by non-resampling requests (mutex), so a shared
/// reference can serve concurrent calls.
pub struct MlmBackend {
    descriptor: BackendDescriptor,
    kind: BackendKind,
    tokenizer: Box<dyn TextTokenizer>,
    encoder: BertEncoder,
    head: MlmHead,
    tensors: HashMap<String, Tensor>,
    dtype: DType,
    device: Device,
    special_policy: SpecialTokenPolicy,
    truncate: bool,
    forward_calls: AtomicUsize,
    cache: Mutex<HashMap<TextInput, SmoothedSequence>>,
}

impl std::fmt::Debug for MlmBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MlmBackend")
            .field("descriptor", &self.descriptor)
            .field("dtype", &self.dtype)
            .finish_non_exhaustive()
    }
}

fn archive_tensors(archive: &Archive, device: &Device) -> Result<HashMap<String, Tensor>> {
    archive
        .tensors
        .iter()
        .map(|(name, t)| {
            Ok((
                name.clone(),
                Tensor::from_slice(&t.data, t.shape.as_slice(), device)?,
            ))
        })
        .collect()
}

fn normalize_checkpoint_names(raw: HashMap<String, Tensor>) -> HashMap<String, Tensor> {
    let has_prefix = raw.keys().any(|k| k.starts_with("bert."));
    raw.into_iter()
        .map(|(name, t)| {
            let name = name
                .replace("LayerNorm.gamma", "LayerNorm.weight")
                .replace("LayerNorm.beta", "LayerNorm.bias");
            let name = if has_prefix || name.starts_with("cls.") {
                name
            } else {
                format!("bert.{name}")
            };
            (name, t)
        })
        .collect()
}

impl MlmBackend {
    pub fn load(cfg: &BackendConfig) -> Result<Self> {
        cfg.validate()?;
        match cfg.kind {
            BackendKind::Micro => {
                let archive = micro::bundled_archive()?;
                Self::from_archive("micro", Box::new(micro::tokenizer()?), &archive, cfg)
            }
            BackendKind::Pretrained => Self::load_pretrained(&cfg.checkpoint_dir()?, cfg),
        }
    }

    /// The bundled micro backend with default settings (dropout on, temperature 1).
    pub fn micro() -> Result<Self> {
        Self::load(&BackendConfig::micro())
    }

    /// Builds a backend from archive weights; the micro dtype (`f64`) is used.
    pub fn from_archive(
        name: &str,
        tokenizer: Box<dyn TextTokenizer>,
        archive: &Archive,
        cfg: &BackendConfig,
    ) -> Result<Self> {
        let device = Device::Cpu;
        let tensors = archive_tensors(archive, &device)?;
        Self::from_tensors(
            name,
            BackendKind::Micro,
            tokenizer,
            archive.config.clone(),
            tensors,
            cfg,
        )
    }

    fn load_pretrained(dir: &Path, cfg: &BackendConfig) -> Result<Self> {
        if !dir.is_dir() {
            return Err(Error::BackendUnavailable(format!(
                "checkpoint directory {} does not exist",
                dir.display()
            )));
        }
        let config_path = dir.join("config.json");
        let config: EncoderConfig =
            serde_json::from_slice(&std::fs::read(&config_path).map_err(|e| {
                Error::BackendUnavailable(format!("{}: {e}", config_path.display()))
            })?)?;

        let device = Device::Cpu;
        let safetensors = dir.join("model.safetensors");
        let pickle = dir.join("pytorch_model.bin");
        let raw = if safetensors.is_file() {
            candle_core::safetensors::load(&safetensors, &device)?
        } else if pickle.is_file() {
            candle_core::pickle::read_all(&pickle)?
                .into_iter()
                .collect()
        } else {
            return Err(Error::BackendUnavailable(format!(
                "no model.safetensors or pytorch_model.bin in {}",
                dir.display()
            )));
        };
        let tensors = normalize_checkpoint_names(raw);

        let tokenizer: Box<dyn TextTokenizer> = if dir.join("tokenizer.json").is_file() {
            Box::new(HfTokenizer::from_file(&dir.join("tokenizer.json"))?)
        } else if dir.join("vocab.txt").is_file() {
            let lowercase = std::fs::read_to_string(dir.join("tokenizer_config.json"))
                .ok()
                .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
                .and_then(|v| v.get("do_lower_case").and_then(|b| b.as_bool()))
                .unwrap_or(true);
            Box::new(HfTokenizer::from_vocab(&dir.join("vocab.txt"), lowercase)?)
        } else {
            return Err(Error::BackendUnavailable(format!(
                "no tokenizer.json or vocab.txt in {}",
                dir.display()
            )));
        };
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pretrained".into());
        Self::from_tensors(
            &name,
            BackendKind::Pretrained,
            tokenizer,
            config,
            tensors,
            cfg,
        )
    }

    fn from_tensors(
        name: &str,
        kind: BackendKind,
        tokenizer: Box<dyn TextTokenizer>,
        mut config: EncoderConfig,
        tensors: HashMap<String, Tensor>,
        cfg: &BackendConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(p) = cfg.dropout_override {
            config.hidden_dropout_prob = p;
            config.attention_probs_dropout_prob = p;
        }
        config.validate()?;
        if tokenizer.vocab_size() != config.vocab_size {
            return Err(Error::BackendUnavailable(format!(
                "tokenizer has {} tokens, model expects {}",
                tokenizer.vocab_size(),
                config.vocab_size
            )));
        }

        let dtype = compute_dtype(kind);
        let device = Device::Cpu;
        let tensors = tensors
            .into_iter()
            .map(|(k, t)| Ok((k, t.to_dtype(dtype)?)))
            .collect::<Result<HashMap<_, _>>>()?;
        let vb = VarBuilder::from_tensors(tensors.clone(), dtype, &device);
        let encoder = BertEncoder::load(&config, vb.pp("bert"))
            .map_err(|e| Error::BackendUnavailable(format!("loading encoder weights: {e}")))?;
        let head = MlmHead::load(&config, vb.pp("cls").pp("predictions"))?;

        let rows = encoder.word_embeddings().dim(0)?;
        if rows != tokenizer.vocab_size() {
            return Err(Error::BackendUnavailable(format!(
                "embedding table has {rows} rows, tokenizer reports {}",
                tokenizer.vocab_size()
            )));
        }

        let max_seq_len = cfg
            .max_seq_len
            .unwrap_or(config.max_position_embeddings)
            .min(config.max_position_embeddings);
        let descriptor = BackendDescriptor {
            name: name.to_string(),
            vocab_size: config.vocab_size,
            embed_size: config.hidden_size,
            max_seq_len,
            dropout_active: cfg.dropout_active,
            temperature: cfg.temperature,
        };
        Ok(Self {
            descriptor,
            kind,
            tokenizer,
            encoder,
            head,
            tensors,
            dtype,
            device,
            special_policy: cfg.special_tokens,
            truncate: cfg.truncate,
            forward_calls: AtomicUsize::new(0),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn tokenizer(&self) -> &dyn TextTokenizer {
        self.tokenizer.as_ref()
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn special_policy(&self) -> SpecialTokenPolicy {
        self.special_policy
    }

    /// Number of encoder forward passes run so far.
    pub fn forward_calls(&self) -> usize {
        self.forward_calls.load(Ordering::Relaxed)
    }

    /// Encoder weights (`bert.*`) in the compute dtype, for initializing classifiers.
    pub fn encoder_tensors(&self) -> HashMap<String, Tensor> {
        self.tensors
            .iter()
            .filter(|(k, _)| k.starts_with("bert.") && !k.starts_with("bert.pooler."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    /// Pooler weights shipped with the checkpoint, if any.
    pub fn pooler_tensors(&self) -> HashMap<String, Tensor> {
        self.tensors
            .iter()
            .filter(|(k, _)| k.starts_with("bert.pooler."))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect()
    }

    pub fn encode(&self, text: &TextInput) -> Result<EncodedText> {
        if text.is_blank() {
            return Err(Error::EmptyInput);
        }
        let mut tokens = self.tokenizer.encode(text)?;
        if tokens.special_mask.iter().all(|&s| s) {
            return Err(Error::EmptyInput);
        }
        let max = self.descriptor.max_seq_len;
        if tokens.ids.len() > max {
            if !self.truncate {
                return Err(Error::SequenceTooLong {
                    len: tokens.ids.len(),
                    max,
                });
            }
            truncate_longest_first(&mut tokens, max)?;
        }
        let n = tokens.ids.len();
        Ok(EncodedText {
            token_ids: tokens.ids,
            position_ids: (0..n as u32).collect(),
            segment_ids: tokens.type_ids,
            special_mask: tokens.special_mask,
            original: text.clone(),
        })
    }

    fn dropout_sampler(&self, seed: u64) -> Option<DropoutSampler> {
        self.descriptor
            .dropout_active
            .then(|| DropoutSampler::new(seed))
    }

    /// One encoder pass over a single sequence; returns `(seq, hidden)`.
    fn run_encoder(
        &self,
        enc: &EncodedText,
        mut sampler: Option<DropoutSampler>,
    ) -> Result<Tensor> {
        if enc.len() > self.descriptor.max_seq_len {
            return Err(Error::SequenceTooLong {
                len: enc.len(),
                max: self.descriptor.max_seq_len,
            });
        }
        self.forward_calls.fetch_add(1, Ordering::Relaxed);
        let n = enc.len();
        let ids = Tensor::from_slice(&enc.token_ids, (1, n), &self.device)?;
        let types = Tensor::from_slice(&enc.segment_ids, (1, n), &self.device)?;
        let mask = Tensor::ones((1, n), self.dtype, &self.device)?;
        let hidden = self
            .encoder
            .forward(TokenInput::Ids(&ids), &types, &mask, &mut sampler)?;
        Ok(hidden.squeeze(0)?)
    }

    /// Last-layer hidden states, `seq_len x embed_size`. With dropout active the
    /// masks are drawn from `seed`; otherwise the output does not depend on it.
    pub fn forward_hidden(&self, enc: &EncodedText, seed: u64) -> Result<DenseMatrix> {
        let hidden = self.run_encoder(enc, self.dropout_sampler(seed))?;
        let (rows, cols) = hidden.dims2()?;
        let data = hidden
            .to_dtype(DType::F64)?
            .flatten_all()?
            .to_vec1::<f64>()?;
        Ok(DenseMatrix::new(data, rows, cols))
    }

    fn distributions(&self, hidden: &Tensor) -> Result<Vec<f64>> {
        let logits = self
            .head
            .logits(hidden, self.encoder.word_embeddings())?
            .to_dtype(DType::F64)?;
        let logits = (logits / self.descriptor.temperature)?;
        let probs = candle_nn::ops::softmax(&logits, D::Minus1)?;
        Ok(probs.flatten_all()?.to_vec1::<f64>()?)
    }

    /// Smoothed representation: per-position `softmax(h W^T / temperature)`
    /// from a single dropout-enabled pass over the unmasked input.
    pub fn smooth(&self, req: &SmoothingRequest) -> Result<SmoothedSequence> {
        let enc = self.encode(&req.text)?;
        self.smooth_encoded(&enc, req.seed, req.resample)
    }

    /// [`smooth`](Self::smooth) on an already encoded text. With
    /// `resample == false` a cached result for the same text is reused.
    pub fn smooth_encoded(
        &self,
        enc: &EncodedText,
        seed: u64,
        resample: bool,
    ) -> Result<SmoothedSequence> {
        if !resample {
            let cache = self.cache.lock().expect("smoothing cache poisoned");
            if let Some(hit) = cache.get(&enc.original) {
                if hit.len() == enc.len() {
                    return Ok(hit.clone());
                }
            }
        }
        let hidden = self.run_encoder(enc, self.dropout_sampler(seed))?;
        let probs = self.distributions(&hidden)?;
        let seq = SmoothedSequence::from_probabilities(probs, self.descriptor.vocab_size, seed)?;
        if !resample {
            self.cache
                .lock()
                .expect("smoothing cache poisoned")
                .insert(enc.original.clone(), seq.clone());
        }
        Ok(seq)
    }

    /// Smoothing followed by interpolation with the one-hot input under the
    /// backend's special-token policy.
    pub fn smooth_and_interpolate(
        &self,
        req: &SmoothingRequest,
        lambda: f64,
    ) -> Result<SmoothedSequence> {
        check_lambda(lambda)?;
        let enc = self.encode(&req.text)?;
        self.smooth_and_interpolate_encoded(&enc, req.seed, req.resample, lambda)
    }

    pub fn smooth_and_interpolate_encoded(
        &self,
        enc: &EncodedText,
        seed: u64,
        resample: bool,
        lambda: f64,
    ) -> Result<SmoothedSequence> {
        check_lambda(lambda)?;
        let smoothed = self.smooth_encoded(enc, seed, resample)?;
        let onehot = one_hot_encode(&enc.token_ids, self.descriptor.vocab_size)?;
        interpolate(
            &onehot,
            &smoothed,
            lambda,
            &enc.special_mask,
            self.special_policy,
        )
    }

    /// Inference-mode (no dropout) distributions for an input that may contain `[MASK]`.
    pub fn predict(&self, enc: &EncodedText) -> Result<SmoothedSequence> {
        let hidden = self.run_encoder(enc, None)?;
        let probs = self.distributions(&hidden)?;
        SmoothedSequence::from_probabilities(probs, self.descriptor.vocab_size, 0)
    }

    /// The tied input/output word-embedding table.
    pub fn embedding_matrix(&self) -> Result<EmbeddingMatrix> {
        let w = self.encoder.word_embeddings();
        let (rows, cols) = w.dims2()?;
        let data = w.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?;
        EmbeddingMatrix::new(data, rows, cols)
    }

    /// Whether logits pass through a dense + LayerNorm transform before the decoder.
    pub fn has_head_transform(&self) -> bool {
        self.head.has_transform()
    }

    /// Decoder output bias, if the checkpoint has one.
    pub fn output_bias(&self) -> Result<Option<Vec<f64>>> {
        self.head
            .bias()
            .map(|b| Ok(b.to_dtype(DType::F64)?.to_vec1::<f64>()?))
            .transpose()
    }
}

/// Drops trailing content tokens from whichever segment is longest until the
/// sequence fits in `max` positions.
fn truncate_longest_first(tokens: &mut Tokenized, max: usize) -> Result<()> {
    while tokens.ids.len() > max {
        let mut per_segment: HashMap<u32, usize> = HashMap::new();
        for (i, &special) in tokens.special_mask.iter().enumerate() {
            if !special {
                *per_segment.entry(tokens.type_ids[i]).or_default() += 1;
            }
        }
        let Some((&segment, _)) = per_segment
            .iter()
            .max_by_key(|(seg, n)| (**n, std::cmp::Reverse(**seg)))
        else {
            return Err(Error::SequenceTooLong {
                len: tokens.ids.len(),
                max,
            });
        };
        let last = (0..tokens.ids.len())
            .rev()
            .find(|&i| !tokens.special_mask[i] && tokens.type_ids[i] == segment)
            .expect("segment has a content token");
        tokens.ids.remove(last);
        tokens.type_ids.remove(last);
        tokens.special_mask.remove(last);
    }
    Ok(())
}
