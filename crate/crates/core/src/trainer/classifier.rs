use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use candle_core::{DType, Device, Module, Tensor, Var};
use candle_nn::{Linear, VarBuilder, VarMap};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlm::dropout::{maybe_dropout, DropoutSampler};
use crate::mlm::encoder::{BertEncoder, EncoderConfig, TokenInput};
use crate::mlm::{EncodedText, MlmBackend};
use crate::repr::SmoothedSequence;

/// Standard deviation of freshly initialized pooler and output weights.
const INIT_STD: f64 = 0.02;
const META_FILE: &str = "classifier.json";
const WEIGHTS_FILE: &str = "classifier.safetensors";

/// Sequence classifier: a trainable copy of the backend's encoder, a tanh
/// pooler over the first position, and a linear output layer.
pub struct Classifier {
    varmap: VarMap,
    encoder: BertEncoder,
    pooler: Linear,
    output: Linear,
    labels: Vec<String>,
    config: EncoderConfig,
    dtype: DType,
    device: Device,
    pad_id: u32,
    dropout: f64,
}

impl std::fmt::Debug for Classifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Classifier")
            .field("labels", &self.labels)
            .field("dtype", &self.dtype)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassifierMeta {
    labels: Vec<String>,
    config: EncoderConfig,
    dtype: String,
    pad_id: u32,
}

/// A padded batch ready for either input path.
#[derive(Debug, Clone)]
pub struct Batch {
    pub token_ids: Tensor,
    pub type_ids: Tensor,
    pub attention_mask: Tensor,
    /// Per-example sequence lengths before padding.
    pub lengths: Vec<usize>,
}

fn normal_tensor(
    shape: &[usize],
    rng: &mut ChaCha8Rng,
    dtype: DType,
    device: &Device,
) -> Result<Tensor> {
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let data: Vec<f64> = (0..shape.iter().product())
        .map(|_| normal.sample(rng))
        .collect();
    Ok(Tensor::from_vec(data, shape, device)?.to_dtype(dtype)?)
}

/// Builds a classifier over `labels` whose encoder starts from the backend's
/// weights. The pooler comes from the checkpoint when present; new weights are
/// drawn from `seed`.
pub fn build_classifier(backend: &MlmBackend, labels: &[String], seed: u64) -> Result<Classifier> {
    if labels.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a classifier needs at least 2 labels, got {}",
            labels.len()
        )));
    }
    let config = backend.encoder_config().clone();
    let dtype = backend.dtype();
    let device = backend.device().clone();
    let h = config.hidden_size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut tensors: BTreeMap<String, Tensor> = backend.encoder_tensors().into_iter().collect();
    let pooler = backend.pooler_tensors();
    match (
        pooler.get("bert.pooler.dense.weight"),
        pooler.get("bert.pooler.dense.bias"),
    ) {
        (Some(w), Some(b)) => {
            tensors.insert("bert.pooler.dense.weight".into(), w.clone());
            tensors.insert("bert.pooler.dense.bias".into(), b.clone());
        }
        _ => {
            tensors.insert(
                "bert.pooler.dense.weight".into(),
                normal_tensor(&[h, h], &mut rng, dtype, &device)?,
            );
            tensors.insert(
                "bert.pooler.dense.bias".into(),
                Tensor::zeros(h, dtype, &device)?,
            );
        }
    }
    tensors.insert(
        "classifier.weight".into(),
        normal_tensor(&[labels.len(), h], &mut rng, dtype, &device)?,
    );
    tensors.insert(
        "classifier.bias".into(),
        Tensor::zeros(labels.len(), dtype, &device)?,
    );

    let varmap = VarMap::new();
    {
        let mut data = varmap.data().lock().expect("fresh var map");
        for (name, t) in tensors {
            data.insert(name, Var::from_tensor(&t.to_dtype(dtype)?)?);
        }
    }
    let pad_id = backend.tokenizer().special_ids().pad.unwrap_or(0);
    Classifier::assemble(varmap, labels.to_vec(), config, dtype, device, pad_id)
}

impl Classifier {
    fn assemble(
        varmap: VarMap,
        labels: Vec<String>,
        config: EncoderConfig,
        dtype: DType,
        device: Device,
        pad_id: u32,
    ) -> Result<Self> {
        let vb = VarBuilder::from_varmap(&varmap, dtype, &device);
        let encoder = BertEncoder::load(&config, vb.pp("bert"))?;
        let h = config.hidden_size;
        let linear = |vb: VarBuilder, out: usize| -> Result<Linear> {
            Ok(Linear::new(
                vb.get((out, h), "weight")?,
                Some(vb.get(out, "bias")?),
            ))
        };
        let pooler = linear(vb.pp("bert").pp("pooler").pp("dense"), h)?;
        let output = linear(vb.pp("classifier"), labels.len())?;
        let dropout = config.hidden_dropout_prob;
        Ok(Self {
            varmap,
            encoder,
            pooler,
            output,
            labels,
            config,
            dtype,
            device,
            pad_id,
            dropout,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    pub fn varmap(&self) -> &VarMap {
        &self.varmap
    }

    /// Dropout rate used in training passes; defaults to the encoder's hidden dropout.
    pub fn set_dropout(&mut self, p: f64) {
        self.dropout = p;
    }

    /// The classifier's own `(vocab, hidden)` word-embedding table.
    pub fn word_embeddings(&self) -> &Tensor {
        self.encoder.word_embeddings()
    }

    /// Current parameter values in `f64`, by name.
    pub fn parameters(&self) -> Result<BTreeMap<String, Vec<f64>>> {
        let data = self.varmap.data().lock().expect("var map poisoned");
        data.iter()
            .map(|(k, v)| {
                Ok((
                    k.clone(),
                    v.as_tensor()
                        .to_dtype(DType::F64)?
                        .flatten_all()?
                        .to_vec1::<f64>()?,
                ))
            })
            .collect()
    }

    pub(crate) fn snapshot(&self) -> Result<HashMap<String, Tensor>> {
        let data = self.varmap.data().lock().expect("var map poisoned");
        data.iter()
            .map(|(k, v)| Ok((k.clone(), v.as_tensor().copy()?)))
            .collect()
    }

    pub(crate) fn restore(&self, snapshot: &HashMap<String, Tensor>) -> Result<()> {
        let data = self.varmap.data().lock().expect("var map poisoned");
        for (k, v) in data.iter() {
            if let Some(t) = snapshot.get(k) {
                v.set(t)?;
            }
        }
        Ok(())
    }

    /// Pads encoded texts to a common length.
    pub fn batch(&self, encoded: &[EncodedText]) -> Result<Batch> {
        if encoded.is_empty() {
            return Err(Error::EmptyDataset("batch"));
        }
        let b = encoded.len();
        let s = encoded.iter().map(EncodedText::len).max().unwrap_or(0);
        let mut ids = vec![self.pad_id; b * s];
        let mut types = vec![0u32; b * s];
        let mut mask = vec![0f64; b * s];
        for (i, e) in encoded.iter().enumerate() {
            for p in 0..e.len() {
                ids[i * s + p] = e.token_ids[p];
                types[i * s + p] = e.segment_ids[p];
                mask[i * s + p] = 1.0;
            }
        }
        Ok(Batch {
            token_ids: Tensor::from_vec(ids, (b, s), &self.device)?,
            type_ids: Tensor::from_vec(types, (b, s), &self.device)?,
            attention_mask: Tensor::from_vec(mask, (b, s), &self.device)?.to_dtype(self.dtype)?,
            lengths: encoded.iter().map(EncodedText::len).collect(),
        })
    }

    /// `(batch, seq, vocab)` input distributions: the given sequence where one
    /// is supplied, the one-hot encoding of the token otherwise (padding included).
    pub fn distributions(
        &self,
        encoded: &[EncodedText],
        smoothed: &[Option<&SmoothedSequence>],
    ) -> Result<Tensor> {
        if encoded.len() != smoothed.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} texts but {} distribution entries",
                encoded.len(),
                smoothed.len()
            )));
        }
        let v = self.config.vocab_size;
        let b = encoded.len();
        let s = encoded.iter().map(EncodedText::len).max().unwrap_or(0);
        let mut data = vec![0f64; b * s * v];
        for (i, e) in encoded.iter().enumerate() {
            for p in 0..s {
                let row = &mut data[(i * s + p) * v..(i * s + p + 1) * v];
                match smoothed[i] {
                    Some(seq) if p < e.len() => {
                        if seq.len() != e.len() || seq.vocab_size() != v {
                            return Err(Error::ShapeMismatch(format!(
                                "distribution sequence {}x{} for a {}-token text over {v} tokens",
                                seq.len(),
                                seq.vocab_size(),
                                e.len()
                            )));
                        }
                        row.copy_from_slice(seq.row(p));
                    }
                    _ => {
                        let id = if p < e.len() {
                            e.token_ids[p]
                        } else {
                            self.pad_id
                        };
                        row[id as usize] = 1.0;
                    }
                }
            }
        }
        Ok(Tensor::from_vec(data, (b, s, v), &self.device)?.to_dtype(self.dtype)?)
    }

    /// `(batch, num_labels)` logits. `distributions` selects the mixing path
    /// (`dists · W`) in place of id lookup; a sampler enables dropout.
    pub fn logits(
        &self,
        batch: &Batch,
        distributions: Option<&Tensor>,
        sampler: &mut Option<DropoutSampler>,
    ) -> Result<Tensor> {
        let input = match distributions {
            Some(d) => TokenInput::Distributions(d),
            None => TokenInput::Ids(&batch.token_ids),
        };
        let hidden =
            self.encoder
                .forward(input, &batch.type_ids, &batch.attention_mask, sampler)?;
        let first = hidden.narrow(1, 0, 1)?.squeeze(1)?;
        let pooled = self.pooler.forward(&first)?.tanh()?;
        let pooled = maybe_dropout(&pooled, self.dropout, sampler)?;
        Ok(self.output.forward(&pooled)?)
    }

    /// Argmax label indices on the lookup path, without dropout.
    pub fn predict(&self, encoded: &[EncodedText]) -> Result<Vec<usize>> {
        let batch = self.batch(encoded)?;
        let logits = self.logits(&batch, None, &mut None)?;
        Ok(logits
            .argmax(1)?
            .to_vec1::<u32>()?
            .into_iter()
            .map(|i| i as usize)
            .collect())
    }

    /// Mean cross-entropy for a distribution input, without dropout.
    pub fn distribution_loss(
        &self,
        batch: &Batch,
        distributions: &Tensor,
        targets: &[u32],
    ) -> Result<f64> {
        let logits = self.logits(batch, Some(distributions), &mut None)?;
        let targets = Tensor::from_slice(targets, targets.len(), &self.device)?;
        Ok(candle_nn::loss::cross_entropy(&logits, &targets)?
            .to_dtype(DType::F64)?
            .to_scalar::<f64>()?)
    }

    /// Loss and its gradient with respect to every entry of the
    /// `(batch, seq, vocab)` distribution input, without dropout.
    pub fn distribution_gradient(
        &self,
        batch: &Batch,
        distributions: &Tensor,
        targets: &[u32],
    ) -> Result<(f64, Vec<f64>)> {
        let input = Var::from_tensor(distributions)?;
        let logits = self.logits(batch, Some(input.as_tensor()), &mut None)?;
        let targets = Tensor::from_slice(targets, targets.len(), &self.device)?;
        let loss = candle_nn::loss::cross_entropy(&logits, &targets)?;
        let grads = loss.backward()?;
        let grad = grads.get(input.as_tensor()).ok_or_else(|| {
            Error::ShapeMismatch("no gradient reached the distribution input".into())
        })?;
        Ok((
            loss.to_dtype(DType::F64)?.to_scalar::<f64>()?,
            grad.to_dtype(DType::F64)?.flatten_all()?.to_vec1::<f64>()?,
        ))
    }

    /// Writes `classifier.safetensors` and `classifier.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.varmap.save(dir.join(WEIGHTS_FILE))?;
        let meta = ClassifierMeta {
            labels: self.labels.clone(),
            config: self.config.clone(),
            dtype: self.dtype.as_str().to_string(),
            pad_id: self.pad_id,
        };
        std::fs::write(dir.join(META_FILE), serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        if !meta_path.is_file() {
            return Err(Error::MissingFile(meta_path));
        }
        let meta: ClassifierMeta = serde_json::from_slice(&std::fs::read(&meta_path)?)?;
        let dtype = match meta.dtype.as_str() {
            "f64" => DType::F64,
            "f32" => DType::F32,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unsupported checkpoint dtype {other}"
                )))
            }
        };
        let device = Device::Cpu;
        let tensors = candle_core::safetensors::load(dir.join(WEIGHTS_FILE), &device)?;
        let varmap = VarMap::new();
        {
            let mut data = varmap.data().lock().expect("fresh var map");
            for (name, t) in tensors {
                data.insert(name, Var::from_tensor(&t.to_dtype(dtype)?)?);
            }
        }
        Self::assemble(varmap, meta.labels, meta.config, dtype, device, meta.pad_id)
    }
}
