//! BERT-style transformer encoder.
//!
//! Parameter names follow the Hugging Face `BertForMaskedLM` layout
//! (`bert.embeddings.*`, `bert.encoder.layer.{i}.*`, `cls.predictions.*`) so
//! pre-trained checkpoints load without renaming. The word-embedding input
//! accepts either token ids (row lookup) or per-position vocabulary
//! distributions (a dense product with the embedding table); every later
//! operation is shared by both paths.

use candle_core::{DType, Module, Result, Tensor, D};
use candle_nn::{Linear, VarBuilder};
use serde::{Deserialize, Serialize};

use super::dropout::{maybe_dropout, DropoutSampler};

fn default_type_vocab() -> usize {
    2
}

fn default_eps() -> f64 {
    1e-12
}

fn default_dropout() -> f64 {
    0.1
}

/// Encoder hyper-parameters; deserializes from a Hugging Face `config.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_size: usize,
    pub num_hidden_layers: usize,
    pub num_attention_heads: usize,
    pub intermediate_size: usize,
    pub max_position_embeddings: usize,
    #[serde(default = "default_type_vocab")]
    pub type_vocab_size: usize,
    #[serde(default = "default_eps")]
    pub layer_norm_eps: f64,
    #[serde(default = "default_dropout")]
    pub hidden_dropout_prob: f64,
    #[serde(default = "default_dropout")]
    pub attention_probs_dropout_prob: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_act: Option<String>,
}

impl EncoderConfig {
    pub fn validate(&self) -> crate::Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("hidden_size", self.hidden_size),
            ("num_hidden_layers", self.num_hidden_layers),
            ("num_attention_heads", self.num_attention_heads),
            ("intermediate_size", self.intermediate_size),
            ("max_position_embeddings", self.max_position_embeddings),
            ("type_vocab_size", self.type_vocab_size),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(crate::Error::InvalidConfig(format!(
                "{name} must be positive"
            )));
        }
        if self.hidden_size % self.num_attention_heads != 0 {
            return Err(crate::Error::InvalidConfig(format!(
                "hidden_size {} is not divisible by {} heads",
                self.hidden_size, self.num_attention_heads
            )));
        }
        match self.hidden_act.as_deref() {
            None | Some("gelu") => Ok(()),
            Some(other) => Err(crate::Error::InvalidConfig(format!(
                "unsupported activation {other:?}"
            ))),
        }
    }

    /// Shapes of every encoder parameter, by checkpoint name.
    pub fn encoder_parameter_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let h = self.hidden_size;
        let mut shapes = vec![
            (
                "bert.embeddings.word_embeddings.weight".to_string(),
                vec![self.vocab_size, h],
            ),
            (
                "bert.embeddings.position_embeddings.weight".to_string(),
                vec![self.max_position_embeddings, h],
            ),
            (
                "bert.embeddings.token_type_embeddings.weight".to_string(),
                vec![self.type_vocab_size, h],
            ),
            ("bert.embeddings.LayerNorm.weight".to_string(), vec![h]),
            ("bert.embeddings.LayerNorm.bias".to_string(), vec![h]),
        ];
        for i in 0..self.num_hidden_layers {
            let p = format!("bert.encoder.layer.{i}");
            for lin in [
                "attention.self.query",
                "attention.self.key",
                "attention.self.value",
                "attention.output.dense",
            ] {
                shapes.push((format!("{p}.{lin}.weight"), vec![h, h]));
                shapes.push((format!("{p}.{lin}.bias"), vec![h]));
            }
            shapes.push((format!("{p}.attention.output.LayerNorm.weight"), vec![h]));
            shapes.push((format!("{p}.attention.output.LayerNorm.bias"), vec![h]));
            shapes.push((
                format!("{p}.intermediate.dense.weight"),
                vec![self.intermediate_size, h],
            ));
            shapes.push((
                format!("{p}.intermediate.dense.bias"),
                vec![self.intermediate_size],
            ));
            shapes.push((
                format!("{p}.output.dense.weight"),
                vec![h, self.intermediate_size],
            ));
            shapes.push((format!("{p}.output.dense.bias"), vec![h]));
            shapes.push((format!("{p}.output.LayerNorm.weight"), vec![h]));
            shapes.push((format!("{p}.output.LayerNorm.bias"), vec![h]));
        }
        shapes
    }
}

/// Layer normalization built from differentiable primitives.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    weight: Tensor,
    bias: Tensor,
    eps: f64,
}

impl LayerNorm {
    pub fn load(size: usize, eps: f64, vb: VarBuilder) -> Result<Self> {
        Ok(Self {
            weight: vb.get(size, "weight")?,
            bias: vb.get(size, "bias")?,
            eps,
        })
    }
}

impl Module for LayerNorm {
    fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        let normed = centered.broadcast_div(&(var + self.eps)?.sqrt()?)?;
        normed
            .broadcast_mul(&self.weight)?
            .broadcast_add(&self.bias)
    }
}

fn linear(in_dim: usize, out_dim: usize, vb: VarBuilder) -> Result<Linear> {
    let weight = vb.get((out_dim, in_dim), "weight")?;
    let bias = vb.get(out_dim, "bias")?;
    Ok(Linear::new(weight, Some(bias)))
}

/// What enters the word-embedding layer.
#[derive(Debug, Clone, Copy)]
pub enum TokenInput<'a> {
    /// `(batch, seq)` u32 token ids, embedded by row lookup.
    Ids(&'a Tensor),
    /// `(batch, seq, vocab)` distributions, embedded by a product with the table.
    Distributions(&'a Tensor),
}

#[derive(Debug, Clone)]
struct Embeddings {
    word: Tensor,
    position: Tensor,
    token_type: Tensor,
    layer_norm: LayerNorm,
    dropout: f64,
}

impl Embeddings {
    fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        Ok(Self {
            word: vb.get((cfg.vocab_size, h), "word_embeddings.weight")?,
            position: vb.get(
                (cfg.max_position_embeddings, h),
                "position_embeddings.weight",
            )?,
            token_type: vb.get((cfg.type_vocab_size, h), "token_type_embeddings.weight")?,
            layer_norm: LayerNorm::load(h, cfg.layer_norm_eps, vb.pp("LayerNorm"))?,
            dropout: cfg.hidden_dropout_prob,
        })
    }

    fn forward(
        &self,
        input: TokenInput,
        token_type_ids: &Tensor,
        sampler: &mut Option<DropoutSampler>,
    ) -> Result<Tensor> {
        let (batch, seq) = token_type_ids.dims2()?;
        let (vocab, hidden) = self.word.dims2()?;
        let words = match input {
            TokenInput::Ids(ids) => self
                .word
                .index_select(&ids.flatten_all()?, 0)?
                .reshape((batch, seq, hidden))?,
            TokenInput::Distributions(dists) => dists
                .reshape((batch * seq, vocab))?
                .matmul(&self.word)?
                .reshape((batch, seq, hidden))?,
        };
        let types = self
            .token_type
            .index_select(&token_type_ids.flatten_all()?, 0)?
            .reshape((batch, seq, hidden))?;
        let positions = Tensor::arange(0u32, seq as u32, token_type_ids.device())?;
        let positions = self.position.index_select(&positions, 0)?;
        let x = (words + types)?.broadcast_add(&positions)?;
        let x = self.layer_norm.forward(&x)?;
        maybe_dropout(&x, self.dropout, sampler)
    }
}

#[derive(Debug, Clone)]
struct Attention {
    query: Linear,
    key: Linear,
    value: Linear,
    output: Linear,
    layer_norm: LayerNorm,
    heads: usize,
    head_dim: usize,
    attention_dropout: f64,
    hidden_dropout: f64,
}

impl Attention {
    fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        let sa = vb.pp("self");
        Ok(Self {
            query: linear(h, h, sa.pp("query"))?,
            key: linear(h, h, sa.pp("key"))?,
            value: linear(h, h, sa.pp("value"))?,
            output: linear(h, h, vb.pp("output").pp("dense"))?,
            layer_norm: LayerNorm::load(h, cfg.layer_norm_eps, vb.pp("output").pp("LayerNorm"))?,
            heads: cfg.num_attention_heads,
            head_dim: h / cfg.num_attention_heads,
            attention_dropout: cfg.attention_probs_dropout_prob,
            hidden_dropout: cfg.hidden_dropout_prob,
        })
    }

    fn forward(
        &self,
        x: &Tensor,
        mask: &Tensor,
        sampler: &mut Option<DropoutSampler>,
    ) -> Result<Tensor> {
        let (batch, seq, hidden) = x.dims3()?;
        let split = |t: Tensor| -> Result<Tensor> {
            t.reshape((batch, seq, self.heads, self.head_dim))?
                .transpose(1, 2)?
                .contiguous()
        };
        let q = split(self.query.forward(x)?)?;
        let k = split(self.key.forward(x)?)?;
        let v = split(self.value.forward(x)?)?;

        let scores = (q.matmul(&k.t()?.contiguous()?)? / (self.head_dim as f64).sqrt())?;
        let scores = scores.broadcast_add(mask)?;
        let probs = candle_nn::ops::softmax(&scores, D::Minus1)?;
        let probs = maybe_dropout(&probs, self.attention_dropout, sampler)?;
        let context = probs
            .matmul(&v)?
            .transpose(1, 2)?
            .contiguous()?
            .reshape((batch, seq, hidden))?;

        let out = self.output.forward(&context)?;
        let out = maybe_dropout(&out, self.hidden_dropout, sampler)?;
        self.layer_norm.forward(&(out + x)?)
    }
}

#[derive(Debug, Clone)]
struct Layer {
    attention: Attention,
    intermediate: Linear,
    output: Linear,
    layer_norm: LayerNorm,
    dropout: f64,
}

impl Layer {
    fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        Ok(Self {
            attention: Attention::load(cfg, vb.pp("attention"))?,
            intermediate: linear(h, cfg.intermediate_size, vb.pp("intermediate").pp("dense"))?,
            output: linear(cfg.intermediate_size, h, vb.pp("output").pp("dense"))?,
            layer_norm: LayerNorm::load(h, cfg.layer_norm_eps, vb.pp("output").pp("LayerNorm"))?,
            dropout: cfg.hidden_dropout_prob,
        })
    }

    fn forward(
        &self,
        x: &Tensor,
        mask: &Tensor,
        sampler: &mut Option<DropoutSampler>,
    ) -> Result<Tensor> {
        let attended = self.attention.forward(x, mask, sampler)?;
        let inner = self.intermediate.forward(&attended)?.gelu_erf()?;
        let out = self.output.forward(&inner)?;
        let out = maybe_dropout(&out, self.dropout, sampler)?;
        self.layer_norm.forward(&(out + attended)?)
    }
}

/// Embeddings plus a stack of transformer layers; returns last-layer hidden states.
#[derive(Debug, Clone)]
pub struct BertEncoder {
    embeddings: Embeddings,
    layers: Vec<Layer>,
    config: EncoderConfig,
}

impl BertEncoder {
    /// `vb` must point at the `bert` prefix.
    pub fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let embeddings = Embeddings::load(cfg, vb.pp("embeddings"))?;
        let layers = (0..cfg.num_hidden_layers)
            .map(|i| Layer::load(cfg, vb.pp(format!("encoder.layer.{i}"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            embeddings,
            layers,
            config: cfg.clone(),
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    /// The `(vocab, hidden)` word-embedding table.
    pub fn word_embeddings(&self) -> &Tensor {
        &self.embeddings.word
    }

    /// `attention_mask` is `(batch, seq)` with 1 for real tokens and 0 for padding.
    /// Passing a sampler enables dropout; `None` runs in inference mode.
    pub fn forward(
        &self,
        input: TokenInput,
        token_type_ids: &Tensor,
        attention_mask: &Tensor,
        sampler: &mut Option<DropoutSampler>,
    ) -> Result<Tensor> {
        let (batch, seq) = attention_mask.dims2()?;
        let dtype = self.embeddings.word.dtype();
        let additive = attention_mask
            .to_dtype(dtype)?
            .affine(10_000.0, -10_000.0)?
            .reshape((batch, 1, 1, seq))?;
        let mut x = self.embeddings.forward(input, token_type_ids, sampler)?;
        for layer in &self.layers {
            x = layer.forward(&x, &additive, sampler)?;
        }
        Ok(x)
    }
}

/// Optional prediction-head pieces of a masked LM checkpoint: the dense +
/// GELU + LayerNorm transform applied before the tied decoder, and the
/// decoder's output bias.
#[derive(Debug, Clone, Default)]
pub struct MlmHead {
    transform: Option<(Linear, LayerNorm)>,
    bias: Option<Tensor>,
}

impl MlmHead {
    /// `vb` must point at `cls.predictions`; absent pieces are left out.
    pub fn load(cfg: &EncoderConfig, vb: VarBuilder) -> Result<Self> {
        let h = cfg.hidden_size;
        let transform = if vb.contains_tensor("transform.dense.weight") {
            Some((
                linear(h, h, vb.pp("transform").pp("dense"))?,
                LayerNorm::load(h, cfg.layer_norm_eps, vb.pp("transform").pp("LayerNorm"))?,
            ))
        } else {
            None
        };
        let bias = if vb.contains_tensor("bias") {
            Some(vb.get(cfg.vocab_size, "bias")?)
        } else {
            None
        };
        Ok(Self { transform, bias })
    }

    pub fn has_transform(&self) -> bool {
        self.transform.is_some()
    }

    pub fn bias(&self) -> Option<&Tensor> {
        self.bias.as_ref()
    }

    /// Vocabulary logits `transform(hidden) W^T + b` for `(seq, hidden)` states.
    pub fn logits(&self, hidden: &Tensor, word_embeddings: &Tensor) -> Result<Tensor> {
        let hidden = match &self.transform {
            Some((dense, ln)) => ln.forward(&dense.forward(hidden)?.gelu_erf()?)?,
            None => hidden.clone(),
        };
        let logits = hidden.matmul(&word_embeddings.t()?)?;
        match &self.bias {
            Some(b) => logits.broadcast_add(b),
            None => Ok(logits),
        }
    }
}

/// Encoder dtype for a backend kind: the micro backend computes in `f64`.
pub fn compute_dtype(kind: super::BackendKind) -> DType {
    match kind {
        super::BackendKind::Micro => DType::F64,
        super::BackendKind::Pretrained => DType::F32,
    }
}
