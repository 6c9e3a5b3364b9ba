//! Classifier fine-tuning where training inputs may be smoothed distributions
//! embedded by mixing, and evaluation always uses plain token ids.

mod classifier;
mod metrics;

use std::collections::HashMap;

use candle_core::Tensor;
use candle_nn::{AdamW, Optimizer, ParamsAdamW};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use classifier::{build_classifier, Batch, Classifier};
pub use metrics::{accuracy, aggregate, fingerprint_of, Aggregate, RunResult};

use crate::augment::{LabeledExample, TrainingStream};
use crate::error::{Error, Result};
use crate::mlm::dropout::DropoutSampler;
use crate::mlm::{EncodedText, MlmBackend};
use crate::repr::{check_lambda, SmoothedSequence, DEFAULT_LAMBDA};
use crate::seed::{derive_seed, example_seed};

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;
const EVAL_BATCH: usize = 64;

/// When smoothed inputs are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resample {
    /// A fresh dropout draw for every example in every epoch.
    #[default]
    PerEpoch,
    /// One draw per example, reused for all epochs.
    CacheOnce,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub lambda: f64,
    pub seed: u64,
    pub smoothing_enabled: bool,
    /// Must stay `true`: evaluation never smooths.
    pub eval_uses_onehot: bool,
    pub resample: Resample,
    /// Classifier dropout; `None` keeps the encoder's configured rate.
    pub dropout: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 8,
            learning_rate: 4e-5,
            weight_decay: 0.01,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            smoothing_enabled: false,
            eval_uses_onehot: true,
            resample: Resample::PerEpoch,
            dropout: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidConfig(
                "weight decay must be non-negative".into(),
            ));
        }
        if let Some(p) = self.dropout {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!(
                    "dropout {p} is outside [0, 1)"
                )));
            }
        }
        check_lambda(self.lambda)?;
        if !self.eval_uses_onehot {
            return Err(Error::InvalidConfig(
                "evaluation always uses one-hot inputs".into(),
            ));
        }
        Ok(())
    }
}

/// Per-epoch bookkeeping of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    /// Development accuracy after each epoch.
    pub dev_trace: Vec<f64>,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
    /// Zero-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
    pub steps: usize,
}

fn label_indices<'a>(clf: &Classifier, labels: impl Iterator<Item = &'a str>) -> Result<Vec<u32>> {
    labels
        .map(|l| {
            clf.label_index(l).map(|i| i as u32).ok_or_else(|| {
                Error::LabelMismatch(format!("label {l:?} is not one of {:?}", clf.labels()))
            })
        })
        .collect()
}

/// Optimizer state and input construction for one training run.
pub struct Trainer<'a> {
    clf: &'a Classifier,
    backend: &'a MlmBackend,
    cfg: TrainConfig,
    opt: AdamW,
    steps: usize,
    cache: HashMap<usize, SmoothedSequence>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        clf: &'a mut Classifier,
        backend: &'a MlmBackend,
        cfg: &TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if let Some(p) = cfg.dropout {
            clf.set_dropout(p);
        }
        let opt = AdamW::new(
            clf.varmap().all_vars(),
            ParamsAdamW {
                lr: cfg.learning_rate,
                weight_decay: cfg.weight_decay,
                ..Default::default()
            },
        )?;
        Ok(Self {
            clf,
            backend,
            cfg: cfg.clone(),
            opt,
            steps: 0,
            cache: HashMap::new(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn smoothed_input(
        &mut self,
        enc: &EncodedText,
        index: usize,
        epoch: usize,
    ) -> Result<SmoothedSequence> {
        let seed = |epoch: usize| example_seed(self.cfg.seed, epoch as u64, index as u64);
        match self.cfg.resample {
            Resample::PerEpoch => {
                self.backend
                    .smooth_and_interpolate_encoded(enc, seed(epoch), true, self.cfg.lambda)
            }
            Resample::CacheOnce => {
                if let Some(hit) = self.cache.get(&index) {
                    return Ok(hit.clone());
                }
                let seq = self.backend.smooth_and_interpolate_encoded(
                    enc,
                    seed(0),
                    true,
                    self.cfg.lambda,
                )?;
                self.cache.insert(index, seq.clone());
                Ok(seq)
            }
        }
    }

    /// One optimizer step on the stream items at `indices`; returns the loss.
    /// `encoded` and `targets` are indexed like the stream.
    pub fn step(
        &mut self,
        stream: &TrainingStream,
        encoded: &[EncodedText],
        targets: &[u32],
        indices: &[usize],
        epoch: usize,
    ) -> Result<f64> {
        let batch_enc: Vec<EncodedText> = indices.iter().map(|&i| encoded[i].clone()).collect();
        let batch_targets: Vec<u32> = indices.iter().map(|&i| targets[i]).collect();
        let mut smoothed = Vec::with_capacity(indices.len());
        for &i in indices {
            smoothed.push(
                if self.cfg.smoothing_enabled && stream.items()[i].smoothed {
                    Some(self.smoothed_input(&encoded[i], i, epoch)?)
                } else {
                    None
                },
            );
        }

        let batch = self.clf.batch(&batch_enc)?;
        let distributions = if smoothed.iter().any(Option::is_some) {
            let refs: Vec<Option<&SmoothedSequence>> =
                smoothed.iter().map(Option::as_ref).collect();
            Some(self.clf.distributions(&batch_enc, &refs)?)
        } else {
            None
        };
        let mut sampler = Some(DropoutSampler::new(derive_seed(&[
            self.cfg.seed,
            DROPOUT_STREAM,
            self.steps as u64,
        ])));
        let logits = self
            .clf
            .logits(&batch, distributions.as_ref(), &mut sampler)?;
        let targets = Tensor::from_vec(batch_targets, indices.len(), self.clf.device())?;
        let loss = candle_nn::loss::cross_entropy(&logits, &targets)?;
        self.opt.backward_step(&loss)?;
        self.steps += 1;
        Ok(loss.to_dtype(candle_core::DType::F64)?.to_scalar::<f64>()?)
    }
}

fn encode_all<'a>(
    backend: &MlmBackend,
    examples: impl Iterator<Item = &'a LabeledExample>,
) -> Result<Vec<EncodedText>> {
    examples.map(|ex| backend.encode(&ex.text)).collect()
}

/// Fine-tunes `clf` on the stream, keeping the weights of the epoch with the
/// best development accuracy (earliest on ties).
///
/// An item is smoothed when `cfg.smoothing_enabled` is set and the stream
/// marks it as smoothed; its interpolation weight is `cfg.lambda`.
pub fn train(
    clf: &mut Classifier,
    backend: &MlmBackend,
    train_set: &TrainingStream,
    dev_set: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset("training set"));
    }
    if dev_set.is_empty() {
        return Err(Error::EmptyDataset("development set"));
    }
    if cfg.smoothing_enabled && train_set.any_smoothed() && train_set.lambda() != cfg.lambda {
        return Err(Error::InvalidConfig(format!(
            "stream built with lambda {} but training uses {}",
            train_set.lambda(),
            cfg.lambda
        )));
    }
    let targets = label_indices(clf, train_set.labels())?;
    label_indices(clf, dev_set.iter().map(|e| e.label.as_str()))?;
    let encoded = encode_all(backend, train_set.items().iter().map(|i| &i.example))?;
    let dev_encoded = encode_all(backend, dev_set.iter())?;

    let mut outcome = TrainOutcome {
        dev_trace: Vec::with_capacity(cfg.epochs),
        loss_trace: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_dev_accuracy: f64::NEG_INFINITY,
        steps: 0,
    };
    let mut best = None;
    {
        let mut trainer = Trainer::new(clf, backend, cfg)?;
        for epoch in 0..cfg.epochs {
            let mut order: Vec<usize> = (0..train_set.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[
                cfg.seed,
                SHUFFLE_STREAM,
                epoch as u64,
            ])));
            let mut losses = Vec::new();
            for chunk in order.chunks(cfg.batch_size) {
                losses.push(trainer.step(train_set, &encoded, &targets, chunk, epoch)?);
            }
            outcome
                .loss_trace
                .push(losses.iter().sum::<f64>() / losses.len() as f64);
            let dev_acc = evaluate_encoded(trainer.clf, &dev_encoded, dev_set)?;
            log::debug!(
                "epoch {epoch}: loss {:.4}, dev {dev_acc:.4}",
                outcome.loss_trace[epoch]
            );
            outcome.dev_trace.push(dev_acc);
            if dev_acc > outcome.best_dev_accuracy {
                outcome.best_dev_accuracy = dev_acc;
                outcome.best_epoch = epoch;
                best = Some(trainer.clf.snapshot()?);
            }
        }
        outcome.steps = trainer.steps();
    }
    if let Some(snapshot) = best {
        clf.restore(&snapshot)?;
    }
    Ok(outcome)
}

fn evaluate_encoded(
    clf: &Classifier,
    encoded: &[EncodedText],
    examples: &[LabeledExample],
) -> Result<f64> {
    let gold: Vec<usize> = label_indices(clf, examples.iter().map(|e| e.label.as_str()))?
        .into_iter()
        .map(|i| i as usize)
        .collect();
    let mut predicted = Vec::with_capacity(encoded.len());
    for chunk in encoded.chunks(EVAL_BATCH) {
        predicted.extend(clf.predict(chunk)?);
    }
    accuracy(&predicted, &gold)
}

/// Accuracy on `test_set` with token-id inputs and argmax decoding.
pub fn evaluate(
    clf: &Classifier,
    backend: &MlmBackend,
    test_set: &[LabeledExample],
) -> Result<f64> {
    if test_set.is_empty() {
        return Err(Error::EmptyDataset("test set"));
    }
    let encoded = encode_all(backend, test_set.iter())?;
    evaluate_encoded(clf, &encoded, test_set)
}
