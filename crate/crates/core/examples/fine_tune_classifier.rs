//! Fine-tunes a classifier on smoothed inputs, evaluates it on plain token
//! ids, and round-trips the checkpoint.
//!
//! ```bash
//! cargo run --release -p text-smoothing --example fine_tune_classifier
//! ```

use anyhow::Result;
use text_smoothing::augment::TrainingStream;
use text_smoothing::harness::synthetic::synthetic_examples;
use text_smoothing::trainer::{build_classifier, evaluate, train, Classifier, TrainConfig};
use text_smoothing::MlmBackend;

fn main() -> Result<()> {
    let backend = MlmBackend::micro()?;
    let labels = vec!["fruit".to_string(), "review".to_string()];
    let train_set = synthetic_examples(&labels, 16, 1);
    let dev_set = synthetic_examples(&labels, 16, 2);
    let test_set = synthetic_examples(&labels, 64, 3);

    let cfg = TrainConfig {
        smoothing_enabled: true,
        learning_rate: 1e-3,
        batch_size: 4,
        seed: 7,
        ..TrainConfig::default()
    };
    let stream = TrainingStream::smoothed(train_set, cfg.lambda)?;
    let mut clf = build_classifier(&backend, &labels, cfg.seed)?;
    let outcome = train(&mut clf, &backend, &stream, &dev_set, &cfg)?;
    for (epoch, (loss, dev)) in outcome
        .loss_trace
        .iter()
        .zip(&outcome.dev_trace)
        .enumerate()
    {
        println!("epoch {epoch}: loss {loss:.4}  dev accuracy {dev:.3}");
    }
    println!(
        "kept epoch {} after {} steps",
        outcome.best_epoch, outcome.steps
    );
    println!("test accuracy: {:.3}", evaluate(&clf, &backend, &test_set)?);

    let dir = tempfile::tempdir()?;
    clf.save(dir.path())?;
    let restored = Classifier::load(dir.path())?;
    println!(
        "restored test accuracy: {:.3}",
        evaluate(&restored, &backend, &test_set)?
    );
    Ok(())
}
