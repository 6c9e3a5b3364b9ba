//! Builds the training streams compared when an augmenter is combined with
//! smoothing: the augmenter alone (originals plus augmented texts, discrete)
//! and the same texts routed through smoothing. Externally produced
//! augmentations enter through a TSV file.
//!
//! ```bash
//! cargo run -p text-smoothing --example compose_with_smoothing
//! ```

use anyhow::Result;
use text_smoothing::augment::{
    compose_with_smoothing, import_external, Eda, EdaConfig, LabeledExample, Origin, TrainingStream,
};

fn main() -> Result<()> {
    let originals = vec![
        LabeledExample::new("the movie was great fun", "positive"),
        LabeledExample::new("i love the acting", "positive"),
        LabeledExample::new("the plot was boring", "negative"),
        LabeledExample::new("the ending felt bad", "negative"),
    ];
    let eda = Eda::bundled();
    let mut augmented = Vec::new();
    for (i, ex) in originals.iter().enumerate() {
        augmented.extend(eda.augment(ex, &EdaConfig::default(), i as u64)?);
    }

    let alone = TrainingStream::with_augmented(originals.clone(), &augmented);
    let composed = compose_with_smoothing(&augmented, 0.1)?;
    println!("originals: {}", originals.len());
    println!(
        "augmenter alone:  {} items, smoothed: {}",
        alone.len(),
        alone.any_smoothed()
    );
    println!(
        "with smoothing:   {} items (x{}), smoothed: {}",
        composed.len(),
        composed.multiplier(),
        composed.any_smoothed()
    );
    for item in composed.items() {
        let origin = match &item.origin {
            Origin::Original => "original".to_string(),
            Origin::Augmented { augmenter } => augmenter.clone(),
        };
        println!(
            "  {:>9} {:>8}  {}",
            origin,
            item.example.label,
            item.example.text.first()
        );
    }

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("backtranslated.tsv");
    std::fs::write(
        &path,
        "positive\tthe film was very fun\nnegative\tthe story was dull\n",
    )?;
    let external = import_external(&path, "backtranslation")?;
    let stream = compose_with_smoothing(&external, 0.1)?;
    println!(
        "external file: {} augmented texts -> {} stream items",
        external.len(),
        stream.len()
    );
    Ok(())
}
