//! The four EDA operations, one at a time and mixed, on one sentence.
//!
//! ```bash
//! cargo run -p text-smoothing --example eda_augment -- "the acting was great but the plot felt too long"
//! ```

use anyhow::Result;
use text_smoothing::augment::{Eda, EdaConfig, EdaOp, LabeledExample};

fn main() -> Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "the acting was great but the plot felt too long".to_string());
    let ex = LabeledExample::new(text.as_str(), "positive");
    let eda = Eda::bundled();
    println!("original: {text}");
    for op in EdaOp::ALL {
        let cfg = EdaConfig {
            alpha: 0.2,
            ..EdaConfig::only(op)
        };
        let out = eda.augment(&ex, &cfg, 1)?;
        println!("{op:?}: {}", out[0].augmented.first());
    }
    let mixed = EdaConfig {
        num_aug_per_example: 4,
        ..EdaConfig::default()
    };
    for a in eda.augment(&ex, &mixed, 2)? {
        println!("[{} / {}] {}", a.augmenter, a.label(), a.augmented.first());
    }
    Ok(())
}
