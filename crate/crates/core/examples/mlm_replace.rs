//! Mask-and-predict replacement with the micro masked LM, showing which
//! positions were masked and what filled them.
//!
//! ```bash
//! cargo run -p text-smoothing --example mlm_replace -- "the food was really good ."
//! ```

use anyhow::Result;
use text_smoothing::augment::{mlm_replace_detailed, LabeledExample, MlmReplaceConfig, Sampling};
use text_smoothing::MlmBackend;

fn main() -> Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "the food was really good .".to_string());
    let backend = MlmBackend::micro()?;
    let ex = LabeledExample::new(text.as_str(), "positive");
    let token = |id: u32| backend.tokenizer().id_to_token(id).unwrap_or_default();
    for (name, sampling) in [("top-10", Sampling::TopK(10)), ("argmax", Sampling::Argmax)] {
        let cfg = MlmReplaceConfig {
            mask_ratio: 0.3,
            sampling,
        };
        for seed in 0..3 {
            let r = mlm_replace_detailed(&backend, &ex, &cfg, seed)?;
            let edits: Vec<String> = r
                .masked_positions
                .iter()
                .map(|&p| format!("{} -> {}", token(r.original_ids[p]), token(r.new_ids[p])))
                .collect();
            println!(
                "{name} seed {seed}: {:<40} [{}]",
                r.example.augmented.first(),
                edits.join(", ")
            );
        }
    }
    Ok(())
}
