//! Smoothing with a pre-trained BERT checkpoint directory (`config.json`,
//! `model.safetensors` or `pytorch_model.bin`, `vocab.txt` or
//! `tokenizer.json`). Prints the strongest candidates at every position.
//!
//! ```bash
//! cargo run --release -p text-smoothing --example pretrained_smoothing -- /path/to/bert-base-uncased
//! ```

use anyhow::{bail, Result};
use text_smoothing::{BackendConfig, MlmBackend, SmoothingRequest};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next() else {
        bail!("usage: pretrained_smoothing <checkpoint-dir> [sentence]");
    };
    let sentence = args
        .next()
        .unwrap_or_else(|| "The quality of this shirt is average .".to_string());
    let backend = MlmBackend::load(&BackendConfig::pretrained(dir))?;
    let req = SmoothingRequest::new(sentence.as_str(), 0);
    let enc = backend.encode(&req.text)?;
    let smoothed = backend.smooth(&req)?;
    let tok = backend.tokenizer();
    for (i, &id) in enc.token_ids.iter().enumerate() {
        let top: Vec<String> = smoothed
            .top_k(i, 5)
            .into_iter()
            .map(|(v, p)| format!("{}={p:.3}", tok.id_to_token(v as u32).unwrap_or_default()))
            .collect();
        println!(
            "{:>12}  {}",
            tok.id_to_token(id).unwrap_or_default(),
            top.join(" ")
        );
    }
    Ok(())
}
