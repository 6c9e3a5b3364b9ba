//! Smooth one sentence with the bundled micro masked LM and interpolate it
//! with its one-hot representation.
//!
//! ```bash
//! cargo run -p text-smoothing --example smooth_sentence -- "the quality of this shirt is average ." 0.1
//! ```

use anyhow::Result;
use text_smoothing::{MlmBackend, SmoothingRequest, DEFAULT_LAMBDA};

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let sentence = args
        .next()
        .unwrap_or_else(|| "the quality of this shirt is average .".to_string());
    let lambda: f64 = args
        .next()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(DEFAULT_LAMBDA);

    let backend = MlmBackend::micro()?;
    let tokenizer = backend.tokenizer();
    let request = SmoothingRequest::new(sentence.as_str(), 7);
    let encoded = backend.encode(&request.text)?;
    let smoothed = backend.smooth(&request)?;
    let interpolated = backend.smooth_and_interpolate(&request, lambda)?;

    println!("sentence: {sentence}");
    println!("lambda:   {lambda}  (dropout seed {})", request.seed);
    println!(
        "one forward pass per call; passes so far: {}",
        backend.forward_calls()
    );
    println!();
    for (pos, &id) in encoded.token_ids.iter().enumerate() {
        let token = tokenizer.id_to_token(id).unwrap_or_default();
        let show = |row: &[(usize, f64)]| {
            row.iter()
                .map(|&(v, p)| {
                    format!(
                        "{}={:.3}",
                        tokenizer.id_to_token(v as u32).unwrap_or_default(),
                        p
                    )
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!(
            "{pos:2} {token:>10} | smoothed: {}",
            show(&smoothed.top_k(pos, 4))
        );
        println!(
            "{:>13} | mixed:    {}",
            "",
            show(&interpolated.top_k(pos, 4))
        );
    }
    Ok(())
}
