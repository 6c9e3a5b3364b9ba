//! Turns an interpolated distribution into classifier input: each position
//! becomes the probability-weighted sum of word embeddings.
//!
//! ```bash
//! cargo run -p text-smoothing --example smoothed_embeddings -- "my favorite fruit is pear ."
//! ```

use anyhow::Result;
use text_smoothing::{mix_embeddings, MlmBackend, SmoothingRequest};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn main() -> Result<()> {
    let sentence = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "my favorite fruit is pear .".to_string());
    let backend = MlmBackend::micro()?;
    let emb = backend.embedding_matrix()?;
    let req = SmoothingRequest::new(sentence.as_str(), 11);
    let enc = backend.encode(&req.text)?;
    let mixed = backend.smooth_and_interpolate(&req, 0.1)?;
    let smoothed = mix_embeddings(&mixed, &emb)?;
    let ids: Vec<usize> = enc.token_ids.iter().map(|&i| i as usize).collect();
    let plain = emb.gather(&ids)?;

    println!(
        "{} x {} smoothed embeddings",
        smoothed.rows(),
        smoothed.cols()
    );
    for (i, &id) in enc.token_ids.iter().enumerate() {
        let token = backend.tokenizer().id_to_token(id).unwrap_or_default();
        let delta: Vec<f64> = smoothed
            .row(i)
            .iter()
            .zip(plain.row(i))
            .map(|(a, b)| a - b)
            .collect();
        println!(
            "{token:>10}  |lookup| {:.3}  |smoothed| {:.3}  |difference| {:.3}",
            norm(plain.row(i)),
            norm(smoothed.row(i)),
            norm(&delta)
        );
    }
    Ok(())
}
