//! Seeded dropout masks.
//!
//! Candle's CPU random source cannot be seeded, so masks are drawn from a
//! ChaCha stream owned by the caller. One sampler covers one forward pass;
//! the order of dropout sites fixes which draws each site receives.

use candle_core::{Result, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct DropoutSampler {
    rng: ChaCha8Rng,
}

impl DropoutSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Inverted dropout: zero each entry with probability `p`, scale survivors by `1 / (1 - p)`.
    pub fn apply(&mut self, x: &Tensor, p: f64) -> Result<Tensor> {
        if p <= 0.0 {
            return Ok(x.clone());
        }
        let scale = 1.0 / (1.0 - p);
        let mask: Vec<f64> = (0..x.elem_count())
            .map(|_| {
                if self.rng.random::<f64>() < p {
                    0.0
                } else {
                    scale
                }
            })
            .collect();
        let mask = Tensor::from_vec(mask, x.shape(), x.device())?.to_dtype(x.dtype())?;
        x.mul(&mask)
    }
}

/// Applies dropout when a sampler is present; identity otherwise.
pub fn maybe_dropout(x: &Tensor, p: f64, sampler: &mut Option<DropoutSampler>) -> Result<Tensor> {
    match sampler {
        Some(s) => s.apply(x, p),
        None => Ok(x.clone()),
    }
}
