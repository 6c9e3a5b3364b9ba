//! The representation algebra on hand-sized inputs: one-hot rows, the
//! interpolation with a smoothed row, and generic mixup with a shared label.
//!
//! ```bash
//! cargo run -p text-smoothing --example interpolate_distributions
//! ```

use anyhow::Result;
use text_smoothing::{
    interpolate, mixup_pair, one_hot_encode, SmoothedSequence, SpecialTokenPolicy,
};

fn main() -> Result<()> {
    let onehot = one_hot_encode(&[1u32], 3)?;
    let smoothed = SmoothedSequence::from_probabilities(vec![0.2, 0.5, 0.3], 3, 0)?;
    for lambda in [0.0, 0.1, 0.5, 1.0] {
        let mixed = interpolate(
            &onehot,
            &smoothed,
            lambda,
            &[false],
            SpecialTokenPolicy::KeepOneHot,
        )?;
        println!("lambda {lambda:.1}: {:?}", mixed.row(0));
    }

    // A special position stays one-hot under the default policy.
    let keep = interpolate(
        &onehot,
        &smoothed,
        0.1,
        &[true],
        SpecialTokenPolicy::KeepOneHot,
    )?;
    let uniform = interpolate(
        &onehot,
        &smoothed,
        0.1,
        &[true],
        SpecialTokenPolicy::Uniform,
    )?;
    println!("special, keep one-hot: {:?}", keep.row(0));
    println!("special, uniform:      {:?}", uniform.row(0));

    // Mixing two inputs that share a label leaves the label untouched.
    let (x, y) = mixup_pair(&[1.0, 0.0], &[0.2, 0.5], &[0.0, 1.0], &[0.0, 1.0], 0.1)?;
    println!("mixup features {x:?}, label {y:?}");
    Ok(())
}
