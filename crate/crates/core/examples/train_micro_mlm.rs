//! Regenerates the bundled micro-backend weights.
//!
//! Pre-trains the 2-layer micro encoder with a standard masked-LM objective
//! (15% of content tokens: 80% `[MASK]`, 10% random, 10% kept) on sentences
//! drawn from a small set of review templates, then writes the weight archive.
//!
//! ```bash
//! cargo run --release -p text-smoothing --example train_micro_mlm -- crates/core/assets/micro/weights.tsmw
//! ```

use std::collections::BTreeMap;

use anyhow::Result;
use candle_core::{DType, Device, Tensor, Var};
use candle_nn::{loss, Optimizer, ParamsAdamW, VarBuilder, VarMap};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use text_smoothing::mlm::archive::{Archive, ArchiveTensor};
use text_smoothing::mlm::dropout::DropoutSampler;
use text_smoothing::mlm::encoder::{BertEncoder, TokenInput};
use text_smoothing::mlm::micro;
use text_smoothing::mlm::TextTokenizer;

const STEPS: usize = 3000;
const BATCH: usize = 32;
const SEED: u64 = 20220501;

const ITEMS: &[&str] = &[
    "shirt", "food", "service", "movie", "film", "book", "story", "acting", "ending", "plot",
    "price",
];
const SENTIMENT: &[&str] = &[
    "average",
    "good",
    "great",
    "poor",
    "bad",
    "high",
    "low",
    "excellent",
    "terrible",
    "fine",
    "okay",
    "amazing",
    "awful",
    "boring",
    "fun",
];
const FRUITS: &[&str] = &["pear", "apple", "banana"];
const TASTES: &[&str] = &[
    "fresh",
    "delicious",
    "good",
    "bad",
    "awful",
    "great",
    "okay",
];
const ADVERBS: &[&str] = &["very", "really", "so", "not", "too"];

fn sentence(rng: &mut ChaCha8Rng) -> String {
    let mut pick = |xs: &[&'static str]| *xs.choose(rng).unwrap();
    match pick(&["0", "1", "2", "3", "4", "5", "6", "7", "8"]) {
        "0" => format!(
            "the quality of this {} is {} .",
            pick(ITEMS),
            pick(SENTIMENT)
        ),
        "1" => format!(
            "this {} was {} {} .",
            pick(ITEMS),
            pick(ADVERBS),
            pick(SENTIMENT)
        ),
        "2" => format!("my favorite fruit is {} .", pick(FRUITS)),
        "3" => format!("the {} tastes {} .", pick(FRUITS), pick(TASTES)),
        "4" => format!("i {} this {} !", pick(&["love", "hate"]), pick(ITEMS)),
        "5" => format!(
            "the {} is {} but the {} is {} .",
            pick(ITEMS),
            pick(SENTIMENT),
            pick(ITEMS),
            pick(SENTIMENT)
        ),
        "6" => format!("it was {} and {} .", pick(SENTIMENT), pick(SENTIMENT)),
        "7" => format!(
            "that {} looks {} , it feels {} .",
            pick(ITEMS),
            pick(SENTIMENT),
            pick(SENTIMENT)
        ),
        _ => format!(
            "a {} {} of {} quality .",
            pick(SENTIMENT),
            pick(ITEMS),
            pick(&["high", "low", "average", "good", "poor"])
        ),
    }
}

fn main() -> Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crates/core/assets/micro/weights.tsmw".to_string());
    let device = Device::Cpu;
    let config = micro::config();
    let tokenizer = micro::tokenizer()?;
    let specials = tokenizer.special_ids();
    let mask_id = specials.mask.expect("micro vocabulary has [MASK]");
    let pad_id = specials.pad.expect("micro vocabulary has [PAD]");
    let first_word = 5u32;

    let init = micro::random_archive(&config, SEED, 0.1);
    let varmap = VarMap::new();
    {
        let mut data = varmap.data().lock().unwrap();
        for (name, t) in &init.tensors {
            let tensor = Tensor::from_slice(&t.data, t.shape.as_slice(), &device)?;
            data.insert(name.clone(), Var::from_tensor(&tensor)?);
        }
    }
    let vb = VarBuilder::from_varmap(&varmap, DType::F32, &device);
    let encoder = BertEncoder::load(&config, vb.pp("bert"))?;
    let mut opt = candle_nn::AdamW::new(
        varmap.all_vars(),
        ParamsAdamW {
            lr: 3e-3,
            weight_decay: 0.01,
            ..Default::default()
        },
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for step in 0..STEPS {
        let encoded: Vec<_> = (0..BATCH)
            .map(|_| tokenizer.encode(&sentence(&mut rng).into()))
            .collect::<Result<_, _>>()?;
        let seq = encoded.iter().map(|e| e.ids.len()).max().unwrap();
        let mut inputs = vec![pad_id; BATCH * seq];
        let mut attention = vec![0f32; BATCH * seq];
        let mut positions = Vec::new();
        let mut targets = Vec::new();
        for (b, e) in encoded.iter().enumerate() {
            let content: Vec<usize> = (0..e.ids.len()).filter(|&i| !e.special_mask[i]).collect();
            let n_mask = ((content.len() as f64 * 0.15).round() as usize).max(1);
            let chosen: Vec<usize> = content.choose_multiple(&mut rng, n_mask).copied().collect();
            for (i, &id) in e.ids.iter().enumerate() {
                inputs[b * seq + i] = id;
                attention[b * seq + i] = 1.0;
            }
            for i in chosen {
                let roll: f64 = rng.random();
                inputs[b * seq + i] = if roll < 0.8 {
                    mask_id
                } else if roll < 0.9 {
                    rng.random_range(first_word..config.vocab_size as u32)
                } else {
                    e.ids[i]
                };
                positions.push((b * seq + i) as u32);
                targets.push(e.ids[i]);
            }
        }
        let ids = Tensor::from_vec(inputs, (BATCH, seq), &device)?;
        let types = ids.zeros_like()?;
        let attention = Tensor::from_vec(attention, (BATCH, seq), &device)?;
        let mut sampler = Some(DropoutSampler::new(SEED ^ step as u64));
        let hidden = encoder.forward(TokenInput::Ids(&ids), &types, &attention, &mut sampler)?;
        let hidden = hidden.reshape((BATCH * seq, config.hidden_size))?;
        let n_targets = positions.len();
        let picked = hidden.index_select(&Tensor::from_vec(positions, n_targets, &device)?, 0)?;
        let logits = picked.matmul(&encoder.word_embeddings().t()?)?;
        let loss = loss::cross_entropy(&logits, &Tensor::from_vec(targets, n_targets, &device)?)?;
        opt.backward_step(&loss)?;
        if step % 250 == 0 || step + 1 == STEPS {
            println!("step {step:5}  mlm loss {:.4}", loss.to_scalar::<f32>()?);
        }
    }

    let mut tensors = BTreeMap::new();
    for (name, var) in varmap.data().lock().unwrap().iter() {
        let t = var.as_tensor();
        tensors.insert(
            name.clone(),
            ArchiveTensor {
                shape: t.dims().to_vec(),
                data: t.flatten_all()?.to_vec1::<f32>()?,
            },
        );
    }
    let archive = Archive { config, tensors };
    std::fs::write(&out, archive.to_bytes()?)?;
    println!("wrote {out}");
    Ok(())
}
