//! Synthetic datasets over the micro vocabulary, written in the same file
//! dialects as the real corpora. Each class draws from its own sentence family,
//! so class 0 and class 1 differ in structure rather than in one word.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{builtin_labels, DatasetSpec, FileFormat};
use crate::augment::LabeledExample;
use crate::error::Result;
use crate::seed::derive_seed;

const ITEMS: &[&str] = &[
    "shirt", "food", "service", "movie", "film", "book", "story", "plot", "price",
];
const FRUITS: &[&str] = &["pear", "apple", "banana"];
const TASTES: &[&str] = &["fresh", "delicious", "good", "okay", "great"];
const GOOD: &[&str] = &["good", "great", "excellent", "amazing", "fine", "fun"];
const BAD: &[&str] = &["bad", "poor", "terrible", "awful", "boring", "low"];
const ADVERBS: &[&str] = &["very", "really", "so", "too"];

fn pick(rng: &mut ChaCha8Rng, xs: &[&'static str]) -> &'static str {
    xs.choose(rng).expect("non-empty word list")
}

/// One sentence of sentence family `family` (taken modulo the family count).
pub fn sentence(family: usize, rng: &mut ChaCha8Rng) -> String {
    match family % 7 {
        0 => match pick(rng, &["a", "b"]) {
            "a" => format!("my favorite fruit is {} .", pick(rng, FRUITS)),
            _ => format!("the {} tastes {} .", pick(rng, FRUITS), pick(rng, TASTES)),
        },
        1 => format!(
            "this {} was {} {} .",
            pick(rng, ITEMS),
            pick(rng, ADVERBS),
            pick(rng, BAD)
        ),
        2 => format!("i love this {} !", pick(rng, ITEMS)),
        3 => format!(
            "the quality of this {} is {} .",
            pick(rng, ITEMS),
            pick(rng, GOOD)
        ),
        4 => format!("it was {} and {} .", pick(rng, BAD), pick(rng, BAD)),
        5 => format!(
            "that {} looks {} , it feels {} .",
            pick(rng, ITEMS),
            pick(rng, GOOD),
            pick(rng, GOOD)
        ),
        _ => format!(
            "the {} is {} but the {} is {} .",
            pick(rng, ITEMS),
            pick(rng, GOOD),
            pick(rng, ITEMS),
            pick(rng, BAD)
        ),
    }
}

/// `n` examples with labels assigned round-robin; label `k` uses family `k`.
pub fn synthetic_examples(labels: &[String], n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = i % labels.len();
            LabeledExample::new(sentence(k, &mut rng), labels[k].clone())
        })
        .collect()
}

/// Rows per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSizes {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
}

/// Writes a dataset whose files carry the raw labels `raw_labels` (e.g. `0`/`1`
/// or intent names) in `format`, plus `<name>.toml`; returns the loaded spec.
pub fn write_synthetic_dataset(
    dir: &Path,
    name: &str,
    format: FileFormat,
    raw_labels: &[&str],
    sizes: SplitSizes,
    seed: u64,
) -> Result<DatasetSpec> {
    let root = dir.join(name);
    std::fs::create_dir_all(&root)?;
    let raw: Vec<String> = raw_labels.iter().map(|s| s.to_string()).collect();
    let splits = [
        ("train", sizes.train),
        ("dev", sizes.dev),
        ("test", sizes.test),
    ];
    for (i, (split, n)) in splits.iter().enumerate() {
        let examples = synthetic_examples(&raw, *n, derive_seed(&[seed, i as u64]));
        match format {
            FileFormat::Snips => {
                let d = root.join(split);
                std::fs::create_dir_all(&d)?;
                let texts: Vec<&str> = examples.iter().map(|e| e.text.first()).collect();
                let labels: Vec<&str> = examples.iter().map(|e| e.label.as_str()).collect();
                std::fs::write(d.join("seq.in"), texts.join("\n") + "\n")?;
                std::fs::write(d.join("label"), labels.join("\n") + "\n")?;
            }
            FileFormat::LabelText | FileFormat::TextLabel => {
                let mut body = String::new();
                if format == FileFormat::TextLabel {
                    body.push_str("sentence\tlabel\n");
                }
                for e in &examples {
                    match format {
                        FileFormat::TextLabel => {
                            body.push_str(&format!("{}\t{}\n", e.text.first(), e.label))
                        }
                        _ => body.push_str(&format!("{}\t{}\n", e.label, e.text.first())),
                    }
                }
                std::fs::write(root.join(format!("{split}.tsv")), body)?;
            }
        }
    }
    let file = |split: &str| match format {
        FileFormat::Snips => split.to_string(),
        _ => format!("{split}.tsv"),
    };
    let spec = DatasetSpec {
        name: name.to_string(),
        train: file("train").into(),
        dev: file("dev").into(),
        test: file("test").into(),
        format,
        header: format == FileFormat::TextLabel,
        text_arity: 1,
        labels: None,
        label_set: if builtin_labels(name).is_some() {
            Vec::new()
        } else {
            raw.clone()
        },
        label_map: BTreeMap::new(),
    };
    let toml_path = root.join(format!("{name}.toml"));
    std::fs::write(
        &toml_path,
        toml::to_string(&spec).map_err(|e| crate::Error::InvalidConfig(e.to_string()))?,
    )?;
    DatasetSpec::from_toml_file(&toml_path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlm::micro;
    use crate::mlm::tokenizer::TextTokenizer;

    #[test]
    fn sentences_stay_in_micro_vocabulary() {
        let tok = micro::tokenizer().unwrap();
        let unk = tok.special_ids().unk.unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for f in 0..7 {
            for _ in 0..20 {
                let ids = tok.encode(&sentence(f, &mut rng).into()).unwrap().ids;
                assert!(!ids.contains(&unk));
            }
        }
    }
}
