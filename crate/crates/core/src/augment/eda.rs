//! The four EDA operations over whitespace-separated words.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::synonyms::{Stopwords, SynonymTable};
use super::{AugmentedExample, LabeledExample};
use crate::error::{Error, Result};
use crate::mlm::TextInput;
use crate::seed::derive_seed;

/// Attempts at drawing a word with synonyms before random insertion scans the whole text.
const INSERTION_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdaOp {
    SynonymReplacement,
    RandomInsertion,
    RandomSwap,
    RandomDeletion,
}

impl EdaOp {
    pub const ALL: [EdaOp; 4] = [
        EdaOp::SynonymReplacement,
        EdaOp::RandomInsertion,
        EdaOp::RandomSwap,
        EdaOp::RandomDeletion,
    ];

    fn needs_synonyms(self) -> bool {
        matches!(self, EdaOp::SynonymReplacement | EdaOp::RandomInsertion)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EdaConfig {
    pub alpha: f64,
    pub ops_enabled: Vec<EdaOp>,
    pub num_aug_per_example: usize,
}

impl Default for EdaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            ops_enabled: EdaOp::ALL.to_vec(),
            num_aug_per_example: 1,
        }
    }
}

impl EdaConfig {
    /// Default alpha and count with a single operation enabled.
    pub fn only(op: EdaOp) -> Self {
        Self {
            ops_enabled: vec![op],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "EDA alpha {} is outside (0, 1]",
                self.alpha
            )));
        }
        if self.ops_enabled.is_empty() {
            return Err(Error::InvalidConfig("no EDA operation enabled".into()));
        }
        if self.num_aug_per_example == 0 {
            return Err(Error::InvalidConfig(
                "num_aug_per_example must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// EDA augmenter. Stateless apart from its read-only word lists.
#[derive(Debug, Clone)]
pub struct Eda {
    synonyms: Option<SynonymTable>,
    stopwords: Stopwords,
}

impl Eda {
    pub fn new(synonyms: Option<SynonymTable>, stopwords: Stopwords) -> Self {
        Self {
            synonyms,
            stopwords,
        }
    }

    /// Bundled synonym table and stopword list.
    pub fn bundled() -> Self {
        Self::new(Some(SynonymTable::bundled()), Stopwords::bundled())
    }

    /// Returns `cfg.num_aug_per_example` augmentations of `ex`, each produced by
    /// one enabled operation chosen uniformly. For pairs only the first text is
    /// edited.
    pub fn augment(
        &self,
        ex: &LabeledExample,
        cfg: &EdaConfig,
        seed: u64,
    ) -> Result<Vec<AugmentedExample>> {
        cfg.validate()?;
        if self.synonyms.is_none() && cfg.ops_enabled.iter().any(|op| op.needs_synonyms()) {
            return Err(Error::NoSynonymSource);
        }
        let words: Vec<String> = ex
            .text
            .first()
            .split_whitespace()
            .map(str::to_string)
            .collect();
        if words.is_empty() {
            return Err(Error::EmptyText);
        }
        (0..cfg.num_aug_per_example)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, k as u64]));
                let op = *cfg
                    .ops_enabled
                    .choose(&mut rng)
                    .expect("validated non-empty");
                let edited = self.apply(op, &words, cfg.alpha, &mut rng).join(" ");
                let augmented = match &ex.text {
                    TextInput::Single(_) => TextInput::Single(edited),
                    TextInput::Pair(_, b) => TextInput::Pair(edited, b.clone()),
                };
                Ok(AugmentedExample {
                    base: ex.clone(),
                    augmented,
                    augmenter: "eda".to_string(),
                    seed,
                })
            })
            .collect()
    }

    /// Applies one operation to a word list.
    pub fn apply(
        &self,
        op: EdaOp,
        words: &[String],
        alpha: f64,
        rng: &mut impl Rng,
    ) -> Vec<String> {
        let n = ((alpha * words.len() as f64).round() as usize).max(1);
        match op {
            EdaOp::SynonymReplacement => self.synonym_replacement(words, n, rng),
            EdaOp::RandomInsertion => self.random_insertion(words, n, rng),
            EdaOp::RandomSwap => random_swap(words, n, rng),
            EdaOp::RandomDeletion => random_deletion(words, alpha, rng),
        }
    }

    fn synonyms_of(&self, word: &str) -> &[String] {
        self.synonyms
            .as_ref()
            .map(|t| t.synonyms(word))
            .unwrap_or(&[])
    }

    /// Replaces up to `n` distinct non-stopwords (every occurrence) with a random synonym.
    fn synonym_replacement(&self, words: &[String], n: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut candidates: Vec<String> = Vec::new();
        for w in words {
            let key = w.to_lowercase();
            if !self.stopwords.contains(&key)
                && !self.synonyms_of(&key).is_empty()
                && !candidates.contains(&key)
            {
                candidates.push(key);
            }
        }
        candidates.shuffle(rng);
        let mut out = words.to_vec();
        for key in candidates.into_iter().take(n) {
            let syn = self
                .synonyms_of(&key)
                .choose(rng)
                .expect("non-empty")
                .clone();
            for w in out.iter_mut().filter(|w| w.to_lowercase() == key) {
                *w = syn.clone();
            }
        }
        out
    }

    /// Inserts `n` words; output length is always `L + n`. Each insertion is a
    /// synonym of a random word, falling back to any word with synonyms and
    /// finally to a copy of a random word.
    fn random_insertion(&self, words: &[String], n: usize, rng: &mut impl Rng) -> Vec<String> {
        let mut out = words.to_vec();
        for _ in 0..n {
            let mut new_word = None;
            for _ in 0..INSERTION_ATTEMPTS {
                let w = out.choose(rng).expect("non-empty");
                if let Some(s) = self.synonyms_of(w).choose(rng) {
                    new_word = Some(s.clone());
                    break;
                }
            }
            if new_word.is_none() {
                let with_syns: Vec<&String> = out
                    .iter()
                    .filter(|w| !self.synonyms_of(w).is_empty())
                    .collect();
                new_word = with_syns
                    .choose(rng)
                    .and_then(|w| self.synonyms_of(w).choose(rng))
                    .cloned();
            }
            let new_word = new_word.unwrap_or_else(|| out.choose(rng).expect("non-empty").clone());
            let at = rng.random_range(0..=out.len());
            out.insert(at, new_word);
        }
        out
    }
}

/// Exchanges `n` pairs of distinct positions.
fn random_swap(words: &[String], n: usize, rng: &mut impl Rng) -> Vec<String> {
    let mut out = words.to_vec();
    if out.len() < 2 {
        return out;
    }
    for _ in 0..n {
        let i = rng.random_range(0..out.len());
        let mut j = rng.random_range(0..out.len() - 1);
        if j >= i {
            j += 1;
        }
        out.swap(i, j);
    }
    out
}

/// Drops each word with probability `p`, keeping one random word if all would go.
fn random_deletion(words: &[String], p: f64, rng: &mut impl Rng) -> Vec<String> {
    if words.len() == 1 {
        return words.to_vec();
    }
    let kept: Vec<String> = words
        .iter()
        .filter(|_| rng.random::<f64>() > p)
        .cloned()
        .collect();
    if kept.is_empty() {
        vec![words.choose(rng).expect("non-empty").clone()]
    } else {
        kept
    }
}
