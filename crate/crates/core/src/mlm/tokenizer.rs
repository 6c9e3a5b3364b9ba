use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

use super::TextInput;

/// Tokenizer output for one example, delimiters included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenized {
    pub ids: Vec<u32>,
    pub type_ids: Vec<u32>,
    pub special_mask: Vec<bool>,
}

/// Ids of the tokens the pipeline relies on. `pad` and `mask` may be absent
/// on hand-built fixture vocabularies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpecialIds {
    pub cls: u32,
    pub sep: u32,
    pub pad: Option<u32>,
    pub mask: Option<u32>,
    pub unk: Option<u32>,
}

pub trait TextTokenizer: Send + Sync {
    /// Tokenizes with BERT delimiters: `[CLS] a [SEP]` or `[CLS] a [SEP] b [SEP]`.
    fn encode(&self, text: &TextInput) -> Result<Tokenized>;
    fn vocab_size(&self) -> usize;
    fn token_to_id(&self, token: &str) -> Option<u32>;
    fn id_to_token(&self, id: u32) -> Option<String>;
    /// Detokenizes, dropping special tokens.
    fn decode(&self, ids: &[u32]) -> Result<String>;
    fn special_ids(&self) -> SpecialIds;

    fn is_special(&self, id: u32) -> bool {
        let s = self.special_ids();
        id == s.cls || id == s.sep || Some(id) == s.pad || Some(id) == s.mask || Some(id) == s.unk
    }
}

/// Whitespace/punctuation word-level tokenizer over a fixed vocabulary, lowercased.
#[derive(Debug, Clone)]
pub struct WordLevelTokenizer {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    special: SpecialIds,
}

impl WordLevelTokenizer {
    /// `tokens[i]` gets id `i`. `[CLS]` and `[SEP]` are required.
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        let index: HashMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        if index.len() != tokens.len() {
            return Err(Error::InvalidConfig(
                "vocabulary has duplicate tokens".into(),
            ));
        }
        let required = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::InvalidConfig(format!("vocabulary lacks {name}")))
        };
        let special = SpecialIds {
            cls: required("[CLS]")?,
            sep: required("[SEP]")?,
            pad: index.get("[PAD]").copied(),
            mask: index.get("[MASK]").copied(),
            unk: index.get("[UNK]").copied(),
        };
        Ok(Self {
            tokens,
            index,
            special,
        })
    }

    /// One token per line.
    pub fn from_vocab_str(vocab: &str) -> Result<Self> {
        Self::new(
            vocab
                .lines()
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect(),
        )
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Lowercases, splits on whitespace, and detaches ASCII punctuation.
    pub fn split_words(text: &str) -> Vec<String> {
        let mut words = Vec::new();
        for chunk in text.split_whitespace() {
            let mut current = String::new();
            for c in chunk.chars() {
                if c.is_ascii_punctuation() && c != '\'' {
                    if !current.is_empty() {
                        words.push(std::mem::take(&mut current));
                    }
                    words.push(c.to_string());
                } else {
                    current.extend(c.to_lowercase());
                }
            }
            if !current.is_empty() {
                words.push(current);
            }
        }
        words
    }

    fn word_id(&self, word: &str) -> Result<u32> {
        if let Some(&id) = self.index.get(word) {
            return Ok(id);
        }
        self.special.unk.ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{word:?} is out of vocabulary and there is no [UNK]"
            ))
        })
    }

    fn push_segment(&self, text: &str, type_id: u32, out: &mut Tokenized) -> Result<()> {
        for word in Self::split_words(text) {
            out.ids.push(self.word_id(&word)?);
            out.type_ids.push(type_id);
            out.special_mask.push(false);
        }
        out.ids.push(self.special.sep);
        out.type_ids.push(type_id);
        out.special_mask.push(true);
        Ok(())
    }
}

impl TextTokenizer for WordLevelTokenizer {
    fn encode(&self, text: &TextInput) -> Result<Tokenized> {
        let mut out = Tokenized {
            ids: vec![self.special.cls],
            type_ids: vec![0],
            special_mask: vec![true],
        };
        self.push_segment(text.first(), 0, &mut out)?;
        if let Some(second) = text.second() {
            self.push_segment(second, 1, &mut out)?;
        }
        Ok(out)
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    fn token_to_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    fn id_to_token(&self, id: u32) -> Option<String> {
        self.tokens.get(id as usize).cloned()
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        let words = ids
            .iter()
            .filter(|&&id| {
                id != self.special.cls && id != self.special.sep && Some(id) != self.special.pad
            })
            .map(|&id| {
                self.tokens
                    .get(id as usize)
                    .map(String::as_str)
                    .ok_or(Error::IndexOutOfVocab {
                        id: id as i64,
                        vocab_size: self.tokens.len(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(words.join(" "))
    }

    fn special_ids(&self) -> SpecialIds {
        self.special
    }
}

/// Wrapper over a Hugging Face `tokenizers` tokenizer for BERT checkpoints.
pub struct HfTokenizer {
    inner: tokenizers::Tokenizer,
    special: SpecialIds,
}

fn hf_error(e: tokenizers::Error) -> Error {
    Error::BackendUnavailable(format!("tokenizer: {e}"))
}

impl HfTokenizer {
    pub fn from_tokenizer(mut inner: tokenizers::Tokenizer) -> Result<Self> {
        inner.with_truncation(None).map_err(hf_error)?;
        inner.with_padding(None);
        let get = |name: &str| inner.token_to_id(name);
        let special = SpecialIds {
            cls: get("[CLS]")
                .ok_or_else(|| Error::BackendUnavailable("tokenizer lacks [CLS]".into()))?,
            sep: get("[SEP]")
                .ok_or_else(|| Error::BackendUnavailable("tokenizer lacks [SEP]".into()))?,
            pad: get("[PAD]"),
            mask: get("[MASK]"),
            unk: get("[UNK]"),
        };
        Ok(Self { inner, special })
    }

    /// Loads `tokenizer.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_tokenizer(tokenizers::Tokenizer::from_file(path).map_err(hf_error)?)
    }

    /// Builds an uncased BERT WordPiece pipeline from a `vocab.txt`.
    pub fn from_vocab(path: &Path, lowercase: bool) -> Result<Self> {
        use tokenizers::models::wordpiece::WordPiece;
        use tokenizers::normalizers::BertNormalizer;
        use tokenizers::pre_tokenizers::bert::BertPreTokenizer;
        use tokenizers::processors::bert::BertProcessing;

        let path_str = path.to_str().ok_or_else(|| {
            Error::BackendUnavailable(format!("non UTF-8 path {}", path.display()))
        })?;
        let model = WordPiece::from_file(path_str)
            .unk_token("[UNK]".to_string())
            .build()
            .map_err(hf_error)?;
        let cls = tokenizers::Model::token_to_id(&model, "[CLS]")
            .ok_or_else(|| Error::BackendUnavailable("vocab lacks [CLS]".into()))?;
        let sep = tokenizers::Model::token_to_id(&model, "[SEP]")
            .ok_or_else(|| Error::BackendUnavailable("vocab lacks [SEP]".into()))?;
        let mut inner = tokenizers::Tokenizer::new(model);
        inner
            .with_normalizer(Some(BertNormalizer::new(true, true, None, lowercase)))
            .map_err(hf_error)?;
        inner.with_pre_tokenizer(Some(BertPreTokenizer));
        inner.with_post_processor(Some(BertProcessing::new(
            ("[SEP]".to_string(), sep),
            ("[CLS]".to_string(), cls),
        )));
        Self::from_tokenizer(inner)
    }
}

impl TextTokenizer for HfTokenizer {
    fn encode(&self, text: &TextInput) -> Result<Tokenized> {
        let encoding = match text {
            TextInput::Single(a) => self.inner.encode(a.as_str(), true),
            TextInput::Pair(a, b) => self.inner.encode((a.as_str(), b.as_str()), true),
        }
        .map_err(hf_error)?;
        Ok(Tokenized {
            ids: encoding.get_ids().to_vec(),
            type_ids: encoding.get_type_ids().to_vec(),
            special_mask: encoding
                .get_special_tokens_mask()
                .iter()
                .map(|&m| m == 1)
                .collect(),
        })
    }

    fn vocab_size(&self) -> usize {
        self.inner.get_vocab_size(true)
    }

    fn token_to_id(&self, token: &str) -> Option<u32> {
        self.inner.token_to_id(token)
    }

    fn id_to_token(&self, id: u32) -> Option<String> {
        self.inner.id_to_token(id)
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        self.inner.decode(ids, true).map_err(hf_error)
    }

    fn special_ids(&self) -> SpecialIds {
        self.special
    }
}
