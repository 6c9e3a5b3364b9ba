use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

const BUNDLED_SYNONYMS: &str = include_str!("../../assets/eda/synonyms.tsv");
const BUNDLED_STOPWORDS: &str = include_str!("../../assets/eda/stopwords.txt");

/// Word to synonyms lookup.
///
/// File format: UTF-8 lines `word<TAB>syn1,syn2,...`. Blank lines and lines
/// starting with `#` are skipped; repeated headwords are merged. Lookups are
/// case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct SynonymTable {
    entries: HashMap<String, Vec<String>>,
}

impl SynonymTable {
    pub fn parse(source: &str, origin: &str) -> Result<Self> {
        let mut entries: HashMap<String, Vec<String>> = HashMap::new();
        for (i, line) in source.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (word, syns) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, line_no, "expected word<TAB>synonyms"))?;
            let word = word.trim().to_lowercase();
            if word.is_empty() {
                return Err(Error::parse(origin, line_no, "empty headword"));
            }
            let list = entries.entry(word.clone()).or_default();
            for syn in syns.split(',').map(|s| s.trim().to_lowercase()) {
                if !syn.is_empty() && syn != word && !list.contains(&syn) {
                    list.push(syn);
                }
            }
        }
        entries.retain(|_, v| !v.is_empty());
        Ok(Self { entries })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?, &path.display().to_string())
    }

    /// The table shipped in `assets/eda/synonyms.tsv`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_SYNONYMS, "assets/eda/synonyms.tsv")
            .expect("bundled synonym table parses")
    }

    pub fn synonyms(&self, word: &str) -> &[String] {
        self.entries
            .get(&word.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Words never chosen for synonym replacement.
#[derive(Debug, Clone, Default)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn bundled() -> Self {
        Self::from_words(BUNDLED_STOPWORDS.lines())
    }

    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        Self(
            words
                .into_iter()
                .map(|w| w.trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.to_lowercase())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_merges() {
        let t = SynonymTable::parse("# c\nGood\tgreat, fine\ngood\tnice,great\n\nbad\t\n", "t")
            .unwrap();
        assert_eq!(t.synonyms("GOOD"), &["great", "fine", "nice"]);
        assert!(t.synonyms("bad").is_empty());
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn missing_tab_names_line() {
        let err = SynonymTable::parse("good\tgreat\nbroken line\n", "syn.tsv").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn bundled_assets_load() {
        assert!(SynonymTable::bundled().len() > 150);
        let stop = Stopwords::bundled();
        assert!(stop.contains("The"));
        assert!(!stop.contains("movie"));
    }
}
