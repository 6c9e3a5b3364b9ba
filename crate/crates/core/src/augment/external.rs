//! Augmented data produced by external tools.
//!
//! TSV dialect: UTF-8, no header, one example per line as `label<TAB>text` or
//! `label<TAB>text_a<TAB>text_b`. Fields may not contain tabs or newlines.

use std::io::Write;
use std::path::Path;

use super::{AugmentedExample, LabeledExample};
use crate::error::{Error, Result};
use crate::mlm::TextInput;

/// Reads a labeled TSV; blank lines are skipped.
pub fn read_labeled_tsv(path: &Path) -> Result<Vec<LabeledExample>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let origin = path.display().to_string();
    let content = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in content.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let text = match fields.as_slice() {
            [_, a] => TextInput::Single(a.to_string()),
            [_, a, b] => TextInput::Pair(a.to_string(), b.to_string()),
            _ => {
                return Err(Error::parse(
                    &origin,
                    i + 1,
                    &format!(
                        "expected 2 or 3 tab-separated fields, found {}",
                        fields.len()
                    ),
                ))
            }
        };
        if fields[0].trim().is_empty() {
            return Err(Error::parse(&origin, i + 1, "empty label"));
        }
        if text.is_blank() {
            return Err(Error::parse(&origin, i + 1, "empty text"));
        }
        out.push(LabeledExample {
            text,
            label: fields[0].trim().to_string(),
        });
    }
    Ok(out)
}

/// Imports externally augmented examples, tagging them with `augmenter_name`.
///
/// The files carry no link to their source example, so each record's `base`
/// is the augmented text itself; the harness pairs them with originals by label.
pub fn import_external(path: &Path, augmenter_name: &str) -> Result<Vec<AugmentedExample>> {
    Ok(read_labeled_tsv(path)?
        .into_iter()
        .map(|ex| AugmentedExample {
            augmented: ex.text.clone(),
            base: ex,
            augmenter: augmenter_name.to_string(),
            seed: 0,
        })
        .collect())
}

fn check_field(field: &str) -> Result<&str> {
    if field.contains(['\t', '\n', '\r']) {
        return Err(Error::InvalidConfig(format!(
            "TSV field {field:?} contains a tab or newline"
        )));
    }
    Ok(field)
}

pub fn write_tsv<'a>(
    path: &Path,
    examples: impl IntoIterator<Item = &'a LabeledExample>,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for ex in examples {
        write!(
            out,
            "{}\t{}",
            check_field(&ex.label)?,
            check_field(ex.text.first())?
        )?;
        if let Some(b) = ex.text.second() {
            write!(out, "\t{}", check_field(b)?)?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_lines_two_examples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aug.tsv");
        std::fs::write(&path, "positive\ta fine film\nnegative\tq\tthe plot\n").unwrap();
        let out = import_external(&path, "backtranslation").unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].augmenter, "backtranslation");
        assert_eq!(out[1].augmented, TextInput::from(("q", "the plot")));
    }

    #[test]
    fn wrong_field_count_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("aug.tsv");
        std::fs::write(&path, "positive\tok\nbroken\n").unwrap();
        let err = import_external(&path, "x").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_and_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.tsv");
        std::fs::write(&path, "").unwrap();
        assert!(import_external(&path, "x").unwrap().is_empty());
        assert!(matches!(
            import_external(&dir.path().join("nope.tsv"), "x"),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn writer_round_trips_and_rejects_tabs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.tsv");
        let rows = vec![
            LabeledExample::new("good movie", "positive"),
            LabeledExample::new(("a", "b"), "entailment"),
        ];
        write_tsv(&path, &rows).unwrap();
        assert_eq!(read_labeled_tsv(&path).unwrap(), rows);
        let bad = [LabeledExample::new("x\ty", "positive")];
        assert!(write_tsv(&path, &bad).is_err());
    }
}
