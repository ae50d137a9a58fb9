use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::model::{Model, Param};
use crate::multilingual::{split_code, LanguageSet};
use crate::vocab::Vocabulary;

use super::EvalError;

/// Written in place of a language code for uncoded tokens.
const NO_LANGUAGE: &str = "-";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub language: Option<String>,
    pub token: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub records: Vec<EmbeddingRecord>,
}

impl EmbeddingTable {
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.records.len(), self.dim);
        for r in &self.records {
            out.push_str(r.language.as_deref().unwrap_or(NO_LANGUAGE));
            out.push(' ');
            out.push_str(&r.token);
            for v in &r.values {
                write!(out, " {v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EvalError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| EvalError::Io { path: path.display().to_string(), source })
    }
}

/// One record per non-reserved source token: its language, the token with
/// its code stripped, and its source embedding row.
pub fn export_embeddings(model: &Model, vocab: &Vocabulary, languages: Option<&LanguageSet>) -> EmbeddingTable {
    let table = model.params.get(Param::SourceEmbedding);
    let dim = table.cols();
    let mut records = Vec::new();
    for id in vocab.reserved_count()..vocab.len().min(table.rows()) {
        let token = vocab.token(id).expect("id in range");
        let (language, plain) = match split_code(token) {
            Some((lang, piece)) => (Some(lang), piece.to_string()),
            None => (None, token.to_string()),
        };
        if let Some(keep) = languages {
            if !language.as_ref().is_some_and(|l| keep.contains(l)) {
                continue;
            }
        }
        records.push(EmbeddingRecord {
            language: language.map(|l| l.code().to_string()),
            token: plain,
            values: table.row_slice(id).to_vec(),
        });
    }
    EmbeddingTable { dim, records }
}

pub fn read_embeddings(text: &str) -> Result<EmbeddingTable, EvalError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(EvalError::Malformed { line: 1, reason: "missing header".into() })?;
    let bad_header = || EvalError::Malformed { line: 1, reason: format!("expected \"count dim\", found {header:?}") };
    let (count, dim) = header.split_once(' ').ok_or_else(bad_header)?;
    let count: usize = count.parse().map_err(|_| bad_header())?;
    let dim: usize = dim.parse().map_err(|_| bad_header())?;
    let mut records = Vec::with_capacity(count);
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != dim + 2 {
            return Err(EvalError::Malformed {
                line: n,
                reason: format!("expected {} fields, found {}", dim + 2, fields.len()),
            });
        }
        let values = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| EvalError::Malformed { line: n, reason: e.to_string() })?;
        let language = (fields[0] != NO_LANGUAGE).then(|| fields[0].to_string());
        records.push(EmbeddingRecord { language, token: fields[1].to_string(), values });
    }
    if records.len() != count {
        return Err(EvalError::Malformed {
            line: 1,
            reason: format!("header declares {count} records, found {}", records.len()),
        });
    }
    Ok(EmbeddingTable { dim, records })
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::Hyperparameters;
    use crate::multilingual::LanguageTag;

    fn setup() -> (Model, Vocabulary) {
        let counts: BTreeMap<String, u64> =
            [("@en@car", 3), ("@fr@voiture", 2), ("plain", 1)].iter().map(|(t, c)| (t.to_string(), *c)).collect();
        let vocab = Vocabulary::from_counts(&counts, ["<EN>".to_string(), "<FR>".to_string()], 100);
        let model = Model::init(Hyperparameters::new(vocab.len(), 4, 3, 2)).unwrap();
        (model, vocab)
    }

    #[test]
    fn one_record_per_learned_token() {
        let (model, vocab) = setup();
        let t = export_embeddings(&model, &vocab, None);
        assert_eq!(t.records.len(), vocab.len() - vocab.reserved_count());
        let car = &t.records[0];
        assert_eq!((car.language.as_deref(), car.token.as_str()), (Some("en"), "car"));
        assert_eq!(car.values.len(), 3);
        assert_eq!(t.records[2].language, None);
    }

    #[test]
    fn language_filter() {
        let (model, vocab) = setup();
        let keep = LanguageSet::new([LanguageTag::new("fr").unwrap()]);
        let t = export_embeddings(&model, &vocab, Some(&keep));
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].token, "voiture");
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let (model, vocab) = setup();
        let t = export_embeddings(&model, &vocab, None);
        let text = t.to_text();
        assert!(text.starts_with("3 3\n"));
        let back = read_embeddings(&text).unwrap();
        assert_eq!(back, t);
        let table = model.params.get(Param::SourceEmbedding);
        for (k, r) in back.records.iter().enumerate() {
            let row = table.row_slice(vocab.reserved_count() + k);
            assert!(r.values.iter().zip(row).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
        assert!(read_embeddings("2 3\n").is_err());
    }
}
