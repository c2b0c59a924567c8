//! Emotion lexicons and their expansion over a word-embedding space.
//!
//! A basic, manually annotated lexicon is grown by mining the nearest
//! neighbours of every known emotion word, deciding which emotion classes a
//! candidate belongs to from the similarity-weighted intensities of its
//! lexicon neighbours (EO-SD), and estimating its intensities as the mean of
//! its closest annotated neighbours. The loop repeats until no new word is
//! found.

mod embedding;
mod expand;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use embedding::EmbeddingStore;
pub use expand::{
    cosine_similarity, default_holdout_size, eo_sd, estimate_intensities, expand_lexicon,
    mean_absolute_error, validate_holdout, ExpansionLog, ExpansionParams, IterationRecord,
};

use crate::emotion::{Emotion, EmotionVector, N_EMOTIONS};
use crate::error::{Error, Result};

/// Where a lexicon entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Basic,
    /// Found by expansion in the given iteration (1-based).
    Mined(u32),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Basic => f.write_str("basic"),
            Provenance::Mined(t) => write!(f, "mined:{t}"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s.eq_ignore_ascii_case("basic") {
            return Ok(Provenance::Basic);
        }
        s.strip_prefix("mined:")
            .and_then(|t| t.parse::<u32>().ok())
            .filter(|&t| t > 0)
            .map(Provenance::Mined)
            .ok_or_else(|| Error::invalid(format!("bad provenance tag `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub emotions: EmotionVector,
    pub provenance: Provenance,
}

/// Word -> emotion intensities, each word at most once, insertion-ordered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: LexiconEntry) -> Result<()> {
        if entry.word.is_empty() {
            return Err(Error::invalid("empty lexicon word"));
        }
        if !entry.emotions.is_word_level() {
            return Err(Error::invalid(format!(
                "intensities for `{}` must lie in [0, 1]",
                entry.word
            )));
        }
        if matches!(entry.provenance, Provenance::Mined(_)) && !entry.emotions.any_positive() {
            return Err(Error::invalid(format!(
                "mined word `{}` has no positive intensity",
                entry.word
            )));
        }
        if self.index.contains_key(&entry.word) {
            return Err(Error::invalid(format!("duplicate lexicon word `{}`", entry.word)));
        }
        self.index.insert(entry.word.clone(), self.entries.len());
        self.entries.push(entry);
        Ok(())
    }

    /// Adds a basic (annotated) entry.
    pub fn insert_basic(&mut self, word: impl Into<String>, emotions: EmotionVector) -> Result<()> {
        self.insert(LexiconEntry {
            word: word.into(),
            emotions,
            provenance: Provenance::Basic,
        })
    }

    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.index.get(word).map(|&i| &self.entries[i])
    }

    pub fn intensities(&self, word: &str) -> Option<&EmotionVector> {
        self.get(word).map(|e| &e.emotions)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.iter()
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .flexible(true)
            .from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() < 1 + N_EMOTIONS {
            return Err(Error::parse(path, "expected word + 8 intensity columns"));
        }
        let cols: Vec<Emotion> = headers
            .iter()
            .skip(1)
            .take(N_EMOTIONS)
            .map(str::parse)
            .collect::<Result<_>>()
            .map_err(|e| Error::parse(path, e.to_string()))?;
        let mut lex = Lexicon::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let fail = |m: String| Error::parse(path, format!("row {}: {m}", row + 2));
            let word = rec.get(0).unwrap_or("").to_string();
            let mut v = EmotionVector::ZERO;
            for (k, e) in cols.iter().enumerate() {
                let cell = rec.get(k + 1).ok_or_else(|| fail("missing intensity".into()))?;
                v[*e] = cell.trim().parse().map_err(|_| fail(format!("bad number `{cell}`")))?;
            }
            let provenance = rec
                .get(1 + N_EMOTIONS)
                .map(str::parse)
                .transpose()
                .map_err(|e: Error| fail(e.to_string()))?
                .unwrap_or(Provenance::Basic);
            lex.insert(LexiconEntry {
                word,
                emotions: v,
                provenance,
            })
            .map_err(|e| fail(e.to_string()))?;
        }
        Ok(lex)
    }

    /// Writes the tab-separated format read by [`Lexicon::read`].
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?;
        let mut header = vec!["word".to_string()];
        header.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
        header.push("provenance".into());
        w.write_record(&header)?;
        for e in &self.entries {
            let mut rec = vec![e.word.clone()];
            rec.extend(e.emotions.0.iter().map(|x| x.to_string()));
            rec.push(e.provenance.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Lexicon {
    type Item = &'a LexiconEntry;
    type IntoIter = std::slice::Iter<'a, LexiconEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn provenance_tags() {
        assert_eq!("basic".parse::<Provenance>().unwrap(), Provenance::Basic);
        assert_eq!("mined:4".parse::<Provenance>().unwrap(), Provenance::Mined(4));
        assert!("mined:0".parse::<Provenance>().is_err());
        assert_eq!(Provenance::Mined(7).to_string(), "mined:7");
    }

    #[test]
    fn insert_rules() {
        let mut lex = Lexicon::new();
        lex.insert_basic("w", EmotionVector::single(Emotion::Joy, 0.4)).unwrap();
        assert!(lex.insert_basic("w", EmotionVector::ZERO).is_err());
        assert!(lex.insert_basic("x", EmotionVector::single(Emotion::Joy, 1.5)).is_err());
        let mined_zero = LexiconEntry {
            word: "y".into(),
            emotions: EmotionVector::ZERO,
            provenance: Provenance::Mined(1),
        };
        assert!(lex.insert(mined_zero).is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        let mut lex = Lexicon::new();
        lex.insert_basic("good", EmotionVector::single(Emotion::Joy, 0.8)).unwrap();
        lex.insert(LexiconEntry {
            word: "dread".into(),
            emotions: EmotionVector::single(Emotion::Anxiety, 0.35),
            provenance: Provenance::Mined(2),
        })
        .unwrap();
        lex.write(&path).unwrap();
        assert_eq!(Lexicon::read(&path).unwrap(), lex);
    }
}
