//! Document-level emotion intensities with negation and degree modifiers,
//! plus corpus-level standardisation.
//!
//! Every occurrence of a lexicon word contributes `(-1)^m * deg * I_k(w)`,
//! where `m` counts negation words and `deg` is the mean degree value among
//! the `window` tokens immediately before the occurrence.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emotion::{Emotion, EmotionVector, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::lexicon::Lexicon;
use crate::numeric::{compensated_sum, mean, population_sd};
use crate::table::{num, Table};

pub const DEFAULT_WINDOW: usize = 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub publisher_id: String,
    /// Set on comments: the article being commented on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article_id: Option<String>,
    pub tokens: Vec<String>,
    #[serde(default)]
    pub n_images: u32,
    #[serde(default)]
    pub n_videos: u32,
    #[serde(default)]
    pub posted_weekend: bool,
    #[serde(default)]
    pub n_comments: u32,
    #[serde(default)]
    pub original: bool,
    #[serde(default)]
    pub char_length: u32,
}

pub fn read_documents(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Robustness filters applied before scoring.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentFilter {
    pub min_chars: Option<u32>,
    pub drop_video: bool,
}

impl DocumentFilter {
    pub fn keep(&self, doc: &Document) -> bool {
        self.min_chars.is_none_or(|m| doc.char_length >= m) && !(self.drop_video && doc.n_videos > 0)
    }
}

/// Negation words and degree words with their multipliers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModifierDictionaries {
    negations: HashSet<String>,
    degrees: HashMap<String, f64>,
}

impl ModifierDictionaries {
    pub fn new(
        negations: impl IntoIterator<Item = String>,
        degrees: impl IntoIterator<Item = (String, f64)>,
    ) -> Result<Self> {
        let negations: HashSet<String> = negations.into_iter().collect();
        let mut deg = HashMap::new();
        for (w, v) in degrees {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("degree value for `{w}` must be positive, got {v}")));
            }
            if negations.contains(&w) {
                return Err(Error::invalid(format!("`{w}` is both a negation and a degree word")));
            }
            deg.insert(w, v);
        }
        Ok(Self {
            negations,
            degrees: deg,
        })
    }

    /// Reads a negation list (one word per line) and a degree list
    /// (`word<TAB>value` per line).
    pub fn read(negations: &Path, degrees: &Path) -> Result<Self> {
        let neg = read_word_lines(negations)?
            .into_iter()
            .map(|(w, _)| w)
            .collect::<Vec<_>>();
        let mut deg = Vec::new();
        for (i, (w, v)) in read_word_lines(degrees)?.into_iter().enumerate() {
            match v.as_deref().map(str::parse::<f64>) {
                Some(Ok(x)) => deg.push((w, x)),
                // tolerate a header row
                _ if i == 0 => continue,
                _ => return Err(Error::parse(degrees, format!("line {}: missing degree value", i + 1))),
            }
        }
        Self::new(neg, deg)
    }

    pub fn write(&self, negations: &Path, degrees: &Path) -> Result<()> {
        let mut neg: Vec<&String> = self.negations.iter().collect();
        neg.sort();
        let body: String = neg.iter().map(|w| format!("{w}\n")).collect();
        std::fs::write(negations, body).map_err(|e| Error::io(negations, e))?;
        let mut deg: Vec<(&String, &f64)> = self.degrees.iter().collect();
        deg.sort_by(|a, b| a.0.cmp(b.0));
        let body: String = deg.iter().map(|(w, v)| format!("{w}\t{v}\n")).collect();
        std::fs::write(degrees, body).map_err(|e| Error::io(degrees, e))
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(token)
    }

    pub fn degree(&self, token: &str) -> Option<f64> {
        self.degrees.get(token).copied()
    }

    pub fn negations(&self) -> impl Iterator<Item = &str> {
        self.negations.iter().map(String::as_str)
    }

    pub fn degrees(&self) -> impl Iterator<Item = (&str, f64)> {
        self.degrees.iter().map(|(w, v)| (w.as_str(), *v))
    }

    /// Modifier tokens that are also lexicon words, sorted.
    pub fn conflicts_with(&self, lexicon: &Lexicon) -> Vec<String> {
        let mut out: Vec<String> = self
            .negations
            .iter()
            .chain(self.degrees.keys())
            .filter(|w| lexicon.contains(w))
            .cloned()
            .collect();
        out.sort();
        out
    }

    fn without(&self, words: &[String]) -> Self {
        let drop: HashSet<&String> = words.iter().collect();
        Self {
            negations: self.negations.iter().filter(|w| !drop.contains(w)).cloned().collect(),
            degrees: self
                .degrees
                .iter()
                .filter(|(w, _)| !drop.contains(w))
                .map(|(w, v)| (w.clone(), *v))
                .collect(),
        }
    }
}

fn read_word_lines(path: &Path) -> Result<Vec<(String, Option<String>)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut parts = l.split(['\t', ',']);
            let w = parts.next().unwrap_or("").trim().to_string();
            let v = parts.next().map(|s| s.trim().to_string());
            (w, v)
        })
        .collect())
}

/// Scores token sequences against a lexicon and modifier dictionaries.
///
/// Modifier entries that are also lexicon words are dropped from the
/// dictionaries (they count as emotion words only) and kept in
/// [`EmotionScorer::conflicts`].
#[derive(Debug, Clone)]
pub struct EmotionScorer<'a> {
    lexicon: &'a Lexicon,
    modifiers: ModifierDictionaries,
    window: usize,
    conflicts: Vec<String>,
}

impl<'a> EmotionScorer<'a> {
    pub fn new(lexicon: &'a Lexicon, modifiers: &ModifierDictionaries, window: usize) -> Self {
        let conflicts = modifiers.conflicts_with(lexicon);
        if !conflicts.is_empty() {
            log::warn!(
                "{} modifier words are also lexicon words and are scored as emotion words: {}",
                conflicts.len(),
                conflicts.join(", ")
            );
        }
        Self {
            lexicon,
            modifiers: modifiers.without(&conflicts),
            window,
            conflicts,
        }
    }

    pub fn conflicts(&self) -> &[String] {
        &self.conflicts
    }

    pub fn score_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> EmotionVector {
        let mut e = EmotionVector::ZERO;
        for (i, tok) in tokens.iter().enumerate() {
            let Some(iv) = self.lexicon.intensities(tok.as_ref()) else {
                continue;
            };
            let start = i.saturating_sub(self.window);
            let mut negations = 0usize;
            let mut degree_sum = 0.0;
            let mut degree_count = 0usize;
            for t in &tokens[start..i] {
                let t = t.as_ref();
                if self.modifiers.is_negation(t) {
                    negations += 1;
                } else if let Some(v) = self.modifiers.degree(t) {
                    degree_sum += v;
                    degree_count += 1;
                }
            }
            let sign = if negations % 2 == 1 { -1.0 } else { 1.0 };
            let degree = if degree_count == 0 {
                1.0
            } else {
                degree_sum / degree_count as f64
            };
            let weight = sign * degree;
            for k in 0..N_EMOTIONS {
                e[k] += weight * iv[k];
            }
        }
        e
    }

    pub fn score(&self, doc: &Document) -> EmotionVector {
        self.score_tokens(&doc.tokens)
    }

    /// Scores documents in parallel, preserving order.
    pub fn score_corpus(&self, docs: &[Document]) -> EmotionMatrix {
        let rows = docs.par_iter().map(|d| self.score(d)).collect();
        EmotionMatrix {
            ids: docs.iter().map(|d| d.id.clone()).collect(),
            rows,
            standardized: false,
        }
    }
}

pub fn score_document(doc: &Document, lexicon: &Lexicon, modifiers: &ModifierDictionaries, window: usize) -> EmotionVector {
    EmotionScorer::new(lexicon, modifiers, window).score(doc)
}

/// Documents x emotions.
#[derive(Debug, Clone, PartialEq)]
pub struct EmotionMatrix {
    pub ids: Vec<String>,
    pub rows: Vec<EmotionVector>,
    pub standardized: bool,
}

impl EmotionMatrix {
    pub fn raw(ids: Vec<String>, rows: Vec<EmotionVector>) -> Self {
        Self {
            ids,
            rows,
            standardized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, emotion: Emotion) -> Vec<f64> {
        self.rows.iter().map(|r| r[emotion]).collect()
    }

    /// `id` plus one column per emotion.
    pub fn to_table(&self) -> Table {
        let mut cols = vec!["id".to_string()];
        cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
        let mut t = Table::new(cols);
        for (id, r) in self.ids.iter().zip(&self.rows) {
            let mut row = vec![id.clone()];
            row.extend(r.0.iter().map(|v| num(*v)));
            t.push(row).expect("fixed width");
        }
        t
    }

    pub fn from_table(table: &Table, standardized: bool) -> Result<Self> {
        let ids: Vec<String> = table.text_column("id")?.into_iter().map(String::from).collect();
        let mut rows = vec![EmotionVector::ZERO; ids.len()];
        for e in Emotion::ALL {
            for (r, v) in rows.iter_mut().zip(table.numeric_column(e.name())?) {
                r[e] = v;
            }
        }
        Ok(Self { ids, rows, standardized })
    }
}

/// Population z-scores of one column; constant columns are rejected.
pub fn zscores(values: &[f64], name: &str) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(Error::invalid("standardisation needs at least 2 rows"));
    }
    let m = mean(values);
    let sd = population_sd(values);
    if !(sd > 0.0) {
        return Err(Error::DegenerateColumn(name.to_string()));
    }
    Ok(values.iter().map(|v| (v - m) / sd).collect())
}

/// Per-emotion population z-scores.
pub fn standardize(matrix: &EmotionMatrix) -> Result<EmotionMatrix> {
    let mut rows = vec![EmotionVector::ZERO; matrix.len()];
    for e in Emotion::ALL {
        let z = zscores(&matrix.column(e), e.name())?;
        for (r, v) in rows.iter_mut().zip(z) {
            r[e] = v;
        }
    }
    Ok(EmotionMatrix {
        ids: matrix.ids.clone(),
        rows,
        standardized: true,
    })
}

/// Row sums of raw intensities, standardised.
pub fn degree_of_emotion(matrix: &EmotionMatrix) -> Result<Vec<f64>> {
    let sums: Vec<f64> = matrix.rows.iter().map(|r| compensated_sum(r.0)).collect();
    zscores(&sums, "degree_of_emotion")
}

/// Scored corpus as one table: `id`, the raw intensities as `raw_{emotion}`
/// when `with_raw`, the z-scores under the bare emotion names, and
/// `degree_of_emotion`.
pub fn score_table(raw: &EmotionMatrix, with_raw: bool) -> Result<Table> {
    let z = standardize(raw)?;
    let degree = degree_of_emotion(raw)?;
    let mut cols = vec!["id".to_string()];
    if with_raw {
        cols.extend(Emotion::ALL.iter().map(|e| format!("raw_{}", e.name())));
    }
    cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    cols.push("degree_of_emotion".into());
    let mut t = Table::new(cols);
    for (i, (id, r)) in z.ids.iter().zip(&z.rows).enumerate() {
        let mut row = vec![id.clone()];
        if with_raw {
            row.extend(raw.rows[i].0.iter().map(|v| num(*v)));
        }
        row.extend(r.0.iter().map(|v| num(*v)));
        row.push(num(degree[i]));
        t.push(row)?;
    }
    Ok(t)
}

/// Correlation matrix as a table with an `emotion` row label.
pub fn correlation_table(matrix: &EmotionMatrix) -> Result<Table> {
    let c = correlation_matrix(matrix)?;
    let mut cols = vec!["emotion".to_string()];
    cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    let mut t = Table::new(cols);
    for (a, row) in c.iter().enumerate() {
        let mut cells = vec![Emotion::ALL[a].name().to_string()];
        cells.extend(row.iter().map(|v| num(*v)));
        t.push(cells)?;
    }
    Ok(t)
}

/// Pearson correlations between the eight emotion columns.
pub fn correlation_matrix(matrix: &EmotionMatrix) -> Result<[[f64; N_EMOTIONS]; N_EMOTIONS]> {
    let z = standardize(matrix)?;
    let n = z.len() as f64;
    let mut out = [[0.0; N_EMOTIONS]; N_EMOTIONS];
    for a in 0..N_EMOTIONS {
        out[a][a] = 1.0;
        for b in (a + 1)..N_EMOTIONS {
            let r = compensated_sum(z.rows.iter().map(|row| row[a] * row[b])) / n;
            let r = r.clamp(-1.0, 1.0);
            out[a][b] = r;
            out[b][a] = r;
        }
    }
    Ok(out)
}
