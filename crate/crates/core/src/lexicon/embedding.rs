//! Dense word-vector store with exact nearest-neighbour search.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Queries processed together in one pass over the target rows.
const QUERY_BATCH: usize = 64;

/// Word vectors of a fixed dimension.
///
/// Vectors are stored as given and also pre-normalised, so similarity
/// lookups are a single dot product.
#[derive(Debug, Clone)]
pub struct EmbeddingStore {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    raw: Vec<f32>,
    unit: Vec<f32>,
    // position of each word in lexicographic order, used for tie-breaks
    rank: Vec<u32>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            dim,
            words: Vec::new(),
            index: HashMap::new(),
            raw: Vec::new(),
            unit: Vec::new(),
            rank: Vec::new(),
        })
    }

    pub fn from_pairs<I, S>(dim: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f32>)>,
        S: Into<String>,
    {
        let mut store = Self::new(dim)?;
        for (w, v) in pairs {
            store.push(w.into(), &v)?;
        }
        store.finish();
        Ok(store)
    }

    fn push(&mut self, word: String, vector: &[f32]) -> Result<()> {
        if word.is_empty() {
            return Err(Error::invalid("empty word in embedding store"));
        }
        if vector.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector for `{word}` has dimension {}, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite component in vector for `{word}`")));
        }
        if self.index.contains_key(&word) {
            return Err(Error::invalid(format!("duplicate word `{word}` in embedding store")));
        }
        let norm = vector.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DegenerateVector(Some(word)));
        }
        self.index.insert(word.clone(), self.words.len());
        self.words.push(word);
        self.raw.extend_from_slice(vector);
        self.unit.extend(vector.iter().map(|&x| (f64::from(x) / norm) as f32));
        Ok(())
    }

    fn finish(&mut self) {
        let mut order: Vec<usize> = (0..self.words.len()).collect();
        order.sort_by(|&a, &b| self.words[a].cmp(&self.words[b]));
        self.rank = vec![0; self.words.len()];
        for (r, i) in order.into_iter().enumerate() {
            self.rank[i] = r as u32;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: usize) -> &str {
        &self.words[idx]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| &self.raw[i * self.dim..(i + 1) * self.dim])
    }

    fn unit_row(&self, idx: usize) -> &[f32] {
        &self.unit[idx * self.dim..(idx + 1) * self.dim]
    }

    /// Cosine similarity between two stored words.
    pub fn similarity(&self, a: usize, b: usize) -> f64 {
        f64::from(dot(self.unit_row(a), self.unit_row(b)))
    }

    /// The `n` words closest to `word` (excluding itself), best first.
    ///
    /// Ties in similarity are broken by lexicographic word order.
    pub fn nearest_words(&self, word: &str, n: usize) -> Result<Vec<(String, f64)>> {
        let idx = self
            .index_of(word)
            .ok_or_else(|| Error::MissingWord(word.to_string()))?;
        if n == 0 || n > self.len().saturating_sub(1) {
            return Err(Error::invalid(format!(
                "neighbour count {n} must be in 1..={}",
                self.len().saturating_sub(1)
            )));
        }
        Ok(self
            .nearest_indices(&[idx], n)
            .pop()
            .unwrap_or_default()
            .into_iter()
            .map(|(i, s)| (self.words[i].clone(), s))
            .collect())
    }

    /// Exact top-`k` neighbour lists for many query words at once.
    pub(crate) fn nearest_indices(&self, queries: &[usize], k: usize) -> Vec<Vec<(usize, f64)>> {
        let k = k.min(self.len().saturating_sub(1));
        queries
            .par_chunks(QUERY_BATCH)
            .flat_map_iter(|batch| {
                let mut tops: Vec<TopK> = batch.iter().map(|_| TopK::new(k)).collect();
                let mut block = vec![0f32; batch.len()];
                for t in 0..self.len() {
                    let row = self.unit_row(t);
                    for (qi, &q) in batch.iter().enumerate() {
                        block[qi] = dot(self.unit_row(q), row);
                    }
                    for (qi, &q) in batch.iter().enumerate() {
                        if q != t {
                            tops[qi].offer(block[qi], self.rank[t], t as u32);
                        }
                    }
                }
                tops.into_iter().map(TopK::into_sorted)
            })
            .collect()
    }

    /// Similarities of each query against an explicit target list, row-major
    /// (`queries.len() x targets.len()`).
    pub(crate) fn similarity_block(&self, queries: &[usize], targets: &[usize]) -> Vec<f32> {
        let width = targets.len();
        let mut out = vec![0f32; queries.len() * width];
        out.par_chunks_mut(width.max(1) * QUERY_BATCH)
            .zip(queries.par_chunks(QUERY_BATCH))
            .for_each(|(chunk, batch)| {
                for (ti, &t) in targets.iter().enumerate() {
                    let row = self.unit_row(t);
                    for (qi, &q) in batch.iter().enumerate() {
                        chunk[qi * width + ti] = dot(self.unit_row(q), row);
                    }
                }
            });
        out
    }

    /// Reads the plain-text format: optional `V D` header line, then
    /// `token x1 .. xD` per line.
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let reader = BufReader::new(file);
        let mut store: Option<EmbeddingStore> = None;
        let mut expected: Option<usize> = None;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            if lineno == 0 && rest.len() == 1 {
                if let (Ok(v), Ok(d)) = (word.parse::<usize>(), rest[0].parse::<usize>()) {
                    expected = Some(v);
                    store = Some(Self::new(d).map_err(|e| Error::parse(path, e.to_string()))?);
                    continue;
                }
            }
            let values: Vec<f32> = rest
                .iter()
                .map(|s| s.parse::<f32>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
            let store = match store.as_mut() {
                Some(s) => s,
                None => store.insert(Self::new(values.len()).map_err(|e| Error::parse(path, e.to_string()))?),
            };
            store
                .push(word.to_string(), &values)
                .map_err(|e| Error::parse(path, format!("line {}: {e}", lineno + 1)))?;
        }
        let mut store = store.ok_or_else(|| Error::parse(path, "no vectors"))?;
        if let Some(v) = expected {
            if v != store.len() {
                log::warn!("{}: header announces {v} words, found {}", path.display(), store.len());
            }
        }
        store.finish();
        Ok(store)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for (i, word) in self.words.iter().enumerate() {
            write!(w, "{word}").map_err(io)?;
            for x in &self.raw[i * self.dim..(i + 1) * self.dim] {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let mut acc = [0f32; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut tail = 0f32;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    sim: f32,
    rank: u32,
    idx: u32,
}

// Ordered so that the *worse* candidate compares greater; the heap top is the
// first to be evicted.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        other.sim.total_cmp(&self.sim).then(self.rank.cmp(&other.rank))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    fn offer(&mut self, sim: f32, rank: u32, idx: u32) {
        if self.k == 0 {
            return;
        }
        let c = Candidate { sim, rank, idx };
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut worst) = self.heap.peek_mut() {
            if c < *worst {
                *worst = c;
            }
        }
    }

    fn into_sorted(self) -> Vec<(usize, f64)> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .map(|c| (c.idx as usize, f64::from(c.sim)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EmbeddingStore {
        EmbeddingStore::from_pairs(
            2,
            vec![
                ("a", vec![1.0, 0.0]),
                ("b", vec![0.9, 0.1]),
                ("c", vec![0.0, 1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn nearest_single() {
        let s = toy();
        let nn = s.nearest_words("a", 1).unwrap();
        assert_eq!(nn[0].0, "b");
        assert!((nn[0].1 - 0.993_883_7).abs() < 1e-5);
    }

    #[test]
    fn nearest_full_ranking() {
        let s = toy();
        let nn = s.nearest_words("a", 2).unwrap();
        let words: Vec<_> = nn.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(words, ["b", "c"]);
        assert!(nn[0].1 >= nn[1].1);
    }

    #[test]
    fn nearest_errors() {
        let s = toy();
        assert!(matches!(s.nearest_words("zz", 1), Err(Error::MissingWord(_))));
        assert!(matches!(s.nearest_words("a", 3), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn ties_break_lexicographically() {
        let s = EmbeddingStore::from_pairs(
            2,
            vec![
                ("q", vec![1.0, 0.0]),
                ("zeta", vec![1.0, 1.0]),
                ("alpha", vec![1.0, 1.0]),
                ("mid", vec![1.0, 1.0]),
            ],
        )
        .unwrap();
        let nn = s.nearest_words("q", 3).unwrap();
        let words: Vec<_> = nn.iter().map(|(w, _)| w.as_str()).collect();
        assert_eq!(words, ["alpha", "mid", "zeta"]);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(matches!(
            EmbeddingStore::from_pairs(2, vec![("z", vec![0.0, 0.0])]),
            Err(Error::DegenerateVector(_))
        ));
        assert!(EmbeddingStore::from_pairs(2, vec![("z", vec![1.0])]).is_err());
        assert!(EmbeddingStore::from_pairs(1, vec![("z", vec![1.0]), ("z", vec![2.0])]).is_err());
    }

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.txt");
        let s = toy();
        s.write(&path).unwrap();
        let back = EmbeddingStore::read(&path).unwrap();
        assert_eq!(back.words(), s.words());
        assert_eq!(back.vector("b"), s.vector("b"));

        let headerless = dir.path().join("plain.txt");
        std::fs::write(&headerless, "x 1 2\ny 3 4\n").unwrap();
        let s2 = EmbeddingStore::read(&headerless).unwrap();
        assert_eq!(s2.dim(), 2);
        assert_eq!(s2.len(), 2);
    }

    #[test]
    fn block_matches_pairwise() {
        let s = toy();
        let block = s.similarity_block(&[0, 2], &[0, 1, 2]);
        for (qi, q) in [0usize, 2].iter().enumerate() {
            for t in 0..3 {
                assert_eq!(f64::from(block[qi * 3 + t]), s.similarity(*q, t));
            }
        }
    }
}
