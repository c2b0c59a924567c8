use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};
use crate::table::Table;

const FOLD_BURN_IN: usize = 20;
const FOLD_SAMPLES: usize = 30;
const VALIDATION_SHARE: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaConfig {
    pub k: usize,
    /// Gibbs sweeps; the final state is the posterior sample.
    pub iterations: usize,
    pub seed: u64,
    /// Symmetric document-topic prior; `None` means 50/K.
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl LdaConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            iterations: 800,
            seed,
            alpha: None,
            beta: 0.01,
        }
    }

    fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModel {
    k: usize,
    vocabulary: Vec<String>,
    index: std::collections::HashMap<String, u32>,
    /// K x V, row-major.
    phi: Vec<f64>,
    alpha: f64,
    beta: f64,
    seed: u64,
    assignments: Vec<Vec<u32>>,
    doc_topic_counts: Vec<Vec<u32>>,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    k: usize,
    alpha: f64,
    beta: f64,
    seed: u64,
    vocab_size: usize,
}

impl TopicModel {
    fn from_phi(k: usize, vocabulary: Vec<String>, phi: Vec<f64>, alpha: f64, beta: f64, seed: u64) -> Self {
        let index = vocabulary.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Self {
            k,
            vocabulary,
            index,
            phi,
            alpha,
            beta,
            seed,
            assignments: Vec::new(),
            doc_topic_counts: Vec::new(),
        }
    }

    /// Every topic puts equal mass on every word.
    pub fn uniform(k: usize, vocabulary: Vec<String>) -> Result<Self> {
        if k == 0 || vocabulary.is_empty() {
            return Err(Error::invalid("uniform model needs K >= 1 and a non-empty vocabulary"));
        }
        let v = vocabulary.len();
        let phi = vec![1.0 / v as f64; k * v];
        Ok(Self::from_phi(k, vocabulary, phi, 50.0 / k as f64, 0.01, 0))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn phi_row(&self, topic: usize) -> &[f64] {
        let v = self.vocabulary.len();
        &self.phi[topic * v..(topic + 1) * v]
    }

    fn phi_at(&self, topic: usize, word: u32) -> f64 {
        self.phi[topic * self.vocabulary.len() + word as usize]
    }

    /// Topic of every training token in the final Gibbs state. Empty for
    /// loaded or uniform models.
    pub fn assignments(&self) -> &[Vec<u32>] {
        &self.assignments
    }

    /// Smoothed topic proportions of the training documents.
    pub fn training_doc_topics(&self) -> Vec<Vec<f64>> {
        let ka = self.k as f64 * self.alpha;
        self.doc_topic_counts
            .iter()
            .map(|row| {
                let n: u32 = row.iter().sum();
                row.iter().map(|&c| (c as f64 + self.alpha) / (n as f64 + ka)).collect()
            })
            .collect()
    }

    /// Most probable words of a topic, highest first.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(&str, f64)> {
        let row = self.phi_row(topic);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.into_iter().take(n).map(|i| (self.vocabulary[i].as_str(), row[i])).collect()
    }

    fn map_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().filter_map(|t| self.index.get(t.as_ref()).copied()).collect()
    }

    /// Topic proportions for many documents; document `i` uses its own
    /// stream of `seed`.
    pub fn infer_all<S: AsRef<str> + Sync>(&self, docs: &[Vec<S>], seed: u64) -> Vec<Vec<f64>> {
        docs.par_iter()
            .enumerate()
            .map(|(i, d)| self.fold_in(&self.map_tokens(d), &mut stream_rng(seed, i as u64)))
            .collect()
    }

    /// Fold-in Gibbs with phi held fixed; returns the posterior mean theta.
    fn fold_in(&self, words: &[u32], rng: &mut ChaCha8Rng) -> Vec<f64> {
        let k = self.k;
        let ka = k as f64 * self.alpha;
        if words.is_empty() || k == 1 {
            let n = words.len() as f64;
            let mut theta = vec![self.alpha / ka; k];
            if k == 1 {
                theta[0] = (n + self.alpha) / (n + ka);
            }
            return theta;
        }
        let mut counts = vec![0u32; k];
        let mut z: Vec<u32> = words
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k as u32);
                counts[t as usize] += 1;
                t
            })
            .collect();
        let mut acc = vec![0.0f64; k];
        let mut p = vec![0.0f64; k];
        for sweep in 0..FOLD_BURN_IN + FOLD_SAMPLES {
            for (i, &w) in words.iter().enumerate() {
                counts[z[i] as usize] -= 1;
                let mut total = 0.0;
                for (t, pt) in p.iter_mut().enumerate() {
                    total += (counts[t] as f64 + self.alpha) * self.phi_at(t, w);
                    *pt = total;
                }
                let t = sample_cumulative(&p, total, rng);
                z[i] = t as u32;
                counts[t] += 1;
            }
            if sweep >= FOLD_BURN_IN {
                for (a, &c) in acc.iter_mut().zip(&counts) {
                    *a += c as f64;
                }
            }
        }
        let n = words.len() as f64;
        let mut theta: Vec<f64> =
            acc.iter().map(|&a| (a / FOLD_SAMPLES as f64 + self.alpha) / (n + ka)).collect();
        let s: f64 = theta.iter().sum();
        theta.iter_mut().for_each(|t| *t /= s);
        theta
    }

    /// Writes `model.json` and `phi.tsv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = ModelMeta {
            k: self.k,
            alpha: self.alpha,
            beta: self.beta,
            seed: self.seed,
            vocab_size: self.vocabulary.len(),
        };
        let meta_path = dir.join("model.json");
        fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&meta_path, e))?;
        let mut cols = vec!["word".to_string()];
        cols.extend((0..self.k).map(|t| format!("topic_{t}")));
        let mut table = Table::new(cols);
        for (w, word) in self.vocabulary.iter().enumerate() {
            let mut row = vec![word.clone()];
            row.extend((0..self.k).map(|t| format!("{}", self.phi_at(t, w as u32))));
            table.push(row)?;
        }
        table.write(&dir.join("phi.tsv"))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("model.json");
        let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: ModelMeta = serde_json::from_str(&text).map_err(|e| Error::parse(&meta_path, e.to_string()))?;
        let phi_path = dir.join("phi.tsv");
        let table = Table::read(&phi_path)?;
        if table.len() != meta.vocab_size || table.columns().len() != meta.k + 1 {
            return Err(Error::parse(&phi_path, "shape does not match model.json"));
        }
        let vocabulary: Vec<String> = table.text_column("word")?.into_iter().map(String::from).collect();
        let v = vocabulary.len();
        let mut phi = vec![0.0; meta.k * v];
        for t in 0..meta.k {
            for (w, x) in table.numeric_column(&format!("topic_{t}"))?.into_iter().enumerate() {
                if !(x >= 0.0) {
                    return Err(Error::parse(&phi_path, format!("invalid probability for `{}`", vocabulary[w])));
                }
                phi[t * v + w] = x;
            }
        }
        Ok(Self::from_phi(meta.k, vocabulary, phi, meta.alpha, meta.beta, meta.seed))
    }
}

fn sample_cumulative(cum: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * total;
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

/// Collapsed Gibbs sampling. phi is the smoothed topic-word counts of the
/// final sweep.
pub fn fit_lda(corpus: &Corpus, config: &LdaConfig) -> Result<TopicModel> {
    let k = config.k;
    if k == 0 || config.iterations == 0 {
        return Err(Error::invalid("K and iterations must be at least 1"));
    }
    let alpha = config.alpha();
    if !(alpha > 0.0) || !(config.beta > 0.0) {
        return Err(Error::invalid("priors must be positive"));
    }
    let tokens = corpus.token_count();
    if k > tokens {
        return Err(Error::invalid(format!("K = {k} exceeds the corpus token count {tokens}")));
    }
    let v = corpus.vocab_size();
    let beta = config.beta;
    let vbeta = v as f64 * beta;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // word-major topic counts for locality in the inner loop
    let mut n_wk = vec![0u32; v * k];
    let mut n_k = vec![0u32; k];
    let mut n_dk: Vec<Vec<u32>> = vec![vec![0; k]; corpus.len()];
    let mut z: Vec<Vec<u32>> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let t = rng.random_range(0..k as u32);
                    n_wk[w as usize * k + t as usize] += 1;
                    n_k[t as usize] += 1;
                    n_dk[d][t as usize] += 1;
                    t
                })
                .collect()
        })
        .collect();

    if k > 1 {
        let mut inv_denom: Vec<f64> = n_k.iter().map(|&c| 1.0 / (c as f64 + vbeta)).collect();
        let mut p = vec![0.0f64; k];
        for _ in 0..config.iterations {
            for (d, doc) in corpus.documents.iter().enumerate() {
                let nd = &mut n_dk[d];
                let zd = &mut z[d];
                for (i, &w) in doc.iter().enumerate() {
                    let old = zd[i] as usize;
                    let wk = &mut n_wk[w as usize * k..(w as usize + 1) * k];
                    wk[old] -= 1;
                    nd[old] -= 1;
                    n_k[old] -= 1;
                    inv_denom[old] = 1.0 / (n_k[old] as f64 + vbeta);
                    let mut total = 0.0;
                    for t in 0..k {
                        total += (nd[t] as f64 + alpha) * (wk[t] as f64 + beta) * inv_denom[t];
                        p[t] = total;
                    }
                    let new = sample_cumulative(&p, total, &mut rng);
                    zd[i] = new as u32;
                    wk[new] += 1;
                    nd[new] += 1;
                    n_k[new] += 1;
                    inv_denom[new] = 1.0 / (n_k[new] as f64 + vbeta);
                }
            }
        }
    }

    let mut phi = vec![0.0; k * v];
    for t in 0..k {
        let denom = n_k[t] as f64 + vbeta;
        for w in 0..v {
            phi[t * v + w] = (n_wk[w * k + t] as f64 + beta) / denom;
        }
    }
    let mut model = TopicModel::from_phi(k, corpus.vocabulary().to_vec(), phi, alpha, beta, config.seed);
    model.assignments = z;
    model.doc_topic_counts = n_dk;
    Ok(model)
}

/// Fold-in topic proportions of one tokenized document.
pub fn doc_topics<S: AsRef<str>>(model: &TopicModel, tokens: &[S], seed: u64) -> Vec<f64> {
    model.fold_in(&model.map_tokens(tokens), &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Document-completion perplexity: theta is inferred from the even-position
/// tokens of each document and the odd-position tokens are scored.
pub fn perplexity(model: &TopicModel, heldout: &Corpus, seed: u64) -> Result<f64> {
    let remap: Vec<Option<u32>> = heldout.vocabulary().iter().map(|w| model.index.get(w).copied()).collect();
    let docs: Vec<Vec<u32>> = heldout
        .documents
        .iter()
        .map(|d| d.iter().filter_map(|&w| remap[w as usize]).collect())
        .collect();
    let per_doc: Vec<(f64, usize)> = docs
        .par_iter()
        .enumerate()
        .filter(|(_, d)| d.len() >= 2)
        .map(|(i, d)| {
            let observed: Vec<u32> = d.iter().step_by(2).copied().collect();
            let theta = model.fold_in(&observed, &mut stream_rng(seed, i as u64));
            let mut ll = crate::numeric::KahanSum::new();
            let mut n = 0;
            for &w in d.iter().skip(1).step_by(2) {
                let p: f64 = (0..model.k).map(|t| theta[t] * model.phi_at(t, w)).sum();
                ll.add(p.ln());
                n += 1;
            }
            (ll.value(), n)
        })
        .collect();
    let words: usize = per_doc.iter().map(|x| x.1).sum();
    if words == 0 {
        return Err(Error::invalid("held-out corpus has no document with two or more known tokens"));
    }
    let ll = crate::numeric::compensated_sum(per_doc.iter().map(|x| x.0));
    Ok((-ll / words as f64).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub best_k: usize,
    /// (K, validation perplexity) in candidate order.
    pub curve: Vec<(usize, f64)>,
}

/// Fits each candidate K on a training split and keeps the one with the
/// lowest validation perplexity; ties go to the smaller K.
pub fn select_k(corpus: &Corpus, candidates: &[usize], base: &LdaConfig) -> Result<SelectionResult> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate topic counts"));
    }
    let mut order: Vec<usize> = (0..corpus.len()).filter(|&i| !corpus.documents[i].is_empty()).collect();
    if order.len() < 2 {
        return Err(Error::invalid("need at least two non-empty documents to split"));
    }
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(base.seed));
    let n_val = ((order.len() as f64 * VALIDATION_SHARE).ceil() as usize).clamp(1, order.len() - 1);
    let (val, train) = order.split_at(n_val);
    let (mut val, mut train) = (val.to_vec(), train.to_vec());
    val.sort_unstable();
    train.sort_unstable();
    let train = corpus.subset(&train);
    let val = corpus.subset(&val);
    let curve: Vec<(usize, f64)> = candidates
        .par_iter()
        .map(|&k| {
            let cfg = LdaConfig {
                k,
                seed: derive_seed(base.seed, k as u64),
                alpha: None,
                ..base.clone()
            };
            let model = fit_lda(&train, &cfg)?;
            Ok((k, perplexity(&model, &val, cfg.seed)?))
        })
        .collect::<Result<_>>()?;
    let best_k = curve
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|c| c.0)
        .expect("non-empty");
    Ok(SelectionResult { best_k, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Poisson};

    /// Documents each drawn from one topic, topics over disjoint word blocks.
    fn planted(k: usize, words_per_topic: usize, docs: usize, len: usize, seed: u64) -> (Vec<Vec<String>>, Vec<Vec<usize>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        let mut truth = Vec::new();
        for d in 0..docs {
            // two topics per document, mostly one
            let main = d % k;
            let other = rng.random_range(0..k);
            let n = Poisson::new(len as f64).unwrap().sample(&mut rng) as usize + 2;
            let mut doc = Vec::new();
            let mut tz = Vec::new();
            for _ in 0..n {
                let t = if rng.random::<f64>() < 0.8 { main } else { other };
                let w = rng.random_range(0..words_per_topic);
                doc.push(format!("t{t}w{w}"));
                tz.push(t);
            }
            out.push(doc);
            truth.push(tz);
        }
        (out, truth)
    }

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(k - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    fn accuracy(model: &TopicModel, truth: &[Vec<usize>], k: usize) -> f64 {
        let mut confusion = vec![vec![0usize; k]; k];
        let mut total = 0;
        for (zd, td) in model.assignments().iter().zip(truth) {
            for (&z, &t) in zd.iter().zip(td) {
                confusion[z as usize][t] += 1;
                total += 1;
            }
        }
        let best = permutations(k)
            .iter()
            .map(|p| (0..k).map(|z| confusion[z][p[z]]).sum::<usize>())
            .max()
            .unwrap();
        best as f64 / total as f64
    }

    fn corpus(docs: &[Vec<String>]) -> Corpus {
        super::super::preprocess(docs, None, 0.0).unwrap()
    }

    #[test]
    fn single_topic_is_degenerate() {
        let (docs, _) = planted(3, 10, 20, 15, 1);
        let m = fit_lda(&corpus(&docs), &LdaConfig { iterations: 5, ..LdaConfig::new(1, 0) }).unwrap();
        assert!(m.training_doc_topics().iter().all(|t| t == &vec![1.0]));
        assert_eq!(doc_topics(&m, &docs[0], 3), vec![1.0]);
    }

    #[test]
    fn too_many_topics_is_rejected() {
        let c = corpus(&[vec!["a".to_string(), "b".to_string()]]);
        assert!(matches!(fit_lda(&c, &LdaConfig::new(3, 0)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn recovers_two_planted_topics() {
        let (docs, truth) = planted(2, 30, 200, 40, 7);
        let c = corpus(&docs);
        let cfg = LdaConfig { iterations: 200, ..LdaConfig::new(2, 11) };
        let m = fit_lda(&c, &cfg).unwrap();
        assert!(accuracy(&m, &truth, 2) >= 0.9);
        let again = fit_lda(&c, &cfg).unwrap();
        assert_eq!(m.phi, again.phi);
        assert_eq!(m.assignments, again.assignments);
        for t in 0..2 {
            let s: f64 = m.phi_row(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-8);
        }
        let counted: usize = m.doc_topic_counts.iter().flatten().map(|&c| c as usize).sum();
        assert_eq!(counted, c.token_count());
    }

    #[test]
    fn fold_in_identifies_single_topic_document() {
        let (docs, truth) = planted(2, 30, 200, 40, 8);
        let m = fit_lda(&corpus(&docs), &LdaConfig { iterations: 200, ..LdaConfig::new(2, 5) }).unwrap();
        // learned topic that carries most of planted topic 0
        let mut hits = [0usize; 2];
        for (zd, td) in m.assignments().iter().zip(&truth) {
            for (&z, &t) in zd.iter().zip(td) {
                if t == 0 {
                    hits[z as usize] += 1;
                }
            }
        }
        let topic = if hits[0] >= hits[1] { 0 } else { 1 };
        let doc: Vec<String> = (0..200).map(|i| format!("t0w{}", i % 30)).collect();
        let theta = doc_topics(&m, &doc, 9);
        assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        assert!(theta[topic] >= 0.8, "{theta:?}");
        assert_eq!(theta, doc_topics(&m, &doc, 9));
    }

    #[test]
    fn out_of_vocabulary_document_gets_prior_mean() {
        let m = TopicModel::uniform(4, vec!["a".into(), "b".into()]).unwrap();
        let theta = doc_topics(&m, &["zzz", "yyy"], 0);
        for t in theta {
            assert!((t - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        let vocab: Vec<String> = (0..57).map(|i| format!("w{i}")).collect();
        let m = TopicModel::uniform(3, vocab.clone()).unwrap();
        let docs: Vec<Vec<String>> = (0..20).map(|d| (0..9).map(|i| vocab[(d * 7 + i * 3) % 57].clone()).collect()).collect();
        let p = perplexity(&m, &corpus(&docs), 1).unwrap();
        assert!((p - 57.0).abs() / 57.0 < 1e-12, "{p}");
    }

    #[test]
    fn empty_heldout_is_rejected() {
        let m = TopicModel::uniform(2, vec!["a".into()]).unwrap();
        let c = Corpus::with_vocabulary(vec!["a".into()], &[vec!["a"]]);
        assert!(matches!(perplexity(&m, &c, 0), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn planted_k_beats_one_topic() {
        let (docs, _) = planted(3, 20, 150, 30, 3);
        let c = corpus(&docs);
        let p1 = perplexity(&fit_lda(&c, &LdaConfig { iterations: 100, ..LdaConfig::new(1, 1) }).unwrap(), &c, 2).unwrap();
        let p3 = perplexity(&fit_lda(&c, &LdaConfig { iterations: 100, ..LdaConfig::new(3, 1) }).unwrap(), &c, 2).unwrap();
        assert!(p3 < p1);
        assert!(p3 >= 1.0);
        let sel = select_k(&c, &[1, 3], &LdaConfig { iterations: 100, ..LdaConfig::new(1, 4) }).unwrap();
        assert_eq!(sel.best_k, 3);
        let single = select_k(&c, &[2], &LdaConfig { iterations: 20, ..LdaConfig::new(1, 4) }).unwrap();
        assert_eq!(single.best_k, 2);
        assert_eq!(single.curve.len(), 1);
    }

    #[test]
    fn save_and_load_round_trip() {
        let (docs, _) = planted(2, 10, 30, 10, 2);
        let m = fit_lda(&corpus(&docs), &LdaConfig { iterations: 10, ..LdaConfig::new(2, 1) }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = TopicModel::load(dir.path()).unwrap();
        assert_eq!(back.phi, m.phi);
        assert_eq!(back.vocabulary, m.vocabulary);
        assert_eq!(doc_topics(&back, &docs[0], 1), doc_topics(&m, &docs[0], 1));
    }
}
