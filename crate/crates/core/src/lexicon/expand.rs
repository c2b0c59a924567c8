use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EmbeddingStore, Lexicon, LexiconEntry, Provenance};
use crate::emotion::{EmotionVector, N_EMOTIONS};
use crate::error::{Error, Result};

/// Words sampled from the store to tighten the neighbour-rank bound used when
/// pruning candidates.
const PROBE_WORDS: usize = 2048;
/// Candidates whose bound is evaluated in one block.
const PRUNE_BLOCK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionParams {
    /// Neighbours mined per lexicon word to form the candidate pool.
    pub candidates: usize,
    /// Neighbour count used to decide emotion classes (EO-SD).
    pub n: usize,
    /// Neighbour count used to estimate intensities.
    pub m: usize,
    /// Threshold below which an SDI score is zeroed.
    pub alpha: f64,
    pub max_iterations: usize,
}

impl Default for ExpansionParams {
    fn default() -> Self {
        Self {
            candidates: 100,
            n: 12,
            m: 10,
            alpha: 1.2,
            max_iterations: 50,
        }
    }
}

impl ExpansionParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.candidates == 0 {
            return Err(Error::invalid("neighbour counts must be positive"));
        }
        if self.m > self.n {
            return Err(Error::invalid(format!("m ({}) must not exceed n ({})", self.m, self.n)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid("alpha must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Candidate words examined this iteration.
    pub candidates: usize,
    /// Candidates that needed a full neighbour scan.
    pub scanned: usize,
    pub added: usize,
    pub lexicon_size: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLog {
    pub iterations: Vec<IterationRecord>,
    /// Lexicon words absent from the embedding store.
    pub skipped_seeds: Vec<String>,
    /// False when `max_iterations` was reached while words were still being added.
    pub converged: bool,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (mut ab, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        ab += x * y;
        aa += x * x;
        bb += y * y;
    }
    if aa == 0.0 || bb == 0.0 {
        return Err(Error::DegenerateVector(None));
    }
    Ok((ab / (aa.sqrt() * bb.sqrt())).clamp(-1.0, 1.0))
}

/// Lexicon intensities addressed by embedding-store row.
struct LexiconView {
    rows: Vec<Option<EmotionVector>>,
}

impl LexiconView {
    fn new(store: &EmbeddingStore, lexicon: &Lexicon) -> Self {
        let mut rows = vec![None; store.len()];
        for e in lexicon {
            if let Some(i) = store.index_of(&e.word) {
                rows[i] = Some(e.emotions);
            }
        }
        Self { rows }
    }

    fn get(&self, idx: usize) -> Option<&EmotionVector> {
        self.rows[idx].as_ref()
    }
}

/// SDI scores from a best-first neighbour list (only the first `n` are used).
fn sdi_scores(neighbours: &[(usize, f64)], view: &LexiconView, params: &ExpansionParams) -> EmotionVector {
    let mut sdi = EmotionVector::ZERO;
    for &(idx, sd) in neighbours.iter().take(params.n) {
        if let Some(iv) = view.get(idx) {
            for k in 0..N_EMOTIONS {
                sdi[k] += sd * iv[k];
            }
        }
    }
    for k in 0..N_EMOTIONS {
        if sdi[k] < params.alpha {
            sdi[k] = 0.0;
        }
    }
    sdi
}

/// Intensities for the classes retained in `sdi`, from the first `m` neighbours.
fn intensities_from(
    neighbours: &[(usize, f64)],
    view: &LexiconView,
    sdi: &EmotionVector,
    params: &ExpansionParams,
) -> EmotionVector {
    let mut out = EmotionVector::ZERO;
    for k in 0..N_EMOTIONS {
        if sdi[k] <= 0.0 {
            continue;
        }
        let (mut sum, mut count) = (0.0, 0usize);
        for &(idx, _) in neighbours.iter().take(params.m) {
            if let Some(iv) = view.get(idx) {
                if iv[k] > 0.0 {
                    sum += iv[k];
                    count += 1;
                }
            }
        }
        if count > 0 {
            out[k] = sum / count as f64;
        }
    }
    out
}

fn neighbours_of(store: &EmbeddingStore, word: &str, n: usize) -> Result<Vec<(usize, f64)>> {
    let idx = store
        .index_of(word)
        .ok_or_else(|| Error::MissingWord(word.to_string()))?;
    Ok(store.nearest_indices(&[idx], n).pop().unwrap_or_default())
}

/// Thresholded EO-SD scores of `word` against `lexicon`.
pub fn eo_sd(store: &EmbeddingStore, lexicon: &Lexicon, word: &str, params: &ExpansionParams) -> Result<EmotionVector> {
    params.validate()?;
    if lexicon.is_empty() {
        return Err(Error::invalid("lexicon is empty"));
    }
    let neighbours = neighbours_of(store, word, params.n)?;
    Ok(sdi_scores(&neighbours, &LexiconView::new(store, lexicon), params))
}

/// Estimated word-level intensities of `word`; zero for every class EO-SD rejects.
pub fn estimate_intensities(
    store: &EmbeddingStore,
    lexicon: &Lexicon,
    word: &str,
    params: &ExpansionParams,
) -> Result<EmotionVector> {
    params.validate()?;
    if lexicon.is_empty() {
        return Err(Error::invalid("lexicon is empty"));
    }
    let neighbours = neighbours_of(store, word, params.n)?;
    let view = LexiconView::new(store, lexicon);
    let sdi = sdi_scores(&neighbours, &view, params);
    Ok(intensities_from(&neighbours, &view, &sdi, params))
}

/// Grows `basic` by iterated neighbour mining until an iteration adds nothing
/// or `max_iterations` is reached. Existing entries are never modified.
pub fn expand_lexicon(store: &EmbeddingStore, basic: &Lexicon, params: &ExpansionParams) -> Result<(Lexicon, ExpansionLog)> {
    expand_impl(store, basic, params, true)
}

pub(crate) fn expand_impl(
    store: &EmbeddingStore,
    basic: &Lexicon,
    params: &ExpansionParams,
    prune: bool,
) -> Result<(Lexicon, ExpansionLog)> {
    params.validate()?;
    if basic.is_empty() {
        return Err(Error::invalid("basic lexicon is empty"));
    }
    let mut lexicon = basic.clone();
    let mut view = LexiconView::new(store, &lexicon);
    let mut log = ExpansionLog::default();

    let mut members: Vec<usize> = Vec::new();
    for e in basic {
        match store.index_of(&e.word) {
            Some(i) => members.push(i),
            None => log.skipped_seeds.push(e.word.clone()),
        }
    }
    if !log.skipped_seeds.is_empty() {
        log::info!(
            "{} lexicon words are not in the embedding store and will not seed expansion",
            log.skipped_seeds.len()
        );
    }

    let probe: Vec<usize> = {
        let step = store.len().div_ceil(PROBE_WORDS).max(1);
        (0..store.len()).step_by(step).collect()
    };
    let mut pool: BTreeSet<usize> = BTreeSet::new();
    let mut scanned: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
    let mut seeds = members.clone();

    for iteration in 1..=params.max_iterations {
        for list in store.nearest_indices(&seeds, params.candidates) {
            pool.extend(list.into_iter().map(|(i, _)| i));
        }
        let candidates: Vec<usize> = pool.iter().copied().filter(|&i| view.get(i).is_none()).collect();
        let survivors = if prune {
            prune_candidates(store, &view, &members, &probe, &candidates, params)
        } else {
            candidates.clone()
        };

        let missing: Vec<usize> = survivors.iter().copied().filter(|i| !scanned.contains_key(i)).collect();
        for (i, list) in missing.iter().zip(store.nearest_indices(&missing, params.n)) {
            scanned.insert(*i, list);
        }

        let mut found: Vec<(usize, EmotionVector)> = survivors
            .par_iter()
            .filter_map(|&i| {
                let neighbours = &scanned[&i];
                let sdi = sdi_scores(neighbours, &view, params);
                let iv = intensities_from(neighbours, &view, &sdi, params);
                iv.any_positive().then_some((i, iv))
            })
            .collect();
        found.sort_by(|a, b| store.word(a.0).cmp(store.word(b.0)));

        for &(i, iv) in &found {
            lexicon.insert(LexiconEntry {
                word: store.word(i).to_string(),
                emotions: iv,
                provenance: Provenance::Mined(iteration as u32),
            })?;
            view.rows[i] = Some(iv);
            members.push(i);
            scanned.remove(&i);
        }
        log.iterations.push(IterationRecord {
            iteration,
            candidates: candidates.len(),
            scanned: survivors.len(),
            added: found.len(),
            lexicon_size: lexicon.len(),
        });
        log::debug!(
            "expansion iteration {iteration}: {} candidates, {} scanned, {} added",
            candidates.len(),
            survivors.len(),
            found.len()
        );
        if found.is_empty() {
            log.converged = true;
            break;
        }
        seeds = found.into_iter().map(|(i, _)| i).collect();
    }
    Ok((lexicon, log))
}

/// Drops candidates that provably cannot reach `alpha` in any class.
///
/// The `n`-th best similarity over lexicon + probe words is a lower bound on
/// the `n`-th best over the whole store, so only lexicon words at or above it
/// can be among the true neighbours. Summing the `n` largest positive
/// `sd * I_k` terms among those bounds every SDI from above.
fn prune_candidates(
    store: &EmbeddingStore,
    view: &LexiconView,
    members: &[usize],
    probe: &[usize],
    candidates: &[usize],
    params: &ExpansionParams,
) -> Vec<usize> {
    let targets: Vec<usize> = members
        .iter()
        .chain(probe)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let slack = 1e-9 * (1.0 + params.alpha);
    let mut keep = Vec::new();
    let mut sims_buf: Vec<f32> = Vec::with_capacity(targets.len());
    let mut terms: Vec<f64> = Vec::new();
    for block in candidates.chunks(PRUNE_BLOCK) {
        let sims = store.similarity_block(block, &targets);
        for (qi, &cand) in block.iter().enumerate() {
            let row = &sims[qi * targets.len()..(qi + 1) * targets.len()];
            sims_buf.clear();
            sims_buf.extend(targets.iter().zip(row).filter(|(t, _)| **t != cand).map(|(_, s)| *s));
            let tau = if sims_buf.len() >= params.n {
                let nth = params.n - 1;
                *sims_buf.select_nth_unstable_by(nth, |a, b| b.total_cmp(a)).1
            } else {
                f32::NEG_INFINITY
            };
            let passes = (0..N_EMOTIONS).any(|k| {
                terms.clear();
                for (t, s) in targets.iter().zip(row) {
                    if *t == cand || *s < tau {
                        continue;
                    }
                    if let Some(iv) = view.get(*t) {
                        let term = f64::from(*s) * iv[k];
                        if term > 0.0 {
                            terms.push(term);
                        }
                    }
                }
                if terms.len() > params.n {
                    terms.select_nth_unstable_by(params.n - 1, |a, b| b.total_cmp(a));
                    terms.truncate(params.n);
                }
                terms.iter().sum::<f64>() >= params.alpha - slack
            });
            if passes {
                keep.push(cand);
            }
        }
    }
    keep
}

pub fn mean_absolute_error(truth: &[EmotionVector], predicted: &[EmotionVector]) -> Result<f64> {
    if truth.len() != predicted.len() || truth.is_empty() {
        return Err(Error::invalid("MAE needs two equal-length, non-empty lists"));
    }
    let total: f64 = truth.iter().zip(predicted).map(|(a, b)| a.abs_diff_sum(b)).sum();
    Ok(total / (N_EMOTIONS as f64 * truth.len() as f64))
}

/// Default hold-out size: 1000 words or 10% of the lexicon, whichever is smaller.
pub fn default_holdout_size(lexicon_len: usize) -> usize {
    (lexicon_len / 10).min(1000)
}

/// Hold-out MAE: hides a seeded random share of the lexicon, predicts the
/// hidden words from the rest, and compares with their annotations.
pub fn validate_holdout(
    store: &EmbeddingStore,
    lexicon: &Lexicon,
    holdout_fraction: f64,
    seed: u64,
    params: &ExpansionParams,
) -> Result<f64> {
    params.validate()?;
    if !(0.0..1.0).contains(&holdout_fraction) {
        return Err(Error::invalid("holdout fraction must be in [0, 1)"));
    }
    let mut usable: Vec<(usize, EmotionVector)> = lexicon
        .iter()
        .filter_map(|e| store.index_of(&e.word).map(|i| (i, e.emotions)))
        .collect();
    let s = (holdout_fraction * usable.len() as f64).round() as usize;
    if s == 0 || s >= usable.len() {
        return Err(Error::invalid(format!(
            "holdout of {s} words out of {} is unusable",
            usable.len()
        )));
    }
    usable.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (held, train) = usable.split_at(s);

    let mut view = LexiconView {
        rows: vec![None; store.len()],
    };
    for &(i, iv) in train {
        view.rows[i] = Some(iv);
    }
    let queries: Vec<usize> = held.iter().map(|(i, _)| *i).collect();
    let predicted: Vec<EmotionVector> = store
        .nearest_indices(&queries, params.n)
        .iter()
        .map(|nb| {
            let sdi = sdi_scores(nb, &view, params);
            intensities_from(nb, &view, &sdi, params)
        })
        .collect();
    let truth: Vec<EmotionVector> = held.iter().map(|(_, iv)| *iv).collect();
    mean_absolute_error(&truth, &predicted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emotion::Emotion;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((c - 0.70711).abs() < 1e-5);
        assert!(matches!(cosine_similarity(&[1.0], &[1.0, 2.0]), Err(Error::InvalidInput(_))));
        assert!(matches!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), Err(Error::DegenerateVector(_))));
    }

    fn joy(v: f64) -> EmotionVector {
        EmotionVector::single(Emotion::Joy, v)
    }

    /// Query `w` at (1,0); lexicon words with known similarity to it.
    fn store_with_sims(sims: &[(&str, f64)]) -> EmbeddingStore {
        let mut pairs = vec![("w".to_string(), vec![1.0f32, 0.0])];
        for (word, s) in sims {
            let s = *s;
            pairs.push((word.to_string(), vec![s as f32, (1.0 - s * s).sqrt() as f32]));
        }
        EmbeddingStore::from_pairs(2, pairs).unwrap()
    }

    #[test]
    fn sdi_weighted_sum_retained_above_alpha() {
        let store = store_with_sims(&[("p", 0.9), ("q", 0.8)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.5)).unwrap();
        lex.insert_basic("q", joy(1.0)).unwrap();
        let params = ExpansionParams { n: 2, m: 2, ..Default::default() };
        let sdi = eo_sd(&store, &lex, "w", &params).unwrap();
        assert!((sdi[Emotion::Joy] - 1.25).abs() < 1e-6);
        assert_eq!(sdi[Emotion::Anger], 0.0);
    }

    #[test]
    fn sdi_below_alpha_is_zeroed() {
        // 0.9*0.5 + 0.8*0.925 = 1.19
        let store = store_with_sims(&[("p", 0.9), ("q", 0.8)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.5)).unwrap();
        lex.insert_basic("q", joy(0.925)).unwrap();
        let params = ExpansionParams { n: 2, m: 2, ..Default::default() };
        let sdi = eo_sd(&store, &lex, "w", &params).unwrap();
        assert_eq!(sdi[Emotion::Joy], 0.0);
        let unthresholded = ExpansionParams { alpha: 0.0, ..params };
        let raw = eo_sd(&store, &lex, "w", &unthresholded).unwrap();
        assert!((raw[Emotion::Joy] - 1.19).abs() < 1e-6);
    }

    #[test]
    fn zero_intensities_give_zero_sdi() {
        let store = store_with_sims(&[("p", 0.9), ("q", 0.8)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", EmotionVector::ZERO).unwrap();
        lex.insert_basic("q", EmotionVector::ZERO).unwrap();
        let params = ExpansionParams { n: 2, m: 2, alpha: 0.0, ..Default::default() };
        assert!(eo_sd(&store, &lex, "w", &params).unwrap().is_zero());
    }

    #[test]
    fn intensity_is_mean_over_positive_neighbours() {
        let store = store_with_sims(&[("p", 0.99), ("q", 0.98), ("r", 0.97)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.4)).unwrap();
        lex.insert_basic("q", EmotionVector::single(Emotion::Love, 0.3)).unwrap();
        lex.insert_basic("r", joy(0.8)).unwrap();
        let params = ExpansionParams { n: 3, m: 3, alpha: 0.1, ..Default::default() };
        let iv = estimate_intensities(&store, &lex, "w", &params).unwrap();
        assert!((iv[Emotion::Joy] - 0.6).abs() < 1e-12);
        assert!((iv[Emotion::Love] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn intensity_singleton_and_empty_set() {
        let store = store_with_sims(&[("p", 0.99), ("q", 0.5)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.7)).unwrap();
        lex.insert_basic("q", EmotionVector::single(Emotion::Love, 0.9)).unwrap();
        // n = 2 sees both for classification, m = 1 sees only `p`
        let params = ExpansionParams { n: 2, m: 1, alpha: 0.1, ..Default::default() };
        let iv = estimate_intensities(&store, &lex, "w", &params).unwrap();
        assert_eq!(iv[Emotion::Joy], 0.7);
        assert_eq!(iv[Emotion::Love], 0.0);
    }

    #[test]
    fn missing_word_and_empty_lexicon() {
        let store = store_with_sims(&[("p", 0.9)]);
        let mut lex = Lexicon::new();
        let params = ExpansionParams { n: 1, m: 1, ..Default::default() };
        assert!(matches!(eo_sd(&store, &lex, "w", &params), Err(Error::InvalidInput(_))));
        lex.insert_basic("p", joy(1.0)).unwrap();
        assert!(matches!(eo_sd(&store, &lex, "nope", &params), Err(Error::MissingWord(_))));
    }

    #[test]
    fn saturated_input_is_returned_unchanged() {
        let store = store_with_sims(&[("p", 0.9), ("q", 0.1)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.2)).unwrap();
        let params = ExpansionParams { candidates: 2, n: 2, m: 2, ..Default::default() };
        let (out, log) = expand_lexicon(&store, &lex, &params).unwrap();
        assert_eq!(out, lex);
        assert_eq!(log.iterations.len(), 1);
        assert!(log.converged);
    }

    #[test]
    fn empty_basic_lexicon_is_rejected() {
        let store = store_with_sims(&[("p", 0.9)]);
        assert!(matches!(
            expand_lexicon(&store, &Lexicon::new(), &ExpansionParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn absent_seed_words_are_kept_and_logged() {
        let store = store_with_sims(&[("p", 0.9), ("q", 0.8)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("ghost", joy(0.9)).unwrap();
        lex.insert_basic("p", joy(0.9)).unwrap();
        let params = ExpansionParams { candidates: 2, n: 2, m: 2, ..Default::default() };
        let (out, log) = expand_lexicon(&store, &lex, &params).unwrap();
        assert!(out.contains("ghost"));
        assert_eq!(log.skipped_seeds, vec!["ghost".to_string()]);
    }

    /// Convex-combination neighbours of several seeds recover the mean of the
    /// seeds' positive intensities exactly.
    #[test]
    fn planted_cluster_recovered_exactly() {
        let dim = 8;
        let mut pairs: Vec<(String, Vec<f32>)> = Vec::new();
        let axis = |j: usize| {
            let mut v = vec![0f32; dim];
            v[j] = 1.0;
            v
        };
        // three seeds around axis 0, a candidate at their centroid, fillers on other axes
        let seeds = [[1.0, 0.05, 0.0], [1.0, 0.0, 0.05], [1.0, -0.05, -0.05]];
        for (i, s) in seeds.iter().enumerate() {
            let mut v = vec![0f32; dim];
            v[0] = s[0];
            v[1] = s[1];
            v[2] = s[2];
            pairs.push((format!("seed{i}"), v));
        }
        let mut centroid = vec![0f32; dim];
        for s in &seeds {
            for j in 0..3 {
                centroid[j] += s[j] / 3.0;
            }
        }
        pairs.push(("cand".into(), centroid));
        for j in 3..dim {
            pairs.push((format!("filler{j}"), axis(j)));
        }
        let store = EmbeddingStore::from_pairs(dim, pairs).unwrap();
        let mut lex = Lexicon::new();
        let intens = [0.6, 0.9, 0.3];
        for (i, v) in intens.iter().enumerate() {
            let mut e = EmotionVector::single(Emotion::Anxiety, *v);
            e[Emotion::Sadness] = if i == 0 { 0.5 } else { 0.0 };
            lex.insert_basic(format!("seed{i}"), e).unwrap();
        }
        let params = ExpansionParams { candidates: 4, n: 3, m: 3, alpha: 0.4, max_iterations: 5 };
        let (out, _) = expand_lexicon(&store, &lex, &params).unwrap();
        let got = out.get("cand").unwrap();
        assert_eq!(got.provenance, Provenance::Mined(1));
        assert_eq!(got.emotions[Emotion::Anxiety], (0.6 + 0.9 + 0.3) / 3.0);
        // sadness SDI ~ 0.5 * 0.99 passes alpha = 0.4; mean over the single positive seed
        assert_eq!(got.emotions[Emotion::Sadness], 0.5);
        assert!(out.iter().all(|e| !e.word.starts_with("filler")));
    }

    #[test]
    fn mae_examples() {
        let t = vec![joy(0.5), EmotionVector::single(Emotion::Love, 0.2)];
        assert_eq!(mean_absolute_error(&t, &t).unwrap(), 0.0);
        let one = vec![joy(0.5)];
        let off = vec![joy(0.6)];
        assert!((mean_absolute_error(&one, &off).unwrap() - 0.0125).abs() < 1e-12);
        assert!(mean_absolute_error(&[], &[]).is_err());
    }

    #[test]
    fn holdout_rejects_empty_split() {
        let store = store_with_sims(&[("p", 0.9), ("q", 0.8)]);
        let mut lex = Lexicon::new();
        lex.insert_basic("p", joy(0.9)).unwrap();
        lex.insert_basic("q", joy(0.9)).unwrap();
        let params = ExpansionParams { n: 2, m: 2, ..Default::default() };
        assert!(validate_holdout(&store, &lex, 0.1, 1, &params).is_err());
        assert_eq!(default_holdout_size(50_000), 1000);
        assert_eq!(default_holdout_size(5_000), 500);
    }

    fn random_store(seed: u64, words: usize, dim: usize) -> (EmbeddingStore, Lexicon) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centres: Vec<Vec<f32>> = (0..4)
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect())
            .collect();
        let mut pairs = Vec::new();
        let mut lex = Lexicon::new();
        for w in 0..words {
            let c = &centres[w % 4];
            let v: Vec<f32> = c.iter().map(|x| x + rng.random_range(-0.4f32..0.4)).collect();
            let word = format!("w{w:03}");
            if rng.random_bool(0.35) {
                let mut e = EmotionVector::ZERO;
                e[w % 8] = rng.random_range(0.2..1.0);
                e[(w / 4) % 8] = rng.random_range(0.0..0.5);
                lex.insert_basic(word.clone(), e).unwrap();
            }
            pairs.push((word, v));
        }
        if lex.is_empty() {
            lex.insert_basic("w000", EmotionVector::single(Emotion::Joy, 0.5)).unwrap();
        }
        (EmbeddingStore::from_pairs(dim, pairs).unwrap(), lex)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pruning_matches_exhaustive(seed in 0u64..10_000, alpha in 0.3f64..2.0) {
            let (store, lex) = random_store(seed, 120, 6);
            let params = ExpansionParams { candidates: 15, n: 6, m: 4, alpha, max_iterations: 10 };
            let fast = expand_impl(&store, &lex, &params, true).unwrap();
            let slow = expand_impl(&store, &lex, &params, false).unwrap();
            prop_assert_eq!(&fast.0, &slow.0);
            prop_assert_eq!(fast.1.iterations.len(), slow.1.iterations.len());
        }

        #[test]
        fn growth_is_monotone_and_entries_fixed(seed in 0u64..10_000) {
            let (store, lex) = random_store(seed, 100, 5);
            let params = ExpansionParams { candidates: 10, n: 5, m: 4, alpha: 0.5, max_iterations: 8 };
            let (out, log) = expand_lexicon(&store, &lex, &params).unwrap();
            prop_assert!(log.iterations.len() <= 8);
            let sizes: Vec<usize> = log.iterations.iter().map(|r| r.lexicon_size).collect();
            prop_assert!(sizes.windows(2).all(|w| w[0] <= w[1]));
            for e in &lex {
                prop_assert_eq!(out.get(&e.word), Some(e));
            }
            for e in &out {
                prop_assert!(e.emotions.is_word_level());
            }
            let again = expand_lexicon(&store, &lex, &params).unwrap();
            prop_assert_eq!(again.0, out);
        }

        #[test]
        fn sdi_monotone_in_neighbour_intensity(base in 0.0f64..0.5, bump in 0.0f64..0.5) {
            let store = store_with_sims(&[("p", 0.9), ("q", 0.7)]);
            let params = ExpansionParams { n: 2, m: 2, alpha: 0.0, ..Default::default() };
            let mut low = Lexicon::new();
            low.insert_basic("p", joy(base)).unwrap();
            low.insert_basic("q", joy(0.3)).unwrap();
            let mut high = Lexicon::new();
            high.insert_basic("p", joy(base + bump)).unwrap();
            high.insert_basic("q", joy(0.3)).unwrap();
            let a = eo_sd(&store, &low, "w", &params).unwrap()[Emotion::Joy];
            let b = eo_sd(&store, &high, "w", &params).unwrap()[Emotion::Joy];
            prop_assert!(b >= a);
        }

        #[test]
        fn cosine_symmetric_and_self_one(a in proptest::collection::vec(-10.0f64..10.0, 4),
                                         b in proptest::collection::vec(-10.0f64..10.0, 4)) {
            prop_assume!(a.iter().any(|x| x.abs() > 1e-3) && b.iter().any(|x| x.abs() > 1e-3));
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
