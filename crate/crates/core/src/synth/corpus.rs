use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::emotion::{EmotionVector, N_EMOTIONS};
use crate::error::Result;
use crate::lexicon::Lexicon;
use crate::rng::{derive_seed, stream_rng};
use crate::scorer::{Document, ModifierDictionaries};

/// What the generator planted in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentTruth {
    pub id: String,
    /// Raw intensities, accumulated exactly as the scorer does.
    pub intensities: EmotionVector,
    pub topic_shares: Vec<f64>,
    /// Topic that generated each token (`None` for emotion words and modifiers).
    pub token_topics: Vec<Option<usize>>,
    /// Emotion favoured when drawing emotion words.
    pub dominant_emotion: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub articles: Vec<Document>,
    pub truth: Vec<DocumentTruth>,
    pub comments: Vec<Document>,
    pub comment_truth: Vec<DocumentTruth>,
    pub modifiers: ModifierDictionaries,
    pub topic_words: Vec<Vec<String>>,
}

pub fn publisher_id(p: usize) -> String {
    format!("p{p:04}")
}

pub fn article_id(i: usize) -> String {
    format!("a{i:06}")
}

pub fn topic_word(topic: usize, j: usize) -> String {
    format!("t{topic}_{j}")
}

struct Generator<'a> {
    config: &'a SynthConfig,
    lexicon: &'a Lexicon,
    by_emotion: Vec<Vec<&'a str>>,
    topic_words: &'a [Vec<String>],
    negations: Vec<&'a str>,
    degrees: Vec<(&'a str, f64)>,
}

struct Draft {
    tokens: Vec<String>,
    topics: Vec<Option<usize>>,
    truth: EmotionVector,
    /// Trailing tokens that are not modifiers.
    clean_tail: usize,
}

impl Generator<'_> {
    fn push_topic(&self, d: &mut Draft, shares: &[f64], rng: &mut impl Rng) {
        let mut u: f64 = rng.random();
        let mut t = shares.len() - 1;
        for (k, s) in shares.iter().enumerate() {
            if u < *s {
                t = k;
                break;
            }
            u -= s;
        }
        let words = &self.topic_words[t];
        d.tokens.push(words[rng.random_range(0..words.len())].clone());
        d.topics.push(Some(t));
        d.clean_tail += 1;
    }

    /// Appends an emotion word with its own modifiers, padding with topic
    /// words first so no earlier modifier falls inside its window.
    fn push_emotion(&self, d: &mut Draft, shares: &[f64], dominant: usize, dominant_share: f64, rng: &mut impl Rng) {
        let c = &self.config.corpus;
        let emotion = if rng.random::<f64>() < dominant_share || self.by_emotion[dominant].is_empty() {
            dominant
        } else {
            rng.random_range(0..N_EMOTIONS)
        };
        let pool = if self.by_emotion[emotion].is_empty() { &self.by_emotion[dominant] } else { &self.by_emotion[emotion] };
        if pool.is_empty() {
            return;
        }
        let word = pool[rng.random_range(0..pool.len())];

        let u: f64 = rng.random();
        let n_neg = if self.negations.is_empty() {
            0
        } else if u < c.double_negation_rate {
            2
        } else if u < c.double_negation_rate + c.negation_rate {
            1
        } else {
            0
        };
        let degree = (!self.degrees.is_empty() && rng.random::<f64>() < c.degree_rate)
            .then(|| self.degrees[rng.random_range(0..self.degrees.len())]);
        let own = n_neg + usize::from(degree.is_some());
        let need = c.window - own;
        while d.clean_tail < need.min(d.tokens.len()) {
            self.push_topic(d, shares, rng);
        }
        for _ in 0..n_neg {
            d.tokens.push(self.negations[rng.random_range(0..self.negations.len())].to_string());
            d.topics.push(None);
        }
        if let Some((w, _)) = degree {
            d.tokens.push(w.to_string());
            d.topics.push(None);
        }
        if own > 0 {
            d.clean_tail = 0;
        }
        d.tokens.push(word.to_string());
        d.topics.push(None);
        d.clean_tail += 1;

        // same arithmetic as the scorer
        let sign = if n_neg % 2 == 1 { -1.0 } else { 1.0 };
        let deg = match degree {
            Some((_, v)) => (0.0 + v) / 1.0,
            None => 1.0,
        };
        let weight = sign * deg;
        let iv = self.lexicon.intensities(word).expect("drawn from the lexicon");
        for k in 0..N_EMOTIONS {
            d.truth[k] += weight * iv[k];
        }
    }

    fn document(
        &self,
        length: usize,
        shares: &[f64],
        dominant: usize,
        emotion_rate: f64,
        dominant_share: f64,
        rng: &mut impl Rng,
    ) -> Draft {
        let mut d = Draft {
            tokens: Vec::with_capacity(length + 8),
            topics: Vec::with_capacity(length + 8),
            truth: EmotionVector::ZERO,
            clean_tail: 0,
        };
        while d.tokens.len() < length {
            if rng.random::<f64>() < emotion_rate {
                self.push_emotion(&mut d, shares, dominant, dominant_share, rng);
            } else {
                self.push_topic(&mut d, shares, rng);
            }
        }
        d
    }
}

fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn dirichlet(rng: &mut impl Rng, k: usize, alpha: f64) -> Vec<f64> {
    let g = Gamma::new(alpha, 1.0).expect("positive concentration");
    loop {
        let v: Vec<f64> = (0..k).map(|_| g.sample(rng)).collect();
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Generates articles (and comments on them) mixing topic words with emotion
/// words from `lexicon`, inserting negation and degree modifiers, and
/// records the scorer's exact output for each document.
pub fn gen_corpus(config: &SynthConfig, lexicon: &Lexicon) -> Result<SyntheticCorpus> {
    config.validate()?;
    let c = &config.corpus;
    let modifiers = ModifierDictionaries::new(
        c.negations.iter().cloned(),
        c.degrees.iter().map(|(w, v)| (w.clone(), *v)),
    )?;
    let mut by_emotion: Vec<Vec<&str>> = vec![Vec::new(); N_EMOTIONS];
    for e in lexicon {
        if modifiers.is_negation(&e.word) || modifiers.degree(&e.word).is_some() {
            continue;
        }
        let (k, v) = e.emotions.0.iter().enumerate().fold((0, 0.0), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
        if v > 0.0 {
            by_emotion[k].push(&e.word);
        }
    }
    let topic_words: Vec<Vec<String>> =
        (0..c.topics).map(|t| (0..c.words_per_topic).map(|j| topic_word(t, j)).collect()).collect();
    let gen = Generator {
        config,
        lexicon,
        by_emotion,
        topic_words: &topic_words,
        negations: c.negations.iter().map(String::as_str).collect(),
        degrees: c.degrees.iter().map(|(w, v)| (w.as_str(), *v)).collect(),
    };
    let with_emotions: Vec<usize> = (0..N_EMOTIONS).filter(|&k| !gen.by_emotion[k].is_empty()).collect();

    let n = c.publishers * c.articles_per_publisher;
    let seed = derive_seed(config.seed, 10);
    let generated: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let id = article_id(i);
            let publisher = publisher_id(i / c.articles_per_publisher);
            let shares = dirichlet(&mut rng, c.topics, c.topic_concentration);
            let dominant = if with_emotions.is_empty() { 0 } else { with_emotions[rng.random_range(0..with_emotions.len())] };
            let length = (poisson(&mut rng, c.doc_length) as usize).max(c.window + 2);
            let d = gen.document(length, &shares, dominant, c.emotion_rate, c.dominant_share, &mut rng);
            let chars: usize = d.tokens.iter().map(String::len).sum();
            let article = Document {
                id: id.clone(),
                publisher_id: publisher.clone(),
                article_id: None,
                n_images: poisson(&mut rng, c.images_mean) as u32,
                n_videos: u32::from(rng.random::<f64>() < c.video_rate),
                posted_weekend: rng.random::<f64>() < 2.0 / 7.0,
                n_comments: poisson(&mut rng, c.comments_mean) as u32,
                original: rng.random::<f64>() < c.original_rate,
                char_length: chars as u32,
                tokens: d.tokens,
            };
            let truth = DocumentTruth {
                id: id.clone(),
                intensities: d.truth,
                topic_shares: shares.clone(),
                token_topics: d.topics,
                dominant_emotion: dominant,
            };
            let mut comments = Vec::with_capacity(c.comments_per_article);
            for j in 0..c.comments_per_article {
                let len = (poisson(&mut rng, c.comment_length) as usize).max(c.window + 2);
                let d = gen.document(len, &shares, dominant, c.comment_emotion_rate, c.dominant_share, &mut rng);
                let cid = format!("{id}_c{j}");
                comments.push((
                    Document {
                        id: cid.clone(),
                        publisher_id: publisher.clone(),
                        article_id: Some(id.clone()),
                        char_length: d.tokens.iter().map(String::len).sum::<usize>() as u32,
                        tokens: d.tokens,
                        ..Default::default()
                    },
                    DocumentTruth {
                        id: cid,
                        intensities: d.truth,
                        topic_shares: shares.clone(),
                        token_topics: d.topics,
                        dominant_emotion: dominant,
                    },
                ));
            }
            (article, truth, comments)
        })
        .collect();

    let mut out = SyntheticCorpus {
        articles: Vec::with_capacity(n),
        truth: Vec::with_capacity(n),
        comments: Vec::new(),
        comment_truth: Vec::new(),
        modifiers,
        topic_words,
    };
    for (a, t, cs) in generated {
        out.articles.push(a);
        out.truth.push(t);
        for (d, t) in cs {
            out.comments.push(d);
            out.comment_truth.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::EmotionScorer;
    use crate::synth::gen_embeddings;

    fn setup(rate: f64) -> (SynthConfig, Lexicon) {
        let mut c = SynthConfig::default();
        c.embeddings.vocab_size = 1000;
        c.embeddings.clusters = 16;
        c.corpus.publishers = 10;
        c.corpus.articles_per_publisher = 20;
        c.corpus.emotion_rate = rate;
        let lex = gen_embeddings(&c).unwrap().truth;
        (c, lex)
    }

    #[test]
    fn scorer_reproduces_truth_exactly() {
        let (c, lex) = setup(0.2);
        let corpus = gen_corpus(&c, &lex).unwrap();
        let scorer = EmotionScorer::new(&lex, &corpus.modifiers, c.corpus.window);
        let mut negated = 0;
        for (d, t) in corpus.articles.iter().zip(&corpus.truth).chain(corpus.comments.iter().zip(&corpus.comment_truth)) {
            assert_eq!(scorer.score(d), t.intensities, "{}", d.id);
            negated += t.intensities.0.iter().filter(|v| **v < 0.0).count();
        }
        assert!(negated > 0);
        assert_eq!(corpus.comments.len(), 200 * c.corpus.comments_per_article);
    }

    #[test]
    fn zero_rate_gives_zero_truth() {
        let (c, lex) = setup(0.0);
        let corpus = gen_corpus(&c, &lex).unwrap();
        assert!(corpus.truth.iter().all(|t| t.intensities.is_zero()));
        assert!(corpus.articles.iter().all(|d| d.tokens.iter().all(|w| w.starts_with('t'))));
    }

    #[test]
    fn deterministic() {
        let (c, lex) = setup(0.1);
        let a = gen_corpus(&c, &lex).unwrap();
        let b = gen_corpus(&c, &lex).unwrap();
        assert_eq!(a.articles, b.articles);
        assert_eq!(a.truth, b.truth);
    }
}
