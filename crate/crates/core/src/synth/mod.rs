//! Synthetic embeddings, corpora, users and cascades with planted ground
//! truth, so every estimator in the crate can be checked by recovery.

mod cascades;
mod corpus;
mod embeddings;
mod panel;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use cascades::{
    gen_cascades, gen_population, gen_publishers, user_id, ArticleDraw, CascadeTruth, Publisher, SyntheticCascades,
    PUBLISHER_TYPES,
};
pub use corpus::{article_id, gen_corpus, publisher_id, topic_word, DocumentTruth, SyntheticCorpus};
pub use embeddings::{gen_embeddings, PlantedCluster, PlantedEmbeddings};
pub use panel::{mediation_panel, regression_panel, Panel, PanelConfig};

use crate::cascade::write_events;
use crate::emotion::{Emotion, EmotionVector, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::numeric::{mean, population_sd};
use crate::scorer::write_documents;
use crate::table::{num, Table};

/// Per-emotion coefficients keyed by emotion name; missing emotions are 0.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmotionCoefficients(pub BTreeMap<String, f64>);

impl EmotionCoefficients {
    pub fn from_pairs(pairs: &[(Emotion, f64)]) -> Self {
        Self(pairs.iter().map(|(e, v)| (e.name().to_string(), *v)).collect())
    }

    pub fn to_array(&self) -> Result<[f64; N_EMOTIONS]> {
        let mut out = [0.0; N_EMOTIONS];
        for (name, v) in &self.0 {
            let e: Emotion = name.parse()?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("coefficient for {name} is not finite")));
            }
            out[e.index()] = *v;
        }
        Ok(out)
    }

    pub fn get(&self, e: Emotion) -> f64 {
        self.0.get(e.name()).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub clusters: usize,
    pub cluster_size: usize,
    /// Share of each cluster placed in the basic lexicon.
    pub basic_share: f64,
    pub radius: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    /// Per-word uniform jitter around the cluster intensity.
    pub intensity_noise: f64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            vocab_size: 20_000,
            dim: 64,
            clusters: 160,
            cluster_size: 12,
            basic_share: 0.5,
            radius: 0.8,
            intensity_min: 0.4,
            intensity_max: 0.9,
            intensity_noise: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub publishers: usize,
    pub articles_per_publisher: usize,
    pub topics: usize,
    pub words_per_topic: usize,
    /// Dirichlet concentration of per-article topic shares.
    pub topic_concentration: f64,
    /// Mean article length in tokens (Poisson).
    pub doc_length: f64,
    /// Probability that a token slot holds an emotion word.
    pub emotion_rate: f64,
    /// Probability that an emotion word comes from the article's dominant emotion.
    pub dominant_share: f64,
    pub negation_rate: f64,
    pub double_negation_rate: f64,
    pub degree_rate: f64,
    pub window: usize,
    pub negations: Vec<String>,
    pub degrees: BTreeMap<String, f64>,
    pub comments_per_article: usize,
    pub comment_length: f64,
    pub comment_emotion_rate: f64,
    pub images_mean: f64,
    pub video_rate: f64,
    pub comments_mean: f64,
    pub original_rate: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            publishers: 300,
            articles_per_publisher: 20,
            topics: 5,
            words_per_topic: 60,
            topic_concentration: 0.3,
            doc_length: 120.0,
            emotion_rate: 0.05,
            dominant_share: 0.6,
            negation_rate: 0.1,
            double_negation_rate: 0.02,
            degree_rate: 0.15,
            window: crate::scorer::DEFAULT_WINDOW,
            negations: ["never", "no", "not", "without"].map(String::from).to_vec(),
            degrees: [("slightly", 0.5), ("rather", 1.5), ("very", 2.0), ("extremely", 3.0)]
                .into_iter()
                .map(|(w, v)| (w.to_string(), v))
                .collect(),
            comments_per_article: 2,
            comment_length: 30.0,
            comment_emotion_rate: 0.15,
            images_mean: 3.0,
            video_rate: 0.1,
            comments_mean: 20.0,
            original_rate: 0.6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    /// Baseline mean number of seed users beyond the first.
    pub seed_mean: f64,
    /// Baseline mean offspring per sharer.
    pub offspring_mean: f64,
    /// Effects of emotion z-scores on the log offspring mean.
    pub beta: EmotionCoefficients,
    /// Effects of topic shares on the log offspring mean.
    pub topic_effects: Vec<f64>,
    /// Effect of centred log follower count.
    pub follower_effect: f64,
    /// SD of the publisher random intercept.
    pub sigma_mu: f64,
    pub weak_prob: f64,
    /// Emotion effects on the log-odds of a weak tie.
    pub weak_tilt: EmotionCoefficients,
    /// Mean per-hop delay in hours (exponential).
    pub delay_mean: f64,
    pub node_cap: usize,
    /// Probability that two seed users are friends.
    pub seed_friend_prob: f64,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            seed_mean: 2.0,
            offspring_mean: 0.6,
            beta: EmotionCoefficients::from_pairs(&[
                (Emotion::Anxiety, 0.15),
                (Emotion::Love, 0.12),
                (Emotion::Sadness, -0.15),
            ]),
            topic_effects: vec![0.2, -0.1, 0.0, 0.1, 0.0],
            follower_effect: 0.1,
            sigma_mu: 0.3,
            weak_prob: 0.4,
            weak_tilt: EmotionCoefficients::from_pairs(&[(Emotion::Love, 0.2), (Emotion::Sadness, -0.2)]),
            delay_mean: 2.0,
            node_cap: 10_000,
            seed_friend_prob: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    pub population: usize,
    pub age_min: f64,
    pub age_shape: f64,
    pub age_scale: f64,
    pub female_prob: f64,
    pub friends_mean: f64,
    /// Emotion effects on the age of users who share an article.
    pub age_tilt: EmotionCoefficients,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            population: 50_000,
            age_min: 16.0,
            age_shape: 3.0,
            age_scale: 6.0,
            female_prob: 0.5,
            friends_mean: 120.0,
            age_tilt: EmotionCoefficients::from_pairs(&[(Emotion::Anxiety, 0.3), (Emotion::Sadness, -0.2)]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub embeddings: EmbeddingConfig,
    pub corpus: CorpusConfig,
    pub cascades: CascadeConfig,
    pub users: UserConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            embeddings: EmbeddingConfig::default(),
            corpus: CorpusConfig::default(),
            cascades: CascadeConfig::default(),
            users: UserConfig::default(),
        }
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be a probability, got {p}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be non-negative and finite, got {v}")))
    }
}

impl SynthConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: SynthConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("synth config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::parse(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.embeddings;
        if e.dim < 2 || e.clusters == 0 || e.cluster_size < 2 {
            return Err(Error::invalid("embeddings need dim >= 2, clusters >= 1 and cluster_size >= 2"));
        }
        if e.vocab_size < e.clusters * e.cluster_size {
            return Err(Error::invalid(format!(
                "vocabulary of {} cannot hold {} clusters of {}",
                e.vocab_size, e.clusters, e.cluster_size
            )));
        }
        non_negative("radius", e.radius)?;
        non_negative("intensity_noise", e.intensity_noise)?;
        if !(e.basic_share > 0.0 && e.basic_share < 1.0) {
            return Err(Error::invalid("basic_share must lie strictly between 0 and 1"));
        }
        if !(e.intensity_min > 0.0 && e.intensity_min <= e.intensity_max && e.intensity_max <= 1.0) {
            return Err(Error::invalid("need 0 < intensity_min <= intensity_max <= 1"));
        }

        let c = &self.corpus;
        if c.publishers == 0 || c.articles_per_publisher == 0 || c.topics == 0 || c.words_per_topic == 0 {
            return Err(Error::invalid("publishers, articles, topics and topic words must be positive"));
        }
        positive("topic_concentration", c.topic_concentration)?;
        positive("doc_length", c.doc_length)?;
        for (n, p) in [
            ("emotion_rate", c.emotion_rate),
            ("dominant_share", c.dominant_share),
            ("negation_rate", c.negation_rate),
            ("double_negation_rate", c.double_negation_rate),
            ("degree_rate", c.degree_rate),
            ("comment_emotion_rate", c.comment_emotion_rate),
            ("video_rate", c.video_rate),
            ("original_rate", c.original_rate),
            ("negation_rate + double_negation_rate", c.negation_rate + c.double_negation_rate),
        ] {
            probability(n, p)?;
        }
        if c.window < 3 {
            return Err(Error::invalid("window must be at least 3 to hold two negations and a degree word"));
        }
        non_negative("comment_length", c.comment_length)?;
        non_negative("images_mean", c.images_mean)?;
        non_negative("comments_mean", c.comments_mean)?;
        for (w, v) in &c.degrees {
            positive(&format!("degree value of {w}"), *v)?;
        }

        let k = &self.cascades;
        non_negative("seed_mean", k.seed_mean)?;
        non_negative("offspring_mean", k.offspring_mean)?;
        non_negative("sigma_mu", k.sigma_mu)?;
        positive("delay_mean", k.delay_mean)?;
        probability("weak_prob", k.weak_prob)?;
        probability("seed_friend_prob", k.seed_friend_prob)?;
        if k.node_cap == 0 {
            return Err(Error::invalid("node_cap must be positive"));
        }
        if k.topic_effects.len() > c.topics {
            return Err(Error::invalid("more topic effects than topics"));
        }
        if !k.follower_effect.is_finite() || k.topic_effects.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("cascade effects must be finite"));
        }
        k.beta.to_array()?;
        k.weak_tilt.to_array()?;

        let u = &self.users;
        if u.population == 0 {
            return Err(Error::invalid("population must be positive"));
        }
        non_negative("age_min", u.age_min)?;
        positive("age_shape", u.age_shape)?;
        positive("age_scale", u.age_scale)?;
        probability("female_prob", u.female_prob)?;
        non_negative("friends_mean", u.friends_mean)?;
        u.age_tilt.to_array()?;
        Ok(())
    }
}

/// Population z-scores of the planted article intensities; an emotion with
/// no variation scores 0 everywhere.
pub fn true_zscores(truth: &[DocumentTruth]) -> Vec<EmotionVector> {
    let mut out = vec![EmotionVector::ZERO; truth.len()];
    for k in 0..N_EMOTIONS {
        let col: Vec<f64> = truth.iter().map(|t| t.intensities[k]).collect();
        let (m, sd) = (mean(&col), population_sd(&col));
        for (o, x) in out.iter_mut().zip(&col) {
            o[k] = if sd > 0.0 { (x - m) / sd } else { 0.0 };
        }
    }
    out
}

/// Everything generated in one run.
#[derive(Debug, Clone)]
pub struct SyntheticWorld {
    pub config: SynthConfig,
    pub embeddings: PlantedEmbeddings,
    pub corpus: SyntheticCorpus,
    pub publishers: Vec<Publisher>,
    pub articles: Vec<ArticleDraw>,
    pub cascades: SyntheticCascades,
}

pub fn generate(config: &SynthConfig) -> Result<SyntheticWorld> {
    config.validate()?;
    let embeddings = gen_embeddings(config)?;
    let corpus = gen_corpus(config, &embeddings.truth)?;
    let publishers = gen_publishers(config);
    let z = true_zscores(&corpus.truth);
    let per = config.corpus.articles_per_publisher;
    let articles: Vec<ArticleDraw> = corpus
        .articles
        .iter()
        .zip(&corpus.truth)
        .zip(z)
        .enumerate()
        .map(|(i, ((doc, truth), z))| {
            let p = i / per;
            ArticleDraw {
                id: doc.id.clone(),
                publisher: p,
                z,
                topic_shares: truth.topic_shares.clone(),
                publish_time: (p % 24) as f64 + (i % per) as f64 * 24.0 / publishers[p].articles_per_day,
            }
        })
        .collect();
    let population = gen_population(config);
    let cascades = gen_cascades(config, &articles, &publishers, &population)?;
    Ok(SyntheticWorld {
        config: config.clone(),
        embeddings,
        corpus,
        publishers,
        articles,
        cascades,
    })
}

/// File names written by [`write_world`], relative to the output directory.
pub mod files {
    pub const EMBEDDINGS: &str = "embeddings.txt";
    pub const BASIC_LEXICON: &str = "basic_lexicon.tsv";
    pub const NEGATIONS: &str = "negations.txt";
    pub const DEGREES: &str = "degrees.tsv";
    pub const ARTICLES: &str = "articles.jsonl";
    pub const COMMENTS: &str = "comments.jsonl";
    pub const EVENTS: &str = "events.jsonl";
    pub const PUBLISH_TIMES: &str = "publish_times.tsv";
    pub const PROFILES: &str = "profiles.tsv";
    pub const FRIENDSHIPS: &str = "friendships.tsv";
    pub const PUBLISHERS: &str = "publishers.tsv";
    pub const MANIFEST: &str = "manifest.toml";
    pub const TRUTH_DIR: &str = "truth";
    pub const TRUTH_PARAMS: &str = "truth/params.json";
    pub const TRUTH_LEXICON: &str = "truth/lexicon.tsv";
    pub const TRUTH_ARTICLES: &str = "truth/articles.tsv";
    pub const TRUTH_PUBLISHERS: &str = "truth/publishers.tsv";
    pub const TRUTH_CONFIG: &str = "truth/config.toml";
}

/// Planted parameters in the form compared against estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthParams {
    pub seed: u64,
    /// Emotion effects on the log offspring mean.
    pub beta: BTreeMap<String, f64>,
    pub sigma_mu: f64,
    pub follower_effect: f64,
    pub topic_effects: Vec<f64>,
    pub weak_tilt: BTreeMap<String, f64>,
    pub age_tilt: BTreeMap<String, f64>,
    pub articles: usize,
    pub truncated_cascades: usize,
    pub planted_words: usize,
    pub hidden_words: usize,
}

impl TruthParams {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub out_dir: PathBuf,
    pub vocabulary: usize,
    pub articles: usize,
    pub comments: usize,
    pub events: usize,
    pub users: usize,
    pub truncated_cascades: usize,
}

fn full(e: &EmotionCoefficients) -> BTreeMap<String, f64> {
    Emotion::ALL.iter().map(|k| (k.name().to_string(), e.get(*k))).collect()
}

/// Writes every input file the other commands consume, plus `truth/`.
pub fn write_world(world: &SyntheticWorld, out: &Path) -> Result<SynthSummary> {
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    mkdir(out)?;
    mkdir(&out.join(files::TRUTH_DIR))?;
    let config = &world.config;
    world.embeddings.store.write(&out.join(files::EMBEDDINGS))?;
    world.embeddings.basic.write(&out.join(files::BASIC_LEXICON))?;
    world.embeddings.truth.write(&out.join(files::TRUTH_LEXICON))?;
    world.corpus.modifiers.write(&out.join(files::NEGATIONS), &out.join(files::DEGREES))?;
    write_documents(&out.join(files::ARTICLES), &world.corpus.articles)?;
    write_documents(&out.join(files::COMMENTS), &world.corpus.comments)?;
    write_events(&out.join(files::EVENTS), &world.cascades.events)?;

    let mut t = Table::new(["article_id", "publish_time"]);
    for a in &world.articles {
        t.push(vec![a.id.clone(), a.publish_time.to_string()])?;
    }
    t.write(&out.join(files::PUBLISH_TIMES))?;

    let mut t = Table::new(["user_id", "age", "gender", "friend_count"]);
    for p in &world.cascades.profiles {
        let g = match p.gender {
            crate::cascade::Gender::Female => "female",
            crate::cascade::Gender::Male => "male",
            crate::cascade::Gender::Unknown => "unknown",
        };
        t.push(vec![p.user_id.clone(), p.age.to_string(), g.to_string(), p.friend_count.to_string()])?;
    }
    t.write(&out.join(files::PROFILES))?;

    let mut t = Table::new(["user_a", "user_b"]);
    for (a, b) in world.cascades.friendships.sorted_pairs() {
        t.push(vec![a, b])?;
    }
    t.write(&out.join(files::FRIENDSHIPS))?;

    let mut t = Table::new(["publisher_id", "ln_followers", "articles_per_day", "type"]);
    let mut tt = Table::new(["publisher_id", "intercept"]);
    for p in &world.publishers {
        t.push(vec![p.id.clone(), p.ln_followers.to_string(), p.articles_per_day.to_string(), p.kind.clone()])?;
        tt.push(vec![p.id.clone(), p.intercept.to_string()])?;
    }
    t.write(&out.join(files::PUBLISHERS))?;
    tt.write(&out.join(files::TRUTH_PUBLISHERS))?;

    let mut cols = vec!["article_id".to_string(), "publisher_id".to_string()];
    cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    cols.extend(Emotion::ALL.iter().map(|e| format!("z_{}", e.name())));
    cols.extend((0..config.corpus.topics).map(|k| format!("topic_{k}")));
    cols.extend(["dominant_emotion", "eta", "sharers", "truncated"].map(String::from));
    let mut t = Table::new(cols);
    for ((a, truth), ct) in world.articles.iter().zip(&world.corpus.truth).zip(&world.cascades.truth) {
        let mut row = vec![a.id.clone(), world.publishers[a.publisher].id.clone()];
        row.extend(truth.intensities.0.iter().map(|v| v.to_string()));
        row.extend(a.z.0.iter().map(|v| num(*v)));
        row.extend(truth.topic_shares.iter().map(|v| num(*v)));
        row.push(Emotion::ALL[truth.dominant_emotion].name().to_string());
        row.push(num(ct.eta));
        row.push(ct.sharers.to_string());
        row.push(ct.truncated.to_string());
        t.push(row)?;
    }
    t.write(&out.join(files::TRUTH_ARTICLES))?;

    let truncated = world.cascades.truth.iter().filter(|t| t.truncated).count();
    let params = TruthParams {
        seed: config.seed,
        beta: full(&config.cascades.beta),
        sigma_mu: config.cascades.sigma_mu,
        follower_effect: config.cascades.follower_effect,
        topic_effects: config.cascades.topic_effects.clone(),
        weak_tilt: full(&config.cascades.weak_tilt),
        age_tilt: full(&config.users.age_tilt),
        articles: world.articles.len(),
        truncated_cascades: truncated,
        planted_words: world.embeddings.truth.len(),
        hidden_words: world.embeddings.hidden_words().count(),
    };
    let path = out.join(files::TRUTH_PARAMS);
    std::fs::write(&path, serde_json::to_string_pretty(&params)? + "\n").map_err(|e| Error::io(&path, e))?;
    let path = out.join(files::TRUTH_CONFIG);
    std::fs::write(&path, config.to_toml()).map_err(|e| Error::io(&path, e))?;
    let mut manifest = crate::pipeline::Manifest::for_synthetic();
    manifest.seed = config.seed;
    let path = out.join(files::MANIFEST);
    std::fs::write(&path, manifest.to_toml()).map_err(|e| Error::io(&path, e))?;

    Ok(SynthSummary {
        out_dir: out.to_path_buf(),
        vocabulary: world.embeddings.store.len(),
        articles: world.articles.len(),
        comments: world.corpus.comments.len(),
        events: world.cascades.events.len(),
        users: world.cascades.profiles.len(),
        truncated_cascades: truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_and_validates() {
        let c = SynthConfig::default();
        assert_eq!(SynthConfig::from_toml(&c.to_toml()).unwrap(), c);
        let c = SynthConfig::from_toml("seed = 7\n[cascades]\nweak_prob = 0.1\n[cascades.beta]\njoy = 0.2\n").unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.cascades.beta.get(Emotion::Joy), 0.2);
        assert_eq!(c.cascades.beta.get(Emotion::Anxiety), 0.0);
        assert!(SynthConfig::from_toml("[cascades]\nweak_prob = 1.5\n").is_err());
        assert!(SynthConfig::from_toml("[cascades.beta]\nboredom = 1.0\n").is_err());
        assert!(SynthConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn zscores_handle_constant_columns() {
        let t = |x: f64| DocumentTruth {
            id: String::new(),
            intensities: EmotionVector::single(Emotion::Joy, x),
            topic_shares: vec![],
            token_topics: vec![],
            dominant_emotion: 0,
        };
        let z = true_zscores(&[t(1.0), t(3.0)]);
        assert_eq!(z[0][Emotion::Joy], -1.0);
        assert_eq!(z[1][Emotion::Anger], 0.0);
    }
}
