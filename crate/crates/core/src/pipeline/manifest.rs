use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::lexicon::ExpansionParams;
use crate::scorer::DEFAULT_WINDOW;
use crate::stats::{MediationMode, Method, Outcome, Spec};
use crate::synth::files;
use crate::topics::DEFAULT_MIN_DOC_FREQ;

/// Input files. Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub embeddings: Option<PathBuf>,
    pub basic_lexicon: Option<PathBuf>,
    /// A ready lexicon; expansion is skipped when given.
    pub lexicon: Option<PathBuf>,
    pub negations: Option<PathBuf>,
    pub degrees: Option<PathBuf>,
    pub articles: Option<PathBuf>,
    pub comments: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub publish_times: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub friendships: Option<PathBuf>,
    /// `publisher_id`, `ln_followers`, `articles_per_day`, `type`.
    pub publishers: Option<PathBuf>,
    /// Directory holding planted parameters, for the recovery report.
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringParams {
    pub window: usize,
    pub min_chars: Option<u32>,
    pub drop_video: bool,
}

impl Default for ScoringParams {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            min_chars: None,
            drop_video: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopicParams {
    pub enabled: bool,
    /// Fixed topic count, used when `candidates` is empty.
    pub k: usize,
    /// Topic counts to choose from by held-out perplexity.
    pub candidates: Vec<usize>,
    pub iterations: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
    pub min_doc_freq: f64,
}

impl Default for TopicParams {
    fn default() -> Self {
        Self {
            enabled: true,
            k: 5,
            candidates: Vec::new(),
            iterations: 800,
            alpha: None,
            beta: 0.01,
            min_doc_freq: DEFAULT_MIN_DOC_FREQ,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegressionParams {
    pub outcomes: Vec<String>,
    pub specs: Vec<String>,
    /// Estimator for the random-intercept specifications: `reml`, `ml` or `ols`.
    pub method: String,
    pub min_group_size: usize,
    /// Emotions given random slopes; all eight when empty.
    pub slope_emotions: Vec<String>,
    pub hausman: bool,
}

impl Default for RegressionParams {
    fn default() -> Self {
        Self {
            outcomes: Outcome::ALL.iter().map(|o| o.column().to_string()).collect(),
            specs: ["main", "degree", "fe"].map(String::from).to_vec(),
            method: "reml".into(),
            min_group_size: 2,
            slope_emotions: Vec::new(),
            hausman: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MediationParams {
    pub mediators: Vec<String>,
    pub outcomes: Vec<String>,
    /// `mixed` or `ols`.
    pub mode: String,
    /// Emotions tested; all eight when empty.
    pub emotions: Vec<String>,
}

impl Default for MediationParams {
    fn default() -> Self {
        Self {
            mediators: ["avg_age", "avg_friends", "weak_tie_prop", "female_share", "clusterness"]
                .map(String::from)
                .to_vec(),
            outcomes: ["size", "depth"].map(String::from).to_vec(),
            mode: "mixed".into(),
            emotions: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CommentParams {
    pub z_threshold: f64,
}

impl Default for CommentParams {
    fn default() -> Self {
        Self { z_threshold: 1.96 }
    }
}

/// Declarative description of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Defaults to `<output_dir>/.cache`; the environment variable wins.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    pub inputs: Inputs,
    #[serde(default)]
    pub expansion: ExpansionParams,
    #[serde(default)]
    pub scoring: ScoringParams,
    #[serde(default)]
    pub topics: TopicParams,
    #[serde(default)]
    pub regression: RegressionParams,
    #[serde(default)]
    pub mediation: MediationParams,
    #[serde(default)]
    pub comments: CommentParams,
}

fn field(name: &str, message: impl Into<String>) -> Error {
    Error::Manifest {
        field: name.to_string(),
        message: message.into(),
    }
}

impl Manifest {
    /// Reads, resolves relative paths against the file's directory and validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.resolve(&base);
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serialises")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(c) = self.cache_dir.as_mut() {
            fix(c);
        }
        let i = &mut self.inputs;
        for p in [
            &mut i.embeddings,
            &mut i.basic_lexicon,
            &mut i.lexicon,
            &mut i.negations,
            &mut i.degrees,
            &mut i.articles,
            &mut i.comments,
            &mut i.events,
            &mut i.publish_times,
            &mut i.profiles,
            &mut i.friendships,
            &mut i.publishers,
            &mut i.truth,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Manifest for a directory written by `synth all`, with paths relative to it.
    pub fn for_synthetic() -> Self {
        let p = |s: &str| Some(PathBuf::from(s));
        Manifest {
            seed: 1,
            output_dir: "results".into(),
            cache_dir: None,
            inputs: Inputs {
                embeddings: p(files::EMBEDDINGS),
                basic_lexicon: p(files::BASIC_LEXICON),
                lexicon: None,
                negations: p(files::NEGATIONS),
                degrees: p(files::DEGREES),
                articles: p(files::ARTICLES),
                comments: p(files::COMMENTS),
                events: p(files::EVENTS),
                publish_times: p(files::PUBLISH_TIMES),
                profiles: p(files::PROFILES),
                friendships: p(files::FRIENDSHIPS),
                publishers: p(files::PUBLISHERS),
                truth: p(files::TRUTH_DIR),
            },
            expansion: ExpansionParams::default(),
            scoring: ScoringParams::default(),
            topics: TopicParams {
                iterations: 300,
                ..TopicParams::default()
            },
            regression: RegressionParams::default(),
            mediation: MediationParams::default(),
            comments: CommentParams::default(),
        }
    }

    pub fn outcomes(&self) -> Result<Vec<Outcome>> {
        self.regression
            .outcomes
            .iter()
            .map(|o| o.parse().map_err(|e: Error| field("regression.outcomes", e.to_string())))
            .collect()
    }

    pub fn specs(&self) -> Result<Vec<Spec>> {
        self.regression
            .specs
            .iter()
            .map(|s| s.parse().map_err(|e: Error| field("regression.specs", e.to_string())))
            .collect()
    }

    pub fn method(&self) -> Result<Method> {
        let m: Method = self.regression.method.parse().map_err(|e: Error| field("regression.method", e.to_string()))?;
        if m == Method::Fe {
            return Err(field("regression.method", "use the `fe` specification for fixed effects"));
        }
        Ok(m)
    }

    pub fn mediation_outcomes(&self) -> Result<Vec<Outcome>> {
        self.mediation
            .outcomes
            .iter()
            .map(|o| o.parse().map_err(|e: Error| field("mediation.outcomes", e.to_string())))
            .collect()
    }

    pub fn mediation_mode(&self) -> Result<MediationMode> {
        self.mediation.mode.parse().map_err(|e: Error| field("mediation.mode", e.to_string()))
    }

    fn emotion_list(list: &[String], name: &str) -> Result<Vec<Emotion>> {
        if list.is_empty() {
            return Ok(Emotion::ALL.to_vec());
        }
        list.iter().map(|e| e.parse().map_err(|err: Error| field(name, err.to_string()))).collect()
    }

    pub fn mediation_emotions(&self) -> Result<Vec<Emotion>> {
        Self::emotion_list(&self.mediation.emotions, "mediation.emotions")
    }

    pub fn slope_emotions(&self) -> Result<Vec<Emotion>> {
        Self::emotion_list(&self.regression.slope_emotions, "regression.slope_emotions")
    }

    /// Whether any stage needs cascade measures.
    pub fn needs_cascades(&self) -> bool {
        !self.regression.outcomes.is_empty() || !self.mediation.outcomes.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.inputs;
        let require = |p: &Option<PathBuf>, name: &str, why: &str| -> Result<()> {
            match p {
                None => Err(field(&format!("inputs.{name}"), format!("missing; required {why}"))),
                Some(_) => Ok(()),
            }
        };
        require(&i.articles, "articles", "for scoring")?;
        if i.lexicon.is_none() {
            require(&i.embeddings, "embeddings", "for lexicon expansion when no `lexicon` is given")?;
            require(&i.basic_lexicon, "basic_lexicon", "for lexicon expansion when no `lexicon` is given")?;
        }
        if i.negations.is_some() != i.degrees.is_some() {
            return Err(field("inputs.degrees", "negations and degrees must be given together"));
        }
        if self.needs_cascades() {
            let why = "because regression or mediation outcomes are cascade measures";
            require(&i.events, "events", why)?;
            require(&i.publish_times, "publish_times", why)?;
        }
        if !self.mediation.outcomes.is_empty() && !self.mediation.mediators.is_empty() {
            for m in &self.mediation.mediators {
                if !["avg_age", "avg_friends", "weak_tie_prop", "female_share", "clusterness"].contains(&m.as_str()) {
                    return Err(field("mediation.mediators", format!("unknown mediator `{m}`")));
                }
            }
        }
        for (name, p) in [
            ("embeddings", &i.embeddings),
            ("basic_lexicon", &i.basic_lexicon),
            ("lexicon", &i.lexicon),
            ("negations", &i.negations),
            ("degrees", &i.degrees),
            ("articles", &i.articles),
            ("comments", &i.comments),
            ("events", &i.events),
            ("publish_times", &i.publish_times),
            ("profiles", &i.profiles),
            ("friendships", &i.friendships),
            ("publishers", &i.publishers),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(field(&format!("inputs.{name}"), format!("{} does not exist", p.display())));
                }
            }
        }
        if let Some(t) = &i.truth {
            if !t.join("params.json").is_file() {
                return Err(field("inputs.truth", format!("{} has no params.json", t.display())));
            }
        }
        self.expansion.validate().map_err(|e| field("expansion", e.to_string()))?;
        if self.scoring.window == 0 {
            return Err(field("scoring.window", "must be positive"));
        }
        if self.topics.enabled {
            if self.topics.candidates.is_empty() && self.topics.k == 0 {
                return Err(field("topics.k", "must be positive"));
            }
            if self.topics.iterations == 0 {
                return Err(field("topics.iterations", "must be positive"));
            }
        }
        self.outcomes()?;
        self.specs()?;
        self.method()?;
        self.mediation_outcomes()?;
        self.mediation_mode()?;
        self.mediation_emotions()?;
        self.slope_emotions()?;
        if !(self.comments.z_threshold.is_finite()) {
            return Err(field("comments.z_threshold", "must be finite"));
        }
        Ok(())
    }

    pub fn cache_dir(&self) -> PathBuf {
        if let Some(dir) = std::env::var_os(super::CACHE_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(dir);
        }
        self.cache_dir.clone().unwrap_or_else(|| self.output_dir.join(".cache"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_events_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let art = dir.path().join("a.jsonl");
        std::fs::write(&art, "").unwrap();
        std::fs::write(dir.path().join("lex.tsv"), "").unwrap();
        let text = "output_dir = \"out\"\n[inputs]\narticles = \"a.jsonl\"\nlexicon = \"lex.tsv\"\n";
        let path = dir.path().join("m.toml");
        std::fs::write(&path, text).unwrap();
        match Manifest::load(&path) {
            Err(Error::Manifest { field, .. }) => assert_eq!(field, "inputs.events"),
            other => panic!("{other:?}"),
        }
        let text = format!("{text}[regression]\noutcomes = []\n[mediation]\noutcomes = []\n");
        std::fs::write(&path, text).unwrap();
        let m = Manifest::load(&path).unwrap();
        assert_eq!(m.output_dir, dir.path().join("out"));
        assert_eq!(m.inputs.articles.unwrap(), art);
    }

    #[test]
    fn synthetic_manifest_round_trips() {
        let m = Manifest::for_synthetic();
        let back: Manifest = toml::from_str(&m.to_toml()).unwrap();
        assert_eq!(back, m);
    }
}
