//! End-to-end run driven by a manifest: lexicon expansion, scoring, topics
//! and cascade measures feed a joined analysis table, which feeds the
//! regressions, mediation tests and plot-ready tables. Every stage output is
//! cached under a hash of everything it depends on.

mod cache;
mod consistency;
mod manifest;
mod stages;

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use cache::{copy_dir, hash_file, Cache, CacheState, KeyBuilder, CACHE_ENV};
pub use consistency::{comment_consistency, consistency_table, ConsistencyRow, DEFAULT_Z_THRESHOLD};
pub use manifest::{CommentParams, Inputs, Manifest, MediationParams, RegressionParams, ScoringParams, TopicParams};
pub use stages::{LexiconRecovery, RecoveryReport, SignRecovery, ANALYSIS, CASCADE_COLUMNS};

use crate::error::{Error, Result};

/// Bumped when a stage's output format or logic changes.
const VERSION: u32 = 1;

/// Stage names in execution order.
pub const STAGES: [&str; 11] = [
    "expand",
    "score",
    "topics",
    "cascade",
    "join",
    "regress",
    "mediate",
    "ccdf",
    "correlation",
    "comments",
    "recovery",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ran,
    Cached,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub status: StageStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Not serialised, so the report is the same wherever the run writes.
    #[serde(skip)]
    pub output_dir: PathBuf,
    pub stages: Vec<StageRecord>,
    pub recovery: Option<RecoveryReport>,
}

impl RunReport {
    pub fn stage(&self, name: &str) -> Option<&StageRecord> {
        self.stages.iter().find(|s| s.name == name)
    }
}

/// Key of every stage that the manifest enables, computed without running.
#[derive(Debug, Clone, Default)]
struct Plan {
    keys: Vec<(&'static str, String)>,
}

impl Plan {
    fn key(&self, stage: &str) -> Option<&str> {
        self.keys.iter().find(|(n, _)| *n == stage).map(|(_, k)| k.as_str())
    }
}

fn plan(m: &Manifest) -> Result<Plan> {
    let i = &m.inputs;
    let mut p = Plan::default();
    let lexicon_key = match &i.lexicon {
        Some(l) => KeyBuilder::new("lexicon-file", VERSION).file("lexicon", Some(l))?.finish(),
        None => {
            let k = KeyBuilder::new("expand", VERSION)
                .json("params", &m.expansion)
                .file("embeddings", i.embeddings.as_deref())?
                .file("basic", i.basic_lexicon.as_deref())?
                .finish();
            p.keys.push(("expand", k.clone()));
            k
        }
    };
    let docs = |b: KeyBuilder| -> Result<KeyBuilder> {
        Ok(b.json("scoring", &m.scoring)
            .file("articles", i.articles.as_deref())?
            .file("negations", i.negations.as_deref())?
            .file("degrees", i.degrees.as_deref())?
            .text("lexicon", &lexicon_key))
    };
    let score = docs(KeyBuilder::new("score", VERSION))?.file("comments", i.comments.as_deref())?.finish();
    p.keys.push(("score", score.clone()));
    let topics = if m.topics.enabled {
        let k = docs(KeyBuilder::new("topics", VERSION))?.json("topics", &m.topics).text("seed", &m.seed.to_string()).finish();
        p.keys.push(("topics", k.clone()));
        Some(k)
    } else {
        None
    };
    let cascade = if i.events.is_some() && i.publish_times.is_some() {
        let k = KeyBuilder::new("cascade", VERSION)
            .file("events", i.events.as_deref())?
            .file("times", i.publish_times.as_deref())?
            .file("profiles", i.profiles.as_deref())?
            .file("friendships", i.friendships.as_deref())?
            .finish();
        p.keys.push(("cascade", k.clone()));
        Some(k)
    } else {
        None
    };
    let join = KeyBuilder::new("join", VERSION)
        .json("scoring", &m.scoring)
        .file("articles", i.articles.as_deref())?
        .file("publishers", i.publishers.as_deref())?
        .text("score", &score)
        .text("topics", topics.as_deref().unwrap_or("-"))
        .text("cascade", cascade.as_deref().unwrap_or("-"))
        .finish();
    p.keys.push(("join", join.clone()));
    if cascade.is_some() {
        if !m.regression.outcomes.is_empty() && !m.regression.specs.is_empty() {
            let k = KeyBuilder::new("regress", VERSION).json("params", &m.regression).text("join", &join).finish();
            p.keys.push(("regress", k));
        }
        if !m.mediation.outcomes.is_empty() && !m.mediation.mediators.is_empty() {
            let k = KeyBuilder::new("mediate", VERSION)
                .json("params", &m.mediation)
                .json("min_group_size", &m.regression.min_group_size)
                .text("join", &join)
                .finish();
            p.keys.push(("mediate", k));
        }
        p.keys.push(("ccdf", KeyBuilder::new("ccdf", VERSION).text("cascade", cascade.as_deref().unwrap_or("-")).finish()));
    }
    p.keys.push(("correlation", KeyBuilder::new("correlation", VERSION).text("score", &score).finish()));
    if i.comments.is_some() {
        let k = KeyBuilder::new("comments", VERSION).json("params", &m.comments).text("score", &score).finish();
        p.keys.push(("comments", k));
    }
    if let Some(t) = &i.truth {
        let k = KeyBuilder::new("recovery", VERSION)
            .file("params", Some(&t.join("params.json")))?
            .file("lexicon", Some(&t.join("lexicon.tsv")).filter(|p| p.is_file()).map(PathBuf::as_path))?
            .file("basic", i.basic_lexicon.as_deref())?
            .text("expand", p.key("expand").unwrap_or("-"))
            .text("regress", p.key("regress").unwrap_or("-"))
            .json("outcomes", &m.regression.outcomes)
            .finish();
        p.keys.push(("recovery", k));
    }
    p.keys.sort_by_key(|(n, _)| STAGES.iter().position(|s| s == n));
    Ok(p)
}

struct Runner<'a> {
    cache: Cache,
    out: &'a Path,
    plan: Plan,
    records: Mutex<Vec<StageRecord>>,
}

impl Runner<'_> {
    /// Runs (or restores) a stage and returns its directory under the output.
    fn stage(&self, name: &'static str, body: impl FnOnce(&Path) -> Result<()>) -> Result<PathBuf> {
        let key = self.plan.key(name).expect("planned stage").to_string();
        let start = Instant::now();
        let (dir, status) = match self.cache.lookup(name, &key) {
            Some(dir) => (dir, StageStatus::Cached),
            None => {
                let dir = self.cache.store(name, &key, body).map_err(|e| e.in_stage(name))?;
                (dir, StageStatus::Ran)
            }
        };
        let target = self.out.join(name);
        copy_dir(&dir, &target).map_err(|e| e.in_stage(name))?;
        log::info!("stage {name}: {status:?} in {:.1?}", start.elapsed());
        self.records.lock().expect("no poisoned lock").push(StageRecord {
            name: name.to_string(),
            key,
            status,
        });
        Ok(target)
    }

    fn has(&self, name: &str) -> bool {
        self.plan.key(name).is_some()
    }
}

/// Runs every stage the manifest enables, in dependency order, and writes
/// `run_report.json` to the output directory.
pub fn run_pipeline(m: &Manifest) -> Result<RunReport> {
    m.validate()?;
    let out = m.output_dir.as_path();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let runner = Runner {
        cache: Cache::new(m.cache_dir()),
        out,
        plan: plan(m)?,
        records: Mutex::new(Vec::new()),
    };
    let r = &runner;

    // The cascade branch is independent of the text branch.
    let (text, cascade) = std::thread::scope(|s| {
        let cascade = s.spawn(move || -> Result<Option<PathBuf>> {
            if r.has("cascade") {
                r.stage("cascade", |d| stages::cascade(m, d)).map(Some)
            } else {
                Ok(None)
            }
        });
        let text = (|| -> Result<(PathBuf, PathBuf, Option<PathBuf>, Option<PathBuf>)> {
            let (lexicon, expand_dir) = match &m.inputs.lexicon {
                Some(l) => (l.clone(), None),
                None => {
                    let d = r.stage("expand", |d| stages::expand(m, d))?;
                    (d.join(stages::LEXICON), Some(d))
                }
            };
            let score = r.stage("score", |d| stages::score(m, &lexicon, d))?;
            let topics = if r.has("topics") {
                Some(r.stage("topics", |d| stages::topics(m, &lexicon, d))?)
            } else {
                None
            };
            Ok((lexicon, score, topics, expand_dir))
        })();
        (text, cascade.join().expect("cascade stage thread"))
    });
    let (_, score, topics, expand_dir) = text?;
    let cascade = cascade?;

    let join = r.stage("join", |d| stages::join(m, &score, topics.as_deref(), cascade.as_deref(), d))?;
    let regress = if r.has("regress") {
        Some(r.stage("regress", |d| stages::regress(m, &join, d))?)
    } else {
        None
    };
    if r.has("mediate") {
        r.stage("mediate", |d| stages::mediate(m, &join, d))?;
    }
    if let Some(c) = &cascade {
        r.stage("ccdf", |d| stages::ccdf(c, d))?;
    }
    r.stage("correlation", |d| stages::correlation(&score, d))?;
    if r.has("comments") {
        r.stage("comments", |d| stages::comments(m, &score, d))?;
    }
    let recovery = if r.has("recovery") {
        let d = r.stage("recovery", |d| stages::recovery(m, expand_dir.as_deref(), regress.as_deref(), d))?;
        let p = d.join(stages::RECOVERY);
        let text = std::fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::parse(&p, e.to_string()))?)
    } else {
        None
    };

    let mut stages = runner.records.into_inner().expect("no poisoned lock");
    stages.sort_by_key(|s| STAGES.iter().position(|n| *n == s.name));
    let report = RunReport {
        output_dir: out.to_path_buf(),
        stages,
        recovery,
    };
    let p = out.join("run_report.json");
    std::fs::write(&p, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageState {
    pub name: String,
    pub key: String,
    pub state: CacheState,
}

/// Cache state of every enabled stage for the manifest's current inputs.
pub fn pipeline_status(m: &Manifest) -> Result<Vec<StageState>> {
    m.validate()?;
    let cache = Cache::new(m.cache_dir());
    Ok(plan(m)?
        .keys
        .into_iter()
        .map(|(name, key)| StageState {
            name: name.to_string(),
            state: cache.state(name, &key),
            key,
        })
        .collect())
}
