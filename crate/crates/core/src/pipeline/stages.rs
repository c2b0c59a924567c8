//! Stage bodies. Each reads its inputs (original files or upstream stage
//! directories) and writes its outputs into `dir`.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::consistency::{comment_consistency, consistency_table};
use super::manifest::Manifest;
use crate::cascade::{analyze_all, ccdf_table, metrics_table, read_events, read_friendships, read_profiles, read_publish_times, Friendships};
use crate::emotion::{Emotion, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::lexicon::{expand_lexicon, EmbeddingStore, Lexicon};
use crate::scorer::{
    correlation_table, read_documents, score_table, standardize, Document, DocumentFilter, EmotionMatrix,
    EmotionScorer, ModifierDictionaries,
};
use crate::stats::{
    build_design, fit_specification, hausman_test, mediation_analysis, DesignOptions, FitResult, MediationReport, Outcome,
    Spec, DEGREE_COLUMN,
};
use crate::synth::TruthParams;
use crate::table::{num, Table};
use crate::topics::{content_tokens, fit_lda, preprocess, select_k, LdaConfig};

pub const LEXICON: &str = "lexicon.tsv";
pub const ARTICLE_SCORES: &str = "article_scores.tsv";
pub const ARTICLE_Z: &str = "article_z.tsv";
pub const COMMENT_Z: &str = "comment_z.tsv";
pub const DOC_TOPICS: &str = "doc_topics.tsv";
pub const METRICS: &str = "metrics.tsv";
pub const ANALYSIS: &str = "analysis.tsv";
pub const RECOVERY: &str = "summary.json";

/// Columns of the analysis table carrying cascade outcomes and mediators.
pub const CASCADE_COLUMNS: [&str; 10] = [
    "size",
    "depth",
    "max_breadth",
    "time_per_level",
    "structural_virality",
    "weak_tie_prop",
    "clusterness",
    "avg_age",
    "avg_friends",
    "female_share",
];

fn path<'a>(p: &'a Option<std::path::PathBuf>) -> &'a Path {
    p.as_deref().expect("validated manifest")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn filter(m: &Manifest) -> DocumentFilter {
    DocumentFilter {
        min_chars: m.scoring.min_chars,
        drop_video: m.scoring.drop_video,
    }
}

fn articles(m: &Manifest) -> Result<Vec<Document>> {
    let f = filter(m);
    Ok(read_documents(path(&m.inputs.articles))?.into_iter().filter(|d| f.keep(d)).collect())
}

fn modifiers(m: &Manifest) -> Result<ModifierDictionaries> {
    match (&m.inputs.negations, &m.inputs.degrees) {
        (Some(n), Some(d)) => ModifierDictionaries::read(n, d),
        _ => Ok(ModifierDictionaries::default()),
    }
}

pub fn expand(m: &Manifest, dir: &Path) -> Result<()> {
    let store = EmbeddingStore::read(path(&m.inputs.embeddings))?;
    let basic = Lexicon::read(path(&m.inputs.basic_lexicon))?;
    let (lexicon, log) = expand_lexicon(&store, &basic, &m.expansion)?;
    log::info!("expanded {} basic words to {} in {} iterations", basic.len(), lexicon.len(), log.iterations.len());
    lexicon.write(&dir.join(LEXICON))?;
    write_text(&dir.join("expansion_log.json"), &(serde_json::to_string_pretty(&log)? + "\n"))
}

pub fn score(m: &Manifest, lexicon: &Path, dir: &Path) -> Result<()> {
    let lexicon = Lexicon::read(lexicon)?;
    let mods = modifiers(m)?;
    let scorer = EmotionScorer::new(&lexicon, &mods, m.scoring.window);
    let docs = articles(m)?;
    let raw = scorer.score_corpus(&docs);
    raw.to_table().write(&dir.join(ARTICLE_SCORES))?;
    let t = score_table(&raw, false)?;
    t.write(&dir.join(ARTICLE_Z))?;

    if let Some(p) = &m.inputs.comments {
        let comments = read_documents(p)?;
        let z = standardize(&scorer.score_corpus(&comments))?;
        let mut cols = vec!["id".to_string(), "article_id".into()];
        cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
        let mut t = Table::new(cols);
        for (c, r) in comments.iter().zip(&z.rows) {
            let mut row = vec![c.id.clone(), c.article_id.clone().unwrap_or_else(|| "NA".into())];
            row.extend(r.0.iter().map(|v| num(*v)));
            t.push(row)?;
        }
        t.write(&dir.join(COMMENT_Z))?;
    }
    Ok(())
}

pub fn topics(m: &Manifest, lexicon: &Path, dir: &Path) -> Result<()> {
    let lexicon = Lexicon::read(lexicon)?;
    let mods = modifiers(m)?;
    let docs = articles(m)?;
    let tokens = content_tokens(&docs, &mods);
    let corpus = preprocess(&tokens, Some(&lexicon), m.topics.min_doc_freq)?;
    let t = &m.topics;
    let base = LdaConfig {
        k: t.k.max(1),
        iterations: t.iterations,
        seed: m.seed,
        alpha: t.alpha,
        beta: t.beta,
    };
    let k = if t.candidates.is_empty() {
        t.k
    } else {
        let sel = select_k(&corpus, &t.candidates, &base)?;
        let mut table = Table::new(["k", "perplexity"]);
        for (k, p) in &sel.curve {
            table.push(vec![k.to_string(), num(*p)])?;
        }
        table.write(&dir.join("selection.tsv"))?;
        sel.best_k
    };
    let model = fit_lda(&corpus, &LdaConfig { k, ..base })?;
    model.save(&dir.join("model"))?;
    let mut cols = vec!["article_id".to_string()];
    cols.extend((0..k).map(|j| format!("topic_{j}")));
    let mut table = Table::new(cols);
    for (d, theta) in docs.iter().zip(model.training_doc_topics()) {
        let mut row = vec![d.id.clone()];
        row.extend(theta.iter().map(|v| num(*v)));
        table.push(row)?;
    }
    table.write(&dir.join(DOC_TOPICS))?;
    let mut table = Table::new(["topic", "rank", "word", "probability"]);
    for j in 0..k {
        for (r, (w, p)) in model.top_words(j, 15).into_iter().enumerate() {
            table.push(vec![j.to_string(), (r + 1).to_string(), w.to_string(), num(p)])?;
        }
    }
    table.write(&dir.join("top_words.tsv"))
}

pub fn cascade(m: &Manifest, dir: &Path) -> Result<()> {
    let events = read_events(path(&m.inputs.events))?;
    let times = read_publish_times(path(&m.inputs.publish_times))?;
    let profiles = match &m.inputs.profiles {
        Some(p) => read_profiles(p)?,
        None => HashMap::new(),
    };
    let friends = match &m.inputs.friendships {
        Some(p) => read_friendships(p)?,
        None => Friendships::new(),
    };
    let results = analyze_all(&events, &times, &profiles, &friends);
    let mut ok = Vec::new();
    let mut errors = Table::new(["article_id", "error"]);
    for r in results {
        match r.result {
            Ok(metrics) => ok.push(metrics),
            Err(e) => errors.push(vec![r.article_id, e.to_string()])?,
        }
    }
    if ok.is_empty() {
        return Err(Error::invalid("no cascade could be built from the events"));
    }
    if !errors.is_empty() {
        log::warn!("{} cascades failed validation; see errors.tsv", errors.len());
    }
    metrics_table(&ok).write(&dir.join(METRICS))?;
    errors.write(&dir.join("errors.tsv"))
}

fn index_by(table: &Table, column: &str) -> Result<HashMap<String, usize>> {
    Ok(table.text_column(column)?.into_iter().enumerate().map(|(i, id)| (id.to_string(), i)).collect())
}

fn cell(table: &Table, row: usize, column: &str) -> String {
    let i = table.columns().iter().position(|c| c == column).expect("column checked");
    table.rows()[row][i].clone()
}

pub fn join(m: &Manifest, score_dir: &Path, topics_dir: Option<&Path>, cascade_dir: Option<&Path>, dir: &Path) -> Result<()> {
    let docs: HashMap<String, Document> = articles(m)?.into_iter().map(|d| (d.id.clone(), d)).collect();
    let z = Table::read(&score_dir.join(ARTICLE_Z))?;
    let topics = topics_dir.map(|d| Table::read(&d.join(DOC_TOPICS))).transpose()?;
    let metrics = cascade_dir.map(|d| Table::read(&d.join(METRICS))).transpose()?;
    let publishers = m.inputs.publishers.as_deref().map(Table::read).transpose()?;

    let topic_cols: Vec<String> = topics
        .as_ref()
        .map(|t| t.columns().iter().filter(|c| c.starts_with("topic_")).cloned().collect())
        .unwrap_or_default();
    let topic_index = topics.as_ref().map(|t| index_by(t, "article_id")).transpose()?;
    let metric_index = metrics.as_ref().map(|t| index_by(t, "article_id")).transpose()?;
    let (pub_index, pub_types) = match &publishers {
        Some(p) => {
            let types: BTreeSet<String> = p.text_column("type")?.into_iter().map(String::from).collect();
            (Some(index_by(p, "publisher_id")?), types.into_iter().collect::<Vec<_>>())
        }
        None => (None, Vec::new()),
    };

    let mut cols = vec!["article_id".to_string(), "publisher_id".into()];
    cols.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    cols.push(DEGREE_COLUMN.into());
    cols.extend(topic_cols.iter().cloned());
    cols.extend(["ln_char_length", "n_images", "n_videos", "weekend", "n_comments", "original"].map(String::from));
    if publishers.is_some() {
        cols.extend(["ln_followers", "articles_per_day"].map(String::from));
        cols.extend(pub_types.iter().map(|t| format!("pubtype_{t}")));
    }
    if metrics.is_some() {
        cols.extend(CASCADE_COLUMNS.map(String::from));
    }
    let mut out = Table::new(cols);
    for (r, id) in z.text_column("id")?.into_iter().enumerate() {
        let doc = docs
            .get(id)
            .ok_or_else(|| Error::invalid(format!("scored article `{id}` is not in the article file")))?;
        let mut row = vec![id.to_string(), doc.publisher_id.clone()];
        for e in Emotion::ALL {
            row.push(cell(&z, r, e.name()));
        }
        row.push(cell(&z, r, DEGREE_COLUMN));
        if let (Some(t), Some(ix)) = (&topics, &topic_index) {
            for c in &topic_cols {
                row.push(ix.get(id).map_or("NA".into(), |&i| cell(t, i, c)));
            }
        }
        row.push(if doc.char_length > 0 { num(f64::from(doc.char_length).ln()) } else { "NA".into() });
        row.push(doc.n_images.to_string());
        row.push(doc.n_videos.to_string());
        row.push(u8::from(doc.posted_weekend).to_string());
        row.push(doc.n_comments.to_string());
        row.push(u8::from(doc.original).to_string());
        if let (Some(p), Some(ix)) = (&publishers, &pub_index) {
            match ix.get(&doc.publisher_id) {
                Some(&i) => {
                    row.push(cell(p, i, "ln_followers"));
                    row.push(cell(p, i, "articles_per_day"));
                    let kind = cell(p, i, "type");
                    row.extend(pub_types.iter().map(|t| u8::from(*t == kind).to_string()));
                }
                None => row.extend((0..2 + pub_types.len()).map(|_| "NA".to_string())),
            }
        }
        if let (Some(t), Some(ix)) = (&metrics, &metric_index) {
            for c in CASCADE_COLUMNS {
                row.push(ix.get(id).map_or("NA".into(), |&i| cell(t, i, c)));
            }
        }
        out.push(row)?;
    }
    out.write(&dir.join(ANALYSIS))
}

fn fit_name(outcome: Outcome, spec: Spec) -> String {
    format!("{}_{}", outcome.name(), spec.name())
}

pub fn regress(m: &Manifest, join_dir: &Path, dir: &Path) -> Result<()> {
    let table = Table::read(&join_dir.join(ANALYSIS))?;
    let opts = DesignOptions {
        min_group_size: m.regression.min_group_size,
    };
    let method = m.method()?;
    let slopes: Vec<&str> = m.slope_emotions()?.iter().map(|e| e.name()).collect();
    let mut designs = Table::new(["outcome", "spec", "method", "n_obs", "n_groups", "dropped_rows", "dropped_columns", "absorbed"]);
    let mut emotions = Table::new(["outcome", "spec", "term", "estimate", "std_error", "p_value", "stars"]);
    let mut hausman = Table::new(["outcome", "statistic", "dof", "p_value", "compared"]);
    for outcome in m.outcomes()? {
        let mut fits: HashMap<Spec, FitResult> = HashMap::new();
        for spec in m.specs()? {
            let context = |e: Error| Error::invalid(format!("{}: {e}", fit_name(outcome, spec)));
            let built = build_design(&table, outcome, spec, &opts).map_err(context)?;
            let fit = fit_specification(&built.design, spec, method, &slopes).map_err(context)?;
            let name = fit_name(outcome, spec);
            fit.coefficient_table().write(&dir.join(format!("{name}.tsv")))?;
            fit.write_json(&dir.join(format!("{name}.json")))?;
            designs.push(vec![
                outcome.name().into(),
                spec.name().into(),
                fit.method.to_string(),
                built.design.n_obs().to_string(),
                built.design.n_groups().to_string(),
                built.dropped_rows.to_string(),
                built.dropped_columns.join(","),
                fit.absorbed.join(","),
            ])?;
            for c in &fit.coefficients {
                if c.name == DEGREE_COLUMN || c.name.parse::<Emotion>().is_ok() {
                    emotions.push(vec![
                        outcome.name().into(),
                        spec.name().into(),
                        c.name.clone(),
                        num(c.estimate),
                        num(c.std_error),
                        num(c.p_value),
                        c.stars().into(),
                    ])?;
                }
            }
            fits.insert(spec, fit);
        }
        if m.regression.hausman {
            if let (Some(fe), Some(re)) = (fits.get(&Spec::Fe), fits.get(&Spec::Main)) {
                let h = hausman_test(fe, re)?;
                hausman.push(vec![
                    outcome.name().into(),
                    num(h.statistic),
                    h.dof.to_string(),
                    num(h.p_value),
                    h.compared.join(","),
                ])?;
            }
        }
    }
    designs.write(&dir.join("designs.tsv"))?;
    emotions.write(&dir.join("emotions.tsv"))?;
    hausman.write(&dir.join("hausman.tsv"))
}

pub fn mediate(m: &Manifest, join_dir: &Path, dir: &Path) -> Result<()> {
    let table = Table::read(&join_dir.join(ANALYSIS))?;
    let opts = DesignOptions {
        min_group_size: m.regression.min_group_size,
    };
    let mode = m.mediation_mode()?;
    let emotions: Vec<&str> = m.mediation_emotions()?.iter().map(|e| e.name()).collect();
    let mut reports: Vec<MediationReport> = Vec::new();
    for outcome in m.mediation_outcomes()? {
        let built = build_design(&table, outcome, Spec::Main, &opts)?;
        for mediator in &m.mediation.mediators {
            let values = table.numeric_column(mediator)?;
            let med: Vec<f64> = built.rows.iter().map(|&i| values[i]).collect();
            let report = mediation_analysis(&built.design, mediator, &med, &emotions, mode)
                .map_err(|e| Error::invalid(format!("{} via {mediator}: {e}", outcome.name())))?;
            reports.push(report);
        }
    }
    let mut all: Option<Table> = None;
    for r in &reports {
        let t = r.to_table();
        match all.as_mut() {
            None => all = Some(t),
            Some(a) => {
                for row in t.rows() {
                    a.push(row.clone())?;
                }
            }
        }
    }
    let all = all.unwrap_or_else(|| MediationReport {
        mediator: String::new(),
        outcome: String::new(),
        mode,
        dropped_rows: 0,
        rows: vec![],
    }
    .to_table());
    all.write(&dir.join("mediation.tsv"))?;
    let mut dropped = Table::new(["outcome", "mediator", "dropped_rows"]);
    for r in &reports {
        dropped.push(vec![r.outcome.clone(), r.mediator.clone(), r.dropped_rows.to_string()])?;
    }
    dropped.write(&dir.join("dropped_rows.tsv"))
}

pub fn ccdf(cascade_dir: &Path, dir: &Path) -> Result<()> {
    let metrics = Table::read(&cascade_dir.join(METRICS))?;
    for c in ["size", "depth", "max_breadth", "structural_virality", "time_per_level"] {
        ccdf_table(&metrics.numeric_column(c)?)?.write(&dir.join(format!("ccdf_{c}.tsv")))?;
    }
    Ok(())
}

pub fn correlation(score_dir: &Path, dir: &Path) -> Result<()> {
    let raw = EmotionMatrix::from_table(&Table::read(&score_dir.join(ARTICLE_SCORES))?, false)?;
    correlation_table(&raw)?.write(&dir.join("emotion_correlation.tsv"))
}

pub fn comments(m: &Manifest, score_dir: &Path, dir: &Path) -> Result<()> {
    let articles = Table::read(&score_dir.join(ARTICLE_Z))?;
    let articles = EmotionMatrix::from_table(&articles, true)?;
    let comments = Table::read(&score_dir.join(COMMENT_Z))?;
    let links: Vec<String> = comments.text_column("article_id")?.into_iter().map(String::from).collect();
    let comments = EmotionMatrix::from_table(&comments, true)?;
    let rows = comment_consistency(&articles, &comments, &links, m.comments.z_threshold)?;
    consistency_table(&rows).write(&dir.join("comment_consistency.tsv"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignRecovery {
    pub outcome: String,
    pub emotion: String,
    pub planted: f64,
    pub estimate: f64,
    pub p_value: f64,
    /// Same sign as planted and significant at 5%.
    pub recovered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconRecovery {
    pub hidden_words: usize,
    pub recovered: usize,
    pub recall: f64,
    /// Mean absolute intensity error on each recovered word's planted emotion.
    pub mae: f64,
    /// Mined words that were not planted.
    pub spurious: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub signs: Vec<SignRecovery>,
    pub all_signs_recovered: bool,
    pub lexicon: Option<LexiconRecovery>,
}

/// Outcomes that grow with the planted offspring mean.
const MONOTONE: [Outcome; 4] = [Outcome::Size, Outcome::Depth, Outcome::MaxBreadth, Outcome::StructuralVirality];

pub fn recovery(m: &Manifest, expand_dir: Option<&Path>, regress_dir: Option<&Path>, dir: &Path) -> Result<()> {
    let truth_dir = path(&m.inputs.truth);
    let params = TruthParams::read(&truth_dir.join("params.json"))?;
    let mut signs = Vec::new();
    if let Some(rd) = regress_dir {
        for outcome in m.outcomes()?.into_iter().filter(|o| MONOTONE.contains(o)) {
            let p = rd.join(format!("{}.json", fit_name(outcome, Spec::Main)));
            if !p.is_file() {
                continue;
            }
            let fit = FitResult::read_json(&p)?;
            for (emotion, &planted) in &params.beta {
                if planted == 0.0 {
                    continue;
                }
                let Some(c) = fit.coefficient(emotion) else { continue };
                signs.push(SignRecovery {
                    outcome: outcome.name().into(),
                    emotion: emotion.clone(),
                    planted,
                    estimate: c.estimate,
                    p_value: c.p_value,
                    recovered: c.estimate.signum() == planted.signum() && c.significant(),
                });
            }
        }
    }
    let lexicon = match (expand_dir, &m.inputs.basic_lexicon) {
        (Some(ed), Some(basic)) if truth_dir.join("lexicon.tsv").is_file() => {
            let truth = Lexicon::read(&truth_dir.join("lexicon.tsv"))?;
            let basic = Lexicon::read(basic)?;
            let found = Lexicon::read(&ed.join(LEXICON))?;
            let (mut hidden, mut recovered, mut err) = (0usize, 0usize, 0.0);
            for e in &truth {
                if basic.contains(&e.word) {
                    continue;
                }
                hidden += 1;
                if let Some(f) = found.intensities(&e.word) {
                    recovered += 1;
                    let k = (0..N_EMOTIONS).fold(0, |b, k| if e.emotions[k] > e.emotions[b] { k } else { b });
                    err += (f[k] - e.emotions[k]).abs();
                }
            }
            let spurious = found.iter().filter(|e| !basic.contains(&e.word) && !truth.contains(&e.word)).count();
            Some(LexiconRecovery {
                hidden_words: hidden,
                recovered,
                recall: if hidden == 0 { 1.0 } else { recovered as f64 / hidden as f64 },
                mae: if recovered == 0 { 0.0 } else { err / recovered as f64 },
                spurious,
            })
        }
        _ => None,
    };
    let mut t = Table::new(["outcome", "emotion", "planted", "estimate", "p_value", "recovered"]);
    for s in &signs {
        t.push(vec![
            s.outcome.clone(),
            s.emotion.clone(),
            num(s.planted),
            num(s.estimate),
            num(s.p_value),
            s.recovered.to_string(),
        ])?;
    }
    t.write(&dir.join("signs.tsv"))?;
    let report = RecoveryReport {
        all_signs_recovered: !signs.is_empty() && signs.iter().all(|s| s.recovered),
        signs,
        lexicon,
    };
    write_text(&dir.join(RECOVERY), &(serde_json::to_string_pretty(&report)? + "\n"))
}
