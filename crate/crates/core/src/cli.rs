//! Command-line front end. Every subcommand is a thin wrapper over one
//! library operation; `pipeline run` drives them all from a manifest.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::cascade::{analyze_all, ccdf_table, metrics_table, read_events, read_friendships, read_profiles, read_publish_times};
use crate::emotion::Emotion;
use crate::error::{Error, Result};
use crate::lexicon::{default_holdout_size, expand_lexicon, validate_holdout, EmbeddingStore, ExpansionParams, Lexicon};
use crate::pipeline::{comment_consistency, consistency_table, pipeline_status, run_pipeline, Manifest, DEFAULT_Z_THRESHOLD};
use crate::scorer::{
    correlation_table, read_documents, score_table, DocumentFilter, EmotionMatrix, EmotionScorer, ModifierDictionaries,
    DEFAULT_WINDOW,
};
use crate::stats::{
    build_design, fit_specification, hausman_test, mediation_analysis, welch_t_test, DesignOptions, FitResult, MediationMode,
    Method, Outcome, Spec,
};
use crate::synth::{generate, write_world, SynthConfig};
use crate::table::{num, parse_number, Table};
use crate::topics::{content_tokens, fit_lda, preprocess, select_k, LdaConfig, TopicModel, DEFAULT_MIN_DOC_FREQ};

#[derive(Debug, Parser)]
#[command(name = "emocascade", version, about = "Emotion scoring, cascade structure and multilevel regression toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand or validate an emotion lexicon.
    #[command(subcommand)]
    Lexicon(LexiconCmd),
    /// Score documents against a lexicon.
    Score(ScoreArgs),
    /// Cascade measures and their distributions.
    #[command(subcommand)]
    Cascade(CascadeCmd),
    /// LDA topic controls.
    #[command(subcommand)]
    Topics(TopicsCmd),
    /// Fit one regression specification to an analysis table.
    Regress(RegressArgs),
    /// Three-step mediation test for one mediator.
    Mediate(MediateArgs),
    /// Hausman test between a fixed-effects and a random-effects fit.
    Hausman(HausmanArgs),
    /// Welch two-sample t-test.
    Ttest(TtestArgs),
    /// Pairwise correlations of the emotion scores.
    Correlate(CorrelateArgs),
    /// Whether comments echo the dominant emotion of their article.
    Consistency(ConsistencyArgs),
    /// Synthetic data with planted parameters.
    #[command(subcommand)]
    Synth(SynthCmd),
    /// Manifest-driven end-to-end run.
    #[command(subcommand)]
    Pipeline(PipelineCmd),
}

#[derive(Debug, Subcommand)]
pub enum LexiconCmd {
    /// Grow a basic lexicon through embedding neighbours.
    Expand {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        basic: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ExpansionArgs,
        /// Per-iteration log as JSON.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Hold-out intensity error of the estimator on an annotated lexicon.
    Validate {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        /// Defaults to a tenth of the lexicon, at most 1000 words.
        #[arg(long)]
        holdout_frac: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        params: ExpansionArgs,
    },
}

#[derive(Debug, Args)]
pub struct ExpansionArgs {
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    #[arg(long, default_value_t = 1.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iter: usize,
    /// Neighbours mined per lexicon word.
    #[arg(long, default_value_t = 100)]
    pub candidates: usize,
}

impl ExpansionArgs {
    fn params(&self) -> ExpansionParams {
        ExpansionParams {
            candidates: self.candidates,
            n: self.n,
            m: self.m,
            alpha: self.alpha,
            max_iterations: self.max_iter,
        }
    }
}

#[derive(Debug, Args)]
pub struct ModifierArgs {
    #[arg(long, requires = "degrees")]
    pub negations: Option<PathBuf>,
    #[arg(long, requires = "negations")]
    pub degrees: Option<PathBuf>,
}

impl ModifierArgs {
    fn load(&self) -> Result<ModifierDictionaries> {
        match (&self.negations, &self.degrees) {
            (Some(n), Some(d)) => ModifierDictionaries::read(n, d),
            _ => Ok(ModifierDictionaries::default()),
        }
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub articles: PathBuf,
    #[arg(long)]
    pub lexicon: PathBuf,
    #[command(flatten)]
    pub modifiers: ModifierArgs,
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    /// Skip documents shorter than this many characters.
    #[arg(long)]
    pub min_chars: Option<u32>,
    /// Skip documents that carry a video.
    #[arg(long)]
    pub drop_video: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CascadeCmd {
    /// One row of cascade measures per article.
    Metrics {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        publish_times: PathBuf,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        friends: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Articles whose events failed validation, with the reason.
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Complementary CDF of one column of a metrics table.
    Ccdf {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long, default_value = "size")]
        column: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Articles as JSON lines.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Lexicon whose words are removed before fitting.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    #[command(flatten)]
    pub modifiers: ModifierArgs,
    #[arg(long, default_value_t = DEFAULT_MIN_DOC_FREQ)]
    pub min_doc_freq: f64,
    #[arg(long, default_value_t = 800)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Document-topic prior; 50/K when omitted.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
}

impl CorpusArgs {
    fn load(&self) -> Result<(Vec<String>, crate::topics::Corpus)> {
        let docs = read_documents(&self.corpus)?;
        let lexicon = self.lexicon.as_deref().map(Lexicon::read).transpose()?;
        let tokens = content_tokens(&docs, &self.modifiers.load()?);
        let corpus = preprocess(&tokens, lexicon.as_ref(), self.min_doc_freq)?;
        Ok((docs.into_iter().map(|d| d.id).collect(), corpus))
    }

    fn config(&self, k: usize) -> LdaConfig {
        LdaConfig {
            k,
            iterations: self.iterations,
            seed: self.seed,
            alpha: self.alpha,
            beta: self.beta,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum TopicsCmd {
    /// Fit a K-topic model; writes the model and per-article shares.
    Fit {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        k: usize,
        /// Model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Choose K by held-out perplexity.
    Select {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        ks: Vec<usize>,
        /// Perplexity curve table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Topic shares for new articles under a saved model.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        articles: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct RegressArgs {
    /// Analysis table.
    #[arg(long)]
    pub table: PathBuf,
    #[arg(long)]
    pub outcome: Outcome,
    #[arg(long, default_value = "main")]
    pub spec: Spec,
    /// Estimator for the main and degree specifications: reml, ml or ols.
    #[arg(long, default_value = "reml")]
    pub method: Method,
    /// Emotions with publisher-varying slopes (random-slopes only).
    #[arg(long, value_delimiter = ',')]
    pub slopes: Vec<Emotion>,
    #[arg(long, default_value_t = 2)]
    pub min_group_size: usize,
    /// Coefficient table (estimate, SE, stars).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Full fit as JSON, the input of `hausman`.
    #[arg(long)]
    pub fit: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MediateArgs {
    #[arg(long)]
    pub table: PathBuf,
    /// Column of the analysis table, e.g. avg_age, avg_friends, weak_tie_prop.
    #[arg(long)]
    pub mediator: String,
    #[arg(long, default_value = "size")]
    pub outcome: Outcome,
    /// Emotions to test; all eight when omitted.
    #[arg(long, value_delimiter = ',')]
    pub emotions: Vec<Emotion>,
    #[arg(long, default_value = "mixed")]
    pub mode: MediationMode,
    #[arg(long, default_value_t = 2)]
    pub min_group_size: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HausmanArgs {
    /// Fixed-effects fit JSON.
    #[arg(long)]
    pub fe: PathBuf,
    /// Random-effects fit JSON.
    #[arg(long)]
    pub re: PathBuf,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Column to read from tabular inputs; otherwise one value per line.
    #[arg(long)]
    pub column: Option<String>,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Score table from `score`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsistencyArgs {
    /// Article score table from `score`.
    #[arg(long)]
    pub articles: PathBuf,
    /// Comment score table from `score`.
    #[arg(long)]
    pub comments: PathBuf,
    /// Comment documents, for their article links.
    #[arg(long)]
    pub comment_docs: PathBuf,
    #[arg(long, default_value_t = DEFAULT_Z_THRESHOLD)]
    pub z_threshold: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCmd {
    /// Every input file of the pipeline plus a `truth/` directory and a
    /// ready-to-run manifest.
    All {
        /// TOML overrides; built-in defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Subcommand)]
pub enum PipelineCmd {
    Run {
        #[arg(long, default_value = "manifest.toml")]
        manifest: PathBuf,
    },
    /// Cache state of each stage for the manifest's current inputs.
    Status {
        #[arg(long, default_value = "manifest.toml")]
        manifest: PathBuf,
    },
}

fn emit(table: &Table, out: Option<&Path>) -> Result<()> {
    match out {
        Some(p) => table.write(p),
        None => {
            print!("{}", table.to_tsv_string());
            Ok(())
        }
    }
}

fn emotion_names(list: &[Emotion]) -> Vec<&'static str> {
    let list = if list.is_empty() { &Emotion::ALL[..] } else { list };
    list.iter().map(|e| e.name()).collect()
}

fn read_sample(path: &Path, column: Option<&str>) -> Result<Vec<f64>> {
    if let Some(c) = column {
        return Table::read(path)?.numeric_column(c);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_number(line) {
            Some(v) => out.push(v),
            None if i == 0 => {} // header
            None => return Err(Error::parse(path, format!("line {}: `{line}` is not a number", i + 1))),
        }
    }
    Ok(out)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lexicon(LexiconCmd::Expand {
            embeddings,
            basic,
            out,
            params,
            log,
        }) => {
            let store = EmbeddingStore::read(&embeddings)?;
            let basic = Lexicon::read(&basic)?;
            let (lexicon, history) = expand_lexicon(&store, &basic, &params.params())?;
            lexicon.write(&out)?;
            if let Some(p) = log {
                std::fs::write(&p, serde_json::to_string_pretty(&history)? + "\n").map_err(|e| Error::io(&p, e))?;
            }
            println!("{} words ({} basic) after {} iterations", lexicon.len(), basic.len(), history.iterations.len());
        }
        Command::Lexicon(LexiconCmd::Validate {
            embeddings,
            lexicon,
            holdout_frac,
            seed,
            params,
        }) => {
            let store = EmbeddingStore::read(&embeddings)?;
            let lexicon = Lexicon::read(&lexicon)?;
            let frac = holdout_frac.unwrap_or(default_holdout_size(lexicon.len()) as f64 / lexicon.len().max(1) as f64);
            let mae = validate_holdout(&store, &lexicon, frac, seed, &params.params())?;
            println!("holdout_frac\t{}\nmae\t{}", num(frac), num(mae));
        }
        Command::Score(a) => {
            let lexicon = Lexicon::read(&a.lexicon)?;
            let mods = a.modifiers.load()?;
            let scorer = EmotionScorer::new(&lexicon, &mods, a.window);
            for w in scorer.conflicts() {
                log::warn!("`{w}` is both a lexicon word and a modifier; treated as a modifier");
            }
            let filter = DocumentFilter {
                min_chars: a.min_chars,
                drop_video: a.drop_video,
            };
            let docs: Vec<_> = read_documents(&a.articles)?.into_iter().filter(|d| filter.keep(d)).collect();
            emit(&score_table(&scorer.score_corpus(&docs), true)?, a.out.as_deref())?;
        }
        Command::Cascade(CascadeCmd::Metrics {
            events,
            publish_times,
            profiles,
            friends,
            out,
            errors,
        }) => {
            let events = read_events(&events)?;
            let times = read_publish_times(&publish_times)?;
            let profiles = profiles.as_deref().map(read_profiles).transpose()?.unwrap_or_default();
            let friends = friends.as_deref().map(read_friendships).transpose()?.unwrap_or_default();
            let mut ok = Vec::new();
            let mut failed = Table::new(["article_id", "error"]);
            for r in analyze_all(&events, &times, &profiles, &friends) {
                match r.result {
                    Ok(m) => ok.push(m),
                    Err(e) => failed.push(vec![r.article_id, e.to_string()])?,
                }
            }
            if !failed.is_empty() {
                log::warn!("{} cascades failed validation", failed.len());
            }
            if let Some(p) = errors {
                failed.write(&p)?;
            }
            emit(&metrics_table(&ok), out.as_deref())?;
        }
        Command::Cascade(CascadeCmd::Ccdf { metrics, column, out }) => {
            let t = Table::read(&metrics)?;
            emit(&ccdf_table(&t.numeric_column(&column)?)?, out.as_deref())?;
        }
        Command::Topics(TopicsCmd::Fit { corpus, k, out }) => {
            let (ids, c) = corpus.load()?;
            let model = fit_lda(&c, &corpus.config(k))?;
            model.save(&out)?;
            let mut cols = vec!["article_id".to_string()];
            cols.extend((0..k).map(|j| format!("topic_{j}")));
            let mut t = Table::new(cols);
            for (id, theta) in ids.into_iter().zip(model.training_doc_topics()) {
                let mut row = vec![id];
                row.extend(theta.iter().map(|v| num(*v)));
                t.push(row)?;
            }
            t.write(&out.join("doc_topics.tsv"))?;
            println!("fitted {k} topics over {} words", c.vocab_size());
        }
        Command::Topics(TopicsCmd::Select { corpus, ks, out }) => {
            let (_, c) = corpus.load()?;
            let sel = select_k(&c, &ks, &corpus.config(ks[0]))?;
            let mut t = Table::new(["k", "perplexity"]);
            for (k, p) in &sel.curve {
                t.push(vec![k.to_string(), num(*p)])?;
            }
            emit(&t, out.as_deref())?;
            eprintln!("best k: {}", sel.best_k);
        }
        Command::Topics(TopicsCmd::Infer {
            model,
            articles,
            seed,
            out,
        }) => {
            let model = TopicModel::load(&model)?;
            let docs = read_documents(&articles)?;
            let tokens: Vec<Vec<&str>> = docs.iter().map(|d| d.tokens.iter().map(String::as_str).collect()).collect();
            let mut cols = vec!["article_id".to_string()];
            cols.extend((0..model.k()).map(|j| format!("topic_{j}")));
            let mut t = Table::new(cols);
            for (d, theta) in docs.iter().zip(model.infer_all(&tokens, seed)) {
                let mut row = vec![d.id.clone()];
                row.extend(theta.iter().map(|v| num(*v)));
                t.push(row)?;
            }
            emit(&t, out.as_deref())?;
        }
        Command::Regress(a) => {
            let table = Table::read(&a.table)?;
            let opts = DesignOptions {
                min_group_size: a.min_group_size,
            };
            let built = build_design(&table, a.outcome, a.spec, &opts)?;
            if built.dropped_rows > 0 {
                log::info!("{} rows dropped for missing values or small publishers", built.dropped_rows);
            }
            let slopes: Vec<&str> = a.slopes.iter().map(|e| e.name()).collect();
            let fit = fit_specification(&built.design, a.spec, a.method, &slopes)?;
            if let Some(p) = &a.fit {
                fit.write_json(p)?;
            }
            emit(&fit.coefficient_table(), a.out.as_deref())?;
            if a.out.is_some() {
                print!("{}", fit.summary_table().to_tsv_string());
            }
        }
        Command::Mediate(a) => {
            let table = Table::read(&a.table)?;
            let opts = DesignOptions {
                min_group_size: a.min_group_size,
            };
            let built = build_design(&table, a.outcome, Spec::Main, &opts)?;
            let values = table.numeric_column(&a.mediator)?;
            let mediator: Vec<f64> = built.rows.iter().map(|&i| values[i]).collect();
            let report = mediation_analysis(&built.design, &a.mediator, &mediator, &emotion_names(&a.emotions), a.mode)?;
            if report.dropped_rows > 0 {
                log::info!("{} rows without a mediator value dropped", report.dropped_rows);
            }
            emit(&report.to_table(), a.out.as_deref())?;
        }
        Command::Hausman(a) => {
            let h = hausman_test(&FitResult::read_json(&a.fe)?, &FitResult::read_json(&a.re)?)?;
            println!("statistic\t{}\ndof\t{}\np_value\t{}", num(h.statistic), h.dof, num(h.p_value));
        }
        Command::Ttest(a) => {
            let r = welch_t_test(&read_sample(&a.a, a.column.as_deref())?, &read_sample(&a.b, a.column.as_deref())?)?;
            println!(
                "mean_a\t{}\nmean_b\t{}\nt\t{}\ndof\t{}\np_value\t{}",
                num(r.mean_a),
                num(r.mean_b),
                num(r.t),
                num(r.dof),
                num(r.p_value)
            );
        }
        Command::Correlate(a) => {
            let t = Table::read(&a.scores)?;
            // Raw columns when present; correlations are scale-free either way.
            let raw = if t.has_column("raw_anxiety") { raw_matrix(&t)? } else { EmotionMatrix::from_table(&t, true)? };
            emit(&correlation_table(&raw)?, a.out.as_deref())?;
        }
        Command::Consistency(a) => {
            let articles = EmotionMatrix::from_table(&Table::read(&a.articles)?, true)?;
            let comments = EmotionMatrix::from_table(&Table::read(&a.comments)?, true)?;
            let links: std::collections::HashMap<String, String> = read_documents(&a.comment_docs)?
                .into_iter()
                .filter_map(|d| d.article_id.map(|art| (d.id, art)))
                .collect();
            let article_of: Vec<String> = comments
                .ids
                .iter()
                .map(|id| links.get(id).cloned().unwrap_or_else(|| "NA".into()))
                .collect();
            let rows = comment_consistency(&articles, &comments, &article_of, a.z_threshold)?;
            emit(&consistency_table(&rows), a.out.as_deref())?;
        }
        Command::Synth(SynthCmd::All { config, out_dir, seed }) => {
            let mut config = match config {
                Some(p) => SynthConfig::read(&p)?,
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                config.seed = s;
            }
            let s = write_world(&generate(&config)?, &out_dir)?;
            println!(
                "{} articles, {} comments, {} share events, {} users, {} words -> {}",
                s.articles,
                s.comments,
                s.events,
                s.users,
                s.vocabulary,
                s.out_dir.display()
            );
        }
        Command::Pipeline(PipelineCmd::Run { manifest }) => {
            let report = run_pipeline(&Manifest::load(&manifest)?)?;
            for s in &report.stages {
                println!("{:<12} {:?}", s.name, s.status);
            }
            if let Some(r) = &report.recovery {
                println!("planted signs recovered: {}", r.all_signs_recovered);
            }
        }
        Command::Pipeline(PipelineCmd::Status { manifest }) => {
            for s in pipeline_status(&Manifest::load(&manifest)?)? {
                println!("{:<12} {:<8} {}", s.name, format!("{:?}", s.state).to_lowercase(), &s.key[..12]);
            }
        }
    }
    Ok(())
}

fn raw_matrix(t: &Table) -> Result<EmotionMatrix> {
    let mut renamed: Vec<String> = vec!["id".into()];
    renamed.extend(Emotion::ALL.iter().map(|e| e.name().to_string()));
    let mut out = Table::new(renamed);
    let ids = t.text_column("id")?;
    let cols: Vec<Vec<f64>> = Emotion::ALL
        .iter()
        .map(|e| t.numeric_column(&format!("raw_{}", e.name())))
        .collect::<Result<_>>()?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(cols.iter().map(|c| c[i].to_string()));
        out.push(row)?;
    }
    EmotionMatrix::from_table(&out, false)
}
