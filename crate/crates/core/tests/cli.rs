mod common;

use std::path::Path;
use std::process::{Command, Output};

use emocascade::table::Table;

fn emocascade(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emocascade"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("EMOCASCADE_CACHE_DIR")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let o = emocascade(dir, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn world() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::TINY_CONFIG;
    ok(dir.path(), &["synth", "all", "--config", cfg, "--out-dir", "."]);
    dir
}

#[test]
fn module_subcommands_chain_together() {
    let w = world();
    let d = w.path();
    assert!(d.join("truth/params.json").is_file() && d.join("manifest.toml").is_file());

    ok(d, &["lexicon", "expand", "--embeddings", "embeddings.txt", "--basic", "basic_lexicon.tsv", "--out", "lex.tsv"]);
    let mae = ok(d, &["lexicon", "validate", "--embeddings", "embeddings.txt", "--lexicon", "basic_lexicon.tsv", "--seed", "3"]);
    assert!(mae.contains("mae\t"));

    let mods = ["--negations", "negations.txt", "--degrees", "degrees.tsv"];
    let mut args = vec!["score", "--articles", "articles.jsonl", "--lexicon", "lex.tsv", "--window", "3", "--out", "scores.tsv"];
    args.extend(mods);
    ok(d, &args);
    let scores = Table::read(&d.join("scores.tsv")).unwrap();
    assert_eq!(scores.columns().len(), 1 + 8 + 8 + 1);
    assert_eq!(scores.len(), 400);
    let corr = ok(d, &["correlate", "--scores", "scores.tsv"]);
    assert_eq!(corr.lines().count(), 9);

    ok(d, &[
        "cascade", "metrics", "--events", "events.jsonl", "--publish-times", "publish_times.tsv", "--profiles", "profiles.tsv",
        "--friends", "friendships.tsv", "--out", "metrics.tsv",
    ]);
    assert_eq!(Table::read(&d.join("metrics.tsv")).unwrap().len(), 400);
    let ccdf = ok(d, &["cascade", "ccdf", "--metrics", "metrics.tsv", "--column", "size"]);
    assert!(ccdf.starts_with("value\tccdf\n1\t1\n"));

    let mut args = vec!["topics", "fit", "--corpus", "articles.jsonl", "--lexicon", "lex.tsv", "--k", "5", "--iterations", "50", "--out", "model"];
    args.extend(mods);
    ok(d, &args);
    let inferred = ok(d, &["topics", "infer", "--model", "model", "--articles", "articles.jsonl"]);
    assert_eq!(inferred.lines().next().unwrap().split('\t').count(), 6);
    let curve = ok(d, &["topics", "select", "--corpus", "articles.jsonl", "--ks", "2,5", "--iterations", "30"]);
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn stats_subcommands_on_pipeline_output() {
    let w = world();
    let d = w.path();
    ok(d, &["pipeline", "run"]);
    let table = "results/join/analysis.tsv";
    ok(d, &["regress", "--table", table, "--outcome", "depth", "--spec", "main", "--out", "re.tsv", "--fit", "re.json"]);
    ok(d, &["regress", "--table", table, "--outcome", "depth", "--spec", "fe", "--out", "fe.tsv", "--fit", "fe.json"]);
    let re = Table::read(&d.join("re.tsv")).unwrap();
    assert_eq!(re.columns(), ["term", "estimate", "std_error", "statistic", "p_value", "stars"]);
    let h = ok(d, &["hausman", "--fe", "fe.json", "--re", "re.json"]);
    assert!(h.contains("p_value\t"));
    let slopes = ok(d, &["regress", "--table", table, "--outcome", "size", "--spec", "random-slopes", "--slopes", "anxiety"]);
    assert!(slopes.contains("anxiety"));
    let m = ok(d, &["mediate", "--table", table, "--mediator", "avg_age", "--outcome", "size", "--emotions", "anxiety,love", "--mode", "ols"]);
    assert_eq!(m.lines().count(), 3);
    let t = ok(d, &["ttest", "--a", "results/cascade/metrics.tsv", "--b", "results/cascade/metrics.tsv", "--column", "depth"]);
    assert!(t.contains("p_value\t1\n"));
}

#[test]
fn pipeline_status_and_cache_override() {
    let w = world();
    let d = w.path();
    let before = ok(d, &["pipeline", "status"]);
    assert!(before.lines().all(|l| l.contains("missing")), "{before}");
    let cache = d.join("elsewhere");
    let o = Command::new(env!("CARGO_BIN_EXE_emocascade"))
        .args(["pipeline", "run", "--manifest", "manifest.toml"])
        .current_dir(d)
        .env("RUST_LOG", "warn")
        .env("EMOCASCADE_CACHE_DIR", &cache)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(cache.join("score").is_dir());
    assert!(!d.join("results/.cache").exists());
    // the default cache is still empty
    assert!(ok(d, &["pipeline", "status"]).lines().all(|l| l.contains("missing")));
    let run = ok(d, &["pipeline", "run"]);
    assert!(run.contains("planted signs recovered: true"));
    assert!(ok(d, &["pipeline", "run"]).lines().filter(|l| !l.starts_with("planted")).all(|l| l.ends_with("Cached")));
}

#[test]
fn invalid_manifest_fails_with_the_field_name() {
    let w = world();
    let d = w.path();
    let text = std::fs::read_to_string(d.join("manifest.toml")).unwrap();
    std::fs::write(d.join("bad.toml"), text.replace("events = \"events.jsonl\"\n", "")).unwrap();
    let o = emocascade(d, &["pipeline", "run", "--manifest", "bad.toml"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("inputs.events"));

    std::fs::write(d.join("events.jsonl"), "garbage\n").unwrap();
    let o = emocascade(d, &["pipeline", "run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stage `cascade` failed"));
}

#[test]
fn bad_arguments_are_rejected() {
    let d = tempfile::tempdir().unwrap();
    assert!(!emocascade(d.path(), &["regress", "--table", "x", "--outcome", "nonsense"]).status.success());
    assert!(!emocascade(d.path(), &["score", "--articles", "missing.jsonl", "--lexicon", "missing.tsv"]).status.success());
    assert!(ok(d.path(), &["--help"]).contains("pipeline"));
}
