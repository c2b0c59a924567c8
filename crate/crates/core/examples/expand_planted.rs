//! Expands a basic lexicon over planted-cluster embeddings and reports how
//! many hidden emotion words were recovered.
//!
//!     cargo run --release --example expand_planted -- [clusters] [vocab]

use std::time::Instant;

use emocascade::lexicon::{expand_lexicon, ExpansionParams};
use emocascade::synth::{gen_embeddings, SynthConfig};

fn main() -> emocascade::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut config = SynthConfig::default();
    config.embeddings.clusters = args.first().copied().unwrap_or(100);
    config.embeddings.vocab_size = args.get(1).copied().unwrap_or(10_000);
    let planted = gen_embeddings(&config)?;
    let start = Instant::now();
    let (lexicon, log) = expand_lexicon(&planted.store, &planted.basic, &ExpansionParams::default())?;
    let elapsed = start.elapsed();

    let (mut found, mut total, mut err, mut n, mut err_own) = (0usize, 0usize, 0.0, 0usize, 0.0);
    for w in planted.hidden_words() {
        total += 1;
        if let Some(e) = lexicon.get(w) {
            found += 1;
            err += e.emotions.abs_diff_sum(planted.truth.intensities(w).unwrap());
            n += 8;
            let c = planted.clusters.iter().find(|c| c.members.iter().any(|m| m == w)).unwrap();
            err_own += (e.emotions[c.emotion] - planted.truth.intensities(w).unwrap()[c.emotion]).abs();
        }
    }
    let false_pos = lexicon.len() - planted.basic.len() - found;
    println!("iterations        {}", log.iterations.len());
    println!("lexicon size      {} (basic {})", lexicon.len(), planted.basic.len());
    println!("recall            {:.4} ({found}/{total})", found as f64 / total as f64);
    println!("false positives   {false_pos}");
    println!("intensity MAE     {:.4} (all emotions), {:.4} (planted emotion)", err / n.max(1) as f64, err_own / found.max(1) as f64);
    println!("expansion time    {elapsed:.2?}");
    Ok(())
}
