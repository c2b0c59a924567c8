//! Picks the number of topics by held-out perplexity on a corpus with five
//! planted topics, then fits the chosen model and lists its top words.

use emocascade::topics::{fit_lda, preprocess, select_k, LdaConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> emocascade::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let themes = ["sport", "money", "health", "weather", "school"];
    let docs: Vec<Vec<String>> = (0..300)
        .map(|d| {
            let main = d % themes.len();
            (0..60)
                .map(|_| {
                    let t = if rng.random::<f64>() < 0.85 { main } else { rng.random_range(0..themes.len()) };
                    format!("{}{}", themes[t], rng.random_range(0..30))
                })
                .collect()
        })
        .collect();
    let corpus = preprocess(&docs, None, 0.0)?;
    let base = LdaConfig {
        iterations: 200,
        ..LdaConfig::new(1, 9)
    };
    let sel = select_k(&corpus, &[2, 3, 5, 8], &base)?;
    for (k, p) in &sel.curve {
        println!("K = {k:<2} perplexity {p:.1}");
    }
    let model = fit_lda(&corpus, &LdaConfig { k: sel.best_k, ..base })?;
    for t in 0..model.k() {
        let words: Vec<&str> = model.top_words(t, 5).into_iter().map(|(w, _)| w).collect();
        println!("topic {t}: {}", words.join(" "));
    }
    Ok(())
}
