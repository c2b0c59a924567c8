//! Scores a few hand-written sentences with a tiny lexicon, showing how
//! negation and degree words inside the three-word window change the result.

use emocascade::lexicon::Lexicon;
use emocascade::scorer::{EmotionScorer, ModifierDictionaries};
use emocascade::{Emotion, EmotionVector};

fn main() -> emocascade::Result<()> {
    let mut lexicon = Lexicon::new();
    lexicon.insert_basic("worried", EmotionVector::single(Emotion::Anxiety, 0.8))?;
    lexicon.insert_basic("adore", EmotionVector::single(Emotion::Love, 0.9))?;
    lexicon.insert_basic("grief", EmotionVector::single(Emotion::Sadness, 0.7))?;
    let modifiers = ModifierDictionaries::new(
        ["not", "never"].map(String::from),
        [("very", 2.0), ("slightly", 0.5)].map(|(w, v)| (w.to_string(), v)),
    )?;
    let scorer = EmotionScorer::new(&lexicon, &modifiers, 3);

    for text in [
        "we are worried about the storm",
        "we are not worried about the storm",
        "we are very worried and never adore delays",
        "not not worried",
        "slightly worried but full of grief",
    ] {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let s = scorer.score_tokens(&tokens);
        let nonzero: Vec<String> = s.iter().filter(|(_, v)| *v != 0.0).map(|(e, v)| format!("{e}={v:+.2}")).collect();
        println!("{text:<45} {}", nonzero.join(" "));
    }
    Ok(())
}
