//! Hold-out check of the intensity estimator: hide part of an annotated
//! lexicon, predict it from embedding neighbours and report the MAE.

use emocascade::lexicon::{validate_holdout, ExpansionParams};
use emocascade::synth::{gen_embeddings, SynthConfig};

fn main() -> emocascade::Result<()> {
    let mut config = SynthConfig::default();
    config.embeddings.vocab_size = 8000;
    config.embeddings.clusters = 80;
    let planted = gen_embeddings(&config)?;
    for m in [1, 3, 10] {
        let params = ExpansionParams { m, ..ExpansionParams::default() };
        let mae = validate_holdout(&planted.store, &planted.truth, 0.1, 1, &params)?;
        println!("m = {m:<2} hold-out MAE {mae:.4}");
    }
    Ok(())
}
