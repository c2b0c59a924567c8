pub mod cascade;
pub mod cli;
pub mod emotion;
pub mod error;
pub mod lexicon;
pub mod numeric;
pub mod pipeline;
pub mod rng;
pub mod scorer;
pub mod stats;
pub mod synth;
pub mod table;
pub mod topics;

pub use emotion::{Emotion, EmotionVector};
pub use error::{Error, Result};
