//! The eight discrete emotion dimensions and the intensity vector over them.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of discrete emotion dimensions.
pub const N_EMOTIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emotion {
    Anger,
    Anxiety,
    Sadness,
    Disgust,
    Joy,
    Love,
    Surprise,
    Anticipation,
}

impl Emotion {
    pub const ALL: [Emotion; N_EMOTIONS] = [
        Emotion::Anger,
        Emotion::Anxiety,
        Emotion::Sadness,
        Emotion::Disgust,
        Emotion::Joy,
        Emotion::Love,
        Emotion::Surprise,
        Emotion::Anticipation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Emotion::Anger => "anger",
            Emotion::Anxiety => "anxiety",
            Emotion::Sadness => "sadness",
            Emotion::Disgust => "disgust",
            Emotion::Joy => "joy",
            Emotion::Love => "love",
            Emotion::Surprise => "surprise",
            Emotion::Anticipation => "anticipation",
        }
    }
}

impl fmt::Display for Emotion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Emotion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Emotion::ALL
            .into_iter()
            .find(|e| e.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid(format!("unknown emotion `{s}`")))
    }
}

/// Intensities for the eight emotions, in [`Emotion::ALL`] order.
///
/// Word-level intensities live in `[0, 1]`; document-level sums are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EmotionVector(pub [f64; N_EMOTIONS]);

impl EmotionVector {
    pub const ZERO: EmotionVector = EmotionVector([0.0; N_EMOTIONS]);

    pub fn new(values: [f64; N_EMOTIONS]) -> Self {
        EmotionVector(values)
    }

    /// A vector with a single nonzero component.
    pub fn single(emotion: Emotion, value: f64) -> Self {
        let mut v = Self::ZERO;
        v[emotion] = value;
        v
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (Emotion, f64)> + '_ {
        Emotion::ALL.into_iter().zip(self.0.iter().copied())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn any_positive(&self) -> bool {
        self.0.iter().any(|&v| v > 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn abs_diff_sum(&self, other: &EmotionVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// True when every component lies in `[0, 1]`.
    pub fn is_word_level(&self) -> bool {
        self.0.iter().all(|v| (0.0..=1.0).contains(v))
    }
}

impl Index<Emotion> for EmotionVector {
    type Output = f64;

    fn index(&self, e: Emotion) -> &f64 {
        &self.0[e.index()]
    }
}

impl IndexMut<Emotion> for EmotionVector {
    fn index_mut(&mut self, e: Emotion) -> &mut f64 {
        &mut self.0[e.index()]
    }
}

impl Index<usize> for EmotionVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.0[k]
    }
}

impl IndexMut<usize> for EmotionVector {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.0[k]
    }
}

impl Add for EmotionVector {
    type Output = EmotionVector;

    fn add(mut self, rhs: EmotionVector) -> EmotionVector {
        self += rhs;
        self
    }
}

impl AddAssign for EmotionVector {
    fn add_assign(&mut self, rhs: EmotionVector) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Mul<f64> for EmotionVector {
    type Output = EmotionVector;

    fn mul(mut self, rhs: f64) -> EmotionVector {
        for a in self.0.iter_mut() {
            *a *= rhs;
        }
        self
    }
}
