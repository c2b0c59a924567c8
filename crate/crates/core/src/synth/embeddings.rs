use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthConfig;
use crate::emotion::{Emotion, EmotionVector, N_EMOTIONS};
use crate::error::Result;
use crate::lexicon::{EmbeddingStore, Lexicon};
use crate::rng::{derive_seed, stream_rng};

/// One planted group of words sharing an emotion direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCluster {
    pub emotion: Emotion,
    pub intensity: f64,
    /// Members in generation order; the first `basic` are given to the basic lexicon.
    pub members: Vec<String>,
    pub basic: usize,
}

#[derive(Debug, Clone)]
pub struct PlantedEmbeddings {
    pub store: EmbeddingStore,
    /// Seed lexicon handed to expansion.
    pub basic: Lexicon,
    /// Every planted emotion word with its true intensities.
    pub truth: Lexicon,
    pub clusters: Vec<PlantedCluster>,
}

impl PlantedEmbeddings {
    /// Planted words outside the basic lexicon.
    pub fn hidden_words(&self) -> impl Iterator<Item = &str> {
        self.clusters.iter().flat_map(|c| c.members[c.basic..].iter().map(String::as_str))
    }
}

fn quantize(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn gaussian(rng: &mut impl Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Embeddings with planted emotion clusters. Cluster `c` carries emotion
/// `c mod 8`; members sit at seed direction + radius * N(0, I/D); the rest of
/// the vocabulary is random directions, nearly orthogonal in high dimension.
/// Word names carry no information about membership.
pub fn gen_embeddings(config: &SynthConfig) -> Result<PlantedEmbeddings> {
    config.validate()?;
    let e = &config.embeddings;
    let planted = e.clusters * e.cluster_size;
    let width = e.vocab_size.to_string().len();
    let mut rng = stream_rng(derive_seed(config.seed, 1), 0);
    let mut names: Vec<String> = (0..e.vocab_size).map(|i| format!("w{i:0width$}")).collect();
    names.shuffle(&mut rng);
    let basic_per = ((e.cluster_size as f64 * e.basic_share).round() as usize).clamp(1, e.cluster_size - 1);

    let seed = derive_seed(config.seed, 2);
    let clusters_and_vectors: Vec<(PlantedCluster, Vec<(EmotionVector, Vec<f32>)>)> = (0..e.clusters)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let direction = unit(gaussian(&mut rng, e.dim, 1.0));
            let intensity = quantize(rng.random_range(e.intensity_min..=e.intensity_max));
            let emotion = Emotion::ALL[c % N_EMOTIONS];
            let members: Vec<String> = names[c * e.cluster_size..(c + 1) * e.cluster_size].to_vec();
            let rows = (0..e.cluster_size)
                .map(|_| {
                    let offset = gaussian(&mut rng, e.dim, e.radius / (e.dim as f64).sqrt());
                    let v: Vec<f32> = direction.iter().zip(&offset).map(|(d, o)| (d + o) as f32).collect();
                    let jitter = if e.intensity_noise > 0.0 {
                        rng.random_range(-e.intensity_noise..=e.intensity_noise)
                    } else {
                        0.0
                    };
                    let w = quantize((intensity + jitter).clamp(0.01, 1.0));
                    (EmotionVector::single(emotion, w), v)
                })
                .collect();
            (
                PlantedCluster {
                    emotion,
                    intensity,
                    members,
                    basic: basic_per,
                },
                rows,
            )
        })
        .collect();

    let filler_seed = derive_seed(config.seed, 3);
    let fillers: Vec<Vec<f32>> = (planted..e.vocab_size)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(filler_seed, i as u64);
            gaussian(&mut rng, e.dim, 1.0 / (e.dim as f64).sqrt()).into_iter().map(|x| x as f32).collect()
        })
        .collect();

    let mut basic = Lexicon::new();
    let mut truth = Lexicon::new();
    let mut vectors: Vec<Option<Vec<f32>>> = vec![None; e.vocab_size];
    let mut clusters = Vec::with_capacity(e.clusters);
    for (c, (cluster, rows)) in clusters_and_vectors.into_iter().enumerate() {
        for (j, (iv, v)) in rows.into_iter().enumerate() {
            let word = &names[c * e.cluster_size + j];
            truth.insert_basic(word.clone(), iv)?;
            if j < cluster.basic {
                basic.insert_basic(word.clone(), iv)?;
            }
            vectors[c * e.cluster_size + j] = Some(v);
        }
        clusters.push(cluster);
    }
    for (i, v) in fillers.into_iter().enumerate() {
        vectors[planted + i] = Some(v);
    }
    // store rows in name order so the written file does not reveal clusters
    let mut order: Vec<usize> = (0..e.vocab_size).collect();
    order.sort_by(|&a, &b| names[a].cmp(&names[b]));
    let store = EmbeddingStore::from_pairs(
        e.dim,
        order.into_iter().map(|i| (names[i].clone(), vectors[i].take().expect("every row generated"))),
    )?;
    Ok(PlantedEmbeddings {
        store,
        basic,
        truth,
        clusters,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(radius: f64) -> SynthConfig {
        let mut c = SynthConfig::default();
        c.embeddings.vocab_size = 2000;
        c.embeddings.clusters = 40;
        c.embeddings.radius = radius;
        c
    }

    #[test]
    fn zero_radius_members_coincide() {
        let p = gen_embeddings(&small(0.0)).unwrap();
        let c = &p.clusters[3];
        let first = p.store.vector(&c.members[0]).unwrap().to_vec();
        for m in &c.members {
            assert_eq!(p.store.vector(m).unwrap(), first.as_slice());
        }
        let near = p.store.nearest_words(&c.members[0], c.members.len() - 1).unwrap();
        for (w, _) in near {
            assert!(c.members.contains(&w));
        }
    }

    #[test]
    fn deterministic_and_consistent() {
        let a = gen_embeddings(&small(0.8)).unwrap();
        let b = gen_embeddings(&small(0.8)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        a.store.write(&dir.path().join("a.txt")).unwrap();
        b.store.write(&dir.path().join("b.txt")).unwrap();
        assert_eq!(std::fs::read(dir.path().join("a.txt")).unwrap(), std::fs::read(dir.path().join("b.txt")).unwrap());
        assert_eq!(a.truth.len(), 40 * 12);
        assert_eq!(a.basic.len(), 40 * 6);
        assert_eq!(a.hidden_words().count(), 40 * 6);
        for e in &a.truth {
            assert!(e.emotions.any_positive());
        }
    }

    #[test]
    fn fillers_are_nearly_orthogonal() {
        let p = gen_embeddings(&small(0.8)).unwrap();
        let planted = 40 * 12;
        let fillers: Vec<usize> = (0..p.store.len()).filter(|&i| !p.truth.contains(p.store.word(i))).take(200).collect();
        assert_eq!(p.store.len() - planted, 2000 - planted);
        let mut max = 0.0f64;
        for (a, &i) in fillers.iter().enumerate() {
            for &j in &fillers[a + 1..] {
                max = max.max(p.store.similarity(i, j).abs());
            }
        }
        assert!(max < 0.7, "{max}");
    }

    #[test]
    fn vocabulary_too_small() {
        let mut c = small(0.5);
        c.embeddings.vocab_size = 100;
        assert!(gen_embeddings(&c).is_err());
    }
}
