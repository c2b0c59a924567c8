use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::publisher_id;
use super::SynthConfig;
use crate::cascade::{Friendships, Gender, ShareEvent, TieKind, UserProfile, PUBLISHER};
use crate::emotion::{EmotionVector, N_EMOTIONS};
use crate::error::Result;
use crate::numeric::{mean, population_sd};
use crate::rng::{derive_seed, stream_rng};

pub const PUBLISHER_TYPES: [&str; 3] = ["brand", "individual", "media"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publisher {
    pub id: String,
    pub ln_followers: f64,
    pub articles_per_day: f64,
    pub kind: String,
    /// Planted random intercept on the log offspring mean.
    pub intercept: f64,
}

/// An article as the cascade generator sees it.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleDraw {
    pub id: String,
    pub publisher: usize,
    /// Emotion z-scores.
    pub z: EmotionVector,
    pub topic_shares: Vec<f64>,
    pub publish_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeTruth {
    pub article_id: String,
    /// Linear predictor of the log offspring mean.
    pub eta: f64,
    pub seed_mean: f64,
    pub offspring_mean: f64,
    pub weak_prob: f64,
    pub age_tilt: f64,
    pub sharers: usize,
    /// The node cap stopped growth.
    pub truncated: bool,
}

#[derive(Debug, Clone)]
pub struct SyntheticCascades {
    pub events: Vec<ShareEvent>,
    pub profiles: Vec<UserProfile>,
    pub friendships: Friendships,
    pub truth: Vec<CascadeTruth>,
}

pub fn user_id(i: usize) -> String {
    format!("u{i:07}")
}

pub fn gen_publishers(config: &SynthConfig) -> Vec<Publisher> {
    let c = &config.cascades;
    let mut rng = stream_rng(derive_seed(config.seed, 20), 0);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..config.corpus.publishers)
        .map(|p| Publisher {
            id: publisher_id(p),
            ln_followers: 10.0 + normal.sample(&mut rng),
            articles_per_day: rng.random_range(0.5..5.0),
            kind: PUBLISHER_TYPES[rng.random_range(0..PUBLISHER_TYPES.len())].to_string(),
            intercept: c.sigma_mu * normal.sample(&mut rng),
        })
        .collect()
}

/// User attributes: age = minimum + Gamma(shape, scale), gender
/// Bernoulli(female share), friend count Poisson.
pub fn gen_population(config: &SynthConfig) -> Vec<UserProfile> {
    let u = &config.users;
    let seed = derive_seed(config.seed, 30);
    let gamma = Gamma::new(u.age_shape, u.age_scale).expect("validated");
    (0..u.population)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let age = u.age_min + gamma.sample(&mut rng);
            let gender = if rng.random::<f64>() < u.female_prob { Gender::Female } else { Gender::Male };
            let friend_count = poisson(&mut rng, u.friends_mean) as u32;
            UserProfile {
                user_id: user_id(i),
                age,
                gender,
                friend_count,
            }
        })
        .collect()
}

fn poisson(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(u64::MAX)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn dot(coefs: &[f64; N_EMOTIONS], z: &EmotionVector) -> f64 {
    coefs.iter().zip(z.0.iter()).map(|(b, x)| b * x).sum()
}

struct Sampler<'a> {
    age_std: &'a [f64],
}

impl Sampler<'_> {
    /// Draws an unused user, favouring older users when `tilt > 0`.
    fn draw(&self, used: &mut HashSet<u32>, tilt: f64, rng: &mut impl Rng) -> Option<u32> {
        let n = self.age_std.len();
        if used.len() >= n {
            return None;
        }
        let mut last = None;
        for _ in 0..64 {
            let i = rng.random_range(0..n) as u32;
            if used.contains(&i) {
                continue;
            }
            last = Some(i);
            if tilt == 0.0 || rng.random::<f64>() < sigmoid(tilt * self.age_std[i as usize]) {
                break;
            }
        }
        let i = match last {
            Some(i) => i,
            None => (0..n as u32).find(|i| !used.contains(i))?,
        };
        used.insert(i);
        Some(i)
    }
}

/// Galton-Watson cascades. The publisher posts to `1 + Poisson(seed_mean * e^eta)`
/// seed users; every sharer then recruits `Poisson(offspring_mean * e^eta)`
/// further sharers, where eta is linear in the article's emotion z-scores
/// plus the publisher's random intercept. Growth stops at the node cap.
pub fn gen_cascades(
    config: &SynthConfig,
    articles: &[ArticleDraw],
    publishers: &[Publisher],
    population: &[UserProfile],
) -> Result<SyntheticCascades> {
    config.validate()?;
    let c = &config.cascades;
    let beta = config.cascades.beta.to_array()?;
    let weak_tilt = c.weak_tilt.to_array()?;
    let age_tilt = config.users.age_tilt.to_array()?;
    let ages: Vec<f64> = population.iter().map(|p| p.age).collect();
    let (mu, sd) = (mean(&ages), population_sd(&ages));
    let age_std: Vec<f64> = ages.iter().map(|a| if sd > 0.0 { (a - mu) / sd } else { 0.0 }).collect();
    let sampler = Sampler { age_std: &age_std };
    let lnf: Vec<f64> = publishers.iter().map(|p| p.ln_followers).collect();
    let lnf_mean = if lnf.is_empty() { 0.0 } else { mean(&lnf) };
    let delay = Exp::new(1.0 / c.delay_mean).expect("validated");
    let seed = derive_seed(config.seed, 40);

    let per_article: Vec<(Vec<ShareEvent>, Vec<(u32, u32)>, CascadeTruth)> = articles
        .par_iter()
        .enumerate()
        .map(|(a, art)| {
            let mut rng = stream_rng(seed, a as u64);
            let publisher = &publishers[art.publisher];
            let topic: f64 = c.topic_effects.iter().zip(&art.topic_shares).map(|(b, s)| b * s).sum();
            let eta = dot(&beta, &art.z) + topic + c.follower_effect * (publisher.ln_followers - lnf_mean) + publisher.intercept;
            let seed_mean = c.seed_mean * eta.exp();
            let offspring_mean = c.offspring_mean * eta.exp();
            let weak_prob = if c.weak_prob <= 0.0 || c.weak_prob >= 1.0 {
                c.weak_prob
            } else {
                sigmoid(logit(c.weak_prob) + dot(&weak_tilt, &art.z))
            };
            let tilt = dot(&age_tilt, &art.z);

            let mut used = HashSet::new();
            let mut events = Vec::new();
            let mut pairs = Vec::new();
            // (user, share time)
            let mut queue: Vec<(u32, f64)> = Vec::new();
            let mut truncated = false;
            let n_seeds = 1 + poisson(&mut rng, seed_mean);
            for _ in 0..n_seeds {
                if queue.len() >= c.node_cap {
                    truncated = true;
                    break;
                }
                let Some(u) = sampler.draw(&mut used, tilt, &mut rng) else {
                    truncated = true;
                    break;
                };
                let t = art.publish_time + delay.sample(&mut rng);
                events.push(ShareEvent {
                    article_id: art.id.clone(),
                    sender_id: PUBLISHER.to_string(),
                    receiver_id: user_id(u as usize),
                    timestamp: t,
                    tie: TieKind::Publisher,
                });
                queue.push((u, t));
            }
            let seeds: Vec<u32> = queue.iter().map(|q| q.0).collect();
            for (i, &a) in seeds.iter().enumerate().take(200) {
                for &b in seeds.iter().take(200).skip(i + 1) {
                    if rng.random::<f64>() < c.seed_friend_prob {
                        pairs.push((a, b));
                    }
                }
            }
            let mut head = 0;
            'grow: while head < queue.len() && !truncated {
                let (parent, t0) = queue[head];
                head += 1;
                let k = poisson(&mut rng, offspring_mean);
                for _ in 0..k {
                    if queue.len() >= c.node_cap {
                        truncated = true;
                        break 'grow;
                    }
                    let Some(u) = sampler.draw(&mut used, tilt, &mut rng) else {
                        truncated = true;
                        break 'grow;
                    };
                    let weak = rng.random::<f64>() < weak_prob;
                    if !weak {
                        pairs.push((parent, u));
                    }
                    let t = t0 + delay.sample(&mut rng);
                    events.push(ShareEvent {
                        article_id: art.id.clone(),
                        sender_id: user_id(parent as usize),
                        receiver_id: user_id(u as usize),
                        timestamp: t,
                        tie: if weak { TieKind::Weak } else { TieKind::Strong },
                    });
                    queue.push((u, t));
                }
            }
            let truth = CascadeTruth {
                article_id: art.id.clone(),
                eta,
                seed_mean,
                offspring_mean,
                weak_prob,
                age_tilt: tilt,
                sharers: queue.len(),
                truncated,
            };
            (events, pairs, truth)
        })
        .collect();

    let mut out = SyntheticCascades {
        events: Vec::new(),
        profiles: population.to_vec(),
        friendships: Friendships::new(),
        truth: Vec::with_capacity(articles.len()),
    };
    for (events, pairs, truth) in per_article {
        out.events.extend(events);
        for (a, b) in pairs {
            out.friendships.insert(&user_id(a as usize), &user_id(b as usize));
        }
        out.truth.push(truth);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{build_cascade, weak_tie_proportion};
    use std::collections::BTreeMap;

    fn config() -> SynthConfig {
        let mut c = SynthConfig::default();
        c.corpus.publishers = 20;
        c.corpus.articles_per_publisher = 10;
        c.users.population = 5000;
        c
    }

    fn draws(c: &SynthConfig, seed: u64) -> Vec<ArticleDraw> {
        let mut rng = stream_rng(seed, 0);
        (0..c.corpus.publishers * c.corpus.articles_per_publisher)
            .map(|i| {
                let mut z = EmotionVector::ZERO;
                for k in 0..N_EMOTIONS {
                    z[k] = rng.random_range(-2.0..2.0);
                }
                ArticleDraw {
                    id: format!("a{i}"),
                    publisher: i / c.corpus.articles_per_publisher,
                    z,
                    topic_shares: vec![],
                    publish_time: i as f64,
                }
            })
            .collect()
    }

    fn run(c: &SynthConfig) -> SyntheticCascades {
        let arts = draws(c, 1);
        gen_cascades(c, &arts, &gen_publishers(c), &gen_population(c)).unwrap()
    }

    fn trees(c: &SynthConfig, s: &SyntheticCascades) -> Vec<crate::cascade::CascadeTree> {
        let arts = draws(c, 1);
        let mut by: BTreeMap<&str, Vec<ShareEvent>> = BTreeMap::new();
        for e in &s.events {
            by.entry(e.article_id.as_str()).or_default().push(e.clone());
        }
        arts.iter().map(|a| build_cascade(&by[a.id.as_str()], a.publish_time).unwrap()).collect()
    }

    #[test]
    fn generated_logs_build_cleanly() {
        let c = config();
        let s = run(&c);
        for (t, truth) in trees(&c, &s).iter().zip(&s.truth) {
            assert_eq!(t.size(), truth.sharers);
            assert_eq!(t.duplicates_ignored(), 0);
        }
    }

    #[test]
    fn zero_offspring_gives_depth_one() {
        let mut c = config();
        c.cascades.offspring_mean = 0.0;
        let s = run(&c);
        assert!(trees(&c, &s).iter().all(|t| t.depth() == 1));
    }

    #[test]
    fn weak_probability_extremes() {
        let mut c = config();
        c.cascades.weak_prob = 0.0;
        let s = run(&c);
        assert!(trees(&c, &s).iter().all(|t| weak_tie_proportion(t).is_none_or(|p| p == 0.0)));
        c.cascades.weak_prob = 1.0;
        let s = run(&c);
        assert!(trees(&c, &s).iter().all(|t| weak_tie_proportion(t).is_none_or(|p| p == 1.0)));
    }

    #[test]
    fn cap_truncates() {
        let mut c = config();
        c.cascades.offspring_mean = 3.0;
        c.cascades.node_cap = 50;
        let s = run(&c);
        assert!(s.truth.iter().any(|t| t.truncated));
        assert!(s.truth.iter().all(|t| t.sharers <= 50));
    }

    #[test]
    fn deterministic() {
        let c = config();
        let (a, b) = (run(&c), run(&c));
        assert_eq!(a.events, b.events);
        assert_eq!(a.friendships, b.friendships);
    }

    #[test]
    fn population_moments() {
        let mut c = config();
        c.users.population = 10_000;
        let p = gen_population(&c);
        let n = p.len() as f64;
        let u = &c.users;
        let ages: Vec<f64> = p.iter().map(|x| x.age).collect();
        let (m, v) = (u.age_min + u.age_shape * u.age_scale, u.age_shape * u.age_scale * u.age_scale);
        assert!((mean(&ages) - m).abs() < 3.0 * (v / n).sqrt());
        let f = p.iter().filter(|x| x.gender == Gender::Female).count() as f64 / n;
        assert!((f - u.female_prob).abs() < 3.0 * (u.female_prob * (1.0 - u.female_prob) / n).sqrt());
        let fr: Vec<f64> = p.iter().map(|x| f64::from(x.friend_count)).collect();
        assert!((mean(&fr) - u.friends_mean).abs() < 3.0 * (u.friends_mean / n).sqrt());
    }
}
