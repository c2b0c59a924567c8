use std::collections::{HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::tree::{CascadeTree, TieKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: String,
    pub age: f64,
    pub gender: Gender,
    pub friend_count: u32,
}

/// Undirected friendship pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Friendships {
    pairs: HashSet<(String, String)>,
}

impl Friendships {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &str, b: &str) -> (String, String) {
        if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        }
    }

    pub fn insert(&mut self, a: &str, b: &str) {
        if a != b {
            self.pairs.insert(Self::key(a, b));
        }
    }

    pub fn contains(&self, a: &str, b: &str) -> bool {
        self.pairs.contains(&Self::key(a, b))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Pairs in sorted order.
    pub fn sorted_pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<_> = self.pairs.iter().cloned().collect();
        v.sort();
        v
    }
}

impl<S: AsRef<str>> FromIterator<(S, S)> for Friendships {
    fn from_iter<I: IntoIterator<Item = (S, S)>>(iter: I) -> Self {
        let mut f = Friendships::new();
        for (a, b) in iter {
            f.insert(a.as_ref(), b.as_ref());
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeMetrics {
    pub article_id: String,
    /// Unique sharers.
    pub size: usize,
    /// Sharers plus the publisher root.
    pub node_count: usize,
    pub depth: usize,
    pub max_breadth: usize,
    pub time_per_level: f64,
    pub structural_virality: f64,
    /// `None` when the cascade has no user-to-user edge.
    pub weak_tie_proportion: Option<f64>,
    pub seed_clusterness: f64,
    pub avg_age: Option<f64>,
    pub avg_friend_count: Option<f64>,
    pub female_share: Option<f64>,
    /// Sharers without a profile.
    pub profiles_missing: usize,
}

/// Mean pairwise shortest-path distance over all ordered node pairs of the
/// tree, root included. Zero for fewer than two nodes.
pub fn structural_virality(tree: &CascadeTree) -> f64 {
    structural_virality_of_parents(&tree.parents())
}

/// Structural virality of a tree given as a parent array (exactly one `None`).
///
/// Each edge separates `s` nodes from `n - s`, and contributes to exactly
/// `s * (n - s)` unordered pairs, so the distance sum is linear in `n`.
pub fn structural_virality_of_parents(parents: &[Option<usize>]) -> f64 {
    let n = parents.len();
    if n < 2 {
        return 0.0;
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut root = 0;
    for (v, p) in parents.iter().enumerate() {
        match p {
            Some(p) => children[*p].push(v),
            None => root = v,
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::from([root]);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        queue.extend(children[v].iter().copied());
    }
    let mut subtree = vec![1u64; n];
    let mut wiener: u128 = 0;
    for &v in order.iter().rev() {
        if let Some(p) = parents[v] {
            let s = subtree[v];
            wiener += u128::from(s) * u128::from(n as u64 - s);
            subtree[p] += s;
        }
    }
    2.0 * wiener as f64 / (n as f64 * (n as f64 - 1.0))
}

/// Mean hours needed to reach each new depth, using the earliest arrival at
/// every level (depth 0 is the publish time).
pub fn time_per_level(tree: &CascadeTree) -> Result<f64> {
    let depth = tree.depth();
    if depth == 0 {
        return Err(Error::invalid(format!("cascade `{}` has no shares", tree.article_id)));
    }
    let mut earliest = vec![f64::INFINITY; depth + 1];
    earliest[0] = tree.publish_time;
    for n in tree.sharers() {
        earliest[n.depth] = earliest[n.depth].min(n.share_time);
    }
    let mut total = 0.0;
    for d in 1..=depth {
        let step = earliest[d] - earliest[d - 1];
        if step < 0.0 {
            return Err(Error::ClockSkew {
                article: tree.article_id.clone(),
                detail: format!("depth {d} reached {} hours before depth {}", -step, d - 1),
            });
        }
        total += step;
    }
    Ok(total / depth as f64)
}

/// Weak edges over user-to-user edges; publisher edges are excluded.
pub fn weak_tie_proportion(tree: &CascadeTree) -> Option<f64> {
    let (mut weak, mut total) = (0usize, 0usize);
    for n in tree.sharers() {
        match n.tie {
            Some(TieKind::Weak) => {
                weak += 1;
                total += 1;
            }
            Some(TieKind::Strong) => total += 1,
            _ => {}
        }
    }
    (total > 0).then(|| weak as f64 / total as f64)
}

/// Realised friend pairs among seeds over all possible seed pairs.
pub fn seed_clusterness<S: AsRef<str>>(seeds: &[S], friendships: &Friendships) -> f64 {
    let n = seeds.len();
    if n <= 1 {
        return 0.0;
    }
    let mut m = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if friendships.contains(seeds[i].as_ref(), seeds[j].as_ref()) {
                m += 1;
            }
        }
    }
    m as f64 / (n * (n - 1) / 2) as f64
}

pub fn metrics(
    tree: &CascadeTree,
    profiles: &HashMap<String, UserProfile>,
    friendships: &Friendships,
) -> Result<CascadeMetrics> {
    let seeds: Vec<&str> = tree.seeds().collect();
    let mut ages = Vec::new();
    let mut friends = Vec::new();
    let mut female = 0usize;
    let mut known_gender = 0usize;
    let mut missing = 0usize;
    for n in tree.sharers() {
        match profiles.get(&n.user_id) {
            Some(p) => {
                ages.push(p.age);
                friends.push(f64::from(p.friend_count));
                if p.gender != Gender::Unknown {
                    known_gender += 1;
                    if p.gender == Gender::Female {
                        female += 1;
                    }
                }
            }
            None => missing += 1,
        }
    }
    if missing > 0 {
        log::debug!(
            "cascade `{}`: {missing} of {} sharers have no profile",
            tree.article_id,
            tree.size()
        );
    }
    let avg = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(CascadeMetrics {
        article_id: tree.article_id.clone(),
        size: tree.size(),
        node_count: tree.node_count(),
        depth: tree.depth(),
        max_breadth: tree.max_breadth(),
        time_per_level: time_per_level(tree)?,
        structural_virality: structural_virality(tree),
        weak_tie_proportion: weak_tie_proportion(tree),
        seed_clusterness: seed_clusterness(&seeds, friendships),
        avg_age: avg(&ages),
        avg_friend_count: avg(&friends),
        female_share: (known_gender > 0).then(|| female as f64 / known_gender as f64),
        profiles_missing: missing,
    })
}

/// Empirical complementary CDF: for each distinct value `v`, the share of
/// samples `>= v`.
pub fn ccdf(values: &[f64]) -> Result<Vec<(f64, f64)>> {
    if values.is_empty() {
        return Err(Error::invalid("ccdf of an empty sample"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::invalid("ccdf input contains NaN"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        out.push((v, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == v {
            i += 1;
        }
    }
    Ok(out)
}
