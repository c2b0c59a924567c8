//! Helpers shared by the integration test targets. Not every target uses
//! every helper.
#![allow(dead_code)]

use std::collections::VecDeque;
use std::path::{Path, PathBuf};

use emocascade::synth::{generate, write_world, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TINY_CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/tiny.toml");

/// Writes the tiny synthetic world (manifest included) into `dir`.
pub fn tiny_world(dir: &Path) -> PathBuf {
    let config = SynthConfig::read(Path::new(TINY_CONFIG)).unwrap();
    write_world(&generate(&config).unwrap(), dir).unwrap();
    dir.join("manifest.toml")
}

/// Random recursive tree on `n` nodes as a parent array rooted at 0.
pub fn random_parents(n: usize, rng: &mut impl Rng) -> Vec<Option<usize>> {
    (0..n).map(|v| if v == 0 { None } else { Some(rng.random_range(0..v)) }).collect()
}

/// Mean distance over ordered pairs, by a BFS from every node.
pub fn virality_by_bfs(parents: &[Option<usize>]) -> f64 {
    let n = parents.len();
    if n < 2 {
        return 0.0;
    }
    let mut adj = vec![Vec::new(); n];
    for (v, p) in parents.iter().enumerate() {
        if let Some(p) = *p {
            adj[v].push(p);
            adj[p].push(v);
        }
    }
    let mut total = 0u64;
    for s in 0..n {
        let mut dist = vec![usize::MAX; n];
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            for &w in &adj[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
            }
        }
        total += dist.iter().map(|&d| d as u64).sum::<u64>();
    }
    total as f64 / (n * (n - 1)) as f64
}

/// Documents over `k` disjoint vocabularies (`t{topic}w{word}`), each drawn
/// mostly from one topic, with the topic of every token.
pub fn planted_topics(k: usize, words: usize, docs: usize, len: usize, seed: u64) -> (Vec<Vec<String>>, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut out, mut truth) = (Vec::new(), Vec::new());
    for d in 0..docs {
        let main = d % k;
        let other = rng.random_range(0..k);
        let (mut doc, mut tz) = (Vec::new(), Vec::new());
        for _ in 0..len {
            let t = if rng.random::<f64>() < 0.8 { main } else { other };
            doc.push(format!("t{t}w{}", rng.random_range(0..words)));
            tz.push(t);
        }
        out.push(doc);
        truth.push(tz);
    }
    (out, truth)
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Share of tokens whose sampled topic matches the truth under the best
/// one-to-one relabelling.
pub fn matched_accuracy(assignments: &[Vec<u32>], truth: &[Vec<usize>], k: usize) -> f64 {
    let mut confusion = vec![vec![0usize; k]; k];
    let mut total = 0;
    for (zd, td) in assignments.iter().zip(truth) {
        for (&z, &t) in zd.iter().zip(td) {
            confusion[z as usize][t] += 1;
            total += 1;
        }
    }
    let best = permutations(k)
        .iter()
        .map(|p| (0..k).map(|z| confusion[z][p[z]]).sum::<usize>())
        .max()
        .unwrap_or(0);
    best as f64 / total.max(1) as f64
}

/// Every file under `dir`, relative path and bytes, sorted by path.
pub fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(dir, dir, &mut out);
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Panics naming the first file that differs between two snapshots.
pub fn assert_same_files(a: &[(PathBuf, Vec<u8>)], b: &[(PathBuf, Vec<u8>)]) {
    let names = |s: &[(PathBuf, Vec<u8>)]| s.iter().map(|f| f.0.clone()).collect::<Vec<_>>();
    assert_eq!(names(a), names(b));
    for (x, y) in a.iter().zip(b) {
        assert!(x.1 == y.1, "{} differs", x.0.display());
    }
}
