//! Diffusion trees built from share-event logs, and the structural measures
//! computed on them: size, depth, maximum breadth, time per level,
//! structural virality, weak-tie share, seed clusterness and sharer
//! aggregates.

mod metrics;
mod tree;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;

pub use metrics::{
    ccdf, metrics, seed_clusterness, structural_virality, structural_virality_of_parents, time_per_level,
    weak_tie_proportion, CascadeMetrics, Friendships, Gender, UserProfile,
};
pub use tree::{build_cascade, CascadeNode, CascadeTree, ShareEvent, TieKind, PUBLISHER};

use crate::error::{Error, Result};
use crate::table::{num, opt_num, Table};

/// Column names of the metrics table, in order.
pub const METRIC_COLUMNS: [&str; 13] = [
    "article_id",
    "size",
    "node_count",
    "depth",
    "max_breadth",
    "time_per_level",
    "structural_virality",
    "weak_tie_prop",
    "clusterness",
    "avg_age",
    "avg_friends",
    "female_share",
    "profiles_missing",
];

pub fn read_events(path: &Path) -> Result<Vec<ShareEvent>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_events(path: &Path, events: &[ShareEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_publish_times(path: &Path) -> Result<HashMap<String, f64>> {
    let t = Table::read(path)?;
    let ids = t.text_column("article_id")?;
    let times = t.numeric_column("publish_time")?;
    Ok(ids.into_iter().map(String::from).zip(times).collect())
}

pub fn read_profiles(path: &Path) -> Result<HashMap<String, UserProfile>> {
    let t = Table::read(path)?;
    let ids = t.text_column("user_id")?;
    let ages = t.numeric_column("age")?;
    let genders = t.text_column("gender")?;
    let friends = t.numeric_column("friend_count")?;
    let mut out = HashMap::with_capacity(ids.len());
    for i in 0..ids.len() {
        let gender = match genders[i].trim().to_ascii_lowercase().as_str() {
            "female" | "f" => Gender::Female,
            "male" | "m" => Gender::Male,
            _ => Gender::Unknown,
        };
        if !(ages[i] >= 0.0) || !(friends[i] >= 0.0) {
            return Err(Error::parse(path, format!("row {}: negative or missing age/friend count", i + 2)));
        }
        out.insert(
            ids[i].to_string(),
            UserProfile {
                user_id: ids[i].to_string(),
                age: ages[i],
                gender,
                friend_count: friends[i] as u32,
            },
        );
    }
    Ok(out)
}

pub fn read_friendships(path: &Path) -> Result<Friendships> {
    let t = Table::read(path)?;
    let cols = t.columns();
    if cols.len() < 2 {
        return Err(Error::parse(path, "expected two user id columns"));
    }
    let a = t.text_column(&cols[0].clone())?;
    let b = t.text_column(&cols[1].clone())?;
    Ok(a.into_iter().zip(b).collect())
}

/// Outcome of analysing one article's events.
#[derive(Debug)]
pub struct ArticleCascade {
    pub article_id: String,
    pub result: Result<CascadeMetrics>,
}

/// Groups events by article and computes metrics for every article, in
/// article-id order.
pub fn analyze_all(
    events: &[ShareEvent],
    publish_times: &HashMap<String, f64>,
    profiles: &HashMap<String, UserProfile>,
    friendships: &Friendships,
) -> Vec<ArticleCascade> {
    let mut grouped: BTreeMap<&str, Vec<ShareEvent>> = BTreeMap::new();
    for e in events {
        grouped.entry(e.article_id.as_str()).or_default().push(e.clone());
    }
    let grouped: Vec<(&str, Vec<ShareEvent>)> = grouped.into_iter().collect();
    grouped
        .par_iter()
        .map(|(article, evs)| {
            let result = publish_times
                .get(*article)
                .ok_or_else(|| Error::invalid(format!("no publish time for article `{article}`")))
                .and_then(|&t| build_cascade(evs, t))
                .and_then(|tree| metrics(&tree, profiles, friendships));
            ArticleCascade {
                article_id: article.to_string(),
                result,
            }
        })
        .collect()
}

pub fn metrics_table(rows: &[CascadeMetrics]) -> Table {
    let mut t = Table::new(METRIC_COLUMNS);
    for m in rows {
        t.push(vec![
            m.article_id.clone(),
            m.size.to_string(),
            m.node_count.to_string(),
            m.depth.to_string(),
            m.max_breadth.to_string(),
            num(m.time_per_level),
            num(m.structural_virality),
            opt_num(m.weak_tie_proportion),
            num(m.seed_clusterness),
            opt_num(m.avg_age),
            opt_num(m.avg_friend_count),
            opt_num(m.female_share),
            m.profiles_missing.to_string(),
        ])
        .expect("fixed width");
    }
    t
}

pub fn ccdf_table(values: &[f64]) -> Result<Table> {
    let finite: Vec<f64> = values.iter().copied().filter(|v| !v.is_nan()).collect();
    let mut t = Table::new(["value", "ccdf"]);
    for (v, f) in ccdf(&finite)? {
        t.push(vec![num(v), num(f)])?;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analyze_reports_per_article_errors() {
        let ev = |a: &str, s: &str, r: &str, t: f64, tie| ShareEvent {
            article_id: a.into(),
            sender_id: s.into(),
            receiver_id: r.into(),
            timestamp: t,
            tie,
        };
        let events = vec![
            ev("good", PUBLISHER, "u1", 1.0, TieKind::Publisher),
            ev("good", "u1", "u2", 2.0, TieKind::Weak),
            ev("bad", "ghost", "u3", 1.0, TieKind::Strong),
        ];
        let times: HashMap<String, f64> = [("good".to_string(), 0.0), ("bad".to_string(), 0.0)].into();
        let out = analyze_all(&events, &times, &HashMap::new(), &Friendships::new());
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].article_id, "bad");
        assert!(matches!(out[0].result, Err(Error::OrphanEvent { .. })));
        let good = out[1].result.as_ref().unwrap();
        assert_eq!(good.size, 2);
        assert_eq!(good.avg_age, None);
        let table = metrics_table(&[good.clone()]);
        let sv = table.numeric_column("structural_virality").unwrap()[0];
        assert!((sv - 4.0 / 3.0).abs() < 1e-5);
    }
}
