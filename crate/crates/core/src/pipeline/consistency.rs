use std::collections::HashMap;

use serde::Serialize;

use crate::emotion::{Emotion, EmotionVector, N_EMOTIONS};
use crate::error::{Error, Result};
use crate::scorer::EmotionMatrix;
use crate::table::{num, Table};

pub const DEFAULT_Z_THRESHOLD: f64 = 1.96;

/// Comment reaction to the articles that stand out on exactly one emotion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub emotion: Emotion,
    /// Articles whose only z-score above the threshold is this emotion.
    pub articles: usize,
    pub comments: usize,
    /// Mean comment z-score per emotion; `None` without comments.
    pub mean_comment_z: Option<EmotionVector>,
    pub top_emotion: Option<Emotion>,
    /// Whether the comments' highest mean is the article's emotion.
    pub matched: Option<bool>,
}

/// Groups articles with exactly one emotion z-score above `threshold` by
/// that emotion and averages the standardised scores of their comments.
/// `comment_articles[i]` names the article comment `i` belongs to.
pub fn comment_consistency(
    articles: &EmotionMatrix,
    comments: &EmotionMatrix,
    comment_articles: &[String],
    threshold: f64,
) -> Result<Vec<ConsistencyRow>> {
    if !articles.standardized || !comments.standardized {
        return Err(Error::invalid("article and comment scores must be standardised"));
    }
    if comment_articles.len() != comments.len() {
        return Err(Error::invalid("one article id is needed per comment"));
    }
    let mut group: HashMap<&str, usize> = HashMap::new();
    let mut counts = [0usize; N_EMOTIONS];
    for (id, z) in articles.ids.iter().zip(&articles.rows) {
        let above: Vec<usize> = (0..N_EMOTIONS).filter(|&k| z[k] > threshold).collect();
        if let [k] = above[..] {
            group.insert(id, k);
            counts[k] += 1;
        }
    }
    let mut sums = [EmotionVector::ZERO; N_EMOTIONS];
    let mut n = [0usize; N_EMOTIONS];
    for (a, z) in comment_articles.iter().zip(&comments.rows) {
        if let Some(&k) = group.get(a.as_str()) {
            sums[k] += *z;
            n[k] += 1;
        }
    }
    Ok(Emotion::ALL
        .iter()
        .map(|&e| {
            let k = e.index();
            let mean = (n[k] > 0).then(|| sums[k] * (1.0 / n[k] as f64));
            let top = mean.map(|m| {
                let mut best = 0;
                for j in 1..N_EMOTIONS {
                    if m[j] > m[best] {
                        best = j;
                    }
                }
                Emotion::ALL[best]
            });
            ConsistencyRow {
                emotion: e,
                articles: counts[k],
                comments: n[k],
                mean_comment_z: mean,
                top_emotion: top,
                matched: top.map(|t| t == e),
            }
        })
        .collect())
}

pub fn consistency_table(rows: &[ConsistencyRow]) -> Table {
    let mut cols = vec!["emotion".to_string(), "articles".into(), "comments".into()];
    cols.extend(Emotion::ALL.iter().map(|e| format!("comment_z_{}", e.name())));
    cols.extend(["top_emotion".to_string(), "matched".into()]);
    let mut t = Table::new(cols);
    for r in rows {
        let mut row = vec![r.emotion.name().to_string(), r.articles.to_string(), r.comments.to_string()];
        match &r.mean_comment_z {
            Some(m) => row.extend(m.0.iter().map(|v| num(*v))),
            None => row.extend((0..N_EMOTIONS).map(|_| "NA".to_string())),
        }
        row.push(r.top_emotion.map_or("NA".into(), |e| e.name().to_string()));
        row.push(r.matched.map_or("NA".into(), |m| m.to_string()));
        t.push(row).expect("fixed width");
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: Vec<EmotionVector>) -> EmotionMatrix {
        EmotionMatrix {
            ids: (0..rows.len()).map(|i| format!("a{i}")).collect(),
            rows,
            standardized: true,
        }
    }

    #[test]
    fn only_single_extreme_articles_count() {
        let mut two = EmotionVector::single(Emotion::Joy, 3.0);
        two[Emotion::Anger] = 2.5;
        let arts = matrix(vec![EmotionVector::single(Emotion::Joy, 2.5), two, EmotionVector::single(Emotion::Love, 1.0)]);
        let mut cz = EmotionVector::single(Emotion::Joy, 1.0);
        cz[Emotion::Anger] = 0.5;
        let comments = matrix(vec![cz, EmotionVector::single(Emotion::Anger, 5.0), cz]);
        let links = vec!["a0".to_string(), "a1".into(), "a2".into()];
        let rows = comment_consistency(&arts, &comments, &links, DEFAULT_Z_THRESHOLD).unwrap();
        let joy = &rows[Emotion::Joy.index()];
        assert_eq!((joy.articles, joy.comments), (1, 1));
        assert_eq!(joy.matched, Some(true));
        let anger = &rows[Emotion::Anger.index()];
        assert_eq!(anger.articles, 0);
        assert_eq!(anger.matched, None);
        assert_eq!(consistency_table(&rows).len(), 8);
    }

    #[test]
    fn nothing_above_threshold() {
        let arts = matrix(vec![EmotionVector::single(Emotion::Joy, 1.9); 3]);
        let rows = comment_consistency(&arts, &matrix(vec![]), &[], 1.96).unwrap();
        assert!(rows.iter().all(|r| r.articles == 0 && r.matched.is_none()));
        let raw = EmotionMatrix::raw(vec![], vec![]);
        assert!(comment_consistency(&raw, &matrix(vec![]), &[], 1.96).is_err());
    }
}
