use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sender id used for the article's publisher.
pub const PUBLISHER: &str = "PUBLISHER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieKind {
    Publisher,
    Strong,
    Weak,
}

/// One recorded share: `receiver` got the article from `sender` and shared it
/// at `timestamp` (hours).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareEvent {
    pub article_id: String,
    pub sender_id: String,
    pub receiver_id: String,
    pub timestamp: f64,
    pub tie: TieKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeNode {
    pub user_id: String,
    pub parent: Option<usize>,
    pub depth: usize,
    pub share_time: f64,
    /// Tie on the incoming edge; `None` for the root.
    pub tie: Option<TieKind>,
}

/// Diffusion tree rooted at a virtual publisher node (index 0, depth 0).
///
/// Nodes are stored parent-before-child.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeTree {
    pub article_id: String,
    pub publish_time: f64,
    nodes: Vec<CascadeNode>,
    index: HashMap<String, usize>,
    duplicates_ignored: usize,
}

impl CascadeTree {
    fn with_root(article_id: &str, publish_time: f64) -> Self {
        let root = CascadeNode {
            user_id: PUBLISHER.to_string(),
            parent: None,
            depth: 0,
            share_time: publish_time,
            tie: None,
        };
        let mut index = HashMap::new();
        index.insert(PUBLISHER.to_string(), 0);
        Self {
            article_id: article_id.to_string(),
            publish_time,
            nodes: vec![root],
            index,
            duplicates_ignored: 0,
        }
    }

    /// Builds a tree directly from `(user, parent index, share_time, tie)`
    /// rows; parents must precede children. Mostly useful in tests.
    pub fn from_parents(
        article_id: &str,
        publish_time: f64,
        rows: &[(String, usize, f64, TieKind)],
    ) -> Result<Self> {
        let mut tree = Self::with_root(article_id, publish_time);
        for (user, parent, t, tie) in rows {
            if *parent >= tree.nodes.len() {
                return Err(Error::invalid(format!("parent {parent} of `{user}` is not yet defined")));
            }
            if tree.index.contains_key(user) {
                return Err(Error::invalid(format!("duplicate node `{user}`")));
            }
            tree.attach(user.clone(), *parent, *t, *tie);
        }
        Ok(tree)
    }

    fn attach(&mut self, user: String, parent: usize, share_time: f64, tie: TieKind) {
        let depth = self.nodes[parent].depth + 1;
        self.index.insert(user.clone(), self.nodes.len());
        self.nodes.push(CascadeNode {
            user_id: user,
            parent: Some(parent),
            depth,
            share_time,
            tie: Some(tie),
        });
    }

    pub fn nodes(&self) -> &[CascadeNode] {
        &self.nodes
    }

    pub fn node(&self, user: &str) -> Option<&CascadeNode> {
        self.index.get(user).map(|&i| &self.nodes[i])
    }

    /// Unique sharers; the publisher root is not counted.
    pub fn size(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Nodes including the publisher root.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Node count per depth, index 0 being the root level.
    pub fn breadths(&self) -> Vec<usize> {
        let mut b = vec![0; self.depth() + 1];
        for n in &self.nodes {
            b[n.depth] += 1;
        }
        b
    }

    pub fn max_breadth(&self) -> usize {
        self.breadths().into_iter().skip(1).max().unwrap_or(0)
    }

    /// Depth-1 sharers.
    pub fn seeds(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().filter(|n| n.depth == 1).map(|n| n.user_id.as_str())
    }

    pub fn sharers(&self) -> impl Iterator<Item = &CascadeNode> {
        self.nodes.iter().skip(1)
    }

    pub fn duplicates_ignored(&self) -> usize {
        self.duplicates_ignored
    }

    pub fn parents(&self) -> Vec<Option<usize>> {
        self.nodes.iter().map(|n| n.parent).collect()
    }
}

/// Builds the diffusion tree of one article from its share events.
///
/// Events are processed in `(timestamp, receiver, sender)` order. A user's
/// first accepted share fixes their position; later shares by the same user
/// are ignored. Within one timestamp, events wait until their sender has been
/// placed, so the result does not depend on input order.
pub fn build_cascade(events: &[ShareEvent], publish_time: f64) -> Result<CascadeTree> {
    let first = events
        .first()
        .ok_or_else(|| Error::EmptyCascade(String::new()))?;
    let article = first.article_id.as_str();
    if !publish_time.is_finite() {
        return Err(Error::invalid(format!("publish time of `{article}` is not finite")));
    }
    for e in events {
        if e.article_id != article {
            return Err(Error::invalid(format!(
                "events for several articles (`{article}`, `{}`)",
                e.article_id
            )));
        }
        if e.receiver_id == e.sender_id || e.receiver_id == PUBLISHER {
            return Err(Error::invalid(format!(
                "`{article}`: invalid edge {} -> {}",
                e.sender_id, e.receiver_id
            )));
        }
        if !e.timestamp.is_finite() {
            return Err(Error::invalid(format!("`{article}`: non-finite timestamp")));
        }
        if (e.sender_id == PUBLISHER) != (e.tie == TieKind::Publisher) {
            return Err(Error::invalid(format!(
                "`{article}`: edge {} -> {} has tie {:?}",
                e.sender_id, e.receiver_id, e.tie
            )));
        }
    }

    let mut order: Vec<&ShareEvent> = events.iter().collect();
    order.sort_by(|a, b| {
        a.timestamp
            .total_cmp(&b.timestamp)
            .then_with(|| a.receiver_id.cmp(&b.receiver_id))
            .then_with(|| a.sender_id.cmp(&b.sender_id))
    });
    let receivers: HashSet<&str> = events.iter().map(|e| e.receiver_id.as_str()).collect();

    let mut tree = CascadeTree::with_root(article, publish_time);
    let mut start = 0;
    while start < order.len() {
        let t = order[start].timestamp;
        let end = start + order[start..].iter().take_while(|e| e.timestamp == t).count();
        let mut pending: Vec<&ShareEvent> = order[start..end].to_vec();
        loop {
            let mut waiting = Vec::new();
            let before = pending.len();
            for e in pending {
                if tree.index.contains_key(&e.receiver_id) {
                    tree.duplicates_ignored += 1;
                    log::debug!("`{article}`: repeated share by `{}` ignored", e.receiver_id);
                    continue;
                }
                match tree.index.get(&e.sender_id).copied() {
                    Some(parent) => {
                        let parent_time = tree.nodes[parent].share_time;
                        if e.timestamp < parent_time {
                            return Err(Error::ClockSkew {
                                article: article.to_string(),
                                detail: format!(
                                    "`{}` shared at {} before its source `{}` at {}",
                                    e.receiver_id, e.timestamp, e.sender_id, parent_time
                                ),
                            });
                        }
                        tree.attach(e.receiver_id.clone(), parent, e.timestamp, e.tie);
                    }
                    None => waiting.push(e),
                }
            }
            if waiting.is_empty() || waiting.len() == before {
                pending = waiting;
                break;
            }
            pending = waiting;
        }
        for e in pending {
            if tree.index.contains_key(&e.receiver_id) {
                tree.duplicates_ignored += 1;
                continue;
            }
            return Err(if receivers.contains(e.sender_id.as_str()) {
                Error::ClockSkew {
                    article: article.to_string(),
                    detail: format!(
                        "`{}` forwarded to `{}` at {} before sharing it",
                        e.sender_id, e.receiver_id, e.timestamp
                    ),
                }
            } else {
                Error::OrphanEvent {
                    article: article.to_string(),
                    sender: e.sender_id.clone(),
                }
            });
        }
        start = end;
    }
    Ok(tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ev(sender: &str, receiver: &str, t: f64, tie: TieKind) -> ShareEvent {
        ShareEvent {
            article_id: "art".into(),
            sender_id: sender.into(),
            receiver_id: receiver.into(),
            timestamp: t,
            tie,
        }
    }

    #[test]
    fn chain() {
        let events = vec![
            ev(PUBLISHER, "a", 1.0, TieKind::Publisher),
            ev("a", "b", 2.0, TieKind::Strong),
            ev("b", "c", 3.0, TieKind::Weak),
        ];
        let t = build_cascade(&events, 0.0).unwrap();
        assert_eq!(t.depth(), 3);
        assert_eq!(t.breadths(), vec![1, 1, 1, 1]);
        assert_eq!(t.size(), 3);
        assert_eq!(t.node_count(), 4);
    }

    #[test]
    fn star_and_chain() {
        let events = vec![
            ev(PUBLISHER, "a", 1.0, TieKind::Publisher),
            ev(PUBLISHER, "b", 1.0, TieKind::Publisher),
            ev(PUBLISHER, "c", 1.5, TieKind::Publisher),
            ev("a", "d", 2.0, TieKind::Strong),
            ev("a", "e", 2.5, TieKind::Weak),
        ];
        let t = build_cascade(&events, 0.0).unwrap();
        assert_eq!((t.size(), t.depth(), t.max_breadth()), (5, 2, 3));
        assert_eq!(t.node("d").unwrap().parent, Some(t.nodes().iter().position(|n| n.user_id == "a").unwrap()));
    }

    #[test]
    fn orphan_and_skew() {
        let orphan = vec![
            ev(PUBLISHER, "a", 1.0, TieKind::Publisher),
            ev("x", "b", 2.0, TieKind::Strong),
        ];
        assert!(matches!(build_cascade(&orphan, 0.0), Err(Error::OrphanEvent { .. })));

        let skew = vec![
            ev(PUBLISHER, "a", 3.0, TieKind::Publisher),
            ev("a", "b", 2.0, TieKind::Strong),
        ];
        assert!(matches!(build_cascade(&skew, 0.0), Err(Error::ClockSkew { .. })));

        let before_publish = vec![ev(PUBLISHER, "a", -1.0, TieKind::Publisher)];
        assert!(matches!(build_cascade(&before_publish, 0.0), Err(Error::ClockSkew { .. })));

        assert!(matches!(build_cascade(&[], 0.0), Err(Error::EmptyCascade(_))));
    }

    #[test]
    fn duplicate_shares_keep_first_position() {
        let events = vec![
            ev(PUBLISHER, "a", 1.0, TieKind::Publisher),
            ev(PUBLISHER, "b", 1.0, TieKind::Publisher),
            ev("a", "c", 2.0, TieKind::Strong),
            ev("b", "c", 3.0, TieKind::Weak),
        ];
        let t = build_cascade(&events, 0.0).unwrap();
        assert_eq!(t.size(), 3);
        assert_eq!(t.duplicates_ignored(), 1);
        assert_eq!(t.node("c").unwrap().tie, Some(TieKind::Strong));
    }

    #[test]
    fn equal_timestamps_resolve_regardless_of_order() {
        // "b" sorts before "z" but depends on it
        let events = vec![
            ev("z", "b", 1.0, TieKind::Strong),
            ev(PUBLISHER, "z", 1.0, TieKind::Publisher),
        ];
        let t = build_cascade(&events, 0.0).unwrap();
        assert_eq!(t.node("b").unwrap().depth, 2);
        let mut rev = events.clone();
        rev.reverse();
        assert_eq!(build_cascade(&rev, 0.0).unwrap(), t);
    }

    #[test]
    fn rejects_mislabelled_ties() {
        let events = vec![ev(PUBLISHER, "a", 1.0, TieKind::Strong)];
        assert!(matches!(build_cascade(&events, 0.0), Err(Error::InvalidInput(_))));
    }
}
