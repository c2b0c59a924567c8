//! Builds one diffusion tree from a share log and prints its structural
//! measures, then the complementary CDF of sizes over a batch of random trees.

use std::collections::HashMap;

use emocascade::cascade::{build_cascade, ccdf, metrics, structural_virality_of_parents, Friendships, ShareEvent, TieKind, PUBLISHER};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn share(sender: &str, receiver: &str, t: f64, tie: TieKind) -> ShareEvent {
    ShareEvent {
        article_id: "a1".into(),
        sender_id: sender.into(),
        receiver_id: receiver.into(),
        timestamp: t,
        tie,
    }
}

fn main() -> emocascade::Result<()> {
    let log = vec![
        share(PUBLISHER, "ann", 1.0, TieKind::Publisher),
        share(PUBLISHER, "bob", 1.5, TieKind::Publisher),
        share("ann", "cat", 2.0, TieKind::Strong),
        share("cat", "dan", 4.0, TieKind::Weak),
        share("dan", "eve", 7.0, TieKind::Strong),
        share("bob", "fay", 3.0, TieKind::Weak),
    ];
    let tree = build_cascade(&log, 0.0)?;
    let friends: Friendships = [("ann", "bob")].into_iter().collect();
    let m = metrics(&tree, &HashMap::new(), &friends)?;
    println!("size {}  depth {}  max breadth {}", m.size, m.depth, m.max_breadth);
    println!("structural virality {:.4}", m.structural_virality);
    println!("hours per level {:.3}", m.time_per_level);
    println!("weak-tie share {:.3}  seed clusterness {:.3}", m.weak_tie_proportion.unwrap_or(f64::NAN), m.seed_clusterness);

    // broadcast versus chain: same size, very different virality
    let star: Vec<Option<usize>> = (0..100).map(|v| if v == 0 { None } else { Some(0) }).collect();
    let chain: Vec<Option<usize>> = (0..100usize).map(|v| v.checked_sub(1)).collect();
    println!(
        "100 nodes: star {:.3}, chain {:.3}",
        structural_virality_of_parents(&star),
        structural_virality_of_parents(&chain)
    );

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let sizes: Vec<f64> = (0..2000).map(|_| (1.0 / rng.random::<f64>()).floor()).collect();
    println!("size CCDF (heavy tail):");
    for (v, f) in ccdf(&sizes)?.into_iter().filter(|(v, _)| [1.0, 2.0, 10.0, 100.0].contains(v)) {
        println!("  P(size >= {v}) = {f:.4}");
    }
    Ok(())
}
