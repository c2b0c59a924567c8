mod common;

use emocascade::cascade::{build_cascade, ccdf, structural_virality, structural_virality_of_parents, ShareEvent, TieKind, PUBLISHER};
use emocascade::lexicon::cosine_similarity;
use emocascade::scorer::{correlation_matrix, EmotionMatrix};
use emocascade::stats::{fit_fixed_effects, hausman_test, mediation_analysis, welch_t_test, DesignMatrix, MediationMode};
use emocascade::table::{num, parse_number};
use emocascade::topics::{doc_topics, TopicModel};
use emocascade::EmotionVector;
use proptest::prelude::*;

fn parents() -> impl Strategy<Value = Vec<Option<usize>>> {
    proptest::collection::vec(any::<u32>(), 1..120).prop_map(|raw| {
        raw.iter()
            .enumerate()
            .map(|(v, r)| if v == 0 { None } else { Some(*r as usize % v) })
            .collect()
    })
}

/// Share events for a parent array rooted at the publisher, shuffled.
fn events(parents: &[Option<usize>], order: &[u32]) -> Vec<ShareEvent> {
    let name = |v: usize| if v == 0 { PUBLISHER.to_string() } else { format!("u{v}") };
    let mut evs: Vec<ShareEvent> = parents
        .iter()
        .enumerate()
        .skip(1)
        .map(|(v, p)| {
            let p = p.unwrap();
            ShareEvent {
                article_id: "a".into(),
                sender_id: name(p),
                receiver_id: name(v),
                timestamp: v as f64,
                tie: if p == 0 { TieKind::Publisher } else { TieKind::Strong },
            }
        })
        .collect();
    for (i, k) in order.iter().enumerate().take(evs.len()) {
        let j = *k as usize % evs.len();
        evs.swap(i, j);
    }
    evs
}

fn design(y: &[f64], x: &[f64], groups: usize) -> DesignMatrix {
    let labels: Vec<String> = (0..y.len()).map(|i| format!("g{}", i % groups)).collect();
    let mut d = DesignMatrix::new("y", y.to_vec(), &labels).unwrap();
    d.add_column("anxiety", x.to_vec(), false).unwrap();
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn virality_matches_all_pairs_bfs(p in parents()) {
        let fast = structural_virality_of_parents(&p);
        prop_assert!((fast - common::virality_by_bfs(&p)).abs() < 1e-9);
    }

    #[test]
    fn cascade_bookkeeping(p in parents().prop_filter("needs a sharer", |p| p.len() > 1), order in proptest::collection::vec(any::<u32>(), 120)) {
        let tree = build_cascade(&events(&p, &order), 0.0).unwrap();
        let breadths = tree.breadths();
        prop_assert_eq!(tree.size(), p.len() - 1);
        prop_assert_eq!(tree.size(), breadths.iter().skip(1).sum::<usize>());
        prop_assert!(tree.depth() <= tree.size());
        prop_assert!(tree.max_breadth() <= tree.size());
        prop_assert!(structural_virality(&tree) <= 2.0 * tree.depth() as f64 + 1e-12);
        prop_assert!((structural_virality(&tree) - structural_virality_of_parents(&p)).abs() < 1e-9);
    }

    #[test]
    fn ccdf_is_a_survival_curve(values in proptest::collection::vec(0.0f64..1e6, 1..200)) {
        let c = ccdf(&values).unwrap();
        prop_assert_eq!(c[0].1, 1.0);
        for w in c.windows(2) {
            prop_assert!(w[0].0 < w[1].0);
            prop_assert!(w[0].1 > w[1].1);
        }
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let share = values.iter().filter(|v| **v == max).count() as f64 / values.len() as f64;
        prop_assert!((c.last().unwrap().1 - share).abs() < 1e-12);
    }

    #[test]
    fn cosine_is_bounded_and_symmetric(a in proptest::collection::vec(-10.0f64..10.0, 8), b in proptest::collection::vec(-10.0f64..10.0, 8)) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let ab = cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&ab));
        prop_assert_eq!(ab, cosine_similarity(&b, &a).unwrap());
        prop_assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn correlation_matrix_is_symmetric_with_unit_diagonal(rows in proptest::collection::vec(proptest::array::uniform8(0.0f64..5.0), 4..40)) {
        let m = EmotionMatrix::raw((0..rows.len()).map(|i| i.to_string()).collect(), rows.into_iter().map(EmotionVector::new).collect());
        if let Ok(c) = correlation_matrix(&m) {
            for i in 0..8 {
                prop_assert!((c[i][i] - 1.0).abs() < 1e-9);
                for j in 0..8 {
                    prop_assert!((c[i][j] - c[j][i]).abs() < 1e-12);
                    prop_assert!(c[i][j].abs() <= 1.0 + 1e-9);
                }
            }
        }
    }

    #[test]
    fn welch_is_antisymmetric(a in proptest::collection::vec(-100.0f64..100.0, 2..30), b in proptest::collection::vec(-100.0f64..100.0, 2..30)) {
        if let (Ok(ab), Ok(ba)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) {
            prop_assert!((ab.t + ba.t).abs() < 1e-9 * (1.0 + ab.t.abs()));
            prop_assert!((ab.p_value - ba.p_value).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab.p_value));
        }
    }

    #[test]
    fn six_significant_digits_round_trip(x in -1e12f64..1e12) {
        let back = parse_number(&num(x)).unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs());
    }

    #[test]
    fn fixed_effects_ignore_group_offsets(
        y in proptest::collection::vec(-5.0f64..5.0, 60),
        x in proptest::collection::vec(-5.0f64..5.0, 60),
        offsets in proptest::collection::vec(-50.0f64..50.0, 6),
    ) {
        let d = design(&y, &x, 6);
        let shifted: Vec<f64> = y.iter().enumerate().map(|(i, v)| v + offsets[i % 6]).collect();
        if let (Ok(a), Ok(b)) = (fit_fixed_effects(&d), fit_fixed_effects(&design(&shifted, &x, 6))) {
            prop_assert!((a.estimate("anxiety").unwrap() - b.estimate("anxiety").unwrap()).abs() < 1e-8);
            let h = hausman_test(&a, &a).unwrap();
            prop_assert_eq!(h.statistic, 0.0);
        }
    }

    #[test]
    fn ols_mediation_identity(
        y in proptest::collection::vec(-5.0f64..5.0, 40),
        x in proptest::collection::vec(-5.0f64..5.0, 40),
        m in proptest::collection::vec(-5.0f64..5.0, 40),
    ) {
        if let Ok(r) = mediation_analysis(&design(&y, &x, 4), "m", &m, &["anxiety"], MediationMode::Ols) {
            prop_assert!(r.rows[0].identity_gap.abs() < 1e-8);
        }
    }

    #[test]
    fn inferred_topic_shares_are_a_simplex(doc in proptest::collection::vec(0usize..12, 0..40), seed in any::<u64>()) {
        let vocab: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let model = TopicModel::uniform(3, vocab).unwrap();
        // ids 10 and 11 are out of vocabulary
        let tokens: Vec<String> = doc.iter().map(|i| format!("w{i}")).collect();
        let theta = doc_topics(&model, &tokens, seed);
        prop_assert_eq!(theta.len(), 3);
        prop_assert!(theta.iter().all(|t| *t >= 0.0));
        prop_assert!((theta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
