use blinkswarm_core::coloring::{
    complete, run_to_completion, verify_coloring, ColoringError, ColoringState, LossModel,
    NodeStreams,
};
use blinkswarm_core::graph::{erdos_renyi, Graph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Straight transcription of the lossless round rule on an explicit
/// adjacency list, used as an independent reference.
fn reference_rounds(adj: &[Vec<usize>], rng: &mut ChaCha8Rng) -> u32 {
    let n = adj.len();
    let k = adj.iter().map(Vec::len).max().unwrap_or(0) + 1;
    let mut palette: Vec<Vec<usize>> = vec![(0..k).collect(); n];
    let mut fixed: Vec<Option<usize>> = vec![None; n];
    let mut rounds = 0;
    while fixed.iter().any(Option::is_none) {
        rounds += 1;
        let pick: Vec<Option<usize>> = (0..n)
            .map(|v| {
                fixed[v]
                    .is_none()
                    .then(|| palette[v][rng.random_range(0..palette[v].len())])
            })
            .collect();
        let mut next = fixed.clone();
        for v in 0..n {
            let Some(s) = pick[v] else { continue };
            let clash = adj[v]
                .iter()
                .any(|&u| fixed[u] == Some(s) || pick[u] == Some(s));
            if clash {
                palette[v].retain(|&x| x != s);
                if palette[v].is_empty() {
                    palette[v] = (0..k)
                        .filter(|x| adj[v].iter().all(|&u| fixed[u] != Some(*x)))
                        .collect();
                }
            } else {
                next[v] = Some(s);
            }
        }
        fixed = next;
    }
    rounds
}

fn histogram(samples: impl Iterator<Item = u32>, bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    let mut total = 0.0;
    for r in samples {
        h[(r as usize).min(bins - 1)] += 1.0;
        total += 1.0;
    }
    h.iter().map(|c| c / total).collect()
}

#[test]
fn path_of_three_matches_reference_distribution() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
    let adj = vec![vec![1], vec![0, 2], vec![1]];
    let trials = 100_000u64;
    let ours: Vec<u32> = (0..trials)
        .map(|s| {
            run_to_completion(&g, &mut NodeStreams::new(s, 3), &LossModel::LOSSLESS, 100)
                .unwrap()
                .stats
                .rounds_to_completion
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0xfeed);
    let reference: Vec<u32> = (0..trials)
        .map(|_| reference_rounds(&adj, &mut rng))
        .collect();

    let within_ten = ours.iter().filter(|&&r| r <= 10).count() as f64 / trials as f64;
    assert!(within_ten >= 0.999, "P(rounds <= 10) = {within_ten}");

    let (a, b) = (
        histogram(ours.into_iter(), 12),
        histogram(reference.into_iter(), 12),
    );
    for (i, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!((x - y).abs() < 0.01, "bin {i}: {x} vs {y}");
    }
}

#[test]
fn single_edge_needs_odd_rounds_with_mean_three() {
    // Two slots: a clash leaves both nodes the same single slot, which
    // clashes again and resets, so success only happens on odd rounds with
    // probability 1/2 each time.
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let trials = 40_000u64;
    let rounds: Vec<u32> = (0..trials)
        .map(|s| {
            run_to_completion(&g, &mut NodeStreams::new(s, 2), &LossModel::LOSSLESS, 200)
                .unwrap()
                .stats
                .rounds_to_completion
        })
        .collect();
    assert!(rounds.iter().all(|r| r % 2 == 1));
    let mean = rounds.iter().map(|&r| f64::from(r)).sum::<f64>() / trials as f64;
    assert!((mean - 3.0).abs() < 0.06, "mean {mean}");
}

#[test]
fn random_graphs_are_properly_colored() {
    let mut seeds = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let n = seeds.random_range(1..=500usize);
        let c = seeds.random_range(0.0..6.0f64).min((n - 1) as f64);
        let (gs, cs): (u64, u64) = (seeds.random(), seeds.random());
        let g = erdos_renyi(n, c, gs).unwrap();
        let col = run_to_completion(
            &g,
            &mut NodeStreams::new(cs, n),
            &LossModel::LOSSLESS,
            10_000,
        )
        .unwrap();
        let slots: Vec<Option<u32>> = col.slots.iter().copied().map(Some).collect();
        assert!(verify_coloring(&g, &slots).unwrap());
        let limit = g.max_vertex_degree() as u32 + 1;
        assert!(col.slots.iter().all(|&s| s < limit));
    }
}

#[test]
fn palette_smaller_than_degree_plus_one_is_rejected() {
    let g = Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
    assert!(matches!(
        ColoringState::init(&g, Some(2)),
        Err(ColoringError::InsufficientPalette {
            required: 3,
            given: 2
        })
    ));
}

#[test]
fn total_loss_never_converges() {
    let g = Graph::from_edges(2, [(0, 1)]).unwrap();
    let err = run_to_completion(
        &g,
        &mut NodeStreams::new(1, 2),
        &LossModel::new(1.0).unwrap(),
        50,
    )
    .unwrap_err();
    match err {
        ColoringError::NonConvergence {
            colored,
            total,
            partial,
            ..
        } => {
            assert_eq!((colored, total), (0, 2));
            assert_eq!(partial, vec![None, None]);
        }
        other => panic!("unexpected {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lossy_runs_stay_proper(n in 1usize..150, c in 0.0f64..5.0, p in 0.0f64..0.5, gs: u64, cs: u64) {
        let c = c.min((n - 1) as f64);
        let g = erdos_renyi(n, c, gs).unwrap();
        let col = run_to_completion(&g, &mut NodeStreams::new(cs, n), &LossModel::new(p).unwrap(), 100_000).unwrap();
        let slots: Vec<Option<u32>> = col.slots.iter().copied().map(Some).collect();
        prop_assert!(verify_coloring(&g, &slots).unwrap());
        prop_assert_eq!(*col.stats.colored_per_round.last().unwrap(), n);
        prop_assert!(col.stats.colored_per_round.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn equal_seeds_replay(n in 1usize..120, gs: u64, cs: u64, p in 0.0f64..0.3) {
        let g = erdos_renyi(n, 3.0f64.min((n - 1) as f64), gs).unwrap();
        let loss = LossModel::new(p).unwrap();
        let a = run_to_completion(&g, &mut NodeStreams::new(cs, n), &loss, 100_000).unwrap();
        let b = run_to_completion(&g, &mut NodeStreams::new(cs, n), &loss, 100_000).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn precolored_slots_are_kept(n in 2usize..100, gs: u64, cs: u64) {
        let g = erdos_renyi(n, 3.0f64.min((n - 1) as f64), gs).unwrap();
        let first = run_to_completion(&g, &mut NodeStreams::new(cs, n), &LossModel::LOSSLESS, 10_000).unwrap();
        let keep: Vec<Option<u32>> = first.slots.iter().enumerate()
            .map(|(v, &s)| (v % 2 == 0).then_some(s))
            .collect();
        let state = ColoringState::init_with(&g, None, &keep).unwrap();
        let again = complete(state, &g, &mut NodeStreams::new(cs ^ 1, n), &LossModel::LOSSLESS, 10_000).unwrap();
        for (v, k) in keep.iter().enumerate() {
            if let Some(s) = k {
                prop_assert_eq!(again.slots[v], *s);
            }
        }
    }
}
