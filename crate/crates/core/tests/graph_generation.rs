use blinkswarm_core::graph::{erdos_renyi, Graph};
use proptest::prelude::*;

#[test]
fn edge_count_mean_matches_binomial_expectation() {
    // E[m] = C(n, 2) * c / (n - 1) = n c / 2.
    let (n, c) = (100usize, 3.0);
    let seeds = 400u64;
    let total: usize = (0..seeds)
        .map(|s| erdos_renyi(n, c, s).unwrap().edge_count())
        .sum();
    let mean = total as f64 / seeds as f64;
    assert!((mean - 150.0).abs() <= 10.0, "mean edge count {mean}");
}

#[test]
fn pair_inclusion_is_uniform() {
    // Each pair should appear with probability p; check first and last pair
    // of the upper triangle, where skip arithmetic is most error-prone.
    let (n, c) = (30usize, 6.0);
    let p = c / (n - 1) as f64;
    let trials = 20_000u64;
    let (mut first, mut last) = (0u32, 0u32);
    for s in 0..trials {
        let g = erdos_renyi(n, c, s).unwrap();
        first += u32::from(g.has_edge(0, 1));
        last += u32::from(g.has_edge(n as u32 - 2, n as u32 - 1));
    }
    let sd = (p * (1.0 - p) / trials as f64).sqrt();
    for hits in [first, last] {
        let rate = f64::from(hits) / trials as f64;
        assert!((rate - p).abs() < 5.0 * sd, "rate {rate} vs {p}");
    }
}

proptest! {
    #[test]
    fn generated_graphs_are_simple_and_symmetric(n in 1usize..200, c in 0.0f64..8.0, seed: u64) {
        let c = c.min((n - 1) as f64);
        let g = erdos_renyi(n, c, seed).unwrap();
        prop_assert_eq!(g.node_count(), n);
        let mut degree_sum = 0;
        for v in 0..n as u32 {
            let nb = g.neighbors(v).unwrap();
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!nb.contains(&v));
            for &u in nb {
                prop_assert!(g.has_edge(u, v));
            }
            degree_sum += nb.len();
        }
        prop_assert_eq!(degree_sum, 2 * g.edge_count());
        prop_assert_eq!(&erdos_renyi(n, c, seed).unwrap(), &g);
        prop_assert_eq!(Graph::parse_edge_list(&g.to_edge_list()).unwrap(), g);
    }
}
