//! Structural properties of the percolation kernel beyond the unit cases:
//! degeneration to undirected percolation on symmetric graphs, and
//! monotonicity under edge insertion.

mod common;

use common::{detect_indices, oracle_undirected, DenseDigraph};
use percolate_core::cpm::{self, CpmOptions};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// On a graph where every edge is bidirectional, the one-way ordering
/// constraint is vacuous and results must equal plain undirected k-clique
/// percolation.
#[test]
fn symmetric_graphs_degenerate_to_undirected_cpm() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdead_0001);
    for case in 0..300 {
        let n = rng.random_range(4..=11);
        let p = rng.random_range(0.2..=0.6);
        let graph = DenseDigraph::random(&mut rng, n, p).symmetrized();
        for k in 3..=5usize {
            assert_eq!(
                detect_indices(&graph, k),
                oracle_undirected(&graph, k),
                "case {case}: n={n} k={k}"
            );
        }
    }
}

/// Adding an edge never removes a clique: the clique set only grows, and
/// every old group's node set stays inside some new group.
#[test]
fn adding_edges_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdead_0002);
    let opts = CpmOptions::default();
    for case in 0..300 {
        let n = rng.random_range(4..=10);
        let mut graph = DenseDigraph::random(&mut rng, n, 0.3);
        let before_cliques: std::collections::BTreeSet<Vec<_>> =
            cpm::enumerate_kcliques(&common::to_slot_graph(&graph), 3, &opts)
                .into_iter()
                .map(|c| c.members)
                .collect();
        let before_groups = detect_indices(&graph, 3);

        // insert one random missing edge, when there is one
        let missing: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|&(a, b)| a != b && !graph.has_edge(a, b))
            .collect();
        if missing.is_empty() {
            continue;
        }
        let (a, b) = missing[rng.random_range(0..missing.len())];
        graph.add_edge(a, b);

        let after_cliques: std::collections::BTreeSet<Vec<_>> =
            cpm::enumerate_kcliques(&common::to_slot_graph(&graph), 3, &opts)
                .into_iter()
                .map(|c| c.members)
                .collect();
        assert!(
            after_cliques.is_superset(&before_cliques),
            "case {case}: edge {a}->{b} removed a clique"
        );
        let after_groups = detect_indices(&graph, 3);
        for old in &before_groups {
            assert!(
                after_groups
                    .iter()
                    .any(|new| old.iter().all(|v| new.contains(v))),
                "case {case}: group {old:?} lost nodes after adding {a}->{b}"
            );
        }
    }
}

/// Every reported group has at least k members, and each member sits in at
/// least one constituent k-clique.
#[test]
fn groups_are_clique_covered() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdead_0003);
    let opts = CpmOptions::default();
    for _ in 0..200 {
        let n = rng.random_range(4..=11);
        let graph = DenseDigraph::random(&mut rng, n, 0.35);
        let slot_graph = common::to_slot_graph(&graph);
        for k in 3..=4usize {
            let cliques = cpm::enumerate_kcliques(&slot_graph, k, &opts);
            let groups = cpm::detect(&slot_graph, k, &opts).unwrap();
            for group in groups {
                assert!(group.members.len() >= k);
                for member in &group.members {
                    assert!(
                        cliques.iter().any(|c| c.members.contains(member)),
                        "member {member} in no {k}-clique"
                    );
                }
            }
        }
    }
}
