use super::*;
use crate::comb::binomial;
use crate::datagen::{sample_linear_gaussian, WeightedDag};
use crate::graph::{compact, CorrelationMatrix, SkeletonConfig, Strategy};
use crate::stats::{ci_test, compute_correlation, threshold_tau};

const STRATEGIES: [Strategy; 3] = [Strategy::Serial, Strategy::EdgeParallel, Strategy::SetShared];

fn config(strategy: Strategy, workers: usize) -> SkeletonConfig {
    SkeletonConfig::default().with_strategy(strategy).with_workers(workers)
}

/// Population correlation of a linear SEM `x = W x + e`, unit noise.
fn population_correlation(n: usize, weights: &[(usize, usize, f64)]) -> CorrelationMatrix {
    let mut w = nalgebra::DMatrix::<f64>::zeros(n, n);
    for &(child, parent, v) in weights {
        w[(child, parent)] = v;
    }
    let inv = (nalgebra::DMatrix::identity(n, n) - w).try_inverse().unwrap();
    let sigma = &inv * inv.transpose();
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        rows[i][i] = 1.0;
        for j in i + 1..n {
            let r = sigma[(i, j)] / (sigma[(i, i)] * sigma[(j, j)]).sqrt();
            rows[i][j] = r;
            rows[j][i] = r;
        }
    }
    CorrelationMatrix::from_rows(&rows).unwrap()
}

fn random_instance(n: usize, d: f64, m: usize, seed: u64) -> CorrelationMatrix {
    let dag = WeightedDag::random(n, d, seed);
    compute_correlation(&sample_linear_gaussian(&dag, m, seed.wrapping_add(1))).unwrap()
}

fn audit_sepsets(corr: &CorrelationMatrix, m: usize, alpha: f64, result: &SkeletonResult) {
    let n = corr.dim();
    for i in 0..n {
        for j in i + 1..n {
            let present = result.skeleton.has_edge(i, j);
            match result.sepsets.get(i, j) {
                None => assert!(present, "removed edge ({i},{j}) without sepset"),
                Some(s) => {
                    assert!(!present, "surviving edge ({i},{j}) has a sepset");
                    assert!(!s.contains(&i) && !s.contains(&j));
                    let tau = threshold_tau(alpha, m, s.len()).unwrap();
                    assert!(ci_test(corr, i, j, &s, tau).unwrap().independent, "({i},{j}) | {s:?}");
                }
            }
        }
    }
}

#[test]
fn uncorrelated_variables_end_after_level_zero() {
    for strategy in STRATEGIES {
        let r = run_pc_stable(&CorrelationMatrix::identity(6), 500, &config(strategy, 2)).unwrap();
        assert_eq!(r.skeleton.edge_count(), 0);
        assert_eq!(r.levels_run, 1);
        assert_eq!(r.stop_reason, StopReason::MaxDegree);
        assert_eq!(r.sepsets.len(), 15);
    }
}

#[test]
fn four_node_walkthrough() {
    // 1 -> 0 <- 2, 0 -> 3: level 0 drops (1,2), level 1 drops (1,3) and (2,3)
    // given {0}.
    let corr = population_correlation(4, &[(0, 1, 0.8), (0, 2, 0.8), (3, 0, 0.8)]);
    for strategy in STRATEGIES {
        let r = run_pc_stable(&corr, 1000, &config(strategy, 3)).unwrap();
        assert_eq!(r.skeleton.edges(), vec![(0, 1), (0, 2), (0, 3)], "{strategy}");
        assert_eq!(r.sepsets.get(1, 2), Some(vec![]));
        assert_eq!(r.sepsets.get(1, 3), Some(vec![0]));
        assert_eq!(r.sepsets.get(2, 3), Some(vec![0]));
        assert_eq!(r.stats[0].edges_removed, 1);
        assert_eq!(r.stats[0].ci_tests, 6);
        assert_eq!(r.stats[1].edges_removed, 2);
        assert_eq!(r.levels_run, 3);
    }
    // Level 1 of the serial reference: each of the 5 surviving edges is tried
    // from both ends; 12 tests in all.
    let r = run_pc_stable(&corr, 1000, &config(Strategy::Serial, 1)).unwrap();
    assert_eq!(r.stats[1].ci_tests, 12);
}

#[test]
fn level_zero_cases() {
    let n = 7;
    let adj = AdjacencyMatrix::complete(n);
    let seps = SeparationSets::new();
    let s = level_zero(&CorrelationMatrix::identity(n), 0.05, &adj, &seps, 2, None);
    assert_eq!((s.ci_tests, s.edges_removed), (21, 21));
    assert_eq!(adj.edge_count(), 0);

    let mut rows = vec![vec![0.99; 5]; 5];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    let dense = CorrelationMatrix::from_rows(&rows).unwrap();
    let tau = threshold_tau(0.05, 100, 0).unwrap();
    let adj = AdjacencyMatrix::complete(5);
    let s = level_zero(&dense, tau, &adj, &SeparationSets::new(), 1, None);
    assert_eq!((s.ci_tests, s.edges_removed), (10, 0));

    rows[1][3] = 0.01;
    rows[3][1] = 0.01;
    let one = CorrelationMatrix::from_rows(&rows).unwrap();
    let adj = AdjacencyMatrix::complete(5);
    let seps = SeparationSets::new();
    let s = level_zero(&one, tau, &adj, &seps, 4, Some(3));
    assert_eq!(s.edges_removed, 1);
    assert!(!adj.has_edge(1, 3));
    assert_eq!(seps.entries(), vec![((1, 3), vec![])]);
}

#[test]
fn edge_parallel_chunk_geometry() {
    let row = [0usize, 1, 3, 4, 5, 6];
    assert_eq!(edge_chunk(&row, 1, 3), &[4, 5, 6]);
    assert_eq!(edge_chunk(&row, 0, 3), &[0, 1, 3]);
    assert!(edge_chunk(&row, 2, 3).is_empty());
    let total = binomial(5, 2).unwrap();
    let a: Vec<u64> = lane_ranks(total, 0, 2).collect();
    let b: Vec<u64> = lane_ranks(total, 1, 2).collect();
    assert_eq!((a.len(), b.len()), (5, 5));
    let mut all: Vec<u64> = a.into_iter().chain(b).collect();
    all.sort();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
}

#[test]
fn set_shared_geometry() {
    let row = [0usize, 1, 3, 4, 5, 6];
    let (set, targets) = set_shared_targets(&row, 2, 12).unwrap();
    assert_eq!(set, vec![4, 5]);
    assert_eq!(targets, vec![0, 1, 3, 6]);
    // 15 sets, theta = 4, delta = 2: chunk 1 lanes cover 4..8 and 12..15.
    let ranks: Vec<u64> = set_shared_ranks(15, 1, 4, 2).collect();
    assert_eq!(ranks, vec![4, 5, 6, 7, 12, 13, 14]);
    let mut all: Vec<u64> = (0..2).flat_map(|k| set_shared_ranks(15, k, 4, 2)).collect();
    all.sort();
    assert_eq!(all, (0..15).collect::<Vec<_>>());
}

#[test]
fn guards() {
    let cfg = SkeletonConfig { beta: 3, theta: 4, ..Default::default() };
    assert_eq!(early_termination(2, 2, 0, Strategy::EdgeParallel, &cfg).unwrap(), Guard::Skip);
    assert_eq!(early_termination(2, 2, 0, Strategy::SetShared, &cfg).unwrap(), Guard::Skip);
    assert_eq!(early_termination(5, 1, 2, Strategy::EdgeParallel, &cfg).unwrap(), Guard::Skip);
    assert_eq!(early_termination(5, 1, 1, Strategy::EdgeParallel, &cfg).unwrap(), Guard::Proceed);
    assert_eq!(early_termination(5, 2, 2, Strategy::SetShared, &cfg).unwrap(), Guard::Proceed);
    assert_eq!(early_termination(5, 2, 3, Strategy::SetShared, &cfg).unwrap(), Guard::Skip);
}

#[test]
fn short_rows_issue_no_tests() {
    // Path 0 - 1 - 2: every row has at most 2 neighbors, so level 2 is idle.
    let adj = AdjacencyMatrix::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
    let snap = compact(&adj);
    let corr = CorrelationMatrix::identity(3);
    for strategy in [Strategy::EdgeParallel, Strategy::SetShared] {
        let cfg = config(strategy, 1);
        let seps = SeparationSets::new();
        let s = match strategy {
            Strategy::EdgeParallel => level_edge_parallel(&corr, 0.1, &adj, &snap, 2, &cfg, &seps),
            _ => level_set_shared(&corr, 0.1, &adj, &snap, 2, &cfg, &seps),
        }
        .unwrap();
        assert_eq!((s.ci_tests, s.pseudo_inverses, s.edges_removed), (0, 0, 0));
    }
}

#[test]
fn level_without_independence_leaves_graph_unchanged() {
    let mut rows = vec![vec![0.5; 6]; 6];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    let corr = CorrelationMatrix::from_rows(&rows).unwrap();
    let tau = threshold_tau(0.05, 1000, 1).unwrap();
    for strategy in [Strategy::EdgeParallel, Strategy::SetShared] {
        let adj = AdjacencyMatrix::complete(6);
        let snap = compact(&adj);
        let cfg = config(strategy, 2);
        let seps = SeparationSets::new();
        let s = match strategy {
            Strategy::EdgeParallel => level_edge_parallel(&corr, tau, &adj, &snap, 1, &cfg, &seps),
            _ => level_set_shared(&corr, tau, &adj, &snap, 1, &cfg, &seps),
        }
        .unwrap();
        assert_eq!(s.edges_removed, 0);
        assert_eq!(adj, AdjacencyMatrix::complete(6));
        // 6 rows x 5 targets x C(4,1) sets.
        assert_eq!(s.ci_tests, 120);
    }
}

#[test]
fn set_shared_pinv_accounting_on_dense_rows() {
    // Equicorrelated variables never separate, so every row stays dense and
    // each of its C(n'_i, l) sets has live targets.
    let n = 8;
    let mut rows = vec![vec![0.5; n]; n];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    let corr = CorrelationMatrix::from_rows(&rows).unwrap();
    let cfg = config(Strategy::SetShared, 3);
    let r = run_pc_stable(&corr, 1000, &cfg).unwrap();
    assert_eq!(r.skeleton.edge_count(), 28);
    let serial = run_pc_stable(&corr, 1000, &config(Strategy::Serial, 1)).unwrap();
    for (s, reference) in r.stats.iter().zip(&serial.stats).skip(1) {
        let ell = s.level;
        assert_eq!(s.pseudo_inverses, n as u64 * binomial(n - 1, ell).unwrap());
        assert_eq!(s.ci_tests, reference.ci_tests);
        assert!(s.pseudo_inverses <= s.ci_tests);
    }
    assert_eq!(r.levels_run, n - 1);
}

#[test]
fn set_shared_pinv_matches_direct_enumeration() {
    let corr = random_instance(25, 0.25, 500, 4);
    let cfg = config(Strategy::SetShared, 1);
    let adj = AdjacencyMatrix::complete(25);
    let seps = SeparationSets::new();
    level_zero(&corr, threshold_tau(0.05, 500, 0).unwrap(), &adj, &seps, 1, None);
    for ell in 1..4 {
        let snap = compact(&adj);
        let upper: u64 = snap.rows().iter().filter(|r| r.len() > ell).map(|r| binomial(r.len(), ell).unwrap()).sum();
        let tau = threshold_tau(0.05, 500, ell).unwrap();
        let s = level_set_shared(&corr, tau, &adj, &snap, ell, &cfg, &seps).unwrap();
        assert!(s.pseudo_inverses <= upper);
        assert!(s.pseudo_inverses <= s.ci_tests);
    }
}

#[test]
fn strategies_agree_on_random_graph() {
    let corr = random_instance(50, 0.1, 1000, 50);
    let reference = run_pc_stable(&corr, 1000, &config(Strategy::Serial, 1)).unwrap();
    audit_sepsets(&corr, 1000, 0.05, &reference);
    for strategy in [Strategy::EdgeParallel, Strategy::SetShared] {
        for workers in [1, 2, 4, 8] {
            for seed in [None, Some(workers as u64)] {
                let cfg = SkeletonConfig { schedule_seed: seed, ..config(strategy, workers) };
                let r = run_pc_stable(&corr, 1000, &cfg).unwrap();
                assert_eq!(r.skeleton, reference.skeleton, "{strategy} x{workers} {seed:?}");
                assert_eq!(r.levels_run, reference.levels_run);
                audit_sepsets(&corr, 1000, 0.05, &r);
            }
        }
    }
}

#[test]
fn monotone_shrinkage_and_sepset_sizes() {
    let corr = random_instance(30, 0.2, 800, 7);
    let adj = AdjacencyMatrix::complete(30);
    let seps = SeparationSets::new();
    let cfg = config(Strategy::EdgeParallel, 3);
    level_zero(&corr, threshold_tau(0.05, 800, 0).unwrap(), &adj, &seps, 1, None);
    let mut prev = adj.edges();
    for ell in 1..4 {
        let snap = compact(&adj);
        let before = seps.entries();
        let tau = threshold_tau(0.05, 800, ell).unwrap();
        let s = level_edge_parallel(&corr, tau, &adj, &snap, ell, &cfg, &seps).unwrap();
        let now = adj.edges();
        assert!(now.iter().all(|e| prev.contains(e)));
        assert!(adj.is_symmetric());
        assert_eq!(s.edges_removed as usize, prev.len() - now.len());
        for ((i, j), set) in seps.entries() {
            if !before.iter().any(|(k, _)| *k == (i, j)) {
                assert_eq!(set.len(), ell);
                // Drawn from the level-start snapshot of one endpoint.
                assert!(set.iter().all(|v| snap.row(i).contains(v)) || set.iter().all(|v| snap.row(j).contains(v)));
            }
        }
        prev = now;
    }
}

#[test]
fn max_level_cap() {
    let corr = random_instance(30, 0.3, 1000, 21);
    let cfg = SkeletonConfig { max_level: Some(1), ..config(Strategy::SetShared, 2) };
    let r = run_pc_stable(&corr, 1000, &cfg).unwrap();
    assert_eq!(r.levels_run, 2);
    assert_eq!(r.stop_reason, StopReason::MaxLevel);
}

#[test]
fn sample_size_stops_the_loop() {
    // With m = 6, tau exists only for l <= 2; alpha near 1 keeps every edge.
    let mut rows = vec![vec![0.9; 7]; 7];
    for (i, r) in rows.iter_mut().enumerate() {
        r[i] = 1.0;
    }
    let corr = CorrelationMatrix::from_rows(&rows).unwrap();
    let r = run_pc_stable(&corr, 6, &config(Strategy::Serial, 1).with_alpha(0.99)).unwrap();
    assert_eq!(r.stop_reason, StopReason::SampleSize);
    assert_eq!(r.levels_run, 3);
}

#[test]
fn invalid_config_is_rejected() {
    let cfg = SkeletonConfig { gamma: 0, ..Default::default() };
    assert!(matches!(run_pc_stable(&CorrelationMatrix::identity(3), 100, &cfg), Err(SkeletonError::Config(_))));
}
