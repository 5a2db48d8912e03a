//! Property tests for invariants that hold for every input.

use std::sync::Arc;

use proptest::prelude::*;

use kflow::cli_io::{parse_instance, parse_solution, write_instance, write_solution, SolutionFile};
use kflow::instance::{build_incidence, DirectedGraph, IncidenceMatrix};
use kflow::ipm::{centrality, potential, potential_gradient};
use kflow::linalg::{assemble_e, dense_solve, least_squares, BlockWeights, DenseMatrix, SchurSystem};
use kflow::solver::{generate_instance, GeneratorConfig};

fn generator() -> impl Strategy<Value = GeneratorConfig> {
    (2usize..8, 1usize..4, 1i64..20, 0i64..20, any::<u64>()).prop_flat_map(|(n, k, u, c, seed)| {
        (n - 1..=n * (n - 1)).prop_map(move |m| GeneratorConfig {
            n,
            m,
            k,
            max_capacity: u,
            max_cost: c,
            seed,
        })
    })
}

/// A connected graph: a random tree plus extra edges.
fn graph() -> impl Strategy<Value = DirectedGraph> {
    (2usize..7).prop_flat_map(|n| {
        let tree = proptest::collection::vec(any::<prop::sample::Index>(), n - 1);
        let extra = proptest::collection::vec((0..n, 0..n), 0..8);
        (tree, extra).prop_map(move |(tree, extra)| {
            let mut edges: Vec<(usize, usize)> =
                tree.iter().enumerate().map(|(i, ix)| (ix.index(i + 1), i + 1)).collect();
            edges.extend(extra.into_iter().filter(|(a, b)| a != b));
            DirectedGraph::new(n, edges).unwrap()
        })
    })
}

fn reduced(g: &DirectedGraph) -> Arc<IncidenceMatrix> {
    Arc::new(build_incidence(g).delete_first_column())
}

fn weights(k: usize, m: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, m), k + 1)
        .prop_map(|d| d.into_iter().map(|b| b.into_iter().map(|e| 10f64.powf(e)).collect()).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_instances_are_balanced_and_bounded(cfg in generator()) {
        let inst = generate_instance(&cfg).unwrap();
        prop_assert_eq!((inst.n(), inst.m(), inst.k()), (cfg.n, cfg.m, cfg.k));
        prop_assert!(inst.capacity().iter().all(|&u| u >= 1));
        for i in 0..inst.k() {
            prop_assert_eq!(inst.demands(i).iter().sum::<i64>(), 0);
            prop_assert!(inst.costs(i).iter().all(|&c| (0..=cfg.max_cost).contains(&c)));
        }
        prop_assert_eq!(inst.graph().weak_components(), 1);
    }

    #[test]
    fn instance_text_round_trips(cfg in generator()) {
        let inst = generate_instance(&cfg).unwrap();
        let text = write_instance(&inst);
        prop_assert_eq!(parse_instance(&text).unwrap(), inst);
    }

    #[test]
    fn solution_text_round_trips_bit_exactly(
        flows in proptest::collection::vec(proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 4), 1..3),
        objective in -1e6f64..1e6,
    ) {
        let k = flows.len();
        let file = SolutionFile { objective, throughput: None, flows, dual: Some(vec![0.25; k * 2 + 4]) };
        let back = parse_solution(&write_solution(&file), k, 4, k * 2 + 4).unwrap();
        prop_assert_eq!(back, file);
    }

    #[test]
    fn divergence_sums_to_zero(g in graph(), seed in any::<u64>()) {
        let f: Vec<f64> = (0..g.m()).map(|e| ((seed >> (e % 60)) & 7) as f64 - 3.5).collect();
        let div = g.divergence(&f);
        prop_assert!(div.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn schur_complement_solve_matches_dense(g in graph(), k in 1usize..4, seed in any::<u64>()) {
        let a = reduced(&g);
        let m = a.rows();
        let d: Vec<Vec<f64>> = (0..=k)
            .map(|i| (0..m).map(|e| 0.1 + ((seed >> ((i * 7 + e) % 60)) & 15) as f64).collect())
            .collect();
        let w = BlockWeights::new(d).unwrap();
        let e = assemble_e(&a, &w);
        let rhs: Vec<f64> = (0..e.rows()).map(|i| (i as f64 * 0.7).sin()).collect();
        let expected = dense_solve(&e, &rhs).unwrap();
        let mut sys = SchurSystem::new(Arc::clone(&a), w).unwrap();
        let got = sys.solve(&rhs).unwrap();
        let scale = expected.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (x, y) in got.iter().zip(&expected) {
            prop_assert!((x - y).abs() <= 1e-9 * scale);
        }
        // The cheap product agrees with the assembled matrix.
        let ev = sys.apply_e(&rhs);
        let dense_ev = e.mul_vec(&rhs);
        for (x, y) in ev.iter().zip(&dense_ev) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn schur_complement_is_symmetric_positive_definite(g in graph(), d in (1usize..3).prop_flat_map(|k| weights(k, 6))) {
        let a = reduced(&g);
        let m = a.rows();
        let d: Vec<Vec<f64>> = d.into_iter().map(|b| b.into_iter().cycle().take(m).collect()).collect();
        let e = assemble_e(&a, &BlockWeights::new(d).unwrap());
        let scale = e.max_abs();
        prop_assert!(e.is_symmetric(1e-12 * scale));
        prop_assert!((0..e.rows()).all(|i| e[(i, i)] > 0.0));
    }

    #[test]
    fn least_squares_residual_is_orthogonal(
        rows in 3usize..8,
        cols in 1usize..3,
        data in proptest::collection::vec(-1.0f64..1.0, 24),
        b in proptest::collection::vec(-1.0f64..1.0, 8),
    ) {
        let m = DenseMatrix::from_row_major(rows, cols, data[..rows * cols].to_vec());
        let ls = least_squares(&m, &b[..rows]).unwrap();
        for v in m.mul_t_vec(&ls.residual) {
            prop_assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn potential_bounds(v in proptest::collection::vec(0.5f64..1.5, 1..20), lambda in 1.0f64..50.0) {
        let n = v.len() as f64;
        let phi = potential(&v, lambda).unwrap();
        prop_assert!(phi >= n);
        let mirrored: Vec<f64> = v.iter().map(|x| 2.0 - x).collect();
        prop_assert!((potential(&mirrored, lambda).unwrap() - phi).abs() <= 1e-9 * phi);
        // The gradient points away from the center.
        let g = potential_gradient(&v, lambda).unwrap();
        for (gi, vi) in g.iter().zip(&v) {
            prop_assert!(gi * (vi - 1.0) >= 0.0);
        }
    }

    #[test]
    fn centrality_of_exact_center_is_zero(x in proptest::collection::vec(0.01f64..100.0, 1..10), t in 0.01f64..10.0) {
        let s: Vec<f64> = x.iter().map(|x| t / x).collect();
        prop_assert!(centrality(&x, &s, t) < 1e-14);
    }
}
