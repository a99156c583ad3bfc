//! Expected values checked against independent computations.

mod common;

use std::f64::consts::PI;

use orderctx::assignment::fixtures;
use orderctx::behavior::{from_correlators, SINGLET_OPTIMAL_ANGLES};
use orderctx::{
    all_orderings, behavior_from_assignment, classify, dependency_graph, has_cycle, make_singlet_behavior,
    make_tsirelson, respects_order, AssignmentKind, DeterministicAssignment, Scenario,
};

fn singlet_s(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    // Straight from the correlator formula, independent of the behavior tables.
    let e = |a: f64, b: f64| -(a - b).cos();
    e(a0, b0) + e(a0, b1) + e(a1, b0) - e(a1, b1)
}

#[test]
fn singlet_angle_search_finds_tsirelson_bound() {
    // Coarse grid over all four angles, then coordinate refinement.
    let steps = 48;
    let grid: Vec<f64> = (0..steps).map(|i| 2.0 * PI * i as f64 / steps as f64).collect();
    let mut best = (0.0f64, [0.0; 4]);
    for &a0 in &grid[..1] {
        for &a1 in &grid {
            for &b0 in &grid {
                for &b1 in &grid {
                    let s = singlet_s(a0, a1, b0, b1).abs();
                    if s > best.0 {
                        best = (s, [a0, a1, b0, b1]);
                    }
                }
            }
        }
    }
    let mut angles = best.1;
    let mut step = 2.0 * PI / steps as f64;
    while step > 1e-10 {
        for i in 1..4 {
            for delta in [-step, step] {
                let mut trial = angles;
                trial[i] += delta;
                if singlet_s(trial[0], trial[1], trial[2], trial[3]).abs()
                    > singlet_s(angles[0], angles[1], angles[2], angles[3]).abs()
                {
                    angles = trial;
                }
            }
        }
        step /= 2.0;
    }
    let found = singlet_s(angles[0], angles[1], angles[2], angles[3]).abs();
    assert!((found - 2.0 * 2f64.sqrt()).abs() < 1e-9, "{found}");

    let (a, b) = SINGLET_OPTIMAL_ANGLES;
    let fixture = make_singlet_behavior(a, b).chsh_value().unwrap();
    assert!((fixture.abs() - found).abs() < 1e-9);
    assert!((fixture.abs() - 2.0 * 2f64.sqrt()).abs() < 1e-9);
}

#[test]
fn tsirelson_chsh_from_its_correlators() {
    let c = 0.5 * 2f64.sqrt();
    let by_hand = c + c + c - (-c);
    assert!((make_tsirelson().chsh_value().unwrap() - by_hand).abs() < 1e-12);
    assert_eq!(from_correlators([[c, c], [c, -c]]), make_tsirelson());
}

#[test]
fn one_way_table_chsh_term_by_term() {
    // Pointwise (−1)^(a+b−xy) on each row of the table.
    let a = fixtures::one_way_signaling();
    let mut sum = 0i32;
    for x in 0..2 {
        for y in 0..2 {
            let out = a.outputs_for(&[x, y]);
            let exponent = out[0] + out[1] + 2 - x * y; // keep it non-negative
            sum += if exponent.is_multiple_of(2) { 1 } else { -1 };
        }
    }
    assert_eq!(sum, 4);
    assert_eq!(behavior_from_assignment(&a).chsh_value().unwrap(), sum as f64);
}

#[test]
fn every_xor_table_reaches_four() {
    // All 16 tables with (a + b) mod 2 = xy: choose a freely per context.
    for code in 0..16usize {
        let a = DeterministicAssignment::from_fn(Scenario::binary(2), |x| {
            let ctx = 2 * x[0] + x[1];
            let a = (code >> ctx) & 1;
            vec![a, a ^ (x[0] & x[1])]
        })
        .unwrap();
        assert_eq!(behavior_from_assignment(&a).chsh_value().unwrap(), 4.0);
    }
}

/// Dependency of a two-party binary table, computed straight from the rows.
fn brute_edges(table: usize) -> (bool, bool) {
    let out = |x: usize, y: usize| {
        let row = (table >> (2 * (2 * x + y))) & 3;
        (row >> 1, row & 1)
    };
    let a_to_b = (0..2).any(|y| out(0, y).1 != out(1, y).1);
    let b_to_a = (0..2).any(|x| out(x, 0).0 != out(x, 1).0);
    (a_to_b, b_to_a)
}

#[test]
fn exhaustive_two_party_classification() {
    let orders = all_orderings(2);
    let mut counts = [0usize; 3];
    for code in 0..256usize {
        let assignment =
            DeterministicAssignment::new(Scenario::binary(2), (0..4).map(|ctx| (code >> (2 * ctx)) & 3).collect())
                .unwrap();
        let (ab, ba) = brute_edges(code);
        let graph = dependency_graph(&assignment);
        assert_eq!(graph.edges().contains(&(0, 1)), ab);
        assert_eq!(graph.edges().contains(&(1, 0)), ba);

        let class = classify(&assignment);
        let expected = match (ab, ba) {
            (false, false) => AssignmentKind::Local,
            (true, true) => AssignmentKind::Cyclic,
            _ => AssignmentKind::Ordered,
        };
        assert_eq!(class.kind, expected);
        assert_eq!(class.kind == AssignmentKind::Cyclic, has_cycle(&graph));
        let respected: Vec<_> = orders
            .iter()
            .filter(|o| respects_order(&assignment, o))
            .cloned()
            .collect();
        assert_eq!(respected, class.compatible_orders);
        assert_eq!(respected.is_empty(), class.kind == AssignmentKind::Cyclic);
        counts[expected as usize] += 1;
    }
    // A party's output map is one of 16 functions of both inputs, 4 of which
    // ignore the other input. Local: 4·4. One direction only: 2·(4·16 − 16).
    assert_eq!(counts, [16, 96, 144]);
    assert_eq!(counts.iter().sum::<usize>(), 256);
}

#[test]
fn independence_test_is_calibrated_on_fair_coins() {
    use orderctx::stats::chi_squared_independence;
    use rand::Rng;
    let mut r = common::rng(11);
    let trials = 1000;
    let rejected = (0..trials)
        .filter(|_| {
            let pairs: Vec<(u64, u64)> = (0..500).map(|_| (r.random_range(0..2), r.random_range(0..3))).collect();
            chi_squared_independence(&pairs).p_value < 0.05
        })
        .count();
    // Binomial(1000, 0.05): mean 50, sd ≈ 6.9.
    assert!((25..=75).contains(&rejected), "{rejected} rejections");
}
