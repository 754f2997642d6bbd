use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlp_core::cost::CostMatrix;
use tlp_core::exact::{brute_force_min, solve_assignment, solve_lp};

/// Generic LP formulation of the transport problem solved by a separate simplex code.
fn generic_lp(cost: &CostMatrix, p: &[f64], q: &[f64]) -> f64 {
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let (n, m) = (cost.rows(), cost.cols());
    let vars: Vec<_> = (0..n * m)
        .map(|k| lp.add_var(cost.get(k / m, k % m), (0.0, f64::INFINITY)))
        .collect();
    for i in 0..n {
        let row: Vec<_> = (0..m).map(|j| (vars[i * m + j], 1.0)).collect();
        lp.add_constraint(&row[..], ComparisonOp::Eq, p[i]);
    }
    for j in 0..m {
        let col: Vec<_> = (0..n).map(|i| (vars[i * m + j], 1.0)).collect();
        lp.add_constraint(&col[..], ComparisonOp::Eq, q[j]);
    }
    lp.solve().expect("oracle LP solves").objective()
}

fn weights(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|x| x / s).collect()
}

#[test]
fn five_by_four_matches_generic_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let cost =
            CostMatrix::new(5, 4, (0..20).map(|_| rng.random::<f64>() * 3.0).collect()).unwrap();
        let p = weights(&mut rng, 5);
        let q = weights(&mut rng, 4);
        let ours = solve_lp(&cost, &p, &q).unwrap().objective;
        let oracle = generic_lp(&cost, &p, &q);
        assert!(
            (ours - oracle).abs() <= 1e-8 * oracle.max(1e-9),
            "{ours} vs {oracle}"
        );
    }
}

#[test]
fn larger_instances_match_generic_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for (n, m) in [(12, 9), (20, 20), (7, 30)] {
        let cost =
            CostMatrix::new(n, m, (0..n * m).map(|_| rng.random::<f64>()).collect()).unwrap();
        let p = weights(&mut rng, n);
        let q = weights(&mut rng, m);
        let ours = solve_lp(&cost, &p, &q).unwrap().objective;
        let oracle = generic_lp(&cost, &p, &q);
        assert!(
            (ours - oracle).abs() <= 1e-8 * oracle,
            "{n}x{m}: {ours} vs {oracle}"
        );
    }
}

#[test]
fn assignment_matches_brute_force_n7() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..10 {
        let cost = CostMatrix::new(7, 7, (0..49).map(|_| rng.random::<f64>()).collect()).unwrap();
        let a = solve_assignment(&cost).unwrap().objective;
        let b = brute_force_min(&cost).unwrap();
        assert!((a - b).abs() <= 1e-9 * b);
    }
}

fn square_cost() -> impl Strategy<Value = CostMatrix> {
    (2usize..8).prop_flat_map(|n| {
        prop::collection::vec(0.0f64..10.0, n * n)
            .prop_map(move |d| CostMatrix::new(n, n, d).unwrap())
    })
}

proptest! {
    #[test]
    fn lp_and_assignment_agree(cost in square_cost()) {
        let n = cost.rows();
        let u = vec![1.0 / n as f64; n];
        let a = solve_assignment(&cost).unwrap().objective;
        let l = solve_lp(&cost, &u, &u).unwrap().objective;
        prop_assert!((a - l).abs() <= 1e-9 * a.max(1e-12));
    }

    #[test]
    fn scaling_cost_scales_objective(cost in square_cost(), s in 0.01f64..100.0) {
        let base = solve_assignment(&cost).unwrap();
        let scaled_cost = cost.scaled(s).unwrap();
        let scaled = solve_assignment(&scaled_cost).unwrap();
        prop_assert!((scaled.objective - s * base.objective).abs() <= 1e-9 * (s * base.objective).max(1e-12));
        let perm = base.plan.permutation().unwrap();
        let n = perm.len() as f64;
        let reused: f64 = perm.iter().enumerate().map(|(i, &j)| scaled_cost.get(i, j)).sum::<f64>() / n;
        prop_assert!((reused - scaled.objective).abs() <= 1e-9 * scaled.objective.max(1e-12));
    }

    #[test]
    fn plan_marginals_are_exact(cost in square_cost()) {
        let n = cost.rows();
        let u = vec![1.0 / n as f64; n];
        let s = solve_lp(&cost, &u, &u).unwrap();
        prop_assert!(s.plan.marginal_error(&u, &u) < 1e-12);
        let recomputed = s.plan.cost(|i, j| cost.get(i, j));
        prop_assert!((recomputed - s.objective).abs() <= 1e-9 * s.objective.max(1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn assignment_matches_lp_on_tie_heavy_costs(n in 8usize..80, levels in 1u32..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cost = CostMatrix::new(n, n, (0..n * n).map(|_| rng.random_range(0..=levels) as f64 * 0.25).collect()).unwrap();
        let u = vec![1.0 / n as f64; n];
        let a = solve_assignment(&cost).unwrap().objective;
        let l = solve_lp(&cost, &u, &u).unwrap().objective;
        prop_assert!((a - l).abs() <= 1e-9 * l.max(1e-12), "{} vs {}", a, l);
    }
}
