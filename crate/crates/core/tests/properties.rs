use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tlp_core::color::{recolor, spatially_correlated_map, RecolorJob};
use tlp_core::cost::{build_cost, lp_distance, CostParams};
use tlp_core::distance::{tlp_distance, SolverSettings};
use tlp_core::exact::solve_lp;
use tlp_core::measure::{
    pushforward, value_histogram, DiscreteMeasure, HistogramGrid, ImageRaster, Points, Signal,
};
use tlp_core::multiscale::{multiscale_solve, MultiscaleParams};
use tlp_core::sinkhorn::{sinkhorn_solve, Epsilon, SinkhornParams};
use tlp_core::synth::{dataset_1d, dataset_2d, OneDClass, OneDClassSpec, TwoDClass, TwoDClassSpec};

fn params(p: f64, lambda: f64) -> CostParams {
    CostParams::finite(p, lambda).unwrap()
}

fn random_signal(rng: &mut ChaCha8Rng, n: usize, dim: usize, channels: usize) -> Signal {
    let coords = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
    let s: f64 = w.iter().sum();
    let m = DiscreteMeasure::new(
        Points::new(dim, coords).unwrap(),
        w.iter().map(|x| x / s).collect(),
    )
    .unwrap();
    let values = (0..n * channels)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Signal::new(m, channels, values).unwrap()
}

fn samples(rng: &mut ChaCha8Rng, n: usize) -> Signal {
    Signal::from_samples((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> ImageRaster {
    ImageRaster::new(w, h, 3, (0..w * h * 3).map(|_| rng.random()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cost_is_symmetric_under_swap(seed in any::<u64>(), n in 1usize..7, m in 1usize..7, lambda in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, n, 2, 2);
        let g = random_signal(&mut rng, m, 2, 2);
        let a = build_cost(&f, &g, &params(2.0, lambda)).unwrap();
        let b = build_cost(&g, &f, &params(2.0, lambda)).unwrap();
        for i in 0..n {
            for j in 0..m {
                prop_assert_eq!(a.get(i, j), b.get(j, i));
            }
        }
    }

    #[test]
    fn cost_ignores_a_common_constant(seed in any::<u64>(), shift in -5.0f64..5.0, p in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, 5, 1, 1);
        let g = random_signal(&mut rng, 4, 1, 1);
        let a = build_cost(&f, &g, &params(p, 0.5)).unwrap();
        let b = build_cost(
            &f.map_values(|v| v + shift).unwrap(),
            &g.map_values(|v| v + shift).unwrap(),
            &params(p, 0.5),
        )
        .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn cost_entries_scale_with_inverse_lambda(seed in any::<u64>(), l1 in 0.01f64..10.0, ratio in 1.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, 5, 2, 1);
        let g = random_signal(&mut rng, 5, 2, 1);
        let l2 = l1 * ratio;
        let a = build_cost(&f, &g, &params(2.0, l1)).unwrap();
        let b = build_cost(&f, &g, &params(2.0, l2)).unwrap();
        let one = build_cost(&f, &g, &params(2.0, 1.0)).unwrap();
        let half = build_cost(&f, &g, &params(2.0, 0.5)).unwrap();
        for k in 0..a.data().len() {
            let (x, y) = (a.data()[k], b.data()[k]);
            let spatial = half.data()[k] - one.data()[k];
            let values = one.data()[k] - spatial;
            prop_assert!(y <= x + 1e-12);
            prop_assert!((x - (values + spatial / l1)).abs() <= 1e-9 * x.max(1.0));
            prop_assert!((y - (values + spatial / l2)).abs() <= 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn lp_distance_is_a_metric(seed in any::<u64>(), n in 1usize..40, p in 1.0f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g, h) = (samples(&mut rng, n), samples(&mut rng, n), samples(&mut rng, n));
        let fg = lp_distance(&f, &g, p).unwrap();
        prop_assert!(fg >= 0.0);
        prop_assert!(lp_distance(&f, &f, p).unwrap() == 0.0);
        prop_assert!((fg - lp_distance(&g, &f, p).unwrap()).abs() <= 1e-9);
        let via = lp_distance(&f, &h, p).unwrap() + lp_distance(&h, &g, p).unwrap();
        prop_assert!(fg <= via + 1e-9);
    }

    #[test]
    fn tlp_distance_is_a_metric(seed in any::<u64>(), n in 2usize..9, lambda in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, n, 2, 1);
        let g = random_signal(&mut rng, n + 1, 2, 1);
        let h = random_signal(&mut rng, n, 2, 1);
        let cp = params(2.0, lambda);
        let d = |a: &Signal, b: &Signal| tlp_distance(a, b, &cp, &SolverSettings::exact()).unwrap();
        let fg = d(&f, &g);
        prop_assert!(fg >= 0.0);
        prop_assert!(d(&f, &f) <= 1e-7);
        prop_assert!((fg - d(&g, &f)).abs() <= 1e-9 * fg.max(1.0));
        prop_assert!(fg <= d(&f, &h) + d(&h, &g) + 1e-7);
    }

    #[test]
    fn tlp_distance_decreases_in_lambda(seed in any::<u64>(), n in 2usize..24, p in 1.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, g) = (samples(&mut rng, n), samples(&mut rng, n));
        let sweep: Vec<f64> = [0.01, 0.1, 1.0, 10.0, 100.0]
            .iter()
            .map(|&l| tlp_distance(&f, &g, &params(p, l), &SolverSettings::exact()).unwrap())
            .collect();
        for w in sweep.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", sweep);
        }
        prop_assert!(sweep[0] <= lp_distance(&f, &g, p).unwrap() * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>(), n in 1usize..30, m in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, n, 1, 1);
        let targets = Points::new(1, (0..m).map(|k| k as f64).collect()).unwrap();
        let map: Vec<usize> = (0..n).map(|_| rng.random_range(0..m)).collect();
        let image = pushforward(f.measure(), &map, &targets).unwrap();
        let before: f64 = f.measure().weights().iter().sum();
        let after: f64 = image.weights().iter().sum();
        prop_assert!((before - after).abs() <= 1e-12);
    }

    #[test]
    fn value_histogram_sums_to_one(seed in any::<u64>(), n in 1usize..60, channels in 1usize..4, bins in 1usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, n, 2, channels);
        let grid = HistogramGrid::covering(bins, &[&f]).unwrap();
        let h = value_histogram(&f, &grid).unwrap();
        prop_assert!((h.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn sinkhorn_approaches_the_exact_objective(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_signal(&mut rng, 8, 2, 1);
        let g = random_signal(&mut rng, 8, 2, 1);
        let c = build_cost(&f, &g, &params(2.0, 1.0)).unwrap();
        let (p, q) = (f.measure().weights(), g.measure().weights());
        let exact = solve_lp(&c, p, q).unwrap().objective;
        let mut prev = f64::INFINITY;
        for eps in [1e-1, 1e-2, 1e-3] {
            let sp = SinkhornParams {
                epsilon: Epsilon::Relative(eps),
                max_iters: 200_000,
                ..SinkhornParams::default()
            };
            let out = sinkhorn_solve(&c, p, q, &sp).unwrap();
            prop_assert!(out.converged);
            prop_assert!(out.marginal_residual < 1e-6);
            let gap = (out.objective - exact).abs();
            prop_assert!(gap <= prev + 1e-6, "gap {} after {}", gap, prev);
            prev = gap;
        }
    }

    #[test]
    fn multiscale_rounds_only_improve_and_keep_the_support(seed in any::<u64>(), side in 4usize..12, lambda in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [side, side];
        let f = Signal::on_grid(&shape, 1, (0..side * side).map(|_| rng.random()).collect()).unwrap();
        let g = Signal::on_grid(&shape, 1, (0..side * side).map(|_| rng.random()).collect()).unwrap();
        let sol = multiscale_solve(&f, &g, &params(2.0, lambda), &MultiscaleParams::default()).unwrap();
        for e in sol.solution.plan.entries() {
            prop_assert!(sol.active_set.contains(e.source, e.target));
        }
        for l in &sol.levels {
            prop_assert!(l.objective <= l.initial_objective * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn recolored_values_stay_in_the_unit_cube(seed in any::<u64>(), side in 2usize..7, lambda in 0.1f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let source = random_image(&mut rng, side, side);
        let exemplar = random_image(&mut rng, side, side);
        let job = RecolorJob::new(source.clone(), exemplar.clone(), params(2.0, lambda));
        let map = spatially_correlated_map(&job).unwrap();
        let out = recolor(&source, &exemplar, &map).unwrap();
        prop_assert!(out.pixels().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let base = OneDClassSpec { n: 64, ..OneDClassSpec::new(OneDClass::Hump) };
        let (a, b) = (dataset_1d(&base, 3, seed).unwrap(), dataset_1d(&base, 3, seed).unwrap());
        prop_assert_eq!(a.signals(), b.signals());
        prop_assert_eq!(a.labels(), b.labels());
        let (a, b) = (dataset_2d(2, 8, 8, seed).unwrap(), dataset_2d(2, 8, 8, seed).unwrap());
        prop_assert_eq!(a.signals(), b.signals());
    }
}

#[test]
fn grid_refinement_changes_the_distance_little() {
    let at = |side: usize| {
        let spec = TwoDClassSpec {
            width: side,
            height: side,
            ..TwoDClassSpec::new(TwoDClass::P)
        };
        let f = spec.p_signal(0.5, (0.35, 0.4)).unwrap();
        let g = spec.p_signal(0.5, (0.6, 0.55)).unwrap();
        let sol =
            multiscale_solve(&f, &g, &params(2.0, 1.0), &MultiscaleParams::default()).unwrap();
        assert!(sol.levels.last().unwrap().certified);
        sol.solution.objective.sqrt()
    };
    let (coarse, fine) = (at(32), at(64));
    let rel = (coarse - fine).abs() / fine;
    assert!(rel < 0.05, "32x32 {coarse} vs 64x64 {fine}");
}
