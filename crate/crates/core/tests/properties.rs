use modesn::data::{fit_split_sizes, make_forecast_dataset, moving_average, split_series};
use modesn::metrics::{fl_acc, nrmse, rmse};
use modesn::pso::{init_swarm, swarm_step, Dimension, PsoConstants, SearchSpace};
use modesn::readout::{ridge_explicit, ridge_svd};
use modesn::reservoir::{
    init_weights, run_network, scale_spectral_radius, spectral_radius, HyperParameters, Source,
    TopologyGrid,
};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, rows * cols)
        .prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evolution_order_respects_sources(
        breadth in 1usize..4,
        depth in 1usize..4,
        edges in prop::collection::vec((0usize..16, 0usize..16, any::<bool>()), 0..20),
    ) {
        let n = breadth * depth;
        let mut sources: Vec<Vec<Source>> = (0..n).map(|_| vec![Source::Input]).collect();
        for (a, b, keep_input) in edges {
            let (from, to) = (a % n, b % n);
            if from < to && !sources[to].contains(&Source::Reservoir(from)) {
                sources[to].push(Source::Reservoir(from));
                if !keep_input {
                    sources[to].retain(|s| *s != Source::Input);
                }
            }
        }
        let t = TopologyGrid::with_connectivity(breadth, depth, sources).unwrap();
        let pos: Vec<usize> = (0..n).map(|l| t.order().iter().position(|&x| x == l).unwrap()).collect();
        for l in 0..n {
            for k in t.reservoir_sources(l) {
                prop_assert!(pos[k] < pos[l]);
            }
        }
    }

    #[test]
    fn scaled_radius_hits_target(w in matrix(6, 6), leak in 0.05f64..=1.0, extra in 0.05f64..1.0) {
        prop_assume!(spectral_radius(&w).unwrap() > 1e-3);
        let target = 1.0 - leak + extra;
        let s = scale_spectral_radius(&w, leak, target).unwrap();
        let a = DMatrix::identity(6, 6) * (1.0 - leak) + s * leak;
        prop_assert!((spectral_radius(&a).unwrap() - target).abs() < 1e-8);
    }

    #[test]
    fn states_stay_in_unit_box(seed in any::<u64>(), leak in 0.05f64..=1.0, rho in 0.3f64..1.6, u in matrix(30, 2)) {
        let t = TopologyGrid::grid(2, 2).unwrap();
        let hp = HyperParameters { neurons: 8, leak, spectral_radius: rho.max(1.0 - leak + 0.01), recurrent_sparsity: 0.2, ..Default::default() };
        let w = init_weights(&t, &hp, 2, seed).unwrap();
        for s in run_network(&t, &w, leak, &(u * 5.0), None).unwrap() {
            for r in &s.reservoirs {
                prop_assert!(r.iter().all(|x| x.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn forecast_pairs_shift_back(series in prop::collection::vec(-10.0f64..10.0, 2..80), h in 1usize..10) {
        prop_assume!(h < series.len());
        let p = make_forecast_dataset(&series, h).unwrap();
        prop_assert_eq!(p.len(), series.len() - h);
        for t in 0..p.len() - h.min(p.len()) {
            prop_assert_eq!(p.inputs[(t + h, 0)], p.targets[(t, 0)]);
        }
        prop_assert_eq!(p.targets[(p.len() - 1, 0)], *series.last().unwrap());
    }

    #[test]
    fn splits_partition_in_order(n in 30usize..200, a in 1usize..100, b in 0usize..50, c in 0usize..50, washout in 0usize..10) {
        let series: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let pairs = make_forecast_dataset(&series, 1).unwrap();
        let sizes = fit_split_sizes((a + washout, b, c), pairs.len());
        prop_assume!(sizes.0 > washout);
        let [tr, va, te] = split_series(&pairs, sizes, washout).unwrap();
        let mut scored: Vec<f64> = Vec::new();
        for d in [&tr, &va, &te] {
            for s in &d.sequences {
                scored.extend(s.inputs.rows(d.washout, s.inputs.nrows() - d.washout).iter());
            }
        }
        let expected: Vec<f64> = (washout..sizes.0 + sizes.1 + sizes.2).map(|i| i as f64).collect();
        prop_assert_eq!(scored, expected);
    }

    #[test]
    fn proportional_fit_never_grows(a in 0usize..5000, b in 0usize..5000, c in 0usize..5000, avail in 0usize..12000) {
        let s = fit_split_sizes((a, b, c), avail);
        prop_assert_eq!(s.0 + s.1 + s.2, (a + b + c).min(avail));
        prop_assert!(s.0 <= a && s.1 <= b && s.2 <= c);
    }

    #[test]
    fn moving_average_shape(series in prop::collection::vec(-5.0f64..5.0, 1..60), w in 1usize..10, k in -3.0f64..3.0) {
        prop_assume!(w <= series.len());
        let m = moving_average(&series, w).unwrap();
        prop_assert_eq!(m.len(), series.len() - w + 1);
        let constant = moving_average(&vec![k; series.len()], w).unwrap();
        prop_assert!(constant.iter().all(|v| (v - k).abs() < 1e-12));
    }

    #[test]
    fn swarm_stays_in_bounds(seed in any::<u64>(), scores in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 6), 1..12)) {
        let space = SearchSpace::new(vec![
            Dimension::continuous("a", -1.0, 2.0),
            Dimension::integer("b", 1.0, 9.0),
        ]).unwrap();
        let mut s = init_swarm(&space, 6, PsoConstants::default(), seed).unwrap();
        let mut last_best = f64::INFINITY;
        for f in scores {
            s = swarm_step(s, &f).unwrap();
            prop_assert!(s.global_best_score <= last_best);
            last_best = s.global_best_score;
            for p in &s.particles {
                prop_assert!((-1.0..=2.0).contains(&p.position[0]));
                prop_assert!((1.0..=9.0).contains(&p.position[1]));
                let d = space.decode(&p.position);
                prop_assert_eq!(d["b"].fract(), 0.0);
            }
        }
    }

    #[test]
    fn regression_metric_properties(y in matrix(20, 2), noise in matrix(20, 2), c in 0.1f64..10.0) {
        let y = y + DMatrix::from_fn(20, 2, |r, _| r as f64 * 0.1);
        let yh = &y + &noise;
        prop_assert!(rmse(&y, &yh).unwrap() >= 0.0);
        prop_assert!((rmse(&y, &yh).unwrap() - rmse(&yh, &y).unwrap()).abs() < 1e-15);
        let n1 = nrmse(&y, &yh).unwrap();
        let n2 = nrmse(&(&y * c), &(&yh * c)).unwrap();
        prop_assert!((n1 - n2).abs() < 1e-9 * n1.max(1.0));
    }

    #[test]
    fn frame_accuracy_is_a_fraction(bits in prop::collection::vec(any::<(bool, bool)>(), 1..200)) {
        let n = bits.len();
        let a = DMatrix::from_iterator(n, 1, bits.iter().map(|b| f64::from(u8::from(b.0))));
        let b = DMatrix::from_iterator(n, 1, bits.iter().map(|b| f64::from(u8::from(b.1))));
        let v = fl_acc(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(fl_acc(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(v, fl_acc(&b, &a).unwrap());
    }

    #[test]
    fn ridge_paths_agree_for_positive_beta(x in matrix(30, 5), y in matrix(30, 2), e in 1i32..8) {
        let beta = 10f64.powi(-e);
        let a = ridge_explicit(&x, &y, beta).unwrap().w_out;
        let b = ridge_svd(&x, &y, beta).unwrap().w_out;
        prop_assert!((&a - &b).norm() <= 1e-7 * a.norm().max(1e-12));
    }
}
