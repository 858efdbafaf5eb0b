use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use satisfice::casting::{cast, FeaturedDomain, LossFunction};
use satisfice::conic::SolveOptions;
use satisfice::engine::{empirical_optimum, solve_satisficing_with_z0};
use satisfice::instances::{random_penalty, random_piecewise_model, random_support};
use satisfice::oracle::vertex_epigraph_inner_max;
use satisfice::penalty::{budgeted_norm, budgeted_value, eval_penalty, inner_max};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn budgeted_norm_lp_matches_closed_form(
        zeta in prop::collection::vec(-3.0f64..3.0, 1..6),
        g in 1usize..6,
    ) {
        let gamma = g.min(zeta.len());
        let p = budgeted_norm(zeta.len(), gamma).unwrap();
        let lp = eval_penalty(&p, &zeta).unwrap();
        prop_assert!((lp - budgeted_value(&zeta, gamma)).abs() < 1e-7);
    }

    #[test]
    fn penalty_is_convex_and_vanishes_at_zero(
        seed in any::<u64>(),
        u in prop::collection::vec(-2.0f64..2.0, 3),
        v in prop::collection::vec(-2.0f64..2.0, 3),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_penalty(&mut rng, 3).unwrap();
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 0.5 * (a + b)).collect();
        let (pu, pv, pm) = (p.value(&u).unwrap(), p.value(&v).unwrap(), p.value(&mid).unwrap());
        prop_assert!(p.value(&[0.0; 3]).unwrap().abs() < 1e-8);
        prop_assert!(pu >= -1e-9 && pv >= -1e-9);
        prop_assert!(pm <= 0.5 * (pu + pv) + 1e-7);
    }

    #[test]
    fn inner_max_matches_vertex_epigraph(
        seed in any::<u64>(),
        a in prop::collection::vec(-2.0f64..2.0, 3),
        k in 0.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = random_support(&mut rng, 3, 1).unwrap();
        let p = random_penalty(&mut rng, 3).unwrap();
        let lp = inner_max(&a, k, &z, &p).unwrap().value;
        let ve = vertex_epigraph_inner_max(&a, k, &z, &p).unwrap();
        prop_assert!((lp - ve).abs() < 1e-6 * (1.0 + ve.abs()), "{} vs {}", lp, ve);
    }

    #[test]
    fn cast_never_exceeds_the_loss(w in -6.0f64..6.0, which in 0usize..3) {
        let loss = match which {
            0 => LossFunction::ExpDisutility { a: 1.0 },
            1 => LossFunction::Huber { delta: 1.0 },
            _ => LossFunction::Logexp,
        };
        let c = cast(&loss, FeaturedDomain::new(-2.0, 2.0), None).unwrap();
        let lhat = c.eval(&[w]);
        prop_assert!(lhat <= loss.value(&[w]) + 1e-8);
        if (-2.0..=2.0).contains(&w) {
            prop_assert!((lhat - loss.value(&[w])).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn fragility_is_nonincreasing_in_the_target(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = random_piecewise_model(&mut rng, 2, 1, 3, 2).unwrap();
        let opts = SolveOptions::default();
        let (z0, _) = empirical_optimum(&model, &opts).unwrap();
        let mut last = f64::INFINITY;
        for i in 0..5 {
            let tau = z0 + 0.01 + 0.2 * i as f64;
            let k = solve_satisficing_with_z0(&model, tau, z0, &opts).unwrap().k;
            prop_assert!(k <= last + 1e-6, "k({}) = {} after {}", tau, k, last);
            last = k;
        }
    }
}
