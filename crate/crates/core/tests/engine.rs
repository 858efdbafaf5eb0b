use nalgebra::{DMatrix, DVector};
use satisfice::conic::{ConeDescriptor, LinExpr, ModelBuilder, SolveOptions, SolveStatus};
use satisfice::engine::{
    empirical_optimum, quadratic_satisficing, robust_counterpart, solve_satisficing,
    solve_satisficing_with_z0, solve_twostage_dual, solve_twostage_primal, DecisionSet,
    EvaluationFunction, QuadraticModel, SatisficingModel, Target,
};
use satisfice::instances::{random_piecewise_model, random_quadratic_model, random_twostage_model};
use satisfice::oracle::{exact_worst_case_sample, grid_points, worst_case_grid, worst_case_sample, GridDomain};
use satisfice::penalty::{budgeted_norm, inner_max, PolyhedralSupport};
use satisfice::rng::{stream_rng, Stream};
use satisfice::Error;

fn opts() -> SolveOptions {
    SolveOptions::default()
}

/// g(x, z) = min {y : y ≥ x·z}
fn bilinear_model(x0: f64, zhat: f64) -> SatisficingModel {
    let eval = EvaluationFunction::piecewise_max(
        DVector::zeros(1),
        DMatrix::zeros(1, 1),
        DMatrix::zeros(1, 1),
        vec![DMatrix::from_element(1, 1, 1.0)],
    )
    .unwrap();
    SatisficingModel::new(
        eval,
        PolyhedralSupport::boxed(&[-5.0], &[5.0]).unwrap(),
        budgeted_norm(1, 1).unwrap(),
        vec![DVector::from_element(1, zhat)],
        DecisionSet::singleton(&[x0]),
    )
    .unwrap()
}

#[test]
fn empirical_optimum_of_a_singleton() {
    let (z0, x) = empirical_optimum(&bilinear_model(1.0, 2.0), &opts()).unwrap();
    assert!((z0 - 2.0).abs() < 1e-7);
    assert!((x[0] - 1.0).abs() < 1e-7);
}

#[test]
fn target_below_z0_is_refused() {
    let m = bilinear_model(1.0, 2.0);
    match solve_satisficing(&m, Target::Tau(1.5), &opts()) {
        Err(Error::TargetTooLow { z0, .. }) => assert!((z0 - 2.0).abs() < 1e-7),
        other => panic!("expected target-too-low, got {other:?}"),
    }
}

#[test]
fn linear_single_sample_matches_inner_max() {
    // g(z) = z over [−5, 5] with ẑ = 0, p = |z|: sup z − k|z| ≤ τ needs k ≥ 1 − τ/5
    let m = bilinear_model(1.0, 0.0);
    let tau = 2.0;
    let sol = solve_satisficing(&m, Target::Tau(tau), &opts()).unwrap();
    assert!((sol.k - 0.6).abs() < 1e-6, "k = {}", sol.k);
    let v = inner_max(&[1.0], sol.k, &m.support, &m.penalty).unwrap().value;
    assert!(v <= tau + 1e-6);
}

#[test]
fn constant_robust_constraint_is_feasible() {
    let eval = EvaluationFunction::piecewise_max(
        DVector::zeros(3),
        DMatrix::zeros(3, 0),
        DMatrix::zeros(3, 0),
        vec![],
    )
    .unwrap();
    let mut m = ModelBuilder::new();
    robust_counterpart(&mut m, &eval, LinExpr::constant(-1.0), &vec![LinExpr::zero(); 3]);
    let s = m.solve(&opts()).unwrap();
    assert_eq!(s.result.status, SolveStatus::Optimal);
}

#[test]
fn simplex_counterpart_is_a_coordinate_max() {
    // P = {ρ ≥ 0, 1ᵀρ = 1}; the robust constraint Γᵀρ ≤ t holds iff max Γᵢ ≤ t
    let gamma = [0.3, -1.2, 0.9, 0.1];
    let eval = EvaluationFunction::piecewise_max(
        DVector::zeros(4),
        DMatrix::zeros(4, 0),
        DMatrix::zeros(4, 0),
        vec![],
    )
    .unwrap();
    let mut m = ModelBuilder::new();
    let t = m.var();
    let big: Vec<LinExpr> = gamma.iter().map(|&g| LinExpr::constant(g)).collect();
    robust_counterpart(&mut m, &eval, -LinExpr::from(t), &big);
    m.minimize(t.into());
    let s = m.solve(&opts()).unwrap();
    assert!((s.value(t) - 0.9).abs() < 1e-7);
}

fn one_d_quadratic() -> QuadraticModel {
    QuadraticModel {
        a_mat: DMatrix::from_element(1, 1, 1.0),
        a_mat_x: vec![DMatrix::zeros(1, 1)],
        a_vec: DVector::zeros(1),
        a_vec_x: DMatrix::zeros(1, 1),
        b_vec: DVector::zeros(1),
        b_vec_x: DMatrix::zeros(1, 1),
        c: 0.0,
        c_x: DVector::zeros(1),
        radius: 1.0,
    }
}

#[test]
fn quadratic_one_dimensional_example() {
    let q = one_d_quadratic();
    let sol = quadratic_satisficing(&q, &DecisionSet::singleton(&[0.0]), 0.5, &opts()).unwrap();
    assert!((sol.k - 0.5).abs() < 1e-6, "k = {}", sol.k);
    // 1-D scan of z² − k z² on [−1, 1]
    let worst = (0..=400)
        .map(|i| -1.0 + i as f64 / 200.0)
        .map(|z: f64| z * z - sol.k * z * z)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((worst - 0.5).abs() < 1e-6);
}

#[test]
fn quadratic_without_z_dependence_needs_no_fragility() {
    let mut q = one_d_quadratic();
    q.a_mat = DMatrix::zeros(1, 1);
    q.a_vec = DVector::from_element(1, 0.5);
    q.c = 0.1;
    let sol = quadratic_satisficing(&q, &DecisionSet::singleton(&[0.0]), 0.35, &opts()).unwrap();
    assert!(sol.k < 1e-7);
    assert!(matches!(
        quadratic_satisficing(&q, &DecisionSet::singleton(&[0.0]), 0.3, &opts()),
        Err(Error::TargetTooLow { .. })
    ));
}

#[test]
fn quadratic_k_is_monotone_and_safe() {
    let mut rng = stream_rng(11, Stream::TestModels);
    let q = random_quadratic_model(&mut rng, 2, 2, 2);
    let x = DecisionSet::boxed(&[-1.0, -1.0], &[1.0, 1.0]);
    let nominal = satisfice::engine::min_nominal_quadratic(&q, &x, &opts()).unwrap().0;
    let points = grid_points(&GridDomain::Ball { dim: 2, radius: 1.0 }, 41, 0).unwrap();
    let mut last = f64::INFINITY;
    for step in 1..=5 {
        let tau = nominal + 0.2 * step as f64;
        let sol = quadratic_satisficing(&q, &x, tau, &opts()).unwrap();
        assert!(sol.k <= last + 1e-7);
        last = sol.k;
        let (worst, _) = worst_case_grid(
            |z| Ok(q.value(&sol.x, z)),
            |z| Ok(z.iter().map(|v| v * v).sum()),
            &points,
            sol.k,
        )
        .unwrap();
        assert!(worst <= tau + 1e-5);
    }
}

#[test]
fn piecewise_models_are_safe_and_exact() {
    let mut rng = stream_rng(5, Stream::TestModels);
    for _ in 0..5 {
        let model = random_piecewise_model(&mut rng, 2, 1, 3, 3).unwrap();
        let (z0, _) = empirical_optimum(&model, &opts()).unwrap();
        let tau = z0 + 0.1;
        let sol = solve_satisficing_with_z0(&model, tau, z0, &opts()).unwrap();
        let mut total = 0.0;
        for w in 0..model.omega() {
            let (grid, _) = worst_case_sample(&model, &sol.x, w, sol.k, 41, 0).unwrap();
            let exact = exact_worst_case_sample(&model, &sol.x, w, sol.k).unwrap();
            assert!(grid <= exact + 1e-7);
            assert!(exact <= sol.upsilon[w] + 1e-6, "{exact} > {}", sol.upsilon[w]);
            total += exact;
        }
        assert!(total / model.omega() as f64 <= tau + 1e-6);
    }
}

#[test]
fn twostage_without_uncertainty_needs_no_fragility() {
    let mut rng = stream_rng(2, Stream::TestModels);
    let mut model = random_twostage_model(&mut rng, 3, 2, 2, 1, 2).unwrap();
    model.eval.f_z = DMatrix::zeros(3, 2);
    model.eval.f_zx = vec![DMatrix::zeros(3, 2)];
    let (z0, _) = empirical_optimum(&model, &opts()).unwrap();
    let p = solve_twostage_primal(&model, z0 + 1e-6, z0, &opts()).unwrap();
    let d = solve_twostage_dual(&model, z0 + 1e-6, z0, &opts()).unwrap();
    assert!(p.k < 1e-6 && d.k < 1e-6, "{} {}", p.k, d.k);
}

#[test]
fn twostage_dual_dominates_primal_and_is_safe() {
    let mut rng = stream_rng(3, Stream::TestModels);
    for _ in 0..5 {
        let model = random_twostage_model(&mut rng, 3, 3, 2, 1, 2).unwrap();
        let (z0, _) = empirical_optimum(&model, &opts()).unwrap();
        let tau = z0 + 0.05 * (1.0 + z0.abs());
        let p = solve_twostage_primal(&model, tau, z0, &opts()).unwrap();
        let d = solve_twostage_dual(&model, tau, z0, &opts()).unwrap();
        let g = solve_satisficing_with_z0(&model, tau, z0, &opts()).unwrap();
        assert!(d.k <= p.k + 1e-6, "dual {} primal {}", d.k, p.k);
        assert!((g.k - d.k).abs() <= 1e-6 * (1.0 + d.k), "generic {} dual {}", g.k, d.k);
        for sol in [&p, &d] {
            for w in 0..model.omega() {
                let (worst, _) = worst_case_sample(&model, &sol.x, w, sol.k, 21, 0).unwrap();
                assert!(worst <= sol.upsilon[w] + 1e-5);
            }
        }
    }
}

#[test]
fn twostage_rejects_other_cones() {
    let model = bilinear_model(1.0, 0.0);
    let mut m2 = model.clone();
    m2.eval.cone = ConeDescriptor::new(vec![satisfice::conic::Cone::Soc { dim: 1 }]);
    assert!(solve_twostage_dual(&m2, 1.0, 0.0, &opts()).is_err());
}
