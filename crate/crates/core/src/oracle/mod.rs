//! Independent ground truth used to check the reformulations: vertex
//! enumeration, grid and exact worst-case evaluation, recourse checks, the
//! budgeted-set probability bound and the two-point certainty equivalent.

mod vertices;

pub use vertices::{basic_points, vertices, VertexSet, MAX_VERTEX_DIM, MAX_VERTEX_ROWS};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::casting::{CastModel, FeaturedDomain};
use crate::conic::{Cone, ConeDescriptor, LinExpr, ModelBuilder, SolveOptions, SolveStatus};
use crate::engine::{EvaluationFunction, SatisficingModel};
use crate::error::{validation, Error, Result};
use crate::penalty::{inner_max, PolyhedralPenalty, PolyhedralSupport};
use crate::rng::{stream_rng, Stream};

/// Recognizes the cast structure `B = [0; (1,0); (0,1); (0,1)]`,
/// `K = K_ℓ × ℝ₊` and returns the cast model it encodes.
fn as_cast(eval: &EvaluationFunction) -> Option<CastModel> {
    let [Cone::LossPerspective { loss }, Cone::Nonneg { dim: 1 }] = eval.cone.atoms.as_slice() else {
        return None;
    };
    if eval.n_y() != 2 || eval.d[0] != 1.0 {
        return None;
    }
    let c = CastModel {
        loss: loss.clone(),
        domain: FeaturedDomain::real_line(),
        p: eval.d[1],
        depth: 0.0,
    };
    (c.recourse_matrix() == eval.b).then_some(c)
}

/// `g(x, z)` by a conic solve of the recourse problem.
pub fn eval_g_conic(eval: &EvaluationFunction, x: &[f64], z: &[f64], opts: &SolveOptions) -> Result<f64> {
    let rhs = eval.rhs_at(x, z);
    let mut m = ModelBuilder::new();
    let rows: Vec<LinExpr> = rhs.iter().map(|&v| LinExpr::constant(v)).collect();
    let obj = eval.add_recourse(&mut m, &rows);
    m.minimize(obj);
    let s = m.solve(opts)?;
    match s.result.status {
        SolveStatus::Optimal => Ok(s.result.objective_value),
        SolveStatus::Infeasible => validation("eval_g: the recourse problem has no feasible y"),
        SolveStatus::Unbounded => validation("eval_g: the recourse problem is unbounded below"),
        SolveStatus::NumericalError => Err(Error::Solver("eval_g: numerical error".into())),
    }
}

/// `g(x, z)`, in closed form for piecewise-max and cast evaluation
/// functions and by a conic solve otherwise.
pub fn eval_g(eval: &EvaluationFunction, x: &[f64], z: &[f64]) -> Result<f64> {
    let rhs = eval.rhs_at(x, z);
    if eval.is_piecewise_max() {
        return Ok(rhs.max());
    }
    if let Some(c) = as_cast(eval) {
        let nw = c.loss.arity();
        if (rhs[nw] + c.p).abs() <= 1e-12 && rhs[nw + 1] == 0.0 && rhs[nw + 2] == 1.0 {
            let w: Vec<f64> = rhs.iter().take(nw).map(|v| -v).collect();
            return Ok(c.eval(&w));
        }
    }
    eval_g_conic(eval, x, z, &SolveOptions::default())
}

/// Region sampled by [`grid_points`].
#[derive(Clone, Debug)]
pub enum GridDomain {
    Polytope(PolyhedralSupport),
    Ball { dim: usize, radius: f64 },
}

/// Default points per dimension: 41, or 11 for four dimensions.
pub fn default_density(n_z: usize) -> usize {
    if n_z >= 4 {
        11
    } else {
        41
    }
}

fn bounding_box(z: &PolyhedralSupport) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = z.n_z();
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        hi[i] = z.support_function(&e)?;
        e[i] = -1.0;
        lo[i] = -z.support_function(&e)?;
        if !hi[i].is_finite() || !lo[i].is_finite() {
            return validation("grid: the support set is unbounded");
        }
    }
    Ok((lo, hi))
}

fn lattice(lo: &[f64], hi: &[f64], density: usize, mut f: impl FnMut(Vec<f64>)) {
    let n = lo.len();
    let density = density.max(2);
    let mut idx = vec![0usize; n];
    loop {
        f((0..n)
            .map(|i| lo[i] + (hi[i] - lo[i]) * idx[i] as f64 / (density - 1) as f64)
            .collect());
        let mut i = 0;
        while i < n {
            idx[i] += 1;
            if idx[i] < density {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == n {
            return;
        }
    }
}

/// Sample points of the domain. Up to four dimensions this is a full
/// lattice of `density` points per axis; beyond, `4·density²` uniform
/// points of the bounding box. Polytopes add the origin and, when
/// enumerable, their vertices; ball lattice points outside the ball are
/// projected radially onto the sphere.
pub fn grid_points(domain: &GridDomain, density: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    match domain {
        GridDomain::Ball { dim, radius } => {
            let lo = vec![-radius; *dim];
            let hi = vec![*radius; *dim];
            lattice(&lo, &hi, density, |p| {
                let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= *radius {
                    out.push(p);
                } else {
                    out.push(p.iter().map(|v| v * radius / norm).collect());
                }
            });
        }
        GridDomain::Polytope(z) => {
            let n = z.n_z();
            let (lo, hi) = bounding_box(z)?;
            let tol = 1e-9;
            if n <= 4 {
                lattice(&lo, &hi, density, |p| {
                    if z.contains(&p, tol) {
                        out.push(p);
                    }
                });
            } else {
                let mut rng = stream_rng(seed, Stream::TestModels);
                for _ in 0..4 * density * density {
                    let p: Vec<f64> = (0..n).map(|i| rng.random_range(lo[i]..=hi[i])).collect();
                    if z.contains(&p, tol) {
                        out.push(p);
                    }
                }
            }
            out.push(vec![0.0; n]);
            if n <= MAX_VERTEX_DIM && z.n_h() <= MAX_VERTEX_ROWS {
                if let Ok(vs) = vertices(&z.hmat, &z.h, false) {
                    out.extend(vs.vertices.into_iter().map(|v| v.as_slice().to_vec()));
                }
            }
        }
    }
    Ok(out)
}

/// `max_j g(z_j) − k·p(z_j)` over the given points, with the maximizer. A
/// lower bound on the supremum.
pub fn worst_case_grid(
    g: impl Fn(&[f64]) -> Result<f64>,
    p: impl Fn(&[f64]) -> Result<f64>,
    points: &[Vec<f64>],
    k: f64,
) -> Result<(f64, Vec<f64>)> {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for z in points {
        let v = g(z)? - k * p(z)?;
        if v > best.0 {
            best = (v, z.clone());
        }
    }
    Ok(best)
}

/// Grid worst case of `g^ω(x, ζ) − k·p(ζ)` over the shifted support `Z^ω`.
pub fn worst_case_sample(
    model: &SatisficingModel,
    x: &[f64],
    w: usize,
    k: f64,
    density: usize,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let zhat = &model.samples[w];
    let shifted = PolyhedralSupport {
        hmat: model.support.hmat.clone(),
        h: model.shifted_h(w),
    };
    let points = grid_points(&GridDomain::Polytope(shifted), density, seed)?;
    worst_case_grid(
        |zeta| {
            let z: Vec<f64> = zeta.iter().zip(zhat.iter()).map(|(a, b)| a + b).collect();
            eval_g(&model.eval, x, &z)
        },
        |zeta| model.penalty.value(zeta),
        &points,
        k,
    )
}

/// `sup_{z∈Z} max_i (f_i + F_iᵀz) − k·p(z)` row by row through
/// [`inner_max`]. Exact for `k ≥ 0`.
pub fn exact_worst_case_piecewise(
    f_rows: &DVector<f64>,
    f_mat: &DMatrix<f64>,
    support: &PolyhedralSupport,
    penalty: &PolyhedralPenalty,
    k: f64,
) -> Result<f64> {
    if f_mat.nrows() != f_rows.len() {
        return validation("exact_worst_case_piecewise: f and F have different row counts");
    }
    let mut best = f64::NEG_INFINITY;
    for i in 0..f_rows.len() {
        let a: Vec<f64> = f_mat.row(i).iter().cloned().collect();
        best = best.max(f_rows[i] + inner_max(&a, k, support, penalty)?.value);
    }
    Ok(best)
}

/// [`exact_worst_case_piecewise`] for sample `w` of a piecewise-max model.
pub fn exact_worst_case_sample(model: &SatisficingModel, x: &[f64], w: usize, k: f64) -> Result<f64> {
    if !model.eval.is_piecewise_max() {
        return validation("exact worst case needs an evaluation of the form min {y : 1y ≥ f(x) + F(x)z}");
    }
    let shifted = PolyhedralSupport {
        hmat: model.support.hmat.clone(),
        h: model.shifted_h(w),
    };
    let f = model.eval.rhs_at(x, model.samples[w].as_slice());
    let fm = model.eval.big_f_at(x);
    exact_worst_case_piecewise(&f, &fm, &shifted, &model.penalty, k)
}

/// `max_{z∈Z} aᵀz − k·p(z)` with `p` rebuilt as `max_j λ_jᵀz − η_j` over
/// the vertices of the lifted set `{(λ, η, μ) : Mλ + Nμ + sη ≤ t, η ≥ 0}`.
pub fn vertex_epigraph_inner_max(
    a: &[f64],
    k: f64,
    z: &PolyhedralSupport,
    p: &PolyhedralPenalty,
) -> Result<f64> {
    let (nz, nmu, nm) = (p.n_z(), p.n_mu(), p.n_m());
    let dim = nz + 1 + nmu;
    let mut lifted = DMatrix::zeros(nm + 1, dim);
    let mut rhs = DVector::zeros(nm + 1);
    for r in 0..nm {
        for j in 0..nz {
            lifted[(r, j)] = p.m[(r, j)];
        }
        lifted[(r, nz)] = p.s[r];
        for j in 0..nmu {
            lifted[(r, nz + 1 + j)] = p.n[(r, j)];
        }
        rhs[r] = p.t[r];
    }
    lifted[(nm, nz)] = -1.0;
    let pieces = basic_points(&lifted, &rhs);
    if pieces.is_empty() {
        return validation("vertex oracle: the lifted penalty set has no vertices");
    }

    let mut m = ModelBuilder::new();
    let zv = m.vars(nz);
    let s = m.var();
    for r in 0..z.n_h() {
        let row: Vec<f64> = z.hmat.row(r).iter().cloned().collect();
        m.le(LinExpr::dot(&zv, &row), LinExpr::constant(z.h[r]));
    }
    for v in &pieces {
        let lam: Vec<f64> = v.iter().take(nz).cloned().collect();
        m.le(LinExpr::dot(&zv, &lam) + (-v[nz]), s.into());
    }
    m.minimize(-LinExpr::dot(&zv, a) + LinExpr::term(s, k));
    let sol = m.solve(&SolveOptions::default())?;
    match sol.result.status {
        SolveStatus::Optimal => Ok(-sol.result.objective_value),
        st => Err(Error::Solver(format!("vertex oracle LP ended with {st:?}"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecourseReport {
    pub bounded: bool,
    pub bounded_value: f64,
    /// Sampled evidence only: every tested right-hand side was feasible.
    pub complete: bool,
    pub directions_tested: usize,
    pub failures: Vec<Vec<f64>>,
}

/// Checks `min {dᵀy : By ∈ K} = 0` and samples right-hand sides `v` for
/// feasibility of `By − v ∈ K`: first `±eᵢ`, then random directions with
/// log-uniform scale in `[1e−2, 1e2]`, `max(trials, 2n_f)` in total.
pub fn check_complete_bounded_recourse(
    b: &DMatrix<f64>,
    d: &DVector<f64>,
    cone: &ConeDescriptor,
    trials: usize,
    seed: u64,
) -> Result<RecourseReport> {
    let (nf, ny) = b.shape();
    if d.len() != ny || cone.total_dim() != nf {
        return validation("recourse check: B, d and K have inconsistent dimensions");
    }
    let opts = SolveOptions::default();
    let eval = EvaluationFunction::new(
        b.clone(),
        d.clone(),
        DVector::zeros(nf),
        DMatrix::zeros(nf, 0),
        DMatrix::zeros(nf, 0),
        Vec::new(),
        cone.clone(),
    )?;

    let mut m = ModelBuilder::new();
    let rows = vec![LinExpr::zero(); nf];
    let obj = eval.add_recourse(&mut m, &rows);
    m.minimize(obj);
    let s = m.solve(&opts)?;
    let (bounded, bounded_value) = match s.result.status {
        SolveStatus::Optimal => (s.result.objective_value >= -1e-7, s.result.objective_value),
        SolveStatus::Unbounded => (false, f64::NEG_INFINITY),
        st => return Err(Error::Solver(format!("recourse check: boundedness LP ended with {st:?}"))),
    };

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..nf {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; nf];
            v[i] = sign;
            dirs.push(v);
        }
    }
    let mut rng = stream_rng(seed, Stream::TestModels);
    while dirs.len() < trials {
        let g: Vec<f64> = (0..nf).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = g.iter().map(|v: &f64| v * v).sum::<f64>().sqrt().max(1e-12);
        let scale = 10f64.powf(rng.random_range(-2.0..=2.0));
        dirs.push(g.iter().map(|v| v / norm * scale).collect());
    }

    let mut failures = Vec::new();
    for v in &dirs {
        let mut m = ModelBuilder::new();
        let rows: Vec<LinExpr> = v.iter().map(|&vi| LinExpr::constant(vi)).collect();
        eval.add_recourse(&mut m, &rows);
        let s = m.solve(&opts)?;
        if s.result.status != SolveStatus::Optimal {
            failures.push(v.clone());
        }
    }
    Ok(RecourseReport {
        bounded,
        bounded_value,
        complete: failures.is_empty(),
        directions_tested: dirs.len(),
        failures,
    })
}

/// Coordinate distribution of the Monte Carlo probability bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McDistribution {
    /// Uniform on `[−1, 1]`, variance 1/3.
    Uniform,
    /// `±1` with equal probability, variance 1.
    TwoPoint,
}

impl McDistribution {
    pub fn variance(self) -> f64 {
        match self {
            McDistribution::Uniform => 1.0 / 3.0,
            McDistribution::TwoPoint => 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McBoundReport {
    pub n: usize,
    pub c: f64,
    pub theta: f64,
    pub trials: usize,
    pub empirical: f64,
    pub standard_error: f64,
    pub bound: f64,
}

impl McBoundReport {
    /// `empirical ≤ bound + 3·SE`
    pub fn holds(&self) -> bool {
        self.empirical <= self.bound + 3.0 * self.standard_error
    }
}

/// `exp(−(θ√n − c)²/(2θ))`
pub fn budget_probability_bound(n: usize, c: f64, theta: f64) -> f64 {
    let gap = theta * (n as f64).sqrt() - c;
    (-gap * gap / (2.0 * theta)).exp()
}

/// Monte Carlo estimate of `P[‖z̃‖₁ ≤ c√n]` for i.i.d. coordinates,
/// together with the analytic bound.
pub fn mc_budget_bound(
    n: usize,
    c: f64,
    theta: f64,
    dist: McDistribution,
    trials: usize,
    seed: u64,
) -> Result<McBoundReport> {
    if n == 0 || trials == 0 {
        return validation("mc_budget_bound: n and trials must be positive");
    }
    if (theta - dist.variance()).abs() > 1e-12 {
        return validation(format!(
            "mc_budget_bound: θ = {theta} does not match the variance {} of the distribution",
            dist.variance()
        ));
    }
    let r = c * (n as f64).sqrt();
    if !(c > 0.0 && c < theta * (n as f64).sqrt()) {
        return validation(format!("mc_budget_bound: need 0 < c < θ√n, got c = {c}"));
    }
    let mut rng = stream_rng(seed, Stream::MonteCarlo);
    let mut hits = 0usize;
    for _ in 0..trials {
        let norm: f64 = match dist {
            McDistribution::Uniform => (0..n).map(|_| rng.random_range(-1.0f64..1.0).abs()).sum(),
            McDistribution::TwoPoint => n as f64,
        };
        if norm <= r {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(McBoundReport {
        n,
        c,
        theta,
        trials,
        empirical: p,
        standard_error: (p * (1.0 - p) / trials as f64).sqrt(),
        bound: budget_probability_bound(n, c, theta),
    })
}

/// Certainty equivalent `−(1/a)·log E[exp(−a xᵀz̃)]` of a portfolio under
/// independent two-point returns with means `μ`, deviations `σ` and
/// up-probabilities `β`.
pub fn certainty_equivalent(x: &[f64], mu: &[f64], sigma: &[f64], beta: &[f64], a: f64) -> Result<f64> {
    let n = x.len();
    if mu.len() != n || sigma.len() != n || beta.len() != n {
        return validation("certainty_equivalent: vectors differ in length");
    }
    if !(a > 0.0) {
        return validation(format!("certainty_equivalent: a must be positive, got {a}"));
    }
    if beta.iter().any(|&b| !(b > 0.0 && b < 1.0)) {
        return validation("certainty_equivalent: every β must lie in (0, 1)");
    }
    if x.iter().any(|&v| v < -1e-8) || (x.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return validation("certainty_equivalent: x must lie on the simplex");
    }
    let mut ce = 0.0;
    for i in 0..n {
        let s = sigma[i] * (beta[i] * (1.0 - beta[i])).sqrt();
        let u1 = -a * x[i] * s / beta[i];
        let u2 = a * x[i] * s / (1.0 - beta[i]);
        let m = u1.max(u2);
        let lse = m + (beta[i] * (u1 - m).exp() + (1.0 - beta[i]) * (u2 - m).exp()).ln();
        ce += x[i] * mu[i] - lse / a;
    }
    Ok(ce)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::casting::{cast, LossFunction};

    #[test]
    fn bound_arithmetic() {
        let b = budget_probability_bound(100, 1.0, 1.0 / 3.0);
        let expected = (-(10.0f64 / 3.0 - 1.0).powi(2) * 1.5).exp();
        assert!((b - expected).abs() < 1e-15);
        assert!((budget_probability_bound(25, 2.0, 1.0) - (-4.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn two_point_norm_is_deterministic() {
        let r = mc_budget_bound(25, 2.0, 1.0, McDistribution::TwoPoint, 1000, 1).unwrap();
        assert_eq!(r.empirical, 0.0);
        assert!(r.holds());
        assert!(mc_budget_bound(25, 6.0, 1.0, McDistribution::TwoPoint, 10, 1).is_err());
        assert!(mc_budget_bound(25, 2.0, 0.5, McDistribution::TwoPoint, 10, 1).is_err());
    }

    #[test]
    fn ce_of_a_deterministic_asset() {
        let ce = certainty_equivalent(&[1.0, 0.0], &[0.12, 0.2], &[0.0, 0.3], &[0.6, 0.7], 2.0).unwrap();
        assert_eq!(ce, 0.12);
        let x = [0.5, 0.5];
        let ce = certainty_equivalent(&x, &[0.12, 0.2], &[0.1, 0.3], &[0.6, 0.7], 1e-8).unwrap();
        assert!((ce - 0.16).abs() < 1e-4);
    }

    #[test]
    fn identity_recourse_passes() {
        let r = check_complete_bounded_recourse(
            &DMatrix::identity(2, 2),
            &DVector::from_element(2, 1.0),
            &ConeDescriptor::nonneg(2),
            16,
            3,
        )
        .unwrap();
        assert!(r.bounded && r.complete);
    }

    #[test]
    fn closed_form_cast_matches_conic_solve() {
        let loss = LossFunction::ExpDisutility { a: 2.0 };
        let c = cast(&loss, FeaturedDomain::new(-1.0, 1.0), None).unwrap();
        let eval = EvaluationFunction::from_cast(
            &c,
            &DVector::zeros(1),
            &DMatrix::zeros(1, 0),
            &DMatrix::from_element(1, 1, 1.0),
            &[],
        )
        .unwrap();
        for z in [-0.7, 0.0, 0.4, 1.0] {
            let a = eval_g(&eval, &[], &[z]).unwrap();
            let b = eval_g_conic(&eval, &[], &[z], &SolveOptions::default()).unwrap();
            assert!((a - b).abs() < 1e-6, "z = {z}: {a} vs {b}");
            assert!((a - loss.value(&[z])).abs() < 1e-6);
        }
    }
}
