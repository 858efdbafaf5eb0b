//! Random valid models for property tests and benchmarks.
//!
//! Every generator returns a model that meets the standing assumptions:
//! complete and bounded recourse, a bounded support containing the origin
//! and all samples, and a penalty whose set `V` passes
//! [`validate_assumption3`](crate::penalty::validate_assumption3).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::casting::{cast, FeaturedDomain, LossFunction};
use crate::engine::{DecisionSet, EvaluationFunction, QuadraticModel, SatisficingModel};
use crate::error::Result;
use crate::penalty::{budgeted_norm, PolyhedralPenalty, PolyhedralSupport};

fn uniform_matrix(rng: &mut impl Rng, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

fn uniform_vector(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Box `[−u, u]` with `u ∈ [0.5, 2]` plus `extra` random cuts `aᵀz ≤ b`
/// with `b > 0`.
pub fn random_support(rng: &mut impl Rng, nz: usize, extra: usize) -> Result<PolyhedralSupport> {
    let u: Vec<f64> = (0..nz).map(|_| rng.random_range(0.5..2.0)).collect();
    let lo: Vec<f64> = u.iter().map(|v| -v).collect();
    let boxed = PolyhedralSupport::boxed(&lo, &u)?;
    if extra == 0 {
        return Ok(boxed);
    }
    let cuts = uniform_matrix(rng, extra, nz, -1.0, 1.0);
    let b = uniform_vector(rng, extra, 0.3, 1.5);
    let mut hmat = DMatrix::zeros(2 * nz + extra, nz);
    let mut h = DVector::zeros(2 * nz + extra);
    hmat.rows_mut(0, 2 * nz).copy_from(&boxed.hmat);
    h.rows_mut(0, 2 * nz).copy_from(&boxed.h);
    hmat.rows_mut(2 * nz, extra).copy_from(&cuts);
    h.rows_mut(2 * nz, extra).copy_from(&b);
    PolyhedralSupport::new(hmat, h)
}

/// `omega` points of the support, drawn uniformly from its bounding box
/// shrunk by 0.8 and kept when inside.
pub fn random_samples(rng: &mut impl Rng, z: &PolyhedralSupport, omega: usize) -> Vec<DVector<f64>> {
    let nz = z.n_z();
    let mut out = Vec::with_capacity(omega);
    // the leading 2·nz rows of supports built here are the box
    let u: Vec<f64> = (0..nz).map(|i| z.h[i].min(z.h[nz + i])).collect();
    while out.len() < omega {
        let p: Vec<f64> = (0..nz).map(|i| 0.8 * rng.random_range(-u[i]..=u[i])).collect();
        if z.contains(&p, 0.0) {
            out.push(DVector::from_vec(p));
        }
    }
    out
}

/// Budgeted norm with a random budget, or the synthetic penalty below.
pub fn random_penalty(rng: &mut impl Rng, nz: usize) -> Result<PolyhedralPenalty> {
    if rng.random_bool(0.75) {
        budgeted_norm(nz, rng.random_range(1..=nz))
    } else {
        synthetic_penalty(rng, nz, 2)
    }
}

/// A non-norm penalty with `s ≠ 0`: `V = {|λᵢ| ≤ tᵢ, rⱼᵀλ ≤ tⱼ + cⱼη, η ≤ t_η}`
/// with `cⱼ > 0`, so that paying `η` widens the admissible slopes.
pub fn synthetic_penalty(rng: &mut impl Rng, nz: usize, extra: usize) -> Result<PolyhedralPenalty> {
    let rows = 2 * nz + extra + 1;
    let mut m = DMatrix::zeros(rows, nz);
    let mut s = DVector::zeros(rows);
    let mut t = DVector::zeros(rows);
    for i in 0..nz {
        let box_t = rng.random_range(0.5..2.0);
        m[(i, i)] = 1.0;
        m[(nz + i, i)] = -1.0;
        t[i] = box_t;
        t[nz + i] = box_t;
    }
    for j in 0..extra {
        let r = 2 * nz + j;
        for i in 0..nz {
            m[(r, i)] = rng.random_range(-1.0..1.0);
        }
        s[r] = -rng.random_range(0.2..1.0);
        t[r] = rng.random_range(0.2..1.0);
    }
    s[rows - 1] = 1.0;
    t[rows - 1] = rng.random_range(0.5..1.5);
    PolyhedralPenalty::new(m, DMatrix::zeros(rows, 0), s, t)
}

/// `g(x, z) = max_i f_i(x) + F_i(x)ᵀz` with `n_rows` random pieces.
pub fn random_piecewise_model(
    rng: &mut impl Rng,
    nz: usize,
    nx: usize,
    n_rows: usize,
    omega: usize,
) -> Result<SatisficingModel> {
    let extra = rng.random_range(0..=1);
    let support = random_support(rng, nz, extra)?;
    let samples = random_samples(rng, &support, omega);
    let eval = EvaluationFunction::piecewise_max(
        uniform_vector(rng, n_rows, -1.0, 1.0),
        uniform_matrix(rng, n_rows, nx, -1.0, 1.0),
        uniform_matrix(rng, n_rows, nz, -1.0, 1.0),
        (0..nx).map(|_| uniform_matrix(rng, n_rows, nz, -0.5, 0.5)).collect(),
    )?;
    let penalty = random_penalty(rng, nz)?;
    let lo = vec![-1.0; nx];
    let hi = vec![1.0; nx];
    SatisficingModel::new(eval, support, penalty, samples, DecisionSet::boxed(&lo, &hi))
}

/// Exponential disutility of the portfolio loss `−xᵀz` over the simplex,
/// with a shared box support `[lo, hi]`, cast on the matching featured
/// domain.
pub fn random_cast_model(rng: &mut impl Rng, n: usize, omega: usize) -> Result<SatisficingModel> {
    let a = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let lo = -rng.random_range(0.3..1.0);
    let hi = rng.random_range(0.3..1.0);
    let support = PolyhedralSupport::boxed(&vec![lo; n], &vec![hi; n])?;
    let samples: Vec<DVector<f64>> = (0..omega)
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(0.8 * lo..0.8 * hi)))
        .collect();
    let c = cast(
        &LossFunction::ExpDisutility { a },
        FeaturedDomain::new(-hi, -lo),
        None,
    )?;
    let slices: Vec<DMatrix<f64>> = (0..n)
        .map(|j| {
            let mut w = DMatrix::zeros(1, n);
            w[(0, j)] = -1.0;
            w
        })
        .collect();
    let eval = EvaluationFunction::from_cast(
        &c,
        &DVector::zeros(1),
        &DMatrix::zeros(1, n),
        &DMatrix::zeros(1, n),
        &slices,
    )?;
    let penalty = budgeted_norm(n, rng.random_range(1..=n))?;
    SatisficingModel::new(eval, support, penalty, samples, DecisionSet::simplex(n))
}

/// Two-stage LP with nonnegative `B` that has a strictly positive column
/// and `d = Bᵀρ₀` for some `ρ₀ > 0`, so recourse is complete and bounded.
/// The penalty is the `ℓ₁` norm.
pub fn random_twostage_model(
    rng: &mut impl Rng,
    nf: usize,
    ny: usize,
    nz: usize,
    nx: usize,
    omega: usize,
) -> Result<SatisficingModel> {
    let mut b = uniform_matrix(rng, nf, ny, 0.0, 1.0);
    for i in 0..nf {
        b[(i, 0)] = rng.random_range(0.2..1.0);
    }
    let rho0 = uniform_vector(rng, nf, 0.1, 1.0);
    let d = b.transpose() * rho0;
    let eval = EvaluationFunction::new(
        b,
        d,
        uniform_vector(rng, nf, -1.0, 1.0),
        uniform_matrix(rng, nf, nx, -1.0, 1.0),
        uniform_matrix(rng, nf, nz, -1.0, 1.0),
        (0..nx).map(|_| uniform_matrix(rng, nf, nz, -0.5, 0.5)).collect(),
        crate::conic::ConeDescriptor::nonneg(nf),
    )?;
    let extra = rng.random_range(0..=2);
    let support = random_support(rng, nz, extra)?;
    let samples = random_samples(rng, &support, omega);
    let lo = vec![-1.0; nx];
    let hi = vec![1.0; nx];
    SatisficingModel::new(eval, support, budgeted_norm(nz, nz)?, samples, DecisionSet::boxed(&lo, &hi))
}

/// Quadratic model over the unit ball with decisions in `[−1, 1]^{n_x}`.
pub fn random_quadratic_model(rng: &mut impl Rng, nz: usize, nx: usize, na: usize) -> QuadraticModel {
    QuadraticModel {
        a_mat: uniform_matrix(rng, na, nz, -1.0, 1.0),
        a_mat_x: (0..nx).map(|_| uniform_matrix(rng, na, nz, -0.5, 0.5)).collect(),
        a_vec: uniform_vector(rng, na, -1.0, 1.0),
        a_vec_x: uniform_matrix(rng, na, nx, -1.0, 1.0),
        b_vec: uniform_vector(rng, nz, -1.0, 1.0),
        b_vec_x: uniform_matrix(rng, nz, nx, -1.0, 1.0),
        c: rng.random_range(-1.0..1.0),
        c_x: uniform_vector(rng, nx, -1.0, 1.0),
        radius: 1.0,
    }
}
