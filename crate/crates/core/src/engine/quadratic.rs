use std::f64::consts::SQRT_2;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{svec_index, Cone, LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use crate::error::{validation, Error, Result};

use super::{BuildStats, DecisionSet};

/// `g(x, z) = ‖A(x)z + a(x)‖² + b(x)ᵀz + c(x)` over the ball `‖z‖ ≤ r`, with
/// every coefficient affine in `x`. The penalty is `‖z‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticModel {
    pub a_mat: DMatrix<f64>,
    pub a_mat_x: Vec<DMatrix<f64>>,
    pub a_vec: DVector<f64>,
    pub a_vec_x: DMatrix<f64>,
    pub b_vec: DVector<f64>,
    pub b_vec_x: DMatrix<f64>,
    pub c: f64,
    pub c_x: DVector<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSolution {
    pub k: f64,
    pub x: Vec<f64>,
    pub lambda: f64,
    pub tau: f64,
    /// `min_{x∈X} g(x, 0)`
    pub nominal: f64,
    pub stats: BuildStats,
}

impl QuadraticModel {
    pub fn validate(&self) -> Result<()> {
        let (na, nz) = self.a_mat.shape();
        let nx = self.c_x.len();
        if self.a_mat_x.len() != nx
            || self.a_mat_x.iter().any(|m| m.shape() != (na, nz))
            || self.a_vec.len() != na
            || self.a_vec_x.shape() != (na, nx)
            || self.b_vec.len() != nz
            || self.b_vec_x.shape() != (nz, nx)
        {
            return validation("quadratic model: inconsistent dimensions");
        }
        if !(self.radius > 0.0) {
            return validation(format!("quadratic model: radius must be positive, got {}", self.radius));
        }
        Ok(())
    }

    pub fn n_x(&self) -> usize {
        self.c_x.len()
    }

    pub fn n_z(&self) -> usize {
        self.a_mat.ncols()
    }

    pub fn n_a(&self) -> usize {
        self.a_mat.nrows()
    }

    fn a_mat_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.a_mat.clone();
        for (j, aj) in self.a_mat_x.iter().enumerate() {
            m += aj * x[j];
        }
        m
    }

    pub fn value(&self, x: &[f64], z: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let zv = DVector::from_column_slice(z);
        let inner = self.a_mat_at(x) * &zv + &self.a_vec + &self.a_vec_x * &xv;
        let b = &self.b_vec + &self.b_vec_x * &xv;
        inner.norm_squared() + b.dot(&zv) + self.c + self.c_x.dot(&xv)
    }

    fn a_entry(&self, x: &[Var], i: usize, j: usize) -> LinExpr {
        let mut e = LinExpr::constant(self.a_mat[(i, j)]);
        for (l, al) in self.a_mat_x.iter().enumerate() {
            e.add_term(x[l], al[(i, j)]);
        }
        e
    }

    fn affine(&self, x: &[Var], c0: f64, row: impl Iterator<Item = f64>) -> LinExpr {
        let mut e = LinExpr::constant(c0);
        for (l, c) in row.enumerate() {
            e.add_term(x[l], c);
        }
        e
    }
}

/// `min_{x∈X} g(x, 0)`, the smallest attainable target.
pub fn min_nominal_quadratic(
    q: &QuadraticModel,
    decisions: &DecisionSet,
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>)> {
    q.validate()?;
    let mut m = ModelBuilder::new();
    let x = m.vars(q.n_x());
    decisions.add_to(&mut m, &x);
    let t = m.var();
    // t ≥ ‖a(x)‖² as (t + 1, t − 1, 2a(x)) ∈ SOC
    let mut rows = vec![LinExpr::from(t) + 1.0, LinExpr::from(t) + -1.0];
    for i in 0..q.n_a() {
        rows.push(q.affine(&x, q.a_vec[i], q.a_vec_x.row(i).iter().cloned()).scaled(2.0));
    }
    let dim = rows.len();
    m.add_cone(rows, Cone::Soc { dim });
    m.minimize(LinExpr::from(t) + q.affine(&x, q.c, q.c_x.iter().cloned()));
    let s = m.solve(opts)?;
    match s.result.status {
        SolveStatus::Optimal => Ok((s.result.objective_value, s.values(&x))),
        SolveStatus::Infeasible => validation("decision set is empty"),
        SolveStatus::Unbounded => validation("g(x, 0) is unbounded below on X"),
        st => Err(Error::Solver(format!("nominal quadratic problem ended with {st:?}"))),
    }
}

/// Exact robust satisficing for quadratic evaluation functions over a ball:
/// `min k` subject to the S-lemma LMI
///
/// ```text
/// [ I      a(x)               A(x)    ]
/// [ a(x)ᵀ  τ − c(x) − λr²     −b(x)ᵀ/2 ]  ⪰ 0,  λ ≥ 0.
/// [ A(x)ᵀ  −b(x)/2            (k+λ)I  ]
/// ```
pub fn quadratic_satisficing(
    q: &QuadraticModel,
    decisions: &DecisionSet,
    tau: f64,
    opts: &SolveOptions,
) -> Result<QuadraticSolution> {
    let (nominal, _) = min_nominal_quadratic(q, decisions, opts)?;
    if tau <= nominal - 1e-9 {
        return Err(Error::TargetTooLow { tau, z0: nominal });
    }
    let start = Instant::now();
    let (na, nz) = (q.n_a(), q.n_z());
    let order = na + 1 + nz;
    let mut m = ModelBuilder::new();
    let x = m.vars(q.n_x());
    decisions.add_to(&mut m, &x);
    let k = m.var();
    let lambda = m.var();
    m.nonneg(k.into());
    m.nonneg(lambda.into());

    let mut entries = vec![LinExpr::zero(); order * (order + 1) / 2];
    let mut set = |i: usize, j: usize, e: LinExpr| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        entries[svec_index(i, j)] = if i == j { e } else { e.scaled(SQRT_2) };
    };
    for i in 0..na {
        set(i, i, LinExpr::constant(1.0));
        set(i, na, q.affine(&x, q.a_vec[i], q.a_vec_x.row(i).iter().cloned()));
        for j in 0..nz {
            set(i, na + 1 + j, q.a_entry(&x, i, j));
        }
    }
    let mut corner = -q.affine(&x, q.c, q.c_x.iter().cloned()) + tau;
    corner.add_term(lambda, -q.radius * q.radius);
    set(na, na, corner);
    for j in 0..nz {
        let bj = q.affine(&x, q.b_vec[j], q.b_vec_x.row(j).iter().cloned());
        set(na, na + 1 + j, bj.scaled(-0.5));
        set(na + 1 + j, na + 1 + j, LinExpr::from(k) + LinExpr::from(lambda));
    }
    m.add_cone(entries, Cone::Psd { order });
    m.minimize(k.into());
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let (vars, rows) = (m.num_vars(), m.num_rows());

    let t = Instant::now();
    let s = m.solve(opts)?;
    let solve_ms = t.elapsed().as_secs_f64() * 1e3;
    match s.result.status {
        SolveStatus::Optimal => Ok(QuadraticSolution {
            k: s.value(k).max(0.0),
            x: s.values(&x),
            lambda: s.value(lambda),
            tau,
            nominal,
            stats: BuildStats {
                vars,
                rows,
                build_ms,
                solve_ms,
            },
        }),
        SolveStatus::Infeasible => Err(Error::TargetTooLow { tau, z0: nominal }),
        st => Err(Error::Solver(format!("quadratic satisficing SDP ended with {st:?}"))),
    }
}
