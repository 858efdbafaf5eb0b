//! Polyhedral supports and penalties.
//!
//! The support is `Z = {z : Hz ≤ h}` with `h ≥ 0`. The penalty is
//! `p(ζ) = max {λᵀζ − η : (λ, η) ∈ V}` where
//! `V = {(λ, η) : ∃μ, Mλ + Nμ + sη ≤ t, η ≥ 0}` is a bounded polytope that
//! contains the origin and has `Nμ̂ < t` for some `μ̂`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use crate::error::{validation, Error, Result};

/// `Z = {z : Hz ≤ h}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralSupport {
    pub hmat: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl PolyhedralSupport {
    /// Builds a support set, requiring `h ≥ 0` so that `0 ∈ Z`.
    pub fn new(hmat: DMatrix<f64>, h: DVector<f64>) -> Result<Self> {
        if hmat.nrows() != h.len() {
            return validation(format!(
                "support: H has {} rows but h has {} entries",
                hmat.nrows(),
                h.len()
            ));
        }
        if let Some(i) = h.iter().position(|&x| !(x >= 0.0)) {
            return validation(format!(
                "support: h[{i}] = {} is negative, so the origin is not in Z",
                h[i]
            ));
        }
        Ok(PolyhedralSupport { hmat, h })
    }

    /// Box `lo ≤ z ≤ hi` stacked as `[I; −I] z ≤ [hi; −lo]`.
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = lo.len();
        if hi.len() != n {
            return validation("support: box bounds differ in length");
        }
        let mut hmat = DMatrix::zeros(2 * n, n);
        let mut h = DVector::zeros(2 * n);
        for i in 0..n {
            hmat[(i, i)] = 1.0;
            hmat[(n + i, i)] = -1.0;
            h[i] = hi[i];
            h[n + i] = -lo[i];
        }
        Self::new(hmat, h)
    }

    pub fn n_z(&self) -> usize {
        self.hmat.ncols()
    }

    pub fn n_h(&self) -> usize {
        self.hmat.nrows()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        let z = DVector::from_column_slice(z);
        (&self.hmat * z - &self.h).iter().all(|&r| r <= tol)
    }

    /// Right-hand side of the shifted set `{ζ : ζ + ẑ ∈ Z}`, i.e. `h − Hẑ`.
    pub fn shifted_rhs(&self, zhat: &DVector<f64>) -> DVector<f64> {
        &self.h - &self.hmat * zhat
    }

    /// `{ζ : ζ + ẑ ∈ Z}`; fails when `ẑ ∉ Z`.
    pub fn shifted(&self, zhat: &DVector<f64>) -> Result<Self> {
        let h = self.shifted_rhs(zhat).map(|x| if x < 0.0 && x > -1e-12 { 0.0 } else { x });
        Self::new(self.hmat.clone(), h)
    }

    /// `max {aᵀz : z ∈ Z}`, `+∞` when unbounded.
    pub fn support_function(&self, a: &[f64]) -> Result<f64> {
        let mut m = ModelBuilder::new();
        let z = m.vars(self.n_z());
        for i in 0..self.n_h() {
            let row: Vec<f64> = self.hmat.row(i).iter().cloned().collect();
            m.le(LinExpr::dot(&z, &row), LinExpr::constant(self.h[i]));
        }
        m.minimize(-LinExpr::dot(&z, a));
        let s = m.solve(&SolveOptions::default())?;
        match s.result.status {
            SolveStatus::Optimal => Ok(-s.result.objective_value),
            SolveStatus::Unbounded => Ok(f64::INFINITY),
            st => Err(Error::Solver(format!("support-function LP ended with {st:?}"))),
        }
    }
}

/// `p(ζ) = max {λᵀζ − η : Mλ + Nμ + sη ≤ t, η ≥ 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyhedralPenalty {
    pub m: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub s: DVector<f64>,
    pub t: DVector<f64>,
    /// Set by [`budgeted_norm`]; enables the closed-form evaluation.
    pub budget: Option<usize>,
}

/// Serialized form of a penalty: explicit matrices or the budgeted shorthand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PenaltySpec {
    Budgeted {
        #[serde(rename = "type")]
        kind: BudgetedTag,
        gamma: usize,
    },
    Explicit {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        #[serde(rename = "N")]
        n: Vec<Vec<f64>>,
        s: Vec<f64>,
        t: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetedTag {
    Budgeted,
}

impl PolyhedralPenalty {
    pub fn new(
        m: DMatrix<f64>,
        n: DMatrix<f64>,
        s: DVector<f64>,
        t: DVector<f64>,
    ) -> Result<Self> {
        let rows = m.nrows();
        if n.nrows() != rows || s.len() != rows || t.len() != rows {
            return validation(format!(
                "penalty: M has {rows} rows but N, s, t have {}, {}, {}",
                n.nrows(),
                s.len(),
                t.len()
            ));
        }
        Ok(PolyhedralPenalty {
            m,
            n,
            s,
            t,
            budget: None,
        })
    }

    pub fn n_z(&self) -> usize {
        self.m.ncols()
    }

    pub fn n_mu(&self) -> usize {
        self.n.ncols()
    }

    pub fn n_m(&self) -> usize {
        self.m.nrows()
    }

    /// `p(ζ)`, in closed form for budgeted norms and by LP otherwise.
    pub fn value(&self, zeta: &[f64]) -> Result<f64> {
        match self.budget {
            Some(gamma) => Ok(budgeted_value(zeta, gamma)),
            None => eval_penalty(self, zeta),
        }
    }

    pub fn to_spec(&self) -> PenaltySpec {
        match self.budget {
            Some(gamma) => PenaltySpec::Budgeted {
                kind: BudgetedTag::Budgeted,
                gamma,
            },
            None => PenaltySpec::Explicit {
                m: rows_of(&self.m),
                n: rows_of(&self.n),
                s: self.s.iter().cloned().collect(),
                t: self.t.iter().cloned().collect(),
            },
        }
    }

    /// Rebuilds a penalty from its serialized form for `n_z` uncertain inputs.
    pub fn from_spec(spec: &PenaltySpec, n_z: usize) -> Result<Self> {
        match spec {
            PenaltySpec::Budgeted { gamma, .. } => budgeted_norm(n_z, *gamma),
            PenaltySpec::Explicit { m, n, s, t } => {
                let mm = matrix_from_rows(m, n_z, "penalty M")?;
                let cols = n.first().map_or(0, |r| r.len());
                let nn = matrix_from_rows(n, cols, "penalty N")?;
                let nn = if n.is_empty() {
                    DMatrix::zeros(mm.nrows(), 0)
                } else {
                    nn
                };
                Self::new(
                    mm,
                    nn,
                    DVector::from_vec(s.clone()),
                    DVector::from_vec(t.clone()),
                )
            }
        }
    }
}

pub(crate) fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().cloned().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return validation(format!(
            "{what}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Sum of the `gamma` largest absolute entries.
pub fn budgeted_value(zeta: &[f64], gamma: usize) -> f64 {
    let mut a: Vec<f64> = zeta.iter().map(|x| x.abs()).collect();
    a.sort_by(|x, y| y.partial_cmp(x).unwrap());
    a.iter().take(gamma).sum()
}

/// Budgeted norm on `ℝⁿ`: sum of the `gamma` largest absolute components,
/// with `M = [0ᵀ; I; −I; 0]`, `N = [1ᵀ; −I; −I; I]`, `t = (Γ, 0, 0, 1)` and
/// `s = 0`.
pub fn budgeted_norm(n: usize, gamma: usize) -> Result<PolyhedralPenalty> {
    if n == 0 || gamma == 0 || gamma > n {
        return validation(format!("budgeted norm needs 1 ≤ Γ ≤ n, got n = {n}, Γ = {gamma}"));
    }
    let rows = 3 * n + 1;
    let mut m = DMatrix::zeros(rows, n);
    let mut nn = DMatrix::zeros(rows, n);
    let mut t = DVector::zeros(rows);
    t[0] = gamma as f64;
    for i in 0..n {
        nn[(0, i)] = 1.0;
        m[(1 + i, i)] = 1.0;
        nn[(1 + i, i)] = -1.0;
        m[(1 + n + i, i)] = -1.0;
        nn[(1 + n + i, i)] = -1.0;
        nn[(1 + 2 * n + i, i)] = 1.0;
        t[1 + 2 * n + i] = 1.0;
    }
    let mut p = PolyhedralPenalty::new(m, nn, DVector::zeros(rows), t)?;
    p.budget = Some(gamma);
    Ok(p)
}

/// Adds `Mλ + Nμ + sη ≤ t·scale` for fresh `μ` and returns it.
fn add_v_rows(
    b: &mut ModelBuilder,
    p: &PolyhedralPenalty,
    lambda: &[LinExpr],
    eta: &LinExpr,
    scale: &LinExpr,
) -> Vec<Var> {
    let mu = b.vars(p.n_mu());
    for r in 0..p.n_m() {
        let mut lhs = LinExpr::zero();
        for j in 0..p.n_z() {
            lhs.add_scaled(&lambda[j], p.m[(r, j)]);
        }
        for j in 0..p.n_mu() {
            lhs.add_term(mu[j], p.n[(r, j)]);
        }
        lhs.add_scaled(eta, p.s[r]);
        b.le(lhs, scale.scaled(p.t[r]));
    }
    mu
}

/// `p(ζ)` by solving the defining LP.
pub fn eval_penalty(p: &PolyhedralPenalty, zeta: &[f64]) -> Result<f64> {
    if zeta.len() != p.n_z() {
        return validation(format!(
            "penalty expects {} entries, got {}",
            p.n_z(),
            zeta.len()
        ));
    }
    let mut b = ModelBuilder::new();
    let lambda: Vec<LinExpr> = b.vars(p.n_z()).into_iter().map(LinExpr::from).collect();
    let eta = LinExpr::from(b.var());
    b.nonneg(eta.clone());
    add_v_rows(&mut b, p, &lambda, &eta, &LinExpr::constant(1.0));
    let mut obj = eta.clone();
    for (l, &z) in lambda.iter().zip(zeta) {
        obj.add_scaled(l, -z);
    }
    b.minimize(obj);
    let s = b.solve(&SolveOptions::default())?;
    match s.result.status {
        SolveStatus::Optimal => Ok(-s.result.objective_value),
        SolveStatus::Unbounded => Err(Error::Invariant(
            "penalty LP is unbounded: V is not bounded".into(),
        )),
        st => Err(Error::Solver(format!("penalty LP ended with {st:?}"))),
    }
}

/// Dual norm `p*(ζ) = min {δ : Mζ + Nμ ≤ δt}` of a norm-type penalty.
pub fn eval_dual_norm(p: &PolyhedralPenalty, zeta: &[f64]) -> Result<f64> {
    if zeta.len() != p.n_z() {
        return validation(format!(
            "dual norm expects {} entries, got {}",
            p.n_z(),
            zeta.len()
        ));
    }
    if p.s.iter().any(|&x| x != 0.0) {
        return validation("dual norm requires s = 0 (the penalty is not a norm)");
    }
    let mut b = ModelBuilder::new();
    let delta = b.var();
    let mu = b.vars(p.n_mu());
    let mz = &p.m * DVector::from_column_slice(zeta);
    for r in 0..p.n_m() {
        let mut lhs = LinExpr::constant(mz[r]);
        for j in 0..p.n_mu() {
            lhs.add_term(mu[j], p.n[(r, j)]);
        }
        b.le(lhs, LinExpr::term(delta, p.t[r]));
    }
    b.minimize(delta.into());
    let s = b.solve(&SolveOptions::default())?;
    match s.result.status {
        SolveStatus::Optimal => Ok(s.result.objective_value),
        st => Err(Error::Solver(format!("dual-norm LP ended with {st:?}"))),
    }
}

/// Outcome of the three checks on `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption3Report {
    pub origin: bool,
    pub strict_interior: bool,
    pub bounded: bool,
    /// Optimal minimum slack of `t − Nμ` (capped at 1).
    pub interior_margin: f64,
}

impl Assumption3Report {
    pub fn passed(&self) -> bool {
        self.origin && self.strict_interior && self.bounded
    }
}

/// Checks that `V` contains the origin, that `Nμ̂ < t` for some `μ̂`, and
/// that `V` is bounded in `λ` (`2n_z` LPs maximizing `±λᵢ`).
pub fn validate_assumption3(p: &PolyhedralPenalty) -> Assumption3Report {
    let opts = SolveOptions::default();
    let t_inf = p.t.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let origin = if p.t.iter().all(|&x| x >= 0.0) {
        true
    } else {
        let mut b = ModelBuilder::new();
        let mu = b.vars(p.n_mu());
        for r in 0..p.n_m() {
            let mut lhs = LinExpr::zero();
            for j in 0..p.n_mu() {
                lhs.add_term(mu[j], p.n[(r, j)]);
            }
            b.le(lhs, LinExpr::constant(p.t[r]));
        }
        b.solve(&opts).map(|s| s.is_optimal()).unwrap_or(false)
    };

    let interior_margin = {
        let mut b = ModelBuilder::new();
        let mu = b.vars(p.n_mu());
        let sigma = b.var();
        for r in 0..p.n_m() {
            let mut lhs = LinExpr::term(sigma, 1.0);
            for j in 0..p.n_mu() {
                lhs.add_term(mu[j], p.n[(r, j)]);
            }
            b.le(lhs, LinExpr::constant(p.t[r]));
        }
        b.le(sigma.into(), LinExpr::constant(1.0));
        b.minimize(LinExpr::term(sigma, -1.0));
        match b.solve(&opts) {
            Ok(s) if s.is_optimal() => s.value(sigma),
            _ => f64::NEG_INFINITY,
        }
    };
    let strict_interior = interior_margin > 1e-8 * (1.0 + t_inf);

    // Only the λ directions are tested: with s = 0 the set is unbounded in
    // +η, which is harmless because η enters p with a negative sign, and
    // η ≥ 0 bounds the other direction.
    let mut bounded = true;
    for coord in 0..p.n_z() {
        for sign in [1.0, -1.0] {
            let mut b = ModelBuilder::new();
            let lambda: Vec<LinExpr> = b.vars(p.n_z()).into_iter().map(LinExpr::from).collect();
            let eta = LinExpr::from(b.var());
            b.nonneg(eta.clone());
            add_v_rows(&mut b, p, &lambda, &eta, &LinExpr::constant(1.0));
            b.minimize(lambda[coord].scaled(-sign));
            match b.solve(&opts) {
                Ok(s) if s.result.status == SolveStatus::Unbounded => bounded = false,
                Ok(s) if s.result.status == SolveStatus::NumericalError => bounded = false,
                Err(_) => bounded = false,
                _ => {}
            }
        }
    }

    Assumption3Report {
        origin,
        strict_interior,
        bounded,
        interior_margin,
    }
}

/// Dual certificate of `max_{z∈Z} aᵀz − k·p(z)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerMaxCertificate {
    pub value: f64,
    pub beta: Vec<f64>,
    pub eta: f64,
    pub mu: Vec<f64>,
}

/// `max_{z∈Z} aᵀz − k·p(z) = min {βᵀh + η : β ≥ 0, (a − Hᵀβ, η, k) ∈ V̄}`.
///
/// With `k = 0` only `(λ, η) = (0, 0)` survives in the perspective cone and
/// the problem is the support-function LP `min {βᵀh : Hᵀβ = a, β ≥ 0}`,
/// which is solved directly.
pub fn inner_max(
    a: &[f64],
    k: f64,
    z: &PolyhedralSupport,
    p: &PolyhedralPenalty,
) -> Result<InnerMaxCertificate> {
    let nz = z.n_z();
    if a.len() != nz || p.n_z() != nz {
        return validation(format!(
            "inner_max: a has {} entries, Z has {nz} columns, p acts on {}",
            a.len(),
            p.n_z()
        ));
    }
    if !(k >= 0.0) {
        return validation(format!("inner_max needs k ≥ 0, got {k}"));
    }
    let mut b = ModelBuilder::new();
    let beta = b.vars(z.n_h());
    for &bi in &beta {
        b.nonneg(bi.into());
    }
    let hcol: Vec<f64> = z.h.iter().cloned().collect();
    let residual: Vec<LinExpr> = (0..nz)
        .map(|j| {
            let col: Vec<f64> = z.hmat.column(j).iter().map(|x| -x).collect();
            LinExpr::dot(&beta, &col) + a[j]
        })
        .collect();

    if k == 0.0 {
        for r in residual {
            b.zero(r);
        }
        b.minimize(LinExpr::dot(&beta, &hcol));
        let s = b.solve(&SolveOptions::default())?;
        return match s.result.status {
            SolveStatus::Optimal => Ok(InnerMaxCertificate {
                value: s.result.objective_value,
                beta: s.values(&beta),
                eta: 0.0,
                mu: vec![0.0; p.n_mu()],
            }),
            SolveStatus::Infeasible => validation(
                "inner_max with k = 0: aᵀz is unbounded above on Z (no β ≥ 0 with Hᵀβ = a)",
            ),
            st => Err(Error::Solver(format!("inner_max LP ended with {st:?}"))),
        };
    }

    let eta = LinExpr::from(b.var());
    b.nonneg(eta.clone());
    let mu = add_v_rows(&mut b, p, &residual, &eta, &LinExpr::constant(k));
    b.minimize(LinExpr::dot(&beta, &hcol) + eta.clone());
    let s = b.solve(&SolveOptions::default())?;
    match s.result.status {
        SolveStatus::Optimal => Ok(InnerMaxCertificate {
            value: s.result.objective_value,
            beta: s.values(&beta),
            eta: s.eval(&eta),
            mu: s.values(&mu),
        }),
        st => Err(Error::Solver(format!("inner_max LP ended with {st:?}"))),
    }
}
