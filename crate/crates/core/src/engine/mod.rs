//! Reformulations: the empirical problem, the exact SDP for quadratic
//! evaluation functions, the affine dual recourse adaptation for conic
//! evaluation functions, and the primal/dual adaptations for two-stage LPs.

mod empirical;
mod quadratic;
mod robust;
mod twostage;

pub use empirical::empirical_optimum;
pub use quadratic::{min_nominal_quadratic, quadratic_satisficing, QuadraticModel, QuadraticSolution};
pub use robust::{
    resolve_target, robust_counterpart, solve_satisficing, solve_satisficing_with_z0,
    AdaptationCoefficients, AffineDualMaps, SatisficingSolution,
};
pub use twostage::{solve_twostage_dual, solve_twostage_primal};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::casting::CastModel;
use crate::conic::{Cone, ConeDescriptor, LinExpr, ModelBuilder, Var};
use crate::error::{validation, Result};
use crate::penalty::{PolyhedralPenalty, PolyhedralSupport};

/// Margin used where the theory asks for a strict inequality.
pub const STRICT_MARGIN: f64 = 1e-9;

/// Build and solve statistics reported with every solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub vars: usize,
    pub rows: usize,
    pub build_ms: f64,
    pub solve_ms: f64,
}

/// `g(x, z) = min {dᵀy : By ⪰_K f(x) + F(x)z}` with `f(x) = f0 + Fx·x` and
/// `F(x) = F0 + Σⱼ xⱼ·Fⱼ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationFunction {
    pub b: DMatrix<f64>,
    pub d: DVector<f64>,
    pub f0: DVector<f64>,
    pub fx: DMatrix<f64>,
    pub f_z: DMatrix<f64>,
    pub f_zx: Vec<DMatrix<f64>>,
    pub cone: ConeDescriptor,
}

impl EvaluationFunction {
    pub fn new(
        b: DMatrix<f64>,
        d: DVector<f64>,
        f0: DVector<f64>,
        fx: DMatrix<f64>,
        f_z: DMatrix<f64>,
        f_zx: Vec<DMatrix<f64>>,
        cone: ConeDescriptor,
    ) -> Result<Self> {
        let nf = b.nrows();
        let ny = b.ncols();
        let nz = f_z.ncols();
        if d.len() != ny {
            return validation(format!("eval: d has {} entries, B has {ny} columns", d.len()));
        }
        if f0.len() != nf || fx.nrows() != nf || f_z.nrows() != nf {
            return validation(format!(
                "eval: B has {nf} rows but f0, fX, F0 have {}, {}, {}",
                f0.len(),
                fx.nrows(),
                f_z.nrows()
            ));
        }
        if fx.ncols() != f_zx.len() {
            return validation(format!(
                "eval: fX has {} columns but {} slices FX were given",
                fx.ncols(),
                f_zx.len()
            ));
        }
        if let Some(j) = f_zx.iter().position(|m| m.shape() != (nf, nz)) {
            return validation(format!("eval: FX[{j}] must be {nf}×{nz}"));
        }
        if cone.total_dim() != nf {
            return validation(format!(
                "eval: cone has dimension {} but B has {nf} rows",
                cone.total_dim()
            ));
        }
        for atom in &cone.atoms {
            if let Cone::LossPerspective { loss } = atom {
                loss.validate()?;
            }
        }
        Ok(EvaluationFunction {
            b,
            d,
            f0,
            fx,
            f_z,
            f_zx,
            cone,
        })
    }

    /// `g(x, z) = min {y : 1·y ≥ f(x) + F(x)z}`, the maximum of affine pieces.
    pub fn piecewise_max(
        f0: DVector<f64>,
        fx: DMatrix<f64>,
        f_z: DMatrix<f64>,
        f_zx: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let nf = f0.len();
        Self::new(
            DMatrix::from_element(nf, 1, 1.0),
            DVector::from_element(1, 1.0),
            f0,
            fx,
            f_z,
            f_zx,
            ConeDescriptor::nonneg(nf),
        )
    }

    /// Cast model evaluated at the affine loss argument
    /// `w(x, z) = w0 + Wx·x + (Wz + Σⱼ xⱼ·Wⱼ)z`.
    pub fn from_cast(
        cast: &CastModel,
        w0: &DVector<f64>,
        wx: &DMatrix<f64>,
        wz: &DMatrix<f64>,
        wzx: &[DMatrix<f64>],
    ) -> Result<Self> {
        let nw = cast.loss.arity();
        let nf = nw + 3;
        let nx = wx.ncols();
        let nz = wz.ncols();
        if w0.len() != nw || wx.nrows() != nw || wz.nrows() != nw || wzx.len() != nx {
            return validation("cast evaluation: loss argument has inconsistent dimensions");
        }
        let f0 = cast.rhs(w0.as_slice());
        let mut fx = DMatrix::zeros(nf, nx);
        let mut f_z = DMatrix::zeros(nf, nz);
        let mut f_zx = vec![DMatrix::zeros(nf, nz); nx];
        for i in 0..nw {
            for j in 0..nx {
                fx[(i, j)] = -wx[(i, j)];
                for l in 0..nz {
                    f_zx[j][(i, l)] = -wzx[j][(i, l)];
                }
            }
            for l in 0..nz {
                f_z[(i, l)] = -wz[(i, l)];
            }
        }
        Self::new(
            cast.recourse_matrix(),
            cast.recourse_cost(),
            f0,
            fx,
            f_z,
            f_zx,
            cast.cone(),
        )
    }

    pub fn n_f(&self) -> usize {
        self.b.nrows()
    }

    pub fn n_y(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_x(&self) -> usize {
        self.fx.ncols()
    }

    pub fn n_z(&self) -> usize {
        self.f_z.ncols()
    }

    pub fn f_at(&self, x: &[f64]) -> DVector<f64> {
        &self.f0 + &self.fx * DVector::from_column_slice(x)
    }

    pub fn big_f_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = self.f_z.clone();
        for (j, fj) in self.f_zx.iter().enumerate() {
            m += fj * x[j];
        }
        m
    }

    /// `f(x) + F(x)z` at fixed `(x, z)`.
    pub fn rhs_at(&self, x: &[f64], z: &[f64]) -> DVector<f64> {
        self.f_at(x) + self.big_f_at(x) * DVector::from_column_slice(z)
    }

    /// `Σⱼ F(x)_{l,j}·uⱼ` as an expression in the decision variables.
    pub fn f_row_times(&self, x: &[Var], l: usize, u: &[f64]) -> LinExpr {
        let mut e = LinExpr::constant(
            (0..self.n_z()).map(|j| self.f_z[(l, j)] * u[j]).sum::<f64>(),
        );
        for (i, fi) in self.f_zx.iter().enumerate() {
            let c: f64 = (0..self.n_z()).map(|j| fi[(l, j)] * u[j]).sum();
            e.add_term(x[i], c);
        }
        e
    }

    /// `F(x)_{l,j}` as an expression.
    pub fn f_entry(&self, x: &[Var], l: usize, j: usize) -> LinExpr {
        let mut e = LinExpr::constant(self.f_z[(l, j)]);
        for (i, fi) in self.f_zx.iter().enumerate() {
            e.add_term(x[i], fi[(l, j)]);
        }
        e
    }

    /// Rows of `f(x) + F(x)ẑ` as expressions in the decision variables.
    pub fn shifted_f_expr(&self, x: &[Var], zhat: &DVector<f64>) -> Vec<LinExpr> {
        (0..self.n_f())
            .map(|l| {
                let mut e = LinExpr::constant(self.f0[l]);
                for (i, &xi) in x.iter().enumerate() {
                    e.add_term(xi, self.fx[(l, i)]);
                }
                e += &self.f_row_times(x, l, zhat.as_slice());
                e
            })
            .collect()
    }

    /// Adds recourse variables `y` with `By − rhs ∈ K`; returns `dᵀy`.
    pub fn add_recourse(&self, m: &mut ModelBuilder, rhs: &[LinExpr]) -> LinExpr {
        let y = m.vars(self.n_y());
        let rows: Vec<LinExpr> = (0..self.n_f())
            .map(|l| {
                let mut e = -rhs[l].clone();
                for (k, &yk) in y.iter().enumerate() {
                    e.add_term(yk, self.b[(l, k)]);
                }
                e
            })
            .collect();
        m.add_cones(rows, &self.cone);
        LinExpr::dot(&y, self.d.as_slice())
    }

    /// True when the evaluation is of the form `min {y : 1y ≥ f(x) + F(x)z}`.
    pub fn is_piecewise_max(&self) -> bool {
        self.n_y() == 1
            && self.d[0] == 1.0
            && self.b.iter().all(|&v| v == 1.0)
            && self.cone.is_nonneg_orthant()
    }
}

/// Polyhedral decision set `{x : A x ≤ b, E x = e}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionSet {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub e: DMatrix<f64>,
    pub e_rhs: DVector<f64>,
}

impl DecisionSet {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let n = a.ncols();
        Self::with_equalities(a, b, DMatrix::zeros(0, n), DVector::zeros(0))
    }

    pub fn with_equalities(
        a: DMatrix<f64>,
        b: DVector<f64>,
        e: DMatrix<f64>,
        e_rhs: DVector<f64>,
    ) -> Result<Self> {
        if a.nrows() != b.len() || e.nrows() != e_rhs.len() || e.ncols() != a.ncols() {
            return validation("decision set: inconsistent dimensions");
        }
        Ok(DecisionSet { a, b, e, e_rhs })
    }

    /// `ℝⁿ`
    pub fn free(n: usize) -> Self {
        DecisionSet {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            e: DMatrix::zeros(0, n),
            e_rhs: DVector::zeros(0),
        }
    }

    /// `{x ≥ 0 : 1ᵀx = 1}`
    pub fn simplex(n: usize) -> Self {
        DecisionSet {
            a: -DMatrix::identity(n, n),
            b: DVector::zeros(n),
            e: DMatrix::from_element(1, n, 1.0),
            e_rhs: DVector::from_element(1, 1.0),
        }
    }

    /// `{lo ≤ x ≤ hi}`
    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(i, i)] = 1.0;
            b[i] = hi[i];
            a[(n + i, i)] = -1.0;
            b[n + i] = -lo[i];
        }
        DecisionSet {
            a,
            b,
            e: DMatrix::zeros(0, n),
            e_rhs: DVector::zeros(0),
        }
    }

    /// The single point `{x0}`.
    pub fn singleton(x0: &[f64]) -> Self {
        let n = x0.len();
        DecisionSet {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
            e: DMatrix::identity(n, n),
            e_rhs: DVector::from_column_slice(x0),
        }
    }

    pub fn n_x(&self) -> usize {
        self.a.ncols()
    }

    pub fn add_to(&self, m: &mut ModelBuilder, x: &[Var]) {
        for i in 0..self.a.nrows() {
            let row: Vec<f64> = self.a.row(i).iter().cloned().collect();
            m.le(LinExpr::dot(x, &row), LinExpr::constant(self.b[i]));
        }
        for i in 0..self.e.nrows() {
            let row: Vec<f64> = self.e.row(i).iter().cloned().collect();
            m.eq(LinExpr::dot(x, &row), LinExpr::constant(self.e_rhs[i]));
        }
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        let xv = DVector::from_column_slice(x);
        (&self.a * &xv - &self.b).iter().all(|&r| r <= tol)
            && (&self.e * &xv - &self.e_rhs).iter().all(|r| r.abs() <= tol)
    }
}

/// Absolute target or an offset over the empirical optimum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Tau(f64),
    Lambda(f64),
}

/// Data-driven robust satisficing model.
#[derive(Clone, Debug, PartialEq)]
pub struct SatisficingModel {
    pub eval: EvaluationFunction,
    pub support: PolyhedralSupport,
    pub penalty: PolyhedralPenalty,
    pub samples: Vec<DVector<f64>>,
    pub decisions: DecisionSet,
}

impl SatisficingModel {
    pub fn new(
        eval: EvaluationFunction,
        support: PolyhedralSupport,
        penalty: PolyhedralPenalty,
        samples: Vec<DVector<f64>>,
        decisions: DecisionSet,
    ) -> Result<Self> {
        let model = SatisficingModel {
            eval,
            support,
            penalty,
            samples,
            decisions,
        };
        model.check_dimensions()?;
        Ok(model)
    }

    fn check_dimensions(&self) -> Result<()> {
        let nz = self.eval.n_z();
        if self.support.n_z() != nz || self.penalty.n_z() != nz {
            return validation(format!(
                "model: eval has {nz} uncertain inputs but support/penalty act on {}/{}",
                self.support.n_z(),
                self.penalty.n_z()
            ));
        }
        if self.decisions.n_x() != self.eval.n_x() {
            return validation(format!(
                "model: eval has {} decisions but the decision set has {}",
                self.eval.n_x(),
                self.decisions.n_x()
            ));
        }
        if self.samples.is_empty() {
            return validation("model: at least one sample is required");
        }
        for (w, s) in self.samples.iter().enumerate() {
            if s.len() != nz {
                return validation(format!("model: sample {w} has {} entries, expected {nz}", s.len()));
            }
            if !self.support.contains(s.as_slice(), 1e-9) {
                return validation(format!("model: sample {w} lies outside the support Z"));
            }
        }
        Ok(())
    }

    pub fn omega(&self) -> usize {
        self.samples.len()
    }

    /// Right-hand side `h − Hẑ^ω` of the shifted support for sample `w`,
    /// with round-off below zero clipped.
    pub fn shifted_h(&self, w: usize) -> DVector<f64> {
        self.support
            .shifted_rhs(&self.samples[w])
            .map(|x| if x < 0.0 && x > -1e-9 { 0.0 } else { x })
    }
}
