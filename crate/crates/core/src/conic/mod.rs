//! Cone taxonomy, the conic program intermediate representation and the
//! solver contract.
//!
//! Programs are stated as `A·x + b ∈ K` where `K` is a product of atomic
//! cones. PSD blocks are stored in symmetric-vectorized form: the upper
//! triangle is read column by column and off-diagonal entries are scaled by
//! √2, so that the Euclidean inner product of two vectors equals the trace
//! inner product of the matrices they encode.

mod backend;
mod model;
mod program;

pub use backend::{solve, SolveOptions, SolveResult, SolveStatus};
pub use model::{LinExpr, ModelBuilder, Solution, Var};
pub use program::{ConicProgram, ConstraintBlock, SparseMatrix};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::casting::LossFunction;
use crate::error::{Error, Result};

/// Default relative tolerance for cone membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-7;

/// An atomic cone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Cone {
    /// `{0}^dim`
    Zero { dim: usize },
    /// `ℝ^dim` (no restriction)
    Free { dim: usize },
    /// `ℝ₊^dim`
    Nonneg { dim: usize },
    /// `{(t, x) : ‖x‖₂ ≤ t}` of total dimension `dim`
    Soc { dim: usize },
    /// Symmetric PSD matrices of the given order, vectorized.
    Psd { order: usize },
    /// Closure of `{(x, y, z) : y > 0, y·exp(x/y) ≤ z}`.
    Exp,
    /// `{(w, v1, v2) : v2·ℓ(w/v2) ≤ v1, v2 ≥ 0}` with the recession
    /// extension at `v2 = 0`.
    LossPerspective { loss: LossFunction },
}

impl Cone {
    pub fn dim(&self) -> usize {
        match self {
            Cone::Zero { dim } | Cone::Free { dim } | Cone::Nonneg { dim } | Cone::Soc { dim } => {
                *dim
            }
            Cone::Psd { order } => order * (order + 1) / 2,
            Cone::Exp => 3,
            Cone::LossPerspective { loss } => loss.arity() + 2,
        }
    }

    /// Short name used in messages and reports.
    pub fn name(&self) -> &'static str {
        match self {
            Cone::Zero { .. } => "zero",
            Cone::Free { .. } => "free",
            Cone::Nonneg { .. } => "nonneg",
            Cone::Soc { .. } => "soc",
            Cone::Psd { .. } => "psd",
            Cone::Exp => "exp",
            Cone::LossPerspective { .. } => "loss_perspective",
        }
    }

    /// Membership with a tolerance scaled by `‖v‖∞ + 1`.
    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        debug_assert_eq!(v.len(), self.dim());
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs())) + 1.0;
        let tol = tol * scale;
        if v.iter().any(|x| x.is_nan()) {
            return false;
        }
        match self {
            Cone::Zero { .. } => v.iter().all(|x| x.abs() <= tol),
            Cone::Free { .. } => true,
            Cone::Nonneg { .. } => v.iter().all(|&x| x >= -tol),
            Cone::Soc { dim } => {
                if *dim == 0 {
                    return true;
                }
                let norm = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                norm <= v[0] + tol
            }
            Cone::Psd { order } => {
                if *order == 0 {
                    return true;
                }
                let m = smat(v, *order);
                let eig = SymmetricEigen::new(m);
                eig.eigenvalues.iter().all(|&l| l >= -tol)
            }
            Cone::Exp => {
                let (x, y, z) = (v[0], v[1], v[2]);
                if y > tol {
                    y * (x / y).exp() <= z + tol
                } else {
                    y >= -tol && x <= tol && z >= -tol
                }
            }
            Cone::LossPerspective { loss } => {
                let n = loss.arity();
                let (w, v1, v2) = (&v[..n], v[n], v[n + 1]);
                if v2 < -tol {
                    return false;
                }
                let pv = loss.perspective_value(w, v2.max(0.0));
                pv <= v1 + tol
            }
        }
    }

    /// Dual cone of a single atom.
    pub fn dual(&self) -> Result<Cone> {
        match self {
            Cone::Zero { dim } => Ok(Cone::Free { dim: *dim }),
            Cone::Free { dim } => Ok(Cone::Zero { dim: *dim }),
            Cone::Nonneg { .. } | Cone::Soc { .. } | Cone::Psd { .. } => Ok(self.clone()),
            Cone::Exp => Err(Error::Unsupported(
                "dual of the exponential cone is not an atom of this library".into(),
            )),
            Cone::LossPerspective { loss } => Err(Error::Unsupported(format!(
                "dual of the loss-perspective cone of {} is not available",
                loss.id()
            ))),
        }
    }
}

/// A product of atomic cones.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConeDescriptor {
    pub atoms: Vec<Cone>,
}

impl ConeDescriptor {
    pub fn new(atoms: Vec<Cone>) -> Self {
        ConeDescriptor { atoms }
    }

    pub fn single(atom: Cone) -> Self {
        ConeDescriptor { atoms: vec![atom] }
    }

    pub fn nonneg(dim: usize) -> Self {
        Self::single(Cone::Nonneg { dim })
    }

    pub fn total_dim(&self) -> usize {
        self.atoms.iter().map(Cone::dim).sum()
    }

    /// Splits `v` into per-atom slices.
    pub fn split<'a>(&self, v: &'a [f64]) -> Vec<(&Cone, &'a [f64])> {
        let mut out = Vec::with_capacity(self.atoms.len());
        let mut off = 0;
        for atom in &self.atoms {
            let d = atom.dim();
            out.push((atom, &v[off..off + d]));
            off += d;
        }
        out
    }

    pub fn has_loss_perspective(&self) -> bool {
        self.atoms
            .iter()
            .any(|a| matches!(a, Cone::LossPerspective { .. }))
    }

    /// True when every atom is the nonnegative orthant (or empty).
    pub fn is_nonneg_orthant(&self) -> bool {
        self.atoms.iter().all(|a| matches!(a, Cone::Nonneg { .. }))
    }
}

/// Checks `v ∈ cone` atom by atom within `tol` (relative to `‖v‖∞ + 1` of
/// each block).
pub fn membership(cone: &ConeDescriptor, v: &[f64], tol: f64) -> Result<bool> {
    if v.len() != cone.total_dim() {
        return Err(Error::Validation(format!(
            "vector of length {} tested against a cone of dimension {}",
            v.len(),
            cone.total_dim()
        )));
    }
    if tol <= 0.0 {
        return Err(Error::Validation("membership tolerance must be positive".into()));
    }
    Ok(cone.split(v).into_iter().all(|(c, b)| c.contains(b, tol)))
}

/// Dual cone, atom by atom.
pub fn dual_cone(cone: &ConeDescriptor) -> Result<ConeDescriptor> {
    cone.atoms
        .iter()
        .map(Cone::dual)
        .collect::<Result<Vec<_>>>()
        .map(ConeDescriptor::new)
}

/// Index of entry `(i, j)` (`i ≤ j`) in the vectorized upper triangle.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Symmetric vectorization of a square matrix (off-diagonals scaled by √2).
pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut v = vec![0.0; n * (n + 1) / 2];
    for j in 0..n {
        for i in 0..=j {
            let s = if i == j { 1.0 } else { std::f64::consts::SQRT_2 };
            v[svec_index(i, j)] = s * 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    v
}

/// Inverse of [`svec`].
pub fn smat(v: &[f64], order: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(order, order);
    for j in 0..order {
        for i in 0..=j {
            let x = v[svec_index(i, j)];
            if i == j {
                m[(i, i)] = x;
            } else {
                let y = x / std::f64::consts::SQRT_2;
                m[(i, j)] = y;
                m[(j, i)] = y;
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nonneg_boundary_is_member() {
        let c = ConeDescriptor::nonneg(3);
        assert!(membership(&c, &[0.0, 0.0, 0.0], 1e-9).unwrap());
    }

    #[test]
    fn exp_disutility_perspective_at_origin() {
        let c = ConeDescriptor::single(Cone::LossPerspective {
            loss: LossFunction::ExpDisutility { a: 1.0 },
        });
        assert!(membership(&c, &[0.0, 0.0, 1.0], 1e-9).unwrap());
    }

    #[test]
    fn indefinite_matrix_is_not_psd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let c = ConeDescriptor::single(Cone::Psd { order: 2 });
        assert!(!membership(&c, &svec(&m), 1e-9).unwrap());
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert!(membership(&c, &svec(&m), 1e-9).unwrap());
    }

    #[test]
    fn svec_preserves_inner_product() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let b = DMatrix::from_row_slice(3, 3, &[0.5, -1.0, 0.0, -1.0, 2.0, 1.5, 0.0, 1.5, -3.0]);
        let trace = (a.transpose() * &b).trace();
        let inner: f64 = svec(&a).iter().zip(svec(&b)).map(|(x, y)| x * y).sum();
        assert!((trace - inner).abs() < 1e-12);
        assert_eq!(smat(&svec(&a), 3), a);
    }

    #[test]
    fn dual_of_self_dual_atoms() {
        let c = ConeDescriptor::new(vec![Cone::Nonneg { dim: 5 }, Cone::Soc { dim: 4 }]);
        assert_eq!(dual_cone(&c).unwrap(), c);
        let z = ConeDescriptor::single(Cone::Zero { dim: 2 });
        assert_eq!(
            dual_cone(&z).unwrap(),
            ConeDescriptor::single(Cone::Free { dim: 2 })
        );
    }

    #[test]
    fn dual_of_loss_perspective_is_unsupported() {
        let c = ConeDescriptor::single(Cone::LossPerspective {
            loss: LossFunction::ExpDisutility { a: 1.0 },
        });
        assert!(matches!(dual_cone(&c), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let c = ConeDescriptor::nonneg(2);
        assert!(membership(&c, &[1.0], 1e-7).is_err());
    }

    #[test]
    fn exp_cone_membership() {
        assert!(Cone::Exp.contains(&[0.0, 1.0, 1.0], 1e-9));
        assert!(!Cone::Exp.contains(&[1.0, 1.0, 2.0], 1e-9));
        assert!(Cone::Exp.contains(&[-1.0, 0.0, 0.0], 1e-9));
        assert!(!Cone::Exp.contains(&[1.0, 0.0, 5.0], 1e-9));
    }
}
