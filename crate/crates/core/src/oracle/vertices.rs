use nalgebra::{DMatrix, DVector};

use crate::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus};
use crate::error::{validation, Error, Result};

/// Default guard on the dimension of polytopes handed to [`vertices`].
pub const MAX_VERTEX_DIM: usize = 8;
/// Default guard on the number of rows handed to [`vertices`].
pub const MAX_VERTEX_ROWS: usize = 24;

const FEAS_TOL: f64 = 1e-8;
const DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct VertexSet {
    pub vertices: Vec<DVector<f64>>,
    pub hmat: DMatrix<f64>,
    pub h: DVector<f64>,
}

/// Calls `f` with every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Basic feasible points of `{x : Ax ≤ b}`: solutions of `n` linearly
/// independent active rows that satisfy all rows. These are the vertices
/// when the polyhedron is pointed; no boundedness check is made.
pub fn basic_points(a: &DMatrix<f64>, b: &DVector<f64>) -> Vec<DVector<f64>> {
    let (m, n) = a.shape();
    let mut out: Vec<DVector<f64>> = Vec::new();
    if n == 0 {
        if b.iter().all(|&v| v >= -FEAS_TOL) {
            out.push(DVector::zeros(0));
        }
        return out;
    }
    let scale = a.amax().max(1.0);
    for_each_subset(m, n, |rows| {
        let sub = DMatrix::from_fn(n, n, |i, j| a[(rows[i], j)]);
        let rhs = DVector::from_fn(n, |i, _| b[rows[i]]);
        let qr = sub.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].abs() <= 1e-10 * scale) {
            return;
        }
        let Some(v) = qr.solve(&rhs) else { return };
        let feasible = (0..m).all(|i| {
            let lhs: f64 = (0..n).map(|j| a[(i, j)] * v[j]).sum();
            lhs <= b[i] + FEAS_TOL * (1.0 + b[i].abs())
        });
        if feasible && !out.iter().any(|w| (w - &v).amax() <= DEDUP_TOL * (1.0 + v.amax())) {
            out.push(v);
        }
    });
    out
}

fn bounded(hmat: &DMatrix<f64>, h: &DVector<f64>) -> Result<bool> {
    let n = hmat.ncols();
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut m = ModelBuilder::new();
            let z = m.vars(n);
            for r in 0..hmat.nrows() {
                let row: Vec<f64> = hmat.row(r).iter().cloned().collect();
                m.le(LinExpr::dot(&z, &row), LinExpr::constant(h[r]));
            }
            m.minimize(LinExpr::term(z[i], -sign));
            let s = m.solve(&SolveOptions::default())?;
            match s.result.status {
                SolveStatus::Optimal => {}
                SolveStatus::Unbounded => return Ok(false),
                SolveStatus::Infeasible => return validation("vertices: the polytope is empty"),
                st => return Err(Error::Solver(format!("vertices: support LP ended with {st:?}"))),
            }
        }
    }
    Ok(true)
}

/// All vertices of the bounded polytope `{z : Hz ≤ h}`.
///
/// Enumeration is combinatorial in the number of rows, so inputs beyond
/// [`MAX_VERTEX_DIM`] columns or [`MAX_VERTEX_ROWS`] rows are refused unless
/// `allow_large` is set.
pub fn vertices(hmat: &DMatrix<f64>, h: &DVector<f64>, allow_large: bool) -> Result<VertexSet> {
    if hmat.nrows() != h.len() {
        return validation("vertices: H and h have different row counts");
    }
    if !allow_large && (hmat.ncols() > MAX_VERTEX_DIM || hmat.nrows() > MAX_VERTEX_ROWS) {
        return validation(format!(
            "vertices: {}×{} exceeds the enumeration guard ({MAX_VERTEX_ROWS} rows, {MAX_VERTEX_DIM} columns); \
             pass the override to enumerate anyway",
            hmat.nrows(),
            hmat.ncols()
        ));
    }
    if !bounded(hmat, h)? {
        return validation("vertices: the polyhedron is unbounded");
    }
    Ok(VertexSet {
        vertices: basic_points(hmat, h),
        hmat: hmat.clone(),
        h: h.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_box_and_simplex() {
        let hmat = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]);
        let h = DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(vertices(&hmat, &h, false).unwrap().vertices.len(), 4);

        let hmat = DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]);
        let h = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        assert_eq!(vertices(&hmat, &h, false).unwrap().vertices.len(), 3);
    }

    #[test]
    fn unbounded_is_refused() {
        let hmat = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let h = DVector::zeros(2);
        assert!(vertices(&hmat, &h, false).is_err());
    }

    #[test]
    fn subsets_are_complete() {
        let mut count = 0;
        for_each_subset(6, 3, |_| count += 1);
        assert_eq!(count, 20);
        let mut count = 0;
        for_each_subset(4, 4, |_| count += 1);
        assert_eq!(count, 1);
    }
}
