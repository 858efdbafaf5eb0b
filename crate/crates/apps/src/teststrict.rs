//! Two-stage LP instance on which the dual affine adaptation is strictly
//! less conservative than the primal one.
//!
//! `g(z) = min {dᵀy : By ≥ f + Fz}` over `Z = {Hz ≤ h}` with a single sample
//! at the origin and the `ℓ₁` penalty.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use satisfice::conic::{ConeDescriptor, SolveOptions};
use satisfice::engine::{
    empirical_optimum, solve_twostage_dual, solve_twostage_primal, DecisionSet, EvaluationFunction,
    SatisficingModel,
};
use satisfice::penalty::{budgeted_norm, PolyhedralSupport};
use satisfice::{Error, Result};

pub const H: [[f64; 9]; 14] = [
    [0.2220, 0.6117, 0.0807, 0.2741, 0.5999, 0.1442, 0.0243, 0.5777, 0.2591],
    [0.8707, 0.7659, 0.7384, 0.4142, 0.2658, 0.1656, 0.2046, 0.0016, 0.8025],
    [0.2067, 0.5184, 0.4413, 0.2961, 0.2847, 0.9639, 0.6998, 0.5155, 0.8705],
    [0.9186, 0.2968, 0.1583, 0.6288, 0.2536, 0.9602, 0.7795, 0.6398, 0.9227],
    [0.4884, 0.1877, 0.8799, 0.5798, 0.3276, 0.1884, 0.0229, 0.9856, 0.0022],
    [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
];

pub const SMALL_H: [f64; 14] = [
    0.4695, 0.9815, 0.3989, 0.8137, 0.5465, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0, 100.0,
    100.0,
];

pub const F: [[f64; 9]; 4] = [
    [0.8248, 0.5464, 0.3655, 0.6389, 0.9435, 0.1008, 0.3715, 0.4783, 0.8005],
    [0.0942, 0.7961, 0.2443, 0.4934, 0.1117, 0.3834, 0.0124, 0.8500, 0.0204],
    [0.3610, 0.0511, 0.7951, 0.5835, 0.8436, 0.5104, 0.8597, 0.5147, 0.5726],
    [0.0355, 0.1887, 0.3521, 0.9393, 0.3460, 0.9611, 0.1111, 0.4466, 0.4114],
];

pub const D: [f64; 2] = [0.8167, 0.5661];

pub const SMALL_F: [f64; 4] = [0.6354, 0.8119, 0.9267, 0.9126];

pub const B: [[f64; 2]; 4] = [[0.7709, 0.1115], [0.4849, 0.2512], [0.0291, 0.9649], [0.0865, 0.6318]];

/// SHA-256 of the fixture bytes, see [`fixture_hash`].
pub const FIXTURE_SHA256: &str = "fbcc3c82ec3679b0dd102548f42cd73a578ea3bf6825d84f4b9f266a1594fd48";

/// SHA-256 over the little-endian bytes of `H, h, F, d, f, B`, row-major.
pub fn fixture_hash() -> String {
    let mut hasher = Sha256::new();
    let values = H
        .iter()
        .flatten()
        .chain(&SMALL_H)
        .chain(F.iter().flatten())
        .chain(&D)
        .chain(&SMALL_F)
        .chain(B.iter().flatten());
    for v in values {
        hasher.update(v.to_le_bytes());
    }
    hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn matrix<const C: usize>(rows: &[[f64; C]]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), C, |i, j| rows[i][j])
}

pub fn model() -> Result<SatisficingModel> {
    let eval = EvaluationFunction::new(
        matrix(&B),
        DVector::from_row_slice(&D),
        DVector::from_row_slice(&SMALL_F),
        DMatrix::zeros(4, 0),
        matrix(&F),
        Vec::new(),
        ConeDescriptor::nonneg(4),
    )?;
    let support = PolyhedralSupport::new(matrix(&H), DVector::from_row_slice(&SMALL_H))?;
    SatisficingModel::new(
        eval,
        support,
        budgeted_norm(9, 9)?,
        vec![DVector::zeros(9)],
        DecisionSet::free(0),
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeststrictRow {
    pub tau: f64,
    pub k_primal: f64,
    pub k_dual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeststrictReport {
    pub z0: f64,
    pub fixture_sha256: String,
    pub rows: Vec<TeststrictRow>,
}

/// `steps` targets evenly spaced on `[lo, hi]`.
pub fn tau_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 || !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(Error::Validation(format!("τ grid {lo}:{hi}:{steps} is empty or reversed")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

/// Both adaptations at every target of the grid.
pub fn run_teststrict(taus: &[f64], opts: &SolveOptions) -> Result<TeststrictReport> {
    let m = model()?;
    let (z0, _) = empirical_optimum(&m, opts)?;
    let rows = taus
        .iter()
        .map(|&tau| {
            let p = solve_twostage_primal(&m, tau, z0, opts)?;
            let d = solve_twostage_dual(&m, tau, z0, opts)?;
            Ok(TeststrictRow {
                tau,
                k_primal: p.k,
                k_dual: d.k,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TeststrictReport {
        z0,
        fixture_sha256: fixture_hash(),
        rows,
    })
}
