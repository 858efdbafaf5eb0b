//! Solution files and their independent verification against a model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use satisfice::engine::{BuildStats, SatisficingModel, SatisficingSolution};
use satisfice::oracle::{default_density, exact_worst_case_sample, worst_case_sample};
use satisfice::{Error, Result};

/// Slack allowed in every check.
pub const VERIFY_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub k: f64,
    pub x: Vec<f64>,
    pub upsilon: Vec<f64>,
    pub tau: f64,
    #[serde(rename = "Z0")]
    pub z0: f64,
    #[serde(default)]
    pub stats: BuildStats,
}

impl From<&SatisficingSolution> for SolutionFile {
    fn from(s: &SatisficingSolution) -> Self {
        SolutionFile {
            k: s.k,
            x: s.x.clone(),
            upsilon: s.upsilon.clone(),
            tau: s.tau,
            z0: s.z0,
            stats: s.stats.clone(),
        }
    }
}

impl SolutionFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("solution file: {e}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Outcome of one check. `margin ≥ 0` means it holds with that much room.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub margin: f64,
    /// The point realizing the margin, when there is one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub witness: Vec<f64>,
}

impl Check {
    fn new(name: impl Into<String>, margin: f64, witness: Vec<f64>) -> Self {
        Check {
            name: name.into(),
            pass: margin >= -VERIFY_TOL,
            margin,
            witness,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

/// Checks `x ∈ X`, `k ≥ 0`, the target and, per sample, that the worst case
/// of `g(x, ẑ + ζ) − k·p(ζ)` on a grid of `density` points per axis stays
/// below `υ_ω`. Piecewise-max models also get the exact worst case.
pub fn verify(model: &SatisficingModel, sol: &SolutionFile, density: Option<usize>) -> Result<VerifyReport> {
    if sol.x.len() != model.eval.n_x() {
        return Err(Error::Validation(format!(
            "solution: x has {} entries, the model has {} decisions",
            sol.x.len(),
            model.eval.n_x()
        )));
    }
    if sol.upsilon.len() != model.omega() {
        return Err(Error::Validation(format!(
            "solution: upsilon has {} entries, the model has {} samples",
            sol.upsilon.len(),
            model.omega()
        )));
    }
    let density = density.unwrap_or_else(|| default_density(model.eval.n_z()));
    let mut checks = Vec::new();

    let ds = &model.decisions;
    let mut worst = (f64::INFINITY, Vec::new());
    let x = nalgebra::DVector::from_column_slice(&sol.x);
    for (i, r) in (&ds.a * &x - &ds.b).iter().enumerate() {
        if -r < worst.0 {
            worst = (-r, vec![i as f64]);
        }
    }
    for (i, r) in (&ds.e * &x - &ds.e_rhs).iter().enumerate() {
        if -r.abs() < worst.0 {
            worst = (-r.abs(), vec![(ds.a.nrows() + i) as f64]);
        }
    }
    if worst.0.is_finite() {
        checks.push(Check::new("decision_set", worst.0, worst.1));
    }
    checks.push(Check::new("k_nonnegative", sol.k, Vec::new()));
    let mean = sol.upsilon.iter().sum::<f64>() / model.omega() as f64;
    checks.push(Check::new("target", sol.tau - mean, Vec::new()));

    let exact = model.eval.is_piecewise_max();
    for w in 0..model.omega() {
        let (grid, z) = worst_case_sample(model, &sol.x, w, sol.k, density, 0)?;
        checks.push(Check::new(format!("sample_{w}_grid"), sol.upsilon[w] - grid, z));
        if exact {
            let e = exact_worst_case_sample(model, &sol.x, w, sol.k)?;
            checks.push(Check::new(format!("sample_{w}_exact"), sol.upsilon[w] - e, Vec::new()));
        }
    }
    Ok(VerifyReport {
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}
