//! JSON model files and CSV sample files.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use satisfice::conic::Cone;
use satisfice::conic::ConeDescriptor;
use satisfice::engine::{DecisionSet, EvaluationFunction, SatisficingModel, Target};
use satisfice::oracle::check_complete_bounded_recourse;
use satisfice::penalty::{validate_assumption3, PenaltySpec, PolyhedralPenalty, PolyhedralSupport};
use satisfice::{Error, Result};

/// Number of sampled directions in the complete-recourse check run on load.
pub const RECOURSE_TRIALS: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    pub d: Vec<f64>,
    pub f0: Vec<f64>,
    #[serde(rename = "fX")]
    pub fx: Vec<Vec<f64>>,
    #[serde(rename = "F0")]
    pub f_z: Vec<Vec<f64>>,
    #[serde(rename = "FX")]
    pub f_zx: Vec<Vec<Vec<f64>>>,
    pub cone: Vec<Cone>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSpec {
    #[serde(rename = "H")]
    pub hmat: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    /// Optional equality rows `Ex = e`.
    #[serde(rename = "E", default, skip_serializing_if = "Vec::is_empty")]
    pub e: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub e_rhs: Vec<f64>,
}

/// Samples either inline (one row per sample) or as a path to a CSV file,
/// resolved relative to the model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SamplesSpec {
    Inline(Vec<Vec<f64>>),
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub eval: EvalSpec,
    pub support: SupportSpec,
    pub penalty: PenaltySpec,
    pub samples: SamplesSpec,
    pub decision_set: DecisionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
}

/// A parsed and validated model with its optional target.
#[derive(Clone, Debug)]
pub struct LoadedModel {
    pub model: SatisficingModel,
    pub target: Option<Target>,
}

fn located(what: &str, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{what}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{what}: {m}")),
        other => other,
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Validation(msg.into()))
}

fn matrix(rows: &[Vec<f64>], ncols: usize, what: &str) -> Result<DMatrix<f64>> {
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return bad(format!(
            "{what}: row {i} has {} entries, expected {ncols}",
            rows[i].len()
        ));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().cloned().collect()).collect()
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().cloned().collect()
}

impl ModelFile {
    /// Serializable form of `model` with inline samples.
    pub fn from_model(model: &SatisficingModel, target: Option<Target>) -> Self {
        let e = &model.eval;
        ModelFile {
            eval: EvalSpec {
                b: rows(&e.b),
                d: vec_of(&e.d),
                f0: vec_of(&e.f0),
                fx: rows(&e.fx),
                f_z: rows(&e.f_z),
                f_zx: e.f_zx.iter().map(rows).collect(),
                cone: e.cone.atoms.clone(),
            },
            support: SupportSpec {
                hmat: rows(&model.support.hmat),
                h: vec_of(&model.support.h),
            },
            penalty: model.penalty.to_spec(),
            samples: SamplesSpec::Inline(model.samples.iter().map(vec_of).collect()),
            decision_set: DecisionSpec {
                a: rows(&model.decisions.a),
                b: vec_of(&model.decisions.b),
                e: rows(&model.decisions.e),
                e_rhs: vec_of(&model.decisions.e_rhs),
            },
            target,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Validation(format!("model file: {e}")))
    }

    /// Builds the model. Relative sample paths are resolved against `base`.
    /// Only dimensional checks run here; see [`validate_model`].
    pub fn to_model(&self, base: Option<&Path>) -> Result<LoadedModel> {
        let ev = &self.eval;
        let nf = ev.f0.len();
        let ny = ev.d.len();
        let nz = match self.support.hmat.first() {
            Some(r) => r.len(),
            None => return bad("support.H: Z must be bounded, so H needs at least one row"),
        };
        let nx = match ev.fx.first() {
            Some(r) => r.len(),
            None => ev.f_zx.len(),
        };
        if ev.f_zx.len() != nx {
            return bad(format!("eval.FX: expected {nx} matrices (one per decision), got {}", ev.f_zx.len()));
        }
        for (name, n) in [("eval.B", ev.b.len()), ("eval.fX", ev.fx.len()), ("eval.F0", ev.f_z.len())] {
            if n != nf {
                return bad(format!("{name}: has {n} rows but f0 has {nf} entries"));
            }
        }
        let b = matrix(&ev.b, ny, "eval.B")?;
        let fx = matrix(&ev.fx, nx, "eval.fX")?;
        let f_z = matrix(&ev.f_z, nz, "eval.F0")?;
        let f_zx = ev
            .f_zx
            .iter()
            .enumerate()
            .map(|(j, m)| {
                if m.len() != nf {
                    return bad(format!("eval.FX[{j}]: has {} rows, expected {nf}", m.len()));
                }
                matrix(m, nz, &format!("eval.FX[{j}]"))
            })
            .collect::<Result<Vec<_>>>()?;
        let eval = EvaluationFunction::new(
            b,
            DVector::from_vec(ev.d.clone()),
            DVector::from_vec(ev.f0.clone()),
            fx,
            f_z,
            f_zx,
            ConeDescriptor::new(ev.cone.clone()),
        )
        .map_err(|e| located("eval", e))?;

        let hmat = matrix(&self.support.hmat, nz, "support.H")?;
        let support = PolyhedralSupport::new(hmat, DVector::from_vec(self.support.h.clone()))
            .map_err(|e| located("support", e))?;
        let penalty = PolyhedralPenalty::from_spec(&self.penalty, nz).map_err(|e| located("penalty", e))?;

        let sample_rows = match &self.samples {
            SamplesSpec::Inline(r) => r.clone(),
            SamplesSpec::Path(p) => {
                let path = match base {
                    Some(dir) if Path::new(p).is_relative() => dir.join(p),
                    _ => PathBuf::from(p),
                };
                read_samples_csv(&path).map_err(|e| located("samples", e))?.1
            }
        };
        let samples = sample_rows
            .iter()
            .enumerate()
            .map(|(w, r)| {
                if r.len() != nz {
                    return bad(format!("samples: row {w} has {} entries, expected {nz}", r.len()));
                }
                Ok(DVector::from_vec(r.clone()))
            })
            .collect::<Result<Vec<_>>>()?;

        let ds = &self.decision_set;
        let a = matrix(&ds.a, nx, "decision_set.A")?;
        let e = matrix(&ds.e, nx, "decision_set.E")?;
        let decisions = DecisionSet::with_equalities(
            a,
            DVector::from_vec(ds.b.clone()),
            e,
            DVector::from_vec(ds.e_rhs.clone()),
        )
        .map_err(|e| located("decision_set", e))?;

        let model = SatisficingModel::new(eval, support, penalty, samples, decisions)?;
        Ok(LoadedModel {
            model,
            target: self.target,
        })
    }
}

/// Module-level checks that go beyond dimensions: the penalty assumptions
/// and the (sampled) complete and bounded recourse check.
pub fn validate_model(model: &SatisficingModel) -> Result<()> {
    let report = validate_assumption3(&model.penalty);
    if !report.passed() {
        return bad(format!(
            "penalty: V fails its assumptions (origin {}, interior {}, bounded {})",
            report.origin, report.strict_interior, report.bounded
        ));
    }
    let e = &model.eval;
    let rec = check_complete_bounded_recourse(&e.b, &e.d, &e.cone, RECOURSE_TRIALS, 0)
        .map_err(|err| located("eval", err))?;
    if !rec.bounded {
        return bad(format!(
            "eval: recourse is unbounded (min dᵀy over By ∈ K reached {})",
            rec.bounded_value
        ));
    }
    if !rec.complete {
        return bad(format!(
            "eval: recourse is not complete ({} of {} sampled right-hand sides infeasible)",
            rec.failures.len(),
            rec.directions_tested
        ));
    }
    Ok(())
}

/// Reads, builds and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let file = ModelFile::from_json(&text)?;
    let loaded = file.to_model(path.parent())?;
    validate_model(&loaded.model)?;
    Ok(loaded)
}

pub fn save_model(path: impl AsRef<Path>, model: &SatisficingModel, target: Option<Target>) -> Result<()> {
    std::fs::write(path, ModelFile::from_model(model, target).to_json()?)?;
    Ok(())
}

/// Formats a float with 17 significant digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes samples as CSV: a header of column names, then one row per sample.
pub fn write_samples_csv(path: impl AsRef<Path>, names: &[String], samples: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(names).map_err(csv_err)?;
    for s in samples {
        w.write_record(s.iter().map(|&v| fmt17(v))).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a sample CSV, returning the header and the rows.
pub fn read_samples_csv(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = rec
            .iter()
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Validation(format!("row {i}: cannot parse {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return bad(format!("row {i}: {} fields for {} columns", row.len(), header.len()));
        }
        out.push(row);
    }
    Ok((header, out))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Validation(format!("csv: {e}"))
}
