use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{membership, ConeDescriptor};
use crate::error::{validation, Error, Result};

/// Sparse matrix in coordinate form. Duplicate entries are summed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn from_dense(rows: &[Vec<f64>], ncols: usize) -> Self {
        let mut m = SparseMatrix::new(rows.len(), ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    m.entries.push((i, j, v));
                }
            }
        }
        m
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        self.entries.push((i, j, v));
    }

    /// `A·x` as a dense vector.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    /// Entries merged by position and sorted column-major, zeros dropped.
    pub fn compressed(&self) -> Vec<(usize, usize, f64)> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in &self.entries {
            *map.entry((j, i)).or_insert(0.0) += v;
        }
        map.into_iter()
            .filter(|(_, v)| *v != 0.0)
            .map(|((j, i), v)| (i, j, v))
            .collect()
    }
}

/// One constraint family `A·x + b ∈ cone`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintBlock {
    pub a: SparseMatrix,
    pub b: Vec<f64>,
    pub cone: ConeDescriptor,
}

/// Minimize `objectiveᵀx + objective_constant` over the constraint blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub objective_constant: f64,
    pub constraints: Vec<ConstraintBlock>,
    pub var_names: Option<Vec<String>>,
}

impl ConicProgram {
    pub fn num_rows(&self) -> usize {
        self.constraints.iter().map(|c| c.b.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return validation(format!(
                "objective has length {} but the program has {} variables",
                self.objective.len(),
                self.num_vars
            ));
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.a.ncols != self.num_vars {
                return validation(format!(
                    "constraint {k}: A has {} columns, expected {}",
                    c.a.ncols, self.num_vars
                ));
            }
            let d = c.cone.total_dim();
            if c.a.nrows != d || c.b.len() != d {
                return validation(format!(
                    "constraint {k}: A has {} rows and b has {} entries but the cone has dimension {d}",
                    c.a.nrows,
                    c.b.len()
                ));
            }
            if let Some(&(i, j, _)) = c
                .a
                .entries
                .iter()
                .find(|&&(i, j, _)| i >= c.a.nrows || j >= c.a.ncols)
            {
                return validation(format!("constraint {k}: entry ({i}, {j}) out of range"));
            }
        }
        if let Some(names) = &self.var_names {
            if names.len() != self.num_vars {
                return validation("var_names length differs from num_vars");
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(x)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.objective_constant
    }

    /// Re-checks every constraint block at `x` with the membership oracle.
    /// Returns the index of the first violated block, if any.
    pub fn first_violation(&self, x: &[f64], tol: f64) -> Result<Option<usize>> {
        for (k, c) in self.constraints.iter().enumerate() {
            let mut v = c.a.mul_vec(x);
            for (vi, bi) in v.iter_mut().zip(&c.b) {
                *vi += bi;
            }
            if !membership(&c.cone, &v, tol)? {
                return Ok(Some(k));
            }
        }
        Ok(None)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ProgramFile::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ProgramFile = serde_json::from_str(s)?;
        let p = file.into_program()?;
        p.validate()?;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ProgramFile {
    num_vars: usize,
    objective: Vec<f64>,
    #[serde(default, skip_serializing_if = "is_zero")]
    objective_constant: f64,
    constraints: Vec<BlockFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    var_names: Option<Vec<String>>,
}

fn is_zero(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Serialize, Deserialize)]
struct BlockFile {
    #[serde(rename = "A")]
    a: MatrixFile,
    b: Vec<f64>,
    cone: ConeDescriptor,
}

/// Either dense row-major rows or `{"nrows", "ncols", "triplets"}`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MatrixFile {
    Sparse {
        nrows: usize,
        ncols: usize,
        triplets: Vec<(usize, usize, f64)>,
    },
    Dense(Vec<Vec<f64>>),
}

impl From<&ConicProgram> for ProgramFile {
    fn from(p: &ConicProgram) -> Self {
        ProgramFile {
            num_vars: p.num_vars,
            objective: p.objective.clone(),
            objective_constant: p.objective_constant,
            constraints: p
                .constraints
                .iter()
                .map(|c| BlockFile {
                    a: MatrixFile::Sparse {
                        nrows: c.a.nrows,
                        ncols: c.a.ncols,
                        triplets: c.a.compressed(),
                    },
                    b: c.b.clone(),
                    cone: c.cone.clone(),
                })
                .collect(),
            var_names: p.var_names.clone(),
        }
    }
}

impl ProgramFile {
    fn into_program(self) -> Result<ConicProgram> {
        let num_vars = self.num_vars;
        let constraints = self
            .constraints
            .into_iter()
            .map(|c| {
                let a = match c.a {
                    MatrixFile::Sparse {
                        nrows,
                        ncols,
                        triplets,
                    } => SparseMatrix {
                        nrows,
                        ncols,
                        entries: triplets,
                    },
                    MatrixFile::Dense(rows) => {
                        if rows.iter().any(|r| r.len() != num_vars) {
                            return Err(Error::Validation(
                                "dense constraint rows must have num_vars entries".into(),
                            ));
                        }
                        SparseMatrix::from_dense(&rows, num_vars)
                    }
                };
                Ok(ConstraintBlock {
                    a,
                    b: c.b,
                    cone: c.cone,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ConicProgram {
            num_vars,
            objective: self.objective,
            objective_constant: self.objective_constant,
            constraints,
            var_names: self.var_names,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::Cone;

    #[test]
    fn json_round_trip_dense_and_sparse() {
        let text = r#"{
            "num_vars": 2,
            "objective": [1.0, 0.0],
            "constraints": [
                {"A": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 1.0], "cone": [{"type": "nonneg", "dim": 2}]},
                {"A": {"nrows": 3, "ncols": 2, "triplets": [[0, 0, 1.0], [1, 1, 1.0]]},
                 "b": [0.0, 0.0, 0.0], "cone": [{"type": "soc", "dim": 3}]}
            ]
        }"#;
        let p = ConicProgram::from_json(text).unwrap();
        assert_eq!(p.constraints.len(), 2);
        assert_eq!(p.constraints[1].cone.atoms, vec![Cone::Soc { dim: 3 }]);
        let again = ConicProgram::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(again, ConicProgram { ..again.clone() });
        assert_eq!(again.constraints[0].a.compressed(), p.constraints[0].a.compressed());
    }

    #[test]
    fn wrong_row_count_is_rejected() {
        let text = r#"{"num_vars": 1, "objective": [1.0],
            "constraints": [{"A": [[1.0]], "b": [0.0], "cone": [{"type": "nonneg", "dim": 2}]}]}"#;
        assert!(ConicProgram::from_json(text).is_err());
    }
}
