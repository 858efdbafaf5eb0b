use std::collections::BTreeMap;
use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolution, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use super::{Cone, ConicProgram};
use crate::error::{Error, Result};

/// Outcome of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalError,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub primal: Vec<f64>,
    pub solver_info: BTreeMap<String, f64>,
}

/// Tolerance of the last retry after the backend stalls.
pub const RELAXED_TOL: f64 = 1e-7;

/// Backend settings varied between attempts.
#[derive(Clone, Copy)]
struct Variant {
    equilibrate: bool,
    step: f64,
}

impl Variant {
    const DEFAULT: Variant = Variant {
        equilibrate: true,
        step: 0.99,
    };
}

/// Status quality, then the worst of relative gap and residuals.
fn rank(sol: &DefaultSolution<f64>) -> (u8, f64) {
    let gap = (sol.obj_val - sol.obj_val_dual).abs() / sol.obj_val.abs().max(1.0);
    let err = gap.max(sol.r_prim).max(sol.r_dual);
    (quality(sol.status), if err.is_nan() { f64::INFINITY } else { err })
}

/// 0 for a definite answer, 1 for reduced accuracy, 2 for no answer.
fn quality(status: SolverStatus) -> u8 {
    match status {
        SolverStatus::Solved | SolverStatus::PrimalInfeasible | SolverStatus::DualInfeasible => 0,
        SolverStatus::AlmostSolved
        | SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::AlmostDualInfeasible => 1,
        _ => 2,
    }
}

/// Backend settings. Defaults are tighter than the backend's own so that
/// equalities between independently built formulations can be tested at
/// the 1e−6 level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol_gap_abs: f64,
    pub tol_gap_rel: f64,
    pub tol_feas: f64,
    pub max_iter: u32,
    pub time_limit: f64,
    pub verbose: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_gap_abs: 1e-9,
            tol_gap_rel: 1e-9,
            tol_feas: 1e-9,
            max_iter: 400,
            time_limit: f64::INFINITY,
            verbose: false,
        }
    }
}

fn backend_cones(program: &ConicProgram) -> Result<(Vec<SupportedConeT<f64>>, Vec<Option<usize>>)> {
    // row_map[i] = backend row of program row i, None for free rows
    let mut cones = Vec::new();
    let mut row_map = Vec::with_capacity(program.num_rows());
    let mut next = 0usize;
    for block in &program.constraints {
        for atom in &block.cone.atoms {
            let d = atom.dim();
            let cone = match atom {
                Cone::Free { .. } => {
                    row_map.extend(std::iter::repeat_n(None, d));
                    continue;
                }
                Cone::Zero { dim } => SupportedConeT::ZeroConeT(*dim),
                Cone::Nonneg { dim } => SupportedConeT::NonnegativeConeT(*dim),
                Cone::Soc { dim } => SupportedConeT::SecondOrderConeT(*dim),
                Cone::Psd { order } => SupportedConeT::PSDTriangleConeT(*order),
                Cone::Exp => SupportedConeT::ExponentialConeT(),
                Cone::LossPerspective { loss } => {
                    return Err(Error::Unsupported(format!(
                        "program contains an unexpanded loss-perspective cone ({}); \
                         build it through ModelBuilder to expand it",
                        loss.id()
                    )))
                }
            };
            if d > 0 {
                cones.push(cone);
            }
            for _ in 0..d {
                row_map.push(Some(next));
                next += 1;
            }
        }
    }
    Ok((cones, row_map))
}

/// Solves `min cᵀx s.t. A·x + b ∈ K` with the Clarabel interior-point method.
///
/// Capability problems (unexpanded loss cones) are reported before any solve
/// attempt; backend trouble is reported through the status.
pub fn solve(program: &ConicProgram, opts: &SolveOptions) -> Result<SolveResult> {
    program.validate()?;
    let (cones, row_map) = backend_cones(program)?;
    let n = program.num_vars;
    let m = row_map.iter().flatten().count();

    // Clarabel uses s = b − A·x ∈ K, so A enters negated.
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut b = vec![0.0; m];
    let mut offset = 0;
    let mut triplets = Vec::new();
    for block in &program.constraints {
        for (i, j, v) in block.a.compressed() {
            if let Some(r) = row_map[offset + i] {
                triplets.push((j, r, -v));
            }
        }
        for (i, &bi) in block.b.iter().enumerate() {
            if let Some(r) = row_map[offset + i] {
                b[r] = bi;
            }
        }
        offset += block.b.len();
    }
    triplets.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    for (j, r, v) in triplets {
        rows.push(r);
        cols.push(j);
        vals.push(v);
    }

    let start = Instant::now();
    let a = CscMatrix::new_from_triplets(m, n, rows, cols, vals);
    let p = CscMatrix::<f64>::zeros((n, n));
    let run = |opts: &SolveOptions, variant: Variant| -> Result<DefaultSolution<f64>> {
        let settings = DefaultSettingsBuilder::default()
            .verbose(opts.verbose)
            .tol_gap_abs(opts.tol_gap_abs)
            .tol_gap_rel(opts.tol_gap_rel)
            .tol_feas(opts.tol_feas)
            .max_iter(opts.max_iter)
            .time_limit(opts.time_limit)
            .equilibrate_enable(variant.equilibrate)
            .max_step_fraction(variant.step)
            .build()
            .map_err(|e| Error::Solver(format!("invalid backend settings: {e:?}")))?;
        let mut solver = DefaultSolver::new(&p, &program.objective, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("backend rejected the program: {e:?}")))?;
        solver.solve();
        Ok(solver.solution)
    };
    let mut sol = run(opts, Variant::DEFAULT)?;
    // Badly scaled or degenerate programs can stall or end at reduced
    // accuracy. Retry without equilibration, with shorter steps and finally
    // at RELAXED_TOL, keeping the best answer.
    let loose = SolveOptions {
        tol_gap_abs: opts.tol_gap_abs.max(RELAXED_TOL),
        tol_gap_rel: opts.tol_gap_rel.max(RELAXED_TOL),
        tol_feas: opts.tol_feas.max(RELAXED_TOL),
        ..opts.clone()
    };
    let ladder = [
        (opts, Variant { equilibrate: false, ..Variant::DEFAULT }),
        (opts, Variant { step: 0.9, ..Variant::DEFAULT }),
        (&loose, Variant { step: 0.9, ..Variant::DEFAULT }),
    ];
    let mut retries = 0;
    for (attempt, variant) in ladder {
        if quality(sol.status) == 0 {
            break;
        }
        let remaining = opts.time_limit - start.elapsed().as_secs_f64();
        if remaining <= 0.0 {
            break;
        }
        let retry = run(
            &SolveOptions {
                time_limit: remaining,
                ..attempt.clone()
            },
            variant,
        )?;
        retries += 1;
        if rank(&retry) < rank(&sol) {
            sol = retry;
        }
    }
    let sol = &sol;

    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
            SolveStatus::Unbounded
        }
        _ => SolveStatus::NumericalError,
    };
    let primal = sol.x.clone();
    let objective_value = match status {
        SolveStatus::Optimal => program.objective_value(&primal),
        SolveStatus::Infeasible => f64::INFINITY,
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        SolveStatus::NumericalError => f64::NAN,
    };
    let mut info = BTreeMap::new();
    info.insert("iterations".into(), sol.iterations as f64);
    info.insert("solve_time".into(), start.elapsed().as_secs_f64());
    info.insert("r_prim".into(), sol.r_prim);
    info.insert("r_dual".into(), sol.r_dual);
    info.insert("obj_val_dual".into(), sol.obj_val_dual + program.objective_constant);
    info.insert(
        "almost".into(),
        matches!(
            sol.status,
            SolverStatus::AlmostSolved
                | SolverStatus::AlmostPrimalInfeasible
                | SolverStatus::AlmostDualInfeasible
        ) as u8 as f64,
    );
    info.insert("rows".into(), m as f64);
    info.insert("retries".into(), retries as f64);
    Ok(SolveResult {
        status,
        objective_value,
        primal,
        solver_info: info,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::{ConeDescriptor, LinExpr, ModelBuilder};

    #[test]
    fn bounded_below_by_zero() {
        let mut m = ModelBuilder::new();
        let x = m.var();
        m.nonneg(x.into());
        m.minimize(x.into());
        let s = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.result.status, SolveStatus::Optimal);
        assert!(s.result.objective_value.abs() < 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let mut m = ModelBuilder::new();
        let x = m.var();
        m.nonneg(LinExpr::from(x) + 1.0);
        m.nonneg(-LinExpr::from(x) + -2.0);
        let s = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.result.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_program() {
        let mut m = ModelBuilder::new();
        let x = m.var();
        m.minimize(x.into());
        m.nonneg(-LinExpr::from(x));
        let s = m.solve(&SolveOptions::default()).unwrap();
        assert_eq!(s.result.status, SolveStatus::Unbounded);
    }

    #[test]
    fn small_sdp() {
        // min x s.t. [[x, 1], [1, x]] ⪰ 0
        let mut m = ModelBuilder::new();
        let x = m.var();
        m.add_cone(
            vec![
                x.into(),
                LinExpr::constant(std::f64::consts::SQRT_2),
                x.into(),
            ],
            Cone::Psd { order: 2 },
        );
        m.minimize(x.into());
        let s = m.solve(&SolveOptions::default()).unwrap();
        assert!((s.value(x) - 1.0).abs() < 1e-7);
    }

    #[test]
    fn unexpanded_loss_cone_is_a_capability_error() {
        use crate::casting::LossFunction;
        use crate::conic::{ConstraintBlock, SparseMatrix};
        let p = ConicProgram {
            num_vars: 3,
            objective: vec![0.0; 3],
            objective_constant: 0.0,
            constraints: vec![ConstraintBlock {
                a: SparseMatrix {
                    nrows: 3,
                    ncols: 3,
                    entries: vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)],
                },
                b: vec![0.0; 3],
                cone: ConeDescriptor::single(Cone::LossPerspective {
                    loss: LossFunction::Quadratic,
                }),
            }],
            var_names: None,
        };
        assert!(matches!(solve(&p, &SolveOptions::default()), Err(Error::Unsupported(_))));
    }
}
