use crate::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus};
use crate::error::{validation, Error, Result};

use super::SatisficingModel;

/// `Z0 = min_{x∈X} (1/Ω) Σ_ω g(x, ẑ^ω)` and a minimizer.
pub fn empirical_optimum(model: &SatisficingModel, opts: &SolveOptions) -> Result<(f64, Vec<f64>)> {
    let mut m = ModelBuilder::new();
    let x = m.vars(model.eval.n_x());
    model.decisions.add_to(&mut m, &x);
    let omega = model.omega() as f64;
    let mut obj = LinExpr::zero();
    for zhat in &model.samples {
        let rhs = model.eval.shifted_f_expr(&x, zhat);
        let cost = model.eval.add_recourse(&mut m, &rhs);
        obj.add_scaled(&cost, 1.0 / omega);
    }
    m.minimize(obj);
    let s = m.solve(opts)?;
    match s.result.status {
        SolveStatus::Optimal => Ok((s.result.objective_value, s.values(&x))),
        SolveStatus::Infeasible => validation(
            "empirical problem is infeasible: X is empty or some g(x, ẑ) has no feasible recourse",
        ),
        SolveStatus::Unbounded => validation(
            "empirical problem is unbounded: the recourse problem is not bounded below",
        ),
        SolveStatus::NumericalError => Err(Error::Solver(
            "empirical problem: backend reported a numerical error".into(),
        )),
    }
}
