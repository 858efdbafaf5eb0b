//! Two-stage LPs (`K` the nonnegative orthant) with the `ℓ₁` penalty.

use std::time::Instant;

use crate::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use crate::error::{validation, Error, Result};

use super::{robust_counterpart, BuildStats, SatisficingModel, SatisficingSolution};

fn check_applicable(model: &SatisficingModel, tau: f64, z0: f64) -> Result<()> {
    if !model.eval.cone.is_nonneg_orthant() {
        return validation("two-stage adaptations need K to be the nonnegative orthant");
    }
    if model.penalty.budget != Some(model.eval.n_z()) {
        return validation("two-stage adaptations need the ℓ₁ penalty (budgeted norm with Γ = n_z)");
    }
    if tau <= z0 - 1e-9 {
        return Err(Error::TargetTooLow { tau, z0 });
    }
    Ok(())
}

struct Common {
    m: ModelBuilder,
    x: Vec<Var>,
    k: Var,
    ups: Vec<Var>,
}

fn common(model: &SatisficingModel, tau: f64) -> Common {
    let mut m = ModelBuilder::new();
    let x = m.vars(model.eval.n_x());
    model.decisions.add_to(&mut m, &x);
    let k = m.var();
    m.nonneg(k.into());
    let ups = m.vars(model.omega());
    m.le(
        LinExpr::sum(&ups).scaled(1.0 / model.omega() as f64),
        LinExpr::constant(tau),
    );
    m.minimize(k.into());
    Common { m, x, k, ups }
}

fn finish(
    c: Common,
    tau: f64,
    z0: f64,
    start: Instant,
    what: &str,
    opts: &SolveOptions,
) -> Result<SatisficingSolution> {
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let (vars, rows) = (c.m.num_vars(), c.m.num_rows());
    let t = Instant::now();
    let s = c.m.solve(opts)?;
    let solve_ms = t.elapsed().as_secs_f64() * 1e3;
    match s.result.status {
        SolveStatus::Optimal => Ok(SatisficingSolution {
            k: s.value(c.k).max(0.0),
            x: s.values(&c.x),
            tau,
            z0,
            upsilon: s.values(&c.ups),
            coefficients: None,
            stats: BuildStats {
                vars,
                rows,
                build_ms,
                solve_ms,
            },
        }),
        SolveStatus::Infeasible => Err(Error::Solver(format!(
            "{what} adaptation is infeasible at τ = {tau} (Z0 = {z0})"
        ))),
        st => Err(Error::Solver(format!("{what} adaptation ended with {st:?}"))),
    }
}

/// Primal adaptation `y(ζ) = q + Qζ + q†‖ζ‖₁` with its explicit LP
/// counterpart.
pub fn solve_twostage_primal(
    model: &SatisficingModel,
    tau: f64,
    z0: f64,
    opts: &SolveOptions,
) -> Result<SatisficingSolution> {
    check_applicable(model, tau, z0)?;
    let start = Instant::now();
    let eval = &model.eval;
    let hmat = &model.support.hmat;
    let (nf, ny, nz, nh) = (eval.n_f(), eval.n_y(), eval.n_z(), model.support.n_h());
    let mut c = common(model, tau);
    let m = &mut c.m;
    let x = &c.x;
    let d = eval.d.as_slice();

    for (w, zhat) in model.samples.iter().enumerate() {
        let hw = model.shifted_h(w);
        let fw = eval.shifted_f_expr(x, zhat);
        let q = m.vars(ny);
        let qq: Vec<Vec<Var>> = (0..ny).map(|_| m.vars(nz)).collect();
        let qd = m.vars(ny);
        let w0 = m.vars(nh);
        let ws: Vec<Vec<Var>> = (0..nf).map(|_| m.vars(nh)).collect();
        for &v in w0.iter().chain(ws.iter().flatten()) {
            m.nonneg(v.into());
        }

        // k − dᵀq† ≥ 0
        let slack = LinExpr::from(c.k) - LinExpr::dot(&qd, d);
        m.nonneg(slack.clone());
        // dᵀq + hᵀw0 ≤ υ
        m.le(
            LinExpr::dot(&q, d) + LinExpr::dot(&w0, hw.as_slice()),
            c.ups[w].into(),
        );
        // |Hᵀw0 − Qᵀd| ≤ (k − dᵀq†)·1
        for j in 0..nz {
            let col: Vec<f64> = hmat.column(j).iter().cloned().collect();
            let mut e = LinExpr::dot(&w0, &col);
            for a in 0..ny {
                e.add_term(qq[a][j], -d[a]);
            }
            m.le(e.clone(), slack.clone());
            m.le(-e, slack.clone());
        }
        for i in 0..nf {
            let bi: Vec<f64> = eval.b.row(i).iter().cloned().collect();
            let bq = LinExpr::dot(&q, &bi);
            let bqd = LinExpr::dot(&qd, &bi);
            m.nonneg(bqd.clone());
            // f_i + hᵀwⁱ ≤ B_i q
            m.le(fw[i].clone() + LinExpr::dot(&ws[i], hw.as_slice()), bq);
            // |Hᵀwⁱ − F_iᵀ + QᵀB_iᵀ| ≤ B_i q†·1
            for j in 0..nz {
                let col: Vec<f64> = hmat.column(j).iter().cloned().collect();
                let mut e = LinExpr::dot(&ws[i], &col) - eval.f_entry(x, i, j);
                for a in 0..ny {
                    e.add_term(qq[a][j], bi[a]);
                }
                m.le(e.clone(), bqd.clone());
                m.le(-e, bqd.clone());
            }
        }
    }
    finish(c, tau, z0, start, "primal", opts)
}

/// Dual adaptation `β(ρ) = π + Πρ` over `P = {ρ ≥ 0 : Bᵀρ = d}`, where the
/// `ℓ₁` penalty reduces the `μ` block to the constant `k`.
pub fn solve_twostage_dual(
    model: &SatisficingModel,
    tau: f64,
    z0: f64,
    opts: &SolveOptions,
) -> Result<SatisficingSolution> {
    check_applicable(model, tau, z0)?;
    let start = Instant::now();
    let eval = &model.eval;
    let hmat = &model.support.hmat;
    let (nf, nz, nh) = (eval.n_f(), eval.n_z(), model.support.n_h());
    let mut c = common(model, tau);
    let m = &mut c.m;
    let x = &c.x;

    for (w, zhat) in model.samples.iter().enumerate() {
        let hw = model.shifted_h(w);
        let fw = eval.shifted_f_expr(x, zhat);
        let pi = m.vars(nh);
        let pp: Vec<Vec<Var>> = (0..nh).map(|_| m.vars(nf)).collect();

        // ρᵀf + β(ρ)ᵀh ≤ υ
        let gamma = LinExpr::dot(&pi, hw.as_slice()) - LinExpr::from(c.ups[w]);
        let big: Vec<LinExpr> = (0..nf)
            .map(|l| {
                let mut e = fw[l].clone();
                for i in 0..nh {
                    e.add_term(pp[i][l], hw[i]);
                }
                e
            })
            .collect();
        robust_counterpart(m, eval, gamma, &big);

        // |Hᵀβ(ρ) − F(x)ᵀρ| ≤ k·1
        for j in 0..nz {
            for sign in [1.0, -1.0] {
                let mut gamma = LinExpr::term(c.k, -1.0);
                for i in 0..nh {
                    gamma.add_term(pi[i], sign * hmat[(i, j)]);
                }
                let big: Vec<LinExpr> = (0..nf)
                    .map(|l| {
                        let mut e = eval.f_entry(x, l, j).scaled(-sign);
                        for i in 0..nh {
                            e.add_term(pp[i][l], sign * hmat[(i, j)]);
                        }
                        e
                    })
                    .collect();
                robust_counterpart(m, eval, gamma, &big);
            }
        }

        // β(ρ) ≥ 0
        for i in 0..nh {
            let big: Vec<LinExpr> = pp[i].iter().map(|&v| LinExpr::term(v, -1.0)).collect();
            robust_counterpart(m, eval, LinExpr::term(pi[i], -1.0), &big);
        }
    }
    finish(c, tau, z0, start, "dual", opts)
}
