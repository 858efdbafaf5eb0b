use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use crate::error::{Error, Result};

use super::{empirical_optimum, BuildStats, EvaluationFunction, SatisficingModel, Target};

/// Affine maps `β(ρ)`, `μ(ρ)`, `η(ρ)` of one sample. Each row holds the
/// intercept followed by the `n_f` coefficients on `ρ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineDualMaps {
    pub beta: Vec<Vec<f64>>,
    pub mu: Vec<Vec<f64>>,
    pub eta: Vec<f64>,
}

fn apply_affine(row: &[f64], rho: &[f64]) -> f64 {
    row[0] + row[1..].iter().zip(rho).map(|(a, b)| a * b).sum::<f64>()
}

impl AffineDualMaps {
    pub fn beta_at(&self, rho: &[f64]) -> Vec<f64> {
        self.beta.iter().map(|r| apply_affine(r, rho)).collect()
    }

    pub fn mu_at(&self, rho: &[f64]) -> Vec<f64> {
        self.mu.iter().map(|r| apply_affine(r, rho)).collect()
    }

    pub fn eta_at(&self, rho: &[f64]) -> f64 {
        apply_affine(&self.eta, rho)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationCoefficients {
    pub per_sample: Vec<AffineDualMaps>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SatisficingSolution {
    pub k: f64,
    pub x: Vec<f64>,
    pub tau: f64,
    pub z0: f64,
    pub upsilon: Vec<f64>,
    pub coefficients: Option<AdaptationCoefficients>,
    pub stats: BuildStats,
}

/// Adds the robust counterpart of `γ + Γᵀρ ≤ 0 ∀ρ ∈ P = {ρ ∈ K* : Bᵀρ = d}`:
/// `γ + dᵀv ≤ 0` and `Bv − Γ ∈ K` for a fresh `v`.
pub fn robust_counterpart(
    m: &mut ModelBuilder,
    eval: &EvaluationFunction,
    gamma: LinExpr,
    big_gamma: &[LinExpr],
) {
    let v = m.vars(eval.n_y());
    m.le(gamma + LinExpr::dot(&v, eval.d.as_slice()), LinExpr::zero());
    let rows: Vec<LinExpr> = (0..eval.n_f())
        .map(|l| {
            let mut e = -big_gamma[l].clone();
            for (j, &vj) in v.iter().enumerate() {
                e.add_term(vj, eval.b[(l, j)]);
            }
            e
        })
        .collect();
    m.add_cones(rows, &eval.cone);
}

/// Maps `τ` or `λ` to an absolute target together with `Z0`.
pub fn resolve_target(
    model: &SatisficingModel,
    target: Target,
    opts: &SolveOptions,
) -> Result<(f64, f64)> {
    let (z0, _) = empirical_optimum(model, opts)?;
    let tau = match target {
        Target::Tau(t) => t,
        Target::Lambda(l) => z0 + l,
    };
    Ok((tau, z0))
}

/// Minimal fragility `k` for target `τ` under the affine dual recourse
/// adaptation.
pub fn solve_satisficing(
    model: &SatisficingModel,
    target: Target,
    opts: &SolveOptions,
) -> Result<SatisficingSolution> {
    let (tau, z0) = resolve_target(model, target, opts)?;
    solve_satisficing_with_z0(model, tau, z0, opts)
}

struct AffineVars {
    beta0: Vec<Var>,
    beta: Vec<Vec<Var>>,
    mu0: Vec<Var>,
    mu: Vec<Vec<Var>>,
    eta0: Var,
    eta: Vec<Var>,
}

/// As [`solve_satisficing`] with a known empirical optimum `z0`.
pub fn solve_satisficing_with_z0(
    model: &SatisficingModel,
    tau: f64,
    z0: f64,
    opts: &SolveOptions,
) -> Result<SatisficingSolution> {
    if tau <= z0 - 1e-9 {
        return Err(Error::TargetTooLow { tau, z0 });
    }
    let start = Instant::now();
    let eval = &model.eval;
    let pen = &model.penalty;
    let hmat = &model.support.hmat;
    let (nf, nh, nmu) = (eval.n_f(), model.support.n_h(), pen.n_mu());

    let mut m = ModelBuilder::new();
    let x = m.vars(eval.n_x());
    model.decisions.add_to(&mut m, &x);
    let k = m.var();
    m.nonneg(k.into());
    let ups = m.vars(model.omega());
    m.le(
        LinExpr::sum(&ups).scaled(1.0 / model.omega() as f64),
        LinExpr::constant(tau),
    );

    // c_r = H M_rᵀ so that M_r Hᵀβ = c_rᵀβ
    let c = hmat * pen.m.transpose();
    let mut all = Vec::with_capacity(model.omega());
    for (w, zhat) in model.samples.iter().enumerate() {
        let hw = model.shifted_h(w);
        let fw = eval.shifted_f_expr(&x, zhat);
        let av = AffineVars {
            beta0: m.vars(nh),
            beta: (0..nh).map(|_| m.vars(nf)).collect(),
            mu0: m.vars(nmu),
            mu: (0..nmu).map(|_| m.vars(nf)).collect(),
            eta0: m.var(),
            eta: m.vars(nf),
        };

        // ρᵀf^ω(x) + (h^ω)ᵀβ(ρ) + η(ρ) ≤ υ_ω
        let mut gamma = LinExpr::dot(&av.beta0, hw.as_slice());
        gamma.add_term(av.eta0, 1.0);
        gamma.add_term(ups[w], -1.0);
        let big: Vec<LinExpr> = (0..nf)
            .map(|l| {
                let mut e = fw[l].clone();
                for i in 0..nh {
                    e.add_term(av.beta[i][l], hw[i]);
                }
                e.add_term(av.eta[l], 1.0);
                e
            })
            .collect();
        robust_counterpart(&mut m, eval, gamma, &big);

        // M(F(x)ᵀρ − Hᵀβ(ρ)) + Nμ(ρ) + sη(ρ) ≤ tk
        for r in 0..pen.n_m() {
            let mr: Vec<f64> = pen.m.row(r).iter().cloned().collect();
            let mut gamma = LinExpr::zero();
            for i in 0..nh {
                gamma.add_term(av.beta0[i], -c[(i, r)]);
            }
            for j in 0..nmu {
                gamma.add_term(av.mu0[j], pen.n[(r, j)]);
            }
            gamma.add_term(av.eta0, pen.s[r]);
            gamma.add_term(k, -pen.t[r]);
            let big: Vec<LinExpr> = (0..nf)
                .map(|l| {
                    let mut e = eval.f_row_times(&x, l, &mr);
                    for i in 0..nh {
                        e.add_term(av.beta[i][l], -c[(i, r)]);
                    }
                    for j in 0..nmu {
                        e.add_term(av.mu[j][l], pen.n[(r, j)]);
                    }
                    e.add_term(av.eta[l], pen.s[r]);
                    e
                })
                .collect();
            robust_counterpart(&mut m, eval, gamma, &big);
        }

        // β(ρ) ≥ 0, η(ρ) ≥ 0
        for i in 0..nh {
            let big: Vec<LinExpr> = av.beta[i].iter().map(|&v| LinExpr::term(v, -1.0)).collect();
            robust_counterpart(&mut m, eval, LinExpr::term(av.beta0[i], -1.0), &big);
        }
        let big: Vec<LinExpr> = av.eta.iter().map(|&v| LinExpr::term(v, -1.0)).collect();
        robust_counterpart(&mut m, eval, LinExpr::term(av.eta0, -1.0), &big);
        all.push(av);
    }
    m.minimize(k.into());
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let stats_base = BuildStats {
        vars: m.num_vars(),
        rows: m.num_rows(),
        build_ms,
        solve_ms: 0.0,
    };

    let t = Instant::now();
    let s = m.solve(opts)?;
    let solve_ms = t.elapsed().as_secs_f64() * 1e3;
    match s.result.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible if tau > z0 + 1e-6 => {
            return Err(Error::Invariant(format!(
                "satisficing program reported infeasible for τ = {tau} > Z0 = {z0}; \
                 check completeness/boundedness of the recourse and the penalty conditions"
            )))
        }
        SolveStatus::Infeasible => return Err(Error::TargetTooLow { tau, z0 }),
        st => {
            return Err(Error::Solver(format!(
                "satisficing program ended with status {st:?}"
            )))
        }
    }
    let row = |v0: Var, vs: &[Var]| -> Vec<f64> {
        std::iter::once(s.value(v0)).chain(vs.iter().map(|&v| s.value(v))).collect()
    };
    let per_sample = all
        .iter()
        .map(|av| AffineDualMaps {
            beta: av.beta0.iter().zip(&av.beta).map(|(&b0, b)| row(b0, b)).collect(),
            mu: av.mu0.iter().zip(&av.mu).map(|(&m0, mm)| row(m0, mm)).collect(),
            eta: row(av.eta0, &av.eta),
        })
        .collect();
    Ok(SatisficingSolution {
        k: s.value(k).max(0.0),
        x: s.values(&x),
        tau,
        z0,
        upsilon: s.values(&ups),
        coefficients: Some(AdaptationCoefficients { per_sample }),
        stats: BuildStats {
            solve_ms,
            ..stats_base
        },
    })
}

