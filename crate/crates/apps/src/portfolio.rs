//! Data-driven portfolio study: empirical, Markowitz and satisficing
//! portfolios under exponential disutility, compared by certainty
//! equivalent under the true two-point return distribution.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use satisfice::casting::{cast, CastModel, FeaturedDomain, LossFunction};
use satisfice::conic::{Cone, LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use satisfice::engine::{
    empirical_optimum, solve_satisficing_with_z0, BuildStats, DecisionSet, EvaluationFunction,
    SatisficingModel,
};
use satisfice::oracle::certainty_equivalent;
use satisfice::penalty::{budgeted_norm, PolyhedralSupport};
use satisfice::rng::{stream_rng, Stream};
use satisfice::{Error, Result};

pub const PAPER_MU: [f64; 8] = [0.12, 0.16, 0.14, 0.13, 0.15, 0.12, 0.14, 0.15];
pub const PAPER_SIGMA: [f64; 8] = [0.18, 0.22, 0.20, 0.16, 0.14, 0.10, 0.14, 0.19];
pub const PAPER_A: [f64; 4] = [1.0, 2.0, 4.0, 8.0];
pub const PAPER_GAMMA: [usize; 4] = [1, 3, 6, 8];
pub const PAPER_LAMBDA: [f64; 4] = [0.005, 0.01, 0.04, 0.07];
/// Seed of the pinned benchmark sample draw.
pub const BENCHMARK_SEED: u64 = 1;

/// Skewness parameters `βᵢ = (1 + i/(n+1))/2` for `i = 1..n`.
pub fn default_beta(n: usize) -> Vec<f64> {
    (1..=n).map(|i| 0.5 * (1.0 + i as f64 / (n as f64 + 1.0))).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConfig {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub a: Vec<f64>,
    pub gamma: Vec<usize>,
    pub lambda: Vec<f64>,
    pub omega: usize,
    pub seed: u64,
    pub padding: f64,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        PortfolioConfig {
            mu: PAPER_MU.to_vec(),
            sigma: PAPER_SIGMA.to_vec(),
            beta: default_beta(8),
            a: PAPER_A.to_vec(),
            gamma: PAPER_GAMMA.to_vec(),
            lambda: PAPER_LAMBDA.to_vec(),
            omega: 100,
            seed: BENCHMARK_SEED,
            padding: 0.1,
        }
    }
}

impl PortfolioConfig {
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.sigma.len() != n || self.beta.len() != n {
            return Err(Error::Validation(format!(
                "portfolio: μ, σ, β have lengths {}, {}, {}",
                n,
                self.sigma.len(),
                self.beta.len()
            )));
        }
        if self.beta.iter().any(|&b| !(b > 0.0 && b < 1.0)) || self.sigma.iter().any(|&s| !(s >= 0.0)) {
            return Err(Error::Validation("portfolio: need β ∈ (0,1) and σ ≥ 0".into()));
        }
        if self.a.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::Validation("portfolio: risk aversion must be positive".into()));
        }
        if self.gamma.iter().any(|&g| g == 0 || g > n) {
            return Err(Error::Validation(format!("portfolio: Γ must lie in 1..={n}")));
        }
        if self.lambda.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Validation("portfolio: λ must be positive".into()));
        }
        if self.omega == 0 || !(self.padding >= 0.0) {
            return Err(Error::Validation("portfolio: need Ω ≥ 1 and padding ≥ 0".into()));
        }
        Ok(())
    }

    pub fn asset_names(&self) -> Vec<String> {
        (1..=self.n()).map(|i| format!("asset{i}")).collect()
    }
}

/// High and low outcomes of asset `i`: `μ + σ√(β(1−β))/β` with
/// probability `β`, `μ − σ√(β(1−β))/(1−β)` otherwise.
pub fn two_point_outcomes(mu: f64, sigma: f64, beta: f64) -> (f64, f64) {
    let s = (beta * (1.0 - beta)).sqrt();
    (mu + sigma * s / beta, mu - sigma * s / (1.0 - beta))
}

/// `Ω` independent draws of the two-point return vector (one row per draw).
pub fn gen_two_point_samples(cfg: &PortfolioConfig) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(cfg.seed, Stream::Samples);
    let outcomes: Vec<(f64, f64)> = (0..cfg.n())
        .map(|i| two_point_outcomes(cfg.mu[i], cfg.sigma[i], cfg.beta[i]))
        .collect();
    (0..cfg.omega)
        .map(|_| {
            (0..cfg.n())
                .map(|i| {
                    if rng.random::<f64>() < cfg.beta[i] {
                        outcomes[i].0
                    } else {
                        outcomes[i].1
                    }
                })
                .collect()
        })
        .collect()
}

/// Shared support bounds: minimum and maximum over all sample entries,
/// widened by `padding`.
pub fn support_bounds(samples: &[Vec<f64>], padding: f64) -> (f64, f64) {
    let all = samples.iter().flatten();
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo - padding, hi + padding)
}

/// The satisficing model of one `(a, Γ)` pair together with the cast it uses.
#[derive(Clone, Debug)]
pub struct PortfolioModel {
    pub model: SatisficingModel,
    pub cast: CastModel,
    pub lo: f64,
    pub hi: f64,
    pub a: f64,
    pub gamma: usize,
}

/// Exponential disutility of `−xᵀz` on the simplex, cast on the featured
/// domain `[−z̄, −z̲]` with `P = depth + 1e−6`; shared box support and the
/// budgeted norm with budget `gamma`.
pub fn build_model(samples: &[Vec<f64>], a: f64, gamma: usize, padding: f64) -> Result<PortfolioModel> {
    let n = samples.first().map_or(0, |s| s.len());
    let (lo, hi) = support_bounds(samples, padding);
    let c = cast(&LossFunction::ExpDisutility { a }, FeaturedDomain::new(-hi, -lo), None)?;
    let slices: Vec<DMatrix<f64>> = (0..n)
        .map(|j| {
            let mut w = DMatrix::zeros(1, n);
            w[(0, j)] = -1.0;
            w
        })
        .collect();
    let eval = EvaluationFunction::from_cast(
        &c,
        &DVector::zeros(1),
        &DMatrix::zeros(1, n),
        &DMatrix::zeros(1, n),
        &slices,
    )?;
    let support = PolyhedralSupport::boxed(&vec![lo; n], &vec![hi; n])?;
    let model = SatisficingModel::new(
        eval,
        support,
        budgeted_norm(n, gamma)?,
        samples.iter().map(|s| DVector::from_column_slice(s)).collect(),
        DecisionSet::simplex(n),
    )?;
    Ok(PortfolioModel {
        model,
        cast: c,
        lo,
        hi,
        a,
        gamma,
    })
}

/// Markowitz portfolio: maximize `xᵀμ̂ − (a/2)xᵀΣ̂x` on the simplex with the
/// maximum-likelihood moments of the samples.
pub fn markowitz_portfolio(samples: &[Vec<f64>], a: f64, opts: &SolveOptions) -> Result<Vec<f64>> {
    let omega = samples.len();
    let n = samples[0].len();
    let mean: Vec<f64> = (0..n)
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / omega as f64)
        .collect();
    let scale = 1.0 / (omega as f64).sqrt();
    let mut m = ModelBuilder::new();
    let x = m.vars(n);
    DecisionSet::simplex(n).add_to(&mut m, &x);
    let t = m.var();
    // t ≥ ‖Cx‖² with C the scaled centered samples: (t+1, t−1, 2Cx) ∈ SOC
    let mut rows = vec![LinExpr::from(t) + 1.0, LinExpr::from(t) + (-1.0)];
    for s in samples {
        let c: Vec<f64> = (0..n).map(|i| 2.0 * scale * (s[i] - mean[i])).collect();
        rows.push(LinExpr::dot(&x, &c));
    }
    m.add_cone(rows, Cone::Soc { dim: omega + 2 });
    m.minimize(LinExpr::term(t, 0.5 * a) - LinExpr::dot(&x, &mean));
    let s = m.solve(opts)?;
    if s.result.status != SolveStatus::Optimal {
        return Err(Error::Solver(format!("Markowitz program ended with {:?}", s.result.status)));
    }
    Ok(s.values(&x))
}

/// Result of the direct exponential-cone formulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectSolution {
    pub k: f64,
    pub x: Vec<f64>,
    pub stats: BuildStats,
}

/// `vᵀρ ≤ w` for all `ρ` in the dual set of the cast evaluation function,
/// written with one scalar `y`: `y ≥ v₃`, `y ≥ v₄` and
/// `(y − v₃)(exp(−a v₁/(y − v₃)) − 1)/a + v₂ + P y ≤ w`.
fn exp_counterpart(m: &mut ModelBuilder, a: f64, p: f64, v: [LinExpr; 4], w: LinExpr) {
    let y = m.var();
    let r = m.var();
    let [v1, v2, v3, v4] = v;
    let s = LinExpr::from(y) - v3;
    m.nonneg(LinExpr::from(y) - v4);
    // r ≤ w − v₂ − P y keeps the large P·y term out of the cone row
    m.le(LinExpr::from(r), w - v2 - LinExpr::term(y, p));
    let third = LinExpr::term(r, a) + s.clone();
    m.add_cone(vec![v1.scaled(-a), s, third], Cone::Exp);
}

/// Affine map `u⁰ + Σⱼ uʲρⱼ` over the four dual coordinates, one per asset.
struct Affine4 {
    coef: Vec<[Var; 5]>,
}

impl Affine4 {
    fn new(m: &mut ModelBuilder, n: usize) -> Self {
        Affine4 {
            coef: (0..n)
                .map(|_| {
                    let v = m.vars(5);
                    [v[0], v[1], v[2], v[3], v[4]]
                })
                .collect(),
        }
    }

    fn term(&self, i: usize, j: usize) -> LinExpr {
        LinExpr::from(self.coef[i][j])
    }
}

/// Minimal `k` of the satisficing portfolio problem built directly on
/// exponential cones, with `β̄, β̲, μ` affine in the dual variable.
pub fn direct_satisficing(pm: &PortfolioModel, tau: f64, opts: &SolveOptions) -> Result<DirectSolution> {
    let start = Instant::now();
    let model = &pm.model;
    let n = model.eval.n_x();
    let (a, p) = (pm.a, pm.cast.p);
    let gamma = pm.gamma as f64;
    let mut m = ModelBuilder::new();
    let x = m.vars(n);
    model.decisions.add_to(&mut m, &x);
    let k = m.var();
    m.nonneg(k.into());
    let ups = m.vars(model.omega());
    m.le(LinExpr::sum(&ups).scaled(1.0 / model.omega() as f64), LinExpr::constant(tau));
    m.minimize(k.into());

    for (w, zhat) in model.samples.iter().enumerate() {
        let up: Vec<f64> = (0..n).map(|i| pm.hi - zhat[i]).collect();
        let dn: Vec<f64> = (0..n).map(|i| pm.lo - zhat[i]).collect();
        let bb = Affine4::new(&mut m, n);
        let bl = Affine4::new(&mut m, n);
        let mu = Affine4::new(&mut m, n);

        // xᵀẑρ₁ − Pρ₂ + ρ₄ + z̄ᵀβ̄(ρ) − z̲ᵀβ̲(ρ) ≤ υ
        let support_term = |j: usize| {
            let mut e = LinExpr::zero();
            for i in 0..n {
                e += &bb.term(i, j).scaled(up[i]);
                e += &bl.term(i, j).scaled(-dn[i]);
            }
            e
        };
        let xz = LinExpr::dot(&x, zhat.as_slice());
        exp_counterpart(
            &mut m,
            a,
            p,
            [
                xz + support_term(1),
                support_term(2) + (-p),
                support_term(3),
                support_term(4) + 1.0,
            ],
            LinExpr::from(ups[w]) - support_term(0),
        );

        // 1ᵀμ(ρ) ≤ Γk
        let mu_sum = |j: usize| {
            let mut e = LinExpr::zero();
            for i in 0..n {
                e += &mu.term(i, j);
            }
            e
        };
        exp_counterpart(
            &mut m,
            a,
            p,
            [mu_sum(1), mu_sum(2), mu_sum(3), mu_sum(4)],
            LinExpr::term(k, gamma) - mu_sum(0),
        );

        for i in 0..n {
            // ±(xᵢρ₁ − β̄ᵢ(ρ) + β̲ᵢ(ρ)) − μᵢ(ρ) ≤ 0
            for sign in [1.0, -1.0] {
                let lam = |j: usize| (bl.term(i, j) - bb.term(i, j)).scaled(sign) - mu.term(i, j);
                exp_counterpart(
                    &mut m,
                    a,
                    p,
                    [LinExpr::term(x[i], sign) + lam(1), lam(2), lam(3), lam(4)],
                    -lam(0),
                );
            }
            // μᵢ(ρ) ≤ k
            exp_counterpart(
                &mut m,
                a,
                p,
                [mu.term(i, 1), mu.term(i, 2), mu.term(i, 3), mu.term(i, 4)],
                LinExpr::from(k) - mu.term(i, 0),
            );
            // β̄ᵢ(ρ) ≥ 0, β̲ᵢ(ρ) ≥ 0
            for b in [&bb, &bl] {
                exp_counterpart(
                    &mut m,
                    a,
                    p,
                    [-b.term(i, 1), -b.term(i, 2), -b.term(i, 3), -b.term(i, 4)],
                    b.term(i, 0),
                );
            }
        }
    }
    let build_ms = start.elapsed().as_secs_f64() * 1e3;
    let (vars, rows) = (m.num_vars(), m.num_rows());
    let t = Instant::now();
    let s = m.solve(opts)?;
    let solve_ms = t.elapsed().as_secs_f64() * 1e3;
    match s.result.status {
        SolveStatus::Optimal => Ok(DirectSolution {
            k: s.value(k).max(0.0),
            x: s.values(&x),
            stats: BuildStats {
                vars,
                rows,
                build_ms,
                solve_ms,
            },
        }),
        st => Err(Error::Solver(format!("direct portfolio program ended with {st:?}"))),
    }
}

/// Empirical and Markowitz portfolios for one risk aversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub a: f64,
    #[serde(rename = "Z0")]
    pub z0: f64,
    pub x_emp: Vec<f64>,
    pub ce_emp: f64,
    pub x_markowitz: Vec<f64>,
    pub ce_markowitz: f64,
}

/// One `(a, Γ, λ)` cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub a: f64,
    pub gamma: usize,
    pub lambda: f64,
    pub tau: f64,
    pub k: Option<f64>,
    pub k_direct: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub ce: Option<f64>,
    pub error: Option<String>,
    pub stats: Option<BuildStats>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortfolioReport {
    pub config: PortfolioConfig,
    pub support: [f64; 2],
    pub top_mean_asset: usize,
    pub baselines: Vec<Baseline>,
    pub cells: Vec<Cell>,
}

impl PortfolioReport {
    pub fn baseline(&self, a: f64) -> Option<&Baseline> {
        self.baselines.iter().find(|b| b.a == a)
    }

    /// The report without timing fields, for byte-for-byte comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for c in &mut r.cells {
            if let Some(s) = &mut c.stats {
                s.build_ms = 0.0;
                s.solve_ms = 0.0;
            }
        }
        r
    }

    pub fn to_csv(&self) -> String {
        let n = self.config.n();
        let mut out = String::from("a,gamma,lambda,tau,k,k_direct,ce_satisficing,ce_empirical,ce_markowitz");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(crate::model_file::fmt17).unwrap_or_default();
        for c in &self.cells {
            let b = self.baseline(c.a);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}",
                c.a,
                c.gamma,
                c.lambda,
                crate::model_file::fmt17(c.tau),
                opt(c.k),
                opt(c.k_direct),
                opt(c.ce),
                opt(b.map(|b| b.ce_emp)),
                opt(b.map(|b| b.ce_markowitz)),
            ));
            for i in 0..n {
                out.push(',');
                out.push_str(&opt(c.x.as_ref().map(|x| x[i])));
            }
            out.push('\n');
        }
        out
    }
}

fn cell(
    cfg: &PortfolioConfig,
    samples: &[Vec<f64>],
    base: &Baseline,
    gamma: usize,
    lambda: f64,
    opts: &SolveOptions,
) -> Cell {
    let tau = base.z0 + lambda;
    let mut c = Cell {
        a: base.a,
        gamma,
        lambda,
        tau,
        k: None,
        k_direct: None,
        x: None,
        ce: None,
        error: None,
        stats: None,
    };
    let run = || -> Result<(f64, f64, Vec<f64>, f64, BuildStats)> {
        let pm = build_model(samples, base.a, gamma, cfg.padding)?;
        let sol = solve_satisficing_with_z0(&pm.model, tau, base.z0, opts)?;
        let direct = direct_satisficing(&pm, tau, opts)?;
        let ce = certainty_equivalent(&sol.x, &cfg.mu, &cfg.sigma, &cfg.beta, base.a)?;
        Ok((sol.k, direct.k, sol.x, ce, sol.stats))
    };
    match run() {
        Ok((k, kd, x, ce, stats)) => {
            c.k = Some(k);
            c.k_direct = Some(kd);
            c.x = Some(x);
            c.ce = Some(ce);
            c.stats = Some(stats);
        }
        Err(e) => c.error = Some(e.to_string()),
    }
    c
}

/// Empirical and Markowitz portfolios at risk aversion `a`.
pub fn baseline(cfg: &PortfolioConfig, samples: &[Vec<f64>], a: f64, opts: &SolveOptions) -> Result<Baseline> {
    let pm = build_model(samples, a, 1, cfg.padding)?;
    let (z0, x_emp) = empirical_optimum(&pm.model, opts)?;
    let x_mk = markowitz_portfolio(samples, a, opts)?;
    Ok(Baseline {
        a,
        z0,
        ce_emp: certainty_equivalent(&x_emp, &cfg.mu, &cfg.sigma, &cfg.beta, a)?,
        x_emp,
        ce_markowitz: certainty_equivalent(&x_mk, &cfg.mu, &cfg.sigma, &cfg.beta, a)?,
        x_markowitz: x_mk,
    })
}

/// Runs every `(a, Γ, λ)` cell on the given samples. Cells run in
/// parallel; a failing cell records its error and the run continues.
pub fn run_portfolio(cfg: &PortfolioConfig, samples: &[Vec<f64>], opts: &SolveOptions) -> Result<PortfolioReport> {
    cfg.validate()?;
    if samples.len() != cfg.omega || samples.iter().any(|s| s.len() != cfg.n()) {
        return Err(Error::Validation(format!(
            "portfolio: expected {} samples of {} assets",
            cfg.omega,
            cfg.n()
        )));
    }
    let baselines = cfg
        .a
        .par_iter()
        .map(|&a| baseline(cfg, samples, a, opts))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize, f64)> = (0..baselines.len())
        .flat_map(|b| {
            cfg.gamma
                .iter()
                .flat_map(move |&g| cfg.lambda.iter().map(move |&l| (b, g, l)))
        })
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(b, g, l)| cell(cfg, samples, &baselines[b], g, l, opts))
        .collect();
    let means: Vec<f64> = (0..cfg.n())
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / samples.len() as f64)
        .collect();
    let top = (0..cfg.n()).fold(0, |best, i| if means[i] > means[best] { i } else { best });
    let (lo, hi) = support_bounds(samples, cfg.padding);
    Ok(PortfolioReport {
        config: cfg.clone(),
        support: [lo, hi],
        top_mean_asset: top,
        baselines,
        cells,
    })
}
