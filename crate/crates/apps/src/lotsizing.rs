//! Network lot-sizing: robust and satisficing variants, each built with an
//! affine rule on the primal recourse `(Y(z), w(z))` or on the dual
//! multipliers `(β(ρ), β̂(ρ))`.
//!
//! Robust constraints `a₀ + aᵀξ ≥ 0 for all ξ` in a polyhedron with
//! `ξ ≥ 0` are replaced by their LP dual; the sign restriction on `ξ` is
//! folded into the inequality `a + Gᵀu ≥ 0`.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use satisfice::conic::{LinExpr, ModelBuilder, SolveOptions, SolveStatus, Var};
use satisfice::rng::{stream_rng, Stream};
use satisfice::{Error, Result};

/// Upper bound of both the order quantity and the demand at every node.
pub const CAPACITY: f64 = 20.0;

/// Default solve time limit in seconds.
pub const TIME_GUARD: f64 = 300.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LotSizingInstance {
    pub n: usize,
    pub seed: u64,
    /// Unit cost of the initial order.
    pub c: Vec<f64>,
    /// Unit cost of an emergency order.
    pub l: Vec<f64>,
    pub locations: Vec<[f64; 2]>,
    /// Transport cost, the Euclidean distance between nodes.
    pub t: Vec<Vec<f64>>,
    pub x_max: Vec<f64>,
    pub z_max: Vec<f64>,
}

impl LotSizingInstance {
    pub fn generate(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Validation("lot-sizing: need at least one node".into()));
        }
        let mut rng = stream_rng(seed, Stream::LotSizing);
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(8.0..=10.0)).collect();
        let l: Vec<f64> = (0..n).map(|_| rng.random_range(18.0..=20.0)).collect();
        let locations: Vec<[f64; 2]> = (0..n)
            .map(|_| [rng.random_range(0.0..=10.0), rng.random_range(0.0..=10.0)])
            .collect();
        let t = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let (p, q) = (locations[i], locations[j]);
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                    })
                    .collect()
            })
            .collect();
        Ok(LotSizingInstance {
            n,
            seed,
            c,
            l,
            locations,
            t,
            x_max: vec![CAPACITY; n],
            z_max: vec![CAPACITY; n],
        })
    }

    /// Ordered pairs `(i, j)` with `i ≠ j`, the possible shipments.
    fn arcs(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Robust,
    Satisficing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Primal,
    Dual,
}

/// Size of a built formulation. Single-variable sign and box restrictions
/// are counted as bounds, the remaining linear rows as constraints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStats {
    pub vars: usize,
    pub rows: usize,
    pub bounds: usize,
}

impl SizeStats {
    pub fn size(&self) -> usize {
        self.vars + self.rows
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LotSizingResult {
    pub n: usize,
    pub seed: u64,
    pub mode: Mode,
    pub method: Method,
    /// `r` in robust mode, `τ` in satisficing mode.
    pub parameter: f64,
    pub status: SolveStatus,
    /// `cᵀx + x₀` in robust mode, `k` in satisficing mode.
    pub objective: f64,
    pub x: Vec<f64>,
    pub size: SizeStats,
    pub build_ms: f64,
    pub solve_ms: f64,
    /// Set when the solve hit the time limit.
    pub timed_out: bool,
}

/// `a₀ + aᵀξ`, affine in the uncertain `ξ` with coefficients linear in the
/// decision variables.
struct Affine {
    c0: LinExpr,
    c: Vec<LinExpr>,
}

impl Affine {
    fn new(dim: usize) -> Self {
        Affine {
            c0: LinExpr::zero(),
            c: vec![LinExpr::zero(); dim],
        }
    }
}

/// Tracks sizes while building.
struct Builder {
    m: ModelBuilder,
    rows: usize,
    bounds: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            m: ModelBuilder::new(),
            rows: 0,
            bounds: 0,
        }
    }

    fn row(&mut self, e: LinExpr) {
        if e.terms.len() == 1 {
            self.bounds += 1;
        } else {
            self.rows += 1;
        }
        self.m.nonneg(e);
    }

    fn nonneg_vars(&mut self, n: usize) -> Vec<Var> {
        let v = self.m.vars(n);
        for &u in &v {
            self.row(u.into());
        }
        v
    }

    fn decisions(&mut self, inst: &LotSizingInstance) -> Vec<Var> {
        let x = self.nonneg_vars(inst.n);
        for (i, &xi) in x.iter().enumerate() {
            self.row(LinExpr::constant(inst.x_max[i]) - xi.into());
        }
        x
    }

    /// `a₀ + aᵀz ≥ 0` for all `0 ≤ z ≤ z̄` with `1ᵀz ≤ r` when `r` is given.
    fn robust_demand(&mut self, aff: Affine, z_max: &[f64], r: Option<f64>) {
        let u = self.nonneg_vars(z_max.len());
        let v = r.map(|_| self.nonneg_vars(1)[0]);
        let mut head = aff.c0 - LinExpr::dot(&u, z_max);
        if let (Some(v), Some(r)) = (v, r) {
            head.add_term(v, -r);
        }
        self.row(head);
        for (k, a) in aff.c.into_iter().enumerate() {
            let mut e = a;
            e.add_term(u[k], 1.0);
            if let Some(v) = v {
                e.add_term(v, 1.0);
            }
            self.row(e);
        }
    }

    /// `a₀ + aᵀρ ≥ 0` for all `ρ ≥ 0` with `Gρ ≤ g`.
    fn robust_dual_set(&mut self, aff: Affine, p: &DualSet) {
        let u = self.nonneg_vars(p.g.len());
        self.row(aff.c0 - LinExpr::dot(&u, &p.g));
        let mut rows = aff.c;
        for (terms, &ur) in p.rows.iter().zip(&u) {
            for &(k, coef) in terms {
                rows[k].add_term(ur, coef);
            }
        }
        for e in rows {
            self.row(e);
        }
    }
}

/// `P = {ρ ≥ 0 : ρ ≤ ℓ, ρᵢ − ρⱼ ≤ Tᵢⱼ (i ≠ j)}` stored row by row.
struct DualSet {
    rows: Vec<Vec<(usize, f64)>>,
    g: Vec<f64>,
}

impl DualSet {
    fn new(inst: &LotSizingInstance) -> Self {
        let mut rows = Vec::new();
        let mut g = Vec::new();
        for i in 0..inst.n {
            rows.push(vec![(i, 1.0)]);
            g.push(inst.l[i]);
        }
        for (i, j) in inst.arcs() {
            rows.push(vec![(i, 1.0), (j, -1.0)]);
            g.push(inst.t[i][j]);
        }
        DualSet { rows, g }
    }
}

/// Affine rule `a₀ + Σₖ aₖ ξₖ` with fresh coefficient variables.
struct Rule {
    c0: Var,
    c: Vec<Var>,
}

impl Rule {
    fn new(m: &mut ModelBuilder, dim: usize) -> Self {
        Rule {
            c0: m.var(),
            c: m.vars(dim),
        }
    }

    fn add_to(&self, aff: &mut Affine, scale: f64) {
        aff.c0.add_term(self.c0, scale);
        for (a, &v) in aff.c.iter_mut().zip(&self.c) {
            a.add_term(v, scale);
        }
    }

    fn affine(&self) -> Affine {
        let mut a = Affine::new(self.c.len());
        self.add_to(&mut a, 1.0);
        a
    }
}

struct Built {
    b: Builder,
    x: Vec<Var>,
    build_ms: f64,
}

fn build_primal(inst: &LotSizingInstance, mode: Mode, param: f64) -> Built {
    let start = Instant::now();
    let n = inst.n;
    let arcs = inst.arcs();
    let mut b = Builder::new();
    let x = b.decisions(inst);
    let y: Vec<Rule> = arcs.iter().map(|_| Rule::new(&mut b.m, n)).collect();
    let w: Vec<Rule> = (0..n).map(|_| Rule::new(&mut b.m, n)).collect();
    let (r, epigraph) = match mode {
        Mode::Robust => (Some(param), b.m.var()),
        Mode::Satisficing => (None, b.m.var()),
    };
    let z_max = &inst.z_max;

    // balance: x + Yᵀ1 − Y1 + w ≥ z
    let mut balance: Vec<Affine> = (0..n).map(|_| Affine::new(n)).collect();
    for (i, bal) in balance.iter_mut().enumerate() {
        bal.c0.add_term(x[i], 1.0);
        bal.c[i] += &LinExpr::constant(-1.0);
        w[i].add_to(bal, 1.0);
    }
    for (a, &(i, j)) in arcs.iter().enumerate() {
        y[a].add_to(&mut balance[j], 1.0);
        y[a].add_to(&mut balance[i], -1.0);
    }
    for bal in balance {
        b.robust_demand(bal, z_max, r);
    }

    // second-stage cost against the epigraph x₀ or against τ + k·1ᵀz
    let mut cost = Affine::new(n);
    for (a, &(i, j)) in arcs.iter().enumerate() {
        y[a].add_to(&mut cost, -inst.t[i][j]);
    }
    for i in 0..n {
        w[i].add_to(&mut cost, -inst.l[i]);
    }
    match mode {
        Mode::Robust => {
            cost.c0.add_term(epigraph, 1.0);
        }
        Mode::Satisficing => {
            cost.c0 += &(LinExpr::constant(param) - LinExpr::dot(&x, &inst.c));
            for ck in cost.c.iter_mut() {
                ck.add_term(epigraph, 1.0);
            }
        }
    }
    b.robust_demand(cost, z_max, r);

    for rule in y.iter().chain(&w) {
        b.robust_demand(rule.affine(), z_max, r);
    }

    match mode {
        Mode::Robust => b.m.minimize(LinExpr::dot(&x, &inst.c) + LinExpr::from(epigraph)),
        Mode::Satisficing => {
            b.row(epigraph.into());
            b.m.minimize(epigraph.into());
        }
    }
    Built {
        b,
        x,
        build_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

fn build_dual(inst: &LotSizingInstance, mode: Mode, param: f64) -> Built {
    let start = Instant::now();
    let n = inst.n;
    let p = DualSet::new(inst);
    let mut b = Builder::new();
    let x = b.decisions(inst);
    let beta: Vec<Rule> = (0..n).map(|_| Rule::new(&mut b.m, n)).collect();
    let z_max = &inst.z_max;

    match mode {
        Mode::Robust => {
            let r = param;
            let x0 = b.m.var();
            let hat = Rule::new(&mut b.m, n);
            // z̄ᵀβ(ρ) + r·β̂(ρ) ≤ ρᵀx + x₀
            let mut obj = Affine::new(n);
            obj.c0.add_term(x0, 1.0);
            for (k, ck) in obj.c.iter_mut().enumerate() {
                ck.add_term(x[k], 1.0);
            }
            for (i, bi) in beta.iter().enumerate() {
                bi.add_to(&mut obj, -z_max[i]);
            }
            hat.add_to(&mut obj, -r);
            b.robust_dual_set(obj, &p);
            // β(ρ) + β̂(ρ)·1 ≥ ρ
            for (i, bi) in beta.iter().enumerate() {
                let mut a = bi.affine();
                hat.add_to(&mut a, 1.0);
                a.c[i] += &LinExpr::constant(-1.0);
                b.robust_dual_set(a, &p);
            }
            for rule in beta.iter().chain(std::iter::once(&hat)) {
                b.robust_dual_set(rule.affine(), &p);
            }
            b.m.minimize(LinExpr::dot(&x, &inst.c) + LinExpr::from(x0));
        }
        Mode::Satisficing => {
            let tau = param;
            let k = b.m.var();
            b.row(k.into());
            // (c − ρ)ᵀx + z̄ᵀβ(ρ) ≤ τ
            let mut obj = Affine::new(n);
            obj.c0 += &(LinExpr::constant(tau) - LinExpr::dot(&x, &inst.c));
            for (j, cj) in obj.c.iter_mut().enumerate() {
                cj.add_term(x[j], 1.0);
            }
            for (i, bi) in beta.iter().enumerate() {
                bi.add_to(&mut obj, -z_max[i]);
            }
            b.robust_dual_set(obj, &p);
            // β(ρ) + k·1 ≥ ρ
            for (i, bi) in beta.iter().enumerate() {
                let mut a = bi.affine();
                a.c0.add_term(k, 1.0);
                a.c[i] += &LinExpr::constant(-1.0);
                b.robust_dual_set(a, &p);
            }
            for rule in &beta {
                b.robust_dual_set(rule.affine(), &p);
            }
            b.m.minimize(k.into());
        }
    }
    Built {
        b,
        x,
        build_ms: start.elapsed().as_secs_f64() * 1e3,
    }
}

/// Size of a formulation without solving it.
pub fn formulation_size(inst: &LotSizingInstance, mode: Mode, method: Method, param: f64) -> SizeStats {
    let built = match method {
        Method::Primal => build_primal(inst, mode, param),
        Method::Dual => build_dual(inst, mode, param),
    };
    size_of(&built)
}

fn size_of(built: &Built) -> SizeStats {
    SizeStats {
        vars: built.b.m.num_vars(),
        rows: built.b.rows,
        bounds: built.b.bounds,
    }
}

fn check_parameter(mode: Mode, param: f64) -> Result<()> {
    let ok = param.is_finite() && param >= 0.0;
    if !ok {
        let name = match mode {
            Mode::Robust => "r",
            Mode::Satisficing => "τ",
        };
        return Err(Error::Validation(format!("lot-sizing: {name} must be finite and ≥ 0, got {param}")));
    }
    Ok(())
}

/// Builds and solves one formulation. A solve that ends without an optimal
/// point is reported through `status` rather than as an error.
pub fn run_lotsizing(
    inst: &LotSizingInstance,
    mode: Mode,
    method: Method,
    param: f64,
    opts: &SolveOptions,
) -> Result<LotSizingResult> {
    check_parameter(mode, param)?;
    let built = match method {
        Method::Primal => build_primal(inst, mode, param),
        Method::Dual => build_dual(inst, mode, param),
    };
    let size = size_of(&built);
    let start = Instant::now();
    let sol = built.b.m.solve(opts)?;
    let solve_ms = start.elapsed().as_secs_f64() * 1e3;
    let status = sol.result.status;
    let optimal = status == SolveStatus::Optimal;
    Ok(LotSizingResult {
        n: inst.n,
        seed: inst.seed,
        mode,
        method,
        parameter: param,
        status,
        objective: if optimal { sol.result.objective_value } else { f64::NAN },
        x: if optimal { sol.values(&built.x) } else { Vec::new() },
        size,
        build_ms: built.build_ms,
        solve_ms,
        timed_out: !optimal && solve_ms >= opts.time_limit * 1e3,
    })
}

/// Minimal total cost when the demand is known to be `z̄/2`.
pub fn nominal_cost(inst: &LotSizingInstance, opts: &SolveOptions) -> Result<f64> {
    let n = inst.n;
    let arcs = inst.arcs();
    let mut b = Builder::new();
    let x = b.decisions(inst);
    let y = b.nonneg_vars(arcs.len());
    let w = b.nonneg_vars(n);
    for i in 0..n {
        let mut e = LinExpr::from(x[i]) + LinExpr::from(w[i]) + (-0.5 * inst.z_max[i]);
        for (a, &(p, q)) in arcs.iter().enumerate() {
            if q == i {
                e.add_term(y[a], 1.0);
            }
            if p == i {
                e.add_term(y[a], -1.0);
            }
        }
        b.row(e);
    }
    let mut obj = LinExpr::dot(&x, &inst.c) + LinExpr::dot(&w, &inst.l);
    for (a, &(i, j)) in arcs.iter().enumerate() {
        obj.add_term(y[a], inst.t[i][j]);
    }
    b.m.minimize(obj);
    let sol = b.m.solve(opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("nominal lot-sizing ended with {:?}", sol.result.status)));
    }
    Ok(sol.result.objective_value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances_form_a_metric() {
        let inst = LotSizingInstance::generate(6, 3).unwrap();
        for i in 0..6 {
            assert_eq!(inst.t[i][i], 0.0);
            for j in 0..6 {
                assert_eq!(inst.t[i][j], inst.t[j][i]);
                for k in 0..6 {
                    assert!(inst.t[i][k] <= inst.t[i][j] + inst.t[j][k] + 1e-12);
                }
            }
        }
        assert!(inst.c.iter().all(|v| (8.0..=10.0).contains(v)));
        assert!(inst.l.iter().all(|v| (18.0..=20.0).contains(v)));
    }

    #[test]
    fn collapsed_uncertainty_costs_nothing() {
        let inst = LotSizingInstance::generate(4, 1).unwrap();
        for method in [Method::Primal, Method::Dual] {
            let r = run_lotsizing(&inst, Mode::Robust, method, 0.0, &SolveOptions::default()).unwrap();
            assert!(r.objective.abs() < 1e-7, "{method:?}: {}", r.objective);
            assert!(r.x.iter().all(|v| v.abs() < 1e-6));
        }
    }
}
