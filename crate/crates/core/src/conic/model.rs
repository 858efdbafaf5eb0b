use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use super::{solve, Cone, ConeDescriptor, ConicProgram, ConstraintBlock, SolveOptions, SolveResult, SparseMatrix};
use crate::error::Result;

/// Handle to a decision variable of a [`ModelBuilder`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub usize);

/// Affine expression `Σ cᵢ·xᵢ + constant`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        LinExpr::default()
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(v: Var, c: f64) -> Self {
        LinExpr {
            terms: vec![(v.0, c)],
            constant: 0.0,
        }
    }

    /// `Σ cᵢ·vᵢ`
    pub fn dot(vars: &[Var], coeffs: &[f64]) -> Self {
        let mut e = LinExpr::zero();
        for (v, &c) in vars.iter().zip(coeffs) {
            e.add_term(*v, c);
        }
        e
    }

    pub fn sum(vars: &[Var]) -> Self {
        let mut e = LinExpr::zero();
        for v in vars {
            e.add_term(*v, 1.0);
        }
        e
    }

    pub fn add_term(&mut self, v: Var, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms.push((v.0, c));
        }
        self
    }

    /// `self += c·other`
    pub fn add_scaled(&mut self, other: &LinExpr, c: f64) -> &mut Self {
        if c != 0.0 {
            self.terms
                .extend(other.terms.iter().map(|&(i, a)| (i, a * c)));
            self.constant += c * other.constant;
        }
        self
    }

    pub fn scaled(&self, c: f64) -> LinExpr {
        let mut e = LinExpr::zero();
        e.add_scaled(self, c);
        e
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

impl From<Var> for LinExpr {
    fn from(v: Var) -> Self {
        LinExpr::term(v, 1.0)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Add<f64> for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: f64) -> LinExpr {
        self.constant += rhs;
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(self, rhs: f64) -> LinExpr {
        self.scaled(rhs)
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self.scaled(-1.0)
    }
}

/// Incremental builder for conic programs in `expr ∈ cone` form.
///
/// Loss-perspective atoms are rewritten into standard cones on insertion
/// (see [`crate::casting::LossFunction::expand`]), so every built program
/// only contains cones the backend understands.
#[derive(Clone, Debug, Default)]
pub struct ModelBuilder {
    num_vars: usize,
    objective: LinExpr,
    blocks: Vec<(Vec<LinExpr>, Cone)>,
}

impl ModelBuilder {
    pub fn new() -> Self {
        ModelBuilder::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn num_rows(&self) -> usize {
        self.blocks.iter().map(|(r, _)| r.len()).sum()
    }

    pub fn var(&mut self) -> Var {
        self.num_vars += 1;
        Var(self.num_vars - 1)
    }

    pub fn vars(&mut self, n: usize) -> Vec<Var> {
        (0..n).map(|_| self.var()).collect()
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    /// Adds `rows ∈ cone`.
    pub fn add_cone(&mut self, rows: Vec<LinExpr>, cone: Cone) {
        assert_eq!(
            rows.len(),
            cone.dim(),
            "{} cone of dimension {} given {} rows",
            cone.name(),
            cone.dim(),
            rows.len()
        );
        match cone {
            Cone::LossPerspective { loss } => {
                let n = loss.arity();
                let mut rows = rows;
                let v2 = rows.pop().unwrap();
                let v1 = rows.pop().unwrap();
                debug_assert_eq!(rows.len(), n);
                loss.expand(self, &rows, v1, v2);
            }
            Cone::Free { .. } => {}
            Cone::Nonneg { .. } | Cone::Zero { .. } if rows.is_empty() => {}
            other => self.blocks.push((rows, other)),
        }
    }

    /// Adds `rows ∈ cone` for a product cone.
    pub fn add_cones(&mut self, rows: Vec<LinExpr>, cone: &ConeDescriptor) {
        assert_eq!(rows.len(), cone.total_dim());
        let mut it = rows.into_iter();
        for atom in &cone.atoms {
            let part: Vec<LinExpr> = it.by_ref().take(atom.dim()).collect();
            self.add_cone(part, atom.clone());
        }
    }

    /// `expr ≥ 0`
    pub fn nonneg(&mut self, expr: LinExpr) {
        self.add_cone(vec![expr], Cone::Nonneg { dim: 1 });
    }

    /// `expr = 0`
    pub fn zero(&mut self, expr: LinExpr) {
        self.add_cone(vec![expr], Cone::Zero { dim: 1 });
    }

    /// `lhs ≤ rhs`
    pub fn le(&mut self, lhs: LinExpr, rhs: LinExpr) {
        self.nonneg(rhs - lhs);
    }

    /// `lhs = rhs`
    pub fn eq(&mut self, lhs: LinExpr, rhs: LinExpr) {
        self.zero(lhs - rhs);
    }

    /// Assembles the program, merging consecutive scalar nonnegative and zero
    /// rows into single atoms.
    pub fn build(&self) -> ConicProgram {
        let mut constraints: Vec<ConstraintBlock> = Vec::new();
        let mut atoms: Vec<Cone> = Vec::new();
        let mut a = SparseMatrix::new(0, self.num_vars);
        let mut b = Vec::new();
        for (rows, cone) in &self.blocks {
            for r in rows {
                let i = b.len();
                for &(j, c) in &r.terms {
                    a.push(i, j, c);
                }
                b.push(r.constant);
            }
            match (atoms.last_mut(), cone) {
                (Some(Cone::Nonneg { dim }), Cone::Nonneg { dim: d }) => *dim += d,
                (Some(Cone::Zero { dim }), Cone::Zero { dim: d }) => *dim += d,
                _ => atoms.push(cone.clone()),
            }
        }
        a.nrows = b.len();
        if !b.is_empty() {
            constraints.push(ConstraintBlock {
                a,
                b,
                cone: ConeDescriptor::new(atoms),
            });
        }
        let mut objective = vec![0.0; self.num_vars];
        for &(j, c) in &self.objective.terms {
            objective[j] += c;
        }
        ConicProgram {
            num_vars: self.num_vars,
            objective,
            objective_constant: self.objective.constant,
            constraints,
            var_names: None,
        }
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<Solution> {
        let program = self.build();
        let result = solve(&program, opts)?;
        Ok(Solution { program, result })
    }
}

/// A built program together with its solve result.
#[derive(Clone, Debug)]
pub struct Solution {
    pub program: ConicProgram,
    pub result: SolveResult,
}

impl Solution {
    pub fn value(&self, v: Var) -> f64 {
        self.result.primal[v.0]
    }

    pub fn values(&self, vs: &[Var]) -> Vec<f64> {
        vs.iter().map(|&v| self.value(v)).collect()
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        e.eval(&self.result.primal)
    }

    pub fn is_optimal(&self) -> bool {
        self.result.status == super::SolveStatus::Optimal
    }
}
