//! Loss functions, their perspectives and perspective casting.
//!
//! A convex loss `ℓ` is turned into a conic recourse problem
//!
//! ```text
//! ℓ̂(w) = min { y1 + P·y2 : (w, y1 + P, y2) ∈ K_ℓ, y2 ≥ 1 }
//!      = min_{y2 ≥ 1} P·y2 + y2·ℓ(w/y2) − P
//! ```
//!
//! which agrees with `ℓ` on the featured domain `W` whenever `P` is at least
//! the perspective depth `sup_{u∈W} ∇ℓ(u)ᵀu − ℓ(u)`, and has complete and
//! bounded recourse everywhere.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::conic::{Cone, ConeDescriptor, LinExpr, ModelBuilder};
use crate::error::{validation, Error, Result};

/// Upper end of the `y2` search range in [`CastModel::eval`].
pub const Y_MAX: f64 = 1e6;

/// Default gap between the casting constant and the perspective depth.
pub const DEFAULT_MARGIN: f64 = 1e-6;

/// Half-width used to encode the whole real line as a featured domain.
pub const REAL_LINE_HALF_WIDTH: f64 = 1e8;

/// Smooth convex losses supported by the library.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum LossFunction {
    /// `(exp(a·w) − 1)/a`
    ExpDisutility { a: f64 },
    /// `w²`
    Quadratic,
    /// `w²/2` for `|w| ≤ δ`, `δ(|w| − δ/2)` otherwise
    Huber { delta: f64 },
    /// `max(w, 0)²`
    SquaredHinge,
    /// `log(1 + exp(w))`
    Logexp,
    /// `log Σᵢ exp(wᵢ)` on `ℝⁿ`
    LogSumExp { n: usize },
}

fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn log_sum_exp(w: &[f64]) -> f64 {
    let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + w.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl LossFunction {
    pub fn id(&self) -> &'static str {
        match self {
            LossFunction::ExpDisutility { .. } => "exp_disutility",
            LossFunction::Quadratic => "quadratic",
            LossFunction::Huber { .. } => "huber",
            LossFunction::SquaredHinge => "squared_hinge",
            LossFunction::Logexp => "logexp",
            LossFunction::LogSumExp { .. } => "log_sum_exp",
        }
    }

    /// Input dimension `n_w`.
    pub fn arity(&self) -> usize {
        match self {
            LossFunction::LogSumExp { n } => *n,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LossFunction::ExpDisutility { a } if !(*a > 0.0 && a.is_finite()) => {
                validation(format!("exp_disutility needs a > 0, got {a}"))
            }
            LossFunction::Huber { delta } if !(*delta > 0.0 && delta.is_finite()) => {
                validation(format!("huber needs delta > 0, got {delta}"))
            }
            LossFunction::LogSumExp { n } if *n == 0 => {
                validation("log_sum_exp needs at least one input")
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        match *self {
            LossFunction::ExpDisutility { a } => (a * w[0]).exp_m1() / a,
            LossFunction::Quadratic => w[0] * w[0],
            LossFunction::Huber { delta } => {
                let x = w[0].abs();
                if x <= delta {
                    0.5 * x * x
                } else {
                    delta * (x - 0.5 * delta)
                }
            }
            LossFunction::SquaredHinge => w[0].max(0.0).powi(2),
            LossFunction::Logexp => softplus(w[0]),
            LossFunction::LogSumExp { .. } => log_sum_exp(w),
        }
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        match *self {
            LossFunction::ExpDisutility { a } => vec![(a * w[0]).exp()],
            LossFunction::Quadratic => vec![2.0 * w[0]],
            LossFunction::Huber { delta } => vec![w[0].clamp(-delta, delta)],
            LossFunction::SquaredHinge => vec![2.0 * w[0].max(0.0)],
            LossFunction::Logexp => vec![sigmoid(w[0])],
            LossFunction::LogSumExp { .. } => {
                let m = log_sum_exp(w);
                w.iter().map(|x| (x - m).exp()).collect()
            }
        }
    }

    /// Recession function `sup_u ∇ℓ(u)ᵀw`, i.e. the perspective at `v2 = 0`.
    pub fn recession(&self, w: &[f64]) -> f64 {
        match *self {
            LossFunction::ExpDisutility { .. } | LossFunction::SquaredHinge => {
                if w[0] <= 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            LossFunction::Quadratic => {
                if w[0] == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            LossFunction::Huber { delta } => delta * w[0].abs(),
            LossFunction::Logexp => w[0].max(0.0),
            LossFunction::LogSumExp { .. } => w.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// `y2·ℓ(w/y2)` for `y2 > 0`, the recession function at `y2 = 0` and
    /// `+∞` for negative `y2`.
    pub fn perspective_value(&self, w: &[f64], y2: f64) -> f64 {
        if y2 < 0.0 || y2.is_nan() {
            f64::INFINITY
        } else if y2 == 0.0 {
            self.recession(w)
        } else {
            let scaled: Vec<f64> = w.iter().map(|x| x / y2).collect();
            y2 * self.value(&scaled)
        }
    }

    /// `ℓ'(v)·v − ℓ(v)` for univariate losses, evaluated without overflow
    /// where the result is finite.
    pub fn depth_term(&self, v: f64) -> f64 {
        match *self {
            LossFunction::ExpDisutility { a } => {
                let e = (a * v).exp();
                if e.is_infinite() {
                    f64::INFINITY
                } else {
                    e * (v - 1.0 / a) + 1.0 / a
                }
            }
            LossFunction::Quadratic => v * v,
            LossFunction::Huber { delta } => {
                if v.abs() <= delta {
                    0.5 * v * v
                } else {
                    0.5 * delta * delta
                }
            }
            LossFunction::SquaredHinge => v.max(0.0).powi(2),
            LossFunction::Logexp => {
                if v >= 0.0 {
                    -v * sigmoid(-v) - (-v).exp().ln_1p()
                } else {
                    v * sigmoid(v) - v.exp().ln_1p()
                }
            }
            LossFunction::LogSumExp { .. } => 0.0,
        }
    }

    /// Rewrites `(w, v1, v2) ∈ K_ℓ` into standard cones on `m`, introducing
    /// auxiliary variables where needed.
    pub fn expand(&self, m: &mut ModelBuilder, w: &[LinExpr], v1: LinExpr, v2: LinExpr) {
        match *self {
            LossFunction::ExpDisutility { a } => {
                // v2·exp(a·w/v2) ≤ a·v1 + v2
                let z = v1.scaled(a) + v2.clone();
                m.add_cone(vec![w[0].scaled(a), v2, z], Cone::Exp);
            }
            LossFunction::Quadratic => {
                // w² ≤ v1·v2
                let rows = vec![
                    v1.clone() + v2.clone(),
                    v1 - v2,
                    w[0].scaled(2.0),
                ];
                m.add_cone(rows, Cone::Soc { dim: 3 });
            }
            LossFunction::Huber { delta } => {
                // v2·h(w/v2) = min_s s²/(2·v2) + δ|w − s|
                let s = m.var();
                let q = m.var();
                let r = m.var();
                let (s, q, r) = (LinExpr::from(s), LinExpr::from(q), LinExpr::from(r));
                m.add_cone(
                    vec![
                        q.clone() + v2.clone(),
                        q.clone() - v2,
                        s.scaled(std::f64::consts::SQRT_2),
                    ],
                    Cone::Soc { dim: 3 },
                );
                m.nonneg(r.clone() - w[0].clone() + s.clone());
                m.nonneg(r.clone() + w[0].clone() - s);
                m.nonneg(v1 - q - r.scaled(delta));
            }
            LossFunction::SquaredHinge => {
                let s = LinExpr::from(m.var());
                m.nonneg(s.clone());
                m.nonneg(s.clone() - w[0].clone());
                m.add_cone(
                    vec![v1.clone() + v2.clone(), v1 - v2, s.scaled(2.0)],
                    Cone::Soc { dim: 3 },
                );
            }
            LossFunction::Logexp => {
                // exp(−v1/v2) + exp((w − v1)/v2) ≤ 1, perspectivized
                let u1 = LinExpr::from(m.var());
                let u2 = LinExpr::from(m.var());
                m.add_cone(vec![-v1.clone(), v2.clone(), u1.clone()], Cone::Exp);
                m.add_cone(vec![w[0].clone() - v1, v2.clone(), u2.clone()], Cone::Exp);
                m.nonneg(v2 - u1 - u2);
            }
            LossFunction::LogSumExp { n } => {
                let mut total = v2.clone();
                for wi in w.iter().take(n) {
                    let u = LinExpr::from(m.var());
                    m.add_cone(vec![wi.clone() - v1.clone(), v2.clone(), u.clone()], Cone::Exp);
                    total.add_scaled(&u, -1.0);
                }
                m.nonneg(total);
            }
        }
    }
}

/// Featured domain `[lo, hi]`, applied to every input coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct FeaturedDomain {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for FeaturedDomain {
    fn from(v: [f64; 2]) -> Self {
        FeaturedDomain { lo: v[0], hi: v[1] }
    }
}

impl From<FeaturedDomain> for [f64; 2] {
    fn from(d: FeaturedDomain) -> Self {
        [d.lo, d.hi]
    }
}

impl FeaturedDomain {
    pub fn new(lo: f64, hi: f64) -> Self {
        FeaturedDomain { lo, hi }
    }

    pub fn real_line() -> Self {
        FeaturedDomain::new(-REAL_LINE_HALF_WIDTH, REAL_LINE_HALF_WIDTH)
    }

    pub fn contains(&self, w: f64) -> bool {
        self.lo <= w && w <= self.hi
    }
}

/// Perspective depth `sup_{u∈W} ∇ℓ(u)ᵀu − ℓ(u)`.
///
/// For univariate losses the supremum sits at an endpoint of `W`: the
/// derivative of `ℓ'(v)v − ℓ(v)` is `ℓ''(v)v`, nonpositive left of zero and
/// nonnegative right of it. For log-sum-exp the supremum over all of `ℝⁿ`
/// is zero, which bounds the value on any box.
pub fn perspective_depth(loss: &LossFunction, domain: &FeaturedDomain) -> Result<f64> {
    loss.validate()?;
    if !(domain.lo <= domain.hi) {
        return validation(format!(
            "featured domain [{}, {}] is empty",
            domain.lo, domain.hi
        ));
    }
    match loss {
        LossFunction::LogSumExp { .. } => Ok(0.0),
        _ => Ok(loss.depth_term(domain.lo).max(loss.depth_term(domain.hi))),
    }
}

/// A loss recast as a conic recourse problem with complete and bounded
/// recourse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CastModel {
    pub loss: LossFunction,
    pub domain: FeaturedDomain,
    #[serde(rename = "P")]
    pub p: f64,
    pub depth: f64,
}

/// Builds the cast of `loss` on `domain`. `p = None` selects
/// `depth + DEFAULT_MARGIN`.
pub fn cast(loss: &LossFunction, domain: FeaturedDomain, p: Option<f64>) -> Result<CastModel> {
    let depth = perspective_depth(loss, &domain)?;
    if !depth.is_finite() {
        return validation(format!(
            "{} has infinite perspective depth on [{}, {}]",
            loss.id(),
            domain.lo,
            domain.hi
        ));
    }
    let p = p.unwrap_or(depth + DEFAULT_MARGIN);
    if !(p >= depth) {
        return Err(Error::PenaltyBelowDepth { p, depth });
    }
    Ok(CastModel {
        loss: loss.clone(),
        domain,
        p,
        depth,
    })
}

impl CastModel {
    /// Recourse matrix `B` with rows `[0 0]ⁿ, [1 0], [0 1], [0 1]`.
    pub fn recourse_matrix(&self) -> DMatrix<f64> {
        let n = self.loss.arity();
        let mut b = DMatrix::zeros(n + 3, 2);
        b[(n, 0)] = 1.0;
        b[(n + 1, 1)] = 1.0;
        b[(n + 2, 1)] = 1.0;
        b
    }

    /// Recourse cost `d = (1, P)`.
    pub fn recourse_cost(&self) -> DVector<f64> {
        DVector::from_vec(vec![1.0, self.p])
    }

    /// `K_ℓ × ℝ₊`
    pub fn cone(&self) -> ConeDescriptor {
        ConeDescriptor::new(vec![
            Cone::LossPerspective {
                loss: self.loss.clone(),
            },
            Cone::Nonneg { dim: 1 },
        ])
    }

    /// Right-hand side `(−w, −P, 0, 1)` for a fixed loss argument.
    pub fn rhs(&self, w: &[f64]) -> DVector<f64> {
        let n = self.loss.arity();
        let mut v = DVector::zeros(n + 3);
        for (i, wi) in w.iter().enumerate() {
            v[i] = -wi;
        }
        v[n] = -self.p;
        v[n + 2] = 1.0;
        v
    }

    fn objective(&self, w: &[f64], y2: f64) -> f64 {
        self.p * y2 + self.loss.perspective_value(w, y2) - self.p
    }

    /// `ℓ̂(w) = min_{y2 ∈ [1, Y_MAX]} P·y2 + y2·ℓ(w/y2) − P` by golden-section
    /// search (the objective is convex in `y2`), compared against `y2 = 1`.
    pub fn eval(&self, w: &[f64]) -> f64 {
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let (mut lo, mut hi) = (1.0, Y_MAX);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = self.objective(w, x1);
        let mut f2 = self.objective(w, x2);
        while hi - lo > 1e-10 * hi.max(1.0) {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = self.objective(w, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = self.objective(w, x2);
            }
        }
        let mid = 0.5 * (lo + hi);
        self.objective(w, 1.0)
            .min(self.objective(w, mid))
            .min(f1)
            .min(f2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perspective_examples() {
        assert_eq!(LossFunction::Quadratic.perspective_value(&[2.0], 4.0), 1.0);
        let e = LossFunction::ExpDisutility { a: 1.0 };
        assert_eq!(e.perspective_value(&[-3.0], 0.0), 0.0);
        assert_eq!(e.perspective_value(&[3.0], 0.0), f64::INFINITY);
        assert_eq!(e.perspective_value(&[0.7], 1.0), e.value(&[0.7]));
    }

    #[test]
    fn huber_depth_on_real_line() {
        for delta in [0.5, 1.0, 3.0] {
            let d = perspective_depth(&LossFunction::Huber { delta }, &FeaturedDomain::real_line())
                .unwrap();
            assert_eq!(d, delta * delta / 2.0);
        }
    }

    #[test]
    fn log_sum_exp_depth_is_zero() {
        let d = perspective_depth(&LossFunction::LogSumExp { n: 3 }, &FeaturedDomain::real_line())
            .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn exp_depth_endpoint_formula() {
        let a = 2.0;
        let loss = LossFunction::ExpDisutility { a };
        let d = perspective_depth(&loss, &FeaturedDomain::new(-0.5, 0.5)).unwrap();
        let f = |v: f64| (a * v).exp() * (v - 1.0 / a) + 1.0 / a;
        assert!((d - f(-0.5).max(f(0.5))).abs() < 1e-15);
    }

    #[test]
    fn cast_examples() {
        let c = cast(
            &LossFunction::ExpDisutility { a: 2.0 },
            FeaturedDomain::new(-0.5, 0.5),
            None,
        )
        .unwrap();
        assert!(c.eval(&[0.0]).abs() < 1e-12);

        let c = cast(&LossFunction::Huber { delta: 1.0 }, FeaturedDomain::new(-10.0, 10.0), Some(0.5));
        assert!(c.is_ok());

        match cast(&LossFunction::Quadratic, FeaturedDomain::new(-1.0, 2.0), Some(3.9)) {
            Err(Error::PenaltyBelowDepth { depth, .. }) => assert_eq!(depth, 4.0),
            other => panic!("expected depth error, got {other:?}"),
        }
    }

    #[test]
    fn cast_underestimates_outside_domain() {
        let loss = LossFunction::ExpDisutility { a: 1.0 };
        let c = cast(&loss, FeaturedDomain::new(-1.0, 1.0), None).unwrap();
        let w = 5.0;
        let grid_min = (0..=9900)
            .map(|i| 1.0 + i as f64 * 0.01)
            .map(|y| c.p * y + loss.perspective_value(&[w], y) - c.p)
            .fold(f64::INFINITY, f64::min);
        let v = c.eval(&[w]);
        assert!(v < loss.value(&[w]) - 1.0);
        assert!(v <= grid_min + 1e-9);
    }

    #[test]
    fn exp_infinite_depth_on_real_line() {
        let r = cast(
            &LossFunction::ExpDisutility { a: 1.0 },
            FeaturedDomain::real_line(),
            None,
        );
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn loss_json_shape() {
        let l: LossFunction = serde_json::from_str(r#"{"id": "exp_disutility", "a": 2.0}"#).unwrap();
        assert_eq!(l, LossFunction::ExpDisutility { a: 2.0 });
        let l: LossFunction = serde_json::from_str(r#"{"id": "logexp"}"#).unwrap();
        assert_eq!(l, LossFunction::Logexp);
    }
}
