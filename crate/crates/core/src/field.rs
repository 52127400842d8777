//! Polynomial vector fields: the Rössler family and small test fields.
//!
//! A field carries two equivalent descriptions: a list of monomials per
//! component (used for the text dump and for formal checks) and a compiled
//! expression tape. The tape lets the Rössler field be evaluated in the
//! factored form `z·(x − a) + b`, which keeps interval Taylor coefficients
//! noticeably tighter than the expanded monomial form.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::interval::{Interval, IntervalBox, IntervalMatrix};

/// Arithmetic needed by the tape evaluator; implemented for [`Interval`]
/// (rigorous) and `f64` (non-validated).
pub trait Scalar: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    fn zero() -> Self;
    fn one() -> Self;
    fn from_interval(c: Interval) -> Self;
    /// Division by a positive integer (Taylor recurrences).
    fn div_usize(self, n: usize) -> Self;
}

impl Scalar for Interval {
    fn zero() -> Self {
        Interval::ZERO
    }
    fn one() -> Self {
        Interval::ONE
    }
    fn from_interval(c: Interval) -> Self {
        c
    }
    fn div_usize(self, n: usize) -> Self {
        if n == 1 {
            self
        } else {
            self.div_f64(n as f64)
        }
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_interval(c: Interval) -> Self {
        c.mid()
    }
    fn div_usize(self, n: usize) -> Self {
        self / n as f64
    }
}

/// One term `coefficient · Π x_i^{e_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: Interval,
    pub exponents: Vec<u32>,
}

/// Expression used to build a tape.
#[derive(Clone, Debug)]
pub enum Expr {
    Var(usize),
    Const(Interval),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }
    pub fn constant(c: Interval) -> Expr {
        Expr::Const(c)
    }
    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }
    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Box::new(a))
    }

    /// Expanded monomials; coefficients combined with interval arithmetic.
    fn expand(&self, dim: usize) -> Vec<Monomial> {
        match self {
            Expr::Var(i) => {
                let mut e = vec![0; dim];
                e[*i] = 1;
                vec![Monomial {
                    coefficient: Interval::ONE,
                    exponents: e,
                }]
            }
            Expr::Const(c) => vec![Monomial {
                coefficient: *c,
                exponents: vec![0; dim],
            }],
            Expr::Add(a, b) => combine(a.expand(dim).into_iter().chain(b.expand(dim))),
            Expr::Sub(a, b) => combine(
                a.expand(dim)
                    .into_iter()
                    .chain(b.expand(dim).into_iter().map(|m| Monomial {
                        coefficient: -m.coefficient,
                        exponents: m.exponents,
                    })),
            ),
            Expr::Neg(a) => a
                .expand(dim)
                .into_iter()
                .map(|m| Monomial {
                    coefficient: -m.coefficient,
                    exponents: m.exponents,
                })
                .collect(),
            Expr::Mul(a, b) => {
                let (ea, eb) = (a.expand(dim), b.expand(dim));
                combine(ea.iter().flat_map(|x| {
                    eb.iter().map(move |y| Monomial {
                        coefficient: x.coefficient * y.coefficient,
                        exponents: x.exponents.iter().zip(&y.exponents).map(|(p, q)| p + q).collect(),
                    })
                }))
            }
        }
    }
}

fn combine(terms: impl Iterator<Item = Monomial>) -> Vec<Monomial> {
    let mut out: Vec<Monomial> = Vec::new();
    for t in terms {
        match out.iter_mut().find(|m| m.exponents == t.exponents) {
            Some(m) => m.coefficient += t.coefficient,
            None => out.push(t),
        }
    }
    out.retain(|m| m.coefficient != Interval::ZERO);
    out
}

#[derive(Clone, Debug)]
enum Node {
    Var(usize),
    Const(Interval),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Neg(usize),
    /// Multiplication by a constant.
    Scale(Interval, usize),
}

/// Named parameter value attached to a field (e.g. `a`, `b` of Rössler).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Interval,
}

/// Polynomial vector field `x' = f(x)`.
#[derive(Clone, Debug)]
pub struct PolyField {
    name: String,
    dim: usize,
    parameters: Vec<Parameter>,
    monomials: Vec<Vec<Monomial>>,
    tape: Vec<Node>,
    outputs: Vec<usize>,
}

/// Taylor coefficients of a solution, optionally with the coefficients of
/// its first variation with respect to the initial condition.
#[derive(Clone, Debug)]
pub struct TaylorSeries<S> {
    dim: usize,
    /// `coeffs[n][i]`: n-th coefficient of component i.
    pub coeffs: Vec<Vec<S>>,
    /// `derivs[n][i * dim + j]`: n-th coefficient of ∂x_i/∂x_j(0).
    pub derivs: Option<Vec<Vec<S>>>,
}

impl<S: Scalar> TaylorSeries<S> {
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Horner evaluation of the truncated series at `t`.
    pub fn eval(&self, t: S) -> Vec<S> {
        (0..self.dim)
            .map(|i| self.coeffs.iter().rev().fold(S::zero(), |acc, c| acc * t + c[i]))
            .collect()
    }

    /// Horner evaluation of the variational series at `t` (row-major).
    pub fn eval_derivs(&self, t: S) -> Option<Vec<S>> {
        let d = self.derivs.as_ref()?;
        Some(
            (0..self.dim * self.dim)
                .map(|k| d.iter().rev().fold(S::zero(), |acc, c| acc * t + c[k]))
                .collect(),
        )
    }
}

impl PolyField {
    /// Builds a field from one expression per component.
    pub fn from_exprs(name: &str, parameters: Vec<Parameter>, exprs: Vec<Expr>) -> PolyField {
        let dim = exprs.len();
        assert!(dim > 0, "field needs at least one component");
        let mut tape = Vec::new();
        let outputs = exprs.iter().map(|e| compile(e, dim, &mut tape)).collect();
        let monomials = exprs.iter().map(|e| e.expand(dim)).collect();
        PolyField {
            name: name.to_string(),
            dim,
            parameters,
            monomials,
            tape,
            outputs,
        }
    }

    /// Builds a field from monomials; evaluation follows the expanded form.
    pub fn from_monomials(name: &str, dim: usize, monomials: Vec<Vec<Monomial>>) -> PolyField {
        assert_eq!(monomials.len(), dim, "one polynomial per component");
        let exprs = monomials
            .iter()
            .map(|poly| {
                poly.iter()
                    .map(|m| {
                        assert_eq!(m.exponents.len(), dim, "exponent tuple length");
                        let mut e = Expr::constant(m.coefficient);
                        for (v, &p) in m.exponents.iter().enumerate() {
                            for _ in 0..p {
                                e = Expr::mul(e, Expr::var(v));
                            }
                        }
                        e
                    })
                    .reduce(Expr::add)
                    .unwrap_or(Expr::constant(Interval::ZERO))
            })
            .collect();
        let mut f = PolyField::from_exprs(name, Vec::new(), exprs);
        f.monomials = monomials;
        f
    }

    /// Rössler field `x' = −y − z, y' = x + b y, z' = b + z (x − a)`.
    pub fn rossler(a: Interval, b: Interval) -> PolyField {
        let (x, y, z) = (Expr::var(0), Expr::var(1), Expr::var(2));
        let exprs = vec![
            Expr::neg(Expr::add(y.clone(), z.clone())),
            Expr::add(x.clone(), Expr::mul(Expr::constant(b), y)),
            Expr::add(Expr::mul(z, Expr::sub(x, Expr::constant(a))), Expr::constant(b)),
        ];
        PolyField::from_exprs(
            "rossler",
            vec![
                Parameter {
                    name: "a".into(),
                    value: a,
                },
                Parameter {
                    name: "b".into(),
                    value: b,
                },
            ],
            exprs,
        )
    }

    /// Rössler field with parameters given as decimal literals.
    pub fn rossler_decimal(a: &str, b: &str) -> PolyField {
        PolyField::rossler(
            Interval::from_decimal(a).expect("valid decimal parameter"),
            Interval::from_decimal(b).expect("valid decimal parameter"),
        )
    }

    /// Scalar growth `x' = x`.
    pub fn exponential() -> PolyField {
        PolyField::from_exprs("exponential", Vec::new(), vec![Expr::var(0)])
    }

    /// Harmonic rotation `x' = −y, y' = x`.
    pub fn rotation() -> PolyField {
        PolyField::from_exprs("rotation", Vec::new(), vec![Expr::neg(Expr::var(1)), Expr::var(0)])
    }

    /// Constant field `x' = c`.
    pub fn constant(c: &[f64]) -> PolyField {
        PolyField::from_exprs(
            "constant",
            Vec::new(),
            c.iter().map(|&v| Expr::constant(Interval::point(v))).collect(),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn monomials(&self) -> &[Vec<Monomial>] {
        &self.monomials
    }

    fn run<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.dim, "state dimension must match field dimension");
        let mut v: Vec<S> = Vec::with_capacity(self.tape.len());
        for node in &self.tape {
            let r = match *node {
                Node::Var(i) => x[i],
                Node::Const(c) => S::from_interval(c),
                Node::Add(a, b) => v[a] + v[b],
                Node::Sub(a, b) => v[a] - v[b],
                Node::Mul(a, b) => v[a] * v[b],
                Node::Neg(a) => -v[a],
                Node::Scale(c, a) => S::from_interval(c) * v[a],
            };
            v.push(r);
        }
        self.outputs.iter().map(|&o| v[o]).collect()
    }

    /// Forward-mode Jacobian, row-major.
    fn run_jacobian<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        assert_eq!(x.len(), self.dim, "state dimension must match field dimension");
        let n = self.dim;
        let mut v: Vec<S> = Vec::with_capacity(self.tape.len());
        let mut d: Vec<Vec<S>> = Vec::with_capacity(self.tape.len());
        for node in &self.tape {
            let (r, dr) = match *node {
                Node::Var(i) => {
                    let mut e = vec![S::zero(); n];
                    e[i] = S::one();
                    (x[i], e)
                }
                Node::Const(c) => (S::from_interval(c), vec![S::zero(); n]),
                Node::Add(a, b) => (v[a] + v[b], (0..n).map(|j| d[a][j] + d[b][j]).collect()),
                Node::Sub(a, b) => (v[a] - v[b], (0..n).map(|j| d[a][j] - d[b][j]).collect()),
                Node::Mul(a, b) => (v[a] * v[b], (0..n).map(|j| d[a][j] * v[b] + v[a] * d[b][j]).collect()),
                Node::Neg(a) => (-v[a], (0..n).map(|j| -d[a][j]).collect()),
                Node::Scale(c, a) => {
                    let c = S::from_interval(c);
                    (c * v[a], (0..n).map(|j| c * d[a][j]).collect())
                }
            };
            v.push(r);
            d.push(dr);
        }
        self.outputs.iter().flat_map(|&o| d[o].clone()).collect()
    }

    /// Interval enclosure of `f` over a box.
    pub fn eval(&self, state: &IntervalBox) -> IntervalBox {
        IntervalBox::new(self.run(state.as_slice()))
    }

    pub fn eval_f64(&self, x: &[f64]) -> Vec<f64> {
        self.run(x)
    }

    /// Enclosure of the Jacobian over a box.
    pub fn jacobian(&self, state: &IntervalBox) -> IntervalMatrix {
        IntervalMatrix::new(self.dim, self.dim, self.run_jacobian(state.as_slice()))
    }

    pub fn jacobian_f64(&self, x: &[f64]) -> Vec<f64> {
        self.run_jacobian(x)
    }

    /// Taylor coefficients `c_0..c_order` of the solution through `x0`; with
    /// `variational`, also the coefficients of the first variation
    /// (identity at order 0).
    pub fn taylor<S: Scalar>(&self, x0: &[S], order: usize, variational: bool) -> TaylorSeries<S> {
        assert_eq!(x0.len(), self.dim, "state dimension must match field dimension");
        let n = self.dim;
        let kk = order + 1;
        let len = self.tape.len();
        // flat storage: val[node * kk + k], der[(node * kk + k) * n + j]
        let mut val: Vec<S> = vec![S::zero(); len * kk];
        let mut der: Vec<S> = if variational {
            vec![S::zero(); len * kk * n]
        } else {
            Vec::new()
        };
        // solution coefficients xs[k * n + i] and variation dxs[(k * n + i) * n + j]
        let mut xs: Vec<S> = vec![S::zero(); kk * n];
        xs[..n].copy_from_slice(x0);
        let mut dxs: Vec<S> = if variational {
            vec![S::zero(); kk * n * n]
        } else {
            Vec::new()
        };
        if variational {
            for i in 0..n {
                dxs[i * n + i] = S::one();
            }
        }
        for k in 0..order {
            for (idx, node) in self.tape.iter().enumerate() {
                let r = match *node {
                    Node::Var(i) => xs[k * n + i],
                    Node::Const(c) => {
                        if k == 0 {
                            S::from_interval(c)
                        } else {
                            S::zero()
                        }
                    }
                    Node::Add(a, b) => val[a * kk + k] + val[b * kk + k],
                    Node::Sub(a, b) => val[a * kk + k] - val[b * kk + k],
                    Node::Neg(a) => -val[a * kk + k],
                    Node::Scale(c, a) => S::from_interval(c) * val[a * kk + k],
                    Node::Mul(a, b) => {
                        let (sa, sb) = (&val[a * kk..a * kk + k + 1], &val[b * kk..b * kk + k + 1]);
                        let mut s = sa[0] * sb[k];
                        for i in 1..=k {
                            s = s + sa[i] * sb[k - i];
                        }
                        s
                    }
                };
                val[idx * kk + k] = r;
                if variational {
                    let at = |node: usize, k: usize, j: usize| (node * kk + k) * n + j;
                    for j in 0..n {
                        let r = match *node {
                            Node::Var(i) => dxs[(k * n + i) * n + j],
                            Node::Const(_) => S::zero(),
                            Node::Add(a, b) => der[at(a, k, j)] + der[at(b, k, j)],
                            Node::Sub(a, b) => der[at(a, k, j)] - der[at(b, k, j)],
                            Node::Neg(a) => -der[at(a, k, j)],
                            Node::Scale(c, a) => S::from_interval(c) * der[at(a, k, j)],
                            Node::Mul(a, b) => {
                                let mut s = der[at(a, 0, j)] * val[b * kk + k] + val[a * kk] * der[at(b, k, j)];
                                for i in 1..=k {
                                    s = s
                                        + der[at(a, i, j)] * val[b * kk + k - i]
                                        + val[a * kk + i] * der[at(b, k - i, j)];
                                }
                                s
                            }
                        };
                        der[at(idx, k, j)] = r;
                    }
                }
            }
            for (i, &o) in self.outputs.iter().enumerate() {
                xs[(k + 1) * n + i] = val[o * kk + k].div_usize(k + 1);
                if variational {
                    for j in 0..n {
                        dxs[((k + 1) * n + i) * n + j] = der[(o * kk + k) * n + j].div_usize(k + 1);
                    }
                }
            }
        }
        TaylorSeries {
            dim: n,
            coeffs: xs.chunks(n).map(<[S]>::to_vec).collect(),
            derivs: variational.then(|| dxs.chunks(n * n).map(<[S]>::to_vec).collect()),
        }
    }

    /// Interval Taylor coefficients over a box (see [`PolyField::taylor`]).
    pub fn taylor_coefficients(
        &self,
        initial: &IntervalBox,
        order: usize,
        variational: bool,
    ) -> TaylorSeries<Interval> {
        assert!(order >= 1, "Taylor order must be at least 1");
        self.taylor(initial.as_slice(), order, variational)
    }

    /// Human-readable listing of the monomials with interval coefficients.
    pub fn dump(&self) -> String {
        self.to_string()
    }
}

fn compile(e: &Expr, dim: usize, tape: &mut Vec<Node>) -> usize {
    let node = match e {
        Expr::Var(i) => {
            assert!(*i < dim, "variable index out of range");
            // variables are shared between components
            if let Some(pos) = tape.iter().position(|n| matches!(n, Node::Var(j) if j == i)) {
                return pos;
            }
            Node::Var(*i)
        }
        Expr::Mul(a, b) if matches!(**a, Expr::Const(_)) || matches!(**b, Expr::Const(_)) => {
            let (c, other) = match (&**a, &**b) {
                (Expr::Const(c), other) => (*c, other),
                (other, Expr::Const(c)) => (*c, other),
                _ => unreachable!("guarded by the match arm"),
            };
            Node::Scale(c, compile(other, dim, tape))
        }
        Expr::Const(c) => Node::Const(*c),
        Expr::Add(a, b) => {
            let (a, b) = (compile(a, dim, tape), compile(b, dim, tape));
            Node::Add(a, b)
        }
        Expr::Sub(a, b) => {
            let (a, b) = (compile(a, dim, tape), compile(b, dim, tape));
            Node::Sub(a, b)
        }
        Expr::Mul(a, b) => {
            let (a, b) = (compile(a, dim, tape), compile(b, dim, tape));
            Node::Mul(a, b)
        }
        Expr::Neg(a) => Node::Neg(compile(a, dim, tape)),
    };
    tape.push(node);
    tape.len() - 1
}

const VAR_NAMES: [&str; 3] = ["x", "y", "z"];

fn var_name(i: usize, dim: usize) -> String {
    if dim <= 3 {
        VAR_NAMES[i].to_string()
    } else {
        format!("x{i}")
    }
}

impl fmt::Display for PolyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)?;
        for p in &self.parameters {
            write!(f, " {}={}", p.name, p.value)?;
        }
        writeln!(f)?;
        for (i, poly) in self.monomials.iter().enumerate() {
            write!(f, "{}' =", var_name(i, self.dim))?;
            if poly.is_empty() {
                write!(f, " 0")?;
            }
            for (t, m) in poly.iter().enumerate() {
                if t > 0 {
                    write!(f, " +")?;
                }
                write!(f, " {}", m.coefficient)?;
                for (v, &p) in m.exponents.iter().enumerate() {
                    match p {
                        0 => {}
                        1 => write!(f, "*{}", var_name(v, self.dim))?,
                        _ => write!(f, "*{}^{}", var_name(v, self.dim), p)?,
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(x: &[f64]) -> IntervalBox {
        IntervalBox::from_points(x)
    }

    #[test]
    fn rossler_eval_examples() {
        let f = PolyField::rossler_decimal("5.25", "0.2");
        let v = f.eval(&pt(&[0.0, 0.0, 0.0]));
        assert!(v[0].contains(0.0) && v[1].contains(0.0) && v[2].contains(0.2));
        let g = PolyField::rossler_decimal("4.7", "0.2");
        let w = g.eval(&pt(&[1.0, 1.0, 1.0]));
        assert!(w[0].contains(-2.0) && w[1].contains(1.2) && w[2].contains(-3.5));
        assert!(w.width() < 1e-14);
        let b = IntervalBox::new(vec![Interval::new(0.0, 1.0).unwrap(), Interval::ZERO, Interval::ZERO]);
        let u = f.eval(&b);
        assert!(u[0].contains(0.0) && u[0].width() < 1e-300);
        assert!(Interval::new(0.0, 1.0).unwrap().subset(&u[1]) && u[1].width() < 1e-14 + 1.0);
        assert!(u[2].contains(0.2) && u[2].width() < 1e-15);
    }

    #[test]
    fn rossler_jacobian_examples() {
        let f = PolyField::rossler_decimal("5.25", "0.2");
        let j = f.jacobian(&pt(&[0.0, 0.0, 0.0]));
        assert!(j.contains_f64(&[0.0, -1.0, -1.0, 1.0, 0.2, 0.0, 0.0, 0.0, -5.25]));
        let g = PolyField::rossler_decimal("4.7", "0.2");
        let j = g.jacobian(&pt(&[1.0, 0.0, 2.0]));
        assert!(j.contains_f64(&[0.0, -1.0, -1.0, 1.0, 0.2, 0.0, 2.0, 0.0, -3.7]));
        let c = PolyField::constant(&[1.0, 2.0]);
        let j = c.jacobian(&pt(&[3.0, 4.0]));
        assert!(j.entries().iter().all(|e| *e == Interval::ZERO));
    }

    #[test]
    fn monomial_expansion_of_rossler() {
        let f = PolyField::rossler_decimal("5.25", "0.2");
        let z_poly = &f.monomials()[2];
        // b + x z − a z
        assert_eq!(z_poly.len(), 3);
        assert!(z_poly
            .iter()
            .any(|m| m.exponents == vec![1, 0, 1] && m.coefficient.contains(1.0)));
        assert!(z_poly
            .iter()
            .any(|m| m.exponents == vec![0, 0, 1] && m.coefficient.contains(-5.25)));
        let dump = f.dump();
        assert!(dump.contains("z' ="));
    }

    #[test]
    fn from_monomials_evaluates_like_exprs() {
        let f = PolyField::rossler_decimal("4.7", "0.2");
        let g = PolyField::from_monomials("expanded", 3, f.monomials().to_vec());
        let x = [0.3, -5.0, 0.04];
        let (a, b) = (f.eval_f64(&x), g.eval_f64(&x));
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn exponential_series() {
        let f = PolyField::exponential();
        let s = f.taylor_coefficients(&pt(&[1.0]), 4, false);
        let expect = [1.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 24.0];
        for (c, e) in s.coeffs.iter().zip(expect) {
            assert!(c[0].contains(e), "{:?} vs {e}", c[0]);
        }
    }

    #[test]
    fn rotation_series() {
        let f = PolyField::rotation();
        let s = f.taylor_coefficients(&pt(&[1.0, 0.0]), 2, false);
        let expect = [[1.0, 0.0], [0.0, 1.0], [-0.5, 0.0]];
        for (c, e) in s.coeffs.iter().zip(expect) {
            assert!(c[0].contains(e[0]) && c[1].contains(e[1]));
        }
    }

    #[test]
    fn first_coefficient_is_field_value() {
        let f = PolyField::rossler_decimal("5.25", "0.2");
        let x = pt(&[0.0, -5.0, 0.03]);
        let s = f.taylor_coefficients(&x, 3, true);
        let v = f.eval(&x);
        for i in 0..3 {
            assert_eq!(s.coeffs[1][i], v[i]);
        }
        // first variational coefficient is the Jacobian
        let j = f.jacobian(&x);
        let d1 = &s.derivs.as_ref().unwrap()[1];
        for k in 0..9 {
            assert!(d1[k].subset(&j.entries()[k]) && j.entries()[k].subset(&d1[k]));
        }
    }
}
