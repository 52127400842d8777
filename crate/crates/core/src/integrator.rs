//! Validated Taylor integration with Lohner-style wrapping control.
//!
//! A set is stored as `x̄ + C·r₀ + B·r` (see [`LohnerSet`]): `x̄` a point,
//! `C` a point matrix acting on the fixed initial box `r₀`, `B` a point
//! matrix with a rigorously inverted enclosure and `r` an interval vector
//! collecting all errors. One step of size `h` uses
//!
//! * an a-priori enclosure `Z` of every trajectory on `[0, h]`, verified by
//!   the first-order Picard condition `X + [0,h]·f(Z) ⊆ Z`;
//! * the Taylor polynomial of order `k` at `x̄` plus the Lagrange remainder
//!   `h^{k+1}·c_{k+1}(Z)`;
//! * the mean-value correction `A·(C r₀ + B r)` with `A` enclosing the
//!   derivative of the Taylor polynomial over the hull of the set.
//!
//! The first variation `DΦ` is carried the same way, with the remainder
//! `h^{k+1}·Dc_{k+1}(Z)·W` where `W` encloses `DΦ_t` for `t ∈ [0,h]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{PolyField, TaylorSeries};
use crate::interval::{approx_inverse, enclose_inverse, Interval, IntervalBox, IntervalError, IntervalMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegratorError {
    #[error("no a-priori enclosure found at t≈{time:.6} with step {step:e}")]
    NoEnclosure { time: f64, step: f64 },
    #[error("enclosure became unbounded at t≈{0:.6}")]
    Unbounded(f64),
    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// How the set is re-represented after every step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    /// Plain interval vector (maximal wrapping; reference only).
    IntervalHull,
    /// `x̄ + B·r` with `B` following the linearised flow.
    Parallelepiped,
    /// `x̄ + C·r₀ + B·r`, the initial box kept separately.
    Doubleton,
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Representation::IntervalHull => "interval-hull",
            Representation::Parallelepiped => "parallelepiped",
            Representation::Doubleton => "doubleton",
        })
    }
}

impl FromStr for Representation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interval-hull" | "hull" => Ok(Representation::IntervalHull),
            "parallelepiped" => Ok(Representation::Parallelepiped),
            "doubleton" => Ok(Representation::Doubleton),
            other => Err(format!(
                "unknown representation `{other}` (expected interval-hull, parallelepiped or doubleton)"
            )),
        }
    }
}

/// Solver settings; serialized into every certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorSettings {
    pub taylor_order: usize,
    /// Local error target used to choose the step size.
    pub tolerance: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Relative inflation applied while searching for the a-priori enclosure.
    pub inflation: f64,
    pub max_picard_iterations: usize,
    pub representation: Representation,
    /// Condition number above which the `B` matrix is re-orthogonalised.
    pub orthogonalize_above: f64,
    /// Steps whose enclosure exceeds this multiple of the linearised image
    /// width are retried with half the step.
    pub max_width_growth: f64,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        IntegratorSettings {
            taylor_order: 20,
            tolerance: 1e-16,
            initial_step: 0.05,
            min_step: 1e-6,
            max_step: 0.25,
            inflation: 0.1,
            max_picard_iterations: 20,
            representation: Representation::Doubleton,
            orthogonalize_above: 1e4,
            max_width_growth: 1.5,
        }
    }
}

impl IntegratorSettings {
    pub fn validate(&self) -> Result<(), IntegratorError> {
        let bad = |m: &str| Err(IntegratorError::InvalidSettings(m.to_string()));
        if self.taylor_order < 2 {
            return bad("taylor order must be at least 2");
        }
        if !(self.min_step > 0.0 && self.min_step <= self.max_step) {
            return bad("need 0 < min step <= max step");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance must be positive");
        }
        if !(self.inflation > 0.0) || self.max_picard_iterations == 0 {
            return bad("a-priori search needs positive inflation and iteration budget");
        }
        if !(self.max_width_growth > 1.0) {
            return bad("width growth cap must exceed 1");
        }
        Ok(())
    }
}

/// Rigorous upper bound of `exp(u)` for `u ≥ 0`, by scaling and squaring
/// with `e^v ≤ 1 + v + v²/2 + v³/6 + v⁴/24 + v⁵/100` for `0 ≤ v ≤ 1/256`
/// (the tail `Σ_{n≥5} vⁿ/n!` is below `v⁵/120 · 1/(1 − v/6)`).
pub fn exp_upper(u: f64) -> f64 {
    assert!(
        u >= 0.0 && u.is_finite(),
        "exp_upper needs a finite non-negative argument"
    );
    let mut s = 0;
    let mut v = u;
    while v > 0.00390625 {
        v *= 0.5;
        s += 1;
    }
    let vi = Interval::point(v);
    let v2 = vi.sqr();
    let mut e = (Interval::ONE
        + vi
        + v2.div_f64(2.0)
        + (v2 * vi).div_f64(6.0)
        + v2.sqr().div_f64(24.0)
        + (v2.sqr() * vi).div_f64(100.0))
    .hi();
    for _ in 0..s {
        e = Interval::point(e).sqr().hi();
    }
    e
}

fn point_matrix(rows: usize, cols: usize, m: &[f64]) -> IntervalMatrix {
    IntervalMatrix::from_f64(rows, cols, m)
}

fn column_norms(m: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (0..n).map(|i| m[i * n + j] * m[i * n + j]).sum::<f64>().sqrt())
        .collect()
}

/// Orthonormal basis from Gram–Schmidt with column pivoting (largest
/// remaining column first). Falls back to the identity on degeneracy.
fn orthonormal_basis(m: &[f64], n: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| m[i * n + j]).collect()).collect();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut remaining: Vec<usize> = (0..n).collect();
    while !remaining.is_empty() {
        let (pos, &best) = remaining
            .iter()
            .enumerate()
            .max_by(|a, b| norm(&cols[*a.1]).total_cmp(&norm(&cols[*b.1])))
            .expect("non-empty");
        remaining.remove(pos);
        let mut v = cols[best].clone();
        // two passes of Gram-Schmidt for numerical orthogonality
        for _ in 0..2 {
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
        }
        let nv = norm(&v);
        if !(nv > 1e-300) || !nv.is_finite() {
            return identity(n);
        }
        v.iter_mut().for_each(|a| *a /= nv);
        q.push(v.clone());
        for &j in &remaining {
            let d: f64 = cols[j].iter().zip(&v).map(|(a, b)| a * b).sum();
            let col = &mut cols[j];
            col.iter_mut().zip(&v).for_each(|(a, b)| *a -= d * b);
        }
    }
    let mut out = vec![0.0; n * n];
    for (j, col) in q.iter().enumerate() {
        for i in 0..n {
            out[i * n + j] = col[i];
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn condition_estimate(m: &[f64], n: usize) -> f64 {
    match approx_inverse(m, n) {
        Some(inv) => row_norm(m, n) * row_norm(&inv, n),
        None => f64::INFINITY,
    }
}

fn row_norm(m: &[f64], n: usize) -> f64 {
    m.chunks(n)
        .map(|r| r.iter().map(|a| a.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Chooses the next `B` from `mid(A·B)` according to the representation.
fn choose_basis(amid: &[f64], n: usize, s: &IntegratorSettings) -> Vec<f64> {
    match s.representation {
        Representation::IntervalHull => identity(n),
        Representation::Parallelepiped | Representation::Doubleton => {
            let cond = condition_estimate(amid, n);
            if cond > s.orthogonalize_above || !cond.is_finite() {
                orthonormal_basis(amid, n)
            } else {
                let norms = column_norms(amid, n);
                if norms.iter().any(|&v| !(v > 0.0)) {
                    identity(n)
                } else {
                    amid.to_vec()
                }
            }
        }
    }
}

/// The set `x̄ + C·r₀ + B·r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LohnerSet {
    pub center: Vec<f64>,
    /// `dim × m` point matrix, row-major (`m` may be 0).
    pub c: Vec<f64>,
    pub r0: Vec<Interval>,
    /// `dim × dim` point matrix, row-major.
    pub b: Vec<f64>,
    pub r: Vec<Interval>,
}

impl LohnerSet {
    /// Box `X` as `mid(X) + I·(X − mid(X))`.
    pub fn from_box(x: &IntervalBox) -> LohnerSet {
        let n = x.dim();
        let center = x.mid();
        let r = x.iter().zip(&center).map(|(c, &m)| *c - Interval::point(m)).collect();
        LohnerSet {
            center,
            c: Vec::new(),
            r0: Vec::new(),
            b: identity(n),
            r,
        }
    }

    /// `center + C·r₀ + err`, with `C` a point matrix and `err` an error box
    /// (absorbed into `r` with `B = I`).
    pub fn affine(center: Vec<f64>, c: Vec<f64>, r0: Vec<Interval>, err: Vec<Interval>) -> LohnerSet {
        let n = center.len();
        assert_eq!(c.len(), n * r0.len(), "C must be dim x m");
        assert_eq!(err.len(), n);
        LohnerSet {
            center,
            c,
            r0,
            b: identity(n),
            r: err,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    fn m(&self) -> usize {
        self.r0.len()
    }

    pub fn c_matrix(&self) -> Option<IntervalMatrix> {
        (self.m() > 0).then(|| point_matrix(self.dim(), self.m(), &self.c))
    }

    pub fn b_matrix(&self) -> IntervalMatrix {
        point_matrix(self.dim(), self.dim(), &self.b)
    }

    /// `C·r₀ + B·r` as an interval vector.
    pub fn offset(&self) -> IntervalBox {
        let mut v = self.b_matrix().mul_vec(&IntervalBox::new(self.r.clone()));
        if let Some(c) = self.c_matrix() {
            v = v.add(&c.mul_vec(&IntervalBox::new(self.r0.clone())));
        }
        v
    }

    /// Interval hull of the set.
    pub fn hull(&self) -> IntervalBox {
        IntervalBox::from_points(&self.center).add(&self.offset())
    }

    /// Folds the `C·r₀` part into `r` (used by the non-doubleton policies).
    pub fn folded(&self) -> LohnerSet {
        if self.m() == 0 {
            return self.clone();
        }
        let n = self.dim();
        LohnerSet {
            center: self.center.clone(),
            c: Vec::new(),
            r0: Vec::new(),
            b: identity(n),
            r: self.offset().into_vec(),
        }
    }
}

/// First variation `V̄ + B_V·E` (`dim × m`).
#[derive(Clone, Debug, PartialEq)]
pub struct VariationSet {
    pub vbar: Vec<f64>,
    pub bv: Vec<f64>,
    pub e: IntervalMatrix,
}

impl VariationSet {
    /// Starts from an interval matrix `V₀` (`dim × m`).
    pub fn from_matrix(v0: &IntervalMatrix) -> VariationSet {
        let n = v0.rows();
        let vbar = v0.mid();
        VariationSet {
            e: v0.sub(&point_matrix(n, v0.cols(), &vbar)),
            vbar,
            bv: identity(n),
        }
    }

    pub fn identity(n: usize) -> VariationSet {
        VariationSet::from_matrix(&IntervalMatrix::identity(n))
    }

    pub fn hull(&self) -> IntervalMatrix {
        let n = self.e.rows();
        point_matrix(n, self.e.cols(), &self.vbar).add(&point_matrix(n, n, &self.bv).mul(&self.e))
    }
}

/// All data of one validated step; evaluates the flow at any (interval)
/// time inside `[0, h]`.
pub struct StepData<'a> {
    pub h: f64,
    pub start: LohnerSet,
    pub z: IntervalBox,
    settings: &'a IntegratorSettings,
    center_series: TaylorSeries<Interval>,
    hull_series: TaylorSeries<Interval>,
    remainder: Vec<Interval>,
    /// `Dc_{k+1}(Z)·W` when the variation is tracked.
    remainder_variation: Option<IntervalMatrix>,
}

fn horner_vec(coeffs: &[Vec<Interval>], t: Interval, width: usize) -> Vec<Interval> {
    (0..width)
        .map(|i| coeffs.iter().rev().fold(Interval::ZERO, |acc, c| acc * t + c[i]))
        .collect()
}

impl<'a> StepData<'a> {
    fn order(&self) -> usize {
        self.center_series.order()
    }

    fn dim(&self) -> usize {
        self.start.dim()
    }

    fn check_tau(&self, tau: Interval) {
        debug_assert!(
            tau.lo() >= 0.0 && tau.hi() <= self.h,
            "time {tau:?} outside the validated step [0, {}]",
            self.h
        );
    }

    fn remainder_at(&self, tau: Interval) -> Vec<Interval> {
        let tk = tau.powi(self.order() as u32 + 1);
        self.remainder.iter().map(|c| *c * tk).collect()
    }

    /// Enclosure of `Φ_τ(x̄)` for the centre alone.
    pub fn center_at(&self, tau: Interval) -> IntervalBox {
        self.check_tau(tau);
        let t = horner_vec(&self.center_series.coeffs, tau, self.dim());
        let r = self.remainder_at(tau);
        IntervalBox::new(t.iter().zip(&r).map(|(a, b)| *a + *b).collect())
    }

    /// Derivative of the Taylor polynomial over the hull, at time `τ`.
    pub fn taylor_derivative(&self, tau: Interval) -> IntervalMatrix {
        let n = self.dim();
        let d = self
            .hull_series
            .derivs
            .as_ref()
            .expect("hull series carries derivatives");
        IntervalMatrix::new(n, n, horner_vec(d, tau, n * n))
    }

    /// Enclosure of `DΦ_τ(x)` for every `x` in the start set (needs the variation).
    pub fn variation_at(&self, tau: Interval) -> IntervalMatrix {
        let a = self.taylor_derivative(tau);
        let rv = self
            .remainder_variation
            .as_ref()
            .expect("step computed without variation");
        a.add(&rv.scale(tau.powi(self.order() as u32 + 1)))
    }

    /// Interval hull of `Φ_τ(X)`.
    pub fn enclosure_at(&self, tau: Interval) -> IntervalBox {
        let y = self.center_at(tau);
        let a = self.taylor_derivative(tau);
        let mut v = a
            .mul(&self.start.b_matrix())
            .mul_vec(&IntervalBox::new(self.start.r.clone()));
        if let Some(c) = self.start.c_matrix() {
            v = v.add(&a.mul(&c).mul_vec(&IntervalBox::new(self.start.r0.clone())));
        }
        y.add(&v)
    }

    /// Enclosure of `Φ_t(X)` for all `t ∈ τ`, intersected with `Z`.
    pub fn tube(&self, tau: Interval) -> IntervalBox {
        let e = self.enclosure_at(tau);
        e.intersect(&self.z).expect("matching dimensions").unwrap_or(e)
    }

    /// Lohner re-representation of `Φ_τ(X)`.
    pub fn advance(&self, tau: Interval) -> LohnerSet {
        let n = self.dim();
        let s = self.settings;
        let y = self.center_at(tau);
        let a = self.taylor_derivative(tau);
        let new_center = y.mid();
        let mut err = y.sub(&IntervalBox::from_points(&new_center));
        let (c_new, r0) = match self.start.c_matrix() {
            Some(c) if s.representation == Representation::Doubleton => {
                let ac = a.mul(&c);
                let c_new = ac.mid();
                let extra = ac
                    .sub(&point_matrix(n, self.start.r0.len(), &c_new))
                    .mul_vec(&IntervalBox::new(self.start.r0.clone()));
                err = err.add(&extra);
                (c_new, self.start.r0.clone())
            }
            Some(c) => {
                err = err.add(&a.mul(&c).mul_vec(&IntervalBox::new(self.start.r0.clone())));
                (Vec::new(), Vec::new())
            }
            None => (Vec::new(), Vec::new()),
        };
        let ab = a.mul(&self.start.b_matrix());
        let b_new = choose_basis(&ab.mid(), n, s);
        let r_new = match enclose_inverse(&b_new, n) {
            Ok(binv) => binv
                .mul(&ab)
                .mul_vec(&IntervalBox::new(self.start.r.clone()))
                .add(&binv.mul_vec(&err)),
            Err(_) => {
                // degenerate basis: fall back to the identity
                return LohnerSet {
                    center: new_center,
                    c: c_new,
                    r0,
                    b: identity(n),
                    r: ab.mul_vec(&IntervalBox::new(self.start.r.clone())).add(&err).into_vec(),
                };
            }
        };
        LohnerSet {
            center: new_center,
            c: c_new,
            r0,
            b: b_new,
            r: r_new.into_vec(),
        }
    }

    /// Propagates a variation `V` through `Φ_τ`: `V ↦ DΦ_τ·V`.
    pub fn advance_variation(&self, tau: Interval, v: &VariationSet) -> VariationSet {
        let n = self.dim();
        let m = v.e.cols();
        let ahat = self.variation_at(tau);
        let av = ahat.mul(&point_matrix(n, m, &v.vbar));
        let vbar = av.mid();
        let resid = av.sub(&point_matrix(n, m, &vbar));
        let ab = ahat.mul(&point_matrix(n, n, &v.bv));
        let bv = choose_basis(&ab.mid(), n, self.settings);
        match enclose_inverse(&bv, n) {
            Ok(binv) => VariationSet {
                e: binv.mul(&ab).mul(&v.e).add(&binv.mul(&resid)),
                vbar,
                bv,
            },
            Err(_) => VariationSet {
                e: ab.mul(&v.e).add(&resid),
                vbar,
                bv: identity(n),
            },
        }
    }
}

/// Result of a flow over a time interval.
#[derive(Clone, Debug)]
pub struct FlowEnclosure {
    /// Enclosure of the elapsed time.
    pub time: Interval,
    pub set: LohnerSet,
    /// Interval hull of the endpoint set.
    pub endpoint: IntervalBox,
    /// Enclosure of `Φ_t(X₀)` for every `t` in `[0, time]`.
    pub tube: IntervalBox,
    pub variation: Option<IntervalMatrix>,
    pub steps: usize,
}

/// Validated integrator for one polynomial field.
#[derive(Clone, Debug)]
pub struct Integrator<'f> {
    field: &'f PolyField,
    settings: IntegratorSettings,
}

impl<'f> Integrator<'f> {
    pub fn new(field: &'f PolyField, settings: IntegratorSettings) -> Result<Self, IntegratorError> {
        settings.validate()?;
        Ok(Integrator { field, settings })
    }

    pub fn field(&self) -> &PolyField {
        self.field
    }

    pub fn settings(&self) -> &IntegratorSettings {
        &self.settings
    }

    /// `Z` with `X₀ + [0,h]·f(Z) ⊆ Z`, or `NoEnclosure`.
    pub fn a_priori_enclosure(&self, x0: &IntervalBox, h: f64) -> Result<IntervalBox, IntegratorError> {
        assert!(h > 0.0, "step must be positive");
        let hi = Interval::new(0.0, h).map_err(IntegratorError::from)?;
        let fail = || IntegratorError::NoEnclosure { time: 0.0, step: h };
        let floor = 1e-14 * (1.0 + x0.iter().map(Interval::mag).fold(0.0, f64::max));
        let mut z = x0
            .add(&self.field.eval(x0).scale(hi))
            .inflate(self.settings.inflation, floor);
        for _ in 0..self.settings.max_picard_iterations {
            if !z.is_bounded() {
                return Err(fail());
            }
            let zn = x0.add(&self.field.eval(&z).scale(hi));
            if zn.subset(&z) {
                // any enclosure of the solution tube can be re-inserted
                let mut best = zn;
                for _ in 0..2 {
                    let next = x0.add(&self.field.eval(&best).scale(hi));
                    match next.intersect(&best)? {
                        Some(t) => best = t,
                        None => break,
                    }
                }
                return Ok(best);
            }
            z = z.hull(&zn)?.inflate(self.settings.inflation, floor);
        }
        Err(fail())
    }

    /// Step size from the decay of the Taylor coefficients at `x`.
    pub fn propose_step(&self, x: &[f64]) -> f64 {
        let k = self.settings.taylor_order;
        let series = self.field.taylor(x, k, false);
        let mag = |n: usize| series.coeffs[n].iter().map(|c| c.abs()).fold(0.0, f64::max);
        let mut h = self.settings.max_step;
        for n in [k - 1, k] {
            let c = mag(n);
            if c > 0.0 && c.is_finite() {
                h = h.min((self.settings.tolerance / c).powf(1.0 / n as f64));
            }
        }
        (0.9 * h).clamp(self.settings.min_step, self.settings.max_step)
    }

    /// Validated data for a step of exactly `h` (no step control).
    pub fn step_data(&self, set: &LohnerSet, h: f64, variational: bool) -> Result<StepData<'_>, IntegratorError> {
        let k = self.settings.taylor_order;
        let hull = set.hull();
        if !hull.is_bounded() {
            return Err(IntegratorError::Unbounded(0.0));
        }
        let z = self.a_priori_enclosure(&hull, h)?;
        let center: Vec<Interval> = set.center.iter().map(|&v| Interval::point(v)).collect();
        let center_series = self.field.taylor(&center, k, false);
        let hull_series = self.field.taylor(hull.as_slice(), k, true);
        let z_series = self.field.taylor(z.as_slice(), k + 1, variational);
        let remainder = z_series.coeffs[k + 1].clone();
        let remainder_variation = if variational {
            let n = set.dim();
            let dz = IntervalMatrix::new(
                n,
                n,
                z_series.derivs.as_ref().expect("variational series")[k + 1].clone(),
            );
            Some(dz.mul(&self.variation_a_priori(&z, h)))
        } else {
            None
        };
        if !remainder.iter().all(Interval::is_bounded) {
            return Err(IntegratorError::NoEnclosure { time: 0.0, step: h });
        }
        Ok(StepData {
            h,
            start: set.clone(),
            z,
            settings: &self.settings,
            center_series,
            hull_series,
            remainder,
            remainder_variation,
        })
    }

    /// Enclosure of `DΦ_t(x)` for `t ∈ [0,h]` and trajectories inside `Z`.
    fn variation_a_priori(&self, z: &IntervalBox, h: f64) -> IntervalMatrix {
        let n = z.dim();
        let j = self.field.jacobian(z);
        let hi = Interval::new(0.0, h).expect("positive step");
        let beta = exp_upper(Interval::point(j.norm_inf()).mul_f64(h).hi());
        let mut w = IntervalMatrix::new(n, n, vec![Interval::centered(0.0, beta); n * n]);
        let id = IntervalMatrix::identity(n);
        for _ in 0..3 {
            let next = id.add(&j.scale(hi).mul(&w));
            // both are enclosures; keep the tighter componentwise intersection
            let entries = next
                .entries()
                .iter()
                .zip(w.entries())
                .map(|(a, b)| a.intersect(b).unwrap_or(*a))
                .collect();
            w = IntervalMatrix::new(n, n, entries);
        }
        w
    }

    /// One controlled step from `set` with at most `h_max`: a-priori failures
    /// and excessive enclosure growth halve the step.
    pub fn controlled_step(
        &self,
        set: &LohnerSet,
        h_max: f64,
        variational: bool,
    ) -> Result<StepData<'_>, IntegratorError> {
        let mut h = self.propose_step(&set.center).min(h_max);
        let mut growth_retries = 0;
        loop {
            match self.step_data(set, h, variational) {
                Ok(sd) => {
                    if growth_retries < 4 && h > 2.0 * self.settings.min_step && self.excessive_growth(&sd) {
                        growth_retries += 1;
                        h *= 0.5;
                        continue;
                    }
                    return Ok(sd);
                }
                Err(IntegratorError::NoEnclosure { .. }) if h * 0.5 >= self.settings.min_step => h *= 0.5,
                Err(IntegratorError::NoEnclosure { .. }) => {
                    return Err(IntegratorError::NoEnclosure { time: 0.0, step: h })
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn excessive_growth(&self, sd: &StepData<'_>) -> bool {
        let tau = Interval::point(sd.h);
        let full = sd.enclosure_at(tau).width();
        let a = sd.taylor_derivative(tau).mid_matrix();
        let mut lin = a
            .mul(&sd.start.b_matrix())
            .mul_vec(&IntervalBox::new(sd.start.r.clone()));
        if let Some(c) = sd.start.c_matrix() {
            lin = lin.add(&a.mul(&c).mul_vec(&IntervalBox::new(sd.start.r0.clone())));
        }
        let floor =
            100.0 * self.settings.tolerance * (1.0 + sd.start.center.iter().map(|v| v.abs()).fold(0.0, f64::max));
        full > self.settings.max_width_growth * lin.width() + floor
    }

    /// Applies the representation policy to an initial set.
    pub fn prepare(&self, set: LohnerSet) -> LohnerSet {
        match self.settings.representation {
            Representation::Doubleton => set,
            _ => set.folded(),
        }
    }

    /// Single controlled step from a box; returns the flow over `[0, h]`.
    pub fn step(&self, x0: &IntervalBox, variational: bool) -> Result<FlowEnclosure, IntegratorError> {
        let set = self.prepare(LohnerSet::from_box(x0));
        let sd = self.controlled_step(&set, self.settings.max_step, variational)?;
        let tau = Interval::point(sd.h);
        let variation = variational.then(|| sd.advance_variation(tau, &VariationSet::identity(x0.dim())).hull());
        let next = sd.advance(tau);
        Ok(FlowEnclosure {
            time: tau,
            endpoint: next.hull(),
            tube: sd.tube(Interval::new(0.0, sd.h).expect("positive step")),
            set: next,
            variation,
            steps: 1,
        })
    }

    /// Flow of a box to time `t` (an interval, e.g. an enclosure of π/2).
    pub fn flow(&self, x0: &IntervalBox, t: Interval, variational: bool) -> Result<FlowEnclosure, IntegratorError> {
        let v0 = variational.then(|| VariationSet::identity(x0.dim()));
        self.flow_set(LohnerSet::from_box(x0), t, v0)
    }

    /// Flow of a Lohner set (and optional variation) to time `t`.
    pub fn flow_set(
        &self,
        set: LohnerSet,
        t: Interval,
        mut variation: Option<VariationSet>,
    ) -> Result<FlowEnclosure, IntegratorError> {
        assert!(t.lo() >= 0.0, "flow time must be non-negative");
        let mut set = self.prepare(set);
        let mut elapsed = Interval::ZERO;
        let mut tube = set.hull();
        let mut steps = 0;
        if t.hi() == 0.0 {
            return Ok(FlowEnclosure {
                time: Interval::ZERO,
                endpoint: set.hull(),
                tube,
                set,
                variation: variation.map(|v| v.hull()),
                steps,
            });
        }
        loop {
            let remaining_hi = (t - elapsed).hi();
            let sd = self
                .controlled_step(&set, remaining_hi.min(self.settings.max_step), variation.is_some())
                .map_err(|e| match e {
                    IntegratorError::NoEnclosure { step, .. } => IntegratorError::NoEnclosure {
                        time: elapsed.mid(),
                        step,
                    },
                    other => other,
                })?;
            steps += 1;
            let full = Interval::new(0.0, sd.h).expect("positive step");
            let last_time = elapsed + Interval::point(sd.h);
            // final step: the remaining time lies within [0, h]
            let rest = t - elapsed;
            if sd.h >= rest.hi() {
                let tau = Interval::new(rest.lo().max(0.0), rest.hi()).expect("ordered remaining time");
                tube = tube.hull(&sd.tube(full))?;
                let next = sd.advance(tau);
                let variation = variation.map(|v| sd.advance_variation(tau, &v).hull());
                if !next.hull().is_bounded() {
                    return Err(IntegratorError::Unbounded(t.mid()));
                }
                return Ok(FlowEnclosure {
                    time: t,
                    endpoint: next.hull(),
                    tube,
                    set: next,
                    variation,
                    steps,
                });
            }
            let tau = Interval::point(sd.h);
            tube = tube.hull(&sd.tube(full))?;
            variation = variation.map(|v| sd.advance_variation(tau, &v));
            set = sd.advance(tau);
            elapsed = last_time;
            if !set.hull().is_bounded() {
                return Err(IntegratorError::Unbounded(elapsed.mid()));
            }
        }
    }
}
