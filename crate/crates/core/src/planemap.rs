//! Maps that the covering and Newton machinery can be applied to.
//!
//! The proofs use [`ChartMap`], the rigorous return map expressed in an
//! affine chart. [`AffinePlaneMap`] and [`FieldMap`] are exact, cheap maps used
//! for sanity checks and negative controls.

use thiserror::Error;

use crate::field::PolyField;
use crate::interval::{Interval, IntervalBox, IntervalError, IntervalMatrix};
use crate::poincare::{AffineChart, PoincareError, ReturnMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error(transparent)]
    Poincare(#[from] PoincareError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("outside the domain of the map: {0}")]
    Domain(String),
}

/// A map `f` on boxes of a fixed dimension, with rigorous enclosures of
/// `fⁿ(X)` and `Dfⁿ(X)`.
pub trait PlaneMap: Sync {
    fn dim(&self) -> usize;

    /// Enclosure of `fⁿ(X)`.
    fn image(&self, x: &IntervalBox, n: usize) -> Result<IntervalBox, MapError>;

    /// Enclosures of `fⁿ(X)` and of `Dfⁿ` over `X`.
    fn image_with_derivative(&self, x: &IntervalBox, n: usize) -> Result<(IntervalBox, IntervalMatrix), MapError>;

    /// Short human-readable description recorded in certificates.
    fn describe(&self) -> String;
}

/// The return map `P_C = C⁻¹∘P∘C` in an affine chart; with the identity
/// chart this is the return map in section coordinates `(y, z)`.
#[derive(Clone, Debug)]
pub struct ChartMap<'f> {
    map: ReturnMap<'f>,
    chart: AffineChart,
}

impl<'f> ChartMap<'f> {
    pub fn new(map: ReturnMap<'f>, chart: AffineChart) -> Self {
        ChartMap { map, chart }
    }

    pub fn section(map: ReturnMap<'f>) -> Self {
        ChartMap::new(map, AffineChart::identity())
    }

    pub fn chart(&self) -> &AffineChart {
        &self.chart
    }

    pub fn return_map(&self) -> &ReturnMap<'f> {
        &self.map
    }
}

impl PlaneMap for ChartMap<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn image(&self, x: &IntervalBox, n: usize) -> Result<IntervalBox, MapError> {
        Ok(self.map.chart_poincare(&self.chart, x, n, false)?.image)
    }

    fn image_with_derivative(&self, x: &IntervalBox, n: usize) -> Result<(IntervalBox, IntervalMatrix), MapError> {
        let r = self.map.chart_poincare(&self.chart, x, n, true)?;
        Ok((r.image, r.derivative.expect("derivative requested")))
    }

    fn describe(&self) -> String {
        format!("return map of {} to x=0 in an affine chart", self.map.field().name())
    }
}

/// `x ↦ M x + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinePlaneMap {
    m: IntervalMatrix,
    c: IntervalBox,
    name: String,
}

impl AffinePlaneMap {
    pub fn new(name: &str, m: IntervalMatrix, c: IntervalBox) -> Self {
        assert!(
            m.rows() == m.cols() && m.rows() == c.dim(),
            "affine map dimensions disagree"
        );
        AffinePlaneMap {
            m,
            c,
            name: name.to_string(),
        }
    }

    pub fn linear(name: &str, m: IntervalMatrix) -> Self {
        let n = m.rows();
        AffinePlaneMap::new(name, m, IntervalBox::zeros(n))
    }

    pub fn identity(dim: usize) -> Self {
        AffinePlaneMap::linear("identity", IntervalMatrix::identity(dim))
    }

    /// `(x, y) ↦ (sx·x, sy·y)`.
    pub fn scaling(sx: f64, sy: f64) -> Self {
        AffinePlaneMap::linear("diagonal scaling", IntervalMatrix::from_f64(2, 2, &[sx, 0.0, 0.0, sy]))
    }

    /// `x ↦ x + d`.
    pub fn translation(d: &[f64]) -> Self {
        AffinePlaneMap::new(
            "translation",
            IntervalMatrix::identity(d.len()),
            IntervalBox::from_points(d),
        )
    }

    /// Rotation of the plane by `2π/3`; every point other than the origin
    /// has fundamental period 3.
    pub fn rotation_third() -> Self {
        let half = Interval::point(0.5);
        // sin(2π/3) = √3/2 enclosed between neighbouring doubles
        let s = 3f64.sqrt() / 2.0;
        let sin = Interval::new(s.next_down(), s.next_up()).expect("finite");
        AffinePlaneMap::linear(
            "rotation by 2pi/3",
            IntervalMatrix::new(2, 2, vec![-half, -sin, sin, -half]),
        )
    }

    pub fn matrix(&self) -> &IntervalMatrix {
        &self.m
    }

    fn apply(&self, x: &IntervalBox) -> IntervalBox {
        self.m.mul_vec(x).add(&self.c)
    }
}

impl PlaneMap for AffinePlaneMap {
    fn dim(&self) -> usize {
        self.c.dim()
    }

    fn image(&self, x: &IntervalBox, n: usize) -> Result<IntervalBox, MapError> {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.apply(&y);
        }
        Ok(y)
    }

    fn image_with_derivative(&self, x: &IntervalBox, n: usize) -> Result<(IntervalBox, IntervalMatrix), MapError> {
        let mut d = IntervalMatrix::identity(self.dim());
        for _ in 0..n {
            d = self.m.mul(&d);
        }
        Ok((self.image(x, n)?, d))
    }

    fn describe(&self) -> String {
        self.name.clone()
    }
}

/// A polynomial map given by the components of a [`PolyField`], used as a
/// discrete map rather than as a vector field.
#[derive(Clone, Debug)]
pub struct FieldMap {
    f: PolyField,
}

impl FieldMap {
    pub fn new(f: PolyField) -> Self {
        FieldMap { f }
    }

    /// `x ↦ x²` on the line.
    pub fn square() -> Self {
        use crate::field::Expr;
        FieldMap::new(PolyField::from_exprs(
            "x^2",
            Vec::new(),
            vec![Expr::mul(Expr::var(0), Expr::var(0))],
        ))
    }
}

impl PlaneMap for FieldMap {
    fn dim(&self) -> usize {
        self.f.dim()
    }

    fn image(&self, x: &IntervalBox, n: usize) -> Result<IntervalBox, MapError> {
        let mut y = x.clone();
        for _ in 0..n {
            y = self.f.eval(&y);
        }
        Ok(y)
    }

    fn image_with_derivative(&self, x: &IntervalBox, n: usize) -> Result<(IntervalBox, IntervalMatrix), MapError> {
        let mut y = x.clone();
        let mut d = IntervalMatrix::identity(self.dim());
        for _ in 0..n {
            d = self.f.jacobian(&y).mul(&d);
            y = self.f.eval(&y);
        }
        Ok((y, d))
    }

    fn describe(&self) -> String {
        format!("polynomial map {}", self.f.name())
    }
}
