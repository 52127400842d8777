//! Outward-rounded interval arithmetic on scalars, vectors and small matrices.
//!
//! Every operation returns an enclosure of the exact real result. Rounding is
//! realised by computing in the default round-to-nearest mode and then moving
//! each endpoint one unit in the last place outward (see [`ROUNDING_POLICY`]).
//! Intervals built through the public constructors have finite bounds;
//! arithmetic overflow degrades to unbounded endpoints, which callers detect
//! through [`Interval::is_bounded`].

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{FromPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// The single outward-rounding policy of this build. Written into certificates.
pub const ROUNDING_POLICY: &str = "binary64 round-to-nearest followed by one-ulp outward widening of every endpoint";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("invalid interval bounds [{lo}, {hi}]")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("division by an interval containing zero")]
    DivisionByZeroInterval,
    #[error("singular enclosure: the determinant interval contains zero")]
    SingularEnclosure,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cannot parse interval literal `{0}`")]
    Parse(String),
}

#[inline]
fn down(x: f64) -> f64 {
    x.next_down()
}

#[inline]
fn up(x: f64) -> f64 {
    x.next_up()
}

/// Closed interval `[lo, hi]` of binary64 numbers.
#[derive(Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };
    pub const ONE: Interval = Interval { lo: 1.0, hi: 1.0 };
    /// Unbounded result of an overflowing or undefined operation.
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self, IntervalError> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(IntervalError::InvalidBounds { lo, hi })
        }
    }

    /// Degenerate interval `[x, x]`.
    pub fn point(x: f64) -> Self {
        debug_assert!(x.is_finite(), "point interval from non-finite value");
        Interval { lo: x, hi: x }
    }

    /// `[c - r, c + r]` with outward rounding.
    pub fn centered(c: f64, r: f64) -> Self {
        let r = r.abs();
        Interval::raw(down(c - r), up(c + r))
    }

    #[inline]
    fn raw(lo: f64, hi: f64) -> Self {
        if lo.is_nan() || hi.is_nan() {
            Interval::ENTIRE
        } else {
            Interval { lo, hi }
        }
    }

    /// Smallest interval containing both numbers.
    pub fn from_pair(a: f64, b: f64) -> Self {
        Interval::raw(a.min(b), a.max(b))
    }

    /// Enclosure of a decimal literal such as `0.2` or `-7e-4`. Exactly
    /// representable literals yield point intervals, others the two
    /// neighbouring binary64 numbers.
    pub fn from_decimal(s: &str) -> Result<Self, IntervalError> {
        let s = s.trim();
        let exact = parse_decimal_rational(s).ok_or_else(|| IntervalError::Parse(s.to_string()))?;
        let x: f64 = s.parse().map_err(|_| IntervalError::Parse(s.to_string()))?;
        if !x.is_finite() {
            return Err(IntervalError::Parse(s.to_string()));
        }
        let xr = BigRational::from_f64(x).ok_or_else(|| IntervalError::Parse(s.to_string()))?;
        Ok(match xr.cmp(&exact) {
            std::cmp::Ordering::Equal => Interval::point(x),
            std::cmp::Ordering::Less => Interval { lo: x, hi: up(x) },
            std::cmp::Ordering::Greater => Interval { lo: down(x), hi: x },
        })
    }

    #[inline]
    pub fn lo(&self) -> f64 {
        self.lo
    }

    #[inline]
    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    /// A binary64 number inside the interval, close to its centre.
    pub fn mid(&self) -> f64 {
        if self.lo == self.hi {
            return self.lo;
        }
        if !self.is_bounded() {
            return if self.lo.is_finite() {
                self.lo
            } else if self.hi.is_finite() {
                self.hi
            } else {
                0.0
            };
        }
        let m = 0.5 * self.lo + 0.5 * self.hi;
        m.clamp(self.lo, self.hi)
    }

    /// Upper bound of `hi - lo`.
    pub fn width(&self) -> f64 {
        up(self.hi - self.lo)
    }

    /// Upper bound of the radius around [`Interval::mid`].
    pub fn rad(&self) -> f64 {
        let m = self.mid();
        up((m - self.lo).max(self.hi - m))
    }

    /// Largest absolute value.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_zero(&self) -> bool {
        self.contains(0.0)
    }

    /// `self ⊆ other`.
    pub fn subset(&self, other: &Interval) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    /// `self` lies in the open interior of `other`.
    pub fn strictly_inside(&self, other: &Interval) -> bool {
        other.lo < self.lo && self.hi < other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn disjoint(&self, other: &Interval) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Strictly positive for every member.
    pub fn is_positive(&self) -> bool {
        self.lo > 0.0
    }

    pub fn is_negative(&self) -> bool {
        self.hi < 0.0
    }

    pub fn abs(&self) -> Interval {
        if self.lo >= 0.0 {
            *self
        } else if self.hi <= 0.0 {
            -*self
        } else {
            Interval {
                lo: 0.0,
                hi: self.mag(),
            }
        }
    }

    pub fn sqr(&self) -> Interval {
        let a = *self * *self;
        if self.contains_zero() {
            Interval::raw(0.0, a.hi)
        } else {
            Interval::raw(a.lo.max(0.0), a.hi)
        }
    }

    /// Integer power; even powers are kept non-negative.
    pub fn powi(&self, n: u32) -> Interval {
        match n {
            0 => Interval::ONE,
            1 => *self,
            _ => {
                let half = self.powi(n / 2).sqr();
                if n.is_multiple_of(2) {
                    half
                } else {
                    half * *self
                }
            }
        }
    }

    pub fn recip(&self) -> Result<Interval, IntervalError> {
        Interval::ONE.checked_div(self)
    }

    pub fn checked_div(&self, other: &Interval) -> Result<Interval, IntervalError> {
        if other.contains_zero() {
            return Err(IntervalError::DivisionByZeroInterval);
        }
        let q = [
            self.lo / other.lo,
            self.lo / other.hi,
            self.hi / other.lo,
            self.hi / other.hi,
        ];
        let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Interval::raw(down(lo), up(hi)))
    }

    /// Division by a non-zero binary64 number.
    pub fn div_f64(&self, d: f64) -> Interval {
        debug_assert!(d != 0.0);
        let (a, b) = (self.lo / d, self.hi / d);
        Interval::raw(down(a.min(b)), up(a.max(b)))
    }

    pub fn mul_f64(&self, s: f64) -> Interval {
        if s == 0.0 {
            return Interval::ZERO;
        }
        let (a, b) = (self.lo * s, self.hi * s);
        Interval::raw(down(a.min(b)), up(a.max(b)))
    }

    /// Widen by `rel * rad + abs` on both sides.
    pub fn inflate(&self, rel: f64, abs: f64) -> Interval {
        let d = up(self.rad() * rel + abs);
        Interval::raw(down(self.lo - d), up(self.hi + d))
    }

    /// Split into `k` closed pieces; neighbours share an endpoint and the
    /// first and last pieces keep the original endpoints exactly.
    pub fn split(&self, k: usize) -> Vec<Interval> {
        assert!(k > 0, "split count must be positive");
        let step = (self.hi - self.lo) / k as f64;
        let mut cuts = Vec::with_capacity(k + 1);
        cuts.push(self.lo);
        for i in 1..k {
            cuts.push((self.lo + step * i as f64).clamp(self.lo, self.hi));
        }
        cuts.push(self.hi);
        cuts.windows(2)
            .map(|w| Interval {
                lo: w[0],
                hi: w[1].max(w[0]),
            })
            .collect()
    }

    /// Plain `[lo, hi]` rendering with 17 significant digits (bit-exact round trip).
    pub fn to_plain_string(&self) -> String {
        format!("[{:.16e}, {:.16e}]", self.lo, self.hi)
    }

    /// Compressed rendering `common_{lower digits}^{upper digits}`, falling
    /// back to the plain form when the endpoints share no prefix.
    pub fn to_compressed_string(&self) -> String {
        if !self.is_bounded() || (self.lo < 0.0) != (self.hi < 0.0) {
            return self.to_plain_string();
        }
        let m = self.mag();
        let exp10 = if m == 0.0 { 0 } else { m.log10().floor() as i32 };
        let decimals = (16 - exp10).clamp(0, 40) as usize;
        let a = format!("{:.*}", decimals, self.lo);
        let b = format!("{:.*}", decimals, self.hi);
        if a.len() != b.len() {
            return self.to_plain_string();
        }
        let common = a.bytes().zip(b.bytes()).take_while(|(x, y)| x == y).count();
        if common == a.len() {
            return a;
        }
        let prefix = &a[..common];
        if !prefix.contains('.') {
            return self.to_plain_string();
        }
        format!("{prefix}_{{{}}}^{{{}}}", &a[common..], &b[common..])
    }

    fn parse_compressed(s: &str) -> Result<Interval, IntervalError> {
        let err = || IntervalError::Parse(s.to_string());
        let (prefix, rest) = s.split_once("_{").ok_or_else(err)?;
        let (sub, rest) = rest.split_once("}^{").ok_or_else(err)?;
        let sup = rest.strip_suffix('}').ok_or_else(err)?;
        let a = Interval::from_decimal(&format!("{prefix}{sub}"))?;
        let b = Interval::from_decimal(&format!("{prefix}{sup}"))?;
        Ok(a.hull(&b))
    }
}

fn parse_decimal_rational(s: &str) -> Option<BigRational> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut num: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().ok()?
    };
    if neg {
        num = -num;
    }
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        BigRational::from_integer(num * num::pow(ten, scale as usize))
    } else {
        BigRational::new(num, num::pow(ten, (-scale) as usize))
    };
    Some(r)
}

/// Exact rational value of a binary64 number (used by oracles and parsers).
pub fn exact_rational(x: f64) -> Option<BigRational> {
    BigRational::from_f64(x)
}

/// `true` when the exact rational `v` lies in `x`.
pub fn rational_in(v: &BigRational, x: &Interval) -> bool {
    // an infinite endpoint imposes no constraint on that side
    let lo_ok = x.lo == f64::NEG_INFINITY || exact_rational(x.lo).is_some_and(|lo| &lo <= v);
    let hi_ok = x.hi == f64::INFINITY || exact_rational(x.hi).is_some_and(|hi| v <= &hi);
    lo_ok && hi_ok
}

impl FromStr for Interval {
    type Err = IntervalError;

    /// Accepts `[lo, hi]`, the compressed `prefix_{sub}^{sup}` form, and plain decimals.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(body) = s.strip_prefix('[').and_then(|b| b.strip_suffix(']')) {
            let (a, b) = body
                .split_once(',')
                .ok_or_else(|| IntervalError::Parse(s.to_string()))?;
            let lo: f64 = a.trim().parse().map_err(|_| IntervalError::Parse(s.to_string()))?;
            let hi: f64 = b.trim().parse().map_err(|_| IntervalError::Parse(s.to_string()))?;
            return Interval::new(lo, hi);
        }
        if s.contains("_{") {
            return Interval::parse_compressed(s);
        }
        Interval::from_decimal(s)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_plain_string())
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "{}", self.to_compressed_string())
        } else {
            write!(f, "{}", self.to_plain_string())
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_plain_string())
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

impl Neg for Interval {
    type Output = Interval;
    #[inline]
    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl Add for Interval {
    type Output = Interval;
    #[inline]
    fn add(self, o: Interval) -> Interval {
        if o.lo == 0.0 && o.hi == 0.0 {
            return self;
        }
        if self.lo == 0.0 && self.hi == 0.0 {
            return o;
        }
        Interval::raw(down(self.lo + o.lo), up(self.hi + o.hi))
    }
}

impl Sub for Interval {
    type Output = Interval;
    #[inline]
    fn sub(self, o: Interval) -> Interval {
        if o.lo == 0.0 && o.hi == 0.0 {
            return self;
        }
        Interval::raw(down(self.lo - o.hi), up(self.hi - o.lo))
    }
}

impl Mul for Interval {
    type Output = Interval;
    #[inline]
    fn mul(self, o: Interval) -> Interval {
        if self.lo == self.hi && self.lo == 0.0 || o.lo == o.hi && o.lo == 0.0 {
            return Interval::ZERO;
        }
        if o.lo == 1.0 && o.hi == 1.0 {
            return self;
        }
        if self.lo == 1.0 && self.hi == 1.0 {
            return o;
        }
        let (x, y) = (self, o);
        // endpoint selection by sign pattern
        let (lo, hi) = if x.lo >= 0.0 {
            if y.lo >= 0.0 {
                (x.lo * y.lo, x.hi * y.hi)
            } else if y.hi <= 0.0 {
                (x.hi * y.lo, x.lo * y.hi)
            } else {
                (x.hi * y.lo, x.hi * y.hi)
            }
        } else if x.hi <= 0.0 {
            if y.lo >= 0.0 {
                (x.lo * y.hi, x.hi * y.lo)
            } else if y.hi <= 0.0 {
                (x.hi * y.hi, x.lo * y.lo)
            } else {
                (x.lo * y.hi, x.lo * y.lo)
            }
        } else if y.lo >= 0.0 {
            (x.lo * y.hi, x.hi * y.hi)
        } else if y.hi <= 0.0 {
            (x.hi * y.lo, x.lo * y.lo)
        } else {
            let (p, q) = (x.lo * y.hi, x.hi * y.lo);
            let (r, t) = (x.lo * y.lo, x.hi * y.hi);
            if p.is_nan() || q.is_nan() || r.is_nan() || t.is_nan() {
                return Interval::ENTIRE;
            }
            (p.min(q), r.max(t))
        };
        Interval::raw(down(lo), up(hi))
    }
}

impl Add<f64> for Interval {
    type Output = Interval;
    fn add(self, o: f64) -> Interval {
        self + Interval::point(o)
    }
}

impl Sub<f64> for Interval {
    type Output = Interval;
    fn sub(self, o: f64) -> Interval {
        self - Interval::point(o)
    }
}

impl Mul<f64> for Interval {
    type Output = Interval;
    fn mul(self, o: f64) -> Interval {
        self.mul_f64(o)
    }
}

impl AddAssign for Interval {
    #[inline]
    fn add_assign(&mut self, o: Interval) {
        *self = *self + o;
    }
}

impl SubAssign for Interval {
    #[inline]
    fn sub_assign(&mut self, o: Interval) {
        *self = *self - o;
    }
}

impl std::iter::Sum for Interval {
    fn sum<I: Iterator<Item = Interval>>(iter: I) -> Interval {
        iter.fold(Interval::ZERO, |a, b| a + b)
    }
}

/// Interval vector ("box"); dimension 2 or 3 throughout this crate.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalBox(Vec<Interval>);

impl IntervalBox {
    pub fn new(components: Vec<Interval>) -> Self {
        assert!(!components.is_empty(), "boxes have positive dimension");
        IntervalBox(components)
    }

    pub fn from_points(x: &[f64]) -> Self {
        IntervalBox::new(x.iter().map(|&v| Interval::point(v)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        IntervalBox::new(vec![Interval::ZERO; n])
    }

    /// `x ± r` componentwise.
    pub fn centered(x: &[f64], r: &[f64]) -> Self {
        IntervalBox::new(x.iter().zip(r).map(|(&c, &r)| Interval::centered(c, r)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Interval] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Interval> {
        self.0.iter()
    }

    pub fn is_bounded(&self) -> bool {
        self.0.iter().all(Interval::is_bounded)
    }

    fn check_dim(&self, o: &IntervalBox) -> Result<(), IntervalError> {
        if self.dim() == o.dim() {
            Ok(())
        } else {
            Err(IntervalError::DimensionMismatch(self.dim(), o.dim()))
        }
    }

    pub fn hull(&self, o: &IntervalBox) -> Result<IntervalBox, IntervalError> {
        self.check_dim(o)?;
        Ok(IntervalBox(self.0.iter().zip(&o.0).map(|(a, b)| a.hull(b)).collect()))
    }

    /// Intersection; `Ok(None)` signals an empty result.
    pub fn intersect(&self, o: &IntervalBox) -> Result<Option<IntervalBox>, IntervalError> {
        self.check_dim(o)?;
        Ok(self
            .0
            .iter()
            .zip(&o.0)
            .map(|(a, b)| a.intersect(b))
            .collect::<Option<Vec<_>>>()
            .map(IntervalBox))
    }

    pub fn disjoint(&self, o: &IntervalBox) -> bool {
        self.0.iter().zip(&o.0).any(|(a, b)| a.disjoint(b))
    }

    pub fn subset(&self, o: &IntervalBox) -> bool {
        self.dim() == o.dim() && self.0.iter().zip(&o.0).all(|(a, b)| a.subset(b))
    }

    pub fn strictly_inside(&self, o: &IntervalBox) -> bool {
        self.dim() == o.dim() && self.0.iter().zip(&o.0).all(|(a, b)| a.strictly_inside(b))
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        self.0.iter().zip(x).all(|(a, &v)| a.contains(v))
    }

    pub fn mid(&self) -> Vec<f64> {
        self.0.iter().map(Interval::mid).collect()
    }

    pub fn mid_box(&self) -> IntervalBox {
        IntervalBox::from_points(&self.mid())
    }

    /// Largest component width.
    pub fn width(&self) -> f64 {
        self.0.iter().map(Interval::width).fold(0.0, f64::max)
    }

    pub fn widths(&self) -> Vec<f64> {
        self.0.iter().map(Interval::width).collect()
    }

    pub fn rads(&self) -> Vec<f64> {
        self.0.iter().map(Interval::rad).collect()
    }

    pub fn inflate(&self, rel: f64, abs: f64) -> IntervalBox {
        IntervalBox(self.0.iter().map(|c| c.inflate(rel, abs)).collect())
    }

    /// Regular grid of sub-boxes, first coordinate varying slowest.
    pub fn subdivide(&self, counts: &[usize]) -> Vec<IntervalBox> {
        assert_eq!(counts.len(), self.dim(), "one count per dimension");
        let pieces: Vec<Vec<Interval>> = self.0.iter().zip(counts).map(|(c, &k)| c.split(k)).collect();
        let mut out = vec![Vec::with_capacity(self.dim())];
        for comp in &pieces {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    comp.iter().map(move |piece| {
                        let mut v = prefix.clone();
                        v.push(*piece);
                        v
                    })
                })
                .collect();
        }
        out.into_iter().map(IntervalBox).collect()
    }

    pub fn add(&self, o: &IntervalBox) -> IntervalBox {
        assert_eq!(self.dim(), o.dim());
        IntervalBox(self.0.iter().zip(&o.0).map(|(a, b)| *a + *b).collect())
    }

    pub fn sub(&self, o: &IntervalBox) -> IntervalBox {
        assert_eq!(self.dim(), o.dim());
        IntervalBox(self.0.iter().zip(&o.0).map(|(a, b)| *a - *b).collect())
    }

    pub fn scale(&self, s: Interval) -> IntervalBox {
        IntervalBox(self.0.iter().map(|a| *a * s).collect())
    }

    pub fn into_vec(self) -> Vec<Interval> {
        self.0
    }
}

impl Index<usize> for IntervalBox {
    type Output = Interval;
    fn index(&self, i: usize) -> &Interval {
        &self.0[i]
    }
}

impl IndexMut<usize> for IntervalBox {
    fn index_mut(&mut self, i: usize) -> &mut Interval {
        &mut self.0[i]
    }
}

impl fmt::Debug for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for IntervalBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " x ")?;
            }
            if f.alternate() {
                write!(f, "{c:#}")?;
            } else {
                write!(f, "{c}")?;
            }
        }
        Ok(())
    }
}

/// Row-major interval matrix.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Interval>,
}

impl IntervalMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Interval>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        assert_eq!(entries.len(), rows * cols, "entries length must be rows*cols");
        IntervalMatrix { rows, cols, entries }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntervalMatrix::new(rows, cols, vec![Interval::ZERO; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntervalMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Interval::ONE;
        }
        m
    }

    pub fn from_f64(rows: usize, cols: usize, v: &[f64]) -> Self {
        IntervalMatrix::new(rows, cols, v.iter().map(|&x| Interval::point(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Interval] {
        &self.entries
    }

    pub fn is_bounded(&self) -> bool {
        self.entries.iter().all(Interval::is_bounded)
    }

    pub fn mid(&self) -> Vec<f64> {
        self.entries.iter().map(Interval::mid).collect()
    }

    pub fn mid_matrix(&self) -> IntervalMatrix {
        IntervalMatrix::from_f64(self.rows, self.cols, &self.mid())
    }

    pub fn column(&self, j: usize) -> IntervalBox {
        IntervalBox::new((0..self.rows).map(|i| self[(i, j)]).collect())
    }

    pub fn transpose(&self) -> IntervalMatrix {
        let mut t = IntervalMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, o: &IntervalMatrix) -> IntervalMatrix {
        assert_eq!(self.cols, o.rows, "matrix product dimension mismatch");
        let mut out = IntervalMatrix::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for j in 0..o.cols {
                let mut s = Interval::ZERO;
                for k in 0..self.cols {
                    s += self[(i, k)] * o[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &IntervalBox) -> IntervalBox {
        assert_eq!(self.cols, v.dim(), "matrix-vector dimension mismatch");
        IntervalBox::new(
            (0..self.rows)
                .map(|i| (0..self.cols).map(|k| self[(i, k)] * v[k]).sum())
                .collect(),
        )
    }

    pub fn add(&self, o: &IntervalMatrix) -> IntervalMatrix {
        assert!(self.rows == o.rows && self.cols == o.cols);
        IntervalMatrix::new(
            self.rows,
            self.cols,
            self.entries.iter().zip(&o.entries).map(|(a, b)| *a + *b).collect(),
        )
    }

    pub fn sub(&self, o: &IntervalMatrix) -> IntervalMatrix {
        assert!(self.rows == o.rows && self.cols == o.cols);
        IntervalMatrix::new(
            self.rows,
            self.cols,
            self.entries.iter().zip(&o.entries).map(|(a, b)| *a - *b).collect(),
        )
    }

    pub fn scale(&self, s: Interval) -> IntervalMatrix {
        IntervalMatrix::new(self.rows, self.cols, self.entries.iter().map(|a| *a * s).collect())
    }

    pub fn hull(&self, o: &IntervalMatrix) -> IntervalMatrix {
        assert!(self.rows == o.rows && self.cols == o.cols);
        IntervalMatrix::new(
            self.rows,
            self.cols,
            self.entries.iter().zip(&o.entries).map(|(a, b)| a.hull(b)).collect(),
        )
    }

    pub fn contains_f64(&self, m: &[f64]) -> bool {
        self.entries.iter().zip(m).all(|(a, &v)| a.contains(v))
    }

    pub fn subset(&self, o: &IntervalMatrix) -> bool {
        self.rows == o.rows && self.cols == o.cols && self.entries.iter().zip(&o.entries).all(|(a, b)| a.subset(b))
    }

    /// Upper bound of the row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| Interval::point(self[(i, j)].mag()))
                    .sum::<Interval>()
                    .hi()
            })
            .fold(0.0, f64::max)
    }

    pub fn determinant2(&self) -> Interval {
        assert!(self.rows == 2 && self.cols == 2);
        self[(0, 0)] * self[(1, 1)] - self[(0, 1)] * self[(1, 0)]
    }

    /// Enclosure of the inverses of every real 2x2 matrix in `self`.
    pub fn invert2x2(&self) -> Result<IntervalMatrix, IntervalError> {
        if self.rows != 2 || self.cols != 2 {
            return Err(IntervalError::DimensionMismatch(self.rows, 2));
        }
        let det = self.determinant2();
        if det.contains_zero() {
            return Err(IntervalError::SingularEnclosure);
        }
        let inv_det = det.recip()?;
        Ok(IntervalMatrix::new(
            2,
            2,
            vec![
                self[(1, 1)] * inv_det,
                -self[(0, 1)] * inv_det,
                -self[(1, 0)] * inv_det,
                self[(0, 0)] * inv_det,
            ],
        ))
    }

    /// Inverse enclosure for square matrices of any size: 1x1 and 2x2 by
    /// explicit formulas, larger ones through [`enclose_inverse`] of the
    /// midpoint plus a perturbation bound.
    pub fn inverse(&self) -> Result<IntervalMatrix, IntervalError> {
        if self.rows != self.cols {
            return Err(IntervalError::DimensionMismatch(self.rows, self.cols));
        }
        match self.rows {
            1 => Ok(IntervalMatrix::new(
                1,
                1,
                vec![self[(0, 0)].recip().map_err(|_| IntervalError::SingularEnclosure)?],
            )),
            2 => self.invert2x2(),
            n => {
                // (M0 + E)^-1 = (I + R E)^-1 R with R ⊇ M0^-1
                let m0 = self.mid();
                let r = enclose_inverse(&m0, n)?;
                let e = self.sub(&IntervalMatrix::from_f64(n, n, &m0));
                let re = r.mul(&e);
                let q = re.norm_inf();
                if q >= 1.0 {
                    return Err(IntervalError::SingularEnclosure);
                }
                let bound = up(up(r.norm_inf() * q) / down(1.0 - q));
                let delta = Interval::centered(0.0, bound);
                let mut out = r;
                for v in out.entries.iter_mut() {
                    *v += delta;
                }
                Ok(out)
            }
        }
    }
}

impl Index<(usize, usize)> for IntervalMatrix {
    type Output = Interval;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Interval {
        &self.entries[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for IntervalMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Interval {
        &mut self.entries[i * self.cols + j]
    }
}

impl fmt::Debug for IntervalMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[Interval]> = self.entries.chunks(self.cols).collect();
        f.debug_list().entries(rows).finish()
    }
}

/// Approximate inverse of a point matrix by Gauss-Jordan elimination with
/// partial pivoting. `None` when a pivot vanishes.
pub fn approx_inverse(m: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs()))?;
        if a[piv * n + col] == 0.0 || !a[piv * n + col].is_finite() {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(piv * n + j, col * n + j);
                inv.swap(piv * n + j, col * n + j);
            }
        }
        let p = a[col * n + col];
        for j in 0..n {
            a[col * n + j] /= p;
            inv[col * n + j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = a[i * n + col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i * n + j] -= f * a[col * n + j];
                        inv[i * n + j] -= f * inv[col * n + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Rigorous enclosure of the inverse of a point matrix: with `R` an
/// approximate inverse and `E = I - R M`, `‖M⁻¹ - R‖ ≤ ‖R‖‖E‖/(1-‖E‖)`.
pub fn enclose_inverse(m: &[f64], n: usize) -> Result<IntervalMatrix, IntervalError> {
    let r = approx_inverse(m, n).ok_or(IntervalError::SingularEnclosure)?;
    let ri = IntervalMatrix::from_f64(n, n, &r);
    let mi = IntervalMatrix::from_f64(n, n, m);
    let e = IntervalMatrix::identity(n).sub(&ri.mul(&mi));
    let q = e.norm_inf();
    if !(q < 1.0) {
        return Err(IntervalError::SingularEnclosure);
    }
    let bound = up(up(ri.norm_inf() * q) / down(1.0 - q));
    let delta = Interval::centered(0.0, bound);
    Ok(IntervalMatrix::new(
        n,
        n,
        r.iter().map(|&v| Interval::point(v) + delta).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64) -> Interval {
        Interval::new(lo, hi).unwrap()
    }

    #[test]
    fn addition_is_one_ulp_outward() {
        let s = iv(1.0, 2.0) + iv(3.0, 4.0);
        assert!(s.lo() <= 4.0 && s.hi() >= 6.0);
        assert_eq!(s.lo(), 4.0f64.next_down());
        assert_eq!(s.hi(), 6.0f64.next_up());
    }

    #[test]
    fn multiplication_case_analysis() {
        let p = iv(-1.0, 2.0) * iv(3.0, 4.0);
        assert!(p.lo() <= -4.0 && p.hi() >= 8.0);
        assert!(p.lo() >= (-4.0f64).next_down() && p.hi() <= 8.0f64.next_up());
    }

    #[test]
    fn reciprocal_and_division_by_zero() {
        let q = Interval::ONE.checked_div(&iv(2.0, 4.0)).unwrap();
        assert!(q.lo() <= 0.25 && q.hi() >= 0.5);
        assert_eq!(
            Interval::ONE.checked_div(&iv(-1.0, 1.0)),
            Err(IntervalError::DivisionByZeroInterval)
        );
    }

    #[test]
    fn construction_rejects_bad_bounds() {
        assert!(Interval::new(2.0, 1.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 1.0).is_err());
        assert!(Interval::new(0.0, f64::NAN).is_err());
    }

    #[test]
    fn set_operations() {
        assert_eq!(iv(1.0, 3.0).intersect(&iv(2.0, 4.0)), Some(iv(2.0, 3.0)));
        assert_eq!(iv(1.0, 2.0).intersect(&iv(3.0, 4.0)), None);
        assert!(iv(1.1, 1.9).strictly_inside(&iv(1.0, 2.0)));
        assert!(!iv(1.0, 1.9).strictly_inside(&iv(1.0, 2.0)));
        assert_eq!(iv(1.0, 2.0).hull(&iv(3.0, 4.0)), iv(1.0, 4.0));
        let a = IntervalBox::new(vec![iv(0.0, 1.0), iv(0.0, 1.0)]);
        let b = IntervalBox::new(vec![iv(2.0, 3.0), iv(0.0, 1.0)]);
        assert_eq!(a.intersect(&b).unwrap(), None);
        let c = IntervalBox::new(vec![iv(0.0, 1.0)]);
        assert!(a.intersect(&c).is_err());
    }

    #[test]
    fn powers_stay_nonnegative() {
        let x = iv(-2.0, 1.0);
        let x2 = x.powi(2);
        assert!(x2.lo() >= 0.0 && x2.hi() >= 4.0);
        let x3 = x.powi(3);
        assert!(x3.lo() <= -8.0 && x3.hi() >= 1.0);
    }

    #[test]
    fn invert2x2_examples() {
        let m = IntervalMatrix::from_f64(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let inv = m.invert2x2().unwrap();
        assert!(inv.contains_f64(&[0.5, 0.0, 0.0, 0.25]));
        let id = IntervalMatrix::identity(2).invert2x2().unwrap();
        assert!(id.contains_f64(&[1.0, 0.0, 0.0, 1.0]));
        let sing = IntervalMatrix::from_f64(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(sing.invert2x2(), Err(IntervalError::SingularEnclosure));
    }

    #[test]
    fn general_inverse_encloses() {
        let m = [2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0];
        let inv = enclose_inverse(&m, 3).unwrap();
        let prod = IntervalMatrix::from_f64(3, 3, &m).mul(&inv);
        assert!(prod.contains_f64(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn subdivide_examples() {
        let b = IntervalBox::new(vec![iv(0.0, 1.0), iv(0.0, 1.0)]);
        let parts = b.subdivide(&[2, 2]);
        assert_eq!(parts.len(), 4);
        assert!(parts.iter().all(|p| p.iter().all(|c| c.hi() - c.lo() == 0.5)));
        assert_eq!(b.subdivide(&[1, 1]), vec![b.clone()]);
        let line = IntervalBox::new(vec![iv(0.0, 1.0)]);
        let thirds = line.subdivide(&[3]);
        assert_eq!(thirds.len(), 3);
        assert_eq!(thirds[0][0].hi(), thirds[1][0].lo());
        assert_eq!(thirds[1][0].hi(), thirds[2][0].lo());
        assert_eq!(thirds[0][0].lo(), 0.0);
        assert_eq!(thirds[2][0].hi(), 1.0);
    }

    #[test]
    fn decimal_literals() {
        let two_tenths = Interval::from_decimal("0.2").unwrap();
        assert!(!two_tenths.is_point());
        assert!(two_tenths.contains(0.2));
        assert_eq!(two_tenths.hi(), two_tenths.lo().next_up());
        assert!(Interval::from_decimal("5.25").unwrap().is_point());
        assert!(Interval::from_decimal("-7e-4").unwrap().contains(-7e-4));
        assert!(Interval::from_decimal("1.2.3").is_err());
    }

    #[test]
    fn compressed_notation_parses() {
        let x: Interval = "-3.4664152050_{12922}^{08744}".parse().unwrap();
        assert!(x.contains(-3.466415205012922) && x.contains(-3.466415205008744));
        assert!(x.width() < 5e-12);
        let z: Interval = "0.033796299364_{04972}^{3551}".parse().unwrap();
        assert!(z.contains(0.03379629936404972) && z.contains(0.0337962993643551));
        let rendered = x.to_compressed_string();
        let back: Interval = rendered.parse().unwrap();
        assert!(x.subset(&back));
    }

    #[test]
    fn plain_rendering_round_trips() {
        let x = Interval::from_decimal("0.1").unwrap();
        let back: Interval = x.to_plain_string().parse().unwrap();
        assert_eq!(x, back);
    }
}
