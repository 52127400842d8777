//! Rigorous return map on the half-plane `Π = {x = 0, y < 0}` with crossing
//! direction `x' > 0`, in section coordinates `(y, z)` or through an affine
//! chart.
//!
//! At every intermediate crossing of `Pⁿ` the set is restarted on the
//! section as an affine set (or as the plain crossing box when that is
//! tighter), together with its accumulated derivative. Crossings are located
//! on the verified tube by sign bracketing of `x`; a set too long to cross in
//! one step is carried across in several steps. The image is the intersection
//! of two enclosures:
//!
//! * the tube over the crossing-time bracket with `x := 0`;
//! * a mean-value form around the centre's own tightly bracketed crossing,
//!   using `DQ = (I − f·e_xᵀ/f_x)·DΦ` for the local crossing map `Q`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::PolyField;
use crate::integrator::{Integrator, IntegratorError, IntegratorSettings, LohnerSet, StepData, VariationSet};
use crate::interval::{Interval, IntervalBox, IntervalError, IntervalMatrix};

/// Time budget for one evaluation of `Pⁿ`, per iterate.
pub const TIME_BUDGET: f64 = 50.0;

/// Bisection count for crossing brackets.
const MAX_BISECTIONS: usize = 60;
/// Target width of the crossing-time bracket of a whole set.
const CROSSING_TIME_WIDTH: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PoincareError {
    #[error("box is not admissible on the section: {0}")]
    NotAdmissible(String),
    #[error("transversality failure at t≈{time:.4}: {detail}")]
    TransversalityFailure { time: f64, detail: String },
    #[error("crossing not located at t≈{time:.4}: {detail}")]
    CrossingNotLocated { time: f64, detail: String },
    #[error(transparent)]
    Integrator(#[from] IntegratorError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// The section `x = 0, y < 0` crossed with `x' > 0`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SectionSpec;

impl SectionSpec {
    /// `true` when the `(y, z)` box lies on the open half-plane `y < 0`.
    pub fn admissible(&self, b: &IntervalBox) -> bool {
        b.dim() == 2 && b[0].is_negative()
    }

    pub fn description(&self) -> &'static str {
        "x = 0, y < 0, crossed with x' = -y - z > 0"
    }
}

/// `true` only if `x' = −y − z` is strictly positive on the `(y, z)` box.
pub fn check_transversality(b: &IntervalBox) -> bool {
    b.dim() == 2 && (-b[0] - b[1]).is_positive()
}

/// Affine chart `C(u) = M·u + p` on the section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChartData")]
pub struct AffineChart {
    pub m: IntervalMatrix,
    pub p: IntervalBox,
    #[serde(skip_serializing)]
    m_inv: IntervalMatrix,
}

/// Serialized form of [`AffineChart`]; the inverse is recomputed on load.
#[derive(Deserialize)]
struct ChartData {
    m: IntervalMatrix,
    p: IntervalBox,
}

impl TryFrom<ChartData> for AffineChart {
    type Error = IntervalError;
    fn try_from(d: ChartData) -> Result<Self, Self::Error> {
        AffineChart::new(d.m, d.p)
    }
}

impl AffineChart {
    pub fn new(m: IntervalMatrix, p: IntervalBox) -> Result<Self, IntervalError> {
        if m.rows() != 2 || m.cols() != 2 || p.dim() != 2 {
            return Err(IntervalError::DimensionMismatch(m.rows(), 2));
        }
        let m_inv = m.invert2x2()?;
        Ok(AffineChart { m, p, m_inv })
    }

    /// Chart from decimal literals (row-major `M`, then `p`).
    pub fn from_decimals(m: [&str; 4], p: [&str; 2]) -> Result<Self, IntervalError> {
        let m = IntervalMatrix::new(
            2,
            2,
            m.iter().map(|s| Interval::from_decimal(s)).collect::<Result<_, _>>()?,
        );
        let p = IntervalBox::new(p.iter().map(|s| Interval::from_decimal(s)).collect::<Result<_, _>>()?);
        AffineChart::new(m, p)
    }

    /// `M = I`, `p = 0`: chart coordinates are section coordinates.
    pub fn identity() -> Self {
        AffineChart::new(IntervalMatrix::identity(2), IntervalBox::zeros(2)).expect("identity is invertible")
    }

    pub fn m_inv(&self) -> &IntervalMatrix {
        &self.m_inv
    }

    /// `C(u)` for a chart box.
    pub fn forward(&self, u: &IntervalBox) -> IntervalBox {
        self.m.mul_vec(u).add(&self.p)
    }

    /// `C⁻¹(x)` for a section box.
    pub fn inverse(&self, x: &IntervalBox) -> IntervalBox {
        self.m_inv.mul_vec(&x.sub(&self.p))
    }

    pub fn forward_point(&self, u: &[f64]) -> Vec<f64> {
        let (m, p) = (self.m.mid(), self.p.mid());
        vec![m[0] * u[0] + m[1] * u[1] + p[0], m[2] * u[0] + m[3] * u[1] + p[1]]
    }

    pub fn inverse_point(&self, x: &[f64]) -> Vec<f64> {
        let (mi, p) = (self.m_inv.mid(), self.p.mid());
        let d = [x[0] - p[0], x[1] - p[1]];
        vec![mi[0] * d[0] + mi[1] * d[1], mi[2] * d[0] + mi[3] * d[1]]
    }
}

/// Enclosure of one evaluation of `Pⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEnclosure {
    /// Enclosure of the total time of `n` returns.
    pub return_time: Interval,
    /// Image box in the output coordinates (section or chart).
    pub image: IntervalBox,
    /// Enclosure of `DPⁿ` in the same coordinates, when requested.
    pub derivative: Option<IntervalMatrix>,
}

/// Images of the cells of a grid together with their hull.
#[derive(Clone, Debug)]
pub struct GridImage {
    pub pieces: Vec<(IntervalBox, Result<CrossingEnclosure, PoincareError>)>,
}

impl GridImage {
    /// Hull of all piece images (error if any piece failed).
    pub fn hull(&self) -> Result<CrossingEnclosure, PoincareError> {
        let mut acc: Option<CrossingEnclosure> = None;
        for (_, r) in &self.pieces {
            let r = r.clone()?;
            acc = Some(match acc {
                None => r,
                Some(a) => CrossingEnclosure {
                    return_time: a.return_time.hull(&r.return_time),
                    image: a.image.hull(&r.image)?,
                    derivative: match (a.derivative, r.derivative) {
                        (Some(x), Some(y)) => Some(x.hull(&y)),
                        _ => None,
                    },
                },
            });
        }
        Ok(acc.expect("grids have at least one cell"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Phase {
    /// Moving off the section into `x > 0`.
    Leaving,
    /// In `x > 0` or passing to `x < 0` through `y > 0`.
    Away,
    /// In `x < 0`, heading for the next section crossing.
    Approach,
}

fn embed_matrix() -> IntervalMatrix {
    IntervalMatrix::from_f64(3, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
}

fn project_matrix() -> IntervalMatrix {
    IntervalMatrix::from_f64(2, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0])
}

fn project(b: &IntervalBox) -> IntervalBox {
    IntervalBox::new(vec![b[1], b[2]])
}

/// `I − F e_xᵀ / F_x` over the crossing points, with its x row set to zero
/// (the crossing-point map has vanishing x component).
fn crossing_correction(
    field: &PolyField,
    points: &IntervalBox,
    time: Interval,
) -> Result<IntervalMatrix, PoincareError> {
    let fx = field.eval(points);
    let inv_fx = fx[0].recip().map_err(|_| PoincareError::TransversalityFailure {
        time: time.mid(),
        detail: "x' contains 0".into(),
    })?;
    let mut corr = IntervalMatrix::identity(3);
    for i in 0..3 {
        corr[(i, 0)] -= fx[i] * inv_fx;
    }
    for j in 0..3 {
        corr[(0, j)] = Interval::ZERO;
    }
    Ok(corr)
}

/// A crossing spread over several steps.
struct Straddle {
    /// Hull of the crossing points (x forced to 0).
    points: IntervalBox,
    /// Absolute crossing times.
    window: Interval,
    /// Hull of `DΦ` over the crossing window, when tracked.
    variation: Option<IntervalMatrix>,
}

/// Rigorous return map of a three-dimensional field.
#[derive(Clone, Debug)]
pub struct ReturnMap<'f> {
    integrator: Integrator<'f>,
}

/// Centre crossing and crossing-map derivative of one crossing.
struct Linearization {
    q_center: IntervalBox,
    /// `I − F e_xᵀ / F_x` with its x row set to zero.
    corr: IntervalMatrix,
    /// `corr · DΦ` over the crossing window.
    dq: IntervalMatrix,
}

/// Everything known about one located crossing.
struct Crossing {
    t1: f64,
    t2: f64,
    /// Crossing points (x forced to 0).
    points: IntervalBox,
}

impl<'f> ReturnMap<'f> {
    pub fn new(field: &'f PolyField, settings: IntegratorSettings) -> Result<Self, PoincareError> {
        assert_eq!(field.dim(), 3, "the return map needs a three-dimensional field");
        Ok(ReturnMap {
            integrator: Integrator::new(field, settings)?,
        })
    }

    pub fn settings(&self) -> &IntegratorSettings {
        self.integrator.settings()
    }

    pub fn field(&self) -> &PolyField {
        self.integrator.field()
    }

    /// `Pⁿ` of a section box `(y, z)`.
    pub fn poincare_map(&self, b: &IntervalBox, n: usize) -> Result<CrossingEnclosure, PoincareError> {
        self.chart_poincare(&AffineChart::identity(), b, n, false)
    }

    /// `Pⁿ` and `DPⁿ` of a section box.
    pub fn poincare_with_derivative(&self, b: &IntervalBox, n: usize) -> Result<CrossingEnclosure, PoincareError> {
        self.chart_poincare(&AffineChart::identity(), b, n, true)
    }

    /// Enclosure of `DPⁿ` over a section box.
    pub fn poincare_derivative(&self, b: &IntervalBox, n: usize) -> Result<IntervalMatrix, PoincareError> {
        Ok(self
            .poincare_with_derivative(b, n)?
            .derivative
            .expect("derivative requested"))
    }

    /// Grid version of [`ReturnMap::poincare_map`]; cells run in parallel and
    /// are reported in grid order.
    pub fn poincare_map_grid(&self, b: &IntervalBox, n: usize, grid: (usize, usize)) -> GridImage {
        self.chart_poincare_grid(&AffineChart::identity(), b, n, grid, false)
    }

    pub fn chart_poincare_grid(
        &self,
        chart: &AffineChart,
        b2: &IntervalBox,
        n: usize,
        grid: (usize, usize),
        derivative: bool,
    ) -> GridImage {
        let cells = b2.subdivide(&[grid.0, grid.1]);
        let pieces = cells
            .into_par_iter()
            .map(|c| {
                let r = self.chart_poincare(chart, &c, n, derivative);
                (c, r)
            })
            .collect();
        GridImage { pieces }
    }

    /// `P_Cⁿ = C⁻¹∘Pⁿ∘C` on a chart box, optionally with its derivative.
    pub fn chart_poincare(
        &self,
        chart: &AffineChart,
        b2: &IntervalBox,
        n: usize,
        derivative: bool,
    ) -> Result<CrossingEnclosure, PoincareError> {
        assert!(n >= 1, "iterate must be at least 1");
        if b2.dim() != 2 {
            return Err(PoincareError::NotAdmissible("chart boxes are two-dimensional".into()));
        }
        let section = chart.forward(b2);
        if !SectionSpec.admissible(&section) {
            return Err(PoincareError::NotAdmissible(format!(
                "y not strictly negative on {section:?}"
            )));
        }
        if !check_transversality(&section) {
            return Err(PoincareError::TransversalityFailure {
                time: 0.0,
                detail: format!("-y-z not positive on {section:?}"),
            });
        }
        // C(u) = mid(M)·ū + (M − mid M)(u − ū) + (M ū + p) with the last
        // term split into a point centre and an error box
        let ubar = b2.mid();
        let ubar_box = IntervalBox::from_points(&ubar);
        let mmid = chart.m.mid_matrix();
        let base = chart.m.mul_vec(&ubar_box).add(&chart.p);
        let center2 = base.mid();
        let r0 = b2.sub(&ubar_box);
        let err2 = chart
            .m
            .sub(&mmid)
            .mul_vec(&r0)
            .add(&base.sub(&IntervalBox::from_points(&center2)));
        let c = embed_matrix().mul(&mmid).mid();
        let set = LohnerSet::affine(
            vec![0.0, center2[0], center2[1]],
            c,
            r0.into_vec(),
            vec![Interval::ZERO, err2[0], err2[1]],
        );
        let v0 = derivative.then(|| VariationSet::from_matrix(&embed_matrix().mul(&chart.m)));
        self.iterate(set, v0, n, chart)
    }

    fn iterate(
        &self,
        set: LohnerSet,
        mut variation: Option<VariationSet>,
        n: usize,
        chart: &AffineChart,
    ) -> Result<CrossingEnclosure, PoincareError> {
        let ig = &self.integrator;
        let settings = ig.settings();
        let mut set = ig.prepare(set);
        let mut elapsed = Interval::ZERO;
        let mut phase = Phase::Leaving;
        let mut crossings = 0;
        let budget = TIME_BUDGET * n as f64;
        let tracking = variation.is_some();
        loop {
            if elapsed.hi() > budget {
                return Err(PoincareError::CrossingNotLocated {
                    time: elapsed.mid(),
                    detail: "time budget exhausted".into(),
                });
            }
            if phase == Phase::Approach {
                if let Some((sd, cr)) = self.try_crossing(&set, elapsed)? {
                    crossings += 1;
                    let window = Interval::new(cr.t1, cr.t2)?;
                    if crossings == n {
                        return self.finish(&sd, &cr, window, elapsed, variation.as_ref(), chart);
                    }
                    // restart from the crossing set, now synchronised on the section
                    let lin = self.linearize(&sd, &cr, window, elapsed)?;
                    variation = variation.map(|v| {
                        let vc = sd.advance_variation(window, &v).hull();
                        let mut w = lin.corr.mul(&vc);
                        for j in 0..w.cols() {
                            w[(0, j)] = Interval::ZERO;
                        }
                        VariationSet::from_matrix(&w)
                    });
                    set = ig.prepare(self.restart(&sd, &cr, &lin));
                    phase = Phase::Leaving;
                    continue;
                }
            }
            let h_cap = match phase {
                Phase::Approach => self
                    .center_crossing_estimate(&set.center, settings.max_step * 2.0)
                    .map_or(settings.max_step, |t| (0.5 * t).max(settings.min_step)),
                _ => settings.max_step,
            };
            let sd = ig.controlled_step(&set, h_cap, tracking).map_err(|e| match e {
                IntegratorError::NoEnclosure { step, .. } => IntegratorError::NoEnclosure {
                    time: elapsed.mid(),
                    step,
                },
                other => other,
            })?;
            let full = Interval::new(0.0, sd.h)?;
            let tube = sd.tube(full);
            let mut advance_to = sd.h;
            match phase {
                Phase::Leaving => {
                    if tube[0].lo() <= 0.0 && !(-tube[1] - tube[2]).is_positive() {
                        return Err(PoincareError::TransversalityFailure {
                            time: elapsed.mid(),
                            detail: "x' not positive while leaving the section".into(),
                        });
                    }
                }
                Phase::Away => {
                    if tube[0].lo() <= 0.0 && !tube[1].is_positive() {
                        return Err(PoincareError::CrossingNotLocated {
                            time: elapsed.mid(),
                            detail: format!("tube {tube} meets x = 0 away from y > 0"),
                        });
                    }
                }
                Phase::Approach => {
                    if tube[0].hi() >= 0.0 {
                        // not yet a verifiable crossing: advance as far as x < 0 is certain
                        advance_to = self.last_negative_time(&sd, 0.0, sd.h);
                        if advance_to <= 0.0 {
                            // the set is spread along the flow further than one
                            // step can cover: cross it over several steps
                            let st = self.straddle_crossing(&set, variation.as_ref(), elapsed)?;
                            crossings += 1;
                            let corr = crossing_correction(self.field(), &st.points, st.window)?;
                            if crossings == n {
                                let minv = chart.m_inv();
                                return Ok(CrossingEnclosure {
                                    return_time: st.window,
                                    image: chart.inverse(&project(&st.points)),
                                    derivative: st.variation.map(|w| minv.mul(&project_matrix()).mul(&corr).mul(&w)),
                                });
                            }
                            variation = st.variation.map(|w| VariationSet::from_matrix(&corr.mul(&w)));
                            set = ig.prepare(LohnerSet::from_box(&st.points));
                            elapsed = st.window;
                            phase = Phase::Leaving;
                            continue;
                        }
                    }
                }
            }
            let tau = Interval::point(advance_to);
            variation = variation.map(|v| sd.advance_variation(tau, &v));
            set = sd.advance(tau);
            elapsed += tau;
            let hull = set.hull();
            if !hull.is_bounded() {
                return Err(IntegratorError::Unbounded(elapsed.mid()).into());
            }
            phase = match phase {
                Phase::Leaving if hull[0].is_positive() => Phase::Away,
                Phase::Away if hull[0].is_negative() => Phase::Approach,
                p => p,
            };
        }
    }

    /// Crosses a set whose points are all in `x < 0` but which cannot be
    /// carried across the section in one step. Each step is cut into
    /// `STRADDLE_PIECES` time pieces; every piece whose tube may meet `x = 0`
    /// must have `x' > 0` and `y < 0`, so every trajectory crosses exactly once,
    /// and the crossing points lie in the hull of those tubes. Stops when the
    /// whole set is in `x > 0`. The hull is then intersected with the
    /// mean-value form around the crossing of the set's centre.
    fn straddle_crossing(
        &self,
        set: &LohnerSet,
        variation: Option<&VariationSet>,
        elapsed: Interval,
    ) -> Result<Straddle, PoincareError> {
        const STRADDLE_PIECES: usize = 16;
        const MAX_STEPS: usize = 1000;
        const STRADDLE_STEP: f64 = 0.02;
        let ig = &self.integrator;
        let start = set.clone();
        let mut set = set.clone();
        let mut v = variation.cloned();
        let mut local = VariationSet::identity(3);
        let mut now = elapsed;
        let mut points: Option<IntervalBox> = None;
        let mut window: Option<Interval> = None;
        let mut w: Option<IntervalMatrix> = None;
        let mut w_local: Option<IntervalMatrix> = None;
        let hull_into = |acc: &mut Option<IntervalMatrix>, d: IntervalMatrix| {
            *acc = Some(match acc.take() {
                None => d,
                Some(x) => x.hull(&d),
            });
        };
        for _ in 0..MAX_STEPS {
            let sd = ig.controlled_step(&set, ig.settings().max_step.min(STRADDLE_STEP), true)?;
            let full = Interval::new(0.0, sd.h)?;
            for piece in full.split(STRADDLE_PIECES) {
                let tube = sd.tube(piece);
                if tube[0].is_negative() || tube[0].is_positive() {
                    continue;
                }
                let time = now + piece;
                if !(-tube[1] - tube[2]).is_positive() {
                    return Err(PoincareError::TransversalityFailure {
                        time: time.mid(),
                        detail: format!("x' not positive on the crossing tube {tube}"),
                    });
                }
                if !tube[1].is_negative() {
                    return Err(PoincareError::CrossingNotLocated {
                        time: time.mid(),
                        detail: "crossing tube leaves the half-plane y < 0".into(),
                    });
                }
                let mut p = tube;
                p[0] = Interval::ZERO;
                points = Some(match points {
                    None => p,
                    Some(q) => q.hull(&p)?,
                });
                window = Some(window.map_or(time, |t| t.hull(&time)));
                hull_into(&mut w_local, sd.advance_variation(piece, &local).hull());
                if let Some(v) = &v {
                    hull_into(&mut w, sd.advance_variation(piece, v).hull());
                }
            }
            let h = Interval::point(sd.h);
            v = v.map(|v| sd.advance_variation(h, &v));
            local = sd.advance_variation(h, &local);
            set = sd.advance(h);
            now += h;
            if set.hull()[0].is_positive() {
                let (Some(mut points), Some(window), Some(w_local)) = (points, window, w_local) else {
                    return Err(PoincareError::CrossingNotLocated {
                        time: now.mid(),
                        detail: "set passed the section without a located crossing".into(),
                    });
                };
                // mean-value form, valid when the centre belongs to the set
                let centred = start.r0.iter().chain(&start.r).all(|r| r.contains(0.0));
                if centred {
                    let q_c = self.point_crossing(&start.center, elapsed)?;
                    let corr = crossing_correction(self.field(), &points, window)?;
                    let dq = corr.mul(&w_local);
                    let mut b = IntervalBox::new(vec![Interval::ZERO, q_c[0], q_c[1]])
                        .add(&dq.mul(&start.b_matrix()).mul_vec(&IntervalBox::new(start.r.clone())));
                    if let Some(c) = start.c_matrix() {
                        b = b.add(&dq.mul(&c).mul_vec(&IntervalBox::new(start.r0.clone())));
                    }
                    b[0] = Interval::ZERO;
                    points = points.intersect(&b)?.ok_or_else(|| PoincareError::CrossingNotLocated {
                        time: window.mid(),
                        detail: "crossing enclosures are inconsistent".into(),
                    })?;
                }
                return Ok(Straddle {
                    points,
                    window,
                    variation: w,
                });
            }
        }
        Err(PoincareError::CrossingNotLocated {
            time: now.mid(),
            detail: "set does not finish crossing the section".into(),
        })
    }

    /// Crossing point `(y, z)` of the trajectory of a single point in `x < 0`.
    fn point_crossing(&self, c: &[f64], elapsed: Interval) -> Result<IntervalBox, PoincareError> {
        let ig = &self.integrator;
        let s = ig.settings();
        let mut set = LohnerSet::from_box(&IntervalBox::from_points(c));
        let mut now = elapsed;
        while now.hi() <= elapsed.hi() + TIME_BUDGET {
            if let Some((sd, cr)) = self.try_crossing(&set, now)? {
                let window = Interval::new(cr.t1, cr.t2)?;
                return Ok(self.linearize(&sd, &cr, window, now)?.q_center);
            }
            let h_cap = self
                .center_crossing_estimate(&set.center, s.max_step * 2.0)
                .map_or(s.max_step, |t| (0.5 * t).max(s.min_step));
            let sd = ig.controlled_step(&set, h_cap, false)?;
            let mut advance_to = sd.h;
            if sd.tube(Interval::new(0.0, sd.h)?)[0].hi() >= 0.0 {
                advance_to = self.last_negative_time(&sd, 0.0, sd.h);
                if advance_to <= 0.0 {
                    break;
                }
            }
            set = sd.advance(Interval::point(advance_to));
            now += Interval::point(advance_to);
        }
        Err(PoincareError::CrossingNotLocated {
            time: now.mid(),
            detail: "crossing of the centre not located".into(),
        })
    }

    /// Largest `τ ≤ hi` (by bisection) with `x < 0` on the tube over `[lo, τ]`;
    /// `lo` is returned when no progress is possible.
    fn last_negative_time(&self, sd: &StepData<'_>, lo: f64, hi: f64) -> f64 {
        let mut good = lo;
        let mut bad = hi;
        for _ in 0..MAX_BISECTIONS {
            if bad - good <= CROSSING_TIME_WIDTH * 0.5 {
                break;
            }
            let mid = 0.5 * (good + bad);
            if mid <= good || mid >= bad {
                break;
            }
            let tube = sd.tube(Interval::new(good, mid).expect("ordered"));
            if tube[0].is_negative() {
                good = mid;
            } else {
                bad = mid;
            }
        }
        good
    }

    /// Non-validated estimate of the time until the centre reaches `x = 0`
    /// from `x < 0`, searched up to `horizon`.
    fn center_crossing_estimate(&self, center: &[f64], horizon: f64) -> Option<f64> {
        let series = self.field().taylor(center, self.settings().taylor_order, false);
        let h = self.integrator.propose_step(center).min(horizon);
        let x_at = |t: f64| series.eval(t)[0];
        if x_at(0.0) >= 0.0 {
            return Some(0.0);
        }
        // sample the polynomial within its trusted range
        let samples = 32;
        let mut prev = 0.0;
        for i in 1..=samples {
            let t = h * 2.0 * i as f64 / samples as f64;
            if x_at(t) >= 0.0 {
                let (mut a, mut b) = (prev, t);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if x_at(m) < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                return Some(b);
            }
            prev = t;
        }
        None
    }

    /// Attempts a step that crosses the section. `Ok(None)` means the
    /// crossing is not near enough yet.
    fn try_crossing(
        &self,
        set: &LohnerSet,
        elapsed: Interval,
    ) -> Result<Option<(StepData<'_>, Crossing)>, PoincareError> {
        let ig = &self.integrator;
        let s = ig.settings();
        let t_star = match self.center_crossing_estimate(&set.center, s.max_step) {
            Some(t) => t,
            None => return Ok(None),
        };
        let hull = set.hull();
        let speed = (-(set.center[1]) - set.center[2]).max(1e-3);
        let mut delta = 4.0 * hull[0].width() / speed + 1e-9 * (1.0 + t_star);
        for _ in 0..8 {
            let h = t_star + delta;
            let sd = match ig.step_data(set, h, true) {
                Ok(sd) => sd,
                // too long for an enclosure: let ordinary steps approach
                Err(IntegratorError::NoEnclosure { .. }) => return Ok(None),
                Err(e) => return Err(e.into()),
            };
            let end = sd.enclosure_at(Interval::point(h));
            if end[0].is_positive() {
                return self.locate(sd, elapsed).map(Some);
            }
            delta *= 4.0;
        }
        Ok(None)
    }

    /// Brackets the crossing inside a step whose endpoint has `x > 0`.
    fn locate<'s>(&self, sd: StepData<'s>, elapsed: Interval) -> Result<(StepData<'s>, Crossing), PoincareError> {
        let t1 = self.last_negative_time(&sd, 0.0, sd.h);
        // smallest time with x > 0 at the endpoint enclosure
        let (mut lo, mut hi) = (t1, sd.h);
        for _ in 0..MAX_BISECTIONS {
            if hi - lo <= CROSSING_TIME_WIDTH * 0.5 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if sd.enclosure_at(Interval::point(mid))[0].is_positive() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let t2 = hi;
        let window = Interval::new(t1, t2)?;
        let tube = sd.tube(window);
        let time = (elapsed + window).mid();
        if !(-tube[1] - tube[2]).is_positive() {
            return Err(PoincareError::TransversalityFailure {
                time,
                detail: format!("x' enclosure {:?} touches 0 at the crossing", -tube[1] - tube[2]),
            });
        }
        if !tube[1].is_negative() {
            return Err(PoincareError::CrossingNotLocated {
                time,
                detail: "crossing bracket leaves the half-plane y < 0".into(),
            });
        }
        let mut points = tube;
        points[0] = Interval::ZERO;
        Ok((sd, Crossing { t1, t2, points }))
    }

    /// Tight crossing point of the centre and the derivative `DQ` of the
    /// crossing-point map over the whole set.
    fn linearize(
        &self,
        sd: &StepData<'_>,
        cr: &Crossing,
        window: Interval,
        elapsed: Interval,
    ) -> Result<Linearization, PoincareError> {
        // centre's own crossing inside the bracket
        let (mut lo, mut hi) = (cr.t1, cr.t2);
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let x = sd.center_at(Interval::point(mid))[0];
            if x.is_negative() {
                lo = mid;
            } else if x.is_positive() {
                hi = mid;
            } else {
                break;
            }
        }
        let q_center = project(&sd.center_at(Interval::new(lo, hi)?))
            .intersect(&project(&cr.points))?
            .ok_or_else(|| PoincareError::CrossingNotLocated {
                time: (elapsed + window).mid(),
                detail: "centre crossing outside the set crossing".into(),
            })?;

        // DQ = (I − F e_xᵀ / F_x) · DΦ over the bracket; its x row vanishes
        let corr = crossing_correction(self.field(), &cr.points, elapsed + window)?;
        let dq = corr.mul(&sd.variation_at(window));
        Ok(Linearization { q_center, corr, dq })
    }

    /// The crossing set `Q(X)` as a new set on the section: the mean-value
    /// form `Q(c) + DQ·(C r₀ + B r)` keeps the linear dependence on the
    /// earlier parameters, unless the plain crossing box is tighter.
    fn restart(&self, sd: &StepData<'_>, cr: &Crossing, lin: &Linearization) -> LohnerSet {
        let start = &sd.start;
        let mut blocks: Vec<IntervalMatrix> = Vec::new();
        let mut params: Vec<Interval> = Vec::new();
        if let Some(c) = start.c_matrix() {
            blocks.push(lin.dq.mul(&c));
            params.extend(start.r0.iter().copied());
        }
        blocks.push(lin.dq.mul(&start.b_matrix()));
        params.extend(start.r.iter().copied());
        let m = params.len();
        let mut k = IntervalMatrix::zeros(3, m);
        let mut j0 = 0;
        for block in &blocks {
            for i in 0..3 {
                for j in 0..block.cols() {
                    k[(i, j0 + j)] = block[(i, j)];
                }
            }
            j0 += block.cols();
        }
        let mut kmid = k.mid();
        kmid[..m].iter_mut().for_each(|v| *v = 0.0);
        let center = vec![0.0, lin.q_center[0].mid(), lin.q_center[1].mid()];
        let q3 = IntervalBox::new(vec![Interval::ZERO, lin.q_center[0], lin.q_center[1]]);
        let mut err = q3.sub(&IntervalBox::from_points(&center)).add(
            &k.sub(&IntervalMatrix::from_f64(3, m, &kmid))
                .mul_vec(&IntervalBox::new(params.clone())),
        );
        err[0] = Interval::ZERO;
        let affine = LohnerSet::affine(center, kmid, params, err.into_vec());
        if cr.points.width() < affine.hull().width() {
            LohnerSet::from_box(&cr.points)
        } else {
            affine
        }
    }

    /// Final image (both enclosures intersected) and derivative.
    fn finish(
        &self,
        sd: &StepData<'_>,
        cr: &Crossing,
        window: Interval,
        elapsed: Interval,
        variation: Option<&VariationSet>,
        chart: &AffineChart,
    ) -> Result<CrossingEnclosure, PoincareError> {
        let minv = chart.m_inv();
        let image_a = chart.inverse(&project(&cr.points));
        let lin = self.linearize(sd, cr, window, elapsed)?;
        let lead = minv.mul(&project_matrix()).mul(&lin.dq);
        let start = &sd.start;
        let mut image_b = minv
            .mul_vec(&lin.q_center.sub(&chart.p))
            .add(&lead.mul(&start.b_matrix()).mul_vec(&IntervalBox::new(start.r.clone())));
        if let Some(c) = start.c_matrix() {
            image_b = image_b.add(&lead.mul(&c).mul_vec(&IntervalBox::new(start.r0.clone())));
        }
        let image = match image_a.intersect(&image_b)? {
            Some(i) => i,
            None => {
                return Err(PoincareError::CrossingNotLocated {
                    time: (elapsed + window).mid(),
                    detail: "image enclosures are inconsistent".into(),
                })
            }
        };
        let derivative = variation.map(|v| {
            let vc = sd.advance_variation(window, v).hull();
            minv.mul(&project_matrix()).mul(&lin.corr).mul(&vc)
        });
        Ok(CrossingEnclosure {
            return_time: elapsed + window,
            image,
            derivative,
        })
    }
}
