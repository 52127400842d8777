//! Interval Newton proofs for fixed points of `fⁿ`, forward invariance of a
//! parallelogram, and exclusion of periodic orbits.
//!
//! Fixed points of `fⁿ` are zeros of `G = fⁿ − id`, and the operator is
//! `N(x₀, X) = x₀ − [DG(X)]⁻¹ G(x₀)` with `DG(X) = Dfⁿ(X) − I`. If
//! `N ⊂ int X` then `X` holds exactly one fixed point (and it lies in `N`); if
//! `N ∩ X = ∅` there is none.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{IntervalBox, IntervalError, IntervalMatrix};
use crate::planemap::{MapError, PlaneMap};
use crate::poincare::AffineChart;

/// Largest number of offending boxes kept in a report.
pub const MAX_LISTED: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NewtonError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error("no uniqueness proof after {rounds} refinement rounds")]
    RefinementStalled { rounds: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NewtonVerdict {
    UniqueFixedPoint,
    Inconclusive,
    NoFixedPoint,
}

/// One application of the interval Newton operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonResult {
    pub x0: Vec<f64>,
    pub search_box: IntervalBox,
    pub iterate: usize,
    /// `N(x₀, X)`; absent when `DG(X)` could not be inverted.
    pub operator: Option<IntervalBox>,
    pub verdict: NewtonVerdict,
    /// `N ∩ X` when a unique fixed point was proved.
    pub enclosure: Option<IntervalBox>,
}

fn newton_operator<M: PlaneMap + ?Sized>(
    map: &M,
    x0: &[f64],
    dg: &IntervalMatrix,
    n: usize,
) -> Result<Option<IntervalBox>, NewtonError> {
    let xb = IntervalBox::from_points(x0);
    let g = map.image(&xb, n)?.sub(&xb);
    let inv = match dg.inverse() {
        Ok(inv) => inv,
        Err(IntervalError::SingularEnclosure) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    Ok(Some(xb.sub(&inv.mul_vec(&g))))
}

fn judge(x0: &[f64], x: &IntervalBox, n: usize, op: Option<IntervalBox>) -> Result<NewtonResult, NewtonError> {
    let (verdict, enclosure) = match &op {
        None => (NewtonVerdict::Inconclusive, None),
        Some(nb) if nb.strictly_inside(x) => (NewtonVerdict::UniqueFixedPoint, x.intersect(nb)?),
        Some(nb) if nb.disjoint(x) => (NewtonVerdict::NoFixedPoint, None),
        Some(_) => (NewtonVerdict::Inconclusive, None),
    };
    Ok(NewtonResult {
        x0: x0.to_vec(),
        search_box: x.clone(),
        iterate: n,
        operator: op,
        verdict,
        enclosure,
    })
}

fn minus_identity(d: &IntervalMatrix) -> IntervalMatrix {
    d.sub(&IntervalMatrix::identity(d.rows()))
}

/// `N(x₀, X)` for fixed points of `fⁿ` and its verdict.
pub fn interval_newton<M: PlaneMap + ?Sized>(
    map: &M,
    x0: &[f64],
    x: &IntervalBox,
    n: usize,
) -> Result<NewtonResult, NewtonError> {
    assert!(x.contains_point(x0), "x0 must lie in the search box");
    let (_, d) = map.image_with_derivative(x, n)?;
    let op = newton_operator(map, x0, &minus_identity(&d), n)?;
    judge(x0, x, n, op)
}

/// Same operator centred at the midpoint of `X`, with `Dfⁿ(X)` enclosed by
/// the hull of its enclosures over a `subdivision` grid of `X`.
pub fn newton_divided<M: PlaneMap + ?Sized>(
    map: &M,
    x: &IntervalBox,
    n: usize,
    subdivision: &[usize],
) -> Result<NewtonResult, NewtonError> {
    let cells = x.subdivide(subdivision);
    let derivs: Vec<Result<IntervalMatrix, MapError>> = cells
        .par_iter()
        .map(|c| map.image_with_derivative(c, n).map(|(_, d)| d))
        .collect();
    let mut hull: Option<IntervalMatrix> = None;
    for d in derivs {
        let d = d?;
        hull = Some(match hull {
            None => d,
            Some(h) => h.hull(&d),
        });
    }
    let dg = minus_identity(&hull.expect("grids are non-empty"));
    let x0 = x.mid();
    let op = newton_operator(map, &x0, &dg, n)?;
    judge(&x0, x, n, op)
}

/// A proved fixed point of `fⁿ` with its whole orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryPoint {
    /// Final, successful Newton step.
    pub newton: NewtonResult,
    /// Number of refinement rounds used.
    pub rounds: usize,
    /// Enclosures of `fⁱ(x*)` for `i = 0..n`.
    pub orbit: Vec<IntervalBox>,
}

impl StationaryPoint {
    /// Whether the orbit enclosures are pairwise disjoint, which proves the
    /// fundamental period is `n`.
    pub fn orbit_distinct(&self) -> bool {
        let o = &self.orbit;
        (0..o.len()).all(|i| (i + 1..o.len()).all(|j| o[i].disjoint(&o[j])))
    }
}

/// Refines `x0` by repeated Newton steps on shrinking boxes until the
/// operator proves a unique fixed point of `fⁿ`, then maps the enclosure
/// around the orbit.
///
/// `radius` is the half-width of the first search box. Each later box is
/// centred at the midpoint of the last operator value with twice its
/// half-width (floored at a few ulps).
pub fn any_stationary_point<M: PlaneMap + ?Sized>(
    map: &M,
    x0: &[f64],
    n: usize,
    radius: &[f64],
) -> Result<StationaryPoint, NewtonError> {
    const ROUNDS: usize = 20;
    let mut c = x0.to_vec();
    let mut r = radius.to_vec();
    for round in 1..=ROUNDS {
        let x = IntervalBox::centered(&c, &r);
        let res = interval_newton(map, &c, &x, n)?;
        if res.verdict == NewtonVerdict::UniqueFixedPoint {
            let enclosure = res.enclosure.clone().expect("unique point has an enclosure");
            let mut orbit = vec![polish(map, enclosure, n)?];
            for i in 1..n {
                let pushed = map.image(&orbit[i - 1], 1)?;
                orbit.push(polish(map, pushed, n)?);
            }
            return Ok(StationaryPoint {
                newton: res,
                rounds: round,
                orbit,
            });
        }
        match res.operator {
            Some(nb) if nb.is_bounded() => {
                c = nb.mid();
                r = nb
                    .rads()
                    .iter()
                    .zip(&c)
                    .map(|(q, m)| (2.0 * q).max(64.0 * f64::EPSILON * m.abs().max(1e-3)))
                    .collect();
            }
            _ => {
                // singular or unbounded: retry closer to the centre
                r.iter_mut().for_each(|q| *q *= 0.25);
            }
        }
        log::debug!("newton round {round}: centre {c:?}, radius {r:?}");
    }
    Err(NewtonError::RefinementStalled { rounds: ROUNDS })
}

/// Tightens an enclosure `B` of a fixed point of `fⁿ`: the Newton operator
/// on a slightly inflated copy of `B` proves uniqueness there, so its value
/// (intersected with `B`) still encloses the same point. Stops when the
/// width no longer shrinks.
fn polish<M: PlaneMap + ?Sized>(map: &M, mut b: IntervalBox, n: usize) -> Result<IntervalBox, NewtonError> {
    for _ in 0..4 {
        let x = b.inflate(0.1, 0.0);
        let r = interval_newton(map, &x.mid(), &x, n)?;
        let Some(e) = r.enclosure else { break };
        let Some(t) = e.intersect(&b)? else { break };
        if t.width() >= 0.9 * b.width() {
            b = t;
            break;
        }
        b = t;
    }
    Ok(b)
}

/// Maps every cell under `fⁿ` and halves the pieces whose image fails
/// `accept` (or cannot be computed) along the first coordinate, up to
/// `refinements` times. Returns the accepted pieces with their images and the
/// pieces that still fail, each in a deterministic order.
#[allow(clippy::type_complexity)]
fn settle<M, F>(
    map: &M,
    cells: Vec<IntervalBox>,
    n: usize,
    refinements: usize,
    accept: F,
) -> (
    Vec<(IntervalBox, IntervalBox)>,
    Vec<(IntervalBox, Result<IntervalBox, MapError>)>,
)
where
    M: PlaneMap + ?Sized,
    F: Fn(&IntervalBox, &IntervalBox) -> bool + Sync,
{
    let settle_one = |cell: IntervalBox| {
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        let mut todo = vec![(cell, 0)];
        while let Some((c, depth)) = todo.pop() {
            match map.image(&c, n) {
                Ok(img) if accept(&c, &img) => accepted.push((c, img)),
                other if depth < refinements => {
                    log::debug!(
                        "refining {c}: {}",
                        other.as_ref().map_or_else(|e| e.to_string(), |i| i.to_string())
                    );
                    for h in c[0].split(2).into_iter().rev() {
                        let mut piece = c.clone();
                        piece[0] = h;
                        todo.push((piece, depth + 1));
                    }
                }
                other => rejected.push((c, other)),
            }
        }
        (accepted, rejected)
    };
    let outcomes: Vec<_> = cells.into_par_iter().map(settle_one).collect();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for (a, r) in outcomes {
        accepted.extend(a);
        rejected.extend(r);
    }
    (accepted, rejected)
}

/// A parallelogram `C(B)` given by an affine chart `C` and a box `B` in its
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartSet {
    pub chart: AffineChart,
    pub chart_box: IntervalBox,
}

impl ChartSet {
    /// Enclosure of `C(B)` in section coordinates.
    pub fn section_hull(&self) -> IntervalBox {
        self.chart.forward(&self.chart_box)
    }
}

/// Outcome of checking `f(A) ⊂ int A` cell by cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub grid: Vec<usize>,
    /// Number of times a failing cell may be halved.
    pub refinements: usize,
    /// Cells of the initial grid.
    pub cells: usize,
    /// Pieces after refinement.
    pub pieces: usize,
    /// Pieces whose image lies in the interior.
    pub verified: usize,
    /// Offending pieces (domain in chart coordinates and the failure), at
    /// most [`MAX_LISTED`].
    pub offending: Vec<(IntervalBox, String)>,
    pub offending_count: usize,
    /// Hull of all cell images, in chart coordinates, when every cell mapped.
    pub image_hull: Option<IntervalBox>,
    pub invariant: bool,
}

/// Checks `f(A) ⊂ int A` where `map` acts in the chart coordinates of `A`
/// and `a_box` is `A` in those coordinates.
pub fn inside<M: PlaneMap + ?Sized>(
    map: &M,
    a_box: &IntervalBox,
    grid: &[usize],
    refinements: usize,
) -> InvarianceReport {
    let cells = a_box.subdivide(grid);
    let total = cells.len();
    let (accepted, rejected) = settle(map, cells, 1, refinements, |_, img| img.strictly_inside(a_box));
    let mapped_all = rejected.iter().all(|(_, r)| r.is_ok());
    let offending_count = rejected.len();
    let offending = rejected
        .iter()
        .take(MAX_LISTED)
        .map(|(cell, r)| {
            let why = match r {
                Ok(img) => format!("image {img} leaves the interior"),
                Err(e) => e.to_string(),
            };
            (cell.clone(), why)
        })
        .collect();
    let hull = accepted
        .iter()
        .map(|(_, img)| img.clone())
        .chain(rejected.into_iter().filter_map(|(_, r)| r.ok()))
        .reduce(|a, b| a.hull(&b).expect("same dimension"));
    InvarianceReport {
        grid: grid.to_vec(),
        refinements,
        cells: total,
        pieces: accepted.len() + offending_count,
        verified: accepted.len(),
        offending,
        offending_count,
        image_hull: if mapped_all { hull } else { None },
        invariant: offending_count == 0,
    }
}

/// Pieces of `A` whose `fⁿ`-image may meet the piece itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub grid: Vec<usize>,
    /// Number of times a cell may be halved before it is kept.
    pub refinements: usize,
    pub cells: usize,
    /// Retained pieces in chart coordinates, ordered by their lower corner.
    pub retained: Vec<IntervalBox>,
    /// Number of retained cells whose image could not be computed.
    pub unverified: usize,
    /// Hull of the retained cells mapped to section coordinates (`None` if
    /// every cell was excluded).
    pub s: Option<IntervalBox>,
}

/// Every fixed point of `fⁿ` in `A` lies in a cell `Aᵢ` with
/// `fⁿ(Aᵢ) ∩ Aᵢ ≠ ∅`; this collects those cells and the hull `S` of their
/// section images. A cell that fails is halved and its halves are judged
/// on their own; pieces that cannot be mapped are kept.
pub fn what_is_not_mapped_outside<M: PlaneMap + ?Sized>(
    map: &M,
    chart: &AffineChart,
    a_box: &IntervalBox,
    n: usize,
    grid: &[usize],
    refinements: usize,
) -> Residual {
    let cells = a_box.subdivide(grid);
    let total = cells.len();
    let (_, kept) = settle(map, cells, n, refinements, |c, img| img.disjoint(c));
    let unverified = kept.iter().filter(|(_, r)| r.is_err()).count();
    for (c, r) in &kept {
        if let Err(e) = r {
            log::warn!("piece {c} kept: {e}");
        }
    }
    let mut retained: Vec<IntervalBox> = kept.into_iter().map(|(c, _)| c).collect();
    retained.sort_by(|p, q| {
        (p[1].lo(), p[0].lo())
            .partial_cmp(&(q[1].lo(), q[0].lo()))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let s = retained
        .iter()
        .map(|c| chart.forward(c))
        .reduce(|a, b| a.hull(&b).expect("same dimension"));
    Residual {
        grid: grid.to_vec(),
        refinements,
        cells: total,
        retained,
        unverified,
        s,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionVerdict {
    Excluded,
    Unproven,
}

/// The exclusion argument for fundamental period `n` in `A`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusionReport {
    pub iterate: usize,
    pub residual: Residual,
    /// Uniqueness of the fixed point of `fⁿ` in `S`.
    pub newton_iterate: Option<NewtonResult>,
    /// Uniqueness of the fixed point of `f` in `S`.
    pub newton_map: Option<NewtonResult>,
    pub verdict: ExclusionVerdict,
    /// The logical chain, or the stage that failed.
    pub argument: Vec<String>,
}

/// Proves that no point of `A` has fundamental period `n > 1`.
///
/// `chart_map` acts in the chart of `A`; `section_map` is the same map in
/// the coordinates in which `S` is expressed (the section). `S` is the hull
/// of the retained cells; if `S` is empty there is no fixed point of `fⁿ` at
/// all, otherwise both `fⁿ` and `f` must have a unique fixed point in `S`,
/// which then coincide, so every fixed point of `fⁿ` in `A` has period 1.
pub fn no_period_n<C, S>(
    chart_map: &C,
    section_map: &S,
    set: &ChartSet,
    n: usize,
    grid: &[usize],
    refinements: usize,
    subdivision: &[usize],
) -> Result<ExclusionReport, NewtonError>
where
    C: PlaneMap + ?Sized,
    S: PlaneMap + ?Sized,
{
    assert!(n >= 2, "period 1 cannot be excluded this way");
    let residual = what_is_not_mapped_outside(chart_map, &set.chart, &set.chart_box, n, grid, refinements);
    let mut argument = vec![format!(
        "every fixed point of P^{n} in A lies in a piece A_i whose image P^{n}(A_i) meets A_i; {} pieces of the {} grid cells remain",
        residual.retained.len(),
        residual.cells
    )];
    let Some(s) = residual.s.clone() else {
        argument.push(format!("no cell remains, so P^{n} has no fixed point in A"));
        return Ok(ExclusionReport {
            iterate: n,
            residual,
            newton_iterate: None,
            newton_map: None,
            verdict: ExclusionVerdict::Excluded,
            argument,
        });
    };
    argument.push(format!("the remaining cells lie in S = {s}"));
    if residual.unverified > 0 {
        argument.push(format!(
            "{} cells could not be mapped and were kept",
            residual.unverified
        ));
    }
    let unproven = |mut argument: Vec<String>, stage: String, a, b| ExclusionReport {
        iterate: n,
        residual: residual.clone(),
        newton_iterate: a,
        newton_map: b,
        verdict: ExclusionVerdict::Unproven,
        argument: {
            argument.push(stage);
            argument
        },
    };
    let ni = newton_divided(section_map, &s, n, subdivision);
    let ni = match ni {
        Ok(r) if r.verdict == NewtonVerdict::UniqueFixedPoint => r,
        Ok(r) => {
            let msg = format!("stage failed: no uniqueness proof for P^{n} on S ({:?})", r.verdict);
            return Ok(unproven(argument, msg, Some(r), None));
        }
        Err(e) => {
            return Ok(unproven(
                argument,
                format!("stage failed: Newton for P^{n} on S: {e}"),
                None,
                None,
            ))
        }
    };
    argument.push(format!("P^{n} has a unique fixed point in S"));
    let n1 = newton_divided(section_map, &s, 1, subdivision);
    let n1 = match n1 {
        Ok(r) if r.verdict == NewtonVerdict::UniqueFixedPoint => r,
        Ok(r) => {
            let msg = format!("stage failed: no uniqueness proof for P on S ({:?})", r.verdict);
            return Ok(unproven(argument, msg, Some(ni), Some(r)));
        }
        Err(e) => {
            return Ok(unproven(
                argument,
                format!("stage failed: Newton for P on S: {e}"),
                Some(ni),
                None,
            ))
        }
    };
    argument.push(format!("P has a unique fixed point in S, which is also fixed by P^{n}"));
    argument.push(format!(
        "hence the only fixed point of P^{n} in A is the fixed point of P, and no point of A has fundamental period {n}"
    ));
    Ok(ExclusionReport {
        iterate: n,
        residual,
        newton_iterate: Some(ni),
        newton_map: Some(n1),
        verdict: ExclusionVerdict::Excluded,
        argument,
    })
}
