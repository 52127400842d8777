//! h-sets, horizontal covering relations and the loops built from them.
//!
//! An h-set is a rectangle `N = [a,b]×[−r,r]` in chart coordinates `(u, v)`
//! with left/right edges `L = {a}×[−r,r]`, `R = {b}×[−r,r]`, horizontal
//! boundary `H = [a,b]×{±r}` and sides `S_L = {u < a}`, `S_R = {u > b}`.
//! `N₀` covers `N₁` horizontally under `f` when
//!
//! * `f(N₀) ⊂ (S_L ∪ N₁ ∪ S_R) ∖ H`, and
//! * `f(L) ⊂ S_L, f(R) ⊂ S_R` or `f(L) ⊂ S_R, f(R) ⊂ S_L`.
//!
//! A closed loop of coverings forces a periodic point following the loop.
//! Every check here uses strict comparisons of closed enclosures against the
//! open target sets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{Interval, IntervalBox, IntervalError};
use crate::planemap::{MapError, PlaneMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoveringError {
    #[error("invalid h-set {name}: {reason}")]
    InvalidHSet { name: String, reason: String },
    #[error("image of {piece} is {image}, which meets the horizontal boundary of {target}")]
    HorizontalBoundary {
        target: String,
        piece: IntervalBox,
        image: IntervalBox,
    },
    #[error("image of the {edge} edge piece {piece} is {image}, not strictly inside one side of {target}")]
    EdgeNotInSide {
        edge: String,
        target: String,
        piece: IntervalBox,
        image: IntervalBox,
    },
    #[error("the evidence does not cover the {part} of {source_set}")]
    IncompleteCover { part: String, source_set: String },
    #[error("the map failed on {piece}: {error}")]
    Map { piece: IntervalBox, error: MapError },
    #[error("no loop of total period {0} can be built from the given edges")]
    PeriodNotConstructible(usize),
    #[error("the loop does not close: {0}")]
    BrokenLoop(String),
    #[error("fundamental period cannot be justified: {0}")]
    JustificationUnavailable(String),
    #[error(transparent)]
    Interval(#[from] IntervalError),
}

/// A two-dimensional h-set `[c−w, c+w]×[−r, r]` in chart coordinates.
///
/// The defining numbers are kept as intervals so that decimal constants can
/// be enclosed exactly; all tests use the outer box for sources and the inner
/// bounds for targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HSet {
    pub name: String,
    pub center: Interval,
    pub half_width: Interval,
    pub r: Interval,
}

impl HSet {
    pub fn new(name: &str, center: Interval, half_width: Interval, r: Interval) -> Result<Self, CoveringError> {
        let bad = |reason: &str| CoveringError::InvalidHSet {
            name: name.to_string(),
            reason: reason.to_string(),
        };
        if !half_width.is_positive() {
            return Err(bad("half width must be positive"));
        }
        if !r.is_positive() {
            return Err(bad("r must be positive"));
        }
        Ok(HSet {
            name: name.to_string(),
            center,
            half_width,
            r,
        })
    }

    /// Builds `[center ± half_width]×[±r]` from decimal literals.
    pub fn from_decimals(name: &str, center: &str, half_width: &str, r: &str) -> Result<Self, CoveringError> {
        HSet::new(
            name,
            Interval::from_decimal(center)?,
            Interval::from_decimal(half_width)?,
            Interval::from_decimal(r)?,
        )
    }

    /// Enclosure of the left end `a`.
    pub fn a(&self) -> Interval {
        self.center - self.half_width
    }

    /// Enclosure of the right end `b`.
    pub fn b(&self) -> Interval {
        self.center + self.half_width
    }

    fn v_outer(&self) -> Interval {
        Interval::new(-self.r.hi(), self.r.hi()).expect("r is positive")
    }

    /// Box containing `N`.
    pub fn body(&self) -> IntervalBox {
        IntervalBox::new(vec![
            Interval::new(self.a().lo(), self.b().hi()).expect("a < b"),
            self.v_outer(),
        ])
    }

    /// Box containing `L(N)`.
    pub fn left_edge(&self) -> IntervalBox {
        IntervalBox::new(vec![self.a(), self.v_outer()])
    }

    /// Box containing `R(N)`.
    pub fn right_edge(&self) -> IntervalBox {
        IntervalBox::new(vec![self.b(), self.v_outer()])
    }

    /// `img ⊂ S_L(N)`.
    pub fn in_left_side(&self, img: &IntervalBox) -> bool {
        img[0].hi() < self.a().lo()
    }

    /// `img ⊂ S_R(N)`.
    pub fn in_right_side(&self, img: &IntervalBox) -> bool {
        img[0].lo() > self.b().hi()
    }

    /// `img ⊂ [a,b]-independent strip |v| < r`.
    pub fn in_open_strip(&self, img: &IntervalBox) -> bool {
        img[1].lo() > -self.r.lo() && img[1].hi() < self.r.lo()
    }

    /// `img ⊂ (S_L ∪ N ∪ S_R) ∖ H`.
    pub fn avoids_horizontal_boundary(&self, img: &IntervalBox) -> bool {
        self.in_left_side(img) || self.in_right_side(img) || self.in_open_strip(img)
    }

    /// `img ⊂ int N`.
    pub fn contains_in_interior(&self, img: &IntervalBox) -> bool {
        img[0].lo() > self.a().hi() && img[0].hi() < self.b().lo() && self.in_open_strip(img)
    }

    /// Whether two h-sets are provably disjoint.
    pub fn disjoint(&self, other: &HSet) -> bool {
        self.b().hi() < other.a().lo()
            || other.b().hi() < self.a().lo()
            || self.r.hi() < -other.r.hi()
            || other.r.hi() < -self.r.hi()
    }
}

/// Which side the image of the left edge lies in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `f(L) ⊂ S_L` and `f(R) ⊂ S_R`.
    Preserving,
    /// `f(L) ⊂ S_R` and `f(R) ⊂ S_L`.
    Reversing,
}

/// Grid and refinement policy for [`covers`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverSettings {
    /// Initial grid of the body, `(u pieces, v pieces)`.
    pub body_grid: (usize, usize),
    /// Initial number of pieces of each vertical edge.
    pub edge_pieces: usize,
    /// How many times a failing piece may be halved.
    pub max_refinements: usize,
}

impl Default for CoverSettings {
    fn default() -> Self {
        CoverSettings {
            body_grid: (30, 1),
            edge_pieces: 8,
            max_refinements: 8,
        }
    }
}

/// A source piece together with the enclosure of its image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub domain: IntervalBox,
    pub image: IntervalBox,
}

/// A verified relation `source ⟹ target` under the `iterate`-th power of the
/// map, with all evidence needed to recheck it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveringEdge {
    pub source: HSet,
    pub target: HSet,
    pub iterate: usize,
    pub orientation: Orientation,
    pub settings: CoverSettings,
    pub body: Vec<Piece>,
    pub left_edge: Vec<Piece>,
    pub right_edge: Vec<Piece>,
}

impl CoveringEdge {
    pub fn label(&self) -> String {
        if self.iterate == 1 {
            format!("{} => {}", self.source.name, self.target.name)
        } else {
            format!("{} =({})=> {}", self.source.name, self.iterate, self.target.name)
        }
    }

    /// Re-validates the recorded evidence against the covering inequalities
    /// without evaluating the map: the pieces must tile the body and both
    /// edges, and every recorded image must satisfy its condition.
    pub fn recheck(&self) -> Result<(), CoveringError> {
        let (src, tgt) = (&self.source, &self.target);
        let body_rows = rows_tile(&self.body, 0, &src.body());
        if !body_rows {
            return Err(CoveringError::IncompleteCover {
                part: "body".into(),
                source_set: src.name.clone(),
            });
        }
        for (part, pieces, edge) in [
            ("left edge", &self.left_edge, src.left_edge()),
            ("right edge", &self.right_edge, src.right_edge()),
        ] {
            if !rows_tile(pieces, 1, &edge) {
                return Err(CoveringError::IncompleteCover {
                    part: part.into(),
                    source_set: src.name.clone(),
                });
            }
        }
        for p in &self.body {
            if !tgt.avoids_horizontal_boundary(&p.image) {
                return Err(CoveringError::HorizontalBoundary {
                    target: tgt.name.clone(),
                    piece: p.domain.clone(),
                    image: p.image.clone(),
                });
            }
        }
        let (left_ok, right_ok): (fn(&HSet, &IntervalBox) -> bool, fn(&HSet, &IntervalBox) -> bool) =
            match self.orientation {
                Orientation::Preserving => (HSet::in_left_side, HSet::in_right_side),
                Orientation::Reversing => (HSet::in_right_side, HSet::in_left_side),
            };
        for (edge, pieces, ok) in [
            ("left", &self.left_edge, left_ok),
            ("right", &self.right_edge, right_ok),
        ] {
            for p in pieces {
                if !ok(tgt, &p.image) {
                    return Err(CoveringError::EdgeNotInSide {
                        edge: edge.into(),
                        target: tgt.name.clone(),
                        piece: p.domain.clone(),
                        image: p.image.clone(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Checks that the pieces tile `whole`: grouped by their extent in the
/// coordinate other than `axis`, those groups tile that coordinate, and
/// within each group the extents along `axis` tile the whole range exactly.
fn rows_tile(pieces: &[Piece], axis: usize, whole: &IntervalBox) -> bool {
    let other = 1 - axis;
    if pieces.iter().any(|p| p.domain.dim() != 2) {
        return false;
    }
    let mut rows: Vec<(Interval, Vec<Interval>)> = Vec::new();
    for p in pieces {
        let key = p.domain[other];
        match rows.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(p.domain[axis]),
            None => rows.push((key, vec![p.domain[axis]])),
        }
    }
    let keys: Vec<Interval> = rows.iter().map(|(k, _)| *k).collect();
    tiles(keys, whole[other]) && rows.into_iter().all(|(_, v)| tiles(v, whole[axis]))
}

/// Whether the intervals, sorted, chain end-to-start from `whole.lo` to
/// `whole.hi` with no gaps or overlaps.
fn tiles(mut parts: Vec<Interval>, whole: Interval) -> bool {
    parts.sort_by(|x, y| x.lo().partial_cmp(&y.lo()).unwrap_or(Ordering::Equal));
    let Some(first) = parts.first() else {
        return false;
    };
    if first.lo() != whole.lo() || parts.last().map(|p| p.hi()) != Some(whole.hi()) {
        return false;
    }
    parts.windows(2).all(|w| w[0].hi() == w[1].lo())
}

/// Maps `cells` and halves those whose image fails `accept` along `axis`,
/// up to `max_refinements` times. Returns the accepted pieces in a
/// deterministic order, or the first offending piece.
fn refine_until<M, F>(
    map: &M,
    k: usize,
    cells: Vec<IntervalBox>,
    axis: usize,
    max_refinements: usize,
    accept: F,
) -> Result<Vec<Piece>, (IntervalBox, Result<IntervalBox, MapError>)>
where
    M: PlaneMap + ?Sized,
    F: Fn(&IntervalBox) -> bool + Sync,
{
    let mut done = Vec::new();
    let mut todo = cells;
    for depth in 0..=max_refinements {
        let results: Vec<(IntervalBox, Result<IntervalBox, MapError>)> = todo
            .into_par_iter()
            .map(|c| {
                let r = map.image(&c, k);
                (c, r)
            })
            .collect();
        let mut next = Vec::new();
        for (cell, r) in results {
            match r {
                Ok(img) if accept(&img) => done.push(Piece {
                    domain: cell,
                    image: img,
                }),
                other => {
                    if depth == max_refinements {
                        return Err((cell, other));
                    }
                    let halves = cell[axis].split(2);
                    for h in halves {
                        let mut c = cell.clone();
                        c[axis] = h;
                        next.push(c);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        todo = next;
    }
    done.sort_by(|p, q| {
        let a = (p.domain[1].lo(), p.domain[0].lo());
        let b = (q.domain[1].lo(), q.domain[0].lo());
        a.partial_cmp(&b).unwrap_or(Ordering::Equal)
    });
    Ok(done)
}

/// Verifies `n0 ⟹ n1` under `fᵏ`, where `map` acts in the common chart of
/// both h-sets.
pub fn covers<M: PlaneMap + ?Sized>(
    map: &M,
    n0: &HSet,
    n1: &HSet,
    k: usize,
    settings: &CoverSettings,
) -> Result<CoveringEdge, CoveringError> {
    assert!(k >= 1, "iterate must be at least 1");
    let edge_failure = |edge: &str, (piece, r): (IntervalBox, Result<IntervalBox, MapError>)| match r {
        Ok(image) => CoveringError::EdgeNotInSide {
            edge: edge.into(),
            target: n1.name.clone(),
            piece,
            image,
        },
        Err(error) => CoveringError::Map { piece, error },
    };

    // the left edge decides the orientation
    let left_cells = n0.left_edge().subdivide(&[1, settings.edge_pieces]);
    let left = refine_until(map, k, left_cells, 1, settings.max_refinements, |img| {
        n1.in_left_side(img) || n1.in_right_side(img)
    })
    .map_err(|e| edge_failure("left", e))?;
    let orientation = if left.iter().all(|p| n1.in_left_side(&p.image)) {
        Orientation::Preserving
    } else if left.iter().all(|p| n1.in_right_side(&p.image)) {
        Orientation::Reversing
    } else {
        let p = left.iter().find(|p| !n1.in_left_side(&p.image)).expect("mixed sides");
        return Err(CoveringError::EdgeNotInSide {
            edge: "left".into(),
            target: n1.name.clone(),
            piece: p.domain.clone(),
            image: p.image.clone(),
        });
    };
    let right_cells = n0.right_edge().subdivide(&[1, settings.edge_pieces]);
    let right = refine_until(
        map,
        k,
        right_cells,
        1,
        settings.max_refinements,
        |img| match orientation {
            Orientation::Preserving => n1.in_right_side(img),
            Orientation::Reversing => n1.in_left_side(img),
        },
    )
    .map_err(|e| edge_failure("right", e))?;

    let body_cells = n0.body().subdivide(&[settings.body_grid.0, settings.body_grid.1]);
    let body = refine_until(map, k, body_cells, 0, settings.max_refinements, |img| {
        n1.avoids_horizontal_boundary(img)
    })
    .map_err(|(piece, r)| match r {
        Ok(image) => CoveringError::HorizontalBoundary {
            target: n1.name.clone(),
            piece,
            image,
        },
        Err(error) => CoveringError::Map { piece, error },
    })?;

    let edge = CoveringEdge {
        source: n0.clone(),
        target: n1.clone(),
        iterate: k,
        orientation,
        settings: *settings,
        body,
        left_edge: left,
        right_edge: right,
    };
    debug_assert!(edge.recheck().is_ok());
    Ok(edge)
}

/// One step of a loop: `source ⟹ target` under the `iterate`-th power.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopStep {
    pub source: String,
    pub target: String,
    pub iterate: usize,
}

/// A closed chain of covering relations.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodLoop {
    pub steps: Vec<LoopStep>,
}

impl PeriodLoop {
    pub fn new(steps: Vec<LoopStep>) -> Result<Self, CoveringError> {
        if steps.is_empty() {
            return Err(CoveringError::BrokenLoop("empty loop".into()));
        }
        for (i, s) in steps.iter().enumerate() {
            let next = &steps[(i + 1) % steps.len()];
            if s.target != next.source {
                return Err(CoveringError::BrokenLoop(format!(
                    "step {i} ends in {} but the next starts in {}",
                    s.target, next.source
                )));
            }
        }
        Ok(PeriodLoop { steps })
    }

    /// Sum of the iterate labels.
    pub fn period(&self) -> usize {
        self.steps.iter().map(|s| s.iterate).sum()
    }

    /// Distinct edges used by the loop, in order of first use.
    pub fn distinct_steps(&self) -> Vec<&LoopStep> {
        let mut seen = Vec::new();
        for s in &self.steps {
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen
    }

    /// Human-readable chain `A => B => … => A`.
    pub fn chain(&self) -> String {
        let mut out = self.steps[0].source.clone();
        for s in &self.steps {
            if s.iterate == 1 {
                let _ = write!(out, " => {}", s.target);
            } else {
                let _ = write!(out, " =({})=> {}", s.iterate, s.target);
            }
        }
        out
    }
}

fn step_of(e: &CoveringEdge) -> LoopStep {
    LoopStep {
        source: e.source.name.clone(),
        target: e.target.name.clone(),
        iterate: e.iterate,
    }
}

/// Builds a loop of total period `n` from verified edges.
///
/// A self-covering with label `n` is used directly. Otherwise the loop
/// `A ⟹ B, (B ⟹ B)^m, B ⟹ A` with `A ≠ B` and a unit self-covering of `B` is
/// searched for, taking nodes in name order. Only loops whose itinerary
/// proves that `n` is the fundamental period are returned (see
/// [`fundamental_period_argument`]); a loop that closes after `n` steps but
/// might trace an orbit of a smaller period does not count.
pub fn build_period_loop(edges: &[CoveringEdge], n: usize) -> Result<PeriodLoop, CoveringError> {
    assert!(n >= 1, "periods start at 1");
    let mut sets: Vec<HSet> = Vec::new();
    for e in edges {
        for h in [&e.source, &e.target] {
            if !sets.iter().any(|s| s.name == h.name) {
                sets.push(h.clone());
            }
        }
    }
    let fundamental = |lp: &PeriodLoop| fundamental_period_argument(lp, &sets).is_ok();
    let mut sorted: Vec<&CoveringEdge> = edges.iter().collect();
    sorted
        .sort_by(|a, b| (&a.source.name, &a.target.name, a.iterate).cmp(&(&b.source.name, &b.target.name, b.iterate)));
    if let Some(e) = sorted.iter().find(|e| e.source.name == e.target.name && e.iterate == n) {
        let lp = PeriodLoop::new(vec![step_of(e)])?;
        if fundamental(&lp) {
            return Ok(lp);
        }
    }
    for out in &sorted {
        if out.source.name == out.target.name {
            continue;
        }
        let b = &out.target.name;
        let Some(selfloop) = sorted
            .iter()
            .find(|e| &e.source.name == b && &e.target.name == b && e.iterate == 1)
        else {
            continue;
        };
        for back in sorted
            .iter()
            .filter(|e| &e.source.name == b && e.target.name == out.source.name)
        {
            let used = out.iterate + back.iterate;
            if used > n {
                continue;
            }
            let mut steps = vec![step_of(out)];
            steps.extend(std::iter::repeat_n(step_of(selfloop), n - used));
            steps.push(step_of(back));
            let lp = PeriodLoop::new(steps)?;
            if fundamental(&lp) {
                return Ok(lp);
            }
        }
    }
    Err(CoveringError::PeriodNotConstructible(n))
}

/// Why the periodic point forced by a loop has the loop's period as its
/// fundamental period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FundamentalPeriod {
    pub period: usize,
    /// `(time, h-set)`: the forced point lies in the interior of the h-set at
    /// that time.
    pub known_positions: Vec<(usize, String)>,
    /// For each proper divisor `d`: times `s < t` with `d | t − s` at which
    /// the orbit lies in disjoint h-sets, so `d` cannot be a period.
    pub divisor_witnesses: Vec<DivisorWitness>,
    pub conclusion: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivisorWitness {
    pub divisor: usize,
    pub first: (usize, String),
    pub second: (usize, String),
}

/// Justifies that the periodic point of `lp` has fundamental period equal to
/// the loop's period, using only the itinerary: for every proper divisor `d`
/// there must be two itinerary times differing by a multiple of `d` at which
/// the point lies in disjoint h-sets.
pub fn fundamental_period_argument(lp: &PeriodLoop, sets: &[HSet]) -> Result<FundamentalPeriod, CoveringError> {
    let n = lp.period();
    let mut known = Vec::new();
    let mut t = 0;
    for s in &lp.steps {
        known.push((t, s.source.clone()));
        t += s.iterate;
    }
    let find = |name: &str| {
        sets.iter()
            .find(|h| h.name == name)
            .ok_or_else(|| CoveringError::JustificationUnavailable(format!("unknown h-set {name}")))
    };
    let mut witnesses = Vec::new();
    for d in (1..n).filter(|d| n.is_multiple_of(*d)) {
        let mut found = None;
        'search: for (i, (s, a)) in known.iter().enumerate() {
            for (t, b) in &known[i + 1..] {
                if (t - s) % d == 0 && find(a)?.disjoint(find(b)?) {
                    found = Some(DivisorWitness {
                        divisor: d,
                        first: (*s, a.clone()),
                        second: (*t, b.clone()),
                    });
                    break 'search;
                }
            }
        }
        match found {
            Some(w) => witnesses.push(w),
            None => {
                return Err(CoveringError::JustificationUnavailable(format!(
                    "no itinerary witness excludes period {d} for the loop {}",
                    lp.chain()
                )))
            }
        }
    }
    let conclusion = if n == 1 {
        "a fixed point has fundamental period 1".to_string()
    } else {
        format!(
            "the loop {} forces a point x with P^t(x) in the interior of the listed h-set at each listed time t and P^{n}(x) = x; \
             a period d properly dividing {n} would place the orbit in two disjoint h-sets at the same time modulo d, so {n} is the fundamental period",
            lp.chain()
        )
    };
    Ok(FundamentalPeriod {
        period: n,
        known_positions: known,
        divisor_witnesses: witnesses,
        conclusion,
    })
}

/// Position of `n` in the Sharkovskii order: odd numbers ≥ 3 ascending, then
/// 2·odd, 4·odd, …, then the powers of two descending.
fn sharkovskii_key(n: u64) -> (u8, u32, u64) {
    assert!(n >= 1, "Sharkovskii order is on positive integers");
    let k = n.trailing_zeros();
    let odd = n >> k;
    if odd > 1 {
        (0, k, odd)
    } else {
        (1, u32::MAX - k, 0)
    }
}

/// `m ◁ n` in the Sharkovskii order.
pub fn sharkovskii_less(m: u64, n: u64) -> bool {
    sharkovskii_key(m) < sharkovskii_key(n)
}

/// Periods forced by a period `m` of an interval map: every `n` with `m ◁ n`
/// (plus `m` itself), restricted to `1..=limit`.
pub fn forced_periods(m: u64, limit: u64) -> BTreeSet<u64> {
    (1..=limit).filter(|&n| n == m || sharkovskii_less(m, n)).collect()
}

/// DOT rendering of the covering graph.
pub fn covering_graph_dot(edges: &[CoveringEdge]) -> String {
    let mut nodes = BTreeSet::new();
    for e in edges {
        nodes.insert(e.source.name.clone());
        nodes.insert(e.target.name.clone());
    }
    let mut out = String::from("digraph covering {\n");
    for n in &nodes {
        let _ = writeln!(out, "  \"{n}\";");
    }
    for e in edges {
        let _ = writeln!(
            out,
            "  \"{}\" -> \"{}\" [label=\"P^{}\"];",
            e.source.name, e.target.name, e.iterate
        );
    }
    out.push_str("}\n");
    out
}
