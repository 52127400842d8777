//! The proof cases for the two parameter sets, with their published
//! constants, and the runner that turns each case into a [`Certificate`].
//!
//! Case numbers: `a525` 1 (3-periodic orbit), 2 (covering chain); `a47`
//! 1 (5-periodic orbit), 2 (covering chain), 3 (2-periodic orbit),
//! 4 (4-periodic orbit), 5 (forward invariance of 𝒜), 6 (no period 3 in 𝒜).

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificate::{CaseId, Certificate, Evidence, OrbitComparison, RunSettings};
use crate::covering::{
    build_period_loop, covering_graph_dot, covers, fundamental_period_argument, CoveringEdge, CoveringError, HSet,
};
use crate::field::PolyField;
use crate::integrator::IntegratorError;
use crate::interval::{Interval, IntervalBox, IntervalError};
use crate::newton::{any_stationary_point, inside, no_period_n, ChartSet, ExclusionVerdict};
use crate::numeric::FloatFlow;
use crate::planemap::{ChartMap, PlaneMap};
use crate::poincare::{AffineChart, ReturnMap};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown case {case} for system {system} (valid: {valid})")]
    UnknownCase { system: System, case: u32, valid: String },
    #[error("period must be at least 1")]
    InvalidPeriod,
    #[error("unknown system `{0}` (expected a525 or a47)")]
    UnknownSystem(String),
    #[error(transparent)]
    Settings(#[from] IntegratorError),
    #[error(transparent)]
    Constants(#[from] IntervalError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// The two parameter sets with published proofs (`b = 0.2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    A525,
    A47,
}

impl System {
    pub const ALL: [System; 2] = [System::A525, System::A47];

    pub fn id(self) -> &'static str {
        match self {
            System::A525 => "a525",
            System::A47 => "a47",
        }
    }

    pub fn constants(self) -> &'static Constants {
        match self {
            System::A525 => &A525,
            System::A47 => &A47,
        }
    }

    pub fn cases(self) -> &'static [u32] {
        match self {
            System::A525 => &[1, 2],
            System::A47 => &[1, 2, 3, 4, 5, 6],
        }
    }

    pub fn field(self) -> PolyField {
        let c = self.constants();
        PolyField::rossler_decimal(c.a, c.b)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for System {
    type Err = CaseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a525" => Ok(System::A525),
            "a47" => Ok(System::A47),
            other => Err(CaseError::UnknownSystem(other.to_string())),
        }
    }
}

/// A published periodic orbit: a rough starting point and the enclosing
/// rectangles of its points, listed in the order in which `P` visits them.
#[derive(Clone, Copy, Debug)]
pub struct OrbitData {
    pub period: usize,
    pub start: [&'static str; 2],
    pub boxes: &'static [[&'static str; 2]],
}

/// An h-set `[center ± half_width] × [± r]` in chart coordinates.
#[derive(Clone, Copy, Debug)]
pub struct HSetData {
    pub name: &'static str,
    pub center: &'static str,
    pub half_width: &'static str,
    pub r: &'static str,
}

/// A chart `C(u) = M u + p` (row-major `M`).
#[derive(Clone, Copy, Debug)]
pub struct ChartData {
    pub m: [&'static str; 4],
    pub p: [&'static str; 2],
}

/// The set `𝒜 = C([± radii])` and the published residual set for period 3.
#[derive(Clone, Copy, Debug)]
pub struct TrappingData {
    pub chart: ChartData,
    pub radii: [&'static str; 2],
    pub residual: [&'static str; 2],
}

/// One covering relation of the published chain: `source ⟹ target` under
/// `P_Cᵏ`.
#[derive(Clone, Copy, Debug)]
pub struct EdgeData {
    pub source: &'static str,
    pub target: &'static str,
    pub iterate: usize,
}

/// Every published constant of one parameter set.
#[derive(Clone, Copy, Debug)]
pub struct Constants {
    pub a: &'static str,
    pub b: &'static str,
    pub orbits: &'static [OrbitData],
    pub chart: ChartData,
    pub hsets: &'static [HSetData],
    pub chain: &'static [EdgeData],
    pub trapping: Option<TrappingData>,
}

pub static A525: Constants = Constants {
    a: "5.25",
    b: "0.2",
    orbits: &[OrbitData {
        period: 3,
        start: ["-3.4664", "0.03463"],
        boxes: &[
            ["-3.4664152050_{12922}^{08744}", "0.034631605476_{4013}^{51117}"],
            ["-6.2640075332_{82922}^{74157}", "0.032654358846_{02701}^{20798}"],
            ["-9.7488899180_{93569}^{88608}", "0.030752873380_{62635}^{70747}"],
        ],
    }],
    chart: ChartData {
        m: ["-1", "0.000706767", "-0.000706767", "-1"],
        p: ["-6.264007533274157", "0.03265435884602701"],
    },
    hsets: &[
        HSetData {
            name: "N0",
            center: "-1.23094",
            half_width: "1.41278",
            r: "7e-4",
        },
        HSetData {
            name: "N1",
            center: "1.84699",
            half_width: "1.55949",
            r: "7e-4",
        },
    ],
    chain: &[
        EdgeData {
            source: "N0",
            target: "N1",
            iterate: 1,
        },
        EdgeData {
            source: "N1",
            target: "N1",
            iterate: 1,
        },
        EdgeData {
            source: "N1",
            target: "N0",
            iterate: 1,
        },
    ],
    trapping: None,
};

pub static A47: Constants = Constants {
    a: "4.7",
    b: "0.2",
    orbits: &[
        OrbitData {
            period: 5,
            start: ["-3.8853", "0.03756"],
            boxes: &[
                ["-3.885277116_{910041}^{888829}", "0.037558391444_{32487}^{85094}"],
                ["-6.8582604471_{62484}^{26429}", "0.03505366666_{495363}^{561609}"],
                ["-7.7666312453_{92379}^{48371}", "0.034417133928_{18681}^{63033}"],
                ["-5.895584354_{611225}^{509201}", "0.03578591178_{706747}^{835873}"],
                ["-8.7223960200_{73123}^{49997}", "0.033796299364_{04972}^{3551}"],
            ],
        },
        OrbitData {
            period: 2,
            start: ["-4.8839", "0.03663"],
            boxes: &[
                ["-4.88392425874_{3846}^{2264}", "0.0366312810972_{0363}^{9599}"],
                ["-8.22095155223_{5825}^{3453}", "0.0341162008426_{8562}^{9375}"],
            ],
        },
        OrbitData {
            period: 4,
            start: ["-6.3323", "0.03545"],
            boxes: &[
                ["-6.3322511801_{91433}^{86209}", "0.035445799547_{48502}^{86024}"],
                ["-8.4703436541_{25783}^{19862}", "0.033955548564_{30393}^{40434}"],
                ["-4.3626672599_{1514}^{017}", "0.037102455850_{53683}^{75971}"],
                ["-7.5716695403_{62099}^{41765}", "0.0345497016342_{597}^{7861}"],
            ],
        },
    ],
    chart: ChartData {
        m: ["-1", "0.000842495", "-0.000842495", "-1"],
        p: ["-6.858260447127058", "0.03505366666527084"],
    },
    hsets: &[
        HSetData {
            name: "N0",
            center: "-1.96783",
            half_width: "1.02",
            r: "2e-4",
        },
        HSetData {
            name: "N2",
            center: "0.454186",
            half_width: "0.476895",
            r: "2e-4",
        },
    ],
    chain: &[
        EdgeData {
            source: "N0",
            target: "N2",
            iterate: 1,
        },
        EdgeData {
            source: "N2",
            target: "N2",
            iterate: 1,
        },
        EdgeData {
            source: "N2",
            target: "N0",
            iterate: 3,
        },
    ],
    trapping: Some(TrappingData {
        chart: ChartData {
            m: ["-1.", "0.000777754", "-0.000777754", "-1."],
            p: ["-6.19384", "0.0356629"],
        },
        radii: ["2.66856", "4e-4"],
        residual: [
            "-7.1_{86544568881281}^{65195528898398}",
            "0.03_{44908202443027}^{522742411001666}",
        ],
    }),
};

impl ChartData {
    pub fn chart(&self) -> Result<AffineChart, IntervalError> {
        AffineChart::from_decimals(self.m, self.p)
    }
}

impl Constants {
    pub fn hsets(&self) -> Result<Vec<HSet>, CoveringError> {
        self.hsets
            .iter()
            .map(|h| HSet::from_decimals(h.name, h.center, h.half_width, h.r))
            .collect()
    }

    pub fn orbit(&self, period: usize) -> Option<&OrbitData> {
        self.orbits.iter().find(|o| o.period == period)
    }
}

impl OrbitData {
    pub fn paper_boxes(&self) -> Result<Vec<IntervalBox>, IntervalError> {
        self.boxes
            .iter()
            .map(|[y, z]| Ok(IntervalBox::new(vec![y.parse()?, z.parse()?])))
            .collect()
    }

    pub fn start_point(&self) -> Result<Vec<f64>, IntervalError> {
        self.start.iter().map(|s| Ok(s.parse::<Interval>()?.mid())).collect()
    }
}

impl TrappingData {
    /// `𝒜` as a chart box.
    pub fn set(&self) -> Result<ChartSet, IntervalError> {
        let radii = self
            .radii
            .iter()
            .map(|r| {
                let r = Interval::from_decimal(r)?;
                Ok(r.hull(&-r))
            })
            .collect::<Result<Vec<_>, IntervalError>>()?;
        Ok(ChartSet {
            chart: self.chart.chart()?,
            chart_box: IntervalBox::new(radii),
        })
    }

    pub fn paper_residual(&self) -> Result<IntervalBox, IntervalError> {
        Ok(IntervalBox::new(vec![
            self.residual[0].parse()?,
            self.residual[1].parse()?,
        ]))
    }
}

/// Runs the cases of one system; the covering edges are verified once and
/// shared by all period proofs.
pub struct Runner {
    system: System,
    settings: RunSettings,
    field: PolyField,
    edges: OnceLock<Result<Vec<CoveringEdge>, CoveringError>>,
}

impl Runner {
    pub fn new(system: System, settings: RunSettings) -> Result<Self, CaseError> {
        settings.integrator.validate()?;
        Ok(Runner {
            system,
            settings,
            field: system.field(),
            edges: OnceLock::new(),
        })
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn settings(&self) -> &RunSettings {
        &self.settings
    }

    fn return_map(&self) -> ReturnMap<'_> {
        ReturnMap::new(&self.field, self.settings.integrator.clone()).expect("settings validated")
    }

    fn certificate(
        &self,
        id: CaseId,
        claim: String,
        evidence: Evidence,
        verdict: bool,
        started: Instant,
    ) -> Certificate {
        Certificate::new(
            id,
            &self.field,
            &self.settings,
            claim,
            evidence,
            verdict,
            started.elapsed(),
        )
    }

    /// Runs case `case` of this system.
    pub fn run_case(&self, case: u32) -> Result<Certificate, CaseError> {
        let c = self.system.constants();
        let started = Instant::now();
        let id = CaseId::case(self.system, case);
        match (self.system, case) {
            (System::A525, 1) | (System::A47, 1) | (System::A47, 3) | (System::A47, 4) => {
                let period = match (self.system, case) {
                    (System::A525, _) => 3,
                    (_, 1) => 5,
                    (_, 3) => 2,
                    _ => 4,
                };
                let orbit = c.orbit(period).expect("orbit listed for this case");
                let (claim, evidence, verdict) = self.periodic_orbit(orbit)?;
                Ok(self.certificate(id, claim, evidence, verdict, started))
            }
            (_, 2) => {
                let (claim, evidence, verdict) = self.covering_chain()?;
                Ok(self.certificate(id, claim, evidence, verdict, started))
            }
            (System::A47, 5) => {
                let (claim, evidence, verdict) = self.invariance()?;
                Ok(self.certificate(id, claim, evidence, verdict, started))
            }
            (System::A47, 6) => {
                let (claim, evidence, verdict) = self.exclusion(3)?;
                Ok(self.certificate(id, claim, evidence, verdict, started))
            }
            _ => Err(CaseError::UnknownCase {
                system: self.system,
                case,
                valid: format!("{:?}", self.system.cases()),
            }),
        }
    }

    /// Proves that `P` has an orbit of fundamental period `n`, or for `n = 3`
    /// at `a = 4.7` that it has none in `𝒜`.
    pub fn prove_period(&self, n: usize) -> Result<Certificate, CaseError> {
        if n == 0 {
            return Err(CaseError::InvalidPeriod);
        }
        let started = Instant::now();
        let id = CaseId::period(self.system, n);
        let c = self.system.constants();
        let (claim, evidence, verdict) = match self.system {
            System::A47 if n == 3 => self.exclusion(3)?,
            _ => match self.chain_edges() {
                Ok(edges) => match build_period_loop(edges, n) {
                    Ok(lp) => self.period_from_loop(edges, lp)?,
                    Err(CoveringError::PeriodNotConstructible(_)) => match c.orbit(n) {
                        Some(orbit) => self.periodic_orbit(orbit)?,
                        None => return Err(CoveringError::PeriodNotConstructible(n).into()),
                    },
                    Err(e) => return Err(e.into()),
                },
                Err(e) => (
                    format!("P has a periodic orbit of fundamental period {n}"),
                    Evidence::Failure {
                        stage: "covering chain".into(),
                        detail: e.to_string(),
                    },
                    false,
                ),
            },
        };
        Ok(self.certificate(id, claim, evidence, verdict, started))
    }

    /// The verified covering relations of the published chain.
    pub fn chain_edges(&self) -> Result<&[CoveringEdge], CoveringError> {
        self.edges
            .get_or_init(|| self.verify_chain())
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(Clone::clone)
    }

    fn verify_chain(&self) -> Result<Vec<CoveringEdge>, CoveringError> {
        let c = self.system.constants();
        let map = ChartMap::new(self.return_map(), c.chart.chart()?);
        let sets = c.hsets()?;
        let find = |name: &str| sets.iter().find(|h| h.name == name).expect("chain uses listed h-sets");
        c.chain
            .iter()
            .map(|e| {
                log::info!(
                    "{}: verifying {} => {} under P_C^{}",
                    self.system,
                    e.source,
                    e.target,
                    e.iterate
                );
                covers(&map, find(e.source), find(e.target), e.iterate, &self.settings.cover)
            })
            .collect()
    }

    fn periodic_orbit(&self, orbit: &OrbitData) -> Result<(String, Evidence, bool), CaseError> {
        let n = orbit.period;
        let claim = format!(
            "P has a unique fixed point of P^{n} in the search box; its orbit has fundamental period {n} and lies in the listed boxes"
        );
        let start = orbit.start_point()?;
        let flow = FloatFlow::new(&self.field, 20, 0.02);
        let x0 = match flow.periodic_point(start[0], start[1], n) {
            Some(p) => p.to_vec(),
            None => start.clone(),
        };
        let map = ChartMap::section(self.return_map());
        let proved = match any_stationary_point(&map, &x0, n, &self.settings.newton_radius) {
            Ok(p) => p,
            Err(e) => {
                return Ok((
                    claim,
                    Evidence::Failure {
                        stage: format!("interval Newton for P^{n}"),
                        detail: e.to_string(),
                    },
                    false,
                ))
            }
        };
        // Soundness cross-check: the enclosure meets its own image.
        let self_consistent = map
            .image(&proved.orbit[0], n)
            .map(|img| !img.disjoint(&proved.orbit[0]))
            .unwrap_or(false);
        let distinct = proved.orbit_distinct();
        let comparison = OrbitComparison::new(&proved.orbit, &orbit.paper_boxes()?, self.settings.orbit_tolerance);
        let verdict = distinct && self_consistent;
        Ok((
            claim,
            Evidence::PeriodicOrbit {
                period: n,
                start_point: x0,
                newton: proved.newton,
                refinement_rounds: proved.rounds,
                orbit: proved.orbit,
                orbit_distinct: distinct,
                self_consistent,
                comparison,
            },
            verdict,
        ))
    }

    fn covering_chain(&self) -> Result<(String, Evidence, bool), CaseError> {
        let c = self.system.constants();
        let chain: Vec<String> = c
            .chain
            .iter()
            .map(|e| format!("{} =P_C^{}=> {}", e.source, e.iterate, e.target))
            .collect();
        let claim = format!("the horizontal covering relations {} hold", chain.join(", "));
        match self.chain_edges() {
            Ok(edges) => {
                let rechecked = edges.iter().all(|e| e.recheck().is_ok());
                Ok((
                    claim,
                    Evidence::CoveringChain {
                        chart: c.chart.chart()?,
                        edges: edges.to_vec(),
                        rechecked,
                        graph: covering_graph_dot(edges),
                    },
                    rechecked,
                ))
            }
            Err(e) => Ok((
                claim,
                Evidence::Failure {
                    stage: "covering relation".into(),
                    detail: e.to_string(),
                },
                false,
            )),
        }
    }

    fn period_from_loop(
        &self,
        edges: &[CoveringEdge],
        lp: crate::covering::PeriodLoop,
    ) -> Result<(String, Evidence, bool), CaseError> {
        let n = lp.period();
        let claim = format!("P has a periodic orbit of fundamental period {n}");
        let sets = self.system.constants().hsets()?;
        let used: Vec<CoveringEdge> = edges
            .iter()
            .filter(|e| {
                lp.steps
                    .iter()
                    .any(|s| s.source == e.source.name && s.target == e.target.name && s.iterate == e.iterate)
            })
            .cloned()
            .collect();
        let rechecked = used.iter().all(|e| e.recheck().is_ok());
        let (fundamental, failure) = match fundamental_period_argument(&lp, &sets) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let verdict = rechecked && fundamental.is_some();
        Ok((
            claim,
            Evidence::PeriodFromLoop {
                chain: lp.chain(),
                period_loop: lp,
                edges: used,
                rechecked,
                fundamental,
                failure,
                conclusion: format!(
                    "a loop of horizontal coverings of total length {n} forces a point x with P^{n}(x) = x whose itinerary follows the loop"
                ),
            },
            verdict,
        ))
    }

    fn trapping(&self) -> Result<(TrappingData, ChartSet), CaseError> {
        let t = self.system.constants().trapping.ok_or_else(|| CaseError::UnknownCase {
            system: self.system,
            case: 5,
            valid: format!("{:?}", self.system.cases()),
        })?;
        let set = t.set()?;
        Ok((t, set))
    }

    fn invariance(&self) -> Result<(String, Evidence, bool), CaseError> {
        let (_, set) = self.trapping()?;
        let map = ChartMap::new(self.return_map(), set.chart.clone());
        let s = &self.settings;
        let report = inside(&map, &set.chart_box, &s.invariance_grid, s.refinements);
        let verdict = report.invariant;
        Ok((
            "P(A) lies in the interior of A".to_string(),
            Evidence::Invariance { set, report },
            verdict,
        ))
    }

    fn exclusion(&self, n: usize) -> Result<(String, Evidence, bool), CaseError> {
        let (t, set) = self.trapping()?;
        let rm = self.return_map();
        let chart_map = ChartMap::new(rm.clone(), set.chart.clone());
        let section_map = ChartMap::section(rm);
        let s = &self.settings;
        let claim = format!("no point of A has fundamental period {n} under P");
        let invariance = inside(&chart_map, &set.chart_box, &s.invariance_grid, s.refinements);
        let report = match no_period_n(
            &chart_map,
            &section_map,
            &set,
            n,
            &s.exclusion_grid,
            s.refinements,
            &s.newton_subdivision,
        ) {
            Ok(r) => r,
            Err(e) => {
                return Ok((
                    claim,
                    Evidence::Failure {
                        stage: format!("exclusion of period {n}"),
                        detail: e.to_string(),
                    },
                    false,
                ))
            }
        };
        let mut argument = vec![format!(
            "P(A) lies in the interior of A ({} of {} pieces verified), so every orbit starting in A stays in A and any orbit of period {n} meeting A lies in A",
            invariance.verified, invariance.pieces
        )];
        argument.extend(report.argument.iter().cloned());
        let paper = t.paper_residual()?;
        let paper_widened = paper.inflate(0.0, s.residual_tolerance);
        let within = report.residual.s.as_ref().map(|s| s.subset(&paper_widened));
        let verdict = invariance.invariant && report.verdict == ExclusionVerdict::Excluded;
        Ok((
            claim,
            Evidence::Exclusion {
                set,
                invariance,
                report,
                argument,
                published_residual: paper,
                residual_within_published: within,
            },
            verdict,
        ))
    }
}
