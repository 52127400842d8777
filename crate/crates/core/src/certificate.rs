//! Certificates: one JSON document per verified claim.
//!
//! Keys appear in a fixed order. The `evidence` section depends only on the
//! inputs and settings, so re-running a case reproduces it byte for byte;
//! the creation time and duration are kept outside it. [`Certificate::recheck`]
//! re-validates the recorded evidence without recomputing any flow.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cases::System;
use crate::covering::{CoverSettings, CoveringEdge, FundamentalPeriod, PeriodLoop};
use crate::field::PolyField;
use crate::integrator::IntegratorSettings;
use crate::interval::{Interval, IntervalBox, ROUNDING_POLICY};
use crate::newton::{ChartSet, ExclusionReport, ExclusionVerdict, InvarianceReport, NewtonResult, NewtonVerdict};
use crate::poincare::AffineChart;

/// Version of the certificate layout.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("evidence does not support the verdict: {0}")]
    Invalid(String),
}

/// Every tunable of a proof run; recorded in each certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub integrator: IntegratorSettings,
    pub cover: CoverSettings,
    pub invariance_grid: Vec<usize>,
    pub exclusion_grid: Vec<usize>,
    /// How many times a failing grid cell may be halved.
    pub refinements: usize,
    /// Grid over which the derivative hull of the exclusion Newton steps is taken.
    pub newton_subdivision: Vec<usize>,
    /// Half-widths of the first Newton search box for periodic orbits.
    pub newton_radius: Vec<f64>,
    /// Widening of the published orbit boxes when comparing enclosures.
    pub orbit_tolerance: f64,
    /// Widening of the published residual set when comparing.
    pub residual_tolerance: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            integrator: IntegratorSettings::default(),
            cover: CoverSettings::default(),
            invariance_grid: vec![200, 4],
            exclusion_grid: vec![500, 10],
            refinements: 3,
            newton_subdivision: vec![4, 4],
            newton_radius: vec![1e-7, 1e-9],
            orbit_tolerance: 1e-9,
            residual_tolerance: 1e-6,
        }
    }
}

/// Which case or period a certificate belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseId {
    pub system: System,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub case: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub period: Option<usize>,
}

impl CaseId {
    pub fn case(system: System, case: u32) -> Self {
        CaseId {
            system,
            case: Some(case),
            period: None,
        }
    }

    pub fn period(system: System, n: usize) -> Self {
        CaseId {
            system,
            case: None,
            period: Some(n),
        }
    }

    /// `a47-case6`, `a525-period7`.
    pub fn file_stem(&self) -> String {
        match (self.case, self.period) {
            (Some(c), _) => format!("{}-case{c}", self.system),
            (None, Some(n)) => format!("{}-period{n}", self.system),
            (None, None) => self.system.to_string(),
        }
    }
}

/// Comparison of one computed orbit enclosure with the published boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitPointCheck {
    /// Position along the orbit: the enclosure of `Pⁱ(x*)`.
    pub index: usize,
    pub computed: IntervalBox,
    /// The published box (widened by the tolerance) containing the
    /// enclosure, if any.
    pub published_index: Option<usize>,
    pub max_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitComparison {
    pub tolerance: f64,
    pub published: Vec<IntervalBox>,
    pub points: Vec<OrbitPointCheck>,
    /// Published indices in the order `P` visits them; this is the
    /// successor ordering of the published orbit.
    pub visiting_order: Vec<Option<usize>>,
    /// Every published box contains exactly one enclosure once widened.
    pub all_inside: bool,
    /// Every enclosure is at most `tolerance` wide in each coordinate.
    pub all_narrow: bool,
}

impl OrbitComparison {
    pub fn new(computed: &[IntervalBox], published: &[IntervalBox], tolerance: f64) -> Self {
        let widened: Vec<IntervalBox> = published.iter().map(|p| p.inflate(0.0, tolerance)).collect();
        let points: Vec<OrbitPointCheck> = computed
            .iter()
            .enumerate()
            .map(|(index, c)| OrbitPointCheck {
                index,
                computed: c.clone(),
                published_index: widened.iter().position(|w| c.subset(w)),
                max_width: c.width(),
            })
            .collect();
        let visiting_order: Vec<Option<usize>> = points.iter().map(|p| p.published_index).collect();
        let mut hit = vec![false; published.len()];
        for j in visiting_order.iter().flatten() {
            hit[*j] = true;
        }
        let all_inside =
            computed.len() == published.len() && visiting_order.iter().all(Option::is_some) && hit.iter().all(|h| *h);
        OrbitComparison {
            tolerance,
            published: published.to_vec(),
            all_inside,
            all_narrow: !points.is_empty() && points.iter().all(|p| p.max_width <= tolerance),
            points,
            visiting_order,
        }
    }
}

/// The module-specific record behind a verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Evidence {
    /// Interval Newton proof of a periodic orbit.
    PeriodicOrbit {
        period: usize,
        start_point: Vec<f64>,
        newton: NewtonResult,
        refinement_rounds: usize,
        /// Enclosures of the orbit points in the order `P` visits them.
        orbit: Vec<IntervalBox>,
        /// Pairwise disjoint enclosures: the fundamental period is `period`.
        orbit_distinct: bool,
        /// The image of the first enclosure under `P^period` meets it.
        self_consistent: bool,
        comparison: OrbitComparison,
    },
    /// Verified covering relations in a common chart.
    CoveringChain {
        chart: AffineChart,
        edges: Vec<CoveringEdge>,
        rechecked: bool,
        graph: String,
    },
    /// A periodic orbit forced by a loop of covering relations.
    PeriodFromLoop {
        chain: String,
        period_loop: PeriodLoop,
        edges: Vec<CoveringEdge>,
        rechecked: bool,
        fundamental: Option<FundamentalPeriod>,
        failure: Option<String>,
        conclusion: String,
    },
    /// `P(𝒜) ⊂ int 𝒜`.
    Invariance { set: ChartSet, report: InvarianceReport },
    /// No orbit of a given fundamental period in `𝒜`.
    Exclusion {
        set: ChartSet,
        invariance: InvarianceReport,
        report: ExclusionReport,
        argument: Vec<String>,
        published_residual: IntervalBox,
        residual_within_published: Option<bool>,
    },
    /// A stage failed before any evidence could be assembled.
    Failure { stage: String, detail: String },
}

impl Evidence {
    pub fn kind(&self) -> &'static str {
        match self {
            Evidence::PeriodicOrbit { .. } => "periodic-orbit",
            Evidence::CoveringChain { .. } => "covering-chain",
            Evidence::PeriodFromLoop { .. } => "period-from-loop",
            Evidence::Invariance { .. } => "invariance",
            Evidence::Exclusion { .. } => "exclusion",
            Evidence::Failure { .. } => "failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub value: Interval,
}

/// A serializable verdict for one proof obligation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub format_version: u32,
    pub tool: String,
    pub created: String,
    pub duration_seconds: f64,
    pub case: CaseId,
    pub parameters: Vec<Parameter>,
    /// The vector field: monomials with interval coefficients.
    pub field: String,
    pub rounding_policy: String,
    pub settings: RunSettings,
    pub claim: String,
    pub verdict: bool,
    pub evidence: Evidence,
}

impl Certificate {
    pub fn new(
        case: CaseId,
        field: &PolyField,
        settings: &RunSettings,
        claim: String,
        evidence: Evidence,
        verdict: bool,
        duration: Duration,
    ) -> Self {
        Certificate {
            format_version: FORMAT_VERSION,
            tool: format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
            created: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            duration_seconds: duration.as_secs_f64(),
            case,
            parameters: field
                .parameters()
                .iter()
                .map(|p| Parameter {
                    name: p.name.clone(),
                    value: p.value,
                })
                .collect(),
            field: field.dump(),
            rounding_policy: ROUNDING_POLICY.to_string(),
            settings: settings.clone(),
            claim,
            verdict,
            evidence,
        }
    }

    /// The deterministic part of the certificate.
    pub fn evidence_text(&self) -> String {
        serde_json::to_string_pretty(&self.evidence).expect("evidence serializes")
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_text(s: &str) -> Result<Self, CertificateError> {
        Ok(serde_json::from_str(s)?)
    }

    /// Default file name, e.g. `a47-case6.cert`.
    pub fn file_name(&self) -> String {
        format!("{}.cert", self.case.file_stem())
    }

    /// Writes the certificate into `dir` and returns its path.
    pub fn write_to(&self, dir: &Path) -> Result<PathBuf, CertificateError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CertificateError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let path = dir.join(self.file_name());
        std::fs::write(&path, self.to_text() + "\n").map_err(io(&path))?;
        Ok(path)
    }

    /// Re-validates the recorded evidence against the verdict using only the
    /// stored boxes. A positive verdict must be backed by evidence that
    /// passes every check; a negative verdict is always consistent.
    pub fn recheck(&self) -> Result<(), CertificateError> {
        if !self.verdict {
            return Ok(());
        }
        let bad = |m: String| Err(CertificateError::Invalid(m));
        match &self.evidence {
            Evidence::PeriodicOrbit {
                period,
                newton,
                orbit,
                orbit_distinct,
                ..
            } => {
                if newton.verdict != NewtonVerdict::UniqueFixedPoint {
                    return bad("Newton verdict is not a unique fixed point".into());
                }
                match &newton.operator {
                    Some(n) if n.strictly_inside(&newton.search_box) => {}
                    _ => return bad("Newton operator is not inside the search box".into()),
                }
                let enclosure = newton.enclosure.as_ref();
                if enclosure.is_none_or(|e| !e.subset(&newton.search_box)) {
                    return bad("enclosure is not inside the search box".into());
                }
                if orbit.len() != *period {
                    return bad(format!("{} orbit boxes for period {period}", orbit.len()));
                }
                let distinct = (0..orbit.len()).all(|i| (i + 1..orbit.len()).all(|j| orbit[i].disjoint(&orbit[j])));
                if !(distinct && *orbit_distinct) {
                    return bad("orbit boxes are not pairwise disjoint".into());
                }
                Ok(())
            }
            Evidence::CoveringChain { edges, .. } => {
                for e in edges {
                    e.recheck()
                        .map_err(|err| CertificateError::Invalid(format!("{}: {err}", e.label())))?;
                }
                Ok(())
            }
            Evidence::PeriodFromLoop {
                period_loop,
                edges,
                fundamental,
                ..
            } => {
                for e in edges {
                    e.recheck()
                        .map_err(|err| CertificateError::Invalid(format!("{}: {err}", e.label())))?;
                }
                for s in &period_loop.steps {
                    let backed = edges
                        .iter()
                        .any(|e| e.source.name == s.source && e.target.name == s.target && e.iterate == s.iterate);
                    if !backed {
                        return bad(format!("loop step {} -> {} has no verified edge", s.source, s.target));
                    }
                }
                if fundamental.is_none() {
                    return bad("fundamental period not justified".into());
                }
                Ok(())
            }
            Evidence::Invariance { report, .. } => {
                if !(report.invariant && report.offending_count == 0 && report.verified == report.pieces) {
                    return bad("some pieces are not mapped into the interior".into());
                }
                Ok(())
            }
            Evidence::Exclusion { invariance, report, .. } => {
                if !invariance.invariant {
                    return bad("forward invariance not established".into());
                }
                if report.verdict != ExclusionVerdict::Excluded {
                    return bad("exclusion verdict is not Excluded".into());
                }
                if let Some(s) = &report.residual.s {
                    let unique = |r: &Option<NewtonResult>| {
                        r.as_ref().is_some_and(|r| r.verdict == NewtonVerdict::UniqueFixedPoint)
                    };
                    if !(unique(&report.newton_iterate) && unique(&report.newton_map)) {
                        return bad("uniqueness in S not established for both maps".into());
                    }
                    let covers_s = [&report.newton_iterate, &report.newton_map]
                        .iter()
                        .all(|r| r.as_ref().is_some_and(|r| s.subset(&r.search_box)));
                    if !covers_s {
                        return bad("Newton search box does not contain S".into());
                    }
                }
                Ok(())
            }
            Evidence::Failure { stage, .. } => bad(format!("positive verdict with failed stage {stage}")),
        }
    }
}
