//! Non-rigorous data behind the usual pictures of the Rössler return map:
//! bifurcation diagrams, attractor sections and the one-dimensional model
//! map. Everything here uses the floating-point flow of [`crate::numeric`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::field::PolyField;
use crate::interval::Interval;
use crate::numeric::FloatFlow;

/// Integrator and sampling parameters for exploration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExploreSettings {
    pub b: f64,
    pub order: usize,
    pub step: f64,
    /// Returns discarded before sampling.
    pub transient: usize,
    /// Returns recorded per parameter value.
    pub samples: usize,
    /// Section point `(y, z)` every trajectory starts from.
    pub start: [f64; 2],
    /// Longest time allowed between two returns.
    pub max_return_time: f64,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        ExploreSettings {
            b: 0.2,
            order: 12,
            step: 0.04,
            transient: 200,
            samples: 100,
            start: [-5.0, 0.03],
            max_return_time: 50.0,
        }
    }
}

/// Named columns of numbers, ready to be written as CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Section points `(y, z)` after the transient, or `None` if the trajectory
/// stops returning.
fn orbit(a: f64, s: &ExploreSettings) -> Option<Vec<[f64; 2]>> {
    let f = PolyField::rossler(Interval::point(a), Interval::point(s.b));
    let flow = FloatFlow::new(&f, s.order, s.step);
    let [mut y, mut z] = s.start;
    let mut out = Vec::with_capacity(s.samples);
    for i in 0..s.transient + s.samples {
        let r = flow.return_map(y, z, s.max_return_time)?;
        (y, z) = (r.y, r.z);
        if i >= s.transient {
            out.push([y, z]);
        }
    }
    Some(out)
}

fn orbit_or_warn(a: f64, s: &ExploreSettings) -> Vec<[f64; 2]> {
    orbit(a, s).unwrap_or_else(|| {
        log::warn!("a = {a}: trajectory stopped returning to the section; skipped");
        Vec::new()
    })
}

/// `(a, y)` for `steps` equally spaced values of `a` in `[a_min, a_max]`.
pub fn bifurcation(a_min: f64, a_max: f64, steps: usize, s: &ExploreSettings) -> Table {
    assert!(steps >= 1 && a_min <= a_max, "invalid parameter range");
    let values: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                a_min
            } else {
                a_min + (a_max - a_min) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let per_a: Vec<(f64, Vec<[f64; 2]>)> = values.into_par_iter().map(|a| (a, orbit_or_warn(a, s))).collect();
    let mut t = Table::new(&["a", "y"]);
    for (a, pts) in per_a {
        t.rows.extend(pts.into_iter().map(|[y, _]| vec![a, y]));
    }
    t
}

/// Post-transient section points `(y, z)`.
pub fn attractor(a: f64, s: &ExploreSettings) -> Table {
    let mut t = Table::new(&["y", "z"]);
    t.rows = orbit_or_warn(a, s).into_iter().map(|[y, z]| vec![y, z]).collect();
    t
}

/// Pairs `(y, y')` of consecutive returns along the attractor: the graph of
/// the model map `y ↦ π_y P(y, z)`.
pub fn modelmap(a: f64, s: &ExploreSettings) -> Table {
    let mut t = Table::new(&["y", "next_y"]);
    let pts = orbit_or_warn(a, s);
    t.rows = pts.windows(2).map(|w| vec![w[0][0], w[1][0]]).collect();
    t
}

/// Number of groups of `values` separated by gaps larger than `gap`.
pub fn cluster_count(values: &[f64], gap: f64) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return 0;
    }
    1 + v.windows(2).filter(|w| w[1] - w[0] > gap).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> ExploreSettings {
        ExploreSettings {
            transient: 100,
            samples: 30,
            ..ExploreSettings::default()
        }
    }

    #[test]
    fn three_cycle_section_at_525() {
        let t = attractor(5.25, &quick());
        let y = t.column("y").unwrap();
        assert_eq!(cluster_count(&y, 0.1), 3);
        for c in [-3.47, -6.26, -9.75] {
            assert!(y.iter().any(|v| (v - c).abs() < 0.01), "no point near {c}");
        }
    }

    #[test]
    fn cluster_count_basics() {
        assert_eq!(cluster_count(&[], 0.1), 0);
        assert_eq!(cluster_count(&[1.0, 1.01, 2.0], 0.1), 2);
    }
}
