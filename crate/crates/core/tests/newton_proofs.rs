//! Interval Newton proofs of periodic orbits and the exclusion argument.

mod common;

use common::{rossler_iterate, rossler_iterate_jacobian};
use roessler_core::cases::System;
use roessler_core::integrator::IntegratorSettings;
use roessler_core::interval::{Interval, IntervalBox, IntervalMatrix};
use roessler_core::newton::{
    any_stationary_point, interval_newton, newton_divided, no_period_n, what_is_not_mapped_outside, ChartSet,
    ExclusionVerdict, NewtonVerdict,
};
use roessler_core::planemap::{AffinePlaneMap, ChartMap};
use roessler_core::poincare::{AffineChart, ReturnMap};

/// Floating-point Newton on the reference return map.
fn reference_fixed_point(a: f64, start: (f64, f64), n: usize) -> (f64, f64) {
    let (mut y, mut z) = start;
    for _ in 0..6 {
        let (py, pz) = rossler_iterate(a, 0.2, y, z, n).unwrap();
        let j = rossler_iterate_jacobian(a, 0.2, y, z, n, [1e-7, 1e-9]);
        let (g0, g1) = (py - y, pz - z);
        let (m00, m01, m10, m11) = (j[0] - 1.0, j[1], j[2], j[3] - 1.0);
        let det = m00 * m11 - m01 * m10;
        y -= (m11 * g0 - m01 * g1) / det;
        z -= (-m10 * g0 + m00 * g1) / det;
    }
    (y, z)
}

fn check_orbit(system: System, a: f64, n: usize) {
    let field = system.field();
    let map = ChartMap::section(ReturnMap::new(&field, IntegratorSettings::default()).unwrap());
    let orbit = system.constants().orbit(n).unwrap();
    let s = orbit.start_point().unwrap();
    let (y, z) = reference_fixed_point(a, (s[0], s[1]), n);
    let sp = any_stationary_point(&map, &[y, z], n, &[1e-7, 1e-9]).unwrap();
    assert_eq!(sp.newton.verdict, NewtonVerdict::UniqueFixedPoint);
    assert_eq!(sp.orbit.len(), n);
    assert!(sp.orbit_distinct());
    // the reference point lies in the enclosure up to its own accuracy
    let e = &sp.orbit[0];
    assert!((e[0].mid() - y).abs() < 1e-9 && (e[1].mid() - z).abs() < 1e-11);

    let published = orbit.paper_boxes().unwrap();
    let mut hit = vec![false; n];
    for b in &sp.orbit {
        assert!(b[0].width() <= 1e-9 && b[1].width() <= 1e-9, "{b} too wide");
        let i = published
            .iter()
            .position(|p| b.subset(&p.inflate(0.0, 1e-9)))
            .unwrap_or_else(|| panic!("period {n}: {b} is in no published box"));
        hit[i] = true;
    }
    assert!(hit.iter().all(|&h| h), "period {n}: some published box was not visited");
}

#[test]
fn three_cycle_at_525() {
    check_orbit(System::A525, 5.25, 3);
}

#[test]
fn two_cycle_at_47() {
    check_orbit(System::A47, 4.7, 2);
}

#[test]
fn four_cycle_at_47() {
    check_orbit(System::A47, 4.7, 4);
}

#[test]
fn five_cycle_at_47() {
    check_orbit(System::A47, 4.7, 5);
}

#[test]
fn box_beside_the_orbit_is_not_proved() {
    let field = System::A525.field();
    let map = ChartMap::section(ReturnMap::new(&field, IntegratorSettings::default()).unwrap());
    let (y, z) = reference_fixed_point(5.25, (-3.4664, 0.03463), 3);
    let c = [y + 1e-6, z];
    let x = IntervalBox::centered(&c, &[1e-10, 1e-12]);
    let r = interval_newton(&map, &c, &x, 3).unwrap();
    assert_ne!(r.verdict, NewtonVerdict::UniqueFixedPoint);
    assert!(r.enclosure.is_none());
}

fn plane_set(lo: [f64; 2], hi: [f64; 2]) -> ChartSet {
    ChartSet {
        chart: AffineChart::identity(),
        chart_box: IntervalBox::new(vec![
            Interval::new(lo[0], hi[0]).unwrap(),
            Interval::new(lo[1], hi[1]).unwrap(),
        ]),
    }
}

#[test]
fn translation_leaves_nothing_to_exclude() {
    let set = plane_set([-1.0, -1.0], [1.0, 1.0]);
    let f = AffinePlaneMap::translation(&[0.5, 0.0]);
    let rep = no_period_n(&f, &f, &set, 3, &[20, 20], 0, &[2, 2]).unwrap();
    assert_eq!(rep.verdict, ExclusionVerdict::Excluded);
    assert!(rep.residual.s.is_none() && rep.residual.retained.is_empty());
}

#[test]
fn identity_keeps_everything_and_stays_unproven() {
    let set = plane_set([-1.0, -1.0], [1.0, 1.0]);
    let f = AffinePlaneMap::identity(2);
    let rep = no_period_n(&f, &f, &set, 2, &[8, 4], 1, &[2, 2]).unwrap();
    assert_eq!(rep.verdict, ExclusionVerdict::Unproven);
    assert_eq!(rep.residual.retained.len(), 64);
    assert_eq!(rep.residual.s.as_ref(), Some(&set.chart_box));
}

#[test]
fn rotation_by_a_third_is_never_excluded() {
    let set = plane_set([-1.0, -1.0], [1.0, 1.0]);
    let f = AffinePlaneMap::rotation_third();
    let rep = no_period_n(&f, &f, &set, 3, &[10, 10], 1, &[2, 2]).unwrap();
    assert_eq!(rep.verdict, ExclusionVerdict::Unproven);
}

#[test]
fn contraction_has_no_period_two_and_finer_grids_shrink_s() {
    let set = plane_set([-1.0, -1.0], [1.0, 1.0]);
    let f = AffinePlaneMap::new(
        "contraction",
        IntervalMatrix::from_f64(2, 2, &[0.5, 0.1, -0.1, 0.4]),
        IntervalBox::from_points(&[0.1, -0.2]),
    );
    let mut prev: Option<IntervalBox> = None;
    for g in [4, 8, 16, 32] {
        let res = what_is_not_mapped_outside(&f, &set.chart, &set.chart_box, 2, &[g, g], 0);
        let s = res.s.clone().unwrap();
        if let Some(p) = &prev {
            assert!(s.subset(p), "grid {g}: {s} not within {p}");
        }
        prev = Some(s);
    }
    let rep = no_period_n(&f, &f, &set, 2, &[32, 32], 0, &[2, 2]).unwrap();
    assert_eq!(rep.verdict, ExclusionVerdict::Excluded, "{:?}", rep.argument);
    let fixed = rep.newton_map.unwrap().enclosure.unwrap();
    let again = newton_divided(&f, &fixed.inflate(0.0, 1e-9), 2, &[1, 1]).unwrap();
    assert_eq!(again.verdict, NewtonVerdict::UniqueFixedPoint);
}
