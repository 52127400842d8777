//! Rigorous return maps checked against an independently integrated
//! return map and against the published periodic orbits.

mod common;

use common::{rossler_iterate, rossler_iterate_jacobian, rossler_return};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roessler_core::cases::System;
use roessler_core::field::PolyField;
use roessler_core::integrator::IntegratorSettings;
use roessler_core::interval::{Interval, IntervalBox};
use roessler_core::planemap::{ChartMap, PlaneMap};
use roessler_core::poincare::{PoincareError, ReturnMap};

fn return_map(field: &PolyField) -> ReturnMap<'_> {
    ReturnMap::new(field, IntegratorSettings::default()).unwrap()
}

fn contains_with_slack(b: &IntervalBox, p: (f64, f64), slack: f64) -> bool {
    b[0].lo() - slack <= p.0 && p.0 <= b[0].hi() + slack && b[1].lo() - slack <= p.1 && p.1 <= b[1].hi() + slack
}

fn orbit_boxes(system: System, period: usize) -> Vec<IntervalBox> {
    system.constants().orbit(period).unwrap().paper_boxes().unwrap()
}

#[test]
fn published_three_cycle_returns_to_itself() {
    let field = System::A525.field();
    let map = return_map(&field);
    let boxes = orbit_boxes(System::A525, 3);
    let img = map.poincare_map(&boxes[0], 3).unwrap();
    assert!(img.image.intersect(&boxes[0]).is_ok(), "{} vs {}", img.image, boxes[0]);
    assert!(img.return_time.lo() > 0.0 && img.return_time.hi() < 30.0);
}

#[test]
fn published_five_cycle_returns_to_itself() {
    let field = System::A47.field();
    let map = return_map(&field);
    let boxes = orbit_boxes(System::A47, 5);
    let img = map.poincare_map(&boxes[0], 5).unwrap();
    assert!(img.image.intersect(&boxes[0]).is_ok(), "{} vs {}", img.image, boxes[0]);
}

#[test]
fn published_orbit_points_follow_each_other() {
    let field = System::A47.field();
    let map = return_map(&field);
    for period in [2, 4, 5] {
        let boxes = orbit_boxes(System::A47, period);
        for i in 0..period {
            let img = map.poincare_map(&boxes[i], 1).unwrap().image;
            let next = &boxes[(i + 1) % period];
            assert!(
                img.intersect(next).is_ok(),
                "period {period}: P(box {i}) = {img} misses {next}"
            );
        }
    }
}

#[test]
fn image_contains_the_reference_return() {
    let field = System::A525.field();
    let map = return_map(&field);
    let b = IntervalBox::new(vec![
        Interval::new(-5.01, -5.0).unwrap(),
        Interval::new(0.033, 0.0331).unwrap(),
    ]);
    let whole = map.poincare_map(&b, 1).unwrap();
    let grid = map.poincare_map_grid(&b, 1, (4, 1)).hull().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let y = rng.gen_range(b[0].lo()..=b[0].hi());
        let z = rng.gen_range(b[1].lo()..=b[1].hi());
        let (y1, z1, t) = rossler_return(5.25, 0.2, y, z).unwrap();
        assert!(contains_with_slack(&whole.image, (y1, z1), 1e-9));
        assert!(contains_with_slack(&grid.image, (y1, z1), 1e-9));
        assert!(whole.return_time.lo() - 1e-9 <= t && t <= whole.return_time.hi() + 1e-9);
    }
    let w = |x: &IntervalBox| x[0].width() + x[1].width();
    assert!(
        w(&grid.image) <= w(&whole.image) * 1.01,
        "{} vs {}",
        grid.image,
        whole.image
    );
}

#[test]
fn derivative_contains_finite_difference_jacobian() {
    let field = System::A525.field();
    let map = return_map(&field);
    let (y, z) = (-6.264, 0.03265);
    let r = 1e-7;
    let b = IntervalBox::new(vec![
        Interval::new(y - r, y + r).unwrap(),
        Interval::new(z - r, z + r).unwrap(),
    ]);
    let d = map.poincare_derivative(&b, 1).unwrap();
    let fd = rossler_iterate_jacobian(5.25, 0.2, y, z, 1, [1e-5, 1e-7]);
    for k in 0..4 {
        let e = d[(k / 2, k % 2)];
        let slack = 1e-5 * (1.0 + fd[k].abs());
        assert!(
            e.lo() - slack <= fd[k] && fd[k] <= e.hi() + slack,
            "DP[{k}] = {e} vs {}",
            fd[k]
        );
    }
}

#[test]
fn three_cycle_is_attracting_at_525() {
    let field = System::A525.field();
    let map = return_map(&field);
    let b = &orbit_boxes(System::A525, 3)[1];
    let d = map.poincare_derivative(b, 3).unwrap();
    let det = d[(0, 0)] * d[(1, 1)] - d[(0, 1)] * d[(1, 0)];
    assert!(det.mag() < 1.0, "det DP³ = {det}");
    // the cycle is attracting at this parameter; the trace agrees with the
    // reference return map
    let tr = d[(0, 0)] + d[(1, 1)];
    assert!(tr.mag() < 1.0, "tr = {tr}");
    let fd = rossler_iterate_jacobian(5.25, 0.2, b[0].mid(), b[1].mid(), 3, [1e-6, 1e-8]);
    assert!(
        (tr.mid() - (fd[0] + fd[3])).abs() < 1e-4,
        "tr = {tr}, reference {}",
        fd[0] + fd[3]
    );
}

#[test]
fn trapping_region_points_map_like_the_reference() {
    let field = System::A47.field();
    let set = System::A47.constants().trapping.as_ref().unwrap().set().unwrap();
    let map = ChartMap::new(return_map(&field), set.chart.clone());
    let section = return_map(&field);
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..20 {
        let u = [
            rng.gen_range(set.chart_box[0].lo()..=set.chart_box[0].hi()),
            rng.gen_range(set.chart_box[1].lo()..=set.chart_box[1].hi()),
        ];
        let p = set.chart.forward_point(&u);
        let (y1, z1, t) = rossler_return(4.7, 0.2, p[0], p[1]).unwrap();
        assert!(t > 0.0 && t < 10.0);
        let sec = section.poincare_map(&IntervalBox::from_points(&p), 1).unwrap();
        assert!(
            contains_with_slack(&sec.image, (y1, z1), 1e-8),
            "{} vs ({y1}, {z1})",
            sec.image
        );
        assert!(sec.return_time.lo() > 0.0 && sec.return_time.hi() < 10.0);
        let img = map.image(&IntervalBox::from_points(&u), 1).unwrap();
        assert!(img.strictly_inside(&set.chart_box), "{img} leaves 𝒜");
    }
}

#[test]
fn iterates_compose() {
    let field = System::A525.field();
    let map = return_map(&field);
    let p = IntervalBox::from_points(&[-4.0, 0.034]);
    let two = map.poincare_map(&p, 2).unwrap().image;
    let one = map.poincare_map(&p, 1).unwrap().image;
    let again = map.poincare_map(&one, 1).unwrap().image;
    assert!(two.intersect(&again).is_ok());
    let q = rossler_iterate(5.25, 0.2, -4.0, 0.034, 2).unwrap();
    assert!(contains_with_slack(&two, q, 1e-8));
}

#[test]
fn inadmissible_boxes_are_rejected() {
    let field = System::A525.field();
    let map = return_map(&field);
    let b = IntervalBox::new(vec![Interval::new(-0.1, 0.1).unwrap(), Interval::point(0.03)]);
    assert!(matches!(map.poincare_map(&b, 1), Err(PoincareError::NotAdmissible(_))));
}
