//! The vector field, its Taylor coefficients and the validated integrator,
//! checked against closed-form solutions and an independent Taylor solver.

mod common;

use common::{checks, e_bracket, holds, rossler, rossler_flow};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roessler_core::field::PolyField;
use roessler_core::integrator::{Integrator, IntegratorSettings, LohnerSet, VariationSet};
use roessler_core::interval::{Interval, IntervalBox, IntervalMatrix};

fn integrator(field: &PolyField) -> Integrator<'_> {
    Integrator::new(field, IntegratorSettings::default()).unwrap()
}

fn point_box(p: &[f64]) -> IntervalBox {
    IntervalBox::from_points(p)
}

fn rossler_field(a: &str) -> PolyField {
    PolyField::rossler_decimal(a, "0.2")
}

#[test]
fn field_values_at_sample_points() {
    let f = rossler_field("5.25");
    let v = f.eval(&point_box(&[1.0, 2.0, 3.0]));
    // (-y - z, x + b y, b + z (x - a))
    assert!(v[0].contains(-5.0));
    assert!(v[1].contains(1.4));
    assert!(v[2].contains(0.2 + 3.0 * (1.0 - 5.25)));
    let g = rossler_field("4.7");
    let w = g.eval_f64(&[0.0, -6.19, 0.0357]);
    let oracle = rossler(4.7, 0.2, &[0.0, -6.19, 0.0357]);
    for i in 0..3 {
        assert!((w[i] - oracle[i]).abs() < 1e-15);
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = rossler_field("4.7");
    for _ in 0..100 {
        let p: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-8.0..8.0));
        let j = f.jacobian(&point_box(&p));
        let h = 1e-6;
        for col in 0..3 {
            let mut pp = p;
            let mut pm = p;
            pp[col] += h;
            pm[col] -= h;
            let (fp, fm) = (rossler(4.7, 0.2, &pp), rossler(4.7, 0.2, &pm));
            for row in 0..3 {
                let fd = (fp[row] - fm[row]) / (2.0 * h);
                let e = j[(row, col)];
                assert!(
                    (fd - e.mid()).abs() < 1e-7 * (1.0 + fd.abs()),
                    "J[{row},{col}] at {p:?}: {e} vs {fd}"
                );
            }
        }
    }
}

#[test]
fn taylor_coefficients_of_closed_form_solutions() {
    // x' = x from 1: c_k = 1/k!
    let c = PolyField::exponential().taylor_coefficients(&point_box(&[1.0]), 10, false);
    let mut fact = num::BigRational::from_integer(1.into());
    for k in 0..=10 {
        if k > 0 {
            fact *= num::BigRational::from_integer(k.into());
        }
        assert!(holds(
            &(num::BigRational::from_integer(1.into()) / &fact),
            &c.coeffs[k][0]
        ));
    }
    // rotation (x, y)' = (-y, x) from (1, 0): cos, sin
    let r = PolyField::rotation().taylor_coefficients(&point_box(&[1.0, 0.0]), 4, false);
    let expect = [
        [1.0, 0.0],
        [0.0, 1.0],
        [-0.5, 0.0],
        [0.0, -1.0 / 6.0],
        [1.0 / 24.0, 0.0],
    ];
    for (k, e) in expect.iter().enumerate() {
        assert!(
            r.coeffs[k][0].contains(e[0]) && r.coeffs[k][1].contains(e[1]),
            "order {k}"
        );
    }
}

#[test]
fn rossler_taylor_coefficients_match_the_recurrence() {
    let (a, b) = (5.25, 0.2);
    let p = [0.5, -3.0, 0.1];
    let c = rossler_field("5.25").taylor_coefficients(&point_box(&p), 6, true);
    // second coefficient: f'(x) f(x) / 2
    let f = rossler(a, b, &p);
    let df = [-f[1] - f[2], f[0] + b * f[1], f[2] * (p[0] - a) + p[2] * f[0]];
    for i in 0..3 {
        assert!(c.coeffs[1][i].contains(f[i]));
        assert!((c.coeffs[2][i].mid() - df[i] / 2.0).abs() < 1e-14);
    }
    // the variational series starts at the identity and continues with J
    let d = c.derivs.as_ref().unwrap();
    let j = rossler_field("5.25").jacobian_f64(&p);
    for k in 0..9 {
        assert!(d[0][k].contains(if k % 4 == 0 { 1.0 } else { 0.0 }));
        assert!((d[1][k].mid() - j[k]).abs() < 1e-15);
    }
}

#[test]
fn rossler_flow_contains_the_reference_solution() {
    let f = rossler_field("4.7");
    let p = [0.0, -6.19, 0.0357];
    let r = integrator(&f).flow(&point_box(&p), Interval::ONE, false).unwrap();
    let q = rossler_flow(4.7, 0.2, p, 1.0);
    for i in 0..3 {
        assert!(
            r.endpoint[i].contains(q[i]),
            "component {i}: {} vs {}",
            r.endpoint[i],
            q[i]
        );
        assert!(r.endpoint[i].width() < 1e-10);
    }
}

#[test]
fn random_boxes_contain_every_sampled_trajectory() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (a, name) in [(5.25, "5.25"), (4.7, "4.7")] {
        let f = rossler_field(name);
        let integ = integrator(&f);
        for _ in 0..25 {
            let c = [
                rng.gen_range(-6.0..6.0),
                rng.gen_range(-6.0..6.0),
                rng.gen_range(0.0..0.5),
            ];
            let r = 1e-4;
            let x0 = IntervalBox::new(c.iter().map(|&v| Interval::new(v - r, v + r).unwrap()).collect());
            let t = rng.gen_range(0.2..2.0);
            let Ok(enc) = integ.flow(&x0, Interval::point(t), false) else {
                panic!("no enclosure from {c:?} for t={t}");
            };
            for _ in 0..4 {
                let p: [f64; 3] = std::array::from_fn(|i| c[i] + rng.gen_range(-r..=r));
                let q = rossler_flow(a, 0.2, p, t);
                for i in 0..3 {
                    let slack = 1e-9 * (1.0 + q[i].abs());
                    let e = enc.endpoint[i];
                    assert!(
                        e.lo() - slack <= q[i] && q[i] <= e.hi() + slack,
                        "a={a}: Φ_{t}({p:?})[{i}] = {} not in {e}",
                        q[i]
                    );
                }
            }
        }
    }
}

#[test]
fn exponential_variation_contains_e() {
    let f = PolyField::exponential();
    let r = integrator(&f).flow(&point_box(&[2.0]), Interval::ONE, true).unwrap();
    let v = r.variation.unwrap()[(0, 0)];
    let (lo, hi) = e_bracket();
    assert!(holds(&lo, &v) && holds(&hi, &v), "{v}");
}

#[test]
fn closed_form_solutions_are_enclosed_tightly() {
    checks::closed_form_oracles().unwrap();
}

#[test]
fn variational_matrix_contains_finite_differences() {
    checks::variational_vs_finite_differences().unwrap();
}

#[test]
fn subdivision_sharpens_the_enclosure() {
    checks::subdivision_sharpening().unwrap();
}

#[test]
fn integration_is_deterministic() {
    let f = rossler_field("5.25");
    let integ = integrator(&f);
    let x0 = IntervalBox::new(vec![
        Interval::ZERO,
        Interval::new(-3.5, -3.4).unwrap(),
        Interval::new(0.03, 0.04).unwrap(),
    ]);
    let a = integ.flow(&x0, Interval::point(2.0), true).unwrap();
    let b = integ.flow(&x0, Interval::point(2.0), true).unwrap();
    assert_eq!(a.endpoint, b.endpoint);
    assert_eq!(a.variation, b.variation);
    assert_eq!(a.steps, b.steps);
}

#[test]
fn wider_initial_boxes_give_wider_images() {
    let f = rossler_field("5.25");
    let integ = integrator(&f);
    let c = [0.0, -3.46, 0.035];
    let mut prev_width = 0.0;
    let mut prev: Option<IntervalBox> = None;
    for r in [0.0, 1e-8, 1e-6, 1e-4] {
        let x0 = IntervalBox::new(c.iter().map(|&v| Interval::new(v - r, v + r).unwrap()).collect());
        let e = integ.flow(&x0, Interval::point(1.5), false).unwrap().endpoint;
        let w: f64 = (0..3).map(|i| e[i].width()).sum();
        assert!(w >= prev_width, "radius {r}: width {w} < {prev_width}");
        if let Some(p) = &prev {
            assert!(p.intersect(&e).is_ok());
        }
        prev_width = w;
        prev = Some(e);
    }
}

#[test]
fn lohner_sets_and_boxes_agree() {
    let f = rossler_field("4.7");
    let integ = integrator(&f);
    let x0 = point_box(&[0.0, -6.19, 0.0357]);
    let a = integ.flow(&x0, Interval::point(0.7), true).unwrap();
    let b = integ
        .flow_set(
            LohnerSet::from_box(&x0),
            Interval::point(0.7),
            Some(VariationSet::identity(3)),
        )
        .unwrap();
    assert_eq!(a.endpoint, b.endpoint);
    let v: IntervalMatrix = b.variation.unwrap();
    assert!((0..3).all(|i| v[(i, i)].width() < 1e-8));
}
