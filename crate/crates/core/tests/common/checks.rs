//! Property checks shared by the test suites and the acceptance run. Each
//! returns a one-line summary or the first counterexample.

use num::rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roessler_core::covering::sharkovskii_less;
use roessler_core::field::PolyField;
use roessler_core::integrator::{Integrator, IntegratorSettings};
use roessler_core::interval::{Interval, IntervalBox, IntervalError};

use super::{e_bracket, half_pi, holds, rat, rossler_flow};

#[derive(Clone, Copy, Debug)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

pub const OPS: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

pub fn apply(op: Op, a: &Interval, b: &Interval) -> Result<Interval, IntervalError> {
    Ok(match op {
        Op::Add => *a + *b,
        Op::Sub => *a - *b,
        Op::Mul => *a * *b,
        Op::Div => a.checked_div(b)?,
    })
}

fn exact(op: Op, x: &BigRational, y: &BigRational) -> BigRational {
    match op {
        Op::Add => x + y,
        Op::Sub => x - y,
        Op::Mul => x * y,
        Op::Div => x / y,
    }
}

/// A random double spread over many binades, including exact integers.
fn sample_f64(rng: &mut ChaCha8Rng) -> f64 {
    match rng.gen_range(0..4) {
        0 => rng.gen_range(-10.0..10.0),
        1 => rng.gen_range(-1e6..1e6),
        2 => {
            let m: f64 = rng.gen_range(-1.0..1.0);
            m * 2f64.powi(rng.gen_range(-60..60))
        }
        _ => rng.gen_range(-50..50) as f64,
    }
}

pub fn random_interval(rng: &mut ChaCha8Rng) -> Interval {
    let a = sample_f64(rng);
    let w = if rng.gen_bool(0.2) { 0.0 } else { sample_f64(rng).abs() };
    Interval::new(a, a + w).unwrap()
}

pub fn point_in(rng: &mut ChaCha8Rng, x: &Interval) -> f64 {
    match rng.gen_range(0..4) {
        0 => x.lo(),
        1 => x.hi(),
        _ => rng.gen_range(0.0..=1.0) * (x.hi() - x.lo()) + x.lo(),
    }
    .clamp(x.lo(), x.hi())
}

/// Every exact result `x ∘ y` of points in the operands lies in `X ∘ Y`;
/// `samples` is the total over the four operations.
pub fn containment_fuzz(samples: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0usize;
    for i in 0..samples {
        let op = OPS[i % 4];
        let a = random_interval(&mut rng);
        let b = random_interval(&mut rng);
        let x = point_in(&mut rng, &a);
        let y = point_in(&mut rng, &b);
        match apply(op, &a, &b) {
            Ok(r) => {
                let v = exact(op, &rat(x), &rat(y));
                if !holds(&v, &r) {
                    return Err(format!("{op:?} {a} {b} at ({x}, {y}) gives {r}"));
                }
                checked += 1;
            }
            Err(IntervalError::DivisionByZeroInterval) if b.contains(0.0) => {}
            Err(e) => return Err(format!("{op:?} {a} {b}: unexpected error {e}")),
        }
    }
    if checked < samples * 9 / 10 {
        return Err(format!("only {checked} of {samples} samples were checked"));
    }
    Ok(format!("{samples} samples, {checked} enclosures checked exactly"))
}

fn nested(rng: &mut ChaCha8Rng) -> (Interval, Interval) {
    let o = random_interval(rng);
    let a = point_in(rng, &o);
    let b = point_in(rng, &o).max(a);
    (Interval::new(a, b).unwrap(), o)
}

/// `X' ⊆ X, Y' ⊆ Y ⇒ X' ∘ Y' ⊆ X ∘ Y` for `triples` random nested pairs.
pub fn inclusion_monotonicity(triples: usize, seed: u64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..triples {
        let (a, a2) = nested(&mut rng);
        let (b, b2) = nested(&mut rng);
        for op in OPS {
            match (apply(op, &a, &b), apply(op, &a2, &b2)) {
                (Ok(r), Ok(r2)) if !r.subset(&r2) => return Err(format!("{op:?}: {r} not in {r2}")),
                (Ok(_), Err(_)) if !b2.contains(0.0) => return Err(format!("{op:?}: outer operands fail")),
                (Err(_), Ok(_)) => return Err(format!("{op:?}: inner operands fail, outer succeed")),
                _ => {}
            }
        }
    }
    Ok(format!("{triples} nested triples, 4 operations each"))
}

/// `x' = x` to `t = 1` encloses `e` with width below 1e-9, and the rotation
/// to `π/2` encloses `(0, 1)` with width below 1e-8.
pub fn closed_form_oracles() -> Result<String, String> {
    let f = PolyField::exponential();
    let integ = Integrator::new(&f, IntegratorSettings::default()).map_err(|e| e.to_string())?;
    let r = integ
        .flow(&IntervalBox::from_points(&[1.0]), Interval::ONE, false)
        .map_err(|e| e.to_string())?;
    let e = r.endpoint[0];
    let (lo, hi) = e_bracket();
    if !(holds(&lo, &e) && holds(&hi, &e) && e.width() < 1e-9) {
        return Err(format!("e enclosure {e}"));
    }
    let f = PolyField::rotation();
    let integ = Integrator::new(&f, IntegratorSettings::default()).map_err(|e| e.to_string())?;
    let r = integ
        .flow(&IntervalBox::from_points(&[1.0, 0.0]), half_pi(), false)
        .map_err(|e| e.to_string())?;
    let p = r.endpoint;
    if !(p[0].contains(0.0) && p[1].contains(1.0) && p[0].width() < 1e-8 && p[1].width() < 1e-8) {
        return Err(format!("rotation enclosure {p}"));
    }
    Ok(format!(
        "e width {:.1e}, rotation width {:.1e}",
        e.width(),
        p[0].width().max(p[1].width())
    ))
}

/// The variational enclosure of the Rössler flow contains the
/// central-difference Jacobian of the reference flow (tolerance 1e-6).
pub fn variational_vs_finite_differences() -> Result<String, String> {
    let f = PolyField::rossler_decimal("5.25", "0.2");
    let integ = Integrator::new(&f, IntegratorSettings::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for p in [[0.0, -4.0, 0.05], [0.0, -6.19, 0.0357], [2.0, 1.0, 0.3]] {
        let r = integ
            .flow(&IntervalBox::from_points(&p), Interval::ONE, true)
            .map_err(|e| e.to_string())?;
        let v = r.variation.ok_or("no variation")?;
        let h = 1e-5;
        for col in 0..3 {
            let (mut pp, mut pm) = (p, p);
            pp[col] += h;
            pm[col] -= h;
            let (qp, qm) = (rossler_flow(5.25, 0.2, pp, 1.0), rossler_flow(5.25, 0.2, pm, 1.0));
            for row in 0..3 {
                let fd = (qp[row] - qm[row]) / (2.0 * h);
                let e = v[(row, col)];
                if !(e.lo() - 1e-6 <= fd && fd <= e.hi() + 1e-6) {
                    return Err(format!("DΦ[{row},{col}] at {p:?} = {e}, finite difference {fd}"));
                }
                worst = worst.max(fd - e.hi()).max(e.lo() - fd);
            }
        }
    }
    Ok(format!("3 points, largest excursion {worst:.1e}"))
}

/// Splitting the initial box into k³ pieces never widens the hull of the
/// images (k = 2, 4).
pub fn subdivision_sharpening() -> Result<String, String> {
    let f = PolyField::rossler_decimal("4.7", "0.2");
    let integ = Integrator::new(&f, IntegratorSettings::default()).map_err(|e| e.to_string())?;
    let x0 = IntervalBox::new(vec![
        Interval::new(-0.01, 0.01).unwrap(),
        Interval::new(-6.2, -6.1).unwrap(),
        Interval::new(0.03, 0.04).unwrap(),
    ]);
    let t = Interval::point(0.5);
    let width = |b: &IntervalBox| (0..3).map(|i| b[i].width()).sum::<f64>();
    let mut prev = integ.flow(&x0, t, false).map_err(|e| e.to_string())?.endpoint;
    let mut widths = vec![width(&prev)];
    for k in [2usize, 4] {
        let mut hull: Option<IntervalBox> = None;
        for p in x0.subdivide(&[k, k, k]) {
            let e = integ.flow(&p, t, false).map_err(|e| e.to_string())?.endpoint;
            hull = Some(match hull {
                None => e,
                Some(h) => h.hull(&e).map_err(|e| e.to_string())?,
            });
        }
        let hull = hull.unwrap();
        if width(&hull) > width(&prev) * (1.0 + 1e-9) || prev.intersect(&hull).is_err() {
            return Err(format!("k={k}: {hull} is not sharper than {prev}"));
        }
        widths.push(width(&hull));
        prev = hull;
    }
    let shown: Vec<String> = widths.iter().map(|w| format!("{w:.3e}")).collect();
    Ok(format!("summed widths {}", shown.join(" > ")))
}

/// The Sharkovskii order written out explicitly up to `limit`.
pub fn sharkovskii_list(limit: u64) -> Vec<u64> {
    let mut list = Vec::new();
    let mut pow = 1;
    while 3 * pow <= limit {
        let mut odd = 3;
        while odd * pow <= limit {
            list.push(odd * pow);
            odd += 2;
        }
        pow *= 2;
    }
    let mut twos: Vec<u64> = (0..).map(|k| 1u64 << k).take_while(|&p| p <= limit).collect();
    twos.reverse();
    list.extend(twos);
    list
}

/// `sharkovskii_less` agrees with the explicit order on every pair.
pub fn sharkovskii_exhaustive(limit: u64) -> Result<String, String> {
    let list = sharkovskii_list(limit);
    if list.len() != limit as usize {
        return Err(format!("explicit order has {} entries", list.len()));
    }
    let mut pos = vec![0usize; limit as usize + 1];
    for (i, &n) in list.iter().enumerate() {
        pos[n as usize] = i;
    }
    for m in 1..=limit {
        for n in 1..=limit {
            if sharkovskii_less(m, n) != (pos[m as usize] < pos[n as usize]) {
                return Err(format!("disagreement on ({m}, {n})"));
            }
        }
    }
    Ok(format!("{} pairs", limit * limit))
}
