//! Independent oracles shared by the integration tests.
//!
//! Nothing here uses the library's Taylor tape or integrator: exact values
//! come from rational arithmetic, closed-form solutions, or a separately
//! written high-order Taylor integrator for the Rössler field.

#![allow(dead_code)]

use num::rational::BigRational;
use num::{FromPrimitive, ToPrimitive};
use roessler_core::interval::Interval;

pub fn rat(x: f64) -> BigRational {
    BigRational::from_f64(x).expect("finite")
}

/// `true` when the exact rational `v` lies in `x`.
pub fn holds(v: &BigRational, x: &Interval) -> bool {
    &rat(x.lo()) <= v && v <= &rat(x.hi())
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("representable")
}

/// Right-hand side of the Rössler system.
pub fn rossler(a: f64, b: f64, p: &[f64; 3]) -> [f64; 3] {
    [-p[1] - p[2], p[0] + b * p[1], b + p[2] * (p[0] - a)]
}

/// One Taylor step of order `k` for the Rössler system, with the
/// coefficients from the direct Cauchy-product recurrence.
fn rossler_taylor_step(a: f64, b: f64, p: &[f64; 3], h: f64, k: usize) -> [f64; 3] {
    let mut x = vec![p[0]];
    let mut y = vec![p[1]];
    let mut z = vec![p[2]];
    for n in 0..k {
        let xz: f64 = (0..=n).map(|i| x[i] * z[n - i]).sum();
        let m = (n + 1) as f64;
        let dx = -(y[n] + z[n]) / m;
        let dy = (x[n] + b * y[n]) / m;
        let dz = ((if n == 0 { b } else { 0.0 }) + xz - a * z[n]) / m;
        x.push(dx);
        y.push(dy);
        z.push(dz);
    }
    let horner = |c: &[f64]| c.iter().rev().fold(0.0, |acc, v| acc * h + v);
    [horner(&x), horner(&y), horner(&z)]
}

/// Non-validated high-accuracy Rössler flow (order 30, step at most 0.005).
pub fn rossler_flow(a: f64, b: f64, p: [f64; 3], t: f64) -> [f64; 3] {
    let steps = (t / 0.005).ceil().max(1.0) as usize;
    let h = t / steps as f64;
    (0..steps).fold(p, |q, _| rossler_taylor_step(a, b, &q, h, 30))
}

/// Next crossing of `x = 0` upwards with `y < 0` from the section point
/// `(0, y, z)`: `(y', z', return time)`.
pub fn rossler_return(a: f64, b: f64, y: f64, z: f64) -> Option<(f64, f64, f64)> {
    let h = 0.005;
    let mut p = [0.0, y, z];
    let mut t = 0.0;
    let mut left = false;
    while t < 50.0 {
        let q = rossler_taylor_step(a, b, &p, h, 30);
        if q[0] > 0.0 {
            left = true;
        }
        if left && p[0] < 0.0 && q[0] >= 0.0 && q[1] < 0.0 {
            let (mut lo, mut hi) = (0.0, h);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if rossler_taylor_step(a, b, &p, mid, 30)[0] < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let r = rossler_taylor_step(a, b, &p, hi, 30);
            return Some((r[1], r[2], t + hi));
        }
        p = q;
        t += h;
    }
    None
}

/// `Pⁿ` of the oracle return map.
pub fn rossler_iterate(a: f64, b: f64, y: f64, z: f64, n: usize) -> Option<(f64, f64)> {
    let mut q = (y, z);
    for _ in 0..n {
        let r = rossler_return(a, b, q.0, q.1)?;
        q = (r.0, r.1);
    }
    Some(q)
}

/// Central-difference Jacobian of `Pⁿ` (row-major).
pub fn rossler_iterate_jacobian(a: f64, b: f64, y: f64, z: f64, n: usize, eps: [f64; 2]) -> [f64; 4] {
    let mut j = [0.0; 4];
    for col in 0..2 {
        let (dy, dz) = if col == 0 { (eps[0], 0.0) } else { (0.0, eps[1]) };
        let p = rossler_iterate(a, b, y + dy, z + dz, n).expect("returns");
        let m = rossler_iterate(a, b, y - dy, z - dz, n).expect("returns");
        let e = eps[col];
        j[col] = (p.0 - m.0) / (2.0 * e);
        j[2 + col] = (p.1 - m.1) / (2.0 * e);
    }
    j
}

/// `e` to 30 digits as an exact rational bracket.
pub fn e_bracket() -> (BigRational, BigRational) {
    let lo: BigRational = "2718281828459045235360287471352/1000000000000000000000000000000"
        .parse()
        .unwrap();
    let hi: BigRational = "2718281828459045235360287471353/1000000000000000000000000000000"
        .parse()
        .unwrap();
    (lo, hi)
}

/// An enclosure of `π/2`.
pub mod checks;

pub fn half_pi() -> Interval {
    let p = std::f64::consts::FRAC_PI_2;
    Interval::new(p.next_down(), p.next_up()).unwrap()
}
