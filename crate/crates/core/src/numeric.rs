//! Non-validated floating-point flow and return map.
//!
//! Used to discover candidate orbits and successor orderings, to produce
//! figure data, and as a reference in tests. Nothing computed here is
//! rigorous.

use crate::field::PolyField;

/// Fixed-step Taylor integrator in `f64`.
#[derive(Clone, Debug)]
pub struct FloatFlow<'f> {
    field: &'f PolyField,
    order: usize,
    step: f64,
}

/// Result of one non-validated return.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FloatReturn {
    pub y: f64,
    pub z: f64,
    pub time: f64,
}

impl<'f> FloatFlow<'f> {
    pub fn new(field: &'f PolyField, order: usize, step: f64) -> Self {
        assert!(order >= 1 && step > 0.0, "order and step must be positive");
        FloatFlow { field, order, step }
    }

    /// High-accuracy defaults for reference computations.
    pub fn reference(field: &'f PolyField) -> Self {
        FloatFlow::new(field, 30, 0.01)
    }

    fn taylor_step(&self, x: &[f64], h: f64) -> Vec<f64> {
        self.field.taylor(x, self.order, false).eval(h)
    }

    /// `Φ_t(x)` for `t ≥ 0`.
    pub fn flow(&self, x: &[f64], t: f64) -> Vec<f64> {
        assert!(t >= 0.0, "forward time only");
        let mut x = x.to_vec();
        let mut elapsed = 0.0;
        while elapsed < t {
            let h = self.step.min(t - elapsed);
            x = self.taylor_step(&x, h);
            elapsed += h;
        }
        x
    }

    /// Next crossing of `x = 0` with `x' > 0` and `y < 0`, starting from the
    /// section point `(0, y, z)`; `None` if none within `max_time`.
    pub fn return_map(&self, y: f64, z: f64, max_time: f64) -> Option<FloatReturn> {
        let mut x = vec![0.0, y, z];
        let mut elapsed = 0.0;
        let mut left = false;
        while elapsed < max_time {
            let series = self.field.taylor(&x, self.order, false);
            let next = series.eval(self.step);
            if !next.iter().all(|v| v.is_finite()) {
                return None;
            }
            if next[0] > 0.0 {
                left = true;
            }
            if left && x[0] < 0.0 && next[0] >= 0.0 && next[1] < 0.0 {
                // bisection on the step polynomial
                let (mut a, mut b) = (0.0, self.step);
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    if series.eval(m)[0] < 0.0 {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let p = series.eval(b);
                return Some(FloatReturn {
                    y: p[1],
                    z: p[2],
                    time: elapsed + b,
                });
            }
            x = next;
            elapsed += self.step;
        }
        None
    }

    /// `Pⁿ(y, z)` with the total return time.
    pub fn iterate(&self, y: f64, z: f64, n: usize) -> Option<FloatReturn> {
        let mut p = FloatReturn { y, z, time: 0.0 };
        for _ in 0..n {
            let r = self.return_map(p.y, p.z, 50.0)?;
            p = FloatReturn {
                y: r.y,
                z: r.z,
                time: p.time + r.time,
            };
        }
        Some(p)
    }

    /// Central finite-difference Jacobian of `Pⁿ` (row-major 2×2).
    pub fn iterate_jacobian(&self, y: f64, z: f64, n: usize, eps: [f64; 2]) -> Option<[f64; 4]> {
        let mut j = [0.0; 4];
        for (col, e) in eps.iter().enumerate() {
            let (dy, dz) = if col == 0 { (*e, 0.0) } else { (0.0, *e) };
            let plus = self.iterate(y + dy, z + dz, n)?;
            let minus = self.iterate(y - dy, z - dz, n)?;
            j[col] = (plus.y - minus.y) / (2.0 * e);
            j[2 + col] = (plus.z - minus.z) / (2.0 * e);
        }
        Some(j)
    }

    /// Newton iteration for a fixed point of `Pⁿ` from `(y, z)`.
    pub fn periodic_point(&self, y: f64, z: f64, n: usize) -> Option<[f64; 2]> {
        let mut p = [y, z];
        for _ in 0..30 {
            let img = self.iterate(p[0], p[1], n)?;
            let g = [img.y - p[0], img.z - p[1]];
            let j = self.iterate_jacobian(p[0], p[1], n, [1e-7, 1e-9])?;
            let a = [j[0] - 1.0, j[1], j[2], j[3] - 1.0];
            let det = a[0] * a[3] - a[1] * a[2];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let d = [(a[3] * g[0] - a[1] * g[1]) / det, (a[0] * g[1] - a[2] * g[0]) / det];
            p = [p[0] - d[0], p[1] - d[1]];
            if d[0].abs() < 1e-14 * (1.0 + p[0].abs()) && d[1].abs() < 1e-15 {
                break;
            }
        }
        Some(p)
    }
}
