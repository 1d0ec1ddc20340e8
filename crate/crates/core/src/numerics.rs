//! Small numerical kernels shared across the crate: bracketed root finding,
//! monotone cubic interpolation, adaptive Gauss-Kronrod quadrature, an
//! embedded Dormand-Prince step, and compensated summation.

use crate::error::{Error, Result};

/// Bisection on a bracketed sign change. `f(lo)` and `f(hi)` must have
/// opposite (non-strict) signs; converges to absolute tolerance `xtol`.
pub fn bisect_root(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    xtol: f64,
    max_iter: usize,
    what: &'static str,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Bracketing {
            what,
            detail: format!("no sign change on [{lo}, {hi}]: f(lo)={flo:e}, f(hi)={fhi:e}"),
        });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= xtol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Grow `hi` geometrically from `start` until `f` changes sign relative to
/// `f(start)`. Returns the bracketing interval.
pub fn expand_bracket_up(
    f: impl Fn(f64) -> f64,
    start: f64,
    factor: f64,
    max_expansions: usize,
    what: &'static str,
) -> Result<(f64, f64)> {
    let f0 = f(start);
    if f0 == 0.0 {
        return Ok((start, start));
    }
    let mut lo = start;
    let mut hi = start;
    for _ in 0..max_expansions {
        hi = if hi == 0.0 { 1e-12 } else { hi * factor };
        if !hi.is_finite() {
            break;
        }
        let fh = f(hi);
        if fh == 0.0 || fh.signum() != f0.signum() {
            return Ok((lo, hi));
        }
        lo = hi;
    }
    Err(Error::Bracketing {
        what,
        detail: format!("no sign change found expanding from {start} by factor {factor}"),
    })
}

/// Central first difference with step `h`.
pub fn central_diff1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central second difference with step `h`.
pub fn central_diff2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
}

/// Default finite-difference step used by the test harness and the check
/// suite: `max(1e-6, 1e-6 |x|)`.
pub fn fd_step(x: f64) -> f64 {
    1e-6f64.max(1e-6 * x.abs())
}

// ---------------------------------------------------------------------------
// Monotone piecewise-cubic interpolation
// ---------------------------------------------------------------------------

/// Piecewise-cubic Hermite interpolant of strictly increasing data.
///
/// Node slopes may be supplied (e.g. from an ODE right-hand side); they are
/// projected into the Fritsch-Carlson region so the interpolant is monotone
/// by construction.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.len() != slopes.len() {
            return Err(Error::Solver(format!(
                "interpolation needs >= 2 matching nodes, got {}/{}/{}",
                xs.len(),
                ys.len(),
                slopes.len()
            )));
        }
        for i in 1..xs.len() {
            if !(xs[i] > xs[i - 1]) {
                return Err(Error::Solver(format!(
                    "interpolation abscissae not strictly increasing at index {i}"
                )));
            }
            if !(ys[i] >= ys[i - 1]) {
                return Err(Error::Solver(format!(
                    "interpolation ordinates not nondecreasing at index {i}"
                )));
            }
        }
        // Fritsch-Carlson projection: 0 <= slope <= 3 min(adjacent secants).
        let n = xs.len();
        for i in 0..n {
            let sec_l = if i > 0 {
                (ys[i] - ys[i - 1]) / (xs[i] - xs[i - 1])
            } else {
                f64::INFINITY
            };
            let sec_r = if i + 1 < n {
                (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            } else {
                f64::INFINITY
            };
            let cap = 3.0 * sec_l.min(sec_r);
            slopes[i] = slopes[i].clamp(0.0, cap.max(0.0));
        }
        Ok(Self { xs, ys, slopes })
    }

    /// Interpolant built from values alone, with secant-based slopes.
    pub fn from_points(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        let sec = |a: usize, b: usize| (ys[b] - ys[a]) / (xs[b] - xs[a]);
        let slopes = (0..n)
            .map(|i| {
                if i == 0 {
                    sec(0, 1)
                } else if i + 1 == n {
                    sec(n - 2, n - 1)
                } else {
                    0.5 * (sec(i - 1, i) + sec(i, i + 1))
                }
            })
            .collect();
        Self::with_slopes(xs, ys, slopes)
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().unwrap()
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn segment(&self, x: f64) -> usize {
        match self.xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.xs.len() - 2),
        }
    }

    /// Evaluate at `x` inside `[x_min, x_max]`.
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }

    /// Derivative of the interpolant at `x`.
    pub fn eval_deriv(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let (x0, x1) = (self.xs[i], self.xs[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (y0, y1) = (self.ys[i], self.ys[i + 1]);
        let (d0, d1) = (self.slopes[i], self.slopes[i + 1]);
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * (y0 - y1) / h)
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (3.0 * t2 - 2.0 * t) * d1
    }
}

// ---------------------------------------------------------------------------
// Adaptive Gauss-Kronrod quadrature (G7, K15)
// ---------------------------------------------------------------------------

const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut kron = WGK[7] * f(c);
    let mut gauss = WG[3] * f(c);
    for (j, &x) in XGK.iter().enumerate().take(7) {
        let dx = half * x;
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * half, (kron - gauss).abs() * half)
}

/// Adaptive quadrature of `f` over `[lo, hi]` by recursive interval
/// subdivision of the (G7, K15) pair.
pub fn integrate_adaptive(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<f64> {
    if lo == hi {
        return Ok(0.0);
    }
    let (sign, lo, hi) = if lo < hi {
        (1.0, lo, hi)
    } else {
        (-1.0, hi, lo)
    };
    let (first, first_err) = gk15(&f, lo, hi);
    let mut stack = vec![(lo, hi, first, first_err)];
    let mut total = first;
    let max_intervals = 4000;
    let mut n_intervals = 1;
    while let Some((a, b, est, err)) = stack.pop() {
        if err <= abs_tol.max(rel_tol * total.abs()) * ((b - a) / (hi - lo)).max(1e-3) {
            continue;
        }
        if n_intervals >= max_intervals || (b - a) < 1e-15 * (hi - lo) {
            return Err(Error::Quadrature {
                lo: a,
                hi: b,
                estimate: total,
            });
        }
        let mid = 0.5 * (a + b);
        let (left, el) = gk15(&f, a, mid);
        let (right, er) = gk15(&f, mid, b);
        total += left + right - est;
        n_intervals += 1;
        stack.push((a, mid, left, el));
        stack.push((mid, b, right, er));
    }
    Ok(sign * total)
}

// ---------------------------------------------------------------------------
// Embedded Dormand-Prince 5(4) step
// ---------------------------------------------------------------------------

/// One Dormand-Prince 5(4) step of `y' = f(t, y)`. Returns the fifth-order
/// solution and the embedded error estimate, or `None` if any stage is not
/// finite.
pub fn dopri5_step(f: impl Fn(f64, f64) -> f64, t: f64, y: f64, h: f64) -> Option<(f64, f64)> {
    let k1 = f(t, y);
    let k2 = f(t + h / 5.0, y + h * (k1 / 5.0));
    let k3 = f(t + 3.0 * h / 10.0, y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = f(
        t + 4.0 * h / 5.0,
        y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3),
    );
    let k5 = f(
        t + 8.0 * h / 9.0,
        y + h * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3
            - 212.0 / 729.0 * k4),
    );
    let k6 = f(
        t + h,
        y + h * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2
            + 46732.0 / 5247.0 * k3
            + 49.0 / 176.0 * k4
            - 5103.0 / 18656.0 * k5),
    );
    let y5 = y
        + h * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4
            - 2187.0 / 6784.0 * k5
            + 11.0 / 84.0 * k6);
    let k7 = f(t + h, y5);
    let y4 = y
        + h * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4
            - 92097.0 / 339200.0 * k5
            + 187.0 / 2100.0 * k6
            + k7 / 40.0);
    let err = y5 - y4;
    if y5.is_finite() && err.is_finite() {
        Some((y5, err.abs()))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// Compensated summation
// ---------------------------------------------------------------------------

/// Kahan compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    c: f64,
}

impl KahanSum {
    pub fn add(&mut self, v: f64) {
        let y = v - self.c;
        let t = self.sum + y;
        self.c = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// Streaming mean/variance accumulator (Welford) with a deterministic
/// pairwise merge, used to combine per-chunk simulation results in a fixed
/// order regardless of the thread schedule.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanVar {
    n: u64,
    mean: f64,
    m2: f64,
}

impl MeanVar {
    pub fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &MeanVar) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Standard error of the mean; zero for degenerate samples.
    pub fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let var = self.m2 / (self.n as f64 - 1.0);
        (var.max(0.0) / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bisect_finds_sqrt2() {
        let root = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200, "sqrt2").unwrap();
        assert_relative_eq!(root, 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn bracket_expansion_then_root() {
        let f = |x: f64| x.ln(); // sign change at 1
        let (lo, hi) = expand_bracket_up(f, 0.25, 2.0, 60, "ln").unwrap();
        assert!(f(lo) * f(hi) <= 0.0);
        let root = bisect_root(f, lo, hi, 1e-13, 200, "ln").unwrap();
        assert_relative_eq!(root, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn quadrature_polynomial_and_exp() {
        let v = integrate_adaptive(|x| x * x, 0.0, 3.0, 1e-12, 1e-15).unwrap();
        assert_relative_eq!(v, 9.0, max_relative = 1e-12);
        let v = integrate_adaptive(|x| (-x).exp(), 0.0, 40.0, 1e-12, 1e-300).unwrap();
        assert_relative_eq!(v, 1.0 - (-40f64).exp(), max_relative = 1e-10);
    }

    #[test]
    fn quadrature_handles_kinks() {
        let v = integrate_adaptive(|x: f64| x.abs(), -1.0, 2.0, 1e-12, 1e-15).unwrap();
        assert_relative_eq!(v, 2.5, max_relative = 1e-10);
    }

    #[test]
    fn dopri_step_converges_on_exponential() {
        // y' = y, exact e^h
        let (y, err) = dopri5_step(|_, y| y, 0.0, 1.0, 0.1).unwrap();
        assert_relative_eq!(y, 0.1f64.exp(), max_relative = 1e-9);
        assert!(err < 1e-8);
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x + (x * 0.9).sin() * 0.4).collect();
        let interp = MonotoneCubic::from_points(xs.clone(), ys.clone()).unwrap();
        let mut prev = interp.eval(0.0);
        let mut x = 0.0;
        while x < 9.5 {
            x += 0.01;
            let v = interp.eval(x);
            assert!(v >= prev - 1e-12, "not monotone at {x}");
            prev = v;
        }
        // reproduces nodes
        for (x, y) in xs.iter().zip(&ys) {
            assert_relative_eq!(interp.eval(*x), *y, max_relative = 1e-12);
        }
    }

    #[test]
    fn hermite_slopes_improve_accuracy() {
        // interpolate exp with exact slopes on a coarse grid
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| x.exp()).collect();
        let slopes = ys.clone();
        let interp = MonotoneCubic::with_slopes(xs, ys, slopes).unwrap();
        let mut worst: f64 = 0.0;
        let mut x = 0.0;
        while x < 3.0 {
            worst = worst.max((interp.eval(x) - x.exp()).abs() / x.exp());
            x += 0.013;
        }
        assert!(worst < 5e-5, "hermite error {worst}");
    }

    #[test]
    fn welford_merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.37).collect();
        let mut all = MeanVar::default();
        for &v in &data {
            all.push(v);
        }
        let mut a = MeanVar::default();
        let mut b = MeanVar::default();
        for &v in &data[..400] {
            a.push(v);
        }
        for &v in &data[400..] {
            b.push(v);
        }
        a.merge(&b);
        assert_relative_eq!(a.mean(), all.mean(), max_relative = 1e-12);
        assert_relative_eq!(a.std_error(), all.std_error(), max_relative = 1e-10);
    }
}
