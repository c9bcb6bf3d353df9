//! Small numerical kernels shared by the other modules: a scalar adaptive
//! Runge-Kutta integrator with dense output, adaptive quadrature, cubic
//! Hermite interpolation and least-squares line fits.

use crate::error::{Error, Result};

/// Accepted step of a scalar ODE integration: `(t, y, dy/dt)`.
#[derive(Debug, Clone, Copy)]
pub struct Knot {
    pub t: f64,
    pub y: f64,
    pub dy: f64,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h0: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-14,
            h0: 1e-6,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Why an integration stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Reached,
    /// The stop predicate fired; the knot list ends at the located crossing.
    Event,
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates the scalar ODE `y' = rhs(t, y)` from `t0` to `t1` (either
/// direction) with Dormand-Prince 5(4). Returns every accepted knot.
///
/// `stop(t, y)` is checked after each step; when it turns true the crossing
/// is located by bisection on the Hermite interpolant and integration ends.
pub fn integrate<F, S>(
    rhs: F,
    t0: f64,
    y0: f64,
    t1: f64,
    opts: &OdeOptions,
    stop: S,
) -> Result<(Vec<Knot>, Stop)>
where
    F: Fn(f64, f64) -> f64,
    S: Fn(f64, f64) -> bool,
{
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, y);
    if !k1.is_finite() {
        return Err(Error::Integration(format!("non-finite slope at t={t0}")));
    }
    let mut knots = vec![Knot { t, y, dy: k1 }];
    let mut h = opts.h0.min(opts.h_max).min((t1 - t0).abs());
    let mut steps = 0usize;
    while (t1 - t) * dir > 0.0 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::Integration(format!(
                "step limit reached at t={t} (target {t1})"
            )));
        }
        let remaining = (t1 - t).abs();
        let last = h >= remaining;
        if last {
            h = remaining;
        }
        let hs = h * dir;
        let k2 = rhs(t + C2 * hs, y + hs * A21 * k1);
        let k3 = rhs(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2));
        let k4 = rhs(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3));
        let k5 = rhs(
            t + C5 * hs,
            y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4),
        );
        let k6 = rhs(
            t + hs,
            y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5),
        );
        let y_new = y + hs * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
        let k7 = rhs(t + hs, y_new);
        let err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
        let finite = y_new.is_finite() && k7.is_finite() && err.is_finite();
        let scale = opts.atol + opts.rtol * y.abs().max(y_new.abs());
        let ratio = if finite {
            err.abs() / scale
        } else {
            f64::INFINITY
        };
        if ratio <= 1.0 {
            let t_new = if last { t1 } else { t + hs };
            let knot = Knot {
                t: t_new,
                y: y_new,
                dy: k7,
            };
            if stop(t_new, y_new) {
                let prev = *knots.last().expect("knots start non-empty");
                let hit = locate_event(&prev, &knot, &stop);
                knots.push(hit);
                return Ok((knots, Stop::Event));
            }
            knots.push(knot);
            t = t_new;
            y = y_new;
            k1 = k7;
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(opts.h_max);
        } else {
            let shrink = if ratio.is_finite() {
                (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.5)
            } else {
                0.1
            };
            h *= shrink;
            if h < 1e-300 {
                return Err(Error::Integration(format!("step size underflow at t={t}")));
            }
        }
    }
    Ok((knots, Stop::Reached))
}

fn locate_event<S: Fn(f64, f64) -> bool>(a: &Knot, b: &Knot, stop: &S) -> Knot {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        let (t, y) = hermite_knots(a, b, mid);
        if stop(t, y) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (t, y) = hermite_knots(a, b, hi);
    let h = b.t - a.t;
    let dy = hermite_slope(a.y, a.dy * h, b.y, b.dy * h, hi) / h;
    Knot { t, y, dy }
}

fn hermite_knots(a: &Knot, b: &Knot, s: f64) -> (f64, f64) {
    let h = b.t - a.t;
    (a.t + s * h, hermite(a.y, a.dy * h, b.y, b.dy * h, s))
}

/// Cubic Hermite basis on `[0, 1]` with endpoint values and scaled slopes.
#[inline]
pub fn hermite(y0: f64, m0: f64, y1: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * m1
}

#[inline]
pub fn hermite_slope(y0: f64, m0: f64, y1: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    (6.0 * s2 - 6.0 * s) * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * m0
        + (-6.0 * s2 + 6.0 * s) * y1
        + (3.0 * s2 - 2.0 * s) * m1
}

/// Dense evaluation of a knot list at `t` (knots sorted in either direction).
pub fn dense_eval(knots: &[Knot], t: f64) -> f64 {
    let n = knots.len();
    if n == 1 {
        return knots[0].y;
    }
    let increasing = knots[n - 1].t > knots[0].t;
    let key = |k: &Knot| if increasing { k.t } else { -k.t };
    let tt = if increasing { t } else { -t };
    let idx = knots.partition_point(|k| key(k) <= tt);
    let i = idx.clamp(1, n - 1) - 1;
    let (a, b) = (&knots[i], &knots[i + 1]);
    let h = b.t - a.t;
    let s = (t - a.t) / h;
    hermite(a.y, a.dy * h, b.y, b.dy * h, s)
}

/// Maximum number of subintervals used by [`quad`].
pub const QUAD_MAX_INTERVALS: usize = 4000;

/// Globally adaptive Gauss-Kronrod (7, 15) quadrature of `g` over `[a, b]`.
/// The interval with the largest error estimate is split until the summed
/// estimate drops below `max(tol, 1e-15·|I|)` or the interval budget runs out.
pub fn quad<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, tol: f64) -> f64 {
    use std::collections::BinaryHeap;
    if a == b {
        return 0.0;
    }
    #[derive(PartialEq)]
    struct Piece {
        err: f64,
        abs: f64,
        a: f64,
        b: f64,
        val: f64,
    }
    impl Eq for Piece {}
    impl PartialOrd for Piece {
        fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Piece {
        fn cmp(&self, o: &Self) -> std::cmp::Ordering {
            self.err.total_cmp(&o.err)
        }
    }
    let (val, err, abs) = gk15(g, a, b);
    let mut total = val;
    let mut total_err = err;
    let mut total_abs = abs;
    let mut heap = BinaryHeap::new();
    heap.push(Piece {
        err,
        abs,
        a,
        b,
        val,
    });
    // the last condition stops refinement once the estimate is pure roundoff
    while total_err
        > tol
            .max(1e-15 * total.abs())
            .max(100.0 * f64::EPSILON * total_abs)
        && heap.len() < QUAD_MAX_INTERVALS
    {
        let p = heap.pop().expect("nonempty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (lv, le, la) = gk15(g, p.a, m);
        let (rv, re, ra) = gk15(g, m, p.b);
        total += lv + rv - p.val;
        total_err += le + re - p.err;
        total_abs += la + ra - p.abs;
        heap.push(Piece {
            err: le,
            abs: la,
            a: p.a,
            b: m,
            val: lv,
        });
        heap.push(Piece {
            err: re,
            abs: ra,
            a: m,
            b: p.b,
            val: rv,
        });
    }
    // resum to shed the drift of the running updates
    heap.iter().map(|p| p.val).sum()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod value, error estimate and `∫|g|` on `[a, b]`.
fn gk15<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = g(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for j in 0..7 {
        let dx = h * XGK[j];
        let (l, r) = (g(c - dx), g(c + dx));
        kron += WGK[j] * (l + r);
        abs += WGK[j] * (l.abs() + r.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (l + r);
        }
    }
    (kron * h, ((kron - gauss) * h).abs(), (abs * h).abs())
}

/// Bisection for a sign change of `g` on `[lo, hi]`.
pub fn bisect<G: Fn(f64) -> f64>(g: G, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut glo = g(lo);
    for _ in 0..200 {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        if (gm > 0.0) == (glo > 0.0) {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ordinary least-squares line `y = a + b x` with standard errors.
#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    pub residual_rms: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 3 || n != y.len() {
        return None;
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (xi, yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| {
            let r = yi - intercept - slope * xi;
            r * r
        })
        .sum();
    let s2 = ss / (nf - 2.0);
    Some(LineFit {
        intercept,
        slope,
        se_intercept: (s2 * (1.0 / nf + mx * mx / sxx)).sqrt(),
        se_slope: (s2 / sxx).sqrt(),
        residual_rms: (ss / nf).sqrt(),
    })
}

/// Cumulative trapezoid of uniformly spaced samples, starting at zero.
pub fn cumtrapz(y: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(y.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in y.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

pub fn trapz(y: &[f64], h: f64) -> f64 {
    if y.len() < 2 {
        return 0.0;
    }
    let inner: f64 = y[1..y.len() - 1].iter().sum();
    h * (inner + 0.5 * (y[0] + y[y.len() - 1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk45_exponential() {
        let (k, stop) = integrate(
            |_, y| -y,
            0.0,
            1.0,
            5.0,
            &OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        assert_eq!(stop, Stop::Reached);
        let last = k.last().unwrap();
        assert!((last.y - (-5.0f64).exp()).abs() < 1e-12);
        // cubic Hermite error bound h^4/384 max|y^(4)| on the enclosing step
        let j = k.iter().position(|p| p.t > 2.5).unwrap();
        let h = k[j].t - k[j - 1].t;
        let bound = h.powi(4) / 384.0 * (-k[j - 1].t).exp();
        let e = (dense_eval(&k, 2.5) - (-2.5f64).exp()).abs();
        assert!(e <= bound + 1e-13, "{e} > {bound}");
    }

    #[test]
    fn rk45_backward_with_event() {
        // y = t - 0.3 integrated downward from t=1 stops where y crosses 0
        let (k, stop) = integrate(
            |_, _| 1.0,
            1.0,
            0.7,
            0.0,
            &OdeOptions::default(),
            |_, y| y <= 0.0,
        )
        .unwrap();
        assert_eq!(stop, Stop::Event);
        assert!((k.last().unwrap().t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn gauss_kronrod_integrates_smooth_and_log() {
        let v = quad(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((v - 2.0).abs() < 1e-12);
        let w = quad(&|x: f64| -(x.ln()), 0.0, 1.0, 1e-12);
        assert!((w - 1.0).abs() < 1e-9);
    }

    #[test]
    fn line_fit_exact() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 + 2.0 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-13 && (f.intercept - 3.0).abs() < 1e-12);
    }
}
