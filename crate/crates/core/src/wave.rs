//! Traveling-wave profiles.
//!
//! A wave `U(x − ct)` is encoded through its profile function `η_c` with
//! `−U' = η_c(U)`, which satisfies `f = η(c − η')` on `[0, 1]`. The profile is
//! shot from the saddle at `u = 1` down to `u → 0`; close to zero the
//! unknown becomes `r = η/u` as a function of `s = log u` so the approach to
//! the decay rate is resolved over many decades.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Model, ModelSpec};
use crate::numerics::{self, dense_eval, hermite, integrate, OdeOptions, Stop};

/// Default number of nodes of the uniform `u` grid.
pub const PROFILE_GRID: usize = 4097;
/// Point at which the connection predicate compares `η(u)/u` with the decay rates.
pub const U_FLOOR: f64 = 1e-9;
/// Relative band around a decay rate accepted by the connection predicate.
pub const RATE_BAND: f64 = 0.1;

const U_SWITCH: f64 = 1e-3;
const START_GAP: f64 = 1e-7;
const TAIL_LOG_U_MIN: f64 = -32.0;
const DEEP_LOG_U: f64 = -700.0;

/// Tabulated profile function `η_c` on a uniform `u` grid, plus a log-spaced
/// tail table of `η(u)/u` below the grid's resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveProfile {
    pub model: ModelSpec,
    pub c: f64,
    /// `η'(0)`: the decay rate `λ_c` of the wave.
    pub eta_prime_0: f64,
    /// `η'(1) = (c − √(c² − 4f'(1)))/2 < 0`.
    pub eta_prime_1: f64,
    pub u: Vec<f64>,
    pub eta: Vec<f64>,
    /// `η'` at the grid nodes (from the profile equation).
    pub slope: Vec<f64>,
    /// `(log u, η/u, d(η/u)/d log u)` for `u` below the switch point, ordered by decreasing `log u`.
    pub tail: Vec<[f64; 3]>,
}

impl WaveProfile {
    fn h(&self) -> f64 {
        1.0 / (self.u.len() - 1) as f64
    }

    /// `η(u)`, zero outside `(0, 1)`.
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        if u < U_SWITCH && !self.tail.is_empty() {
            return u * self.tail_ratio(u.ln());
        }
        let h = self.h();
        let n = self.u.len();
        let x = u / h;
        let i = (x.floor() as usize).min(n - 2);
        let s = x - i as f64;
        hermite(
            self.eta[i],
            self.slope[i] * h,
            self.eta[i + 1],
            self.slope[i + 1] * h,
            s,
        )
    }

    /// `N(u) = ∫₀^u η`, integrating the grid interpolant exactly.
    pub fn primitive(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let h = self.h();
        let n = self.u.len();
        let x = u / h;
        let i = (x.floor() as usize).min(n - 2);
        let s = x - i as f64;
        let mut acc = 0.0;
        for j in 0..i {
            acc += cell_integral(
                self.eta[j],
                self.slope[j] * h,
                self.eta[j + 1],
                self.slope[j + 1] * h,
                1.0,
            );
        }
        h * (acc
            + cell_integral(
                self.eta[i],
                self.slope[i] * h,
                self.eta[i + 1],
                self.slope[i + 1] * h,
                s,
            ))
    }

    /// `η(u)/u` in the tail, constant below the table.
    fn tail_ratio(&self, log_u: f64) -> f64 {
        let t = &self.tail;
        if log_u >= t[0][0] {
            return t[0][1];
        }
        let last = t[t.len() - 1];
        if log_u <= last[0] {
            return last[1];
        }
        let idx = t.partition_point(|k| k[0] > log_u);
        let (a, b) = (t[idx - 1], t[idx]);
        let h = b[0] - a[0];
        hermite(a[1], a[2] * h, b[1], b[2] * h, (log_u - a[0]) / h)
    }

    /// Largest residual of `f = η(c − η')` over the interior grid nodes,
    /// relative to `max f`. `η'` is a fine centered difference of the
    /// interpolant [`WaveProfile::eval`].
    pub fn residual(&self, model: &Model) -> f64 {
        let delta = self.h() / 64.0;
        let n = self.u.len();
        let mut fmax: f64 = 0.0;
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            let u = self.u[i];
            let f = model.f(u);
            fmax = fmax.max(f.abs());
            let d = (self.eval(u + delta) - self.eval(u - delta)) / (2.0 * delta);
            worst = worst.max((self.eval(u) * (self.c - d) - f).abs());
        }
        worst / fmax.max(f64::MIN_POSITIVE)
    }
}

/// `∫₀^s` of the Hermite cubic in the unit cell variable (slopes pre-scaled
/// by the cell width).
fn cell_integral(y0: f64, m0: f64, y1: f64, m1: f64, s: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let h00 = 0.5 * s4 - s3 + s;
    let h10 = 0.25 * s4 - 2.0 / 3.0 * s3 + 0.5 * s2;
    let h01 = -0.5 * s4 + s3;
    let h11 = 0.25 * s4 - s3 / 3.0;
    h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
}

/// Options for [`solve_profile_ode_with`].
#[derive(Debug, Clone, Copy)]
pub struct ProfileOptions {
    pub grid_points: usize,
    pub u_floor: f64,
    /// Also require that `η/u` stays bounded all the way down to `u ≈ 1e-304`.
    /// Distinguishes speeds just below a pushed minimal speed, where the
    /// trajectory only leaves the fast decay rate far below `u_floor`.
    pub deep_check: bool,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            grid_points: PROFILE_GRID,
            u_floor: U_FLOOR,
            deep_check: false,
        }
    }
}

/// Roots of `λ² − cλ + f'(0) = 0`, if real.
pub fn decay_rates(model: &Model, c: f64) -> Option<(f64, f64)> {
    let f0 = model.df(0.0);
    let disc = c * c - 4.0 * f0;
    if disc < 0.0 {
        None
    } else {
        let s = disc.sqrt();
        Some((0.5 * (c - s), 0.5 * (c + s)))
    }
}

/// Shoots the profile equation at speed `c` with the default options.
pub fn solve_profile_ode(model: &Model, c: f64) -> Result<WaveProfile> {
    solve_profile_ode_with(model, c, &ProfileOptions::default())
}

pub fn solve_profile_ode_with(model: &Model, c: f64, opts: &ProfileOptions) -> Result<WaveProfile> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::OutOfRange {
            name: "c",
            value: c,
            range: "(0, inf)",
        });
    }
    if opts.grid_points < 17 {
        return Err(Error::Config("profile grid needs at least 17 nodes".into()));
    }
    let fail = |u_hit: f64, reason: String| Error::ConnectionFailure { c, u_hit, reason };

    let df1 = model.df(1.0);
    if df1 >= 0.0 {
        return Err(Error::Config(format!("f'(1) = {df1} is not negative")));
    }
    let k = 0.5 * (-c + (c * c - 4.0 * df1).sqrt());
    let eta_prime_1 = -k;

    let ode_opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-16,
        h0: 1e-9,
        ..OdeOptions::default()
    };
    // u phase: dη/du = c − f/η, downward from the saddle
    let u0 = 1.0 - START_GAP;
    let (knots_u, stop) = integrate(
        |u, eta| c - model.f(u) / eta,
        u0,
        k * START_GAP,
        U_SWITCH,
        &ode_opts,
        |_, eta| eta <= 0.0,
    )?;
    if stop == Stop::Event {
        let hit = knots_u.last().map(|k| k.t).unwrap_or(u0);
        return Err(fail(hit, "eta vanished".into()));
    }
    let eta_switch = knots_u.last().expect("non-empty").y;

    // s phase: r = η/u, dr/ds = c − f(u)/(u r) − r with u = e^s
    let blow = 10.0 * c.max(model.lambda);
    let s0 = U_SWITCH.ln();
    let s_floor = opts.u_floor.ln();
    let rhs_s = |s: f64, r: f64| c - model.f_over_u(s.exp()) / r - r;
    let bad = |_: f64, r: f64| r <= 0.0 || r > blow;
    let s_opts = OdeOptions {
        h0: 1e-4,
        ..ode_opts
    };
    let (knots_s, stop) = integrate(rhs_s, s0, eta_switch / U_SWITCH, s_floor, &s_opts, bad)?;
    let end = *knots_s.last().expect("non-empty");
    if stop == Stop::Event {
        let reason = if end.y <= 0.0 {
            "eta vanished"
        } else {
            "eta/u grew past every decay rate"
        };
        return Err(fail(end.t.exp(), reason.into()));
    }
    let mut tail_knots = knots_s;
    let target = if opts.deep_check {
        DEEP_LOG_U
    } else {
        TAIL_LOG_U_MIN
    };
    let (more, stop) = integrate(rhs_s, end.t, end.y, target, &s_opts, bad)?;
    let deep_end = *more.last().expect("non-empty");
    if opts.deep_check && stop == Stop::Event {
        return Err(fail(
            deep_end.t.exp(),
            "eta/u left the decay rate below the floor".into(),
        ));
    }
    tail_knots.extend(
        more.into_iter()
            .skip(1)
            .take_while(|k| k.t >= TAIL_LOG_U_MIN && k.y > 0.0 && k.y <= blow),
    );

    let rates = decay_rates(model, c)
        .ok_or_else(|| fail(opts.u_floor, "no real decay rate at u=0".into()))?;
    let (u_check, r_check) = if opts.deep_check {
        (deep_end.t.exp(), deep_end.y)
    } else {
        (opts.u_floor, end.y)
    };
    let near = |root: f64| (r_check - root).abs() <= RATE_BAND * root;
    if !(near(rates.0) || near(rates.1)) {
        return Err(fail(
            u_check,
            format!(
                "eta/u = {r_check:.6} matches neither decay rate {:.6} / {:.6}",
                rates.0, rates.1
            ),
        ));
    }
    let eta_prime_0 = if (r_check - rates.0).abs() <= (r_check - rates.1).abs() {
        rates.0
    } else {
        rates.1
    };

    // tabulate on the uniform grid
    let n = opts.grid_points;
    let h = 1.0 / (n - 1) as f64;
    let mut u = Vec::with_capacity(n);
    let mut eta = Vec::with_capacity(n);
    let mut slope = Vec::with_capacity(n);
    for i in 0..n {
        let ui = i as f64 * h;
        u.push(ui);
        let (e, d) = if i == 0 {
            (0.0, eta_prime_0)
        } else if i == n - 1 {
            (0.0, eta_prime_1)
        } else if ui > u0 {
            (k * (1.0 - ui), eta_prime_1)
        } else if ui >= U_SWITCH {
            let e = dense_eval(&knots_u, ui);
            (e, c - model.f(ui) / e)
        } else {
            let r = dense_eval(&tail_knots, ui.ln());
            let e = ui * r;
            (e, c - model.f(ui) / e)
        };
        eta.push(e);
        slope.push(d);
    }
    let tail = tail_knots.iter().map(|k| [k.t, k.y, k.dy]).collect();
    Ok(WaveProfile {
        model: model.spec(),
        c,
        eta_prime_0,
        eta_prime_1,
        u,
        eta,
        slope,
        tail,
    })
}

fn connects(model: &Model, c: f64) -> bool {
    let opts = ProfileOptions {
        grid_points: 17,
        deep_check: true,
        ..ProfileOptions::default()
    };
    solve_profile_ode_with(model, c, &opts).is_ok()
}

/// Absolute tolerance of [`minimal_speed`].
pub const SPEED_TOL: f64 = 1e-9;

/// Smallest speed admitting a monotone connection, by bisection.
pub fn minimal_speed(model: &Model) -> Result<f64> {
    let lo0 = 2.0 * model.df(0.0).sqrt();
    if connects(model, lo0) {
        return Ok(lo0);
    }
    let mut hi = lo0 * 1.25;
    let mut tries = 0;
    while !connects(model, hi) {
        hi *= 1.5;
        tries += 1;
        if tries > 30 {
            return Err(Error::NoBracket { lo: lo0, hi });
        }
    }
    let mut lo = lo0;
    while hi - lo > SPEED_TOL {
        let mid = 0.5 * (lo + hi);
        if connects(model, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Minimal speed together with its profile.
pub fn minimal_profile(model: &Model) -> Result<WaveProfile> {
    let c = minimal_speed(model)?;
    solve_profile_ode(model, c)
}

/// Wave `U` sampled on a uniform `x` grid, normalized by `α(U(0)) = 1/2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TravelingWave {
    pub c: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// `U'` at the nodes.
    pub du: Vec<f64>,
}

impl TravelingWave {
    /// `U(x)` by Hermite interpolation, clamped to the end values outside the table.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.x.len();
        if x <= self.x[0] {
            return self.u[0];
        }
        if x >= self.x[n - 1] {
            return self.u[n - 1];
        }
        let t = (x - self.x[0]) / self.dx;
        let i = (t.floor() as usize).min(n - 2);
        let s = t - i as f64;
        hermite(
            self.u[i],
            self.du[i] * self.dx,
            self.u[i + 1],
            self.du[i + 1] * self.dx,
            s,
        )
    }

    /// First grid position where `U` drops to `level` (linear interpolation).
    pub fn crossing(&self, level: f64) -> Option<f64> {
        let i = self
            .u
            .windows(2)
            .position(|w| w[0] >= level && w[1] < level)?;
        let s = (self.u[i] - level) / (self.u[i] - self.u[i + 1]);
        Some(self.x[i] + s * self.dx)
    }
}

/// Integrates `−U' = η(U)` from `x = 0` (where `α(U) = 1/2`) out to both ends.
pub fn integrate_wave(
    model: &Model,
    profile: &WaveProfile,
    x_left: f64,
    x_right: f64,
    dx: f64,
) -> Result<TravelingWave> {
    if !(x_left < 0.0 && x_right > 0.0 && dx > 0.0) {
        return Err(Error::Config(
            "wave window must straddle 0 with dx > 0".into(),
        ));
    }
    let u0 = model.alpha_inverse(0.5);
    let opts = OdeOptions {
        rtol: 1e-12,
        atol: 1e-300,
        h0: 1e-4,
        h_max: 0.05,
        ..OdeOptions::default()
    };
    let rhs = |_: f64, u: f64| -profile.eval(u);
    let (right, _) = integrate(rhs, 0.0, u0, x_right, &opts, |_, _| false)?;
    let (left, _) = integrate(rhs, 0.0, u0, x_left, &opts, |_, _| false)?;
    let u_right = right.last().expect("non-empty").y;
    if u_right >= 1e-8 {
        return Err(Error::WindowTooShort(format!(
            "U({x_right}) = {u_right:.3e} has not reached 1e-8"
        )));
    }
    let n = ((x_right - x_left) / dx).round() as usize + 1;
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    for i in 0..n {
        let xi = x_left + i as f64 * dx;
        let ui = if xi >= 0.0 {
            dense_eval(&right, xi)
        } else {
            dense_eval(&left, xi)
        };
        x.push(xi);
        u.push(ui);
        du.push(-profile.eval(ui));
    }
    Ok(TravelingWave {
        c: profile.c,
        dx,
        x,
        u,
        du,
    })
}

/// Far-field shape of a wave: `U ≈ (Dx + B)e^{−λx}` with `D ≠ 0` or `D = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayKind {
    LinearPrefactor,
    PureExponential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub kind: DecayKind,
    /// Reported `D` (zero when classified pure-exponential).
    pub d: f64,
    pub b: f64,
    /// Slope of the full-window fit before classification.
    pub d_raw: f64,
    pub se_d: f64,
    /// Slopes fitted on the two halves of the window.
    pub d_halves: (f64, f64),
    pub noise_floor: f64,
    pub window: (f64, f64),
}

/// Fits `e^{λx}U = B + Dx` on `[x₉₀ + 5, x(U = 1e−7)]`, where `x₉₀` is the
/// point where `U` has fallen to 0.1. The noise floor is the larger of the
/// slope's standard error and the disagreement between half-window slopes;
/// `D` counts as nonzero only above ten noise floors.
pub fn decay_asymptotics(wave: &TravelingWave, lambda_c: f64) -> Result<DecayFit> {
    let x90 = wave
        .crossing(0.1)
        .ok_or_else(|| Error::WindowTooShort("wave never drops to 0.1".into()))?;
    let x_end = wave
        .crossing(1e-7)
        .ok_or_else(|| Error::WindowTooShort("wave never drops to 1e-7".into()))?;
    let x_start = x90 + 5.0;
    if x_end <= x_start + 1.0 {
        return Err(Error::WindowTooShort(format!(
            "decay window [{x_start}, {x_end}] is shorter than 1"
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = wave
        .x
        .iter()
        .zip(&wave.u)
        .filter(|(x, _)| **x >= x_start && **x <= x_end)
        .map(|(x, u)| (*x, (lambda_c * x).exp() * u))
        .unzip();
    let full = numerics::fit_line(&xs, &ys)
        .ok_or_else(|| Error::WindowTooShort("too few samples in decay window".into()))?;
    let mid = xs.len() / 2;
    let left = numerics::fit_line(&xs[..mid], &ys[..mid]);
    let right = numerics::fit_line(&xs[mid..], &ys[mid..]);
    let (dl, dr) = match (left, right) {
        (Some(l), Some(r)) => (l.slope, r.slope),
        _ => (full.slope, full.slope),
    };
    let noise_floor = full.se_slope.max((dl - dr).abs());
    let linear = full.slope.abs() > 10.0 * noise_floor;
    let (kind, d, b) = if linear {
        (DecayKind::LinearPrefactor, full.slope, full.intercept)
    } else {
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        (DecayKind::PureExponential, 0.0, mean)
    };
    Ok(DecayFit {
        kind,
        d,
        b,
        d_raw: full.slope,
        se_d: full.se_slope,
        d_halves: (dl, dr),
        noise_floor,
        window: (x_start, x_end),
    })
}

/// Violations of `λ√χ(u − A) ≤ η ≤ λ(u − A)` on the profile grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsReport {
    pub max_above_upper: f64,
    pub max_below_lower: f64,
    pub holds: bool,
}

pub fn profile_bounds_check(profile: &WaveProfile, model: &Model) -> BoundsReport {
    let l = model.lambda;
    let sc = model.chi.sqrt();
    let (mut up, mut lo) = (0.0f64, 0.0f64);
    for (u, e) in profile.u.iter().zip(&profile.eta) {
        let z = model.zeta(*u);
        up = up.max(e - l * z);
        lo = lo.max(l * sc * z - e);
    }
    BoundsReport {
        max_above_upper: up,
        max_below_lower: lo,
        holds: up <= 1e-8 && lo <= 1e-8,
    }
}

/// `sup_u (p'(u) + f(u)/p(u))` for a positive test function `p` sampled on a
/// uniform grid over `[0, 1]` with `p(0) = p(1) = 0`. Endpoint quotients use
/// `f'/p'`.
pub fn hadeler_rothe_value(p: &[f64], model: &Model) -> Result<f64> {
    let n = p.len();
    if n < 5 {
        return Err(Error::Config("test function needs at least 5 nodes".into()));
    }
    let h = 1.0 / (n - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        let u = i as f64 * h;
        let dp = if i == 0 {
            (-3.0 * p[0] + 4.0 * p[1] - p[2]) / (2.0 * h)
        } else if i == n - 1 {
            (3.0 * p[n - 1] - 4.0 * p[n - 2] + p[n - 3]) / (2.0 * h)
        } else {
            (p[i + 1] - p[i - 1]) / (2.0 * h)
        };
        let q = if i == 0 || i == n - 1 {
            model.df(u) / dp
        } else {
            if p[i] <= 0.0 {
                return Err(Error::Config(format!(
                    "test function not positive at u={u}"
                )));
            }
            model.f(u) / p[i]
        };
        best = best.max(dp + q);
    }
    Ok(best)
}
