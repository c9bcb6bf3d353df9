//! Front location, logarithmic-delay fits and convergence to the wave.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::Model;
use crate::solver::FieldState;
use crate::wave::TravelingWave;

/// Level set defining the front position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "of", content = "value", rename_all = "kebab-case")]
pub enum Level {
    /// `u = value`.
    U(f64),
    /// `α(u) = value`.
    Alpha(f64),
}

impl Default for Level {
    fn default() -> Self {
        Level::Alpha(0.5)
    }
}

impl Level {
    /// The equivalent level of `u`.
    pub fn u_level(&self, model: &Model) -> f64 {
        match *self {
            Level::U(v) => v,
            Level::Alpha(v) => model.alpha_inverse(v),
        }
    }
}

/// Lab position of the first downward crossing of `level`, interpolated
/// linearly in the level variable.
pub fn locate_front(state: &FieldState, level: Level, model: &Model) -> Result<f64> {
    let ul = level.u_level(model);
    let u = &state.u;
    let i = u
        .windows(2)
        .position(|w| w[0] >= ul && w[1] < ul)
        .ok_or_else(|| Error::Numerical {
            t: state.t,
            reason: format!("no crossing of u={ul} in the window"),
        })?;
    let (g0, g1, target) = match level {
        Level::U(v) => (u[i], u[i + 1], v),
        Level::Alpha(v) => (model.alpha(u[i]), model.alpha(u[i + 1]), v),
    };
    let s = if g0 > g1 {
        (g0 - target) / (g0 - g1)
    } else {
        0.0
    };
    Ok(state.x(i) + s * state.dx)
}

/// Sampled front positions `m(t)`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FrontTrace {
    pub t: Vec<f64>,
    pub m: Vec<f64>,
}

impl FrontTrace {
    pub fn push(&mut self, t: f64, m: f64) {
        self.t.push(t);
        self.m.push(m);
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Samples on each side used by the local quadratic derivative estimate.
pub const MDOT_HALF_WIDTH: usize = 10;

/// `ṁ` at every sample with a full stencil of `2·MDOT_HALF_WIDTH + 1` points,
/// from a local least-squares cubic. Returns `(t, ṁ)` pairs.
pub fn front_velocity(trace: &FrontTrace) -> Vec<(f64, f64)> {
    let k = MDOT_HALF_WIDTH;
    let n = trace.len();
    let mut out = Vec::new();
    if n < 2 * k + 1 {
        return out;
    }
    for j in k..n - k {
        let tj = trace.t[j];
        // normal equations for m = a + b s + c s² + d s³, s = t − t_j
        let mut pw = [0.0f64; 7];
        let mut r = [0.0f64; 4];
        for i in j - k..=j + k {
            let d = trace.t[i] - tj;
            let mut p = 1.0;
            for (e, slot) in pw.iter_mut().enumerate() {
                *slot += p;
                if e < 4 {
                    r[e] += trace.m[i] * p;
                }
                p *= d;
            }
        }
        let mut a = [[0.0; 4]; 4];
        for (row, line) in a.iter_mut().enumerate() {
            for (col, v) in line.iter_mut().enumerate() {
                *v = pw[row + col];
            }
        }
        if let Some(sol) = solve4(a, r) {
            out.push((tj, sol[1]));
        }
    }
    out
}

/// Gaussian elimination with partial pivoting.
fn solve4(mut a: [[f64; 4]; 4], mut r: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|x, y| a[*x][col].abs().total_cmp(&a[*y][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for c in col..4 {
                a[row][c] -= f * a[col][c];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let s: f64 = (row + 1..4).map(|c| a[row][c] * x[c]).sum();
        x[row] = (r[row] - s) / a[row][row];
    }
    Some(x)
}

/// Result of [`fit_log_correction`]: `m(t) ≈ ct − r log t + x₀`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogFit {
    pub c: f64,
    pub r: f64,
    pub x0: f64,
    pub se_c: f64,
    pub se_r: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

/// Least-squares fit of `ṁ = c − r/t` on `window`, then `x₀` as the mean of
/// `m − ct + r log t` over the window's upper half. The window must span at
/// least one dyadic octave.
pub fn fit_log_correction(trace: &FrontTrace, window: (f64, f64)) -> Result<LogFit> {
    let (t0, t1) = window;
    if !(t0 > 0.0 && t1 >= 2.0 * t0) {
        return Err(Error::WindowTooShort(format!(
            "fit window [{t0}, {t1}] spans less than one octave"
        )));
    }
    let vel: Vec<(f64, f64)> = front_velocity(trace)
        .into_iter()
        .filter(|(t, _)| *t >= t0 && *t <= t1)
        .collect();
    let inv: Vec<f64> = vel.iter().map(|(t, _)| 1.0 / t).collect();
    let md: Vec<f64> = vel.iter().map(|(_, v)| *v).collect();
    let fit = crate::numerics::fit_line(&inv, &md).ok_or_else(|| {
        Error::WindowTooShort(format!(
            "only {} velocity samples in [{t0}, {t1}]",
            vel.len()
        ))
    })?;
    let c = fit.intercept;
    let r = -fit.slope;
    let x0 = x0_estimate(trace, c, r, (0.5 * (t0 + t1), t1))?;
    Ok(LogFit {
        c,
        r,
        x0,
        se_c: fit.se_intercept,
        se_r: fit.se_slope,
        window,
        samples: vel.len(),
    })
}

/// Mean of `m − ct + r log t` over the trace samples in `window`.
pub fn x0_estimate(trace: &FrontTrace, c: f64, r: f64, window: (f64, f64)) -> Result<f64> {
    let vals: Vec<f64> = trace
        .t
        .iter()
        .zip(&trace.m)
        .filter(|(t, _)| **t >= window.0 && **t <= window.1 && **t > 0.0)
        .map(|(t, m)| m - c * t + r * t.ln())
        .collect();
    if vals.is_empty() {
        return Err(Error::WindowTooShort(format!(
            "no samples in [{}, {}]",
            window.0, window.1
        )));
    }
    Ok(vals.iter().sum::<f64>() / vals.len() as f64)
}

/// One row of the delay curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DelayPoint {
    pub t: f64,
    pub m: f64,
    pub mdot: f64,
    pub delay: f64,
}

/// `(t, m, ṁ, m − ct)` at every sample with a velocity estimate.
pub fn delay_curve(trace: &FrontTrace, c: f64) -> Vec<DelayPoint> {
    let vel = front_velocity(trace);
    let k = MDOT_HALF_WIDTH;
    vel.iter()
        .enumerate()
        .map(|(j, (t, v))| {
            let m = trace.m[j + k];
            DelayPoint {
                t: *t,
                m,
                mdot: *v,
                delay: m - c * t,
            }
        })
        .collect()
}

/// Sup-norm distance between the field and the wave translated so the two
/// level crossings coincide.
pub fn shape_convergence(
    state: &FieldState,
    wave: &TravelingWave,
    model: &Model,
    level: Level,
) -> Result<f64> {
    let m = locate_front(state, level, model)?;
    let ul = level.u_level(model);
    let xw = wave
        .crossing(ul)
        .ok_or_else(|| Error::WindowTooShort("wave does not cross the level".into()))?;
    let shift = m - xw;
    let mut worst: f64 = 0.0;
    for (i, u) in state.u.iter().enumerate() {
        let x = state.x(i) - shift;
        if x < wave.x[0] || x > wave.x[wave.x.len() - 1] {
            continue;
        }
        worst = worst.max((u - wave.eval(x)).abs());
    }
    Ok(worst)
}

/// Which tail amplitude to extract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailNorm {
    /// `e^{y}ũ(t, y)` in the frame `2t − ½ log(t+1)`.
    PushmiPullyu,
    /// `(e^{y}/y)ũ(t, y)` in the frame `2t − (3/2) log(t+1)`.
    SemiFkpp,
}

/// Tail amplitude at `y = t^γ` in the tilde frame (unit `λ`). The probe is
/// read off by log-linear interpolation between the two bracketing nodes.
pub fn tail_amplitude(state: &FieldState, gamma: f64, norm: TailNorm) -> Result<f64> {
    let t = state.t;
    let r = match norm {
        TailNorm::PushmiPullyu => 0.5,
        TailNorm::SemiFkpp => 1.5,
    };
    let y = t.powf(gamma);
    let x_lab = y + 2.0 * t - r * (t + 1.0).ln();
    let s = (x_lab - state.frame_offset()) / state.dx;
    let n = state.u.len();
    if !(s >= 0.0 && s < (n - 1) as f64) {
        return Err(Error::WindowTooShort(format!(
            "probe y={y:.3} lies outside the window"
        )));
    }
    let i = s.floor() as usize;
    let w = s - i as f64;
    let (a, b) = (state.u[i], state.u[i + 1]);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Numerical {
            t,
            reason: "field vanishes at the probe".into(),
        });
    }
    let u = (a.ln() * (1.0 - w) + b.ln() * w).exp();
    Ok(match norm {
        TailNorm::PushmiPullyu => y.exp() * u,
        TailNorm::SemiFkpp => y.exp() * u / y,
    })
}
