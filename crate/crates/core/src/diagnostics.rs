//! Functionals evaluated on solver snapshots: shape defect, weighted energy,
//! weighted Hopf-Cole transform, supersolution weight, relative entropy and
//! the exponential moment.
//!
//! Spatial derivatives use the solver's centered stencils and time
//! derivatives use centered differences of snapshots at a common lab grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Model, Regime};
use crate::numerics::quad;
use crate::solver::FieldState;
use crate::wave::{integrate_wave, solve_profile_ode, WaveProfile};

/// Absolute floor of the energy truncation test.
pub const ENERGY_EDGE_FLOOR: f64 = 1e-12;
/// Nodes where the supersolution weight falls below this are dropped.
pub const WEIGHT_CUTOFF: f64 = 1e-8;

fn trapz_nodes(y: &[f64], h: f64) -> f64 {
    crate::numerics::trapz(y, h)
}

/// `w = −D₀u − η(u)` on the interior nodes of a state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeDefect {
    pub t: f64,
    pub equation: String,
    /// Lab positions of nodes `1..n-1`.
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub min_w: f64,
    pub argmin_x: f64,
}

impl ShapeDefect {
    /// `(x − m, w)` pairs, the defect seen from a front at `m`.
    pub fn tail(&self, m: f64) -> Vec<(f64, f64)> {
        self.x
            .iter()
            .zip(&self.w)
            .map(|(x, w)| (x - m, *w))
            .collect()
    }
}

pub fn shape_defect(state: &FieldState, profile: &WaveProfile) -> ShapeDefect {
    let u = &state.u;
    let n = u.len();
    let inv = 0.5 / state.dx;
    let mut x = Vec::with_capacity(n - 2);
    let mut w = Vec::with_capacity(n - 2);
    let (mut min_w, mut argmin_x) = (f64::INFINITY, f64::NAN);
    for i in 1..n - 1 {
        let wi = -(u[i + 1] - u[i - 1]) * inv - profile.eval(u[i]);
        let xi = state.x(i);
        if wi < min_w {
            min_w = wi;
            argmin_x = xi;
        }
        x.push(xi);
        w.push(wi);
    }
    ShapeDefect {
        t: state.t,
        equation: state.equation.clone(),
        x,
        w,
        min_w,
        argmin_x,
    }
}

/// `E_c = ½∫e^{cξ}w²dξ` with `ξ = x − ct`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    pub value: f64,
    /// Integrand at the last node used, a proxy for the neglected tail.
    pub edge_integrand: f64,
}

/// Trapezoid quadrature of the energy over nodes `1..n-2`. The node next to
/// the right Dirichlet wall is left out since its centered difference sees
/// the wall. Errors when the integrand at the edge has not decayed below
/// `1e-6·E + ENERGY_EDGE_FLOOR`.
pub fn energy(state: &FieldState, profile: &WaveProfile, c: f64) -> Result<EnergyRecord> {
    let d = shape_defect(state, profile);
    let m = d.w.len() - 1;
    let integrand: Vec<f64> = d.x[..m]
        .iter()
        .zip(&d.w[..m])
        .map(|(x, w)| {
            // half weight first: e^{cξ} alone overflows on wide windows
            let hw = (0.5 * c * (x - c * state.t)).exp() * w;
            0.5 * hw * hw
        })
        .collect();
    let value = trapz_nodes(&integrand, state.dx);
    let edge = integrand[m - 1];
    if !value.is_finite() || edge > 1e-6 * value + ENERGY_EDGE_FLOOR {
        return Err(Error::Truncation { bound: edge });
    }
    Ok(EnergyRecord {
        t: state.t,
        value,
        edge_integrand: edge,
    })
}

/// Aligned values of three snapshots on their common lab nodes.
struct Stencil {
    /// Index into `mid.u` of the first common node.
    start: usize,
    prev: Vec<f64>,
    mid: Vec<f64>,
    next: Vec<f64>,
    dt: f64,
}

fn align(prev: &FieldState, mid: &FieldState, next: &FieldState) -> Result<Stencil> {
    let (ip, im, len_p) = prev
        .overlap(mid)
        .ok_or_else(|| Error::Config("snapshots do not share a lab grid".into()))?;
    let (in_, im2, len_n) = next
        .overlap(mid)
        .ok_or_else(|| Error::Config("snapshots do not share a lab grid".into()))?;
    let start = im.max(im2);
    let end = (im + len_p).min(im2 + len_n);
    if end < start + 3 {
        return Err(Error::WindowTooShort("snapshots barely overlap".into()));
    }
    let dt_p = mid.t - prev.t;
    let dt_n = next.t - mid.t;
    if !(dt_p > 0.0 && (dt_p - dt_n).abs() <= 1e-9 * dt_p) {
        return Err(Error::Config(format!(
            "snapshots must be equally spaced in time (got {dt_p} and {dt_n})"
        )));
    }
    let pick = |s: &FieldState, offset: usize, base: usize| -> Vec<f64> {
        s.u[offset + (start - base)..offset + (end - base)].to_vec()
    };
    Ok(Stencil {
        start,
        prev: pick(prev, ip, im),
        mid: mid.u[start..end].to_vec(),
        next: pick(next, in_, im2),
        dt: dt_p,
    })
}

/// Energy change rate against the dissipation `−∫e^{cξ}(∂_t ũ)²dξ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DissipationCheck {
    pub t: f64,
    pub de_dt: f64,
    pub dissipation: f64,
    pub relative_error: f64,
}

/// Compares `(E(next) − E(prev))/(2δ)` with the dissipation at `mid`, where
/// `∂_t ũ = u_t + c D₀u` is taken on the common lab nodes.
pub fn dissipation_check(
    prev: &FieldState,
    mid: &FieldState,
    next: &FieldState,
    profile: &WaveProfile,
    c: f64,
) -> Result<DissipationCheck> {
    let e0 = energy(prev, profile, c)?;
    let e1 = energy(next, profile, c)?;
    let s = align(prev, mid, next)?;
    let h = mid.dx;
    let len = s.mid.len();
    let mut integrand = Vec::with_capacity(len - 2);
    for k in 1..len - 1 {
        let ut = (s.next[k] - s.prev[k]) / (2.0 * s.dt);
        let ux = (s.mid[k + 1] - s.mid[k - 1]) / (2.0 * h);
        let xi = mid.x(s.start + k) - c * mid.t;
        let hv = (0.5 * c * xi).exp() * (ut + c * ux);
        integrand.push(hv * hv);
    }
    let dissipation = -trapz_nodes(&integrand, h);
    let de_dt = (e1.value - e0.value) / (2.0 * s.dt);
    let relative_error = (de_dt - dissipation).abs() / dissipation.abs().max(1e-300);
    Ok(DissipationCheck {
        t: mid.t,
        de_dt,
        dissipation,
        relative_error,
    })
}

/// `E_c` next to `Ẽ_c = ∫e^{cξ}(u_ξ²/2 + V_c(u))dξ`, `V_c = −cN_c + η_c²/2`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnergyEquivalence {
    pub e: f64,
    /// `None` when the weight makes `Ẽ_c` divergent (`2λ_c ≤ c`).
    pub e_tilde: Option<f64>,
    pub difference: Option<f64>,
}

pub fn energy_equivalence(
    state: &FieldState,
    profile: &WaveProfile,
    c: f64,
) -> Result<EnergyEquivalence> {
    let e = energy(state, profile, c)?.value;
    if 2.0 * profile.eta_prime_0 <= c * (1.0 + 1e-9) {
        return Ok(EnergyEquivalence {
            e,
            e_tilde: None,
            difference: None,
        });
    }
    let u = &state.u;
    let n = u.len();
    let h = state.dx;
    let integrand: Vec<f64> = (1..n - 2)
        .map(|i| {
            let ux = (u[i + 1] - u[i - 1]) / (2.0 * h);
            let eta = profile.eval(u[i]);
            let v = -c * profile.primitive(u[i]) + 0.5 * eta * eta;
            let half = (0.5 * c * (state.x(i) - c * state.t)).exp();
            half * (half * (0.5 * ux * ux + v))
        })
        .collect();
    let et = trapz_nodes(&integrand, h);
    Ok(EnergyEquivalence {
        e,
        e_tilde: Some(et),
        difference: Some(e - et),
    })
}

fn require_unit_lambda(model: &Model) -> Result<()> {
    if (model.lambda - 1.0).abs() > 1e-15 {
        return Err(Error::OutOfRange {
            name: "lambda",
            value: model.lambda,
            range: "{1}",
        });
    }
    Ok(())
}

/// Weighted Hopf-Cole transform `v = e^{Γ}u`, `Γ = x̂ + √χ∫_x^∞α(u)`, in the
/// frame `x̂ = x − 2t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfCole {
    pub t: f64,
    pub x: Vec<f64>,
    pub gamma: Vec<f64>,
    pub v: Vec<f64>,
    /// Analytic estimate of `∫α(u)` beyond the window.
    pub tail_correction: f64,
}

pub fn hopf_cole(state: &FieldState, model: &Model) -> Result<HopfCole> {
    require_unit_lambda(model)?;
    let u = &state.u;
    let n = u.len();
    let h = state.dx;
    let sq = model.chi.sqrt();
    // beyond the window α(u) decays like e^{-x}
    let tail = model.alpha(u[n - 1]);
    let mut integral = vec![0.0; n];
    integral[n - 1] = tail;
    let mut prev_alpha = model.alpha(u[n - 1]);
    for i in (0..n - 1).rev() {
        let a = model.alpha(u[i]);
        integral[i] = integral[i + 1] + 0.5 * h * (a + prev_alpha);
        prev_alpha = a;
    }
    let x = state.xs();
    let gamma: Vec<f64> = x
        .iter()
        .zip(&integral)
        .map(|(x, s)| x - 2.0 * state.t + sq * s)
        .collect();
    let v = gamma.iter().zip(u).map(|(g, u)| g.exp() * u).collect();
    Ok(HopfCole {
        t: state.t,
        x,
        gamma,
        v,
        tail_correction: tail,
    })
}

/// `e^{−Γ}(v_t − v_xx)` at the middle snapshot, with the moving-frame time
/// derivative `∂_t v|_lab + 2D₀v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HopfColeResidual {
    pub t: f64,
    pub x: Vec<f64>,
    pub residual: Vec<f64>,
    pub max: f64,
}

pub fn hopf_cole_residual(
    prev: &FieldState,
    mid: &FieldState,
    next: &FieldState,
    model: &Model,
) -> Result<HopfColeResidual> {
    let hp = hopf_cole(prev, model)?;
    let hm = hopf_cole(mid, model)?;
    let hn = hopf_cole(next, model)?;
    let s = align(prev, mid, next)?;
    let (ip, im, _) = prev.overlap(mid).expect("aligned");
    let (inx, im2, _) = next.overlap(mid).expect("aligned");
    let h = mid.dx;
    let len = s.mid.len();
    let mut x = Vec::with_capacity(len);
    let mut residual = Vec::with_capacity(len);
    let mut max = f64::NEG_INFINITY;
    for k in 1..len - 1 {
        let j = s.start + k;
        let vp = hp.v[ip + j - im];
        let vn = hn.v[inx + j - im2];
        let vt = (vn - vp) / (2.0 * s.dt);
        let vx = (hm.v[j + 1] - hm.v[j - 1]) / (2.0 * h);
        let vxx = (hm.v[j + 1] - 2.0 * hm.v[j] + hm.v[j - 1]) / (h * h);
        let r = (-hm.gamma[j]).exp() * (vt + 2.0 * vx - vxx);
        max = max.max(r);
        x.push(mid.x(j));
        residual.push(r);
    }
    Ok(HopfColeResidual {
        t: mid.t,
        x,
        residual,
        max,
    })
}

/// Grid error of [`hopf_cole_residual`]: three times its largest magnitude on
/// the exact pushmi-pullyu wave `1/(1 + e^{x−2t})` (residual identically zero
/// in the continuum), sampled on `[-left, right]` with spacing `dx` and
/// snapshots `delta` apart.
pub fn hopf_cole_grid_error(dx: f64, delta: f64, left: f64, right: f64) -> Result<f64> {
    let model = Model::power(2, 1.0, 1.0)?;
    let k0 = (left / dx).round() as i64;
    let n = ((left + right) / dx).round() as usize + 1;
    let t_mid = 1.0;
    let make = |t: f64| FieldState {
        equation: "rde".into(),
        t,
        step: 0,
        dx,
        origin: -(k0 as f64) * dx + 2.0 * t_mid,
        shift: 0,
        u: (0..n)
            .map(|i| {
                let x = -(k0 as f64) * dx + 2.0 * t_mid + i as f64 * dx;
                1.0 / (1.0 + (x - 2.0 * t).exp())
            })
            .collect(),
    };
    let r = hopf_cole_residual(
        &make(t_mid - delta),
        &make(t_mid),
        &make(t_mid + delta),
        &model,
    )?;
    let worst = r.residual.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(3.0 * worst)
}

/// Residual of `u_t + A'(u)D₀u − Δu − u + A(u)` at the middle snapshot.
pub fn conservation_residual(
    prev: &FieldState,
    mid: &FieldState,
    next: &FieldState,
    model: &Model,
) -> Result<Vec<(f64, f64)>> {
    let s = align(prev, mid, next)?;
    let h = mid.dx;
    let len = s.mid.len();
    let mut out = Vec::with_capacity(len);
    for k in 1..len - 1 {
        let u = s.mid[k];
        let ut = (s.next[k] - s.prev[k]) / (2.0 * s.dt);
        let ux = (s.mid[k + 1] - s.mid[k - 1]) / (2.0 * h);
        let uxx = (s.mid[k + 1] - 2.0 * u + s.mid[k - 1]) / (h * h);
        let a = model.a(u);
        out.push((mid.x(s.start + k), ut + model.da(u) * ux - uxx - u + a));
    }
    Ok(out)
}

/// `F(u) = exp(−∫₀ᵘ α/η_*)` for a pushmi-pullyu model, `η_* = λ(u − A)`.
///
/// The `1/(λα′(1)(1 − u))` singularity at `u = 1` is integrated in closed
/// form and the smooth remainder by adaptive quadrature.
#[derive(Debug, Clone)]
pub struct SupersolutionWeight {
    model: Model,
    /// `1/(λα′(1))`, the exponent of `1 − u` near `u = 1`.
    pub exponent: f64,
    pub u: Vec<f64>,
    /// Cumulative integral of the regular part at the nodes.
    regular: Vec<f64>,
    pub f: Vec<f64>,
}

/// Nodes of the supersolution weight table.
pub const WEIGHT_GRID: usize = 2049;
const WEIGHT_QUAD_TOL: f64 = 1e-13;

impl SupersolutionWeight {
    fn remainder(&self, u: f64) -> f64 {
        let m = &self.model;
        if u < 1e-150 {
            // α(u)/ζ(u) → A''(0)/2
            return 0.5 * m.d2a(0.0) / m.lambda - self.exponent;
        }
        m.alpha(u) / (m.lambda * zeta_near_one(m, u)) - self.exponent / (1.0 - u)
    }

    fn regular_integral(&self, u: f64) -> f64 {
        let n = self.u.len();
        let h = 1.0 / (n - 1) as f64;
        let i = ((u / h).floor() as usize).min(n - 2);
        let g = |s: f64| self.remainder(s);
        self.regular[i] + quad(&g, self.u[i], u, WEIGHT_QUAD_TOL)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u >= 1.0 {
            return 0.0;
        }
        if u <= 0.0 {
            return 1.0;
        }
        (-self.regular_integral(u)).exp() * (1.0 - u).powf(self.exponent)
    }

    /// `log F(u)`, finite for `u < 1`.
    pub fn log_eval(&self, u: f64) -> f64 {
        -self.regular_integral(u) + self.exponent * (1.0 - u).ln()
    }
}

/// `u − A(u)`, computed as `∫_u^1 (A' − 1)` by 8-point Gauss-Legendre
/// when `1 − u < 0.05` so that it keeps full relative accuracy as `u → 1`.
fn zeta_near_one(m: &Model, u: f64) -> f64 {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329_0,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_2,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362_0,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let gap = 1.0 - u;
    if gap >= 0.05 {
        return m.zeta(u);
    }
    let c = 0.5 * (u + 1.0);
    let h = 0.5 * gap;
    let mut s = 0.0;
    for (x, w) in X.iter().zip(&W) {
        s += w * (m.da(c - h * x) - 1.0 + m.da(c + h * x) - 1.0);
    }
    s * h
}

pub fn supersolution_weight(model: &Model) -> Result<SupersolutionWeight> {
    if model.regime() != Regime::PushmiPullyu {
        return Err(Error::OutOfRange {
            name: "chi",
            value: model.chi,
            range: "pushmi-pullyu models only",
        });
    }
    let dalpha1 = model.dalpha(1.0);
    if !(dalpha1 > 0.0) {
        return Err(Error::InvalidNonlinearity(vec![crate::error::Violation {
            condition: "alpha'(1) > 0".into(),
            u: 1.0,
        }]));
    }
    let n = WEIGHT_GRID;
    let u: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mut w = SupersolutionWeight {
        model: model.clone(),
        exponent: 1.0 / (model.lambda * dalpha1),
        u: u.clone(),
        regular: vec![0.0; n],
        f: vec![0.0; n],
    };
    let mut acc = 0.0;
    for i in 1..n {
        let g = |s: f64| w.remainder(s);
        acc += quad(&g, u[i - 1], u[i], WEIGHT_QUAD_TOL);
        w.regular[i] = acc;
    }
    w.f = u.iter().map(|&x| w.eval(x)).collect();
    Ok(w)
}

/// Worst-case excursion of `log F(u)/log(1 − α(u))` outside
/// `[1/((1+ε)α′(1)) − 0.05, (1+ε)/α′(1) + 0.05]` on `u ∈ [0.9, 1 − 1e-6]`;
/// zero when the bounds hold.
pub fn weight_bounds_violation(weight: &SupersolutionWeight, model: &Model, eps: f64) -> f64 {
    let d = model.dalpha(1.0);
    let lo = 1.0 / ((1.0 + eps) * d) - 0.05;
    let hi = (1.0 + eps) / d + 0.05;
    let mut worst: f64 = 0.0;
    let k = 400;
    for j in 0..=k {
        // log-spaced in 1 − u
        let gap = 0.1 * (1e-5f64).powf(j as f64 / k as f64);
        let u = 1.0 - gap;
        let ratio = weight.log_eval(u) / (1.0 - model.alpha(u)).ln();
        worst = worst.max(lo - ratio).max(ratio - hi);
    }
    worst
}

/// Relative entropy `Φ₂ = ∫φ²ρ` with `p = e^{x̂}u`, `ρ = F(u)`, `φ = p/ρ`,
/// and its dissipation `∫(D₀φ)²ρ`, on the nodes right of the cut where
/// `ρ ≥ WEIGHT_CUTOFF`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RelativeEntropy {
    pub t: f64,
    pub phi2: f64,
    pub dissipation: f64,
    /// Lab position of the left cut.
    pub x_cut: f64,
}

fn weight_values(state: &FieldState, weight: &SupersolutionWeight) -> Result<(usize, Vec<f64>)> {
    let rho: Vec<f64> = state.u.iter().map(|u| weight.eval(*u)).collect();
    let first = rho
        .iter()
        .position(|r| *r >= WEIGHT_CUTOFF)
        .ok_or(Error::Numerical {
            t: state.t,
            reason: "supersolution weight underflows across the window".into(),
        })?;
    if rho.len() - first < 3 {
        return Err(Error::Numerical {
            t: state.t,
            reason: "supersolution weight underflows across the window".into(),
        });
    }
    Ok((first, rho))
}

pub fn relative_entropy(
    state: &FieldState,
    weight: &SupersolutionWeight,
) -> Result<RelativeEntropy> {
    let (first, rho) = weight_values(state, weight)?;
    let h = state.dx;
    let n = state.u.len();
    let phi: Vec<f64> = (first..n)
        .map(|i| (state.x(i) - 2.0 * state.t).exp() * state.u[i] / rho[i])
        .collect();
    let rho = &rho[first..];
    let ent: Vec<f64> = phi.iter().zip(rho).map(|(p, r)| p * p * r).collect();
    let diss: Vec<f64> = (1..phi.len() - 1)
        .map(|k| {
            let d = (phi[k + 1] - phi[k - 1]) / (2.0 * h);
            d * d * rho[k]
        })
        .collect();
    Ok(RelativeEntropy {
        t: state.t,
        phi2: trapz_nodes(&ent, h),
        dissipation: trapz_nodes(&diss, h),
        x_cut: state.x(first),
    })
}

/// `max ρ̄̄/(max{1, ρ̄²}ρ)` where bars are cumulative integrals from the left.
pub fn nash_constant_of(rho: &[f64], h: f64) -> f64 {
    let bar = crate::numerics::cumtrapz(rho, h);
    let dbar = crate::numerics::cumtrapz(&bar, h);
    rho.iter()
        .zip(bar.iter().zip(&dbar))
        .skip(1)
        .map(|(r, (b, bb))| bb / (b.powi(2).max(1.0) * r))
        .fold(0.0, f64::max)
}

/// [`nash_constant_of`] applied to `ρ = F(u)` right of the weight cut.
pub fn nash_weight_condition(state: &FieldState, weight: &SupersolutionWeight) -> Result<f64> {
    let (first, rho) = weight_values(state, weight)?;
    Ok(nash_constant_of(&rho[first..], state.dx))
}

/// `I(t) = ∫e^{x̃}u dx` in the frame `x̃ = x − 2t + ½log(t+1)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ExponentialMoment {
    pub t: f64,
    pub value: f64,
    /// Integrand at the last interior node over `I`.
    pub edge_ratio: f64,
    /// Set when `edge_ratio > 1e-12`.
    pub truncated: bool,
}

pub fn exponential_moment(state: &FieldState) -> ExponentialMoment {
    let shift = 2.0 * state.t - 0.5 * (state.t + 1.0).ln();
    let n = state.u.len();
    let integrand: Vec<f64> = (0..n)
        .map(|i| (state.x(i) - shift).exp() * state.u[i])
        .collect();
    let value = trapz_nodes(&integrand, state.dx);
    let edge_ratio = if value > 0.0 {
        integrand[n - 2] / value
    } else {
        0.0
    };
    ExponentialMoment {
        t: state.t,
        value,
        edge_ratio,
        truncated: edge_ratio > 1e-12,
    }
}

/// Envelope used by [`w_tail_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TailEnvelope {
    /// `x e^{−x − x²/5t}/t`.
    ConservationLaw,
    /// `(x + 1 + log t) e^{−x − (x + log t)²/5t}/t`.
    ReactionDiffusion,
}

impl TailEnvelope {
    pub fn eval(self, t: f64, x: f64) -> f64 {
        match self {
            TailEnvelope::ConservationLaw => x * (-x - x * x / (5.0 * t)).exp() / t,
            TailEnvelope::ReactionDiffusion => {
                let l = t.ln();
                (x + 1.0 + l) * (-x - (x + l).powi(2) / (5.0 * t)).exp() / t
            }
        }
    }
}

/// `sup w(t, x + m)/envelope(t, x)` over `1 < x ≤ 2√(5t)`, zero for `w ≤ 0`.
/// Past `2√(5t)` the Gaussian factor of the envelope is below `e^{-4}` and the
/// ratio only amplifies the grid error of `w`.
pub fn w_tail_constant(defect: &ShapeDefect, m: f64, envelope: TailEnvelope) -> Result<f64> {
    let t = defect.t;
    if t < 1.0 {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[1, inf)",
        });
    }
    let x_max = 2.0 * (5.0 * t).sqrt();
    Ok(defect
        .tail(m)
        .into_iter()
        .filter(|(x, _)| *x > 1.0 && *x <= x_max)
        .map(|(x, w)| w.max(0.0) / envelope.eval(t, x))
        .fold(0.0, f64::max))
}

/// Exact minimal wave of `model` sampled on a state grid, `U(x − ct − x0)`.
/// Used to build reference states for the diagnostics.
pub fn sampled_wave_state(
    model: &Model,
    dx: f64,
    left: f64,
    right: f64,
    t: f64,
    x0: f64,
) -> Result<(FieldState, WaveProfile)> {
    let c = crate::wave::minimal_speed(model)?;
    let profile = solve_profile_ode(model, c)?;
    let extent = left.max(right) + 20.0;
    let wave = integrate_wave(model, &profile, -extent, extent.max(60.0), dx.min(0.01))?;
    let k0 = (left / dx).round() as i64;
    let n = ((left + right) / dx).round() as usize + 1;
    let origin = -(k0 as f64) * dx;
    let u = (0..n)
        .map(|i| {
            let xi = origin + i as f64 * dx - x0;
            if xi < wave.x[0] {
                1.0
            } else if xi > *wave.x.last().unwrap() {
                0.0
            } else {
                wave.eval(xi)
            }
        })
        .collect();
    Ok((
        FieldState {
            equation: "rde".into(),
            t,
            step: 0,
            dx,
            origin: origin + c * t,
            shift: 0,
            u,
        },
        profile,
    ))
}
