//! Method-of-lines solver on a re-centered lab-frame window.
//!
//! Second-order centered diffusion and conservation-law flux (an upwind
//! variant is registered too), Heun time stepping and Dirichlet values 1 / 0 at the
//! window ends. The window moves by whole cells only, so every node keeps an
//! exact integer lab index and moving-frame quantities never need
//! interpolation.

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::front::{locate_front, FrontTrace, Level};
use crate::nonlinearity::{Model, ModelSpec};
use crate::registry::Registry;
use crate::wave::{integrate_wave, minimal_profile, TravelingWave};

/// Default grid spacing.
pub const DX: f64 = 0.05;
/// Default `dt / dx²`; below the explicit stability limit with margin.
pub const DT_OVER_DX2: f64 = 0.2;
/// Default window extent behind the front.
pub const LEFT: f64 = 60.0;
/// Default window extent ahead of the front.
pub const RIGHT: f64 = 120.0;
/// Overshoots past `[0, 1]` up to this size are clamped; larger ones abort.
pub const CLIP_TOL: f64 = 1e-12;

/// Right-hand side of a semi-discrete evolution equation.
pub trait Evolution: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// Writes `du/dt` at interior nodes `1..n-1` into `out`. `a` and `da`
    /// hold `A(u)` and `A'(u)` at every node.
    fn rhs(&self, model: &Model, u: &[f64], a: &[f64], da: &[f64], dx: f64, out: &mut [f64]);

    /// Rejects spacings at which the scheme loses monotonicity.
    fn check(&self, _model: &Model, _dx: f64) -> Result<()> {
        Ok(())
    }

    /// Rate `κ` for which `Σ e^{κx}u` has no flux or reaction contribution,
    /// if the scheme has one.
    fn mass_rate(&self, _dx: f64) -> Option<f64> {
        None
    }
}

/// `u_t = u_xx + f(u)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReactionDiffusion;

impl Evolution for ReactionDiffusion {
    fn name(&self) -> &str {
        "rde"
    }

    fn rhs(&self, model: &Model, u: &[f64], a: &[f64], da: &[f64], dx: f64, out: &mut [f64]) {
        let n = u.len();
        let inv = 1.0 / (dx * dx);
        let l2 = model.lambda * model.lambda;
        let chi = model.chi;
        let (ul, uc, ur) = (&u[..n - 2], &u[1..n - 1], &u[2..]);
        let inner = out[1..n - 1]
            .iter_mut()
            .zip(ul.iter().zip(uc).zip(ur))
            .zip(a[1..n - 1].iter().zip(&da[1..n - 1]));
        for ((o, ((l, c), r)), (ai, di)) in inner {
            let lap = (r - 2.0 * c + l) * inv;
            *o = lap + l2 * (c - ai) * (1.0 + chi * di);
        }
    }
}

/// `u_t + A(u)_x = u_xx + u − A(u)` with a centered flux difference; uses
/// only the shape function of the model. Monotone while the cell Péclet
/// number `dx·A'(1)/2` stays at most 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReactiveConservationLaw;

impl Evolution for ReactiveConservationLaw {
    fn name(&self) -> &str {
        "rcl"
    }

    fn rhs(&self, _model: &Model, u: &[f64], a: &[f64], _da: &[f64], dx: f64, out: &mut [f64]) {
        let n = u.len();
        let inv = 1.0 / (dx * dx);
        let half_inv_dx = 0.5 / dx;
        let (ul, uc, ur) = (&u[..n - 2], &u[1..n - 1], &u[2..]);
        let inner = out[1..n - 1]
            .iter_mut()
            .zip(ul.iter().zip(uc).zip(ur))
            .zip(a[..n - 2].iter().zip(&a[1..n - 1]).zip(&a[2..]));
        for ((o, ((l, c), r)), ((al, ac), ar)) in inner {
            let lap = (r - 2.0 * c + l) * inv;
            *o = lap - (ar - al) * half_inv_dx + c - ac;
        }
    }

    fn check(&self, model: &Model, dx: f64) -> Result<()> {
        let peclet = 0.5 * dx * model.da(1.0);
        if peclet > 1.0 {
            return Err(Error::Config(format!(
                "cell Peclet number {peclet} exceeds 1 at dx={dx}; refine or use rcl-upwind"
            )));
        }
        Ok(())
    }

    fn mass_rate(&self, dx: f64) -> Option<f64> {
        Some(dx.asinh() / dx)
    }
}

/// Conservation law with the first-order upwind (left-neighbor) flux:
/// monotone at any spacing, but its numerical diffusion shifts the discrete
/// wave by `O(dx)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpwindConservationLaw;

impl Evolution for UpwindConservationLaw {
    fn name(&self) -> &str {
        "rcl-upwind"
    }

    fn rhs(&self, _model: &Model, u: &[f64], a: &[f64], _da: &[f64], dx: f64, out: &mut [f64]) {
        let n = u.len();
        let inv = 1.0 / (dx * dx);
        let inv_dx = 1.0 / dx;
        let (ul, uc, ur) = (&u[..n - 2], &u[1..n - 1], &u[2..]);
        let inner = out[1..n - 1]
            .iter_mut()
            .zip(ul.iter().zip(uc).zip(ur))
            .zip(a[..n - 2].iter().zip(&a[1..n - 1]));
        for ((o, ((l, c), r)), (al, ac)) in inner {
            let lap = (r - 2.0 * c + l) * inv;
            *o = lap - (ac - al) * inv_dx + c - ac;
        }
    }

    fn mass_rate(&self, dx: f64) -> Option<f64> {
        Some((1.0 + dx).ln() / dx)
    }
}

pub type EquationRegistry = Registry<dyn Evolution>;

/// Registry with `rde`, `rcl` and `rcl-upwind`.
pub fn default_equation_registry() -> EquationRegistry {
    let mut r = EquationRegistry::new("equation");
    r.register("rde", |_| {
        Ok(Arc::new(ReactionDiffusion) as Arc<dyn Evolution>)
    });
    r.register("rcl", |_| {
        Ok(Arc::new(ReactiveConservationLaw) as Arc<dyn Evolution>)
    });
    r.register("rcl-upwind", |_| {
        Ok(Arc::new(UpwindConservationLaw) as Arc<dyn Evolution>)
    });
    r
}

pub fn equation(name: &str) -> Result<Arc<dyn Evolution>> {
    static REG: OnceLock<EquationRegistry> = OnceLock::new();
    REG.get_or_init(default_equation_registry)
        .build(name, &serde_json::Value::Null)
}

/// Field values on the window at one instant.
///
/// Node `i` sits at lab position `origin + (shift + i)·dx`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldState {
    pub equation: String,
    pub t: f64,
    pub step: u64,
    pub dx: f64,
    pub origin: f64,
    pub shift: i64,
    pub u: Vec<f64>,
}

impl FieldState {
    /// Lab position of node 0.
    pub fn frame_offset(&self) -> f64 {
        self.origin + self.shift as f64 * self.dx
    }

    /// Integer lab index of node `i`.
    #[inline]
    pub fn lab_index(&self, i: usize) -> i64 {
        self.shift + i as i64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.origin + self.lab_index(i) as f64 * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.u.len()).map(|i| self.x(i)).collect()
    }

    /// Values at the nodes adjacent to the left and right boundaries.
    pub fn boundary_health(&self) -> (f64, f64) {
        let n = self.u.len();
        (self.u[1], self.u[n - 2])
    }

    /// Overlap of two states on a common lab grid: `(i_self, i_other, len)`.
    pub fn overlap(&self, other: &FieldState) -> Option<(usize, usize, usize)> {
        if (self.dx - other.dx).abs() > 0.0 || (self.origin - other.origin).abs() > 0.0 {
            return None;
        }
        let lo = self.shift.max(other.shift);
        let hi = (self.shift + self.u.len() as i64).min(other.shift + other.u.len() as i64);
        if hi <= lo {
            return None;
        }
        Some((
            (lo - self.shift) as usize,
            (lo - other.shift) as usize,
            (hi - lo) as usize,
        ))
    }
}

/// Uniform window `[-left, right]` around lab position `center`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Grid {
    pub dx: f64,
    pub left: f64,
    pub right: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            dx: DX,
            left: LEFT,
            right: RIGHT,
        }
    }
}

impl Grid {
    pub fn nodes(&self) -> usize {
        ((self.left + self.right) / self.dx).round() as usize + 1
    }

    pub fn center_index(&self) -> usize {
        (self.left / self.dx).round() as usize
    }

    pub fn origin(&self) -> f64 {
        -(self.center_index() as f64) * self.dx
    }

    pub fn xs(&self) -> Vec<f64> {
        let o = self.origin();
        (0..self.nodes()).map(|i| o + i as f64 * self.dx).collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.left > 2.0 * self.dx && self.right > 2.0 * self.dx) {
            return Err(Error::Config(format!("degenerate grid {self:?}")));
        }
        Ok(())
    }

    pub fn state(&self, equation: &str, u: Vec<f64>) -> FieldState {
        FieldState {
            equation: equation.to_string(),
            t: 0.0,
            step: 0,
            dx: self.dx,
            origin: self.origin(),
            shift: 0,
            u,
        }
    }
}

/// Initial data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialData {
    /// Step down at `x0`. With `width > 0` the step is replaced by a steepened
    /// copy of the model's minimal wave that reaches 1 at `x0 − width`.
    Step { x0: f64, width: f64 },
    /// `U_*(γ(x − a))` for `x ≤ 0`, zero beyond.
    ScaledWave { gamma: f64, a: f64 },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Step {
            x0: 0.0,
            width: 0.0,
        }
    }
}

fn reference_wave(model: &Model) -> Result<TravelingWave> {
    let profile = minimal_profile(model)?;
    integrate_wave(model, &profile, -80.0, 80.0, 0.005)
}

/// Sharp (`width = 0`) or steepened-wave step at `x0` sampled on `xs`.
pub fn make_initial_step(model: &Model, xs: &[f64], x0: f64, width: f64) -> Result<Vec<f64>> {
    if width < 0.0 {
        return Err(Error::OutOfRange {
            name: "width",
            value: width,
            range: "[0, inf)",
        });
    }
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    if !(x0 > lo && x0 < hi) {
        return Err(Error::OutOfRange {
            name: "x0",
            value: x0,
            range: "inside the window",
        });
    }
    if width == 0.0 {
        return Ok(xs
            .iter()
            .map(|&x| {
                if x < x0 {
                    1.0
                } else if x > x0 {
                    0.0
                } else {
                    0.5
                }
            })
            .collect());
    }
    let wave = reference_wave(model)?;
    // first wave coordinate at which U is within 1e-15 of 1
    let i_flat = wave.u.iter().rposition(|u| *u >= 1.0 - 1e-15).unwrap_or(0);
    let x_flat = wave.x[i_flat].min(-1.0);
    let half = 0.5 * width;
    let gamma = (-x_flat / half).max(2.0);
    let xc = x0 - half;
    Ok(xs
        .iter()
        .map(|&x| {
            if x <= x0 - width {
                1.0
            } else if x >= x0 {
                0.0
            } else {
                wave.eval(gamma * (x - xc))
            }
        })
        .collect())
}

/// `U_*(γ(x − a))·1(x ≤ 0)` with `γ ∈ (1, 4/3]` and `a ≥ 0`.
pub fn make_initial_scaled_wave(model: &Model, xs: &[f64], gamma: f64, a: f64) -> Result<Vec<f64>> {
    if !(gamma > 1.0 && gamma <= 4.0 / 3.0) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(1, 4/3]",
        });
    }
    if a < 0.0 {
        return Err(Error::OutOfRange {
            name: "a",
            value: a,
            range: "[0, inf)",
        });
    }
    let wave = reference_wave(model)?;
    Ok(xs
        .iter()
        .map(|&x| {
            if x <= 0.0 {
                wave.eval(gamma * (x - a))
            } else {
                0.0
            }
        })
        .collect())
}

/// Full description of a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "default_equation")]
    pub equation: String,
    #[serde(default)]
    pub grid: Grid,
    /// Time step; `DT_OVER_DX2·dx²` when absent.
    #[serde(default)]
    pub dt: Option<f64>,
    pub t_end: f64,
    #[serde(default)]
    pub initial: InitialData,
    /// Times at which full snapshots are kept.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// When set, snapshots are also kept this many steps before and after
    /// every scheduled time, for centered time derivatives.
    #[serde(default)]
    pub stencil_steps: Option<u64>,
    /// Front trace sampling interval in time units.
    #[serde(default = "default_trace_every")]
    pub trace_every: f64,
    #[serde(default)]
    pub level: Level,
    #[serde(default = "yes")]
    pub recenter: bool,
}

fn default_equation() -> String {
    "rde".into()
}
fn default_trace_every() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn new(model: &Model, equation: &str, t_end: f64) -> Self {
        Self {
            model: model.spec(),
            equation: equation.to_string(),
            grid: Grid::default(),
            dt: None,
            t_end,
            initial: InitialData::default(),
            snapshot_times: Vec::new(),
            stencil_steps: None,
            trace_every: default_trace_every(),
            level: Level::default(),
            recenter: true,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(DT_OVER_DX2 * self.grid.dx * self.grid.dx)
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt()).round() as u64
    }

    /// Step indices at which snapshots are recorded.
    pub fn snapshot_steps(&self) -> Vec<u64> {
        let dt = self.dt();
        let k = self.stencil_steps.unwrap_or(0);
        let mut out = Vec::new();
        for t in &self.snapshot_times {
            let s = (t / dt).round() as u64;
            if k > 0 && s >= k {
                out.push(s - k);
            }
            out.push(s);
            if k > 0 {
                out.push(s + k);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let dt = self.dt();
        if !(dt > 0.0) {
            return Err(Error::Config("dt must be positive".into()));
        }
        if dt > 0.45 * self.grid.dx * self.grid.dx {
            return Err(Error::Config(format!(
                "dt={dt} exceeds the explicit stability limit for dx={}",
                self.grid.dx
            )));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Config("t_end must be nonnegative".into()));
        }
        if !(self.trace_every > 0.0) {
            return Err(Error::Config("trace_every must be positive".into()));
        }
        Ok(())
    }
}

/// Stepper owning a field state.
pub struct Simulation {
    model: Model,
    evolution: Arc<dyn Evolution>,
    state: FieldState,
    dt: f64,
    recenter: bool,
    center: usize,
    level: Level,
    a: Vec<f64>,
    da: Vec<f64>,
    k1: Vec<f64>,
    k2: Vec<f64>,
    stage: Vec<f64>,
    front_hint: usize,
    recenterings: u64,
}

impl Simulation {
    pub fn new(model: Model, state: FieldState, dt: f64) -> Result<Self> {
        let evolution = equation(&state.equation)?;
        evolution.check(&model, state.dx)?;
        let n = state.u.len();
        if n < 5 {
            return Err(Error::Config("window needs at least 5 nodes".into()));
        }
        Ok(Self {
            center: (-state.origin / state.dx).round().max(1.0) as usize,
            model,
            evolution,
            dt,
            recenter: true,
            level: Level::default(),
            a: vec![0.0; n],
            da: vec![0.0; n],
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            stage: state.u.clone(),
            state,
            front_hint: 0,
            recenterings: 0,
        })
    }

    pub fn with_recentering(mut self, on: bool, level: Level) -> Self {
        self.recenter = on;
        self.level = level;
        self
    }

    pub fn state(&self) -> &FieldState {
        &self.state
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn recenterings(&self) -> u64 {
        self.recenterings
    }

    pub fn step(&mut self) -> Result<()> {
        let dx = self.state.dx;
        let dt = self.dt;
        let n = self.state.u.len();
        let shape = self.model.shape().clone();

        shape.eval_into(&self.state.u, &mut self.a, &mut self.da);
        self.evolution.rhs(
            &self.model,
            &self.state.u,
            &self.a,
            &self.da,
            dx,
            &mut self.k1,
        );
        let u = &self.state.u;
        self.stage[0] = u[0];
        self.stage[n - 1] = u[n - 1];
        for ((s, ui), k) in self.stage[1..n - 1]
            .iter_mut()
            .zip(&u[1..n - 1])
            .zip(&self.k1[1..n - 1])
        {
            *s = ui + dt * k;
        }
        shape.eval_into(&self.stage, &mut self.a, &mut self.da);
        self.evolution.rhs(
            &self.model,
            &self.stage,
            &self.a,
            &self.da,
            dx,
            &mut self.k2,
        );
        let half = 0.5 * dt;
        let u = &mut self.state.u;
        for ((ui, k1), k2) in u[1..n - 1]
            .iter_mut()
            .zip(&self.k1[1..n - 1])
            .zip(&self.k2[1..n - 1])
        {
            *ui += half * (k1 + k2);
        }
        self.state.step += 1;
        self.state.t = self.state.step as f64 * dt;
        self.clip()?;
        if self.recenter {
            self.recenter_window()?;
        }
        Ok(())
    }

    fn clip(&mut self) -> Result<()> {
        let outside = self
            .state
            .u
            .iter()
            .fold(false, |acc, v| acc | (*v < 0.0) | (*v > 1.0) | v.is_nan());
        if !outside {
            return Ok(());
        }
        let t = self.state.t;
        for v in self.state.u.iter_mut() {
            if *v < 0.0 || *v > 1.0 || v.is_nan() {
                if *v >= -CLIP_TOL && *v < 0.0 {
                    *v = 0.0;
                } else if *v > 1.0 && *v <= 1.0 + CLIP_TOL {
                    *v = 1.0;
                } else {
                    return Err(Error::Numerical {
                        t,
                        reason: format!("value {v} left [0, 1] beyond clamp tolerance"),
                    });
                }
            }
        }
        Ok(())
    }

    fn front_index(&mut self) -> Option<usize> {
        let level = self.level.u_level(&self.model);
        let u = &self.state.u;
        let last = u.len() - 2;
        let ok = |i: usize| u[i] >= level && u[i + 1] < level;
        // search outward from the last known position
        let (mut lo, mut hi) = (self.front_hint.min(last), self.front_hint.min(last));
        loop {
            if ok(hi) {
                self.front_hint = hi;
                return Some(hi);
            }
            if ok(lo) {
                self.front_hint = lo;
                return Some(lo);
            }
            if lo == 0 && hi == last {
                return None;
            }
            lo = lo.saturating_sub(1);
            hi = (hi + 1).min(last);
        }
    }

    fn recenter_window(&mut self) -> Result<()> {
        let Some(i) = self.front_index() else {
            return Ok(());
        };
        if i > self.center {
            let k = i - self.center;
            let n = self.state.u.len();
            self.state.u.copy_within(k.., 0);
            for v in &mut self.state.u[n - k..] {
                *v = 0.0;
            }
            self.state.u[0] = 1.0;
            self.state.shift += k as i64;
            self.front_hint = self.center;
            self.recenterings += 1;
        }
        let (l, r) = self.state.boundary_health();
        if l < 1.0 - 1e-6 || r > 1e-10 {
            return Err(Error::Numerical {
                t: self.state.t,
                reason: format!(
                    "front too close to the window edge (u[1]={l:.3e}, u[n-2]={r:.3e})"
                ),
            });
        }
        Ok(())
    }
}

/// Output of [`run`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<FieldState>,
    pub trace: FrontTrace,
    pub steps: u64,
    pub recenterings: u64,
}

/// Builds the initial state described by `config`.
pub fn initial_state(config: &RunConfig, model: &Model) -> Result<FieldState> {
    let xs = config.grid.xs();
    let u = match config.initial {
        InitialData::Step { x0, width } => make_initial_step(model, &xs, x0, width)?,
        InitialData::ScaledWave { gamma, a } => make_initial_scaled_wave(model, &xs, gamma, a)?,
    };
    Ok(config.grid.state(&config.equation, u))
}

/// Runs `config` to completion.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    run_observed(config, |_| Ok(()))
}

/// Runs `config`, calling `observer` after every step (and once at `t = 0`).
pub fn run_observed<F>(config: &RunConfig, mut observer: F) -> Result<Trajectory>
where
    F: FnMut(&FieldState) -> Result<()>,
{
    config.validate()?;
    let model = Model::from_spec(&config.model)?;
    let state = initial_state(config, &model)?;
    let mut sim =
        Simulation::new(model, state, config.dt())?.with_recentering(config.recenter, config.level);
    let steps = config.steps();
    let snap_steps = config.snapshot_steps();
    let trace_stride = ((config.trace_every / config.dt()).round() as u64).max(1);
    let mut snapshots = Vec::with_capacity(snap_steps.len());
    let mut trace = FrontTrace::default();
    let mut next_snap = 0usize;

    let mut record =
        |sim: &Simulation, snapshots: &mut Vec<FieldState>, next: &mut usize| -> Result<()> {
            let st = sim.state();
            if st.step % trace_stride == 0 {
                if let Ok(m) = locate_front(st, config.level, sim.model()) {
                    trace.push(st.t, m);
                }
            }
            while *next < snap_steps.len() && snap_steps[*next] == st.step {
                snapshots.push(st.clone());
                *next += 1;
            }
            Ok(())
        };

    record(&sim, &mut snapshots, &mut next_snap)?;
    observer(sim.state())?;
    for _ in 0..steps {
        sim.step()?;
        record(&sim, &mut snapshots, &mut next_snap)?;
        observer(sim.state())?;
    }
    Ok(Trajectory {
        snapshots,
        trace,
        steps,
        recenterings: sim.recenterings(),
    })
}

/// Discrete counterpart of `∫ e^{x − 2t} u dx` for the conservation-law
/// schemes. The weights `e^{κx}` (see [`Evolution::mass_rate`]) annihilate the
/// discrete flux and reaction terms exactly, and the linear growth is removed
/// with Heun's amplification factor, so this is constant up to boundary flux.
pub fn conserved_mass(state: &FieldState, dt: f64) -> Result<f64> {
    let h = state.dx;
    let kappa = equation(&state.equation)?.mass_rate(h).ok_or_else(|| {
        Error::Config(format!(
            "equation '{}' has no conserved mass",
            state.equation
        ))
    })?;
    let sigma = (2.0 * (kappa * h).cosh() - 2.0) / (h * h) + 1.0;
    let growth = 1.0 + sigma * dt + 0.5 * (sigma * dt).powi(2);
    let log_decay = -(state.step as f64) * growth.ln();
    Ok(state
        .u
        .iter()
        .enumerate()
        .map(|(i, u)| (kappa * state.x(i) + log_decay).exp() * u * h)
        .sum())
}
