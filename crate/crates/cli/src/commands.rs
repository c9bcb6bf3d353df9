use std::path::Path;

use frontlab::diagnostics::{energy, exponential_moment, shape_defect};
use frontlab::front::{fit_log_correction, locate_front, x0_estimate, FrontTrace, Level, LogFit};
use frontlab::solver::{run, FieldState, Grid, InitialData, RunConfig, Trajectory};
use frontlab::voting::{estimate_u, VotingRules};
use frontlab::wave::{decay_asymptotics, integrate_wave, minimal_profile, minimal_speed, DecayFit};
use frontlab::{Model, ModelSpec, Regime};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{
    DiagnoseConfig, FrontFitConfig, RulesConfig, SimulateConfig, SpeedConfig, SweepConfig,
    VotingConfig, WaveConfig,
};
use crate::error::{CliError, CliResult};
use crate::output::{num, Artifacts};

pub const TRAJECTORY: &str = "trajectory.json";
pub const TRACE: &str = "trace.csv";

fn regime_name(r: Regime) -> String {
    serde_json::to_value(r)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn speed(cfg: &SpeedConfig, out: &mut Artifacts) -> CliResult<u64> {
    if cfg.models.is_empty() {
        return Err(CliError::Config("no models".into()));
    }
    let mut rows = Vec::new();
    println!(
        "{:<12} {:<24} {:>8} {:>8} {:>14}  regime",
        "family", "params", "chi", "lambda", "c_*"
    );
    for spec in &cfg.models {
        let model = Model::from_spec(spec)?;
        let c = minimal_speed(&model)?;
        let params = serde_json::to_string(&spec.params).expect("params serialize");
        let regime = regime_name(model.regime());
        println!(
            "{:<12} {:<24} {:>8} {:>8} {:>14.9}  {regime}",
            spec.family, params, spec.chi, spec.lambda, c
        );
        rows.push(vec![
            spec.family.clone(),
            params,
            num(spec.chi),
            num(spec.lambda),
            num(c),
            regime,
        ]);
    }
    out.csv(
        "speed.csv",
        &["family", "params", "chi", "lambda", "c_star", "regime"],
        &rows,
    )?;
    Ok(0)
}

#[derive(Serialize)]
struct WaveSummary<'a> {
    model: &'a ModelSpec,
    regime: String,
    c_star: f64,
    eta_prime_0: f64,
    eta_prime_1: f64,
    decay: DecayFit,
}

pub fn wave(cfg: &WaveConfig, out: &mut Artifacts) -> CliResult<u64> {
    let model = Model::from_spec(&cfg.model)?;
    let profile = minimal_profile(&model)?;
    let wave = integrate_wave(&model, &profile, cfg.x_min, cfg.x_max, cfg.dx)?;
    let rows: Vec<Vec<String>> = (0..profile.u.len())
        .map(|i| {
            vec![
                num(profile.u[i]),
                num(profile.eta[i]),
                num(profile.slope[i]),
            ]
        })
        .collect();
    out.csv("profile.csv", &["u", "eta", "eta_prime"], &rows)?;
    let rows: Vec<Vec<String>> = (0..wave.x.len())
        .map(|i| vec![num(wave.x[i]), num(wave.u[i]), num(wave.du[i])])
        .collect();
    out.csv("wave.csv", &["x", "u", "u_prime"], &rows)?;
    let decay = decay_asymptotics(&wave, profile.eta_prime_0)?;
    println!("c_* = {:.9}, decay {:?}", profile.c, decay.kind);
    out.json(
        "wave.json",
        &WaveSummary {
            model: &cfg.model,
            regime: regime_name(model.regime()),
            c_star: profile.c,
            eta_prime_0: profile.eta_prime_0,
            eta_prime_1: profile.eta_prime_1,
            decay,
        },
    )?;
    Ok(0)
}

/// Index written next to the snapshot CSVs; enough to rebuild every state.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrajectoryIndex {
    pub model: ModelSpec,
    pub equation: String,
    pub level: Level,
    pub dx: f64,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub step: u64,
    pub file: String,
}

fn diagnostics_rows(
    model: &Model,
    level: Level,
    states: &[FieldState],
) -> CliResult<Vec<Vec<String>>> {
    let profile = minimal_profile(model)?;
    let mut rows = Vec::new();
    for s in states {
        let m = locate_front(s, level, model).map(num).unwrap_or_default();
        let d = shape_defect(s, &profile);
        // a truncated energy integral is reported as missing, not as a failure
        let e = energy(s, &profile, profile.c)
            .map(|e| num(e.value))
            .unwrap_or_default();
        let i = exponential_moment(s);
        rows.push(vec![
            num(s.t),
            m,
            num(d.min_w),
            num(d.argmin_x),
            e,
            num(i.value),
            i.truncated.to_string(),
        ]);
    }
    Ok(rows)
}

const DIAGNOSTICS_HEADER: [&str; 7] = [
    "t",
    "front",
    "min_w",
    "argmin_x",
    "energy",
    "exp_moment",
    "exp_moment_truncated",
];

fn write_trace(out: &mut Artifacts, name: &str, trace: &FrontTrace) -> CliResult<()> {
    let rows: Vec<Vec<String>> = trace
        .t
        .iter()
        .zip(&trace.m)
        .map(|(t, m)| vec![num(*t), num(*m)])
        .collect();
    out.csv(name, &["t", "m"], &rows)
}

pub fn simulate(cfg: &SimulateConfig, out: &mut Artifacts) -> CliResult<u64> {
    let run_cfg = &cfg.run;
    let model = Model::from_spec(&run_cfg.model)?;
    let traj = run(run_cfg)?;
    write_trace(out, TRACE, &traj.trace)?;
    let mut entries = Vec::new();
    for (k, s) in traj.snapshots.iter().enumerate() {
        let file = format!("snapshots/{k:05}.csv");
        let rows: Vec<Vec<String>> = (0..s.u.len())
            .map(|i| vec![num(s.x(i)), num(s.u[i])])
            .collect();
        out.csv(&file, &["x_lab", "u"], &rows)?;
        entries.push(SnapshotEntry {
            t: s.t,
            step: s.step,
            file,
        });
    }
    out.json(
        TRAJECTORY,
        &TrajectoryIndex {
            model: run_cfg.model.clone(),
            equation: run_cfg.equation.clone(),
            level: run_cfg.level,
            dx: run_cfg.grid.dx,
            snapshots: entries,
        },
    )?;
    if cfg.diagnostics && !traj.snapshots.is_empty() {
        let rows = diagnostics_rows(&model, run_cfg.level, &traj.snapshots)?;
        out.csv("diagnostics.csv", &DIAGNOSTICS_HEADER, &rows)?;
    }
    println!(
        "{} steps, {} snapshots, final front {:?}",
        traj.steps,
        traj.snapshots.len(),
        traj.trace.m.last()
    );
    Ok(traj.steps)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn read_columns(path: &Path) -> CliResult<Vec<(f64, f64)>> {
    let bad = |e: String| CliError::Config(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| -> CliResult<f64> {
            rec.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad(format!("bad number in column {i}")))
        };
        out.push((field(0)?, field(1)?));
    }
    Ok(out)
}

pub fn read_trace(dir: &Path) -> CliResult<FrontTrace> {
    let mut trace = FrontTrace::default();
    for (t, m) in read_columns(&dir.join(TRACE))? {
        trace.push(t, m);
    }
    Ok(trace)
}

#[derive(Serialize)]
struct FitReport {
    fit: LogFit,
    /// `x₀` re-estimated on consecutive dyadic windows inside the fit window.
    x0_windows: Vec<((f64, f64), f64)>,
    x0_drift: f64,
}

fn dyadic_windows(window: (f64, f64)) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut a = window.0;
    while 2.0 * a <= window.1 * (1.0 + 1e-12) {
        out.push((a, 2.0 * a));
        a *= 2.0;
    }
    out
}

pub fn front_fit(cfg: &FrontFitConfig, out: &mut Artifacts) -> CliResult<u64> {
    let trace = read_trace(&cfg.trajectory)?;
    let fit = fit_log_correction(&trace, cfg.window)?;
    let x0_windows = dyadic_windows(cfg.window)
        .into_iter()
        .map(|w| Ok((w, x0_estimate(&trace, fit.c, fit.r, w)?)))
        .collect::<CliResult<Vec<_>>>()?;
    let hi = x0_windows
        .iter()
        .map(|w| w.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = x0_windows.iter().map(|w| w.1).fold(f64::INFINITY, f64::min);
    let x0_drift = if x0_windows.is_empty() { 0.0 } else { hi - lo };
    println!(
        "c = {:.6} r = {:.4} (se {:.1e}) x0 = {:.4}, x0 drift {x0_drift:.4}",
        fit.c, fit.r, fit.se_r, fit.x0
    );
    out.json(
        "fit.json",
        &FitReport {
            fit,
            x0_windows,
            x0_drift,
        },
    )?;
    Ok(0)
}

pub fn diagnose(cfg: &DiagnoseConfig, out: &mut Artifacts) -> CliResult<u64> {
    let index: TrajectoryIndex = read_json(&cfg.trajectory.join(TRAJECTORY))?;
    let model = Model::from_spec(&index.model)?;
    let states = index
        .snapshots
        .iter()
        .map(|e| {
            let cols = read_columns(&cfg.trajectory.join(&e.file))?;
            let origin = cols
                .first()
                .ok_or_else(|| CliError::Config(format!("empty snapshot {}", e.file)))?
                .0;
            Ok(FieldState {
                equation: index.equation.clone(),
                t: e.t,
                step: e.step,
                dx: index.dx,
                origin,
                shift: 0,
                u: cols.into_iter().map(|c| c.1).collect(),
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let rows = diagnostics_rows(&model, index.level, &states)?;
    out.csv("diagnostics.csv", &DIAGNOSTICS_HEADER, &rows)?;
    println!("{} snapshots diagnosed", rows.len());
    Ok(0)
}

fn rules(cfg: &RulesConfig) -> CliResult<VotingRules> {
    Ok(match cfg {
        RulesConfig::Tilted { n, gamma, beta } => VotingRules::tilted(*n, *gamma, *beta)?,
        RulesConfig::Majority { n, beta } => VotingRules::majority(*n, *beta)?,
        RulesConfig::Custom { mu, beta } => VotingRules::custom(mu.clone(), *beta)?,
    })
}

/// Linear interpolation of a state at lab position `x`.
fn sample(s: &FieldState, x: f64) -> CliResult<f64> {
    let r = (x - s.x(0)) / s.dx;
    if !(r >= 0.0 && r <= (s.u.len() - 1) as f64) {
        return Err(CliError::Config(format!(
            "probe {x} lies outside the PDE window"
        )));
    }
    let i = (r.floor() as usize).min(s.u.len() - 2);
    let w = r - i as f64;
    Ok((1.0 - w) * s.u[i] + w * s.u[i + 1])
}

pub fn voting_mc(cfg: &VotingConfig, out: &mut Artifacts) -> CliResult<u64> {
    let rules = rules(&cfg.rules)?;
    let step_at = cfg.step_at;
    let g = move |x: f64| if x <= step_at { 1.0 } else { 0.0 };
    let est = estimate_u(
        &rules,
        &g,
        cfg.t,
        &cfg.xs,
        cfg.n_paths,
        cfg.seed,
        cfg.estimator,
    )?;
    let mut steps = 0;
    let pde = match &cfg.compare_pde {
        Some(p) => {
            let model = rules.pde_model()?;
            let mut run_cfg = RunConfig::new(&model, "rde", cfg.t);
            run_cfg.grid = Grid {
                dx: p.dx,
                left: p.left,
                right: p.right,
            };
            run_cfg.recenter = false;
            run_cfg.initial = InitialData::Step {
                x0: step_at,
                width: 0.0,
            };
            run_cfg.snapshot_times = vec![cfg.t];
            let traj: Trajectory = run(&run_cfg)?;
            steps = traj.steps;
            let last = traj
                .snapshots
                .last()
                .ok_or_else(|| CliError::Config("PDE comparison needs t > 0".into()))?;
            Some(
                cfg.xs
                    .iter()
                    .map(|x| sample(last, *x))
                    .collect::<CliResult<Vec<_>>>()?,
            )
        }
        None => None,
    };
    let mut header = vec!["x", "mean", "se", "n_paths"];
    if pde.is_some() {
        header.push("pde");
    }
    let rows: Vec<Vec<String>> = (0..est.xs.len())
        .map(|k| {
            let mut r = vec![
                num(est.xs[k]),
                num(est.mean[k]),
                num(est.se[k]),
                est.n_paths.to_string(),
            ];
            if let Some(p) = &pde {
                r.push(num(p[k]));
            }
            r
        })
        .collect();
    out.csv("votes.csv", &header, &rows)?;
    for k in 0..est.xs.len() {
        let cmp = pde
            .as_ref()
            .map(|p| {
                format!(
                    "  pde {:.6} ({:+.2} se)",
                    p[k],
                    (est.mean[k] - p[k]) / est.se[k]
                )
            })
            .unwrap_or_default();
        println!(
            "x={:>8.4}  u={:.6} +- {:.1e}{cmp}",
            est.xs[k], est.mean[k], est.se[k]
        );
    }
    Ok(steps)
}

struct SweepResult {
    equation: String,
    chi: f64,
    regime: String,
    c_star: f64,
    traj: Trajectory,
    fit: Option<LogFit>,
}

pub fn sweep(cfg: &SweepConfig, out: &mut Artifacts) -> CliResult<u64> {
    if cfg.chi.is_empty() {
        return Err(CliError::Config("no models".into()));
    }
    let equations = if cfg.equations.is_empty() {
        vec![cfg.base.equation.clone()]
    } else {
        cfg.equations.clone()
    };
    let base = Model::from_spec(&cfg.base.model)?;
    let mut jobs = Vec::new();
    for chi in &cfg.chi {
        for eq in &equations {
            let model = base.with_chi(*chi)?;
            let mut run_cfg = cfg.base.clone();
            run_cfg.model = model.spec();
            run_cfg.equation = eq.clone();
            jobs.push((model, run_cfg));
        }
    }
    let results = jobs
        .into_par_iter()
        .map(|(model, run_cfg)| {
            let traj = run(&run_cfg)?;
            let fit = cfg
                .fit_window
                .map(|w| fit_log_correction(&traj.trace, w))
                .transpose()?;
            Ok(SweepResult {
                equation: run_cfg.equation,
                chi: model.chi,
                regime: regime_name(model.regime()),
                c_star: minimal_speed(&model)?,
                traj,
                fit,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut steps = 0;
    for (k, r) in results.iter().enumerate() {
        let trace = format!("runs/{k:03}/{TRACE}");
        write_trace(out, &trace, &r.traj.trace)?;
        steps += r.traj.steps;
        let fit = |f: fn(&LogFit) -> f64| r.fit.as_ref().map(|x| num(f(x))).unwrap_or_default();
        rows.push(vec![
            k.to_string(),
            r.equation.clone(),
            num(r.chi),
            r.regime.clone(),
            num(r.c_star),
            r.traj.steps.to_string(),
            r.traj.trace.m.last().map(|m| num(*m)).unwrap_or_default(),
            fit(|f| f.c),
            fit(|f| f.r),
            fit(|f| f.x0),
            trace,
        ]);
        println!(
            "{k:>3} {:<10} chi={:<6} c_*={:.6} r_fit={}",
            r.equation,
            r.chi,
            r.c_star,
            r.fit
                .as_ref()
                .map(|f| format!("{:.4}", f.r))
                .unwrap_or("-".into())
        );
    }
    out.csv(
        "sweep.csv",
        &[
            "job",
            "equation",
            "chi",
            "regime",
            "c_star",
            "steps",
            "final_front",
            "fit_c",
            "fit_r",
            "fit_x0",
            "trace",
        ],
        &rows,
    )?;
    Ok(steps)
}
