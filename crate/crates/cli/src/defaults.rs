//! Every physical default used when a config leaves a field out. Resolved
//! configs are echoed in full, so manifests never depend on these values.
//! Grid defaults (`dx = 0.05`, `dt = 0.2dx²`, window 60/120) are the solver's
//! own constants in `frontlab::solver`.

/// Front-position fit window `[t0, t1]`.
pub const FIT_WINDOW: (f64, f64) = (250.0, 2000.0);
/// Traveling-wave table extent and spacing for `wave`.
pub const WAVE_X_MIN: f64 = -30.0;
pub const WAVE_X_MAX: f64 = 30.0;
pub const WAVE_DX: f64 = 0.01;
/// Tilt of the default voting rule.
pub const VOTING_GAMMA: f64 = 0.3;
pub const VOTING_PATHS: usize = 100_000;
pub const SEED: u64 = 0;
