//! Numerical toolkit for monostable fronts `u_t = u_xx + f(u)` with
//! `f = λ²(u − A)(1 + χA')`, the associated reactive conservation law, and the
//! branching-Brownian voting models whose root votes solve such equations.

pub mod diagnostics;
pub mod error;
pub mod front;
pub mod nonlinearity;
pub mod numerics;
pub mod registry;
pub mod solver;
pub mod voting;
pub mod wave;

pub use error::{Error, Result};
pub use nonlinearity::{Model, ModelSpec, Regime};
