//! Name-keyed registries of strategy objects.
//!
//! Nonlinearity families and equation kinds are both looked up here, so a
//! config file or CLI flag can pick a variant by name and new variants can be
//! registered without touching the callers.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use crate::error::{Error, Result};

pub type Builder<T> = Box<dyn Fn(&Value) -> Result<Arc<T>> + Send + Sync>;

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<String, Builder<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers (or replaces) a builder under `name`.
    pub fn register<F>(&mut self, name: &str, builder: F)
    where
        F: Fn(&Value) -> Result<Arc<T>> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Box::new(builder));
    }

    pub fn build(&self, name: &str, params: &Value) -> Result<Arc<T>> {
        match self.entries.get(name) {
            Some(b) => b(params),
            None => Err(Error::UnknownStrategy {
                kind: self.kind,
                name: name.to_string(),
                known: self.names().join(", "),
            }),
        }
    }

    pub fn names(&self) -> Vec<String> {
        self.entries.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }
}

/// Reads a required numeric parameter from a JSON object.
pub fn param_f64(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::Config(format!("missing numeric parameter '{key}'")))
}

/// Reads a required list of numbers from a JSON object.
pub fn param_vec(params: &Value, key: &str) -> Result<Vec<f64>> {
    let arr = params
        .get(key)
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config(format!("missing list parameter '{key}'")))?;
    arr.iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::Config(format!("non-numeric entry in '{key}'")))
        })
        .collect()
}
