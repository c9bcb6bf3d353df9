//! Monostable nonlinearities of the form `f(u) = λ²(u − A(u))(1 + χA'(u))`.
//!
//! The shape function `A` is a strategy object ([`ShapeFunction`]) picked from
//! a [`Registry`] by family name; the model couples it with the scalars `χ`
//! and `λ` and derives everything else (`α = A/u`, `ζ = u − A`, `f`, `f'`).

use std::fmt;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result, Violation};
use crate::numerics::bisect;
use crate::registry::{param_f64, param_vec, Registry};
use crate::wave::WaveProfile;

/// The convex shape function `A` with `A(0)=0`, `A(1)=1`, `A'(0)=0`.
pub trait ShapeFunction: Send + Sync + fmt::Debug {
    /// Registry name of the family this instance belongs to.
    fn family(&self) -> &str;
    fn value(&self, u: f64) -> f64;
    fn d1(&self, u: f64) -> f64;
    fn d2(&self, u: f64) -> f64;
    /// Family parameters as they appear in a model spec.
    fn params(&self) -> Map<String, Value>;

    /// Batch evaluation of `A` and `A'`; families override this for speed.
    fn eval_into(&self, u: &[f64], a: &mut [f64], da: &mut [f64]) {
        for ((ui, ai), di) in u.iter().zip(a.iter_mut()).zip(da.iter_mut()) {
            *ai = self.value(*ui);
            *di = self.d1(*ui);
        }
    }
}

/// `A(u) = u^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power {
    pub n: u32,
}

impl Power {
    pub fn new(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                range: "n >= 2",
            });
        }
        Ok(Self { n })
    }
}

impl ShapeFunction for Power {
    fn family(&self) -> &str {
        "power"
    }
    fn value(&self, u: f64) -> f64 {
        u.powi(self.n as i32)
    }
    fn d1(&self, u: f64) -> f64 {
        self.n as f64 * u.powi(self.n as i32 - 1)
    }
    fn d2(&self, u: f64) -> f64 {
        let n = self.n as f64;
        n * (n - 1.0) * u.powi(self.n as i32 - 2)
    }
    fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("n".into(), json!(self.n));
        m
    }
    fn eval_into(&self, u: &[f64], a: &mut [f64], da: &mut [f64]) {
        match self.n {
            2 => {
                for ((ui, ai), di) in u.iter().zip(a.iter_mut()).zip(da.iter_mut()) {
                    *ai = ui * ui;
                    *di = 2.0 * ui;
                }
            }
            3 => {
                for ((ui, ai), di) in u.iter().zip(a.iter_mut()).zip(da.iter_mut()) {
                    let sq = ui * ui;
                    *ai = sq * ui;
                    *di = 3.0 * sq;
                }
            }
            n => {
                let nf = n as f64;
                for ((ui, ai), di) in u.iter().zip(a.iter_mut()).zip(da.iter_mut()) {
                    let p = ui.powi(n as i32 - 1);
                    *ai = p * ui;
                    *di = nf * p;
                }
            }
        }
    }
}

/// Dense polynomial with ascending coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    pub coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Polynomial {
        if self.coeffs.len() <= 1 {
            return Polynomial::new(vec![0.0]);
        }
        Polynomial::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Polynomial, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        Polynomial::new((0..n).map(|k| get(self, k) + get(other, k)).collect())
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn pow(&self, k: usize) -> Polynomial {
        (0..k).fold(Polynomial::new(vec![1.0]), |acc, _| acc.mul(self))
    }
}

/// Polynomial shape function; backs both the `voting` family (a probability
/// mixture of powers) and free-form `custom-poly`.
#[derive(Debug, Clone)]
pub struct PolyShape {
    family: &'static str,
    poly: Polynomial,
    d1: Polynomial,
    d2: Polynomial,
}

impl PolyShape {
    pub fn custom(coeffs: Vec<f64>) -> Self {
        Self::build("custom-poly", Polynomial::new(coeffs))
    }

    /// `A(u) = Σ weights[k] u^k` with nonnegative weights summing to one.
    pub fn voting(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Config("voting weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange {
                name: "sum of voting weights",
                value: total,
                range: "exactly 1",
            });
        }
        if weights.iter().take(2).any(|w| *w != 0.0) {
            return Err(Error::Config(
                "voting weights on u^0 and u^1 must vanish".into(),
            ));
        }
        Ok(Self::build("voting", Polynomial::new(weights)))
    }

    fn build(family: &'static str, poly: Polynomial) -> Self {
        let d1 = poly.derivative();
        let d2 = d1.derivative();
        Self {
            family,
            poly,
            d1,
            d2,
        }
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.poly
    }
}

impl ShapeFunction for PolyShape {
    fn family(&self) -> &str {
        self.family
    }
    fn value(&self, u: f64) -> f64 {
        self.poly.eval(u)
    }
    fn d1(&self, u: f64) -> f64 {
        self.d1.eval(u)
    }
    fn d2(&self, u: f64) -> f64 {
        self.d2.eval(u)
    }
    fn params(&self) -> Map<String, Value> {
        let key = if self.family == "voting" {
            "weights"
        } else {
            "coeffs"
        };
        let mut m = Map::new();
        m.insert(key.into(), json!(self.poly.coeffs));
        m
    }
}

/// Shape function known only on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TabulatedShape {
    values: Vec<f64>,
    slopes: Vec<f64>,
    curvature: Vec<f64>,
}

impl TabulatedShape {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 5 {
            return Err(Error::Config(
                "tabulated shape needs at least 5 nodes".into(),
            ));
        }
        let h = 1.0 / (n - 1) as f64;
        let mut slopes = vec![0.0; n];
        let mut curvature = vec![0.0; n];
        for i in 1..n - 1 {
            slopes[i] = (values[i + 1] - values[i - 1]) / (2.0 * h);
            curvature[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (h * h);
        }
        slopes[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
        slopes[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
        curvature[0] = curvature[1];
        curvature[n - 1] = curvature[n - 2];
        Ok(Self {
            values,
            slopes,
            curvature,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn lerp(&self, table: &[f64], u: f64) -> f64 {
        let n = table.len();
        let x = u.clamp(0.0, 1.0) * (n - 1) as f64;
        let i = (x.floor() as usize).min(n - 2);
        let s = x - i as f64;
        table[i] * (1.0 - s) + table[i + 1] * s
    }
}

impl ShapeFunction for TabulatedShape {
    fn family(&self) -> &str {
        "tabulated"
    }
    fn value(&self, u: f64) -> f64 {
        self.lerp(&self.values, u)
    }
    fn d1(&self, u: f64) -> f64 {
        self.lerp(&self.slopes, u)
    }
    fn d2(&self, u: f64) -> f64 {
        self.lerp(&self.curvature, u)
    }
    fn params(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("values".into(), json!(self.values));
        m
    }
}

pub type ShapeRegistry = Registry<dyn ShapeFunction>;

/// Registry with the built-in families `power`, `voting` and `custom-poly`.
pub fn default_shape_registry() -> ShapeRegistry {
    let mut r = ShapeRegistry::new("nonlinearity family");
    r.register("power", |p| {
        let n = param_f64(p, "n")?;
        if n.fract() != 0.0 || n < 0.0 {
            return Err(Error::Config(format!(
                "power exponent must be an integer, got {n}"
            )));
        }
        Ok(Arc::new(Power::new(n as u32)?) as Arc<dyn ShapeFunction>)
    });
    r.register("voting", |p| {
        Ok(Arc::new(PolyShape::voting(param_vec(p, "weights")?)?) as Arc<dyn ShapeFunction>)
    });
    r.register("custom-poly", |p| {
        Ok(Arc::new(PolyShape::custom(param_vec(p, "coeffs")?)) as Arc<dyn ShapeFunction>)
    });
    r
}

fn shared_registry() -> &'static ShapeRegistry {
    static REG: OnceLock<ShapeRegistry> = OnceLock::new();
    REG.get_or_init(default_shape_registry)
}

/// Serializable description of a model: family name, family parameters, `χ`, `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
    pub chi: f64,
    #[serde(default = "one")]
    pub lambda: f64,
}

fn one() -> f64 {
    1.0
}

/// Front regime of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Fkpp,
    SemiFkpp,
    PushmiPullyu,
    Pushed,
}

impl Regime {
    pub fn is_pulled(self) -> bool {
        matches!(self, Regime::Fkpp | Regime::SemiFkpp)
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Fkpp => "fkpp",
            Regime::SemiFkpp => "semi-fkpp",
            Regime::PushmiPullyu => "pushmi-pullyu",
            Regime::Pushed => "pushed",
        };
        f.write_str(s)
    }
}

/// Width of the band around `χ = 1` treated as the pushmi-pullyu boundary.
pub const PUSHMI_PULLYU_BAND: f64 = 1e-12;

#[derive(Clone)]
pub struct Model {
    shape: Arc<dyn ShapeFunction>,
    pub chi: f64,
    pub lambda: f64,
}

impl fmt::Debug for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("shape", &self.shape)
            .field("chi", &self.chi)
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl Model {
    pub fn new(shape: Arc<dyn ShapeFunction>, chi: f64, lambda: f64) -> Result<Self> {
        if !(chi >= 0.0 && chi.is_finite()) {
            return Err(Error::OutOfRange {
                name: "chi",
                value: chi,
                range: "[0, inf)",
            });
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::OutOfRange {
                name: "lambda",
                value: lambda,
                range: "(0, inf)",
            });
        }
        Ok(Self { shape, chi, lambda })
    }

    /// `A(u) = u^n`.
    pub fn power(n: u32, chi: f64, lambda: f64) -> Result<Self> {
        Self::new(Arc::new(Power::new(n)?), chi, lambda)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        Self::from_spec_with(shared_registry(), spec)
    }

    pub fn from_spec_with(registry: &ShapeRegistry, spec: &ModelSpec) -> Result<Self> {
        let shape = registry.build(&spec.family, &Value::Object(spec.params.clone()))?;
        Self::new(shape, spec.chi, spec.lambda)
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            family: self.shape.family().to_string(),
            params: self.shape.params(),
            chi: self.chi,
            lambda: self.lambda,
        }
    }

    pub fn shape(&self) -> &Arc<dyn ShapeFunction> {
        &self.shape
    }

    pub fn with_chi(&self, chi: f64) -> Result<Self> {
        Self::new(self.shape.clone(), chi, self.lambda)
    }

    #[inline]
    pub fn a(&self, u: f64) -> f64 {
        self.shape.value(u)
    }
    #[inline]
    pub fn da(&self, u: f64) -> f64 {
        self.shape.d1(u)
    }
    #[inline]
    pub fn d2a(&self, u: f64) -> f64 {
        self.shape.d2(u)
    }

    /// `α(u) = A(u)/u`, extended by `α(0) = 0`.
    #[inline]
    pub fn alpha(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            self.a(u) / u
        }
    }

    /// `α'(u)`, with `α'(0) = A''(0)/2`.
    pub fn dalpha(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.5 * self.d2a(0.0)
        } else {
            (self.da(u) * u - self.a(u)) / (u * u)
        }
    }

    /// Inverse of the increasing map `α` on `[0, 1]`.
    pub fn alpha_inverse(&self, level: f64) -> f64 {
        if level <= 0.0 {
            return 0.0;
        }
        if level >= 1.0 {
            return 1.0;
        }
        bisect(|u| self.alpha(u) - level, 0.0, 1.0, 1e-15)
    }

    /// `ζ(u) = u − A(u)`.
    #[inline]
    pub fn zeta(&self, u: f64) -> f64 {
        u - self.a(u)
    }

    /// `f(u) = λ²(u − A)(1 + χA')`, unchecked.
    #[inline]
    pub fn f(&self, u: f64) -> f64 {
        self.lambda * self.lambda * (u - self.a(u)) * (1.0 + self.chi * self.da(u))
    }

    /// `f(u)/u`, accurate for tiny `u`.
    #[inline]
    pub fn f_over_u(&self, u: f64) -> f64 {
        self.lambda * self.lambda * (1.0 - self.alpha(u)) * (1.0 + self.chi * self.da(u))
    }

    pub fn df(&self, u: f64) -> f64 {
        let da = self.da(u);
        self.lambda
            * self.lambda
            * ((1.0 - da) * (1.0 + self.chi * da) + self.chi * (u - self.a(u)) * self.d2a(u))
    }

    /// `f(u)` with the domain checked.
    pub fn evaluate_f(&self, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::OutOfRange {
                name: "u",
                value: u,
                range: "[0, 1]",
            });
        }
        Ok(self.f(u))
    }

    /// Checks the structural hypotheses on a uniform grid of `grid_points`
    /// (at least 64) nodes.
    pub fn validate(&self, grid_points: usize) -> Result<()> {
        let n = grid_points.max(64);
        let h = 1.0 / (n - 1) as f64;
        let grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
        let mut v = Vec::new();
        let first = |cond: &str, u: f64, v: &mut Vec<Violation>| {
            if !v.iter().any(|x: &Violation| x.condition == cond) {
                v.push(Violation {
                    condition: cond.to_string(),
                    u,
                });
            }
        };
        if self.a(0.0).abs() > 1e-10 {
            first("A(0) = 0", 0.0, &mut v);
        }
        if (self.a(1.0) - 1.0).abs() > 1e-10 {
            first("A(1) = 1", 1.0, &mut v);
        }
        if self.da(0.0).abs() > 1e-10 {
            first("A'(0) = 0", 0.0, &mut v);
        }
        let alpha: Vec<f64> = grid.iter().map(|&u| self.alpha(u)).collect();
        for (i, &u) in grid.iter().enumerate() {
            if self.da(u) < -1e-8 {
                first("A nondecreasing", u, &mut v);
            }
            if self.d2a(u) < -1e-8 {
                first("A convex", u, &mut v);
            }
            if i > 0 && alpha[i] - alpha[i - 1] < -1e-8 {
                first("alpha increasing", u, &mut v);
            }
            if i > 0 && i + 1 < n && alpha[i + 1] - 2.0 * alpha[i] + alpha[i - 1] < -1e-8 {
                first("alpha convex", u, &mut v);
            }
            if i > 0 && i + 1 < n && self.f(u) <= 0.0 {
                first("f > 0 on (0, 1)", u, &mut v);
            }
        }
        if self.df(0.0) <= 0.0 {
            first("f'(0) > 0", 0.0, &mut v);
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNonlinearity(v))
        }
    }

    /// Largest `χ` for which `f` satisfies the FKPP bound `f(u) <= f'(0) u`:
    /// the infimum of `A / (A'(u − A))` over `(0, 1)`.
    pub fn chi_fkpp(&self) -> f64 {
        chi_fkpp_of(self.shape.as_ref())
    }

    pub fn regime(&self) -> Regime {
        if self.chi <= self.chi_fkpp() {
            Regime::Fkpp
        } else if (self.chi - 1.0).abs() <= PUSHMI_PULLYU_BAND {
            Regime::PushmiPullyu
        } else if self.chi < 1.0 {
            Regime::SemiFkpp
        } else {
            Regime::Pushed
        }
    }

    /// Minimal speed predicted from `χ`: `2λ` up to `χ = 1`, else `λ(χ^{-1/2} + χ^{1/2})`.
    pub fn predicted_speed(&self) -> f64 {
        if self.chi <= 1.0 + PUSHMI_PULLYU_BAND {
            2.0 * self.lambda
        } else {
            self.lambda * (1.0 / self.chi.sqrt() + self.chi.sqrt())
        }
    }
}

fn fkpp_ratio(shape: &dyn ShapeFunction, u: f64) -> Option<f64> {
    let a = shape.value(u);
    let den = shape.d1(u) * (u - a);
    if den > 0.0 && a > 0.0 {
        Some(a / den)
    } else {
        None
    }
}

fn chi_fkpp_of(shape: &dyn ShapeFunction) -> f64 {
    // limit at u -> 0
    let edge = if shape.d2(0.0) > 1e-14 {
        0.5
    } else {
        let r: Vec<f64> = (0..3)
            .filter_map(|k| fkpp_ratio(shape, 1e-3 * 0.25f64.powi(k)))
            .collect();
        if r.len() == 3 {
            let den = r[2] - 2.0 * r[1] + r[0];
            if den.abs() > 1e-300 {
                r[0] - (r[1] - r[0]).powi(2) / den
            } else {
                r[2]
            }
        } else {
            f64::INFINITY
        }
    };
    let mut grid: Vec<f64> = (0..=60)
        .map(|k| 1e-6 * 10f64.powf(k as f64 / 15.0))
        .collect();
    let m = 4000;
    grid.extend((0..m).map(|i| (i as f64 + 0.5) / m as f64));
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let vals: Vec<Option<f64>> = grid.iter().map(|&u| fkpp_ratio(shape, u)).collect();
    let mut best = f64::INFINITY;
    let mut best_i = None;
    for (i, v) in vals.iter().enumerate() {
        if let Some(r) = v {
            if *r < best {
                best = *r;
                best_i = Some(i);
            }
        }
    }
    if let Some(i) = best_i {
        if i > 0 && i + 1 < grid.len() {
            let (mut lo, mut hi) = (grid[i - 1], grid[i + 1]);
            let g = |u: f64| fkpp_ratio(shape, u).unwrap_or(f64::INFINITY);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..100 {
                let a = hi - phi * (hi - lo);
                let b = lo + phi * (hi - lo);
                if g(a) < g(b) {
                    hi = b;
                } else {
                    lo = a;
                }
            }
            best = best.min(g(0.5 * (lo + hi)));
        }
    }
    edge.min(best)
}

/// Result of [`recover_decomposition`].
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub chi: f64,
    pub shape: TabulatedShape,
    /// Grid points where the recovered `A` fails to be convex.
    pub convexity_violations: Vec<f64>,
}

/// Reconstructs `(χ, A)` from a pushed minimal profile `η_*` and its speed:
/// `√χ` is the larger root of `s² − (c/λ)s + 1 = 0` and `A = u − η/(λ√χ)`.
pub fn recover_decomposition(profile: &WaveProfile, c: f64, lambda: f64) -> Result<Decomposition> {
    let ratio = c / lambda;
    if ratio <= 2.0 {
        return Err(Error::OutOfRange {
            name: "c/lambda",
            value: ratio,
            range: "(2, inf) (pushed speeds only)",
        });
    }
    let s = 0.5 * (ratio + (ratio * ratio - 4.0).sqrt());
    let values: Vec<f64> = profile
        .u
        .iter()
        .zip(&profile.eta)
        .map(|(u, eta)| u - eta / (lambda * s))
        .collect();
    let mut violations = Vec::new();
    for i in 1..values.len() - 1 {
        if values[i + 1] - 2.0 * values[i] + values[i - 1] < -1e-8 {
            violations.push(profile.u[i]);
        }
    }
    Ok(Decomposition {
        chi: s * s,
        shape: TabulatedShape::new(values)?,
        convexity_violations: violations,
    })
}
