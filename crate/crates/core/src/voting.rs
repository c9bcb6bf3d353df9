//! Branching Brownian motion with voting genealogies. The probability that the
//! root votes 1 solves `u_t = u_xx + f(u)` with a polynomial `f` fixed by the
//! voting table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nonlinearity::{Model, Polynomial};

pub const DEFAULT_PARTICLE_CAP: usize = 1_000_000;
pub const MIN_PATHS: usize = 100;
/// Paths per reduction chunk; fixed so sums do not depend on the worker count.
const CHUNK: usize = 256;

/// Branching rate, child count and the table `mu[k] = P(parent votes 1 | k
/// children voted 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingRules {
    pub n: usize,
    pub mu: Vec<f64>,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

impl VotingRules {
    /// `μ_0 = 0`, `μ_n = 1`, `μ_k = (1 + γ)k/n` otherwise; needs `0 < γ ≤ 1/(n − 1)`.
    pub fn tilted(n: usize, gamma: f64, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                range: "n >= 2",
            });
        }
        if !(gamma > 0.0 && gamma <= 1.0 / (n - 1) as f64 * (1.0 + 1e-12)) {
            return Err(Error::OutOfRange {
                name: "gamma",
                value: gamma,
                range: "(0, 1/(n-1)]",
            });
        }
        let mu = (0..=n)
            .map(|k| match k {
                0 => 0.0,
                k if k == n => 1.0,
                k => ((1.0 + gamma) * k as f64 / n as f64).min(1.0),
            })
            .collect();
        let mut rules = Self::custom(mu, beta)?;
        rules.gamma = Some(gamma);
        Ok(rules)
    }

    /// Strict majority of `n` children (odd `n`).
    pub fn majority(n: usize, beta: f64) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::OutOfRange {
                name: "n",
                value: n as f64,
                range: "odd n >= 3",
            });
        }
        Self::custom(
            (0..=n).map(|k| if 2 * k > n { 1.0 } else { 0.0 }).collect(),
            beta,
        )
    }

    /// Arbitrary table; the child count is `mu.len() − 1`.
    pub fn custom(mu: Vec<f64>, beta: f64) -> Result<Self> {
        if mu.len() < 3 {
            return Err(Error::Config("vote table needs at least 3 entries".into()));
        }
        if let Some(bad) = mu.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::OutOfRange {
                name: "mu_k",
                value: *bad,
                range: "[0, 1]",
            });
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "beta",
                value: beta,
                range: "[0, inf)",
            });
        }
        Ok(Self {
            n: mu.len() - 1,
            mu,
            beta,
            gamma: None,
        })
    }

    /// Reaction-diffusion model `βγ(u − u^n)` for tilted rules.
    pub fn pde_model(&self) -> Result<Model> {
        let gamma = self
            .gamma
            .ok_or_else(|| Error::Config("only tilted rules map to a power model".into()))?;
        Model::power(self.n as u32, 0.0, (self.beta * gamma).sqrt())
    }
}

/// Node of a genealogical tree: position and time at the end of its segment
/// (a branching event, or the final time for leaves).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeNode {
    pub x: f64,
    pub time: f64,
    /// Index of the first of `n` consecutive children.
    pub children: Option<usize>,
}

/// Genealogy in breadth-first order: every child sits after its parent.
#[derive(Debug, Clone)]
pub struct Tree {
    pub n: usize,
    pub t: f64,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode> {
        self.nodes.iter().filter(|n| n.children.is_none())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }
}

pub fn simulate_tree<R: Rng + ?Sized>(
    rules: &VotingRules,
    t: f64,
    x: f64,
    rng: &mut R,
) -> Result<Tree> {
    simulate_tree_capped(rules, t, x, DEFAULT_PARTICLE_CAP, rng)
}

/// Exact in law: exponential clocks, Gaussian increments of variance `2s`.
pub fn simulate_tree_capped<R: Rng + ?Sized>(
    rules: &VotingRules,
    t: f64,
    x: f64,
    cap: usize,
    rng: &mut R,
) -> Result<Tree> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[0, inf)",
        });
    }
    let clock = (rules.beta > 0.0).then(|| Exp::new(rules.beta).expect("positive rate"));
    let mut nodes = Vec::new();
    // segment starts, in node order
    let mut starts = vec![(0.0f64, x)];
    let mut next = 0;
    let mut alive = 1usize;
    while next < starts.len() {
        let (s, x0) = starts[next];
        let end = match &clock {
            Some(c) => (s + rng.sample(c)).min(t),
            None => t,
        };
        let z: f64 = rng.sample(StandardNormal);
        let x1 = x0 + (2.0 * (end - s)).sqrt() * z;
        let children = if end < t {
            alive += rules.n - 1;
            if alive > cap {
                return Err(Error::ParticleCap { cap, t: end });
            }
            let first = starts.len();
            starts.extend(std::iter::repeat_n((end, x1), rules.n));
            Some(first)
        } else {
            None
        };
        nodes.push(TreeNode {
            x: x1,
            time: end,
            children,
        });
        next += 1;
    }
    Ok(Tree {
        n: rules.n,
        t,
        nodes,
    })
}

/// Samples leaf votes from `g` and parent votes from `mu`, returning the root
/// vote. One uniform per node, drawn in reverse node order, so runs with
/// different `g` on the same stream are coupled monotonically.
pub fn vote_propagate<R: Rng + ?Sized, G: Fn(f64) -> f64 + ?Sized>(
    tree: &Tree,
    g: &G,
    rules: &VotingRules,
    rng: &mut R,
) -> bool {
    sampled_vote(tree, g, 0.0, rules, rng)
}

fn sampled_vote<R: Rng + ?Sized, G: Fn(f64) -> f64 + ?Sized>(
    tree: &Tree,
    g: &G,
    shift: f64,
    rules: &VotingRules,
    rng: &mut R,
) -> bool {
    let mut votes = vec![false; tree.nodes.len()];
    for i in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[i];
        let p = match node.children {
            None => g(node.x + shift),
            Some(c) => rules.mu[votes[c..c + tree.n].iter().filter(|v| **v).count()],
        };
        let uniform: f64 = rng.random();
        votes[i] = uniform < p;
    }
    votes[0]
}

/// `P(root votes 1 | tree)`: leaves vote independently, so each parent sees a
/// Poisson-binomial count of ones.
pub fn conditional_vote_probability<G: Fn(f64) -> f64 + ?Sized>(
    tree: &Tree,
    g: &G,
    rules: &VotingRules,
) -> f64 {
    conditional_vote(tree, g, 0.0, rules)
}

fn conditional_vote<G: Fn(f64) -> f64 + ?Sized>(
    tree: &Tree,
    g: &G,
    shift: f64,
    rules: &VotingRules,
) -> f64 {
    let n = tree.n;
    let mut p = vec![0.0; tree.nodes.len()];
    let mut dist = vec![0.0; n + 1];
    for i in (0..tree.nodes.len()).rev() {
        let node = &tree.nodes[i];
        p[i] = match node.children {
            None => g(node.x + shift).clamp(0.0, 1.0),
            Some(c) => {
                dist.iter_mut().for_each(|d| *d = 0.0);
                dist[0] = 1.0;
                for (j, q) in p[c..c + n].iter().enumerate() {
                    for k in (0..=j + 1).rev() {
                        let stay = dist[k] * (1.0 - q);
                        let up = if k > 0 { dist[k - 1] * q } else { 0.0 };
                        dist[k] = stay + up;
                    }
                }
                dist.iter().zip(&rules.mu).map(|(d, m)| d * m).sum()
            }
        };
    }
    p[0]
}

/// Per-path quantity averaged by [`estimate_u`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// `P(root = 1 | tree)`; same mean, smaller variance.
    #[default]
    Conditional,
    /// The sampled root vote itself.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteEstimate {
    pub t: f64,
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub n_paths: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

/// RNG for path `i`: ChaCha stream `i` under key `seed`.
pub fn path_rng(seed: u64, i: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

/// Monte Carlo estimate of `u(t, x) = P_x(root votes 1)` at every probe. Each
/// path draws one tree from the origin and evaluates it at all probes by
/// translation, so probe estimates share random numbers.
pub fn estimate_u<G: Fn(f64) -> f64 + Sync + ?Sized>(
    rules: &VotingRules,
    g: &G,
    t: f64,
    xs: &[f64],
    n_paths: usize,
    seed: u64,
    estimator: Estimator,
) -> Result<VoteEstimate> {
    if n_paths < MIN_PATHS {
        return Err(Error::OutOfRange {
            name: "n_paths",
            value: n_paths as f64,
            range: ">= 100",
        });
    }
    let m = xs.len();
    let chunks: Vec<Result<Vec<Moments>>> = (0..n_paths.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); m];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_paths) {
                let mut rng = path_rng(seed, i as u64);
                let tree = simulate_tree(rules, t, 0.0, &mut rng)?;
                for (a, x) in acc.iter_mut().zip(xs) {
                    let v = match estimator {
                        Estimator::Conditional => conditional_vote(&tree, g, *x, rules),
                        Estimator::Sampled => {
                            let mut vr = path_rng(seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
                            f64::from(u8::from(sampled_vote(&tree, g, *x, rules, &mut vr)))
                        }
                    };
                    a.push(v);
                }
            }
            Ok(acc)
        })
        .collect();
    let mut total = vec![Moments::default(); m];
    for chunk in chunks {
        for (s, a) in total.iter_mut().zip(chunk?) {
            s.merge(&a);
        }
    }
    let np = n_paths as f64;
    let (mean, se) = total
        .iter()
        .map(|s| {
            let var = s.m2 / (np - 1.0);
            (s.mean.clamp(0.0, 1.0), (var / np).sqrt())
        })
        .unzip();
    Ok(VoteEstimate {
        t,
        xs: xs.to_vec(),
        mean,
        se,
        n_paths,
        seed,
        estimator,
    })
}

/// Running mean and centered second moment; constant samples stay exact.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let d = v - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v - self.mean);
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n / n;
        self.m2 += o.m2 + d * d * self.n * o.n / n;
        self.n = n;
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// Polynomial induced by a vote table, with its monostability verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingNonlinearity {
    pub f: Polynomial,
    /// `f(0) = f(1) = 0` and `f > 0` on `(0, 1)`.
    pub monostable: bool,
}

/// `f(u) = β(Σ_k C(N, k) μ_k u^k (1 − u)^{N−k} − u)` with `N` children.
pub fn voting_nonlinearity(rules: &VotingRules) -> VotingNonlinearity {
    let n = rules.n;
    let u = Polynomial::new(vec![0.0, 1.0]);
    let one_minus = Polynomial::new(vec![1.0, -1.0]);
    let mut f = u.scale(-1.0);
    for (k, mu) in rules.mu.iter().enumerate() {
        if *mu != 0.0 {
            let term = u.pow(k).mul(&one_minus.pow(n - k));
            f = f.add(&term.scale(binomial(n, k) * mu));
        }
    }
    let f = f.scale(rules.beta);
    VotingNonlinearity {
        monostable: is_monostable(&f),
        f,
    }
}

/// McKean form `γ(1 − u − Σ p_k (1 − u)^k)`; `p[k]` is the chance of `k`
/// offspring and must vanish for `k < 2`.
pub fn mckean_nonlinearity(gamma: f64, p: &[f64]) -> Result<Polynomial> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::OutOfRange {
            name: "gamma",
            value: gamma,
            range: "(0, inf)",
        });
    }
    if p.iter().any(|q| !(*q >= 0.0)) || p.iter().take(2).any(|q| *q != 0.0) {
        return Err(Error::Config(
            "offspring law must be nonnegative and supported on k >= 2".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::OutOfRange {
            name: "sum of offspring probabilities",
            value: total,
            range: "exactly 1",
        });
    }
    let one_minus = Polynomial::new(vec![1.0, -1.0]);
    let mut f = one_minus.clone();
    for (k, q) in p.iter().enumerate() {
        if *q != 0.0 {
            f = f.add(&one_minus.pow(k).scale(-q));
        }
    }
    Ok(f.scale(gamma))
}

fn is_monostable(f: &Polynomial) -> bool {
    let scale = f.coeffs.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
    let tol = 1e-12 * scale;
    if f.eval(0.0).abs() > tol || f.eval(1.0).abs() > tol {
        return false;
    }
    (1..1000).all(|i| f.eval(i as f64 / 1000.0) > 0.0)
}

/// Both sides of `γ(u − u^n) = Σ_{k<n} C(n, k)((1 + γ)k/n) u^k (1 − u)^{n−k} + u^n − u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub difference: f64,
}

pub fn identity_check(n: usize, gamma: f64, u: f64) -> Result<IdentityCheck> {
    VotingRules::tilted(n, gamma, 1.0)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::OutOfRange {
            name: "u",
            value: u,
            range: "[0, 1]",
        });
    }
    let lhs = gamma * (u - u.powi(n as i32));
    let sum: f64 = (0..n)
        .map(|k| {
            binomial(n, k)
                * ((1.0 + gamma) * k as f64 / n as f64)
                * u.powi(k as i32)
                * (1.0 - u).powi((n - k) as i32)
        })
        .sum();
    let rhs = sum + u.powi(n as i32) - u;
    Ok(IdentityCheck {
        lhs,
        rhs,
        difference: (lhs - rhs).abs(),
    })
}
