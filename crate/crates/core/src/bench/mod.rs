//! The five benchmark environments and their perturbed behavior policies.
//!
//! The published sources give the environment dimensions but not the exact
//! layouts or the parameterizations, so each builder documents its
//! construction in `BenchmarkSpec::notes` and the build fails loudly when
//! the realized dimensions drift from the published ones.

mod gridworld;
mod pacman;
mod resource;
mod rps;
mod taxi;

pub use gridworld::{build_gridworld, build_gridworld_sized};
pub use pacman::build_pacman;
pub use resource::build_resource_gathering;
pub use rps::build_rps;
pub use taxi::build_taxi;

use crate::mdp::Mdp;
use crate::pmdp::PMdp;
use crate::poly::Valuation;
use crate::solve::{policy_iteration, Policy, SolveError, SolveParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown benchmark `{0}` (known: gridworld, resource-gathering, taxi, pacman, rps)")]
    Unknown(String),
    #[error(
        "benchmark `{name}` built ({states}, {actions}, {params}) but the published \
         dimensions are ({exp_states}, {exp_actions}, {exp_params})"
    )]
    DimensionMismatch {
        name: String,
        states: usize,
        actions: usize,
        params: usize,
        exp_states: usize,
        exp_actions: usize,
        exp_params: usize,
    },
    #[error("behavior policy construction failed: {0}")]
    Solve(#[from] SolveError),
    #[error("invalid gamma override: {0}")]
    BadGamma(String),
}

/// Construction record of a benchmark: published dimensions, perturbation,
/// the canonical "true" valuation, and the builder's documentation.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub name: String,
    pub expected_states: usize,
    pub expected_actions: usize,
    pub expected_params: usize,
    pub alpha: f64,
    pub horizon: usize,
    pub valuation: Valuation,
    pub notes: String,
}

impl BenchmarkSpec {
    /// Human-readable report used by the CLI.
    pub fn report(&self, m: &PMdp) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(out, "benchmark {}", self.name);
        let _ = writeln!(
            out,
            "dimensions |S|={} |A|={} |X|={} (published {} {} {})",
            m.n_states(),
            m.n_actions(),
            m.n_params(),
            self.expected_states,
            self.expected_actions,
            self.expected_params
        );
        let _ = writeln!(out, "alpha {}", self.alpha);
        let _ = writeln!(out, "gamma {}", m.gamma());
        let _ = writeln!(out, "rmax {}", m.r_max());
        let _ = writeln!(out, "horizon {}", self.horizon);
        for (p, v) in self.valuation.iter() {
            let _ = writeln!(out, "val {p} {v}");
        }
        for line in self.notes.lines() {
            let _ = writeln!(out, "note {line}");
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub pmdp: PMdp,
    pub spec: BenchmarkSpec,
}

impl Benchmark {
    /// The concrete environment at the canonical valuation.
    pub fn true_mdp(&self) -> Mdp {
        self.pmdp
            .instantiate(&self.spec.valuation, 1e-9)
            .expect("canonical valuation is graph-preserving")
    }

    /// Re-discounts the benchmark. The rock-paper-scissors rewards encode
    /// the score potential (1-gamma)/gamma and are rescaled along.
    pub fn with_gamma(mut self, gamma: num_rational::BigRational) -> Result<Benchmark, BenchError> {
        use num_traits::One;
        if self.spec.name == "rps" {
            let one = num_rational::BigRational::one();
            let old = self.pmdp.gamma().clone();
            let factor = ((&one - &gamma) / &gamma) / ((&one - &old) / &old);
            self.pmdp = self.pmdp.scale_rewards(&factor);
        }
        let gamma_str = gamma.to_string();
        self.pmdp = self
            .pmdp
            .with_gamma(gamma)
            .map_err(|_| BenchError::BadGamma(gamma_str))?;
        Ok(self)
    }
}

pub const NAMES: [&str; 5] = ["gridworld", "resource-gathering", "taxi", "pacman", "rps"];

/// Builds a benchmark by name.
pub fn build(name: &str) -> Result<Benchmark, BenchError> {
    match name {
        "gridworld" => build_gridworld(),
        "resource-gathering" => build_resource_gathering(),
        "taxi" => build_taxi(),
        "pacman" => build_pacman(),
        "rps" => build_rps(),
        other => Err(BenchError::Unknown(other.to_string())),
    }
}

pub(crate) fn check_dims(b: Benchmark) -> Result<Benchmark, BenchError> {
    let (s, a, p) = (
        b.pmdp.n_states(),
        b.pmdp.n_actions(),
        b.pmdp.n_params(),
    );
    if s != b.spec.expected_states
        || a != b.spec.expected_actions
        || p != b.spec.expected_params
    {
        return Err(BenchError::DimensionMismatch {
            name: b.spec.name,
            states: s,
            actions: a,
            params: p,
            exp_states: b.spec.expected_states,
            exp_actions: b.spec.expected_actions,
            exp_params: b.spec.expected_params,
        });
    }
    Ok(b)
}

/// Behavior policy: an optimal deterministic policy made stochastic by
/// moving mass `alpha` from the optimal action and spreading it uniformly
/// over the other enabled actions. States with a single enabled action keep
/// all their mass there.
pub fn behavior_policy(m: &Mdp, alpha: f64) -> Result<Policy, SolveError> {
    assert!((0.0..1.0).contains(&alpha), "alpha must lie in [0, 1)");
    let (optimal, _) = policy_iteration(m, &SolveParams::default())?;
    let mut pi = Policy::zeroed(m.n_states(), m.n_actions());
    for s in 0..m.n_states() {
        let acts = m.enabled(s);
        if acts.is_empty() {
            continue;
        }
        if acts.len() == 1 {
            pi.set(s, acts[0], 1.0);
            continue;
        }
        let star = optimal.chosen(s).expect("deterministic optimal policy");
        let rest = alpha / (acts.len() - 1) as f64;
        for &a in acts {
            pi.set(s, a, if a == star { 1.0 - alpha } else { rest });
        }
    }
    Ok(pi)
}

/// Shared grid helper: the cell reached by moving one step in `dir`
/// (0 up, 1 down, 2 left, 3 right), or the cell itself at a border or
/// against a blocked cell.
pub(crate) fn grid_step(
    rows: usize,
    cols: usize,
    blocked: &dyn Fn(usize, usize) -> bool,
    r: usize,
    c: usize,
    dir: usize,
) -> (usize, usize) {
    let (nr, nc) = match dir {
        0 if r > 0 => (r - 1, c),
        1 if r + 1 < rows => (r + 1, c),
        2 if c > 0 => (r, c - 1),
        3 if c + 1 < cols => (r, c + 1),
        _ => (r, c),
    };
    if blocked(nr, nc) {
        (r, c)
    } else {
        (nr, nc)
    }
}
