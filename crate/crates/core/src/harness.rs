//! The experiment loop: dataset generation from behavior policies, the
//! methods x sizes x seeds sweep, CVaR aggregation, and CSV output.

use crate::bench::{behavior_policy, Benchmark, BenchError};
use crate::bounds::{zeta_bound, BoundsError};
use crate::format::{parse_rational, FormatError};
use crate::game::aval_cval_prune;
use crate::mdp::Mdp;
use crate::pmdp::ModelError;
use crate::pspibb::{label_classes, pspibb_policy_with, LabelClasses, PspibbError};
use crate::smt::{locate_solver, smt_prune, SmtError};
use crate::solve::{policy_evaluation, Policy, SolveError, SolveParams};
use crate::spibb::{count, mle_mdp, spibb_policy, uncertainty_set, Dataset, SpibbMode};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Smt(#[from] SmtError),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("bad experiment config: {0}")]
    Config(String),
    #[error("SMT pruning requested but no solver is available")]
    SolverMissing,
}

impl From<PspibbError> for HarnessError {
    fn from(e: PspibbError) -> Self {
        match e {
            PspibbError::Model(m) => HarnessError::Model(m),
            PspibbError::Solve(s) => HarnessError::Solve(s),
        }
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Algo {
    Spibb,
    Pspibb,
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algo::Spibb => write!(f, "spibb"),
            Algo::Pspibb => write!(f, "pspibb"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Pruning {
    None,
    Game,
    Smt,
}

impl fmt::Display for Pruning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pruning::None => write!(f, "none"),
            Pruning::Game => write!(f, "game"),
            Pruning::Smt => write!(f, "smt"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MethodSpec {
    pub algo: Algo,
    pub pruning: Pruning,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub env: String,
    pub methods: Vec<MethodSpec>,
    pub n_wedge: u64,
    pub delta: f64,
    pub sizes: Vec<usize>,
    pub n_seeds: u64,
    pub alpha: Option<f64>,
    pub gamma: Option<num_rational::BigRational>,
    pub master_seed: u64,
    /// Solver command for SMT pruning; discovered when absent.
    pub solver: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.methods.is_empty() {
            return Err(HarnessError::Config("no methods configured".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(
                "dataset sizes must be strictly increasing".into(),
            ));
        }
        if self.n_seeds == 0 {
            return Err(HarnessError::Config("need at least one seed".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(HarnessError::Config("delta must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Parses the line-oriented experiment config format (see the README).
pub fn parse_experiment_config(text: &str) -> Result<ExperimentConfig, FormatError> {
    let mut cfg = ExperimentConfig {
        env: String::new(),
        methods: Vec::new(),
        n_wedge: 200,
        delta: 0.05,
        sizes: Vec::new(),
        n_seeds: 1,
        alpha: None,
        gamma: None,
        master_seed: 0,
        solver: None,
    };
    let syntax = |line: usize, msg: String| FormatError::Syntax { line, msg };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let arg = |i: usize| -> Result<&str, FormatError> {
            parts
                .get(i)
                .copied()
                .ok_or_else(|| syntax(line_no, "missing argument".into()))
        };
        match parts[0] {
            "env" => cfg.env = arg(1)?.to_string(),
            "method" => {
                let algo = match arg(1)? {
                    "spibb" => Algo::Spibb,
                    "pspibb" => Algo::Pspibb,
                    other => return Err(syntax(line_no, format!("unknown algorithm `{other}`"))),
                };
                let pruning = match parts.get(2).copied().unwrap_or("none") {
                    "none" => Pruning::None,
                    "game" => Pruning::Game,
                    "smt" => Pruning::Smt,
                    other => return Err(syntax(line_no, format!("unknown pruning `{other}`"))),
                };
                cfg.methods.push(MethodSpec { algo, pruning });
            }
            "n_wedge" => {
                cfg.n_wedge = arg(1)?
                    .parse()
                    .map_err(|_| syntax(line_no, "bad n_wedge".into()))?;
            }
            "delta" => {
                cfg.delta = arg(1)?
                    .parse()
                    .map_err(|_| syntax(line_no, "bad delta".into()))?;
            }
            "sizes" => {
                cfg.sizes = parts[1..]
                    .iter()
                    .map(|p| p.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| syntax(line_no, "bad sizes".into()))?;
            }
            "seeds" => {
                cfg.n_seeds = arg(1)?
                    .parse()
                    .map_err(|_| syntax(line_no, "bad seed count".into()))?;
            }
            "alpha" => {
                cfg.alpha = Some(
                    arg(1)?
                        .parse()
                        .map_err(|_| syntax(line_no, "bad alpha".into()))?,
                );
            }
            "gamma" => {
                cfg.gamma =
                    Some(parse_rational(arg(1)?).map_err(|e| syntax(line_no, e))?);
            }
            "master_seed" => {
                cfg.master_seed = arg(1)?
                    .parse()
                    .map_err(|_| syntax(line_no, "bad master seed".into()))?;
            }
            "solver" => cfg.solver = Some(parts[1..].join(" ")),
            other => return Err(syntax(line_no, format!("unknown directive `{other}`"))),
        }
    }
    if cfg.env.is_empty() {
        return Err(FormatError::Syntax {
            line: 0,
            msg: "missing `env` line".into(),
        });
    }
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the per-seed random stream: the master seed and the seed index
/// feed a splitmix64 chain that fills the stream cipher key. Deterministic
/// and independent across indices by construction.
pub fn seed_stream(master_seed: u64, index: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

fn sample_categorical<R: Rng>(rng: &mut R, items: &[(usize, f64)]) -> usize {
    let total: f64 = items.iter().map(|(_, p)| p).sum();
    let mut u = rng.random_range(0.0..total);
    for &(x, p) in items {
        if u < p {
            return x;
        }
        u -= p;
    }
    items.last().expect("nonempty distribution").0
}

/// Episodic rollouts from the initial state under `pi`, restarting on
/// absorbing states or after `horizon` steps, truncated to exactly
/// `n_steps` triples. Deterministic given the rng state.
pub fn sample_dataset<R: Rng>(
    m: &Mdp,
    pi: &Policy,
    n_steps: usize,
    horizon: usize,
    rng: &mut R,
    env: &str,
    seed: u64,
) -> Dataset {
    let mut d = Dataset::empty(env, seed);
    let mut state = m.initial();
    let mut in_episode = 0usize;
    while d.triples.len() < n_steps {
        if m.is_absorbing(state) || in_episode >= horizon {
            state = m.initial();
            in_episode = 0;
            if *d.episode_starts.last().unwrap() != d.triples.len() {
                d.episode_starts.push(d.triples.len());
            }
            continue;
        }
        let row: Vec<(usize, f64)> = m
            .enabled(state)
            .iter()
            .map(|&a| (a, pi.prob(state, a)))
            .collect();
        let a = sample_categorical(rng, &row);
        let t = sample_categorical(rng, m.successors(state, a));
        d.triples.push((state, a, t));
        state = t;
        in_episode += 1;
    }
    d
}

/// Performance of a policy on the true model: its value at the initial
/// state.
pub fn evaluate_policy_true(m_true: &Mdp, pi: &Policy) -> Result<f64, SolveError> {
    Ok(policy_evaluation(m_true, pi, &SolveParams::default())?.v[m_true.initial()])
}

/// Mean of the worst `ceil(fraction * n)` values.
pub fn cvar(values: &[f64], fraction: f64) -> f64 {
    assert!(!values.is_empty(), "cvar of an empty sample");
    assert!(fraction > 0.0 && fraction <= 1.0, "fraction in (0, 1]");
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((fraction * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[..k].iter().sum::<f64>() / k as f64
}

// ---------------------------------------------------------------------------
// The experiment loop
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: MethodSpec,
    pub size: usize,
    pub mean: f64,
    pub cvar10: f64,
    pub cvar1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawPoint {
    pub method: MethodSpec,
    pub size: usize,
    pub seed: u64,
    pub performance: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub env: String,
    pub n_wedge: u64,
    pub baseline: f64,
    pub zeta: f64,
    pub curves: Vec<CurvePoint>,
    pub raw: Vec<RawPoint>,
    pub failures: Vec<(u64, String)>,
    /// Pairs removed per pruning mode actually used.
    pub pruned_pairs: BTreeMap<String, usize>,
}

struct PreparedMethod {
    spec: MethodSpec,
    pmdp: crate::pmdp::PMdp,
    skeleton: crate::spibb::Skeleton,
    classes: Option<LabelClasses>,
}

/// Runs the full sweep: one nested dataset per seed, every configured
/// method on every prefix size, evaluated on the true model; aggregation is
/// a deterministic reduce over seed-indexed results, so parallel execution
/// cannot change the output.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, HarnessError> {
    cfg.validate()?;
    let mut benchmark: Benchmark = crate::bench::build(&cfg.env)?;
    if let Some(g) = &cfg.gamma {
        benchmark = benchmark.with_gamma(g.clone())?;
    }
    let alpha = cfg.alpha.unwrap_or(benchmark.spec.alpha);
    let horizon = benchmark.spec.horizon;
    let true_mdp = benchmark.true_mdp();
    let pi_b = behavior_policy(&true_mdp, alpha)?;
    let baseline = evaluate_policy_true(&true_mdp, &pi_b)?;
    let v_max = true_mdp.r_max() / (1.0 - true_mdp.gamma());
    let zeta = zeta_bound(
        cfg.n_wedge,
        cfg.delta,
        v_max,
        true_mdp.gamma(),
        0.0,
        true_mdp.n_states(),
        true_mdp.n_actions(),
    )?;

    // Pruning is dataset-independent: apply once per mode.
    let mut pruned_pairs = BTreeMap::new();
    let mut pruned_models: BTreeMap<Pruning, crate::pmdp::PMdp> = BTreeMap::new();
    let mut prepared: Vec<PreparedMethod> = Vec::new();
    for &spec in &cfg.methods {
        let pmdp = match pruned_models.get(&spec.pruning) {
            Some(model) => model.clone(),
            None => {
                let model = match spec.pruning {
                    Pruning::None => benchmark.pmdp.clone(),
                    Pruning::Game => {
                        let (model, result) = aval_cval_prune(&benchmark.pmdp)?;
                        pruned_pairs.insert("game".to_string(), result.removed.len());
                        model
                    }
                    Pruning::Smt => {
                        let solver = cfg
                            .solver
                            .clone()
                            .or_else(locate_solver)
                            .ok_or(HarnessError::SolverMissing)?;
                        let (model, result) = smt_prune(
                            &benchmark.pmdp,
                            &solver,
                            std::time::Duration::from_secs(60),
                        )?;
                        pruned_pairs.insert("smt".to_string(), result.removed.len());
                        model
                    }
                };
                pruned_models.insert(spec.pruning, model.clone());
                model
            }
        };
        let skeleton = pmdp.skeleton();
        let classes = match spec.algo {
            Algo::Pspibb => Some(label_classes(&pmdp)?),
            Algo::Spibb => None,
        };
        prepared.push(PreparedMethod {
            spec,
            pmdp,
            skeleton,
            classes,
        });
    }

    let max_size = *cfg.sizes.last().unwrap();
    let run_seed = |seed: u64| -> Result<Vec<RawPoint>, String> {
        let mut rng = seed_stream(cfg.master_seed, seed);
        let mut dataset =
            sample_dataset(&true_mdp, &pi_b, max_size, horizon, &mut rng, &cfg.env, seed);
        dataset.behavior_id = format!("optimal-perturbed-{alpha}");
        let mut points = Vec::new();
        for &size in &cfg.sizes {
            let prefix = dataset.prefix(size);
            let counts = count(&prefix, true_mdp.n_states(), true_mdp.n_actions());
            for method in &prepared {
                let params = SolveParams::default();
                let pi = match (&method.spec.algo, &method.classes) {
                    (Algo::Spibb, _) => {
                        let mle = mle_mdp(&counts, &method.skeleton);
                        let u = uncertainty_set(&counts, cfg.n_wedge, &method.skeleton);
                        spibb_policy(
                            &method.skeleton,
                            &mle,
                            &pi_b,
                            &u,
                            SpibbMode::FixedPoint,
                            &params,
                        )
                        .map_err(|e| e.to_string())?
                    }
                    (Algo::Pspibb, Some(lc)) => pspibb_policy_with(
                        &method.pmdp,
                        lc,
                        &counts,
                        &pi_b,
                        cfg.n_wedge,
                        SpibbMode::FixedPoint,
                        &params,
                    )
                    .map_err(|e| e.to_string())?,
                    (Algo::Pspibb, None) => unreachable!("classes prepared for pspibb"),
                };
                let performance =
                    evaluate_policy_true(&true_mdp, &pi).map_err(|e| e.to_string())?;
                points.push(RawPoint {
                    method: method.spec,
                    size,
                    seed,
                    performance,
                });
            }
        }
        Ok(points)
    };

    let seed_results: Vec<Result<Vec<RawPoint>, String>> = run_seeds(cfg.n_seeds, run_seed);

    let mut raw = Vec::new();
    let mut failures = Vec::new();
    for (seed, res) in seed_results.into_iter().enumerate() {
        match res {
            Ok(points) => raw.extend(points),
            Err(msg) => failures.push((seed as u64, msg)),
        }
    }

    let mut curves = Vec::new();
    for method in &prepared {
        for &size in &cfg.sizes {
            let values: Vec<f64> = raw
                .iter()
                .filter(|p| p.method == method.spec && p.size == size)
                .map(|p| p.performance)
                .collect();
            if values.is_empty() {
                continue;
            }
            curves.push(CurvePoint {
                method: method.spec,
                size,
                mean: values.iter().sum::<f64>() / values.len() as f64,
                cvar10: cvar(&values, 0.1),
                cvar1: cvar(&values, 0.01),
            });
        }
    }
    curves.sort_by_key(|c| (c.method, c.size));
    raw.sort_by_key(|p| (p.method, p.size, p.seed));

    Ok(ExperimentOutcome {
        env: cfg.env.clone(),
        n_wedge: cfg.n_wedge,
        baseline,
        zeta,
        curves,
        raw,
        failures,
        pruned_pairs,
    })
}

#[cfg(feature = "parallel")]
fn run_seeds<F>(n_seeds: u64, run: F) -> Vec<Result<Vec<RawPoint>, String>>
where
    F: Fn(u64) -> Result<Vec<RawPoint>, String> + Sync + Send,
{
    use rayon::prelude::*;
    (0..n_seeds).into_par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_seeds<F>(n_seeds: u64, run: F) -> Vec<Result<Vec<RawPoint>, String>>
where
    F: Fn(u64) -> Result<Vec<RawPoint>, String>,
{
    (0..n_seeds).map(run).collect()
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

/// The aggregated curves: one row per (method, size), sorted.
pub fn emit_results_csv(out: &ExperimentOutcome) -> String {
    let mut s = String::from("env,method,pruning,n_wedge,size,mean,cvar10,cvar1,baseline\n");
    for c in &out.curves {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            out.env,
            c.method.algo,
            c.method.pruning,
            out.n_wedge,
            c.size,
            c.mean,
            c.cvar10,
            c.cvar1,
            out.baseline
        ));
    }
    s
}

/// Per-seed performances behind the curves.
pub fn emit_raw_csv(out: &ExperimentOutcome) -> String {
    let mut s = String::from("env,method,pruning,size,seed,performance,baseline\n");
    for p in &out.raw {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            out.env, p.method.algo, p.method.pruning, p.size, p.seed, p.performance, out.baseline
        ));
    }
    s
}

/// Parses `emit_results_csv` output back into curve points (round-trip
/// support for tests and downstream tooling).
pub fn parse_results_csv(text: &str) -> Result<Vec<(String, CurvePoint, f64)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(format!("row {i}: expected 9 fields, got {}", f.len()));
        }
        let algo = match f[1] {
            "spibb" => Algo::Spibb,
            "pspibb" => Algo::Pspibb,
            other => return Err(format!("row {i}: bad method `{other}`")),
        };
        let pruning = match f[2] {
            "none" => Pruning::None,
            "game" => Pruning::Game,
            "smt" => Pruning::Smt,
            other => return Err(format!("row {i}: bad pruning `{other}`")),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| format!("row {i}: {e}"));
        out.push((
            f[0].to_string(),
            CurvePoint {
                method: MethodSpec { algo, pruning },
                size: f[4].parse().map_err(|e| format!("row {i}: {e}"))?,
                mean: num(f[5])?,
                cvar10: num(f[6])?,
                cvar1: num(f[7])?,
            },
            num(f[8])?,
        ));
    }
    Ok(out)
}
