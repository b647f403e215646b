//! Command-line front end: solving, policy improvement, pruning, SMT
//! export, benchmark construction, and the experiment harness.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use pspibb_core::bench;
use pspibb_core::bounds::zeta_bound;
use pspibb_core::format::{
    parse_dataset, parse_pmdp, parse_policy, parse_valuation, serialize_pmdp, serialize_policy,
};
use pspibb_core::game::{aval_cval_prune, PruneReason, PruneResult};
use pspibb_core::harness::{
    emit_raw_csv, emit_results_csv, parse_experiment_config, run_experiment,
};
use pspibb_core::mdp::Mdp;
use pspibb_core::pmdp::PMdp;
use pspibb_core::poly::Valuation;
use pspibb_core::pspibb::{
    label_classes, parametric_mle_with, parametric_uncertainty_set, pspibb_policy_with,
};
use pspibb_core::smt::{emit_smtlib, locate_solver, query_system, smt_prune, QueryKind};
use pspibb_core::solve::{policy_evaluation, value_iteration, Policy, SolveParams};
use pspibb_core::spibb::{count, mle_mdp, spibb_policy, uncertainty_set, SpibbMode};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

#[derive(Parser)]
#[command(
    name = "pspibb",
    version,
    about = "Safe policy improvement on parametric MDPs, with game-based and SMT-based action pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model at a valuation: optimal values by value iteration.
    Solve(SolveArgs),
    /// Improved policy by baseline bootstrapping on the plain MLE model.
    Spibb(SpibbArgs),
    /// Improved policy with parameter tying (pooled counts).
    Pspibb(SpibbArgs),
    /// Remove provably suboptimal state-action pairs.
    Prune(PruneArgs),
    /// Write the exact SMT-LIB 2 script of a pruning query.
    SmtExport(SmtExportArgs),
    /// Build a benchmark environment.
    Bench(BenchArgs),
    /// Run a data-efficiency experiment from a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    /// Valuation file (`val <param> <value>` lines).
    #[arg(long)]
    valuation: Option<PathBuf>,
    /// Inline assignments, e.g. `--set p=0.5` (repeatable).
    #[arg(long = "set", value_name = "NAME=VALUE")]
    sets: Vec<String>,
    /// Print the full V/Q table as CSV instead of just the initial value.
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct SpibbArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long = "n-wedge")]
    n_wedge: u64,
    /// Apply the greedy formula once instead of iterating to a fixed point.
    #[arg(long = "one-shot")]
    one_shot: bool,
    /// Also print the admissible performance loss.
    #[arg(long)]
    zeta: bool,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

#[derive(Args)]
struct PruneArgs {
    #[arg(long)]
    model: PathBuf,
    /// `game` or `smt`.
    #[arg(long, default_value = "game")]
    method: String,
    /// Solver command for `--method smt` (default: auto-detect).
    #[arg(long = "solver-cmd")]
    solver_cmd: Option<String>,
    /// Per-query timeout in seconds for `--method smt`.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    #[arg(long)]
    out: PathBuf,
    /// Write the removal report here as well as to stdout.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SmtExportArgs {
    #[arg(long)]
    model: PathBuf,
    /// State and action name of the queried pair.
    #[arg(long, num_args = 2, value_names = ["STATE", "ACTION"])]
    pair: Vec<String>,
    /// `aval-q` or `q-q`.
    #[arg(long)]
    query: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// gridworld, resource-gathering, taxi, pacman, or rps.
    #[arg(long)]
    name: String,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the benchmark spec (dimensions, alpha, canonical valuation).
    #[arg(long)]
    spec: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<PMdp> {
    let text = read(path)?;
    Ok(parse_pmdp(&text)?)
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(args) => cmd_solve(args),
        Command::Spibb(args) => cmd_spibb(args, false),
        Command::Pspibb(args) => cmd_spibb(args, true),
        Command::Prune(args) => cmd_prune(args),
        Command::SmtExport(args) => cmd_smt_export(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Experiment(args) => cmd_experiment(args),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let mut valuation = match &args.valuation {
        Some(path) => parse_valuation(&read(path)?)?,
        None => Valuation::new(),
    };
    for set in &args.sets {
        let (name, value) = set
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects NAME=VALUE, got `{set}`"))?;
        valuation.set(name, value.parse::<f64>().context("bad --set value")?);
    }
    let mdp = model
        .instantiate(&valuation, 1e-9)
        .context("valuation is not graph-preserving for this model")?;
    let table = value_iteration(&mdp, &SolveParams::default())?;
    println!("V({}) = {}", mdp.states()[mdp.initial()], table.v[mdp.initial()]);
    if args.csv {
        println!("state,action,v,q");
        for s in 0..mdp.n_states() {
            for &a in mdp.enabled(s) {
                println!(
                    "{},{},{},{}",
                    mdp.states()[s],
                    mdp.actions()[a],
                    table.v[s],
                    table.q_at(s, a)
                );
            }
        }
    }
    Ok(())
}

fn cmd_spibb(args: SpibbArgs, parametric: bool) -> Result<()> {
    let model = load_model(&args.model)?;
    let dataset = parse_dataset(&read(&args.data)?, model.states(), model.actions())?;
    let pi_b = parse_policy(&read(&args.baseline)?, model.states(), model.actions())?;
    let counts = count(&dataset, model.n_states(), model.n_actions());
    let params = SolveParams::default();
    let mode = if args.one_shot {
        SpibbMode::OneShot
    } else {
        SpibbMode::FixedPoint
    };
    let skeleton = model.skeleton();
    let (pi, mle): (Policy, Mdp) = if parametric {
        let lc = label_classes(&model)?;
        let mle = parametric_mle_with(&counts, &model, &lc);
        let uncertain = parametric_uncertainty_set(&counts, &lc, args.n_wedge).len();
        let pi = pspibb_policy_with(&model, &lc, &counts, &pi_b, args.n_wedge, mode, &params)
            .map_err(|e| anyhow!("{e}"))?;
        eprintln!("uncertain pairs: {uncertain}");
        (pi, mle)
    } else {
        let mle = mle_mdp(&counts, &skeleton);
        let uncertain = uncertainty_set(&counts, args.n_wedge, &skeleton);
        eprintln!("uncertain pairs: {}", uncertain.len());
        let pi = spibb_policy(&skeleton, &mle, &pi_b, &uncertain, mode, &params)?;
        (pi, mle)
    };
    print!(
        "{}",
        serialize_policy(&pi, "improved", model.states(), model.actions())
    );
    let v_i = policy_evaluation(&mle, &pi, &params)?.v[model.initial()];
    let v_b = policy_evaluation(&mle, &pi_b, &params)?.v[model.initial()];
    println!("# estimated performance (MLE model): {v_i}");
    if args.zeta {
        let v_max = model.r_max_f64() / (1.0 - model.gamma_f64());
        let c = v_b - v_i;
        let zeta = zeta_bound(
            args.n_wedge,
            args.delta,
            v_max,
            model.gamma_f64(),
            c,
            model.n_states(),
            model.n_actions(),
        )?;
        println!("# zeta bound (delta = {}, c = {c}): {zeta}", args.delta);
    }
    Ok(())
}

fn render_report(model: &PMdp, result: &PruneResult) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "pruned {} state-action pairs from {}",
        result.removed.len(),
        model.name
    );
    for r in &result.removed {
        let reason = match r.reason {
            PruneReason::Strict => "strict",
            PruneReason::NonStrict => "nonstrict",
        };
        let _ = writeln!(
            out,
            "removed {} {} {reason}",
            model.states()[r.state],
            model.actions()[r.action]
        );
    }
    for (s, a) in &result.skipped {
        let _ = writeln!(
            out,
            "skipped {} {} (kept so the state retains an action)",
            model.states()[*s],
            model.actions()[*a]
        );
    }
    out
}

fn cmd_prune(args: PruneArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let (pruned, result) = match args.method.as_str() {
        "game" => aval_cval_prune(&model)?,
        "smt" => {
            let solver = args
                .solver_cmd
                .clone()
                .or_else(locate_solver)
                .ok_or_else(|| anyhow!("no SMT solver found; pass --solver-cmd"))?;
            smt_prune(&model, &solver, Duration::from_secs(args.timeout))?
        }
        other => bail!("unknown pruning method `{other}` (use game or smt)"),
    };
    fs::write(&args.out, serialize_pmdp(&pruned))
        .with_context(|| format!("writing {}", args.out.display()))?;
    let report = render_report(&model, &result);
    print!("{report}");
    if let Some(path) = &args.report {
        fs::write(path, report).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_smt_export(args: SmtExportArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let [state, action] = args.pair.as_slice() else {
        bail!("--pair expects a state and an action");
    };
    let s = model
        .state_id(state)
        .ok_or_else(|| anyhow!("unknown state `{state}`"))?;
    let a = model
        .action_id(action)
        .ok_or_else(|| anyhow!("unknown action `{action}`"))?;
    if !model.is_enabled(s, a) {
        bail!("pair ({state}, {action}) is not enabled");
    }
    let kind = match args.query.as_str() {
        "aval-q" => QueryKind::AvalQ,
        "q-q" => QueryKind::QQ,
        other => bail!("unknown query `{other}` (use aval-q or q-q)"),
    };
    let sys = query_system(&model, s, a, kind)?;
    fs::write(&args.out, emit_smtlib(&sys))
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote {} ({} variables, {} constraints)",
        args.out.display(),
        sys.n_variables(),
        sys.constraint_count()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let benchmark = bench::build(&args.name)?;
    if args.spec {
        print!("{}", benchmark.spec.report(&benchmark.pmdp));
    }
    if let Some(out) = &args.out {
        fs::write(out, serialize_pmdp(&benchmark.pmdp))
            .with_context(|| format!("writing {}", out.display()))?;
        eprintln!("wrote {}", out.display());
    } else if !args.spec {
        bail!("nothing to do: pass --out and/or --spec");
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = parse_experiment_config(&read(&args.config)?)?;
    let outcome = run_experiment(&cfg)?;
    fs::create_dir_all(&args.out_dir)?;
    let results_path = args.out_dir.join("results.csv");
    let raw_path = args.out_dir.join("raw_seeds.csv");
    fs::write(&results_path, emit_results_csv(&outcome))?;
    fs::write(&raw_path, emit_raw_csv(&outcome))?;
    println!(
        "env {} | baseline {} | zeta {} | wrote {} and {}",
        outcome.env,
        outcome.baseline,
        outcome.zeta,
        results_path.display(),
        raw_path.display()
    );
    for (mode, n) in &outcome.pruned_pairs {
        println!("pruning {mode}: removed {n} pairs");
    }
    for c in &outcome.curves {
        println!(
            "{}+{} size {}: mean {} cvar10 {} cvar1 {}",
            c.method.algo, c.method.pruning, c.size, c.mean, c.cvar10, c.cvar1
        );
    }
    if !outcome.failures.is_empty() {
        for (seed, msg) in &outcome.failures {
            eprintln!("seed {seed} failed: {msg}");
        }
        bail!("{} of {} seeds failed", outcome.failures.len(), cfg.n_seeds);
    }
    Ok(())
}
