//! Bellman optimality as constraints over the existential theory of the
//! reals, SMT-LIB 2 emission, and solver-backed pruning queries.
//!
//! The solver is an external process reading SMT-LIB 2 on standard input
//! and printing `sat`/`unsat`/`unknown`; which solver runs behind that
//! contract is configurable.

use crate::game::{aval_exact, strict_bound_holds, PruneReason, PruneResult, RemovedPair};
use crate::pmdp::{ActionId, PMdp, StateId};
use crate::poly::Polynomial;
use crate::solve::SolveError;
use num_rational::BigRational;
use num_traits::Signed;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SmtError {
    #[error("failed to launch solver `{cmd}`: {source}")]
    Launch {
        cmd: String,
        source: std::io::Error,
    },
    #[error("solver produced no verdict; output was: {output:?}")]
    NoVerdict { output: String },
    #[error("solver i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("game-value computation failed: {0}")]
    Game(#[from] SolveError),
}

// ---------------------------------------------------------------------------
// Constraint system
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum Term {
    Const(BigRational),
    Var(String),
    Add(Vec<Term>),
    Mul(Vec<Term>),
}

#[derive(Debug, Clone)]
pub enum Constraint {
    Eq(Term, Term),
    Le(Term, Term),
    Lt(Term, Term),
    Ge(Term, Term),
    Gt(Term, Term),
    Or(Vec<Constraint>),
}

/// The encoded system: parametric Bellman equations, the optimality
/// conditions, and the graph-preserving constraints, plus an optional
/// pruning query to test for satisfiability.
#[derive(Debug, Clone)]
pub struct EtrSystem {
    pub param_vars: Vec<String>,
    pub value_vars: Vec<String>,
    pub q_vars: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub query: Option<Constraint>,
}

impl EtrSystem {
    pub fn n_variables(&self) -> usize {
        self.param_vars.len() + self.value_vars.len() + self.q_vars.len()
    }

    pub fn constraint_count(&self) -> usize {
        self.constraints.len() + usize::from(self.query.is_some())
    }
}

fn param_var(name: &str) -> String {
    format!("th_{name}")
}

fn value_var(state: &str) -> String {
    format!("v_{state}")
}

fn q_var(state: &str, action: &str) -> String {
    format!("q_{state}_{action}")
}

fn poly_to_term(p: &Polynomial) -> Term {
    if p.is_zero() {
        return Term::Const(BigRational::from_integer(0.into()));
    }
    let mut sum = Vec::new();
    for (mono, coeff) in p.terms() {
        let mut factors = Vec::new();
        if !mono.vars().is_empty() {
            for (name, exp) in mono.vars() {
                for _ in 0..*exp {
                    factors.push(Term::Var(param_var(name)));
                }
            }
        }
        if factors.is_empty() {
            sum.push(Term::Const(coeff.clone()));
        } else if coeff == &BigRational::from_integer(1.into()) {
            sum.push(if factors.len() == 1 {
                factors.pop().unwrap()
            } else {
                Term::Mul(factors)
            });
        } else {
            let mut all = vec![Term::Const(coeff.clone())];
            all.extend(factors);
            sum.push(Term::Mul(all));
        }
    }
    if sum.len() == 1 {
        sum.pop().unwrap()
    } else {
        Term::Add(sum)
    }
}

/// Encodes the parametric Bellman system of the model: per pair the Q
/// definition, per state the optimality conditions (upper bounds plus a
/// disjunction of equalities), and the three graph-preserving conditions.
pub fn encode_bellman(m: &PMdp) -> EtrSystem {
    let param_vars: Vec<String> = m.params().iter().map(|p| param_var(p)).collect();
    let value_vars: Vec<String> = m.states().iter().map(|s| value_var(s)).collect();
    let mut q_vars = Vec::new();
    let mut constraints = Vec::new();
    let one = Term::Const(BigRational::from_integer(1.into()));
    let zero = Term::Const(BigRational::from_integer(0.into()));

    for (s, a) in m.enabled_pairs() {
        let qv = q_var(&m.states()[s], &m.actions()[a]);
        q_vars.push(qv.clone());
        // Q_{s,a} = R(s,a) + gamma * sum_t P(s,a,t) * V_t
        let succ_terms: Vec<Term> = m
            .transitions(s, a)
            .iter()
            .map(|(t, label)| {
                Term::Mul(vec![poly_to_term(label), Term::Var(value_var(&m.states()[*t]))])
            })
            .collect();
        let expectation = if succ_terms.len() == 1 {
            succ_terms.into_iter().next().unwrap()
        } else {
            Term::Add(succ_terms)
        };
        let rhs = Term::Add(vec![
            Term::Const(m.reward(s, a).clone()),
            Term::Mul(vec![Term::Const(m.step_gamma(s)), expectation]),
        ]);
        constraints.push(Constraint::Eq(Term::Var(qv), rhs));
    }

    for s in 0..m.n_states() {
        let vs = Term::Var(value_var(&m.states()[s]));
        let mut equalities = Vec::new();
        for &a in m.enabled(s) {
            let qv = Term::Var(q_var(&m.states()[s], &m.actions()[a]));
            constraints.push(Constraint::Ge(vs.clone(), qv.clone()));
            equalities.push(Constraint::Eq(vs.clone(), qv));
        }
        if equalities.len() == 1 {
            constraints.push(equalities.pop().unwrap());
        } else {
            constraints.push(Constraint::Or(equalities));
        }
    }

    // Graph-preserving: each row sums to one; each labeled probability is
    // strictly positive and at most one.
    for (s, a) in m.enabled_pairs() {
        let labels: Vec<&Polynomial> = m.transitions(s, a).iter().map(|(_, l)| l).collect();
        let sum = if labels.len() == 1 {
            poly_to_term(labels[0])
        } else {
            Term::Add(labels.iter().map(|l| poly_to_term(l)).collect())
        };
        constraints.push(Constraint::Eq(sum, one.clone()));
        for label in labels {
            constraints.push(Constraint::Gt(poly_to_term(label), zero.clone()));
            constraints.push(Constraint::Le(poly_to_term(label), one.clone()));
        }
    }

    EtrSystem {
        param_vars,
        value_vars,
        q_vars,
        constraints,
        query: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryKind {
    /// Complement of "aVal(s) beats Q(s,a) at every valuation".
    AvalQ,
    /// Complement of "V(s) beats Q(s,a) at every valuation".
    QQ,
}

/// The system plus the negated pruning condition for (s, a). For `AvalQ`
/// the antagonistic value enters as an exact rational constant; when the
/// two-step worst-case check holds at `s`, the query is strict so that
/// unsatisfiability certifies the non-strict pruning condition.
pub fn query_system(
    m: &PMdp,
    s: StateId,
    a: ActionId,
    kind: QueryKind,
) -> Result<EtrSystem, SmtError> {
    let mut sys = encode_bellman(m);
    let qv = Term::Var(q_var(&m.states()[s], &m.actions()[a]));
    sys.query = Some(match kind {
        QueryKind::AvalQ => {
            let aval = aval_exact(m);
            let bound = Term::Const(aval[s].clone());
            if strict_bound_holds(m, s)? {
                Constraint::Gt(qv, bound)
            } else {
                Constraint::Ge(qv, bound)
            }
        }
        QueryKind::QQ => {
            let vs = Term::Var(value_var(&m.states()[s]));
            Constraint::Le(vs, qv)
        }
    });
    Ok(sys)
}

// ---------------------------------------------------------------------------
// SMT-LIB emission
// ---------------------------------------------------------------------------

fn rational_sexpr(r: &BigRational) -> String {
    let mag = r.abs();
    let body = if mag.is_integer() {
        mag.numer().to_string()
    } else {
        format!("(/ {} {})", mag.numer(), mag.denom())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn term_sexpr(t: &Term, out: &mut String) {
    match t {
        Term::Const(r) => out.push_str(&rational_sexpr(r)),
        Term::Var(v) => out.push_str(v),
        Term::Add(ts) => {
            out.push_str("(+");
            for t in ts {
                out.push(' ');
                term_sexpr(t, out);
            }
            out.push(')');
        }
        Term::Mul(ts) => {
            out.push_str("(*");
            for t in ts {
                out.push(' ');
                term_sexpr(t, out);
            }
            out.push(')');
        }
    }
}

fn constraint_sexpr(c: &Constraint, out: &mut String) {
    let (op, a, b) = match c {
        Constraint::Eq(a, b) => ("=", a, b),
        Constraint::Le(a, b) => ("<=", a, b),
        Constraint::Lt(a, b) => ("<", a, b),
        Constraint::Ge(a, b) => (">=", a, b),
        Constraint::Gt(a, b) => (">", a, b),
        Constraint::Or(cs) => {
            out.push_str("(or");
            for c in cs {
                out.push(' ');
                constraint_sexpr(c, out);
            }
            out.push(')');
            return;
        }
    };
    out.push('(');
    out.push_str(op);
    out.push(' ');
    term_sexpr(a, out);
    out.push(' ');
    term_sexpr(b, out);
    out.push(')');
}

/// Deterministic SMT-LIB 2 script: declarations in model order, one assert
/// per constraint, then the query, `(check-sat)` and `(get-model)`.
/// Rationals appear as exact quotients, never decimals.
pub fn emit_smtlib(sys: &EtrSystem) -> String {
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-logic QF_NRA)\n");
    for v in sys
        .param_vars
        .iter()
        .chain(sys.value_vars.iter())
        .chain(sys.q_vars.iter())
    {
        let _ = writeln!(out, "(declare-const {v} Real)");
    }
    for c in sys.constraints.iter().chain(sys.query.iter()) {
        out.push_str("(assert ");
        constraint_sexpr(c, &mut out);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n");
    out.push_str("(get-model)\n");
    out
}

// ---------------------------------------------------------------------------
// Solver process driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Sat,
    Unsat,
    Unknown,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct SolverVerdict {
    pub status: SolverStatus,
    /// Parsed numeric assignment when sat and the model output was simple
    /// enough (numerals, quotients, unary minus).
    pub model: Option<BTreeMap<String, f64>>,
    pub wall_time: Duration,
}

/// Runs one solver process on a script: SMT-LIB 2 on stdin, verdict on
/// stdout. The command string is split on whitespace. A solver that
/// outlives the timeout is killed and reported as `Timeout`.
pub fn solve(script: &str, solver_cmd: &str, timeout: Duration) -> Result<SolverVerdict, SmtError> {
    let mut parts = solver_cmd.split_whitespace();
    let program = parts.next().ok_or_else(|| SmtError::NoVerdict {
        output: "empty solver command".to_string(),
    })?;
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| SmtError::Launch {
            cmd: solver_cmd.to_string(),
            source,
        })?;

    // Feed and read on dedicated threads so neither pipe can deadlock.
    let mut stdin = child.stdin.take().expect("piped stdin");
    let script_owned = script.to_string();
    let writer = std::thread::spawn(move || {
        use std::io::Write;
        let _ = stdin.write_all(script_owned.as_bytes());
    });
    let mut stdout = child.stdout.take().expect("piped stdout");
    let (tx, rx) = std::sync::mpsc::channel();
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        let _ = tx.send(buf);
    });

    let output = match rx.recv_timeout(timeout) {
        Ok(buf) => buf,
        Err(_) => {
            let _ = child.kill();
            let _ = child.wait();
            let _ = writer.join();
            let _ = reader.join();
            return Ok(SolverVerdict {
                status: SolverStatus::Timeout,
                model: None,
                wall_time: start.elapsed(),
            });
        }
    };
    let _ = writer.join();
    let _ = reader.join();
    let exit = child.wait()?;
    let wall_time = start.elapsed();

    let status = output
        .lines()
        .map(str::trim)
        .find_map(|line| match line {
            "sat" => Some(SolverStatus::Sat),
            "unsat" => Some(SolverStatus::Unsat),
            "unknown" => Some(SolverStatus::Unknown),
            _ => None,
        });
    let Some(status) = status else {
        let mut err_out = String::new();
        if let Some(mut stderr) = child.stderr.take() {
            let _ = stderr.read_to_string(&mut err_out);
        }
        return Err(SmtError::NoVerdict {
            output: format!(
                "exit {exit:?}; stdout: {}; stderr: {}",
                output.chars().take(400).collect::<String>(),
                err_out.chars().take(400).collect::<String>()
            ),
        });
    };
    let model = if status == SolverStatus::Sat {
        parse_model(&output)
    } else {
        None
    };
    Ok(SolverVerdict {
        status,
        model,
        wall_time,
    })
}

/// Extracts `(define-fun NAME () Real VALUE)` bindings with simple numeric
/// values from a `(get-model)` response.
fn parse_model(output: &str) -> Option<BTreeMap<String, f64>> {
    let tokens = tokenize_sexpr(output);
    let mut map = BTreeMap::new();
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i] == "define-fun" && i + 1 < tokens.len() {
            let name = tokens[i + 1].clone();
            // Expect: define-fun NAME ( ) Real VALUE...
            let mut j = i + 2;
            if tokens.get(j).map(String::as_str) == Some("(")
                && tokens.get(j + 1).map(String::as_str) == Some(")")
                && tokens.get(j + 2).map(String::as_str) == Some("Real")
            {
                j += 3;
                if let Some((value, _next)) = parse_numeric_value(&tokens, j) {
                    map.insert(name, value);
                }
            }
        }
        i += 1;
    }
    if map.is_empty() {
        None
    } else {
        Some(map)
    }
}

fn tokenize_sexpr(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Numerals, decimals, `(/ a b)` and `(- x)`; anything else is skipped.
fn parse_numeric_value(tokens: &[String], i: usize) -> Option<(f64, usize)> {
    match tokens.get(i)?.as_str() {
        "(" => match tokens.get(i + 1)?.as_str() {
            "/" => {
                let (a, next) = parse_numeric_value(tokens, i + 2)?;
                let (b, next) = parse_numeric_value(tokens, next)?;
                (tokens.get(next)? == ")").then_some((a / b, next + 1))
            }
            "-" => {
                let (a, next) = parse_numeric_value(tokens, i + 2)?;
                (tokens.get(next)? == ")").then_some((-a, next + 1))
            }
            _ => None,
        },
        atom => atom.parse::<f64>().ok().map(|v| (v, i + 1)),
    }
}

// ---------------------------------------------------------------------------
// Pruning queries
// ---------------------------------------------------------------------------

fn synthetic_skip_verdict() -> SolverVerdict {
    SolverVerdict {
        status: SolverStatus::Unknown,
        model: None,
        wall_time: Duration::ZERO,
    }
}

/// Theorem-style test against the antagonistic value: prunable exactly
/// when the complement query is unsatisfiable. `unknown`/`timeout` never
/// prune.
pub fn aval_q_prunable(
    m: &PMdp,
    s: StateId,
    a: ActionId,
    solver_cmd: &str,
    timeout: Duration,
) -> Result<(bool, SolverVerdict), SmtError> {
    if m.enabled(s).len() <= 1 {
        return Ok((false, synthetic_skip_verdict()));
    }
    let sys = query_system(m, s, a, QueryKind::AvalQ)?;
    let verdict = solve(&emit_smtlib(&sys), solver_cmd, timeout)?;
    Ok((verdict.status == SolverStatus::Unsat, verdict))
}

/// Value-against-value test: prunable exactly when `V_s <= Q_{s,a}` is
/// unsatisfiable over the graph-preserving valuations.
pub fn qq_prunable(
    m: &PMdp,
    s: StateId,
    a: ActionId,
    solver_cmd: &str,
    timeout: Duration,
) -> Result<(bool, SolverVerdict), SmtError> {
    if m.enabled(s).len() <= 1 {
        return Ok((false, synthetic_skip_verdict()));
    }
    let sys = query_system(m, s, a, QueryKind::QQ)?;
    let verdict = solve(&emit_smtlib(&sys), solver_cmd, timeout)?;
    Ok((verdict.status == SolverStatus::Unsat, verdict))
}

/// Single-pass pruning with the value-against-value query on every pair
/// (the strongest of the tests). Conservative: only definitive `unsat`
/// answers remove, and every state keeps at least one action.
pub fn smt_prune(
    m: &PMdp,
    solver_cmd: &str,
    timeout: Duration,
) -> Result<(PMdp, PruneResult), SmtError> {
    let mut result = PruneResult::default();
    let mut keep: Vec<usize> = (0..m.n_states()).map(|s| m.enabled(s).len()).collect();
    let mut gone = std::collections::BTreeSet::new();
    for s in 0..m.n_states() {
        for &a in m.enabled(s) {
            if keep[s] <= 1 {
                continue;
            }
            let (prunable, _) = qq_prunable(m, s, a, solver_cmd, timeout)?;
            if prunable {
                keep[s] -= 1;
                gone.insert((s, a));
                result.removed.push(RemovedPair {
                    state: s,
                    action: a,
                    reason: PruneReason::Strict,
                });
            }
        }
    }
    let pruned = m.retain_pairs(|s, a| !gone.contains(&(s, a)));
    Ok((pruned, result))
}

/// Finds a usable solver command: the `PSPIBB_SOLVER` environment variable,
/// a `z3` binary on the PATH, or the bundled node shim (tools/z3-shim).
pub fn locate_solver() -> Option<String> {
    if let Ok(cmd) = std::env::var("PSPIBB_SOLVER") {
        if !cmd.trim().is_empty() {
            return Some(cmd);
        }
    }
    if Command::new("z3")
        .arg("-version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .is_ok_and(|s| s.success())
    {
        return Some("z3 -in".to_string());
    }
    let node_ok = Command::new("node")
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .is_ok_and(|s| s.success());
    if node_ok {
        let mut candidates: Vec<PathBuf> = Vec::new();
        if let Ok(dir) = std::env::var("CARGO_MANIFEST_DIR") {
            candidates.push(PathBuf::from(dir));
        }
        if let Ok(dir) = std::env::current_dir() {
            candidates.push(dir);
        }
        for base in candidates {
            let mut cur = Some(base.as_path());
            while let Some(dir) = cur {
                let shim = dir.join("tools/z3-shim/shim.mjs");
                if shim.exists() {
                    return Some(format!("node {}", shim.display()));
                }
                cur = dir.parent();
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Valuation;
    use crate::solve::{value_iteration, SolveParams};
    use crate::testgen;

    fn solver() -> String {
        locate_solver().expect(
            "no SMT solver found: set PSPIBB_SOLVER, install z3, or run \
             `npm install` in tools/z3-shim",
        )
    }

    #[test]
    fn encoding_has_expected_variables() {
        let m = testgen::dominated_action_example();
        let sys = encode_bellman(&m);
        assert_eq!(sys.param_vars, ["th_p"]);
        assert_eq!(sys.value_vars.len(), 4);
        // One Q variable per enabled pair: a and b at s0, plus the single
        // actions of s1, s2, s3.
        assert_eq!(sys.q_vars.len(), 5);
    }

    #[test]
    fn emitted_script_is_deterministic_and_quotient_only() {
        let m = testgen::dominated_action_example();
        let sys = query_system(&m, 0, 0, QueryKind::QQ).unwrap();
        let a = emit_smtlib(&sys);
        let b = emit_smtlib(&query_system(&m, 0, 0, QueryKind::QQ).unwrap());
        assert_eq!(a, b);
        assert!(!a.contains('^'));
        assert!(!a.contains('.'), "decimals must not appear: {a}");
        // Re-parsing the asserts recovers the constraint count.
        let asserts = a.lines().filter(|l| l.starts_with("(assert ")).count();
        assert_eq!(asserts, sys.constraint_count());
    }

    #[test]
    fn trivial_scripts_solve() {
        let cmd = solver();
        let unsat = solve(
            "(set-logic QF_NRA)\n(assert false)\n(check-sat)\n",
            &cmd,
            Duration::from_secs(60),
        )
        .unwrap();
        assert_eq!(unsat.status, SolverStatus::Unsat);
        let sat = solve(
            "(set-logic QF_NRA)\n(declare-const x Real)\n(assert (> x 0))\n(check-sat)\n",
            &cmd,
            Duration::from_secs(60),
        )
        .unwrap();
        assert_eq!(sat.status, SolverStatus::Sat);
    }

    #[test]
    fn garbage_output_is_an_error_not_a_verdict() {
        let err = solve("(check-sat)\n", "false", Duration::from_secs(10));
        assert!(matches!(err, Err(SmtError::NoVerdict { .. })));
        let err = solve("(check-sat)\n", "./does-not-exist-xyz", Duration::from_secs(10));
        assert!(matches!(err, Err(SmtError::Launch { .. })));
    }

    #[test]
    fn parameterless_system_is_satisfiable_with_the_computed_values() {
        let cmd = solver();
        // Two-state deterministic chain: closed-form values.
        let mut b = crate::pmdp::PMdpBuilder::new("det");
        b.set_gamma(num_rational::BigRational::new(1.into(), 2.into()));
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let a = b.add_action("a");
        b.add_trans(s0, a, s1, crate::poly::Polynomial::from_int(1));
        b.add_trans(s1, a, s1, crate::poly::Polynomial::from_int(1));
        b.set_reward_int(s0, a, 1);
        let m = b.build().unwrap();
        let sys = encode_bellman(&m);
        assert!(sys.param_vars.is_empty());
        let verdict = solve(&emit_smtlib(&sys), &cmd, Duration::from_secs(60)).unwrap();
        assert_eq!(verdict.status, SolverStatus::Sat);
        let model = verdict.model.expect("model for sat");
        let mdp = m.instantiate(&Valuation::new(), 1e-9).unwrap();
        let vt = value_iteration(&mdp, &SolveParams::default()).unwrap();
        assert!((model["v_s0"] - vt.v[0]).abs() < 1e-6);
        assert!((model["v_s1"] - vt.v[1]).abs() < 1e-6);
    }

    #[test]
    fn dominated_action_queries() {
        let cmd = solver();
        let m = testgen::dominated_action_example();
        let s0 = m.initial();
        let a = m.action_id("a").unwrap();
        let b = m.action_id("b").unwrap();
        let timeout = Duration::from_secs(60);
        // The antagonistic bound cannot separate action a...
        let (prunable, _) = aval_q_prunable(&m, s0, a, &cmd, timeout).unwrap();
        assert!(!prunable);
        // ...but the value-against-value query removes it...
        let (prunable, _) = qq_prunable(&m, s0, a, &cmd, timeout).unwrap();
        assert!(prunable);
        // ...and keeps b, which is optimal at every valuation.
        let (prunable, _) = qq_prunable(&m, s0, b, &cmd, timeout).unwrap();
        assert!(!prunable);
    }

    #[test]
    fn single_action_states_are_never_queried() {
        let m = testgen::dominated_action_example();
        let s2 = m.state_id("s2").unwrap();
        // Solver command is irrelevant: the guard answers first.
        let (prunable, verdict) =
            qq_prunable(&m, s2, 0, "./does-not-exist-xyz", Duration::from_secs(1)).unwrap();
        assert!(!prunable);
        assert_eq!(verdict.status, SolverStatus::Unknown);
    }

    #[test]
    fn smt_prune_removes_the_dominated_action() {
        let cmd = solver();
        let m = testgen::dominated_action_example();
        let (pruned, result) = smt_prune(&m, &cmd, Duration::from_secs(60)).unwrap();
        let s0 = m.initial();
        assert_eq!(
            result.removed_pairs(),
            std::collections::BTreeSet::from([(s0, m.action_id("a").unwrap())])
        );
        assert_eq!(pruned.enabled(s0), &[m.action_id("b").unwrap()]);
    }

    #[test]
    fn unknown_and_timeout_verdicts_never_prune() {
        let m = testgen::dominated_action_example();
        let s0 = m.initial();
        // A "solver" that always answers unknown.
        let (prunable, verdict) =
            qq_prunable(&m, s0, 0, "echo unknown", Duration::from_secs(10)).unwrap();
        assert!(!prunable);
        assert_eq!(verdict.status, SolverStatus::Unknown);
        // A solver that never answers within the timeout.
        let (prunable, verdict) =
            qq_prunable(&m, s0, 0, "sleep 30", Duration::from_millis(200)).unwrap();
        assert!(!prunable);
        assert_eq!(verdict.status, SolverStatus::Timeout);
    }

    /// Each pruning test is at least as strong as the previous one: the
    /// game-based removals survive the antagonistic-bound query, which in
    /// turn survive the value-against-value query.
    #[test]
    fn dominance_chain_across_the_three_tests() {
        let cmd = solver();
        let timeout = Duration::from_secs(60);
        for m in [testgen::prune_showcase(), testgen::dominated_action_example()] {
            let game_removed = crate::game::aval_cval_prune(&m).unwrap().1.removed_pairs();
            let mut aval_q_removed = std::collections::BTreeSet::new();
            let mut qq_removed = std::collections::BTreeSet::new();
            for s in 0..m.n_states() {
                if m.enabled(s).len() <= 1 {
                    continue;
                }
                for &a in m.enabled(s) {
                    if aval_q_prunable(&m, s, a, &cmd, timeout).unwrap().0 {
                        aval_q_removed.insert((s, a));
                    }
                    if qq_prunable(&m, s, a, &cmd, timeout).unwrap().0 {
                        qq_removed.insert((s, a));
                    }
                }
            }
            assert!(
                game_removed.is_subset(&aval_q_removed),
                "{}: {game_removed:?} vs {aval_q_removed:?}",
                m.name
            );
            assert!(
                aval_q_removed.is_subset(&qq_removed),
                "{}: {aval_q_removed:?} vs {qq_removed:?}",
                m.name
            );
        }
    }

    #[test]
    fn concrete_models_agree_with_direct_value_comparison() {
        let cmd = solver();
        // Three-way deterministic choice: compare the query outcome with
        // directly solving the instantiated model.
        let mut b = crate::pmdp::PMdpBuilder::new("threeway");
        b.set_rmax(num_rational::BigRational::from_integer(5.into()));
        let s0 = b.add_state("s0");
        let good = b.add_state("good");
        let bad = b.add_state("bad");
        use crate::poly::Polynomial as P;
        let a0 = b.add_action("a0");
        let a1 = b.add_action("a1");
        b.add_trans(s0, a0, bad, P::from_int(1));
        b.add_trans(s0, a1, good, P::from_int(1));
        b.set_reward_int(s0, a1, 5);
        b.add_trans(good, a0, good, P::from_int(1));
        b.add_trans(bad, a0, bad, P::from_int(1));
        let m = b.build().unwrap();
        let mdp = m.instantiate(&Valuation::new(), 1e-9).unwrap();
        let vt = value_iteration(&mdp, &SolveParams::default()).unwrap();
        let timeout = Duration::from_secs(60);
        for a in [a0, a1] {
            let (prunable, _) = qq_prunable(&m, s0, a, &cmd, timeout).unwrap();
            let dominated = vt.q_at(s0, a) < vt.v[0] - 1e-9;
            assert_eq!(prunable, dominated, "action {a}");
        }
    }
}
