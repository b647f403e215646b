//! Exact tabular solvers: optimal values, policy evaluation, and policy
//! iteration. Pure functions over immutable inputs.

use crate::mdp::Mdp;
use crate::pmdp::{ActionId, StateId};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: u64, residual: f64 },
}

/// Stationary stochastic policy, stored densely per (state, action).
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    n_actions: usize,
    probs: Vec<f64>,
}

impl Policy {
    pub fn zeroed(n_states: usize, n_actions: usize) -> Policy {
        Policy {
            n_actions,
            probs: vec![0.0; n_states * n_actions],
        }
    }

    /// Uniform over the enabled actions of each state.
    pub fn uniform(m: &Mdp) -> Policy {
        let mut pi = Policy::zeroed(m.n_states(), m.n_actions());
        for s in 0..m.n_states() {
            let acts = m.enabled(s);
            for &a in acts {
                pi.set(s, a, 1.0 / acts.len() as f64);
            }
        }
        pi
    }

    /// Deterministic policy from per-state choices.
    pub fn deterministic(choices: &[ActionId], n_actions: usize) -> Policy {
        let mut pi = Policy::zeroed(choices.len(), n_actions);
        for (s, &a) in choices.iter().enumerate() {
            pi.set(s, a, 1.0);
        }
        pi
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn prob(&self, s: StateId, a: ActionId) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: StateId, a: ActionId, p: f64) {
        self.probs[s * self.n_actions + a] = p;
    }

    pub fn row(&self, s: StateId) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn support(&self, s: StateId) -> Vec<ActionId> {
        (0..self.n_actions).filter(|&a| self.prob(s, a) > 0.0).collect()
    }

    /// The single supported action, if the policy is deterministic at `s`.
    pub fn chosen(&self, s: StateId) -> Option<ActionId> {
        let sup = self.support(s);
        if sup.len() == 1 && (self.prob(s, sup[0]) - 1.0).abs() < 1e-12 {
            Some(sup[0])
        } else {
            None
        }
    }

    /// Every row must sum to 1 (or 0 for states without enabled actions)
    /// with support inside `enabled`.
    pub fn validate_on(&self, enabled: &[Vec<ActionId>], tol: f64) -> Result<(), String> {
        for (s, acts) in enabled.iter().enumerate() {
            let sum: f64 = self.row(s).iter().sum();
            if acts.is_empty() {
                if sum != 0.0 {
                    return Err(format!("state {s} has no actions but policy mass {sum}"));
                }
                continue;
            }
            if (sum - 1.0).abs() > tol {
                return Err(format!("policy row {s} sums to {sum}"));
            }
            for a in 0..self.n_actions {
                if self.prob(s, a) > 0.0 && !acts.contains(&a) {
                    return Err(format!("policy mass on disabled pair ({s}, {a})"));
                }
            }
        }
        Ok(())
    }
}

/// State values and state-action values from one solve.
#[derive(Debug, Clone)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    n_actions: usize,
}

impl ValueTable {
    pub fn q_at(&self, s: StateId, a: ActionId) -> f64 {
        self.q[s * self.n_actions + a]
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    pub tol: f64,
    pub max_iter: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            tol: 1e-10,
            max_iter: 1_000_000,
        }
    }
}

/// One Bellman backup of Q given V; `None` for disabled pairs evaluated
/// under a policy is handled by the callers.
#[inline]
fn q_backup(m: &Mdp, s: StateId, a: ActionId, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &(t, p) in m.successors(s, a) {
        acc += p * v[t];
    }
    m.reward(s, a) + m.step_gamma(s) * acc
}

/// Optimal values by value iteration from the zero initialization.
/// Returns (V, Q) with sup-norm Bellman residual at most `tol`.
pub fn value_iteration(m: &Mdp, params: &SolveParams) -> Result<ValueTable, SolveError> {
    let n = m.n_states();
    let na = m.n_actions();
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    for it in 0..params.max_iter {
        let mut residual: f64 = 0.0;
        let mut v_next = vec![0.0; n];
        for s in 0..n {
            let mut best = f64::NEG_INFINITY;
            for &a in m.enabled(s) {
                let qa = q_backup(m, s, a, &v);
                q[s * na + a] = qa;
                if qa > best {
                    best = qa;
                }
            }
            // A state with every action disabled is absorbing with reward 0.
            if best == f64::NEG_INFINITY {
                best = 0.0;
            }
            residual = residual.max((best - v[s]).abs());
            v_next[s] = best;
        }
        v = v_next;
        if residual <= params.tol {
            return Ok(ValueTable { v, q, n_actions: na });
        }
        let _ = it;
    }
    Err(SolveError::NoConvergence {
        iterations: params.max_iter,
        residual: f64::NAN,
    })
}

/// Values of a fixed policy. Mass on disabled pairs contributes
/// Q(s, a) = R(s, a) with zero continuation, which keeps evaluation on
/// MLE models (where unvisited actions are disabled) well-defined.
pub fn policy_evaluation(
    m: &Mdp,
    pi: &Policy,
    params: &SolveParams,
) -> Result<ValueTable, SolveError> {
    let n = m.n_states();
    let na = m.n_actions();
    let mut v = vec![0.0; n];
    let mut q = vec![0.0; n * na];
    for _ in 0..params.max_iter {
        let mut residual: f64 = 0.0;
        let mut v_next = vec![0.0; n];
        for s in 0..n {
            let mut acc = 0.0;
            for a in 0..na {
                let w = pi.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let qa = if m.is_enabled(s, a) {
                    q_backup(m, s, a, &v)
                } else {
                    m.reward(s, a)
                };
                q[s * na + a] = qa;
                acc += w * qa;
            }
            residual = residual.max((acc - v[s]).abs());
            v_next[s] = acc;
        }
        v = v_next;
        if residual <= params.tol {
            // Fill Q for off-policy enabled actions against the converged V.
            for s in 0..n {
                for &a in m.enabled(s) {
                    q[s * na + a] = q_backup(m, s, a, &v);
                }
            }
            return Ok(ValueTable { v, q, n_actions: na });
        }
    }
    Err(SolveError::NoConvergence {
        iterations: params.max_iter,
        residual: f64::NAN,
    })
}

/// Policy iteration; returns a deterministic optimal policy and its values.
/// Argmax ties break toward the lowest action index.
pub fn policy_iteration(m: &Mdp, params: &SolveParams) -> Result<(Policy, ValueTable), SolveError> {
    let n = m.n_states();
    let mut choices: Vec<ActionId> = (0..n)
        .map(|s| m.enabled(s).first().copied().unwrap_or(0))
        .collect();
    // Switch on strict improvement, or sideways to a lower index on a tie;
    // both moves together form a terminating lexicographic improvement.
    let band = params.tol.max(1e-9);
    for _ in 0..1000 {
        let pi = policy_for(m, &choices);
        let table = policy_evaluation(m, &pi, params)?;
        let mut changed = false;
        for s in 0..n {
            let acts = m.enabled(s);
            if acts.is_empty() {
                continue;
            }
            let qs: Vec<(ActionId, f64)> = acts
                .iter()
                .map(|&a| (a, q_backup(m, s, a, &table.v)))
                .collect();
            let max_q = qs.iter().map(|&(_, q)| q).fold(f64::NEG_INFINITY, f64::max);
            let candidate = qs
                .iter()
                .find(|&&(_, q)| q >= max_q - band)
                .map(|&(a, _)| a)
                .expect("nonempty action set");
            let cur_q = qs
                .iter()
                .find(|&&(a, _)| a == choices[s])
                .map(|&(_, q)| q)
                .expect("current choice is enabled");
            if candidate != choices[s] && (max_q > cur_q + band || candidate < choices[s]) {
                choices[s] = candidate;
                changed = true;
            }
        }
        if !changed {
            let pi = policy_for(m, &choices);
            let table = policy_evaluation(m, &pi, params)?;
            return Ok((pi, table));
        }
    }
    Err(SolveError::NoConvergence {
        iterations: 1000,
        residual: f64::NAN,
    })
}

fn policy_for(m: &Mdp, choices: &[ActionId]) -> Policy {
    let mut pi = Policy::zeroed(m.n_states(), m.n_actions());
    for (s, &a) in choices.iter().enumerate() {
        if !m.enabled(s).is_empty() {
            pi.set(s, a, 1.0);
        }
    }
    pi
}

/// Greedy deterministic action per state from a Q table (lowest index wins
/// ties within `tol`).
pub fn greedy_actions(m: &Mdp, q: &ValueTable, tol: f64) -> Vec<Option<ActionId>> {
    (0..m.n_states())
        .map(|s| {
            let mut best: Option<(ActionId, f64)> = None;
            for &a in m.enabled(s) {
                let qa = q.q_at(s, a);
                match best {
                    None => best = Some((a, qa)),
                    Some((_, bq)) if qa > bq + tol => best = Some((a, qa)),
                    _ => {}
                }
            }
            best.map(|(a, _)| a)
        })
        .collect()
}
