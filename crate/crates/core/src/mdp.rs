//! Concrete tabular MDPs with numeric transition probabilities; also the
//! form taken by maximum-likelihood estimates.

use crate::pmdp::{ActionId, StateId};

/// A concrete MDP. A (state, action) pair with an empty successor list is
/// disabled; a state whose actions are all disabled is treated as absorbing
/// with reward zero by the solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    pub name: String,
    states: Vec<String>,
    actions: Vec<String>,
    initial: StateId,
    gamma: f64,
    r_max: f64,
    rewards: Vec<f64>,
    succ: Vec<Vec<(StateId, f64)>>,
    enabled: Vec<Vec<ActionId>>,
    intermediate: Vec<bool>,
}

impl Mdp {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        name: String,
        states: Vec<String>,
        actions: Vec<String>,
        initial: StateId,
        gamma: f64,
        r_max: f64,
        rewards: Vec<f64>,
        succ: Vec<Vec<(StateId, f64)>>,
        intermediate: Vec<bool>,
    ) -> Mdp {
        let n = states.len();
        let na = actions.len();
        let enabled = (0..n)
            .map(|s| (0..na).filter(|a| !succ[s * na + a].is_empty()).collect())
            .collect();
        Mdp {
            name,
            states,
            actions,
            initial,
            gamma,
            r_max,
            rewards,
            succ,
            enabled,
            intermediate,
        }
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Upper bound on any state value: R_max / (1 - gamma).
    pub fn v_max(&self) -> f64 {
        self.r_max / (1.0 - self.gamma)
    }

    #[inline]
    pub fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.actions.len() + a
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards[self.pair(s, a)]
    }

    pub fn successors(&self, s: StateId, a: ActionId) -> &[(StateId, f64)] {
        &self.succ[self.pair(s, a)]
    }

    pub fn enabled(&self, s: StateId) -> &[ActionId] {
        &self.enabled[s]
    }

    pub fn is_enabled(&self, s: StateId, a: ActionId) -> bool {
        !self.succ[self.pair(s, a)].is_empty()
    }

    pub fn is_intermediate(&self, s: StateId) -> bool {
        self.intermediate[s]
    }

    pub fn intermediate_flags(&self) -> &[bool] {
        &self.intermediate
    }

    /// Discount applied to steps leaving `s` (1 for compressed steps).
    #[inline]
    pub fn step_gamma(&self, s: StateId) -> f64 {
        if self.intermediate[s] {
            1.0
        } else {
            self.gamma
        }
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name)
    }

    /// A state is absorbing when every enabled action loops back to it with
    /// probability one. Used by rollouts to detect episode ends.
    pub fn is_absorbing(&self, s: StateId) -> bool {
        !self.enabled[s].is_empty()
            && self.enabled[s].iter().all(|&a| {
                let row = self.successors(s, a);
                row.len() == 1 && row[0].0 == s
            })
    }

    /// Checks that every enabled row is a probability distribution.
    pub fn validate(&self, tol: f64) -> Result<(), String> {
        for s in 0..self.n_states() {
            for &a in &self.enabled[s] {
                let row = self.successors(s, a);
                let mut sum = 0.0;
                for (t, p) in row {
                    if *p < 0.0 {
                        return Err(format!(
                            "negative probability {p} on ({}, {}, {})",
                            self.states[s], self.actions[a], self.states[*t]
                        ));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > tol {
                    return Err(format!(
                        "row ({}, {}) sums to {sum}",
                        self.states[s], self.actions[a]
                    ));
                }
            }
        }
        Ok(())
    }
}
