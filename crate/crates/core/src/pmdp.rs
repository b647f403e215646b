//! Parametric MDPs: finite state/action spaces with transition probabilities
//! given as canonical polynomials over named parameters.

use crate::mdp::Mdp;
use crate::poly::{Polynomial, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type StateId = usize;
pub type ActionId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("model has no states")]
    NoStates,
    #[error("model has no actions")]
    NoActions,
    #[error("gamma must lie strictly between 0 and 1, got {0}")]
    GammaOutOfRange(String),
    #[error("reward {value} for ({state}, {action}) exceeds rmax {rmax}")]
    RewardOutOfBound {
        state: String,
        action: String,
        value: String,
        rmax: String,
    },
    #[error("state `{0}` has no enabled action")]
    StateWithoutActions(String),
    #[error("transition ({state}, {action}, {succ}) has a syntactically zero label")]
    ZeroLabel {
        state: String,
        action: String,
        succ: String,
    },
    #[error("transition label for ({state}, {action}, {succ}) uses undeclared parameter `{param}`")]
    UndeclaredParam {
        state: String,
        action: String,
        succ: String,
        param: String,
    },
    #[error("intermediate state `{0}` must have exactly one enabled action with zero reward")]
    BadIntermediate(String),
    #[error("intermediate state `{0}` has an intermediate successor")]
    ChainedIntermediate(String),
    #[error("valuation is not graph-preserving for this model")]
    NotGraphPreserving,
    #[error("duplicate successor labels at ({state}, {action}): run normalize_distinct_labels first")]
    DuplicateLabels { state: String, action: String },
    #[error("unknown state `{0}`")]
    UnknownState(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
}

/// A parametric MDP. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PMdp {
    pub name: String,
    states: Vec<String>,
    actions: Vec<String>,
    params: Vec<String>,
    initial: StateId,
    gamma: BigRational,
    r_max: BigRational,
    /// Dense (state, action) indexing: `s * n_actions + a`.
    rewards: Vec<BigRational>,
    /// Per pair, successors sorted by state id; empty means disabled.
    trans: Vec<Vec<(StateId, Polynomial)>>,
    enabled: Vec<Vec<ActionId>>,
    /// Compressed-step flag: steps out of these states apply no discount and
    /// no reward, so a label-split detour counts as part of its parent step.
    intermediate: Vec<bool>,
}

impl PMdp {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn gamma(&self) -> &BigRational {
        &self.gamma
    }

    pub fn gamma_f64(&self) -> f64 {
        self.gamma.to_f64().expect("gamma fits in f64")
    }

    pub fn r_max(&self) -> &BigRational {
        &self.r_max
    }

    pub fn r_max_f64(&self) -> f64 {
        self.r_max.to_f64().expect("rmax fits in f64")
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name)
    }

    pub fn action_id(&self, name: &str) -> Option<ActionId> {
        self.actions.iter().position(|a| a == name)
    }

    #[inline]
    pub fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.actions.len() + a
    }

    pub fn enabled(&self, s: StateId) -> &[ActionId] {
        &self.enabled[s]
    }

    pub fn is_enabled(&self, s: StateId, a: ActionId) -> bool {
        !self.trans[self.pair(s, a)].is_empty()
    }

    /// Successor/label list of an enabled pair, sorted by successor id.
    pub fn transitions(&self, s: StateId, a: ActionId) -> &[(StateId, Polynomial)] {
        &self.trans[self.pair(s, a)]
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> &BigRational {
        &self.rewards[self.pair(s, a)]
    }

    pub fn reward_f64(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards[self.pair(s, a)].to_f64().expect("reward fits in f64")
    }

    pub fn is_intermediate(&self, s: StateId) -> bool {
        self.intermediate[s]
    }

    pub fn intermediate_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.n_states()).filter(|&s| self.intermediate[s])
    }

    /// All enabled (state, action) pairs, in index order.
    pub fn enabled_pairs(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        (0..self.n_states())
            .flat_map(move |s| self.enabled[s].iter().map(move |&a| (s, a)))
    }

    /// Discount applied to steps leaving `s` (1 for compressed steps).
    pub fn step_gamma_f64(&self, s: StateId) -> f64 {
        if self.intermediate[s] {
            1.0
        } else {
            self.gamma_f64()
        }
    }

    pub fn step_gamma(&self, s: StateId) -> BigRational {
        if self.intermediate[s] {
            BigRational::one()
        } else {
            self.gamma.clone()
        }
    }

    /// Checks the three graph-preserving conditions at `v`: rows sum to 1
    /// within `tol`, probabilities lie in [0, 1], and every labeled
    /// transition keeps a strictly positive probability. Positivity and the
    /// range bounds are checked in exact arithmetic.
    pub fn is_graph_preserving(&self, v: &Valuation, tol: f64) -> bool {
        let exact = v.to_exact();
        let one = BigRational::one();
        let tol = BigRational::from_float(tol).expect("finite tol");
        for (s, a) in self.enabled_pairs() {
            let mut sum = BigRational::zero();
            for (_, label) in self.transitions(s, a) {
                let p = match label.eval_exact(&exact) {
                    Ok(p) => p,
                    Err(_) => return false,
                };
                if !p.is_positive() || p > one {
                    return false;
                }
                sum += p;
            }
            if (sum - &one).abs() > tol {
                return false;
            }
        }
        true
    }

    /// Instantiate into a concrete MDP at a graph-preserving valuation.
    pub fn instantiate(&self, v: &Valuation, tol: f64) -> Result<Mdp, ModelError> {
        if !self.is_graph_preserving(v, tol) {
            return Err(ModelError::NotGraphPreserving);
        }
        let n = self.n_states();
        let na = self.n_actions();
        let mut succ = vec![Vec::new(); n * na];
        for (s, a) in self.enabled_pairs() {
            let row: Vec<(StateId, f64)> = self
                .transitions(s, a)
                .iter()
                .map(|(t, label)| (*t, label.eval(v).expect("checked by gp test")))
                .collect();
            succ[self.pair(s, a)] = row;
        }
        let rewards = self.rewards.iter().map(|r| r.to_f64().unwrap()).collect();
        Ok(Mdp::from_parts(
            self.name.clone(),
            self.states.clone(),
            self.actions.clone(),
            self.initial,
            self.gamma_f64(),
            self.r_max_f64(),
            rewards,
            succ,
            self.intermediate.clone(),
        ))
    }

    /// A shape-only concrete view: enabled sets, rewards and discount as
    /// f64, no probabilities. Used as the skeleton for MLE models.
    pub fn skeleton(&self) -> crate::spibb::Skeleton {
        crate::spibb::Skeleton {
            name: self.name.clone(),
            states: self.states.clone(),
            actions: self.actions.clone(),
            initial: self.initial,
            gamma: self.gamma_f64(),
            r_max: self.r_max_f64(),
            rewards: self.rewards.iter().map(|r| r.to_f64().unwrap()).collect(),
            enabled: self.enabled.clone(),
            intermediate: self.intermediate.clone(),
        }
    }

    /// The same model with a different discount factor.
    pub fn with_gamma(&self, gamma: BigRational) -> Result<PMdp, ModelError> {
        if gamma <= BigRational::zero() || gamma >= BigRational::one() {
            return Err(ModelError::GammaOutOfRange(gamma.to_string()));
        }
        let mut out = self.clone();
        out.gamma = gamma;
        Ok(out)
    }

    /// The same model with every reward (and the reward bound) scaled by a
    /// positive factor.
    pub fn scale_rewards(&self, factor: &BigRational) -> PMdp {
        assert!(factor.is_positive(), "reward scale must be positive");
        let mut out = self.clone();
        for r in &mut out.rewards {
            *r *= factor;
        }
        out.r_max *= factor;
        out
    }

    /// Restrict to pairs accepted by `keep`. States and actions are
    /// preserved; only transitions and rewards of dropped pairs vanish.
    pub fn retain_pairs(&self, keep: impl Fn(StateId, ActionId) -> bool) -> PMdp {
        let mut out = self.clone();
        for s in 0..self.n_states() {
            for &a in &self.enabled[s] {
                if !keep(s, a) {
                    let idx = out.pair(s, a);
                    out.trans[idx].clear();
                }
            }
            out.enabled[s] = (0..self.n_actions())
                .filter(|&a| !out.trans[out.pair(s, a)].is_empty())
                .collect();
        }
        out
    }

    /// Rewrites every state-action pair whose successors share identical
    /// polynomial labels: each duplicate group is routed through a fresh
    /// zero-reward intermediate state carrying the summed label, followed by
    /// a uniform split over the original successors. Values of all policies
    /// on the original states are preserved exactly because the inserted
    /// step is compressed (no discount, no reward).
    ///
    /// Returns the model unchanged when no duplicates exist. Intermediate
    /// pairs themselves keep their uniform constant labels; the distinctness
    /// guarantee applies to non-intermediate pairs.
    pub fn normalize_distinct_labels(&self) -> PMdp {
        let mut has_dups = false;
        'outer: for (s, a) in self.enabled_pairs() {
            if self.intermediate[s] {
                continue;
            }
            let row = self.transitions(s, a);
            for i in 1..row.len() {
                if row[..i].iter().any(|(_, l)| *l == row[i].1) {
                    has_dups = true;
                    break 'outer;
                }
            }
        }
        if !has_dups {
            return self.clone();
        }

        let mut b = PMdpBuilder::new(&self.name);
        b.set_gamma(self.gamma.clone());
        b.set_rmax(self.r_max.clone());
        for p in &self.params {
            b.add_param(p);
        }
        for st in &self.states {
            b.add_state(st);
        }
        for ac in &self.actions {
            b.add_action(ac);
        }
        b.set_initial(self.initial);
        for s in 0..self.n_states() {
            if self.intermediate[s] {
                b.mark_intermediate(s);
            }
        }

        for (s, a) in self.enabled_pairs() {
            if !self.rewards[self.pair(s, a)].is_zero() {
                b.set_reward(s, a, self.rewards[self.pair(s, a)].clone());
            }
            if self.intermediate[s] {
                for (t, label) in self.transitions(s, a) {
                    b.add_trans(s, a, *t, label.clone());
                }
                continue;
            }
            // Group successors by label.
            let mut groups: Vec<(Polynomial, Vec<StateId>)> = Vec::new();
            for (t, label) in self.transitions(s, a) {
                match groups.iter_mut().find(|(l, _)| l == label) {
                    Some((_, members)) => members.push(*t),
                    None => groups.push((label.clone(), vec![*t])),
                }
            }
            for (label, members) in groups {
                if members.len() == 1 {
                    b.add_trans(s, a, members[0], label);
                } else {
                    let k = members.len();
                    let mut fresh_name = format!(
                        "{}__{}__split{}",
                        self.states[s], self.actions[a], members[0]
                    );
                    while b.state_names().contains(&fresh_name) {
                        fresh_name.push('_');
                    }
                    let fresh = b.add_state(fresh_name);
                    b.mark_intermediate(fresh);
                    let k_rat = BigRational::from_integer(BigInt::from(k as i64));
                    b.add_trans(s, a, fresh, label.scale(&k_rat));
                    let share = Polynomial::constant(k_rat.recip());
                    for t in members {
                        b.add_trans(fresh, a, t, share.clone());
                    }
                }
            }
        }
        b.build().expect("rewrite of a valid model stays valid")
    }

    /// True when no non-intermediate pair has two successors with the same
    /// canonical label.
    pub fn has_distinct_labels(&self) -> bool {
        for (s, a) in self.enabled_pairs() {
            if self.intermediate[s] {
                continue;
            }
            let row = self.transitions(s, a);
            for i in 1..row.len() {
                if row[..i].iter().any(|(_, l)| *l == row[i].1) {
                    return false;
                }
            }
        }
        true
    }
}

/// Incremental construction of a [`PMdp`]; `build` validates the result.
#[derive(Debug, Clone)]
pub struct PMdpBuilder {
    name: String,
    states: Vec<String>,
    state_ids: BTreeMap<String, StateId>,
    actions: Vec<String>,
    action_ids: BTreeMap<String, ActionId>,
    params: Vec<String>,
    initial: Option<StateId>,
    gamma: BigRational,
    r_max: BigRational,
    rewards: BTreeMap<(StateId, ActionId), BigRational>,
    trans: BTreeMap<(StateId, ActionId), BTreeMap<StateId, Polynomial>>,
    intermediate: BTreeSet<StateId>,
}

impl PMdpBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        PMdpBuilder {
            name: name.into(),
            states: Vec::new(),
            state_ids: BTreeMap::new(),
            actions: Vec::new(),
            action_ids: BTreeMap::new(),
            params: Vec::new(),
            initial: None,
            gamma: BigRational::new(BigInt::from(95), BigInt::from(100)),
            r_max: BigRational::one(),
            rewards: BTreeMap::new(),
            trans: BTreeMap::new(),
            intermediate: BTreeSet::new(),
        }
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    /// Adds a state (idempotent per name) and returns its id.
    pub fn add_state(&mut self, name: impl Into<String>) -> StateId {
        let name = name.into();
        if let Some(&id) = self.state_ids.get(&name) {
            return id;
        }
        let id = self.states.len();
        self.states.push(name.clone());
        self.state_ids.insert(name, id);
        id
    }

    pub fn add_action(&mut self, name: impl Into<String>) -> ActionId {
        let name = name.into();
        if let Some(&id) = self.action_ids.get(&name) {
            return id;
        }
        let id = self.actions.len();
        self.actions.push(name.clone());
        self.action_ids.insert(name, id);
        id
    }

    pub fn add_param(&mut self, name: impl Into<String>) {
        let name = name.into();
        if !self.params.contains(&name) {
            self.params.push(name);
        }
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial = Some(s);
    }

    pub fn set_gamma(&mut self, gamma: BigRational) {
        self.gamma = gamma;
    }

    pub fn set_rmax(&mut self, r_max: BigRational) {
        self.r_max = r_max;
    }

    pub fn set_reward(&mut self, s: StateId, a: ActionId, r: BigRational) {
        self.rewards.insert((s, a), r);
    }

    pub fn set_reward_int(&mut self, s: StateId, a: ActionId, r: i64) {
        self.set_reward(s, a, BigRational::from_integer(BigInt::from(r)));
    }

    /// Adds a labeled transition. Labels for an existing (s, a, s') entry
    /// accumulate by polynomial addition (clamped moves may collide).
    pub fn add_trans(&mut self, s: StateId, a: ActionId, succ: StateId, label: Polynomial) {
        let row = self.trans.entry((s, a)).or_default();
        match row.get_mut(&succ) {
            Some(existing) => *existing = existing.add(&label),
            None => {
                row.insert(succ, label);
            }
        }
    }

    pub fn mark_intermediate(&mut self, s: StateId) {
        self.intermediate.insert(s);
    }

    pub fn build(self) -> Result<PMdp, ModelError> {
        if self.states.is_empty() {
            return Err(ModelError::NoStates);
        }
        if self.actions.is_empty() {
            return Err(ModelError::NoActions);
        }
        if self.gamma <= BigRational::zero() || self.gamma >= BigRational::one() {
            return Err(ModelError::GammaOutOfRange(self.gamma.to_string()));
        }
        let n = self.states.len();
        let na = self.actions.len();
        let mut rewards = vec![BigRational::zero(); n * na];
        for ((s, a), r) in &self.rewards {
            if r.abs() > self.r_max {
                return Err(ModelError::RewardOutOfBound {
                    state: self.states[*s].clone(),
                    action: self.actions[*a].clone(),
                    value: r.to_string(),
                    rmax: self.r_max.to_string(),
                });
            }
            rewards[s * na + a] = r.clone();
        }
        let mut trans = vec![Vec::new(); n * na];
        let declared: BTreeSet<&str> = self.params.iter().map(|p| p.as_str()).collect();
        for ((s, a), row) in &self.trans {
            let mut entries: Vec<(StateId, Polynomial)> = Vec::with_capacity(row.len());
            for (succ, label) in row {
                if label.is_zero() {
                    return Err(ModelError::ZeroLabel {
                        state: self.states[*s].clone(),
                        action: self.actions[*a].clone(),
                        succ: self.states[*succ].clone(),
                    });
                }
                for p in label.params() {
                    if !declared.contains(p.as_str()) {
                        return Err(ModelError::UndeclaredParam {
                            state: self.states[*s].clone(),
                            action: self.actions[*a].clone(),
                            succ: self.states[*succ].clone(),
                            param: p,
                        });
                    }
                }
                entries.push((*succ, label.clone()));
            }
            entries.sort_by_key(|(t, _)| *t);
            trans[s * na + a] = entries;
        }
        let enabled: Vec<Vec<ActionId>> = (0..n)
            .map(|s| (0..na).filter(|a| !trans[s * na + a].is_empty()).collect())
            .collect();
        for s in 0..n {
            if enabled[s].is_empty() {
                return Err(ModelError::StateWithoutActions(self.states[s].clone()));
            }
        }
        let mut intermediate = vec![false; n];
        for &s in &self.intermediate {
            intermediate[s] = true;
        }
        for s in 0..n {
            if !intermediate[s] {
                continue;
            }
            let ok = enabled[s].len() == 1
                && enabled[s]
                    .iter()
                    .all(|&a| rewards[s * na + a].is_zero());
            if !ok {
                return Err(ModelError::BadIntermediate(self.states[s].clone()));
            }
            for &a in &enabled[s] {
                for (t, _) in &trans[s * na + a] {
                    if intermediate[*t] {
                        return Err(ModelError::ChainedIntermediate(self.states[s].clone()));
                    }
                }
            }
        }
        let initial = self.initial.unwrap_or(0);
        Ok(PMdp {
            name: self.name,
            states: self.states,
            actions: self.actions,
            params: self.params,
            initial,
            gamma: self.gamma,
            r_max: self.r_max,
            rewards,
            trans,
            enabled,
            intermediate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial as P;
    use crate::testgen;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    /// The 4-state model used by the SMT pruning example: two actions from
    /// the initial state, an intermediate good path, and absorbing sinks.
    pub fn smt_example() -> PMdp {
        let mut b = PMdpBuilder::new("smt-example");
        b.set_gamma(BigRational::new(BigInt::from(9), BigInt::from(10)));
        b.set_rmax(BigRational::from_integer(BigInt::from(20)));
        b.add_param("p");
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let s2 = b.add_state("s2");
        let s3 = b.add_state("s3");
        let a = b.add_action("a");
        let bb = b.add_action("b");
        b.set_initial(s0);
        let p = P::var("p");
        let q = P::from_int(1).sub(&p);
        b.add_trans(s0, a, s1, p.clone());
        b.add_trans(s0, a, s3, q.clone());
        b.add_trans(s0, bb, s2, p.clone());
        b.add_trans(s0, bb, s3, q.clone());
        b.add_trans(s1, a, s2, p.clone());
        b.add_trans(s1, a, s3, q);
        b.add_trans(s2, a, s2, P::from_int(1));
        b.add_trans(s3, a, s3, P::from_int(1));
        b.set_reward_int(s2, a, 20);
        b.set_reward_int(s3, a, -5);
        b.build().unwrap()
    }

    #[test]
    fn graph_preserving_checks() {
        let m = smt_example();
        assert!(m.is_graph_preserving(&Valuation::from_pairs([("p", 0.5)]), 1e-9));
        // p = 0 zeroes a labeled transition: condition 3 violated.
        assert!(!m.is_graph_preserving(&Valuation::from_pairs([("p", 0.0)]), 1e-9));
        // p = 1.5 breaks the [0, 1] range: condition 2 violated.
        assert!(!m.is_graph_preserving(&Valuation::from_pairs([("p", 1.5)]), 1e-9));
        // p = 1 zeroes the 1-p label.
        assert!(!m.is_graph_preserving(&Valuation::from_pairs([("p", 1.0)]), 1e-9));
    }

    #[test]
    fn instantiate_matches_labels() {
        let m = smt_example();
        let mdp = m
            .instantiate(&Valuation::from_pairs([("p", 0.5)]), 1e-9)
            .unwrap();
        let s0 = m.state_id("s0").unwrap();
        let a = m.action_id("a").unwrap();
        let row = mdp.successors(s0, a);
        assert_eq!(row.len(), 2);
        assert!((row[0].1 - 0.5).abs() < 1e-12);
        assert!((row[1].1 - 0.5).abs() < 1e-12);
        assert!(m
            .instantiate(&Valuation::from_pairs([("p", 0.0)]), 1e-9)
            .is_err());
    }

    #[test]
    fn instantiate_constant_model_is_identity() {
        let mut b = PMdpBuilder::new("const");
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let a = b.add_action("a");
        b.add_trans(s0, a, s0, P::from_ratio(1, 4));
        b.add_trans(s0, a, s1, P::from_ratio(3, 4));
        b.add_trans(s1, a, s1, P::from_int(1));
        let m = b.build().unwrap();
        let mdp = m.instantiate(&Valuation::new(), 1e-9).unwrap();
        let row = mdp.successors(0, 0);
        assert_eq!(row, &[(0, 0.25), (1, 0.75)]);
    }

    #[test]
    fn rows_stay_stochastic_on_random_models() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..50 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::default());
            let v = gen.sample_valuation(&mut rng);
            let mdp = gen.pmdp.instantiate(&v, 1e-9).unwrap();
            for (s, a) in gen.pmdp.enabled_pairs() {
                let sum: f64 = mdp.successors(s, a).iter().map(|(_, p)| p).sum();
                assert!((sum - 1.0).abs() <= 1e-9, "row ({s},{a}) sums to {sum}");
            }
        }
    }

    #[test]
    fn normalize_identity_when_already_distinct() {
        let m = smt_example();
        let n = m.normalize_distinct_labels();
        assert_eq!(m, n);
    }

    #[test]
    fn normalize_splits_duplicate_labels() {
        let mut b = PMdpBuilder::new("dup");
        b.add_param("x");
        let s0 = b.add_state("s0");
        let s1 = b.add_state("s1");
        let s2 = b.add_state("s2");
        let s3 = b.add_state("s3");
        let a = b.add_action("a");
        let x = P::var("x");
        b.add_trans(s0, a, s1, x.clone());
        b.add_trans(s0, a, s2, x.clone());
        b.add_trans(s0, a, s3, P::from_int(1).sub(&x.scale(&BigRational::from_integer(BigInt::from(2)))));
        for t in [s1, s2, s3] {
            b.add_trans(t, a, t, P::from_int(1));
        }
        let m = b.build().unwrap();
        let n = m.normalize_distinct_labels();
        assert!(n.has_distinct_labels());
        assert_eq!(n.n_states(), 5);
        let fresh = 4;
        assert!(n.is_intermediate(fresh));
        // s0 -a-> fresh carries 2x, fresh splits 1/2, 1/2.
        let label = n
            .transitions(s0, a)
            .iter()
            .find(|(t, _)| *t == fresh)
            .map(|(_, l)| l.clone())
            .unwrap();
        assert_eq!(label, x.scale(&BigRational::from_integer(BigInt::from(2))));
        let split = n.transitions(fresh, a);
        assert_eq!(split.len(), 2);
        assert_eq!(split[0].1, P::from_ratio(1, 2));

        // Instantiated two-hop probability equals the original one-hop
        // probability under 5 random valuations.
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..5 {
            use rand::Rng;
            let xv: f64 = rng.random_range(0.05..0.45);
            let v = Valuation::from_pairs([("x", xv)]);
            let orig = m.instantiate(&v, 1e-9).unwrap();
            let norm = n.instantiate(&v, 1e-9).unwrap();
            let p_orig = orig
                .successors(s0, a)
                .iter()
                .find(|(t, _)| *t == s1)
                .unwrap()
                .1;
            let via = norm
                .successors(s0, a)
                .iter()
                .find(|(t, _)| *t == fresh)
                .unwrap()
                .1;
            let half = norm
                .successors(fresh, a)
                .iter()
                .find(|(t, _)| *t == s1)
                .unwrap()
                .1;
            assert!((p_orig - via * half).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_three_way_split_is_uniform() {
        let mut b = PMdpBuilder::new("dup3");
        b.add_param("x");
        let s0 = b.add_state("s0");
        let succs = [b.add_state("t1"), b.add_state("t2"), b.add_state("t3")];
        let s4 = b.add_state("rest");
        let a = b.add_action("a");
        let x = P::var("x");
        for t in succs {
            b.add_trans(s0, a, t, x.clone());
            b.add_trans(t, a, t, P::from_int(1));
        }
        b.add_trans(s0, a, s4, P::from_int(1).sub(&x.scale(&BigRational::from_integer(BigInt::from(3)))));
        b.add_trans(s4, a, s4, P::from_int(1));
        let m = b.build().unwrap();
        let n = m.normalize_distinct_labels();
        let fresh = n.n_states() - 1;
        assert!(n.is_intermediate(fresh));
        let split = n.transitions(fresh, a);
        assert_eq!(split.len(), 3);
        for (_, l) in split {
            assert_eq!(*l, P::from_ratio(1, 3));
        }
    }

    #[test]
    fn builder_rejects_zero_labels_and_bad_gamma() {
        let mut b = PMdpBuilder::new("bad");
        b.add_param("x");
        let s0 = b.add_state("s0");
        let a = b.add_action("a");
        let zero = P::var("x").sub(&P::var("x"));
        b.add_trans(s0, a, s0, zero);
        assert!(matches!(b.build(), Err(ModelError::ZeroLabel { .. })));

        let mut b = PMdpBuilder::new("bad-gamma");
        let s0 = b.add_state("s0");
        let a = b.add_action("a");
        b.add_trans(s0, a, s0, P::from_int(1));
        b.set_gamma(BigRational::one());
        assert!(matches!(b.build(), Err(ModelError::GammaOutOfRange(_))));
    }
}
