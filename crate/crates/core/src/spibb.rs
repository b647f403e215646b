//! Standard SPIBB: dataset counts, the MLE model, the uncertainty set, and
//! the bootstrapped improved policy.

use crate::mdp::Mdp;
use crate::pmdp::{ActionId, StateId};
use crate::solve::{policy_evaluation, value_iteration, Policy, SolveError, SolveParams};
use std::collections::{BTreeMap, BTreeSet};

/// Historical data: ordered (s, a, s') triples from behavior-policy
/// rollouts, with episode boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub env: String,
    pub seed: u64,
    pub behavior_id: String,
    pub triples: Vec<(StateId, ActionId, StateId)>,
    /// Indices into `triples` where episodes begin; always starts with 0.
    pub episode_starts: Vec<usize>,
}

impl Dataset {
    pub fn empty(env: impl Into<String>, seed: u64) -> Dataset {
        Dataset {
            env: env.into(),
            seed,
            behavior_id: String::new(),
            triples: Vec::new(),
            episode_starts: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// The first `n` steps, with episode boundaries clipped accordingly.
    pub fn prefix(&self, n: usize) -> Dataset {
        let n = n.min(self.triples.len());
        Dataset {
            env: self.env.clone(),
            seed: self.seed,
            behavior_id: self.behavior_id.clone(),
            triples: self.triples[..n].to_vec(),
            episode_starts: self
                .episode_starts
                .iter()
                .copied()
                .filter(|&b| b <= n)
                .collect(),
        }
    }
}

/// Visit counts: n_sa per pair and n_sas per transition.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    n_actions: usize,
    pub n_sa: Vec<u64>,
    pub n_sas: Vec<BTreeMap<StateId, u64>>,
}

impl CountTable {
    #[inline]
    pub fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.n_actions + a
    }

    pub fn sa(&self, s: StateId, a: ActionId) -> u64 {
        self.n_sa[self.pair(s, a)]
    }

    pub fn sas(&self, s: StateId, a: ActionId, t: StateId) -> u64 {
        self.n_sas[self.pair(s, a)].get(&t).copied().unwrap_or(0)
    }

    pub fn successors(&self, s: StateId, a: ActionId) -> &BTreeMap<StateId, u64> {
        &self.n_sas[self.pair(s, a)]
    }
}

/// Exact counts of pairs and transitions in a dataset.
pub fn count(d: &Dataset, n_states: usize, n_actions: usize) -> CountTable {
    let mut n_sa = vec![0u64; n_states * n_actions];
    let mut n_sas = vec![BTreeMap::new(); n_states * n_actions];
    for &(s, a, t) in &d.triples {
        let idx = s * n_actions + a;
        n_sa[idx] += 1;
        *n_sas[idx].entry(t).or_insert(0) += 1;
    }
    CountTable {
        n_actions,
        n_sa,
        n_sas,
    }
}

/// Shape information shared by the true model and its estimates: spaces,
/// rewards, discount, and the (possibly pruned) enabled action sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub name: String,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub initial: StateId,
    pub gamma: f64,
    pub r_max: f64,
    pub rewards: Vec<f64>,
    pub enabled: Vec<Vec<ActionId>>,
    pub intermediate: Vec<bool>,
}

impl Skeleton {
    #[inline]
    pub fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.actions.len() + a
    }

    pub fn reward(&self, s: StateId, a: ActionId) -> f64 {
        self.rewards[self.pair(s, a)]
    }

    pub fn is_enabled(&self, s: StateId, a: ActionId) -> bool {
        self.enabled[s].contains(&a)
    }

    pub fn enabled_pairs(&self) -> impl Iterator<Item = (StateId, ActionId)> + '_ {
        (0..self.states.len()).flat_map(move |s| self.enabled[s].iter().map(move |&a| (s, a)))
    }
}

/// Maximum-likelihood model: empirical frequencies where data exists;
/// unvisited actions are disabled.
pub fn mle_mdp(c: &CountTable, skeleton: &Skeleton) -> Mdp {
    let n = skeleton.states.len();
    let na = skeleton.actions.len();
    let mut succ = vec![Vec::new(); n * na];
    for (s, a) in skeleton.enabled_pairs() {
        let idx = s * na + a;
        let total = c.n_sa[idx];
        if total == 0 {
            continue;
        }
        succ[idx] = c.n_sas[idx]
            .iter()
            .map(|(&t, &k)| (t, k as f64 / total as f64))
            .collect();
    }
    Mdp::from_parts(
        format!("{}-mle", skeleton.name),
        skeleton.states.clone(),
        skeleton.actions.clone(),
        skeleton.initial,
        skeleton.gamma,
        skeleton.r_max,
        skeleton.rewards.clone(),
        succ,
        skeleton.intermediate.clone(),
    )
}

/// State-action pairs with too little data to deviate from the baseline.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UncertaintySet {
    pub pairs: BTreeSet<(StateId, ActionId)>,
}

impl UncertaintySet {
    pub fn contains(&self, s: StateId, a: ActionId) -> bool {
        self.pairs.contains(&(s, a))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pairs of the skeleton with fewer than `n_wedge` samples.
pub fn uncertainty_set(c: &CountTable, n_wedge: u64, skeleton: &Skeleton) -> UncertaintySet {
    let mut pairs = BTreeSet::new();
    for (s, a) in skeleton.enabled_pairs() {
        if c.sa(s, a) < n_wedge {
            pairs.insert((s, a));
        }
    }
    UncertaintySet { pairs }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpibbMode {
    /// Iterate the bootstrapped-greedy formula inside a policy-iteration
    /// loop until the policy stops changing.
    #[default]
    FixedPoint,
    /// Single application with the optimal Q of the MLE model.
    OneShot,
}

/// The improved policy: copies the baseline on uncertain pairs and
/// concentrates the remaining probability mass on the greedy action among
/// the non-bootstrapped ones. Ties break toward the lowest action index.
///
/// Baseline mass on pairs absent from the skeleton (pruned actions) joins
/// the redistributed mass. A state whose non-bootstrapped set is empty
/// copies the baseline row entirely.
pub fn spibb_policy(
    skeleton: &Skeleton,
    mle: &Mdp,
    pi_b: &Policy,
    u: &UncertaintySet,
    mode: SpibbMode,
    params: &SolveParams,
) -> Result<Policy, SolveError> {
    let first_q = value_iteration(mle, params)?;
    let mut pi = apply_bootstrap_formula(skeleton, mle, pi_b, u, |s, a| {
        if mle.is_enabled(s, a) {
            first_q.q_at(s, a)
        } else {
            skeleton.reward(s, a)
        }
    });
    if mode == SpibbMode::OneShot {
        return Ok(pi);
    }
    for _ in 0..200 {
        let table = policy_evaluation(mle, &pi, params)?;
        let next = apply_bootstrap_formula(skeleton, mle, pi_b, u, |s, a| {
            if mle.is_enabled(s, a) {
                table.q_at(s, a)
            } else {
                skeleton.reward(s, a)
            }
        });
        if next == pi {
            return Ok(pi);
        }
        pi = next;
    }
    Err(SolveError::NoConvergence {
        iterations: 200,
        residual: f64::NAN,
    })
}

fn apply_bootstrap_formula(
    skeleton: &Skeleton,
    _mle: &Mdp,
    pi_b: &Policy,
    u: &UncertaintySet,
    q: impl Fn(StateId, ActionId) -> f64,
) -> Policy {
    let n = skeleton.states.len();
    let na = skeleton.actions.len();
    let mut pi = Policy::zeroed(n, na);
    for s in 0..n {
        let enabled = &skeleton.enabled[s];
        let non_bootstrapped: Vec<ActionId> = enabled
            .iter()
            .copied()
            .filter(|&a| !u.contains(s, a))
            .collect();
        if non_bootstrapped.is_empty() {
            // Everything is uncertain: follow the baseline entirely.
            for a in 0..na {
                pi.set(s, a, pi_b.prob(s, a));
            }
            continue;
        }
        let mut bootstrapped_mass = 0.0;
        for &a in enabled {
            if u.contains(s, a) {
                let p = pi_b.prob(s, a);
                pi.set(s, a, p);
                bootstrapped_mass += p;
            }
        }
        let mut greedy = non_bootstrapped[0];
        let mut best = q(s, greedy);
        for &a in &non_bootstrapped[1..] {
            let qa = q(s, a);
            if qa > best {
                best = qa;
                greedy = a;
            }
        }
        pi.set(s, greedy, pi.prob(s, greedy) + (1.0 - bootstrapped_mass));
    }
    pi
}
