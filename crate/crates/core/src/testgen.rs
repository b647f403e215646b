//! Deterministic random-model generators and shared fixture models, used by
//! the property tests and the acceptance suite.

use crate::mdp::Mdp;
use crate::pmdp::{PMdp, PMdpBuilder};
use crate::poly::{Polynomial as P, Valuation};
use crate::solve::Policy;
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;

#[derive(Debug, Clone)]
pub struct GenOptions {
    pub min_states: usize,
    pub max_states: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    /// Probability that a branching pair gets parameter labels.
    pub param_prob: f64,
    /// Probability that a parametric pair reuses an existing label group.
    pub share_prob: f64,
    /// Floor for the raw weights a valuation draws per group.
    pub weight_floor: f64,
    pub nonnegative_rewards: bool,
    pub gamma: (i64, i64),
    pub r_max: i64,
}

impl Default for GenOptions {
    fn default() -> Self {
        GenOptions {
            min_states: 2,
            max_states: 8,
            max_actions: 3,
            max_successors: 3,
            param_prob: 0.7,
            share_prob: 0.5,
            weight_floor: 0.35,
            nonnegative_rewards: false,
            gamma: (9, 10),
            r_max: 5,
        }
    }
}

impl GenOptions {
    pub fn small() -> Self {
        GenOptions {
            max_states: 5,
            ..Default::default()
        }
    }

    /// Graphs suited to simulation oracles: few successors and fat
    /// probabilities, so hitting times stay short.
    pub fn simulation_friendly() -> Self {
        GenOptions {
            min_states: 3,
            max_states: 6,
            max_actions: 3,
            max_successors: 2,
            weight_floor: 0.6,
            ..Default::default()
        }
    }
}

/// A generated pMDP plus the label-group bookkeeping needed to sample
/// graph-preserving valuations for it.
#[derive(Debug, Clone)]
pub struct RandomPmdp {
    pub pmdp: PMdp,
    /// Per group: its parameter names (the group's arity is the length).
    groups: Vec<Vec<String>>,
    weight_floor: f64,
}

impl RandomPmdp {
    /// Samples a graph-preserving valuation: per label group, positive
    /// weights with a floor, normalized to sum to one.
    pub fn sample_valuation<R: Rng>(&self, rng: &mut R) -> Valuation {
        let mut v = Valuation::new();
        for group in &self.groups {
            let weights: Vec<f64> = group
                .iter()
                .map(|_| rng.random_range(self.weight_floor..1.0))
                .collect();
            let total: f64 = weights.iter().sum();
            for (name, w) in group.iter().zip(weights) {
                v.set(name, w / total);
            }
        }
        v
    }
}

/// Generates a random pMDP whose parametric pairs share whole label groups,
/// so graph-preserving valuations always exist and are easy to sample.
pub fn random_pmdp<R: Rng>(rng: &mut R, opts: &GenOptions) -> RandomPmdp {
    let n = rng.random_range(opts.min_states..=opts.max_states.max(opts.min_states));
    let na = rng.random_range(1..=opts.max_actions);
    let mut b = PMdpBuilder::new("random");
    b.set_gamma(BigRational::new(
        BigInt::from(opts.gamma.0),
        BigInt::from(opts.gamma.1),
    ));
    b.set_rmax(BigRational::from_integer(BigInt::from(opts.r_max)));
    for s in 0..n {
        b.add_state(format!("s{s}"));
    }
    for a in 0..na {
        b.add_action(format!("a{a}"));
    }
    b.set_initial(0);

    let mut groups: Vec<Vec<String>> = Vec::new();
    for s in 0..n {
        let n_enabled = rng.random_range(1..=na);
        let mut actions: Vec<usize> = (0..na).collect();
        for _ in 0..n_enabled {
            let idx = rng.random_range(0..actions.len());
            let a = actions.swap_remove(idx);
            let k = rng.random_range(1..=opts.max_successors.min(n));
            let mut pool: Vec<usize> = (0..n).collect();
            let mut succs = Vec::with_capacity(k);
            for _ in 0..k {
                let i = rng.random_range(0..pool.len());
                succs.push(pool.swap_remove(i));
            }
            succs.sort_unstable();
            if k == 1 {
                b.add_trans(s, a, succs[0], P::from_int(1));
            } else if rng.random_bool(opts.param_prob) {
                let reusable: Vec<usize> = (0..groups.len())
                    .filter(|&g| groups[g].len() == k)
                    .collect();
                let gid = if !reusable.is_empty() && rng.random_bool(opts.share_prob) {
                    reusable[rng.random_range(0..reusable.len())]
                } else {
                    let gid = groups.len();
                    let names: Vec<String> =
                        (0..k).map(|i| format!("g{gid}_{i}")).collect();
                    for name in &names {
                        b.add_param(name);
                    }
                    groups.push(names);
                    gid
                };
                for (i, &t) in succs.iter().enumerate() {
                    b.add_trans(s, a, t, P::var(groups[gid][i].clone()));
                }
            } else {
                // Distinct constant weights i/(k(k+1)/2).
                let denom = (k * (k + 1) / 2) as i64;
                for (i, &t) in succs.iter().enumerate() {
                    b.add_trans(s, a, t, P::from_ratio(i as i64 + 1, denom));
                }
            }
            if rng.random_bool(0.7) {
                let r = if opts.nonnegative_rewards {
                    rng.random_range(0..=opts.r_max)
                } else {
                    rng.random_range(-opts.r_max..=opts.r_max)
                };
                b.set_reward_int(s, a, r);
            }
        }
    }
    RandomPmdp {
        pmdp: b.build().expect("generated model is valid"),
        groups,
        weight_floor: opts.weight_floor,
    }
}

/// Random (s, a, s') triples drawn from the support graph: uniform over
/// enabled pairs, uniform over successors. Enough for counting tests.
pub fn random_support_triples<R: Rng>(
    m: &PMdp,
    rng: &mut R,
    n: usize,
) -> Vec<(usize, usize, usize)> {
    let pairs: Vec<(usize, usize)> = m.enabled_pairs().collect();
    (0..n)
        .map(|_| {
            let (s, a) = pairs[rng.random_range(0..pairs.len())];
            let row = m.transitions(s, a);
            let (t, _) = &row[rng.random_range(0..row.len())];
            (s, a, *t)
        })
        .collect()
}

/// Random stochastic policy over the enabled actions of each state.
pub fn random_policy<R: Rng>(m: &Mdp, rng: &mut R) -> Policy {
    let mut pi = Policy::zeroed(m.n_states(), m.n_actions());
    for s in 0..m.n_states() {
        let acts = m.enabled(s);
        if acts.is_empty() {
            continue;
        }
        let weights: Vec<f64> = acts.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for (&a, w) in acts.iter().zip(weights) {
            pi.set(s, a, w / total);
        }
    }
    pi
}

/// Ten-state model where both the strict and the non-strict case of
/// antagonistic/cooperative pruning fire at the initial state: one action
/// keeps a safe escape route that strictly improves the worst case, one
/// action is merely tied with the worst case, and one action risks a
/// punishing sink.
pub fn prune_showcase() -> PMdp {
    let mut b = PMdpBuilder::new("prune-showcase");
    b.set_gamma(BigRational::new(BigInt::from(95), BigInt::from(100)));
    b.set_rmax(BigRational::from_integer(BigInt::from(10)));
    for p in ["xa", "xb", "xc"] {
        b.add_param(p);
    }
    let s: Vec<usize> = (0..10).map(|i| b.add_state(format!("s{i}"))).collect();
    let a = b.add_action("a");
    let bb = b.add_action("b");
    let c = b.add_action("c");
    b.set_initial(s[0]);
    let split = |p: &str| (P::var(p), P::from_int(1).sub(&P::var(p)));
    let (xa, xa1) = split("xa");
    let (xb, xb1) = split("xb");
    let (xc, xc1) = split("xc");
    b.add_trans(s[0], a, s[1], xa);
    b.add_trans(s[0], a, s[2], xa1);
    b.add_trans(s[0], bb, s[3], xb);
    b.add_trans(s[0], bb, s[4], xb1);
    b.add_trans(s[0], c, s[5], xc);
    b.add_trans(s[0], c, s[6], xc1);
    // Single-action continuations.
    b.add_trans(s[1], a, s[0], P::from_int(1));
    b.add_trans(s[2], a, s[9], P::from_int(1));
    b.set_reward_int(s[2], a, 5);
    b.add_trans(s[3], a, s[3], P::from_int(1));
    b.add_trans(s[4], a, s[4], P::from_int(1));
    b.add_trans(s[5], a, s[8], P::from_int(1));
    b.set_reward_int(s[5], a, -1);
    b.add_trans(s[6], a, s[7], P::from_int(1));
    b.set_reward_int(s[6], a, -5);
    b.add_trans(s[7], a, s[7], P::from_int(1));
    b.set_reward_int(s[7], a, -10);
    b.add_trans(s[8], a, s[8], P::from_int(1));
    b.set_reward_int(s[8], a, -10);
    b.add_trans(s[9], a, s[9], P::from_int(1));
    b.build().unwrap()
}

/// Four-state, one-parameter model where one initial action is dominated at
/// every graph-preserving valuation (its success needs two lucky draws
/// instead of one) but not separable by the antagonistic bound alone.
pub fn dominated_action_example() -> PMdp {
    let mut b = PMdpBuilder::new("dominated-action");
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
