//! Game-based analysis of pMDPs over their support graphs: antagonistic and
//! cooperative value fixpoints, improving transitions, almost-sure
//! reachability, and sound action pruning.
//!
//! Everything here reads only the supports of the transition distributions,
//! never concrete probabilities, so the results hold for every
//! graph-preserving valuation.

use crate::pmdp::{ActionId, PMdp, StateId};
use crate::solve::{Policy, SolveError};
use num_rational::BigRational;
use num_traits::Zero;
use std::collections::BTreeSet;

/// Worst-case (antagonistic) and best-case (cooperative) state values.
#[derive(Debug, Clone)]
pub struct GameValues {
    pub aval: Vec<f64>,
    pub cval: Vec<f64>,
}

/// Margin below which two backed-up values count as tied. Inequalities are
/// strict only beyond this fraction of the value scale.
pub fn strictness_tol(m: &PMdp) -> f64 {
    let v_max = m.r_max_f64() / (1.0 - m.gamma_f64());
    1e-7 * v_max.max(1.0)
}

fn min_backup(m: &PMdp, s: StateId, a: ActionId, aval: &[f64]) -> f64 {
    let worst = m
        .transitions(s, a)
        .iter()
        .map(|(t, _)| aval[*t])
        .fold(f64::INFINITY, f64::min);
    m.reward_f64(s, a) + m.step_gamma_f64(s) * worst
}

fn max_backup(m: &PMdp, s: StateId, a: ActionId, cval: &[f64]) -> f64 {
    let best = m
        .transitions(s, a)
        .iter()
        .map(|(t, _)| cval[*t])
        .fold(f64::NEG_INFINITY, f64::max);
    m.reward_f64(s, a) + m.step_gamma_f64(s) * best
}

/// Fixpoint of the antagonistic and cooperative Bellman equations, by value
/// iteration from zero. Depends only on the support graph.
pub fn aval_cval(m: &PMdp, tol: f64, max_iter: u64) -> Result<GameValues, SolveError> {
    let n = m.n_states();
    let mut aval = vec![0.0; n];
    let mut cval = vec![0.0; n];
    for _ in 0..max_iter {
        let mut residual: f64 = 0.0;
        let mut a_next = vec![0.0; n];
        let mut c_next = vec![0.0; n];
        for s in 0..n {
            let mut best_a = f64::NEG_INFINITY;
            let mut best_c = f64::NEG_INFINITY;
            for &a in m.enabled(s) {
                best_a = best_a.max(min_backup(m, s, a, &aval));
                best_c = best_c.max(max_backup(m, s, a, &cval));
            }
            a_next[s] = best_a;
            c_next[s] = best_c;
            residual = residual
                .max((a_next[s] - aval[s]).abs())
                .max((c_next[s] - cval[s]).abs());
        }
        aval = a_next;
        cval = c_next;
        if residual <= tol {
            return Ok(GameValues { aval, cval });
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

/// Game values under a fixed policy: both the action choice (within the
/// policy's support) and the successor are resolved antagonistically for
/// `aval`, cooperatively for `cval`.
pub fn aval_cval_policy(
    m: &PMdp,
    pi: &Policy,
    tol: f64,
    max_iter: u64,
) -> Result<GameValues, SolveError> {
    let n = m.n_states();
    let support: Vec<Vec<ActionId>> = (0..n)
        .map(|s| {
            m.enabled(s)
                .iter()
                .copied()
                .filter(|&a| pi.prob(s, a) > 0.0)
                .collect()
        })
        .collect();
    let mut aval = vec![0.0; n];
    let mut cval = vec![0.0; n];
    for _ in 0..max_iter {
        let mut residual: f64 = 0.0;
        let mut a_next = vec![0.0; n];
        let mut c_next = vec![0.0; n];
        for s in 0..n {
            let acts: &[ActionId] = if support[s].is_empty() {
                m.enabled(s)
            } else {
                &support[s]
            };
            let mut worst = f64::INFINITY;
            let mut best = f64::NEG_INFINITY;
            for &a in acts {
                worst = worst.min(min_backup(m, s, a, &aval));
                best = best.max(max_backup(m, s, a, &cval));
            }
            a_next[s] = worst;
            c_next[s] = best;
            residual = residual
                .max((a_next[s] - aval[s]).abs())
                .max((c_next[s] - cval[s]).abs());
        }
        aval = a_next;
        cval = c_next;
        if residual <= tol {
            return Ok(GameValues { aval, cval });
        }
    }
    Err(SolveError::NoConvergence {
        iterations: max_iter,
        residual: f64::NAN,
    })
}

// ---------------------------------------------------------------------------
// Exact antagonistic values
// ---------------------------------------------------------------------------

/// Exact antagonistic values by strategy iteration: the maximizer's strategy
/// is improved against an exactly solved minimizing best response. The
/// result is verified against the Bellman equations in exact arithmetic.
/// Used where the values become constants of SMT queries.
pub fn aval_exact(m: &PMdp) -> Vec<BigRational> {
    let n = m.n_states();
    let mut sigma: Vec<ActionId> = (0..n).map(|s| m.enabled(s)[0]).collect();
    let mut tau: Vec<StateId> = (0..n)
        .map(|s| m.transitions(s, sigma[s])[0].0)
        .collect();
    let mut values = solve_functional(m, &sigma, &tau);
    for _ in 0..10_000 {
        // Minimizing best response for the fixed sigma.
        loop {
            let mut changed = false;
            for s in 0..n {
                let row = m.transitions(s, sigma[s]);
                let mut best = tau[s];
                for (t, _) in row {
                    if values[*t] < values[best] {
                        best = *t;
                    }
                }
                if best != tau[s] {
                    tau[s] = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            values = solve_functional(m, &sigma, &tau);
        }
        // Maximizer improvement against the converged response.
        let mut changed = false;
        for s in 0..n {
            let mut best_a = sigma[s];
            let mut best_q = exact_min_backup(m, s, sigma[s], &values);
            for &a in m.enabled(s) {
                if a == sigma[s] {
                    continue;
                }
                let q = exact_min_backup(m, s, a, &values);
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            if best_a != sigma[s] {
                sigma[s] = best_a;
                tau[s] = m.transitions(s, best_a)[0].0;
                changed = true;
            }
        }
        if !changed {
            // Converged; check the Bellman equations exactly.
            for s in 0..n {
                let best = m
                    .enabled(s)
                    .iter()
                    .map(|&a| exact_min_backup(m, s, a, &values))
                    .max()
                    .expect("state has an action");
                assert_eq!(
                    best, values[s],
                    "exact game values failed Bellman verification at state {s}"
                );
            }
            return values;
        }
        values = solve_functional(m, &sigma, &tau);
    }
    unreachable!("strategy iteration did not converge");
}

fn exact_min_backup(m: &PMdp, s: StateId, a: ActionId, v: &[BigRational]) -> BigRational {
    let worst = m
        .transitions(s, a)
        .iter()
        .map(|(t, _)| &v[*t])
        .min()
        .expect("nonempty support");
    m.reward(s, a) + m.step_gamma(s) * worst
}

/// Exact values of the deterministic chain induced by fixed strategies:
/// v(s) = r(s) + g(s) * v(next(s)), solved by walking each lasso.
fn solve_functional(m: &PMdp, sigma: &[ActionId], tau: &[StateId]) -> Vec<BigRational> {
    let n = m.n_states();
    let mut values: Vec<Option<BigRational>> = vec![None; n];
    for start in 0..n {
        if values[start].is_some() {
            continue;
        }
        // Walk until a resolved value or a cycle.
        let mut path = Vec::new();
        let mut on_path = vec![usize::MAX; n];
        let mut cur = start;
        let tail_value = loop {
            if let Some(v) = &values[cur] {
                break v.clone();
            }
            if on_path[cur] != usize::MAX {
                // Cycle from position on_path[cur] to the end of `path`.
                let cycle = &path[on_path[cur]..];
                let mut discount = BigRational::from_integer(1.into());
                let mut sum = BigRational::zero();
                for &s in cycle {
                    sum += &discount * m.reward(s, sigma[s]);
                    discount *= m.step_gamma(s);
                }
                let one = BigRational::from_integer(1.into());
                let v_cycle = sum / (one - discount);
                // Assign the whole cycle by unrolling once.
                let mut v = v_cycle;
                for &s in cycle.iter().rev() {
                    // v currently holds value of next(s); invert one step.
                    // v(s) = r + g * v(next); walking backwards we compute
                    // v(s) from v(next(s)).
                    v = m.reward(s, sigma[s]) + m.step_gamma(s) * &v;
                    values[s] = Some(v.clone());
                }
                // The backward pass above ends with v = value of cycle head
                // computed from itself; consistency holds by construction.
                break values[cur].clone().expect("cycle head resolved");
            }
            on_path[cur] = path.len();
            path.push(cur);
            cur = tau[cur];
        };
        // Resolve the acyclic prefix of the path backwards.
        let mut v = tail_value;
        for &s in path.iter().rev() {
            if values[s].is_some() {
                // Part of an already-resolved cycle.
                v = values[s].clone().unwrap();
                continue;
            }
            v = m.reward(s, sigma[s]) + m.step_gamma(s) * &v;
            values[s] = Some(v.clone());
        }
    }
    values.into_iter().map(|v| v.unwrap()).collect()
}

// ---------------------------------------------------------------------------
// Improving transitions and the two-step worst-case check
// ---------------------------------------------------------------------------

/// Transitions that strictly improve the antagonistic value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImprovingSet {
    pub transitions: BTreeSet<(StateId, ActionId, StateId)>,
}

impl ImprovingSet {
    pub fn contains(&self, s: StateId, a: ActionId, t: StateId) -> bool {
        self.transitions.contains(&(s, a, t))
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn from_transitions(
        transitions: impl IntoIterator<Item = (StateId, ActionId, StateId)>,
    ) -> Self {
        ImprovingSet {
            transitions: transitions.into_iter().collect(),
        }
    }
}

/// The set of transitions with R(s,a) + gamma * aVal(s') > aVal(s), using a
/// strictness margin of `tol`.
pub fn improving_transitions(m: &PMdp, gv: &GameValues, tol: f64) -> ImprovingSet {
    let mut transitions = BTreeSet::new();
    for (s, a) in m.enabled_pairs() {
        let r = m.reward_f64(s, a);
        let g = m.step_gamma_f64(s);
        for (t, _) in m.transitions(s, a) {
            if r + g * gv.aval[*t] > gv.aval[s] + tol {
                transitions.insert((s, a, *t));
            }
        }
    }
    ImprovingSet { transitions }
}

/// Sub-pMDP keeping only worst-case optimal actions: pairs whose worst
/// backup reaches aVal(s) within `tol`. Every state keeps at least one
/// action when `gv` is a converged fixpoint.
pub fn worst_case_subpmdp(m: &PMdp, gv: &GameValues, tol: f64) -> PMdp {
    let sub = m.retain_pairs(|s, a| min_backup(m, s, a, &gv.aval) >= gv.aval[s] - tol);
    for s in 0..sub.n_states() {
        assert!(
            !sub.enabled(s).is_empty(),
            "worst-case restriction must keep an action at every state"
        );
    }
    sub
}

// ---------------------------------------------------------------------------
// Almost-sure reachability of a transition set
// ---------------------------------------------------------------------------

/// The double fixpoint behind almost-sure reachability: alternately
/// restrict to states that can still reach a target edge and drop actions
/// that may leak outside that set along a non-target edge. Returns the
/// winning region and the surviving action sets.
fn region_and_survivors(m: &PMdp, targets: &ImprovingSet) -> (Vec<bool>, Vec<Vec<ActionId>>) {
    let n = m.n_states();
    let mut enabled: Vec<Vec<ActionId>> = (0..n).map(|s| m.enabled(s).to_vec()).collect();
    loop {
        // Backward closure: can some sequence of supported moves reach a
        // target edge?
        let mut in_r = vec![false; n];
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if in_r[s] {
                    continue;
                }
                let reaches = enabled[s].iter().any(|&a| {
                    m.transitions(s, a)
                        .iter()
                        .any(|(t, _)| targets.contains(s, a, *t) || in_r[*t])
                });
                if reaches {
                    in_r[s] = true;
                    changed = true;
                }
            }
        }
        let mut pruned = false;
        for s in 0..n {
            let before = enabled[s].len();
            if in_r[s] {
                enabled[s].retain(|&a| {
                    m.transitions(s, a)
                        .iter()
                        .all(|(t, _)| targets.contains(s, a, *t) || in_r[*t])
                });
            } else {
                enabled[s].clear();
            }
            if enabled[s].len() != before {
                pruned = true;
            }
        }
        if !pruned {
            return (in_r, enabled);
        }
    }
}

/// States from which some policy traverses a target transition with
/// probability one, for every graph-preserving valuation. Target
/// transitions are treated as immediate hits (the marker-state subdivision,
/// done implicitly).
pub fn almost_sure_region(m: &PMdp, targets: &ImprovingSet) -> Vec<bool> {
    region_and_survivors(m, targets).0
}

/// Whether a target transition can be hit almost surely from `from`.
pub fn almost_sure_hit(m: &PMdp, targets: &ImprovingSet, from: StateId) -> bool {
    almost_sure_region(m, targets)[from]
}

/// A memoryless witness policy for states inside the almost-sure region:
/// per state, an action that makes one-step progress toward a target edge
/// while staying inside the region. Used by the simulation oracle.
pub fn almost_sure_witness(m: &PMdp, targets: &ImprovingSet) -> (Vec<bool>, Policy) {
    let n = m.n_states();
    let (region, enabled) = region_and_survivors(m, targets);
    // Distance-to-target over the surviving subgraph: h(s) = 1 + min over
    // surviving actions of (0 if the action has a target edge, else the
    // best successor distance).
    let inf = usize::MAX / 2;
    let mut dist = vec![inf; n];
    let mut choice: Vec<Option<ActionId>> = vec![None; n];
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !region[s] {
                continue;
            }
            for &a in &enabled[s] {
                let mut best = inf;
                for (t, _) in m.transitions(s, a) {
                    if targets.contains(s, a, *t) {
                        best = 0;
                        break;
                    }
                    best = best.min(dist[*t]);
                }
                let cand = best.saturating_add(1);
                if cand < dist[s] {
                    dist[s] = cand;
                    choice[s] = Some(a);
                    changed = true;
                }
            }
        }
    }
    let mut pi = Policy::zeroed(n, m.n_actions());
    for s in 0..n {
        let a = choice[s].unwrap_or_else(|| m.enabled(s)[0]);
        pi.set(s, a, 1.0);
    }
    (region, pi)
}

/// The two-step procedure for the non-strict pruning case at `s`: restrict
/// to worst-case optimal actions, then decide almost-sure reachability of
/// an improving transition inside the restriction.
pub fn strict_bound_holds(m: &PMdp, s: StateId) -> Result<bool, SolveError> {
    let gv = aval_cval(m, 1e-12, 1_000_000)?;
    let tol = strictness_tol(m);
    let improving = improving_transitions(m, &gv, tol);
    if improving.is_empty() {
        return Ok(false);
    }
    let sub = worst_case_subpmdp(m, &gv, tol);
    Ok(almost_sure_hit(&sub, &improving, s))
}

// ---------------------------------------------------------------------------
// aVal-cVal pruning
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PruneReason {
    /// The antagonistic value strictly beats the action's best case.
    Strict,
    /// Tied with the best case, at a state where the worst case is
    /// almost-surely improvable.
    NonStrict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemovedPair {
    pub state: StateId,
    pub action: ActionId,
    pub reason: PruneReason,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PruneResult {
    pub removed: Vec<RemovedPair>,
    /// Pairs that met a pruning condition but were kept so their state
    /// retains an action.
    pub skipped: Vec<(StateId, ActionId)>,
}

impl PruneResult {
    pub fn removed_pairs(&self) -> BTreeSet<(StateId, ActionId)> {
        self.removed.iter().map(|r| (r.state, r.action)).collect()
    }
}

/// Removes state-action pairs whose best-case backup cannot reach the
/// state's worst-case value (strict case), plus tied pairs at states where
/// the worst case is almost-surely improvable (non-strict case). Iterates
/// to a fixpoint; each round is justified on the current model, which has
/// the same optimal values as the original. Every state keeps at least one
/// action.
pub fn aval_cval_prune(m: &PMdp) -> Result<(PMdp, PruneResult), SolveError> {
    let mut cur = m.clone();
    let mut result = PruneResult::default();
    loop {
        let gv = aval_cval(&cur, 1e-12, 1_000_000)?;
        let tol = strictness_tol(&cur);
        let improving = improving_transitions(&cur, &gv, tol);
        let sub = worst_case_subpmdp(&cur, &gv, tol);
        let nonstrict_ok = almost_sure_region(&sub, &improving);
        let mut round: Vec<RemovedPair> = Vec::new();
        let mut keep: Vec<usize> = (0..cur.n_states()).map(|s| cur.enabled(s).len()).collect();
        for s in 0..cur.n_states() {
            for &a in cur.enabled(s) {
                let threshold = max_backup(&cur, s, a, &gv.cval);
                let margin = gv.aval[s] - threshold;
                let reason = if margin > tol {
                    Some(PruneReason::Strict)
                } else if margin >= -tol && nonstrict_ok[s] {
                    Some(PruneReason::NonStrict)
                } else {
                    None
                };
                if let Some(reason) = reason {
                    if keep[s] > 1 {
                        keep[s] -= 1;
                        round.push(RemovedPair {
                            state: s,
                            action: a,
                            reason,
                        });
                    } else {
                        result.skipped.push((s, a));
                    }
                }
            }
        }
        if round.is_empty() {
            return Ok((cur, result));
        }
        let gone: BTreeSet<(StateId, ActionId)> =
            round.iter().map(|r| (r.state, r.action)).collect();
        cur = cur.retain_pairs(|s, a| !gone.contains(&(s, a)));
        result.removed.extend(round);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmdp::PMdpBuilder;
    use crate::poly::{Polynomial as P, Valuation};
    use crate::solve::{value_iteration, SolveParams};
    use crate::testgen;
    use num_bigint::BigInt;
    use num_traits::ToPrimitive;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn showcase_game_values() {
        let m = testgen::prune_showcase();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let s = |name: &str| m.state_id(name).unwrap();
        assert!((gv.aval[s("s0")] - 0.0).abs() < 1e-6);
        assert!((gv.aval[s("s1")] - 0.0).abs() < 1e-6);
        assert!((gv.cval[s("s3")] - 0.0).abs() < 1e-6);
        assert!((gv.cval[s("s5")] - (-191.0)).abs() < 1e-6);
        assert!((gv.cval[s("s6")] - (-195.0)).abs() < 1e-6);
        assert!((gv.cval[s("s7")] - (-200.0)).abs() < 1e-6);
        assert!((gv.cval[s("s8")] - (-200.0)).abs() < 1e-6);
    }

    #[test]
    fn dominated_action_aval() {
        let m = testgen::dominated_action_example();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        assert!((gv.aval[m.initial()] - (-45.0)).abs() < 1e-6);
    }

    #[test]
    fn deterministic_models_collapse_the_game() {
        // Singleton supports: aVal = cVal = the instantiated optimal value.
        let mut rng = StdRng::seed_from_u64(51);
        let opts = testgen::GenOptions {
            max_successors: 1,
            ..testgen::GenOptions::small()
        };
        for _ in 0..20 {
            let gen = testgen::random_pmdp(&mut rng, &opts);
            let gv = aval_cval(&gen.pmdp, 1e-12, 1_000_000).unwrap();
            let mdp = gen
                .pmdp
                .instantiate(&Valuation::new(), 1e-9)
                .unwrap();
            let vt = value_iteration(&mdp, &SolveParams::default()).unwrap();
            for s in 0..gen.pmdp.n_states() {
                assert!((gv.aval[s] - gv.cval[s]).abs() < 1e-7);
                assert!((gv.aval[s] - vt.v[s]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn exact_values_match_float_fixpoint() {
        let mut rng = StdRng::seed_from_u64(52);
        for _ in 0..30 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
            let gv = aval_cval(&gen.pmdp, 1e-12, 1_000_000).unwrap();
            let exact = aval_exact(&gen.pmdp);
            for s in 0..gen.pmdp.n_states() {
                let e = exact[s].to_f64().unwrap();
                assert!(
                    (gv.aval[s] - e).abs() < 1e-8,
                    "state {s}: float {} vs exact {e}",
                    gv.aval[s]
                );
            }
        }
    }

    #[test]
    fn exact_values_on_fixture_models() {
        let m = testgen::dominated_action_example();
        let exact = aval_exact(&m);
        assert_eq!(exact[m.initial()], BigRational::from_integer(BigInt::from(-45)));
        let m = testgen::prune_showcase();
        let exact = aval_exact(&m);
        assert_eq!(exact[m.initial()], BigRational::zero());
    }

    #[test]
    fn policy_restricted_values_bound_the_free_ones() {
        let mut rng = StdRng::seed_from_u64(53);
        for _ in 0..20 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
            let m = &gen.pmdp;
            let gv = aval_cval(m, 1e-12, 1_000_000).unwrap();
            // All deterministic policies: aVal^pi <= aVal, cVal^pi <= cVal.
            for pi in enumerate_deterministic(m) {
                let gp = aval_cval_policy(m, &pi, 1e-12, 1_000_000).unwrap();
                for s in 0..m.n_states() {
                    assert!(gp.aval[s] <= gv.aval[s] + 1e-7);
                    assert!(gp.cval[s] <= gv.cval[s] + 1e-7);
                }
            }
        }
    }

    #[test]
    fn worst_case_optimal_policy_attains_aval() {
        let m = testgen::prune_showcase();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        // Greedy worst-case policy.
        let mut pi = Policy::zeroed(m.n_states(), m.n_actions());
        for s in 0..m.n_states() {
            let best = m
                .enabled(s)
                .iter()
                .copied()
                .max_by(|&x, &y| {
                    min_backup(&m, s, x, &gv.aval)
                        .partial_cmp(&min_backup(&m, s, y, &gv.aval))
                        .unwrap()
                })
                .unwrap();
            pi.set(s, best, 1.0);
        }
        let gp = aval_cval_policy(&m, &pi, 1e-12, 1_000_000).unwrap();
        assert!((gp.aval[m.initial()] - gv.aval[m.initial()]).abs() < 1e-7);
    }

    #[test]
    fn single_action_policy_values_equal_free_values() {
        let mut rng = StdRng::seed_from_u64(54);
        let opts = testgen::GenOptions {
            max_actions: 1,
            ..testgen::GenOptions::small()
        };
        let gen = testgen::random_pmdp(&mut rng, &opts);
        let m = &gen.pmdp;
        let gv = aval_cval(m, 1e-12, 1_000_000).unwrap();
        let pi = Policy::deterministic(&vec![0; m.n_states()], 1);
        let gp = aval_cval_policy(m, &pi, 1e-12, 1_000_000).unwrap();
        for s in 0..m.n_states() {
            assert!((gv.aval[s] - gp.aval[s]).abs() < 1e-9);
            assert!((gv.cval[s] - gp.cval[s]).abs() < 1e-9);
        }
    }

    #[test]
    fn improving_transitions_on_the_showcase() {
        let m = testgen::prune_showcase();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let improving = improving_transitions(&m, &gv, strictness_tol(&m));
        let s = |name: &str| m.state_id(name).unwrap();
        let a = m.action_id("a").unwrap();
        // Landing in s2 strictly improves the worst case from s0.
        assert!(improving.contains(s("s0"), a, s("s2")));
        // The step s2 -> s9 merely realizes the already-promised value:
        // equality, not strict improvement.
        assert!(!improving.contains(s("s2"), a, s("s9")));
    }

    #[test]
    fn deterministic_chain_has_no_improving_transition() {
        let mut b = PMdpBuilder::new("chain");
        b.set_rmax(BigRational::from_integer(BigInt::from(4)));
        let s: Vec<usize> = (0..4).map(|i| b.add_state(format!("s{i}"))).collect();
        let a = b.add_action("a");
        for i in 0..3 {
            b.add_trans(s[i], a, s[i + 1], P::from_int(1));
            b.set_reward_int(s[i], a, (i as i64) - 1);
        }
        b.add_trans(s[3], a, s[3], P::from_int(1));
        let m = b.build().unwrap();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let improving = improving_transitions(&m, &gv, strictness_tol(&m));
        assert!(improving.is_empty());
    }

    #[test]
    fn worst_case_restriction_on_the_showcase() {
        let m = testgen::prune_showcase();
        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let sub = worst_case_subpmdp(&m, &gv, strictness_tol(&m));
        let s0 = m.initial();
        let names: Vec<&str> = sub.enabled(s0).iter().map(|&a| m.actions()[a].as_str()).collect();
        assert_eq!(names, ["a", "b"]);
        // Retained actions back up to aVal within tolerance.
        for &a in sub.enabled(s0) {
            let backup = min_backup(&m, s0, a, &gv.aval);
            assert!((backup - gv.aval[s0]).abs() <= strictness_tol(&m));
        }
    }

    #[test]
    fn single_action_models_are_never_restricted() {
        let mut rng = StdRng::seed_from_u64(55);
        let opts = testgen::GenOptions {
            max_actions: 1,
            ..testgen::GenOptions::small()
        };
        let gen = testgen::random_pmdp(&mut rng, &opts);
        let gv = aval_cval(&gen.pmdp, 1e-12, 1_000_000).unwrap();
        let sub = worst_case_subpmdp(&gen.pmdp, &gv, strictness_tol(&gen.pmdp));
        assert_eq!(sub, gen.pmdp);
    }

    #[test]
    fn almost_sure_hit_through_a_loop() {
        let m = testgen::prune_showcase();
        let s = |name: &str| m.state_id(name).unwrap();
        let a = m.action_id("a").unwrap();
        // Playing `a` from s0 loops through s1 until s2 is drawn; the edge
        // s2 -> s9 is then traversed surely.
        let target = ImprovingSet::from_transitions([(s("s2"), a, s("s9"))]);
        assert!(almost_sure_hit(&m, &target, s("s0")));
        // From s3 the target is graph-unreachable.
        assert!(!almost_sure_hit(&m, &target, s("s3")));
    }

    #[test]
    fn risky_only_paths_are_not_almost_sure() {
        let m = testgen::dominated_action_example();
        let s = |name: &str| m.state_id(name).unwrap();
        let a = m.action_id("a").unwrap();
        let b = m.action_id("b").unwrap();
        // Reaching s2 cannot be ensured: both actions may fall into s3.
        let target = ImprovingSet::from_transitions([
            (s("s0"), b, s("s2")),
            (s("s1"), a, s("s2")),
        ]);
        assert!(!almost_sure_hit(&m, &target, s("s0")));
    }

    #[test]
    fn strict_bound_holds_on_the_showcase_initial_state() {
        let m = testgen::prune_showcase();
        assert!(strict_bound_holds(&m, m.initial()).unwrap());
        // An absorbing zero-reward state has no improving transition in
        // reach: the bound stays weak there.
        let s3 = m.state_id("s3").unwrap();
        assert!(!strict_bound_holds(&m, s3).unwrap());
    }

    /// Four states: a safe action pinning the worst case and a risky action
    /// that alone reaches the only improving transition. The improving
    /// transition survives only outside the worst-case restriction, so the
    /// strict bound must fail.
    #[test]
    fn improving_transition_behind_suboptimal_action() {
        let mut b = PMdpBuilder::new("risky-only");
        b.set_gamma(BigRational::new(BigInt::from(1), BigInt::from(2)));
        b.set_rmax(BigRational::from_integer(BigInt::from(10)));
        b.add_param("w");
        let s0 = b.add_state("s0");
        let safe = b.add_state("safe");
        let jackpot = b.add_state("jackpot");
        let pit = b.add_state("pit");
        let stay = b.add_action("stay");
        let gamble = b.add_action("gamble");
        b.add_trans(s0, stay, safe, P::from_int(1));
        b.add_trans(safe, stay, safe, P::from_int(1));
        let w = P::var("w");
        b.add_trans(s0, gamble, jackpot, w.clone());
        b.add_trans(s0, gamble, pit, P::from_int(1).sub(&w));
        b.add_trans(jackpot, stay, jackpot, P::from_int(1));
        b.set_reward_int(jackpot, stay, 10);
        b.add_trans(pit, stay, pit, P::from_int(1));
        b.set_reward_int(pit, stay, -10);
        let m = b.build().unwrap();

        let gv = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let improving = improving_transitions(&m, &gv, strictness_tol(&m));
        // The gamble's jackpot edge improves the worst case...
        assert!(improving.contains(s0, gamble, jackpot));
        // ...but the two-step check fails: gambling is not worst-case
        // optimal, and staying never meets the improving transition.
        assert!(!strict_bound_holds(&m, s0).unwrap());

        // Oracle: no deterministic worst-case-optimal policy hits the
        // improving set almost surely.
        for pi in enumerate_deterministic(&m) {
            let gp = aval_cval_policy(&m, &pi, 1e-12, 1_000_000).unwrap();
            if (gp.aval[s0] - gv.aval[s0]).abs() < 1e-9 {
                // Worst-case optimal at s0: must play `stay`, whose chain
                // from s0 contains no improving transition.
                assert_eq!(pi.chosen(s0), Some(stay));
            }
        }
    }

    #[test]
    fn showcase_prunes_exactly_the_two_documented_pairs() {
        let m = testgen::prune_showcase();
        let (pruned, result) = aval_cval_prune(&m).unwrap();
        let s0 = m.initial();
        let b = m.action_id("b").unwrap();
        let c = m.action_id("c").unwrap();
        let removed = result.removed_pairs();
        assert_eq!(
            removed,
            BTreeSet::from([(s0, b), (s0, c)]),
            "unexpected removals: {result:?}"
        );
        for r in &result.removed {
            match (r.state, r.action) {
                (s, a) if (s, a) == (s0, c) => assert_eq!(r.reason, PruneReason::Strict),
                (s, a) if (s, a) == (s0, b) => assert_eq!(r.reason, PruneReason::NonStrict),
                other => panic!("unexpected removal {other:?}"),
            }
        }
        assert_eq!(pruned.enabled(s0), &[m.action_id("a").unwrap()]);
    }

    #[test]
    fn single_action_models_prune_nothing() {
        let mut rng = StdRng::seed_from_u64(56);
        let opts = testgen::GenOptions {
            max_actions: 1,
            ..testgen::GenOptions::small()
        };
        for _ in 0..10 {
            let gen = testgen::random_pmdp(&mut rng, &opts);
            let (pruned, result) = aval_cval_prune(&gen.pmdp).unwrap();
            assert!(result.removed.is_empty());
            assert_eq!(pruned, gen.pmdp);
        }
    }

    #[test]
    fn pruning_preserves_optimal_values_on_random_models() {
        let mut rng = StdRng::seed_from_u64(57);
        let params = SolveParams::default();
        for _ in 0..40 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
            let (pruned, result) = aval_cval_prune(&gen.pmdp).unwrap();
            if result.removed.is_empty() {
                continue;
            }
            for _ in 0..5 {
                let v = gen.sample_valuation(&mut rng);
                let full = gen.pmdp.instantiate(&v, 1e-9).unwrap();
                let cut = pruned.instantiate(&v, 1e-9).unwrap();
                let vf = value_iteration(&full, &params).unwrap();
                let vc = value_iteration(&cut, &params).unwrap();
                assert!(
                    (vf.v[full.initial()] - vc.v[cut.initial()]).abs() < 1e-6,
                    "pruning changed the optimal value"
                );
            }
        }
    }

    #[test]
    fn sandwich_between_game_values() {
        let mut rng = StdRng::seed_from_u64(58);
        for _ in 0..50 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
            let gv = aval_cval(&gen.pmdp, 1e-12, 1_000_000).unwrap();
            for s in 0..gen.pmdp.n_states() {
                assert!(gv.aval[s] <= gv.cval[s] + 1e-9);
            }
            let v = gen.sample_valuation(&mut rng);
            let mdp = gen.pmdp.instantiate(&v, 1e-9).unwrap();
            let vt = value_iteration(&mdp, &SolveParams::default()).unwrap();
            for s in 0..gen.pmdp.n_states() {
                assert!(gv.aval[s] - 1e-6 <= vt.v[s] && vt.v[s] <= gv.cval[s] + 1e-6);
            }
        }
    }

    #[test]
    fn every_policy_of_the_worst_case_submodel_is_worst_case_optimal() {
        let mut rng = StdRng::seed_from_u64(60);
        for _ in 0..15 {
            let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
            let m = &gen.pmdp;
            let gv = aval_cval(m, 1e-12, 1_000_000).unwrap();
            let sub = worst_case_subpmdp(m, &gv, strictness_tol(m));
            for pi in enumerate_deterministic(&sub) {
                let gp = aval_cval_policy(m, &pi, 1e-12, 1_000_000).unwrap();
                for s in 0..m.n_states() {
                    assert!(
                        (gp.aval[s] - gv.aval[s]).abs() < 1e-6,
                        "state {s}: {} vs {}",
                        gp.aval[s],
                        gv.aval[s]
                    );
                }
            }
        }
    }

    #[test]
    fn game_values_read_only_supports() {
        // Re-labeling probabilities without touching supports leaves the
        // values untouched.
        let mut rng = StdRng::seed_from_u64(59);
        let gen = testgen::random_pmdp(&mut rng, &testgen::GenOptions::small());
        let m = &gen.pmdp;
        let mut b = PMdpBuilder::new("relabel");
        for s in m.states() {
            b.add_state(s);
        }
        for a in m.actions() {
            b.add_action(a);
        }
        b.set_gamma(m.gamma().clone());
        b.set_rmax(m.r_max().clone());
        b.set_initial(m.initial());
        for (s, a) in m.enabled_pairs() {
            b.set_reward(s, a, m.reward(s, a).clone());
            let row = m.transitions(s, a);
            let k = row.len() as i64;
            let denom = k * (k + 1) / 2;
            for (i, (t, _)) in row.iter().enumerate() {
                // Fresh constant labels, same support.
                b.add_trans(s, a, *t, P::from_ratio(i as i64 + 1, denom));
            }
        }
        let relabeled = b.build().unwrap();
        let gv = aval_cval(m, 1e-12, 1_000_000).unwrap();
        let gv2 = aval_cval(&relabeled, 1e-12, 1_000_000).unwrap();
        for s in 0..m.n_states() {
            assert!((gv.aval[s] - gv2.aval[s]).abs() < 1e-12);
            assert!((gv.cval[s] - gv2.cval[s]).abs() < 1e-12);
        }
    }

    fn enumerate_deterministic(m: &PMdp) -> Vec<Policy> {
        let n = m.n_states();
        let mut out = Vec::new();
        let mut stack = vec![Vec::<usize>::new()];
        while let Some(prefix) = stack.pop() {
            if prefix.len() == n {
                let mut pi = Policy::zeroed(n, m.n_actions());
                for (s, &a) in prefix.iter().enumerate() {
                    pi.set(s, a, 1.0);
                }
                out.push(pi);
                continue;
            }
            let s = prefix.len();
            for &a in m.enabled(s) {
                let mut next = prefix.clone();
                next.push(a);
                stack.push(next);
            }
        }
        out
    }
}
