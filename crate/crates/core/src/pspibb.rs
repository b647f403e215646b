//! Parametric SPIBB: polynomial labels act as equivalence classes so that
//! observations from identically-structured state-action pairs are counted
//! together (parameter tying).

use crate::mdp::Mdp;
use crate::pmdp::{ActionId, ModelError, PMdp, StateId};
use crate::poly::Polynomial;
use crate::solve::{Policy, SolveError, SolveParams};
use crate::spibb::{spibb_policy, CountTable, SpibbMode, UncertaintySet};
use std::collections::{BTreeMap, HashMap};

/// Equivalence classes over state-action pairs (by the multiset of successor
/// labels) and over transitions (same pair class and same label).
///
/// Pairs of intermediate states carry a known uniform split introduced by
/// the distinct-label rewrite; they take part in no class and their
/// estimate comes directly from the labels.
#[derive(Debug, Clone)]
pub struct LabelClasses {
    n_actions: usize,
    sa_class: Vec<Option<usize>>,
    trans_class: Vec<BTreeMap<StateId, usize>>,
    pub sa_members: Vec<Vec<(StateId, ActionId)>>,
    pub trans_members: Vec<Vec<(StateId, ActionId, StateId)>>,
}

impl LabelClasses {
    #[inline]
    fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.n_actions + a
    }

    pub fn sa_class(&self, s: StateId, a: ActionId) -> Option<usize> {
        self.sa_class[self.pair(s, a)]
    }

    pub fn trans_class(&self, s: StateId, a: ActionId, t: StateId) -> Option<usize> {
        self.trans_class[self.pair(s, a)].get(&t).copied()
    }

    pub fn n_sa_classes(&self) -> usize {
        self.sa_members.len()
    }

    /// True when (q, b, q') pools with (s, a, s').
    pub fn same_trans_class(
        &self,
        sas: (StateId, ActionId, StateId),
        qbq: (StateId, ActionId, StateId),
    ) -> bool {
        match (
            self.trans_class(sas.0, sas.1, sas.2),
            self.trans_class(qbq.0, qbq.1, qbq.2),
        ) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }
}

/// Computes both partitions by canonical-form comparison of the labels.
/// Fails when a non-intermediate pair has duplicate successor labels.
pub fn label_classes(m: &PMdp) -> Result<LabelClasses, ModelError> {
    let n = m.n_states();
    let na = m.n_actions();
    let mut sa_class = vec![None; n * na];
    let mut trans_class = vec![BTreeMap::new(); n * na];
    let mut sa_members: Vec<Vec<(StateId, ActionId)>> = Vec::new();
    let mut trans_members: Vec<Vec<(StateId, ActionId, StateId)>> = Vec::new();
    let mut sa_ids: HashMap<Vec<Polynomial>, usize> = HashMap::new();
    let mut trans_ids: HashMap<(usize, Polynomial), usize> = HashMap::new();

    for (s, a) in m.enabled_pairs() {
        if m.is_intermediate(s) {
            continue;
        }
        let row = m.transitions(s, a);
        for i in 1..row.len() {
            if row[..i].iter().any(|(_, l)| *l == row[i].1) {
                return Err(ModelError::DuplicateLabels {
                    state: m.states()[s].clone(),
                    action: m.actions()[a].clone(),
                });
            }
        }
        let mut key: Vec<Polynomial> = row.iter().map(|(_, l)| l.clone()).collect();
        key.sort_by_key(|p| p.to_string());
        let cid = match sa_ids.get(&key) {
            Some(&cid) => cid,
            None => {
                let cid = sa_members.len();
                sa_ids.insert(key, cid);
                sa_members.push(Vec::new());
                cid
            }
        };
        sa_class[m.pair(s, a)] = Some(cid);
        sa_members[cid].push((s, a));
        for (t, label) in row {
            let tkey = (cid, label.clone());
            let tid = match trans_ids.get(&tkey) {
                Some(&tid) => tid,
                None => {
                    let tid = trans_members.len();
                    trans_ids.insert(tkey, tid);
                    trans_members.push(Vec::new());
                    tid
                }
            };
            trans_class[m.pair(s, a)].insert(*t, tid);
            trans_members[tid].push((s, a, *t));
        }
    }
    Ok(LabelClasses {
        n_actions: na,
        sa_class,
        trans_class,
        sa_members,
        trans_members,
    })
}

/// Per-pair pooled counts: the denominator sums the visits of every pair in
/// the same class, the numerators sum the visits of every transition in the
/// same transition class.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledCounts {
    n_actions: usize,
    pub sa: Vec<u64>,
    pub trans: Vec<BTreeMap<StateId, u64>>,
}

impl PooledCounts {
    #[inline]
    pub fn pair(&self, s: StateId, a: ActionId) -> usize {
        s * self.n_actions + a
    }

    pub fn sa(&self, s: StateId, a: ActionId) -> u64 {
        self.sa[self.pair(s, a)]
    }

    pub fn sas(&self, s: StateId, a: ActionId, t: StateId) -> u64 {
        self.trans[self.pair(s, a)].get(&t).copied().unwrap_or(0)
    }
}

pub fn pooled_counts(c: &CountTable, lc: &LabelClasses) -> PooledCounts {
    let mut class_total = vec![0u64; lc.sa_members.len()];
    for (cid, members) in lc.sa_members.iter().enumerate() {
        class_total[cid] = members.iter().map(|&(s, a)| c.sa(s, a)).sum();
    }
    let mut trans_total = vec![0u64; lc.trans_members.len()];
    for (tid, members) in lc.trans_members.iter().enumerate() {
        trans_total[tid] = members.iter().map(|&(s, a, t)| c.sas(s, a, t)).sum();
    }
    let mut sa = vec![0u64; lc.sa_class.len()];
    let mut trans = vec![BTreeMap::new(); lc.sa_class.len()];
    for (idx, cid) in lc.sa_class.iter().enumerate() {
        if let Some(cid) = cid {
            sa[idx] = class_total[*cid];
            trans[idx] = lc.trans_class[idx]
                .iter()
                .map(|(&t, &tid)| (t, trans_total[tid]))
                .collect();
        }
    }
    PooledCounts {
        n_actions: lc.n_actions,
        sa,
        trans,
    }
}

/// The MLE model with parameter tying: transition estimates are ratios of
/// pooled counts; a pair is disabled when its pooled denominator is zero.
/// Intermediate pairs take their exact constant split from the labels.
pub fn parametric_mle(c: &CountTable, m: &PMdp) -> Result<Mdp, ModelError> {
    let lc = label_classes(m)?;
    Ok(parametric_mle_with(c, m, &lc))
}

pub fn parametric_mle_with(c: &CountTable, m: &PMdp, lc: &LabelClasses) -> Mdp {
    let pooled = pooled_counts(c, lc);
    let n = m.n_states();
    let na = m.n_actions();
    let mut succ = vec![Vec::new(); n * na];
    for (s, a) in m.enabled_pairs() {
        let idx = m.pair(s, a);
        if m.is_intermediate(s) {
            succ[idx] = m
                .transitions(s, a)
                .iter()
                .map(|(t, label)| {
                    let v = label
                        .constant_value()
                        .expect("intermediate splits are constant");
                    (*t, num_traits::ToPrimitive::to_f64(&v).unwrap())
                })
                .collect();
            continue;
        }
        let denom = pooled.sa(s, a);
        if denom == 0 {
            continue;
        }
        succ[idx] = m
            .transitions(s, a)
            .iter()
            .filter_map(|(t, _)| {
                let k = pooled.sas(s, a, *t);
                (k > 0).then_some((*t, k as f64 / denom as f64))
            })
            .collect();
    }
    let skeleton = m.skeleton();
    Mdp::from_parts(
        format!("{}-pmle", m.name),
        skeleton.states,
        skeleton.actions,
        skeleton.initial,
        skeleton.gamma,
        skeleton.r_max,
        skeleton.rewards,
        succ,
        skeleton.intermediate,
    )
}

/// Pairs whose pooled denominator is below the threshold.
pub fn parametric_uncertainty_set(
    c: &CountTable,
    lc: &LabelClasses,
    n_wedge: u64,
) -> UncertaintySet {
    let pooled = pooled_counts(c, lc);
    let mut pairs = std::collections::BTreeSet::new();
    for (idx, cid) in lc.sa_class.iter().enumerate() {
        if cid.is_some() && pooled.sa[idx] < n_wedge {
            pairs.insert((idx / lc.n_actions, idx % lc.n_actions));
        }
    }
    UncertaintySet { pairs }
}

/// The pSPIBB improved policy: the bootstrapped-greedy construction applied
/// to the pooled MLE model and the pooled uncertainty set.
pub fn pspibb_policy(
    m: &PMdp,
    c: &CountTable,
    pi_b: &Policy,
    n_wedge: u64,
    mode: SpibbMode,
    params: &SolveParams,
) -> Result<Policy, PspibbError> {
    let lc = label_classes(m)?;
    pspibb_policy_with(m, &lc, c, pi_b, n_wedge, mode, params)
}

/// As [`pspibb_policy`] with precomputed label classes; classes depend only
/// on the model, so the harness caches them across seeds.
pub fn pspibb_policy_with(
    m: &PMdp,
    lc: &LabelClasses,
    c: &CountTable,
    pi_b: &Policy,
    n_wedge: u64,
    mode: SpibbMode,
    params: &SolveParams,
) -> Result<Policy, PspibbError> {
    let mle = parametric_mle_with(c, m, lc);
    let u = parametric_uncertainty_set(c, lc, n_wedge);
    let skeleton = m.skeleton();
    spibb_policy(&skeleton, &mle, pi_b, &u, mode, params).map_err(PspibbError::Solve)
}

#[derive(Debug, thiserror::Error)]
pub enum PspibbError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(SolveError),
}
