//! The duplicate-label rewrite routes tied successors through compressed
//! intermediate states. These tests drive the rewritten models through the
//! whole stack: instantiation, value iteration, policy evaluation, game
//! values, and the pooled improvement pipeline, checking value preservation
//! on the original states throughout.

use pspibb_core::game::{aval_cval, aval_exact};
use pspibb_core::pmdp::{PMdp, PMdpBuilder};
use pspibb_core::poly::{Polynomial as P, Valuation};
use pspibb_core::pspibb::{label_classes, pspibb_policy};
use pspibb_core::solve::{policy_evaluation, value_iteration, Policy, SolveParams};
use pspibb_core::spibb::{count, Dataset, SpibbMode};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// A model where one action fans out to `k` successors sharing one label
/// (a k-way tie), plus an escape successor, plus a random deterministic
/// tail so values differ across states.
fn tied_fanout_model(k: i64, rng: &mut StdRng) -> PMdp {
    let mut b = PMdpBuilder::new("tied");
    b.set_gamma(BigRational::new(9.into(), 10.into()));
    b.set_rmax(BigRational::from_integer(6.into()));
    b.add_param("x");
    let s0 = b.add_state("s0");
    let escape = b.add_state("escape");
    let tied: Vec<usize> = (0..k).map(|i| b.add_state(format!("t{i}"))).collect();
    let a = b.add_action("a");
    let other = b.add_action("b");
    let x = P::var("x");
    for &t in &tied {
        b.add_trans(s0, a, t, x.clone());
        let r = rng.random_range(-6..=6);
        b.set_reward_int(t, a, r);
        b.add_trans(t, a, escape, P::from_int(1));
    }
    let used = x.scale(&BigRational::from_integer(k.into()));
    b.add_trans(s0, a, escape, P::from_int(1).sub(&used));
    b.set_reward_int(s0, a, 1);
    // A second action so policies differ.
    b.add_trans(s0, other, escape, P::from_int(1));
    b.add_trans(escape, a, escape, P::from_int(1));
    b.set_reward_int(escape, a, rng.random_range(-2..=2));
    b.build().unwrap()
}

fn sample_valuation(k: i64, rng: &mut StdRng) -> Valuation {
    Valuation::from_pairs([("x", rng.random_range(0.05..0.9 / k as f64))])
}

#[test]
fn rewrite_preserves_optimal_values_through_the_solver() {
    let mut rng = StdRng::seed_from_u64(71);
    let params = SolveParams::default();
    for _ in 0..25 {
        let k = rng.random_range(2..=4i64);
        let m = tied_fanout_model(k, &mut rng);
        assert!(!m.has_distinct_labels());
        let n = m.normalize_distinct_labels();
        assert!(n.has_distinct_labels());
        assert!(n.n_states() > m.n_states());
        for _ in 0..4 {
            let v = sample_valuation(k, &mut rng);
            let orig = m.instantiate(&v, 1e-9).unwrap();
            let rewritten = n.instantiate(&v, 1e-9).unwrap();
            let vo = value_iteration(&orig, &params).unwrap();
            let vr = value_iteration(&rewritten, &params).unwrap();
            // Original states keep their ids in the rewrite.
            for s in 0..m.n_states() {
                assert!(
                    (vo.v[s] - vr.v[s]).abs() < 1e-8,
                    "state {s}: {} vs {}",
                    vo.v[s],
                    vr.v[s]
                );
            }
        }
    }
}

#[test]
fn rewrite_preserves_policy_values_and_game_values() {
    let mut rng = StdRng::seed_from_u64(72);
    let params = SolveParams::default();
    for _ in 0..25 {
        let k = rng.random_range(2..=4i64);
        let m = tied_fanout_model(k, &mut rng);
        let n = m.normalize_distinct_labels();

        // A policy over the original states, extended to the fresh states
        // by their single action.
        let mut pi = Policy::zeroed(n.n_states(), n.n_actions());
        let p_first = rng.random_range(0.0..1.0);
        pi.set(0, 0, p_first);
        pi.set(0, 1, 1.0 - p_first);
        for s in 1..n.n_states() {
            pi.set(s, n.enabled(s)[0], 1.0);
        }
        let v = sample_valuation(k, &mut rng);
        let orig = m.instantiate(&v, 1e-9).unwrap();
        let rewritten = n.instantiate(&v, 1e-9).unwrap();
        let vo = policy_evaluation(&orig, &pi, &params).unwrap();
        let vr = policy_evaluation(&rewritten, &pi, &params).unwrap();
        for s in 0..m.n_states() {
            assert!((vo.v[s] - vr.v[s]).abs() < 1e-8);
        }

        // Game values read the rewritten supports; the compressed step
        // keeps them identical on original states.
        let go = aval_cval(&m, 1e-12, 1_000_000).unwrap();
        let gr = aval_cval(&n, 1e-12, 1_000_000).unwrap();
        for s in 0..m.n_states() {
            assert!((go.aval[s] - gr.aval[s]).abs() < 1e-7);
            assert!((go.cval[s] - gr.cval[s]).abs() < 1e-7);
        }
        // And the exact values agree with the float fixpoint on the
        // rewritten model too.
        let exact = aval_exact(&n);
        for s in 0..n.n_states() {
            assert!((exact[s].to_f64().unwrap() - gr.aval[s]).abs() < 1e-8);
        }
    }
}

#[test]
fn pooled_pipeline_runs_on_rewritten_models() {
    let mut rng = StdRng::seed_from_u64(73);
    let k = 3i64;
    let m = tied_fanout_model(k, &mut rng);
    let n = m.normalize_distinct_labels();
    let lc = label_classes(&n).unwrap();
    // The fresh split states are classless; everything else is classified.
    for s in 0..n.n_states() {
        for &a in n.enabled(s) {
            assert_eq!(lc.sa_class(s, a).is_none(), n.is_intermediate(s));
        }
    }
    // Data on the rewritten model, including steps through fresh states.
    let v = sample_valuation(k, &mut rng);
    let truth = n.instantiate(&v, 1e-9).unwrap();
    let mut triples = Vec::new();
    let mut state = truth.initial();
    for _ in 0..4000 {
        let acts = truth.enabled(state);
        let a = acts[rng.random_range(0..acts.len())];
        let row = truth.successors(state, a);
        let mut u = rng.random_range(0.0..1.0);
        let mut next = row.last().unwrap().0;
        for &(t, p) in row {
            if u < p {
                next = t;
                break;
            }
            u -= p;
        }
        triples.push((state, a, next));
        state = next;
    }
    let c = count(
        &Dataset {
            env: "tied".into(),
            seed: 0,
            behavior_id: String::new(),
            triples,
            episode_starts: vec![0],
        },
        n.n_states(),
        n.n_actions(),
    );
    let pi_b = Policy::uniform(&truth);
    let pi = pspibb_policy(&n, &c, &pi_b, 50, SpibbMode::FixedPoint, &SolveParams::default())
        .unwrap();
    for s in 0..n.n_states() {
        let sum: f64 = pi.row(s).iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "row {s} sums to {sum}");
    }
    // The improved policy is evaluable on the true rewritten model.
    let perf = policy_evaluation(&truth, &pi, &SolveParams::default()).unwrap();
    let base = policy_evaluation(&truth, &pi_b, &SolveParams::default()).unwrap();
    assert!(perf.v[truth.initial()].is_finite());
    assert!(base.v[truth.initial()].is_finite());
}
