//! Twenty rounds of rock-paper-scissors against a biased opponent. The
//! opponent's mixed play depends on the player's previous move through a
//! 3x3 table of parameters, so every round shares the same nine unknowns.

use super::{check_dims, Benchmark, BenchmarkSpec, BenchError};
use crate::pmdp::PMdpBuilder;
use crate::poly::{Polynomial as P, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

pub const ROUNDS: i64 = 20;
const PLAYS: [&str; 3] = ["rock", "paper", "scissors"];

/// +1 when `a` beats `o`, -1 when `o` beats `a`, 0 on a draw.
fn outcome(a: usize, o: usize) -> i64 {
    if (o + 1) % 3 == a {
        1
    } else if (a + 1) % 3 == o {
        -1
    } else {
        0
    }
}

pub fn build_rps() -> Result<Benchmark, BenchError> {
    let mut b = PMdpBuilder::new("rps");
    let gamma = BigRational::new(BigInt::from(19), BigInt::from(20));
    b.set_gamma(gamma.clone());
    // Rewards are the score potential (1-gamma)/gamma * score, bounded by
    // 20 * (1-gamma)/gamma.
    let shaping = (BigRational::one() - &gamma) / &gamma;
    b.set_rmax(BigRational::from_integer(BigInt::from(ROUNDS)) * &shaping);

    for pm in PLAYS {
        for o in PLAYS {
            b.add_param(format!("x_{pm}_{o}"));
        }
    }

    // Round-entry states carry (round, score so far, previous player move);
    // the first round uses the rock row by convention. Terminals keep the
    // final score and the last move.
    let score_name = |sc: i64| {
        if sc < 0 {
            format!("n{}", -sc)
        } else {
            format!("p{sc}")
        }
    };
    let mut b2 = b;
    let round_state = |b: &mut PMdpBuilder, k: i64, score: i64, prev: usize| {
        b.add_state(format!("r{k}_{}_{}", score_name(score), PLAYS[prev]))
    };
    let end_state = |b: &mut PMdpBuilder, score: i64, prev: usize| {
        b.add_state(format!("end_{}_{}", score_name(score), PLAYS[prev]))
    };
    // Declare states in a fixed order: rounds, then terminals.
    let initial = round_state(&mut b2, 1, 0, 0);
    for k in 2..=ROUNDS {
        for score in -(k - 1)..=(k - 1) {
            for prev in 0..3 {
                round_state(&mut b2, k, score, prev);
            }
        }
    }
    for score in -ROUNDS..=ROUNDS {
        for prev in 0..3 {
            end_state(&mut b2, score, prev);
        }
    }
    for play in PLAYS {
        b2.add_action(play);
    }
    b2.set_initial(initial);

    let reward_of = |score: i64| BigRational::from_integer(BigInt::from(score)) * &shaping;
    let add_round = |b: &mut PMdpBuilder, k: i64, score: i64, prev: usize| {
        let s = round_state(b, k, score, prev);
        for a in 0..3usize {
            b.set_reward(s, a, reward_of(score));
            for o in 0..3usize {
                let label = P::var(format!("x_{}_{}", PLAYS[prev], PLAYS[o]));
                let next_score = score + outcome(a, o);
                let succ = if k == ROUNDS {
                    end_state(b, next_score, a)
                } else {
                    round_state(b, k + 1, next_score, a)
                };
                b.add_trans(s, a, succ, label);
            }
        }
    };
    add_round(&mut b2, 1, 0, 0);
    for k in 2..=ROUNDS {
        for score in -(k - 1)..=(k - 1) {
            for prev in 0..3 {
                add_round(&mut b2, k, score, prev);
            }
        }
    }
    for score in -ROUNDS..=ROUNDS {
        for prev in 0..3 {
            let s = end_state(&mut b2, score, prev);
            b2.set_reward(s, 0, reward_of(score));
            b2.add_trans(s, 0, s, P::from_int(1));
        }
    }

    // Canonical bias: the play beating the player's previous move gets
    // +0.2 over uniform, the other two split the remainder.
    let mut valuation = Valuation::new();
    for (pm, play) in PLAYS.iter().enumerate() {
        let beater = (pm + 1) % 3;
        for (o, opp) in PLAYS.iter().enumerate() {
            let p = if o == beater {
                1.0 / 3.0 + 0.2
            } else {
                (1.0 - (1.0 / 3.0 + 0.2)) / 2.0
            };
            valuation.set(format!("x_{play}_{opp}"), p);
        }
    }

    let pmdp = b2.build().expect("rps model is valid");
    let spec = BenchmarkSpec {
        name: "rps".to_string(),
        expected_states: 1321,
        expected_actions: 3,
        expected_params: 9,
        alpha: 0.05,
        horizon: ROUNDS as usize,
        valuation,
        notes: "20 rounds; win +1, lose -1, draw 0, tracked in the state as the \
                running score. States carry (round, score, previous player move): \
                1 + 3*399 round states + 3*41 terminals = 1321.\n\
                The opponent's play depends on the player's previous move through a \
                3x3 parameter table (9 parameters, row sums enforced by the \
                graph-preserving condition); round one uses the rock row.\n\
                Canonical bias: +0.2 on the play that would have beaten the player's \
                previous move.\n\
                Per-round rewards are realized as the exact score potential \
                (1-gamma)/gamma * score paid by every state including terminals, \
                which reproduces the per-round discounted return trajectory-wise."
            .to_string(),
    };
    check_dims(Benchmark { pmdp, spec })
}
