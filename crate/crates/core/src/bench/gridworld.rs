//! Slippery gridworld: a 5x5 grid with four move actions and one shared
//! slip parameter on every movement distribution.

use super::{check_dims, Benchmark, BenchmarkSpec, BenchError};
use crate::pmdp::{PMdp, PMdpBuilder};
use crate::poly::{Polynomial as P, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;

pub const DIRECTIONS: [&str; 4] = ["up", "down", "left", "right"];

pub(crate) fn gridworld_model(n: usize) -> PMdp {
    let mut b = PMdpBuilder::new(format!("gridworld{n}x{n}"));
    b.set_gamma(BigRational::new(BigInt::from(19), BigInt::from(20)));
    b.set_rmax(BigRational::from_integer(BigInt::from(1)));
    b.add_param("slip");
    let cell = |r: usize, c: usize| r * n + c;
    for r in 0..n {
        for c in 0..n {
            b.add_state(format!("c{r}_{c}"));
        }
    }
    for d in DIRECTIONS {
        b.add_action(d);
    }
    b.set_initial(cell(0, 0));
    let goal = cell(n - 1, n - 1);
    let slip = P::var("slip");
    let keep = P::from_int(1).sub(&slip);
    for r in 0..n {
        for c in 0..n {
            let s = cell(r, c);
            for (a, _) in DIRECTIONS.iter().enumerate() {
                if s == goal {
                    // Absorbing goal.
                    b.add_trans(s, a, s, P::from_int(1));
                    continue;
                }
                b.set_reward_int(s, a, -1);
                let (ir, ic) = super::grid_step(n, n, &|_, _| false, r, c, a);
                let target = cell(ir, ic);
                if target == s {
                    // Bumping the border keeps the agent in place surely.
                    b.add_trans(s, a, s, P::from_int(1));
                } else {
                    b.add_trans(s, a, target, keep.clone());
                    b.add_trans(s, a, s, slip.clone());
                }
            }
        }
    }
    b.build().expect("gridworld model is valid")
}

/// A gridworld of side `n`; N = 5 is the published benchmark, smaller sides
/// feed the encoding-size measurements.
pub fn build_gridworld_sized(n: usize) -> Benchmark {
    let pmdp = gridworld_model(n);
    let spec = BenchmarkSpec {
        name: pmdp.name.clone(),
        expected_states: n * n,
        expected_actions: 4,
        expected_params: 1,
        alpha: 0.5,
        horizon: 200,
        valuation: Valuation::from_pairs([("slip", 0.1)]),
        notes: format!(
            "{n}x{n} grid, start top-left, absorbing goal bottom-right, step cost 1.\n\
             Every movement distribution is (intended: 1-slip, stay: slip) with one \
             shared slip parameter; border bumps are sure self-loops.\n\
             Layout chosen to match the published |S|={}; the source does not fix one.",
            n * n
        ),
    };
    Benchmark { pmdp, spec }
}

/// The published 25-state benchmark.
pub fn build_gridworld() -> Result<Benchmark, BenchError> {
    let mut b = build_gridworld_sized(5);
    b.spec.name = "gridworld".to_string();
    check_dims(b)
}
