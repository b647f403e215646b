//! Taxi: the classic 5x5 pick-up-and-deliver task, parameterized with one
//! movement-outcome parameter triple per cell and direction, shared across
//! all passenger/destination configurations.

use super::{check_dims, Benchmark, BenchmarkSpec, BenchError};
use crate::pmdp::PMdpBuilder;
use crate::poly::{Polynomial as P, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;

const N: usize = 5;
/// Depot cells in the classic layout: R, G, Y, B.
const DEPOTS: [(usize, usize); 4] = [(0, 0), (0, 4), (4, 0), (4, 3)];
/// Vertical walls as (row, col): a wall between (row, col) and (row, col+1).
const WALLS: [(usize, usize); 6] = [(0, 1), (1, 1), (3, 0), (4, 0), (3, 2), (4, 2)];

/// Outcomes of a movement: the intended direction and its two perpendicular
/// slips.
fn outcome_dirs(dir: usize) -> [usize; 3] {
    // 0 south, 1 north, 2 east, 3 west.
    match dir {
        0 | 1 => [dir, 2, 3],
        _ => [dir, 0, 1],
    }
}

fn wall_between(r: usize, c: usize, dir: usize) -> bool {
    match dir {
        2 => WALLS.contains(&(r, c)),
        3 => c > 0 && WALLS.contains(&(r, c - 1)),
        _ => false,
    }
}

fn step(r: usize, c: usize, dir: usize) -> (usize, usize) {
    if wall_between(r, c, dir) {
        return (r, c);
    }
    match dir {
        0 if r + 1 < N => (r + 1, c),
        1 if r > 0 => (r - 1, c),
        2 if c + 1 < N => (r, c + 1),
        3 if c > 0 => (r, c - 1),
        _ => (r, c),
    }
}

pub fn build_taxi() -> Result<Benchmark, BenchError> {
    let mut b = PMdpBuilder::new("taxi");
    b.set_gamma(BigRational::new(BigInt::from(19), BigInt::from(20)));
    b.set_rmax(BigRational::from_integer(BigInt::from(20)));

    // 25 cells x 5 passenger locations (4 depots + in-taxi) x 4 destinations
    // plus one absorbing terminal.
    let state = |r: usize, c: usize, pass: usize, dest: usize| ((r * N + c) * 5 + pass) * 4 + dest;
    for r in 0..N {
        for c in 0..N {
            for pass in 0..5 {
                for dest in 0..4 {
                    b.add_state(format!("t_r{r}c{c}_p{pass}_d{dest}"));
                }
            }
        }
    }
    let done = b.add_state("done");
    for name in ["south", "north", "east", "west", "pickup", "dropoff"] {
        b.add_action(name);
    }
    // Movement-outcome parameters: 25 cells x 4 directions x 3 outcomes.
    let dirs = ["s", "n", "e", "w"];
    for r in 0..N {
        for c in 0..N {
            for d in dirs {
                for k in 0..3 {
                    b.add_param(format!("x_r{r}c{c}_{d}_{k}"));
                }
            }
        }
    }
    // Classic start: taxi at (2, 2), passenger at depot 0, destination 1.
    b.set_initial(state(2, 2, 0, 1));

    let mut valuation = Valuation::new();
    for r in 0..N {
        for c in 0..N {
            for d in dirs {
                valuation.set(format!("x_r{r}c{c}_{d}_0"), 0.75);
                valuation.set(format!("x_r{r}c{c}_{d}_1"), 0.125);
                valuation.set(format!("x_r{r}c{c}_{d}_2"), 0.125);
            }
        }
    }

    for r in 0..N {
        for c in 0..N {
            for pass in 0..5 {
                for dest in 0..4 {
                    let s = state(r, c, pass, dest);
                    // Movement: intended direction plus perpendicular slips,
                    // one parameter per outcome; clamped outcomes merge by
                    // label addition.
                    for dir in 0..4usize {
                        b.set_reward_int(s, dir, -1);
                        for (k, od) in outcome_dirs(dir).into_iter().enumerate() {
                            let (nr, nc) = step(r, c, od);
                            let label = P::var(format!("x_r{r}c{c}_{}_{k}", dirs[dir]));
                            b.add_trans(s, dir, state(nr, nc, pass, dest), label);
                        }
                    }
                    // Pickup.
                    let legal_pickup = pass < 4 && DEPOTS[pass] == (r, c);
                    if legal_pickup {
                        b.set_reward_int(s, 4, -1);
                        b.add_trans(s, 4, state(r, c, 4, dest), P::from_int(1));
                    } else {
                        b.set_reward_int(s, 4, -10);
                        b.add_trans(s, 4, s, P::from_int(1));
                    }
                    // Dropoff.
                    let legal_dropoff = pass == 4 && DEPOTS[dest] == (r, c);
                    if legal_dropoff {
                        b.set_reward_int(s, 5, 20);
                        b.add_trans(s, 5, done, P::from_int(1));
                    } else {
                        b.set_reward_int(s, 5, -10);
                        b.add_trans(s, 5, s, P::from_int(1));
                    }
                }
            }
        }
    }
    b.add_trans(done, 0, done, P::from_int(1));

    let pmdp = b.build().expect("taxi model is valid");
    let spec = BenchmarkSpec {
        name: "taxi".to_string(),
        expected_states: 501,
        expected_actions: 6,
        expected_params: 300,
        alpha: 0.05,
        horizon: 200,
        valuation,
        notes: "Classic 5x5 layout with four depots and the usual walls; 500 \
                configuration states plus one absorbing terminal after a successful \
                dropoff.\n\
                Movement from each cell in each direction has three outcomes \
                (intended, slip left, slip right), each with its own parameter shared \
                across all 20 passenger/destination configurations: 25*4*3 = 300 \
                parameters; canonical valuation (0.75, 0.125, 0.125).\n\
                Rewards: -1 per step, +20 successful dropoff, -10 illegal pickup or \
                dropoff."
            .to_string(),
    };
    check_dims(Benchmark { pmdp, spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::aval_cval_prune;
    use crate::pspibb::label_classes;

    #[test]
    fn movement_classes_pool_across_configurations() {
        let b = build_taxi().unwrap();
        let lc = label_classes(&b.pmdp).unwrap();
        // Each movement class gathers the 20 passenger/destination copies.
        let m = &b.pmdp;
        let s = m.state_id("t_r2c2_p0_d1").unwrap();
        let class = lc.sa_class(s, 0).unwrap();
        assert_eq!(lc.sa_members[class].len(), 20);
    }

    #[test]
    fn game_pruning_removes_pairs() {
        let b = build_taxi().unwrap();
        let (_, result) = aval_cval_prune(&b.pmdp).unwrap();
        assert!(
            !result.removed.is_empty(),
            "expected at least one pruned pair"
        );
    }
}
