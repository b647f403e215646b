//! A small pursuit maze: reach the food cell while a stochastically moving
//! ghost patrols the central band. Parameterless; all transition labels are
//! fixed rationals.

use super::{check_dims, Benchmark, BenchmarkSpec, BenchError};
use crate::pmdp::PMdpBuilder;
use crate::poly::{Polynomial as P, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;

const N: usize = 6;
const WALLS: [(usize, usize); 5] = [(1, 1), (1, 4), (4, 1), (4, 4), (5, 0)];
const START: (usize, usize) = (0, 0);
const FOOD: (usize, usize) = (5, 5);
const GHOST_START: (usize, usize) = (2, 2);

fn blocked(r: usize, c: usize) -> bool {
    WALLS.contains(&(r, c))
}

/// The 16-cell band the ghost patrols: rows 2-3 plus the four cells just
/// above and below its middle.
fn ghost_region(r: usize, c: usize) -> bool {
    !blocked(r, c) && (r == 2 || r == 3 || ((r == 1 || r == 4) && (c == 2 || c == 3)))
}

pub fn build_pacman() -> Result<Benchmark, BenchError> {
    let mut b = PMdpBuilder::new("pacman");
    b.set_gamma(BigRational::new(BigInt::from(19), BigInt::from(20)));
    b.set_rmax(BigRational::from_integer(BigInt::from(50)));

    let mut pac_cells = Vec::new();
    let mut ghost_cells = Vec::new();
    for r in 0..N {
        for c in 0..N {
            if !blocked(r, c) {
                pac_cells.push((r, c));
                if ghost_region(r, c) {
                    ghost_cells.push((r, c));
                }
            }
        }
    }
    assert_eq!(pac_cells.len(), 31);
    assert_eq!(ghost_cells.len(), 16);

    let pac_idx = |p: (usize, usize)| pac_cells.iter().position(|&x| x == p).unwrap();
    let ghost_idx = |g: (usize, usize)| ghost_cells.iter().position(|&x| x == g).unwrap();
    let state = |p: (usize, usize), g: (usize, usize)| pac_idx(p) * 16 + ghost_idx(g);
    for &(pr, pc) in &pac_cells {
        for &(gr, gc) in &ghost_cells {
            b.add_state(format!("p{pr}_{pc}_g{gr}_{gc}"));
        }
    }
    let win = b.add_state("win");
    let lose = b.add_state("lose");
    for name in ["north", "south", "east", "west", "stay"] {
        b.add_action(name);
    }
    b.set_initial(state(START, GHOST_START));

    // Ghost moves to a neighbouring region cell with fixed, pairwise
    // distinct weights so every distribution keeps distinct labels.
    let ghost_moves = |g: (usize, usize)| -> Vec<((usize, usize), P)> {
        let mut neighbours: Vec<(usize, usize)> = (0..4)
            .map(|d| super::grid_step(N, N, &blocked, g.0, g.1, d))
            .filter(|&n| n != g && ghost_region(n.0, n.1))
            .collect();
        neighbours.sort_unstable();
        neighbours.dedup();
        let total: i64 = (1..=neighbours.len() as i64).sum();
        neighbours
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, P::from_ratio(i as i64 + 1, total)))
            .collect()
    };

    for &p in &pac_cells {
        for &g in &ghost_cells {
            let s = state(p, g);
            for a in 0..5usize {
                let np = if a == 4 {
                    p
                } else {
                    // Action order north, south, east, west maps onto the
                    // shared helper's up, down, right... adjust explicitly.
                    let dir = match a {
                        0 => 0, // north = up
                        1 => 1, // south = down
                        2 => 3, // east = right
                        _ => 2, // west = left
                    };
                    super::grid_step(N, N, &blocked, p.0, p.1, dir)
                };
                if np == FOOD {
                    b.set_reward_int(s, a, 49);
                    b.add_trans(s, a, win, P::from_int(1));
                    continue;
                }
                b.set_reward_int(s, a, -1);
                if np == g {
                    // Walking into the ghost.
                    b.add_trans(s, a, lose, P::from_int(1));
                    continue;
                }
                for (ng, label) in ghost_moves(g) {
                    let target = if ng == np { lose } else { state(np, ng) };
                    b.add_trans(s, a, target, label);
                }
            }
        }
    }
    for t in [win, lose] {
        b.add_trans(t, 0, t, P::from_int(1));
    }
    // Entering `lose` forfeits 50 discounted reward: the absorbing loop
    // pays -50 * (1 - gamma) forever, which telescopes to exactly -50.
    b.set_reward(lose, 0, BigRational::new(BigInt::from(-5), BigInt::from(2)));

    let pmdp = b.build().expect("pacman model is valid");
    let spec = BenchmarkSpec {
        name: "pacman".to_string(),
        expected_states: 498,
        expected_actions: 5,
        expected_params: 0,
        alpha: 0.05,
        horizon: 200,
        valuation: Valuation::new(),
        notes: "6x6 maze with 5 walls (31 walkable cells); one ghost patrols a \
                16-cell central band, giving 31*16 position pairs plus win/lose \
                terminals = 498 states.\n\
                The ghost steps to a neighbouring band cell with fixed distinct \
                rational weights (1..k)/sum; no parameters anywhere.\n\
                Rewards: step cost 1, +50 on eating the food, -50 (as a discounted \
                absorbing stream) on being caught.\n\
                Maze invented to match the published dimensions."
            .to_string(),
    };
    check_dims(Benchmark { pmdp, spec })
}
