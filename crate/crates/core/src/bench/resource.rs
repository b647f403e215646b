//! Resource gathering: collect gold and a gem on a 10x10 obstacle grid and
//! deliver them at home, with a single shared slip parameter on movement.

use super::{check_dims, Benchmark, BenchmarkSpec, BenchError};
use crate::pmdp::PMdpBuilder;
use crate::poly::{Polynomial as P, Valuation};
use num_bigint::BigInt;
use num_rational::BigRational;

const ROWS: usize = 10;
const COLS: usize = 10;
const OBSTACLES: [(usize, usize); 6] = [(4, 4), (4, 5), (5, 4), (5, 5), (2, 7), (7, 2)];
const HOME: (usize, usize) = (0, 0);
const GOLD: (usize, usize) = (9, 9);
const GEM: (usize, usize) = (0, 9);

fn blocked(r: usize, c: usize) -> bool {
    OBSTACLES.contains(&(r, c))
}

pub fn build_resource_gathering() -> Result<Benchmark, BenchError> {
    let mut b = PMdpBuilder::new("resource-gathering");
    b.set_gamma(BigRational::new(BigInt::from(19), BigInt::from(20)));
    b.set_rmax(BigRational::from_integer(BigInt::from(20)));
    b.add_param("slip");

    // 94 walkable cells x 4 flag combinations.
    let mut cell_index = vec![vec![None; COLS]; ROWS];
    let mut cells = Vec::new();
    for r in 0..ROWS {
        for c in 0..COLS {
            if !blocked(r, c) {
                cell_index[r][c] = Some(cells.len());
                cells.push((r, c));
            }
        }
    }
    let state = |ci: usize, gold: bool, gem: bool| ci * 4 + (gold as usize) * 2 + gem as usize;
    for &(r, c) in &cells {
        for gold in [false, true] {
            for gem in [false, true] {
                b.add_state(format!(
                    "c{r}_{c}_g{}m{}",
                    gold as usize, gem as usize
                ));
            }
        }
    }
    for d in super::gridworld::DIRECTIONS {
        b.add_action(d);
    }
    let home_ci = cell_index[HOME.0][HOME.1].unwrap();
    b.set_initial(state(home_ci, false, false));

    let slip = P::var("slip");
    let keep = P::from_int(1).sub(&slip);
    // Arriving at a resource cell picks the resource up.
    let arrive = |r: usize, c: usize, gold: bool, gem: bool| {
        let ci = cell_index[r][c].unwrap();
        state(ci, gold || (r, c) == GOLD, gem || (r, c) == GEM)
    };
    for &(r, c) in &cells {
        for gold in [false, true] {
            for gem in [false, true] {
                let s = state(cell_index[r][c].unwrap(), gold, gem);
                let at_home = (r, c) == HOME;
                // Delivery pays when leaving home; carried flags reset.
                let payout = if at_home {
                    10 * (gold as i64 + gem as i64)
                } else {
                    0
                };
                let (bg, bm) = if at_home { (false, false) } else { (gold, gem) };
                for a in 0..4usize {
                    b.set_reward_int(s, a, payout - 1);
                    let (nr, nc) = super::grid_step(ROWS, COLS, &blocked, r, c, a);
                    if (nr, nc) == (r, c) {
                        b.add_trans(s, a, arrive(r, c, bg, bm), P::from_int(1));
                    } else {
                        b.add_trans(s, a, arrive(nr, nc, bg, bm), keep.clone());
                        b.add_trans(s, a, arrive(r, c, bg, bm), slip.clone());
                    }
                }
            }
        }
    }
    let pmdp = b.build().expect("resource-gathering model is valid");
    let spec = BenchmarkSpec {
        name: "resource-gathering".to_string(),
        expected_states: 376,
        expected_actions: 4,
        expected_params: 1,
        alpha: 0.2,
        horizon: 200,
        valuation: Valuation::from_pairs([("slip", 0.1)]),
        notes: "10x10 grid minus 6 obstacle cells (94 walkable) x gold/gem flags = 376 \
                states; gold at (9,9), gem at (0,9), home at (0,0).\n\
                Movement is (intended: 1-slip, stay: slip) with one shared parameter; \
                arriving on a resource cell picks it up; any action leaving home pays \
                10 per carried resource and resets the flags; step cost 1.\n\
                Layout and delivery convention chosen to match the published \
                dimensions; enemy attacks of the original task are omitted."
            .to_string(),
    };
    check_dims(Benchmark { pmdp, spec })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delivery_pays_only_from_home() {
        let b = build_resource_gathering().unwrap();
        let m = &b.pmdp;
        let both = m.state_id("c0_0_g1m1").unwrap();
        let away = m.state_id("c3_3_g1m1").unwrap();
        assert_eq!(m.reward_f64(both, 0), 19.0);
        assert_eq!(m.reward_f64(away, 0), -1.0);
    }

    #[test]
    fn arrival_sets_flags_and_home_resets() {
        let b = build_resource_gathering().unwrap();
        let m = &b.pmdp;
        // Stepping right from (9,8) reaches the gold cell: the slip-free
        // successor carries the gold flag.
        let s = m.state_id("c9_8_g0m0").unwrap();
        let right = 3;
        let succ_names: Vec<&str> = m
            .transitions(s, right)
            .iter()
            .map(|(t, _)| m.states()[*t].as_str())
            .collect();
        assert!(succ_names.contains(&"c9_9_g1m0"));
        // Any move out of home with flags lands flag-free.
        let loaded = m.state_id("c0_0_g1m1").unwrap();
        for (t, _) in m.transitions(loaded, 1) {
            assert!(m.states()[*t].contains("g0m0"));
        }
    }
}
