//! Safe policy improvement with baseline bootstrapping (SPIBB) on parametric
//! MDPs, together with its parametric extension (pSPIBB) and two sound
//! action-pruning preprocessors: a game-based one working on the support
//! graph, and an SMT-based one working on the transition polynomials.
//!
//! The crate is organised along the pipeline:
//!
//! * [`poly`], [`pmdp`], [`format`] — parametric models: canonical polynomial
//!   labels, valuations, instantiation, and the textual model format.
//! * [`mdp`], [`solve`] — concrete tabular MDPs and exact solvers.
//! * [`spibb`], [`bounds`], [`pspibb`] — counting, MLE models, uncertainty
//!   sets, the bootstrapped improved policy, and the N∧/ζ bounds.
//! * [`game`] — antagonistic/cooperative game values over the support graph,
//!   almost-sure reachability, and aVal-cVal pruning.
//! * [`smt`] — Bellman constraint systems over the existential theory of the
//!   reals, SMT-LIB 2 emission, and solver-backed pruning queries.
//! * [`bench`], [`harness`] — benchmark environments and the data-efficiency
//!   experiment loop.
//!
//! [`testgen`] holds deterministic random-model generators shared by the
//! property and acceptance tests.

// Dense tables indexed by state/action ids run through this crate; indexed
// loops over several of them at once read better than zipped iterators.
#![allow(clippy::needless_range_loop)]

pub mod bench;
pub mod bounds;
pub mod format;
pub mod game;
pub mod harness;
pub mod mdp;
pub mod pmdp;
pub mod poly;
pub mod pspibb;
pub mod smt;
pub mod solve;
pub mod spibb;
pub mod testgen;

pub use mdp::Mdp;
pub use pmdp::{PMdp, PMdpBuilder};
pub use poly::{Polynomial, Valuation};
pub use solve::{Policy, ValueTable};
