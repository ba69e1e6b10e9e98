//! Reachability values of simple stochastic games.
//!
//! The crate offers three independent routes to the value vector:
//! strategy iteration ([`si`]), a quadratic program with end-component
//! constraints solved by a certifying local method ([`qp`], [`qp_solver`]),
//! and an exhaustive exact oracle ([`oracle`]).

// Dense elimination and table code reads better with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod format;
pub mod game;
pub mod generate;
pub mod graph;
pub mod mdp;
pub mod models;
pub mod oracle;
pub mod qp;
pub mod qp_solver;
pub mod rational;
pub mod si;
pub mod solution;
pub mod transforms;

pub use error::{Error, Result};
pub use format::{parse_model, render};
pub use game::{
    action_value, induce_mc, induce_mdp, ActionIdx, Game, GameBuilder, Player, StateId, StateKind,
    Strategy, ValueVector,
};
pub use graph::{mec_decomposition, Mec, MecKind};
pub use rational::Rational;
pub use solution::{Guarantee, SolveResult, Stats, Values};
