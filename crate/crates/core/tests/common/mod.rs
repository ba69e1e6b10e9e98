#![allow(dead_code)]

use proptest::prelude::{any, ProptestConfig};
use proptest::strategy::Strategy as _;
use sgsolve_core::generate::{generate_random_game, GenConfig};
use sgsolve_core::oracle::chain_reachability;
use sgsolve_core::{induce_mc, Game, Rational, StateKind, Strategy};

/// Games with at most `max_states` non-absorbing states and MEC-friendly
/// back edges.
pub fn games(max_states: usize) -> impl proptest::strategy::Strategy<Value = Game> {
    games_with(max_states, false)
}

pub fn dyadic_games(max_states: usize) -> impl proptest::strategy::Strategy<Value = Game> {
    games_with(max_states, true)
}

fn games_with(max_states: usize, dyadic: bool) -> impl proptest::strategy::Strategy<Value = Game> {
    (1..=max_states, 2usize..=3, 0.0f64..0.8, any::<u64>()).prop_map(
        move |(states, max_actions, back_edge, seed)| {
            let config = GenConfig {
                states,
                max_actions,
                back_edge,
                dyadic,
                ..GenConfig::default()
            };
            generate_random_game(&config, seed)
        },
    )
}

/// Exact probability of reaching a target under a strategy pair.
pub fn pair_value(game: &Game, sigma: &Strategy, tau: &Strategy) -> Vec<Rational> {
    chain_reachability(&induce_mc(game, sigma, tau).unwrap()).unwrap()
}

/// The same game with every sink turned into a target.
pub fn sinks_as_targets(game: &Game) -> Game {
    let mut b = game.to_builder();
    for z in game.sinks() {
        b.set_kind(z, StateKind::Target);
    }
    b.build().unwrap()
}

pub fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}
