//! Inputs shared by the benchmarks.

use sgsolve_core::generate::{generate_random_game, GenConfig};
use sgsolve_core::Game;

/// Seeded random games of the given size with plenty of end components.
pub fn random_games(states: usize, count: u64) -> Vec<Game> {
    let config = GenConfig {
        states,
        back_edge: 0.33,
        ..GenConfig::default()
    };
    (0..count)
        .map(|seed| generate_random_game(&config, seed))
        .collect()
}
