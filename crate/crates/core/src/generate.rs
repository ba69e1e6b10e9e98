//! Seeded random games for testing and benchmarking.

use num_bigint::BigInt;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::game::{Game, GameBuilder, Player, StateId};
use crate::rational::{rat, Rational};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Non-absorbing states; one target and one sink are added after them.
    pub states: usize,
    pub max_actions: usize,
    pub max_successors: usize,
    /// Only probabilities with power-of-two denominators (at most 1/16).
    pub dyadic: bool,
    /// Chance that a successor is drawn from the current or an earlier state,
    /// which is what creates end components.
    pub back_edge: f64,
    pub min_fraction: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            states: 6,
            max_actions: 2,
            max_successors: 3,
            dyadic: false,
            back_edge: 0.4,
            min_fraction: 0.5,
        }
    }
}

/// Random composition of `total` into `parts` positive integers.
fn composition(rng: &mut ChaCha8Rng, total: usize, parts: usize) -> Vec<usize> {
    let mut cuts: Vec<usize> = sample(rng, total - 1, parts - 1)
        .into_iter()
        .map(|c| c + 1)
        .collect();
    cuts.sort_unstable();
    cuts.push(total);
    let mut prev = 0;
    cuts.into_iter()
        .map(|c| {
            let part = c - prev;
            prev = c;
            part
        })
        .collect()
}

pub fn generate_random_game(config: &GenConfig, seed: u64) -> Game {
    assert!(config.states >= 1 && config.max_actions >= 1 && config.max_successors >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = config.states;
    let mut builder = GameBuilder::new();
    for _ in 0..k {
        let owner = if rng.random_bool(config.min_fraction) {
            Player::Min
        } else {
            Player::Max
        };
        builder.add_state(owner);
    }
    let target = builder.add_target();
    let sink = builder.add_sink();
    builder.set_initial(0);

    for s in 0..k {
        let actions = if config.max_actions == 1 || rng.random_bool(0.2) {
            1
        } else {
            rng.random_range(2..=config.max_actions)
        };
        for a in 0..actions {
            let support = rng.random_range(1..=config.max_successors);
            let mut succ: Vec<StateId> = Vec::with_capacity(support);
            for _ in 0..support {
                let t = if rng.random_bool(config.back_edge) {
                    rng.random_range(0..=s)
                } else {
                    let forward = k - s - 1 + 2;
                    let i = rng.random_range(0..forward);
                    if i < k - s - 1 {
                        s + 1 + i
                    } else if i == k - s - 1 {
                        target
                    } else {
                        sink
                    }
                };
                if !succ.contains(&t) {
                    succ.push(t);
                }
            }
            let denominator = if config.dyadic {
                8
            } else {
                rng.random_range(succ.len().max(2)..=12)
            };
            let weights = composition(&mut rng, denominator, succ.len());
            let dist = succ
                .into_iter()
                .zip(weights)
                .map(|(t, w)| (t, Rational::new(BigInt::from(w), BigInt::from(denominator))))
                .collect();
            builder.add_action(s, format!("a{a}"), dist);
        }
    }
    for goal in [target, sink] {
        while let Some(s) = (0..k).find(|&s| !reaches(&builder, k, s, goal)) {
            let mut dist = builder.distribution(s, 0).to_vec();
            let half = &dist[0].1 * rat(1, 2);
            dist[0].1 = half.clone();
            dist.push((goal, half));
            builder.set_distribution(s, 0, dist);
        }
    }
    builder.build().expect("generated games are valid")
}

fn reaches(builder: &GameBuilder, k: usize, from: StateId, goal: StateId) -> bool {
    let mut seen = vec![false; k + 2];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(s) = stack.pop() {
        if s == goal {
            return true;
        }
        if s >= k {
            continue;
        }
        for a in 0..builder.num_actions(s) {
            for &(t, _) in builder.distribution(s, a) {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::render;
    use crate::graph::{accessible_states, mec_decomposition};
    use crate::rational::dyadic_exponent;

    #[test]
    fn reproducible() {
        let config = GenConfig {
            states: 5,
            ..GenConfig::default()
        };
        assert_eq!(
            render(&generate_random_game(&config, 7)),
            render(&generate_random_game(&config, 7))
        );
        assert_ne!(
            render(&generate_random_game(&config, 7)),
            render(&generate_random_game(&config, 8))
        );
    }

    #[test]
    fn dyadic_flag() {
        let config = GenConfig {
            dyadic: true,
            ..GenConfig::default()
        };
        for seed in 0..20 {
            let g = generate_random_game(&config, seed);
            for st in g.states() {
                for a in st.actions() {
                    for t in a.transitions() {
                        assert!(dyadic_exponent(&t.prob).is_some(), "{}", t.prob);
                    }
                }
            }
        }
    }

    #[test]
    fn target_and_sink_reachable_everywhere() {
        for seed in 0..50 {
            let g = generate_random_game(&GenConfig::default(), seed);
            let (t, z) = (g.targets()[0], g.sinks()[0]);
            for s in g.state_ids() {
                let reach = accessible_states(&g, &[s]);
                assert!(g.is_absorbing(s) || (reach.contains(&t) && reach.contains(&z)));
            }
        }
    }

    #[test]
    fn back_edges_create_mecs() {
        let config = GenConfig {
            back_edge: 0.7,
            ..GenConfig::default()
        };
        let with_mec = (0..100)
            .filter(|&seed| {
                mec_decomposition(&generate_random_game(&config, seed))
                    .iter()
                    .any(|m| !m.is_absorbing())
            })
            .count();
        assert!(with_mec >= 50, "{with_mec}");
    }
}
