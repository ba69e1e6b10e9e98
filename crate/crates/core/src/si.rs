//! Strategy iteration: repeatedly solve the Minimizer's best response to the
//! current Maximizer strategy and switch Maximizer choices that improve.

use std::time::Instant;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::Result;
use crate::game::{induce_mdp, Game, GameBuilder, Player, StateId, StateKind, Strategy};
use crate::graph::{
    accessible_states, attractor_layers, attractor_layers_restricted, attractor_strategy,
    collapse_to_sinks, improper_states, mec_decomposition, mec_postorder, zero_value_states,
};
use crate::mdp::{min_best_response, unguaranteed_vi, BestResponseMode, ViConfig};
use crate::rational::{quantize, Rational};
use crate::solution::{Guarantee, SolveResult, Stats, Values};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiInit {
    Attractor,
    ViSeeded,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiConfig {
    pub init: SiInit,
    pub vi_epsilon: f64,
    pub opponent: BestResponseMode,
    pub opponent_precision: f64,
    pub topological: bool,
}

impl Default for SiConfig {
    fn default() -> Self {
        SiConfig {
            init: SiInit::ViSeeded,
            vi_epsilon: 1e-6,
            opponent: BestResponseMode::PolicyIteration,
            opponent_precision: 1e-8,
            topological: false,
        }
    }
}

/// One round of strategy iteration as seen by an observer: the Maximizer
/// strategy and the Minimizer's best-response values against it.
#[derive(Clone, Debug, PartialEq)]
pub struct SiRound {
    pub strategy: Strategy,
    pub values: Values,
}

pub fn solve_si(game: &Game, config: &SiConfig) -> Result<SolveResult> {
    if config.topological {
        topological_si(game, config)
    } else {
        solve_si_observed(game, config, |_| {})
    }
}

/// Strategy iteration calling `observe` once per round, on the game after
/// zero-value states have been turned into sinks.
pub fn solve_si_observed(
    game: &Game,
    config: &SiConfig,
    mut observe: impl FnMut(&SiRound),
) -> Result<SolveResult> {
    let start = Instant::now();
    let zero = zero_value_states(game);
    let reduced = collapse_to_sinks(game, &zero);
    let mut sigma = match config.init {
        SiInit::Attractor => attractor_strategy(&reduced)?,
        SiInit::ViSeeded => {
            let vi = unguaranteed_vi(
                &reduced,
                &ViConfig {
                    epsilon: config.vi_epsilon,
                    ..ViConfig::default()
                },
            );
            initial_strategy_from_estimates(&reduced, &vi.values)?.0
        }
    };
    let mut stats = Stats::default();
    let tolerance = 2.0 * config.opponent_precision;
    let (values, tau) = loop {
        stats.iterations += 1;
        stats.mdp_solves += 1;
        let br = min_best_response(
            &induce_mdp(&reduced, &sigma)?,
            config.opponent,
            config.opponent_precision,
        )?;
        observe(&SiRound {
            strategy: sigma.clone(),
            values: br.values.clone(),
        });
        let next = improve(&reduced, &sigma, &br.values, tolerance);
        if next == sigma {
            break (br.values, br.strategy);
        }
        sigma = next;
    };
    stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    let (max_strategy, min_strategy) = lift_strategies(game, &zero, &sigma, &tau);
    let guarantee = match config.opponent {
        BestResponseMode::PolicyIteration => Guarantee::Exact,
        BestResponseMode::Vi => Guarantee::Epsilon,
    };
    Ok(SolveResult {
        values,
        max_strategy,
        min_strategy,
        stats,
        method: "si".into(),
        guarantee,
    })
}

/// Switches each Maximizer state to a best action under `values`, keeping the
/// current action whenever it is among the best.
fn improve(game: &Game, sigma: &Strategy, values: &Values, tolerance: f64) -> Strategy {
    let mut next = sigma.clone();
    for s in sigma.domain() {
        let current = sigma.get(s).unwrap();
        match values {
            Values::Exact(v) => {
                let q: Vec<Rational> = game.actions(s).iter().map(|a| a.expect(v)).collect();
                let best = q.iter().max().unwrap();
                if q[current] < *best {
                    next.set(s, q.iter().position(|x| x == best).unwrap());
                }
            }
            Values::Approx(v) => {
                let q: Vec<f64> = game.actions(s).iter().map(|a| a.expect(v)).collect();
                let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if q[current] < best - tolerance {
                    next.set(s, q.iter().position(|&x| x == best).unwrap());
                }
            }
        }
    }
    next
}

/// Strategies of the reduced game extended to the zero-value states: the
/// Minimizer keeps the play among them, the Maximizer's choice is irrelevant.
fn lift_strategies(
    game: &Game,
    zero: &[StateId],
    sigma: &Strategy,
    tau: &Strategy,
) -> (Strategy, Strategy) {
    let mut is_zero = vec![false; game.num_states()];
    for &s in zero {
        is_zero[s] = true;
    }
    let max = Strategy::from_fn(game, Player::Max, |s| sigma.get(s).unwrap_or(0));
    let min = Strategy::from_fn(game, Player::Min, |s| {
        if is_zero[s] {
            game.actions(s)
                .iter()
                .position(|a| a.successors().all(|t| is_zero[t] || game.is_sink(t)))
                .unwrap_or(0)
        } else {
            tau.get(s).unwrap_or(0)
        }
    });
    (max, min)
}

/// Greedy Maximizer strategy from value estimates (ties to the lowest action),
/// made proper by moving the states of each improper end component to their
/// attractor action. Returns the strategy and the repaired states.
pub fn initial_strategy_from_estimates(
    game: &Game,
    estimates: &[f64],
) -> Result<(Strategy, Vec<StateId>)> {
    let mut sigma = Strategy::from_fn(game, Player::Max, |s| {
        let q: Vec<f64> = game
            .actions(s)
            .iter()
            .map(|a| a.expect(estimates))
            .collect();
        let mut best = 0;
        for (a, &v) in q.iter().enumerate() {
            if v > q[best] {
                best = a;
            }
        }
        best
    });
    let mut repaired: Vec<StateId> = Vec::new();
    let bad = improper_states(game, &sigma)?;
    if bad.is_empty() {
        return Ok((sigma, repaired));
    }
    // fails with the unreachable states if the attractor misses any
    attractor_strategy(game)?;
    let (_, choice) = attractor_layers(game, |s| game.is_absorbing(s));
    let mut bad = bad;
    while !bad.is_empty() {
        let mut changed = false;
        for s in bad {
            if let Some(a) = choice[s] {
                if sigma.get(s) != Some(a) {
                    sigma.set(s, a);
                    repaired.push(s);
                    changed = true;
                }
            }
        }
        assert!(changed, "attractor choices always make the strategy proper");
        bad = improper_states(game, &sigma)?;
    }
    repaired.sort_unstable();
    repaired.dedup();
    Ok((sigma, repaired))
}

/// Optimal strategies read off a value vector that is correct up to `tol`.
///
/// The Minimizer may take any action attaining its state's value. The
/// Maximizer is restricted to such actions too, but that alone can circle
/// forever inside an end component, so among them it takes one that moves
/// down the attractor layers of the targets.
pub fn strategies_from_values(game: &Game, values: &[f64], tol: f64) -> (Strategy, Strategy) {
    let q = |s: StateId, a: usize| game.action(s, a).expect(values);
    let optimal = |s: StateId, a: usize| match game.owner(s) {
        Player::Max => q(s, a) >= values[s] - tol,
        Player::Min => q(s, a) <= values[s] + tol,
    };
    let (_, choice) = attractor_layers_restricted(game, |s| game.is_target(s), optimal);
    let pick = |s: StateId| {
        let best = (0..game.actions(s).len()).find(|&a| optimal(s, a));
        let fallback = || {
            let qs: Vec<f64> = (0..game.actions(s).len()).map(|a| q(s, a)).collect();
            let mut best = 0;
            for (a, &v) in qs.iter().enumerate() {
                let better = match game.owner(s) {
                    Player::Max => v > qs[best],
                    Player::Min => v < qs[best],
                };
                if better {
                    best = a;
                }
            }
            best
        };
        best.unwrap_or_else(fallback)
    };
    let max = Strategy::from_fn(game, Player::Max, |s| match choice[s] {
        Some(a) if values[s] > tol => a,
        _ => pick(s),
    });
    let min = Strategy::from_fn(game, Player::Min, pick);
    (max, min)
}

/// Strategy iteration over the MEC quotient: components are solved in DFS
/// post-order, each together with everything reachable from it that is still
/// unsolved, with solved states frozen as weighted target/sink mixtures. The
/// remaining states are solved last.
pub fn topological_si(game: &Game, config: &SiConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let inner = SiConfig {
        topological: false,
        ..*config
    };
    let exact = config.opponent == BestResponseMode::PolicyIteration;
    let n = game.num_states();
    let mut solved: Vec<Option<Rational>> = (0..n)
        .map(|s| match game.kind(s) {
            StateKind::Target => Some(Rational::one()),
            StateKind::Sink => Some(Rational::zero()),
            StateKind::Normal => None,
        })
        .collect();
    let mut approx: Vec<f64> = vec![0.0; n];
    let mut max_choice: Vec<Option<usize>> = vec![None; n];
    let mut min_choice: Vec<Option<usize>> = vec![None; n];
    let mut stats = Stats::default();

    let mecs = mec_decomposition(game);
    let mut groups: Vec<Vec<StateId>> = mec_postorder(game, &mecs)
        .into_iter()
        .filter(|&i| !mecs[i].is_absorbing())
        .map(|i| mecs[i].states.clone())
        .collect();
    groups.push(game.state_ids().collect());
    for group in groups {
        let unknown: Vec<StateId> = accessible_states(game, &group)
            .into_iter()
            .filter(|&s| solved[s].is_none())
            .collect();
        if unknown.is_empty() {
            continue;
        }
        let (sub, local) = frozen_subgame(game, &unknown, &solved);
        let result = solve_si_observed(&sub, &inner, |_| {})?;
        stats.sub_solves += 1;
        stats.iterations += result.stats.iterations;
        stats.mdp_solves += result.stats.mdp_solves;
        for (i, &s) in unknown.iter().enumerate() {
            let value = match &result.values {
                Values::Exact(v) => v[local[i]].clone(),
                Values::Approx(v) => quantize(v[local[i]], 1_000_000_000_000),
            };
            approx[s] = result.values.get(local[i]);
            solved[s] = Some(value);
            max_choice[s] = result.max_strategy.get(local[i]);
            min_choice[s] = result.min_strategy.get(local[i]);
        }
    }
    let values = if exact {
        Values::Exact(
            solved
                .into_iter()
                .map(|v| v.expect("every state solved"))
                .collect(),
        )
    } else {
        for s in game.state_ids().filter(|&s| game.is_absorbing(s)) {
            approx[s] = if game.is_target(s) { 1.0 } else { 0.0 };
        }
        Values::Approx(approx)
    };
    stats.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(SolveResult {
        values,
        max_strategy: Strategy::from_fn(game, Player::Max, |s| max_choice[s].unwrap_or(0)),
        min_strategy: Strategy::from_fn(game, Player::Min, |s| min_choice[s].unwrap_or(0)),
        stats,
        method: "si-topological".into(),
        guarantee: if exact {
            Guarantee::Exact
        } else {
            Guarantee::Epsilon
        },
    })
}

/// The sub-game over `unknown` (in order, ids `0..k`), followed by one frozen
/// state per solved neighbour and a fresh target and sink. Returns the game
/// and the local id of each unknown state.
fn frozen_subgame(
    game: &Game,
    unknown: &[StateId],
    solved: &[Option<Rational>],
) -> (Game, Vec<usize>) {
    let mut builder = GameBuilder::new();
    let mut local = vec![usize::MAX; game.num_states()];
    for &s in unknown {
        local[s] = builder.add_state(game.owner(s));
    }
    let target = builder.add_target();
    let sink = builder.add_sink();
    let frozen_id = |builder: &mut GameBuilder, local: &mut [usize], s: StateId| -> StateId {
        if local[s] == usize::MAX {
            let v = solved[s]
                .clone()
                .expect("successors outside the sub-game are solved");
            local[s] = if v.is_one() {
                target
            } else if v.is_zero() {
                sink
            } else {
                let f = builder.add_state(Player::Max);
                builder.add_action(
                    f,
                    "frozen",
                    vec![(target, v.clone()), (sink, Rational::one() - v)],
                );
                f
            };
        }
        local[s]
    };
    for &s in unknown {
        for action in game.actions(s) {
            let dist = action
                .transitions()
                .iter()
                .map(|t| (frozen_id(&mut builder, &mut local, t.to), t.prob.clone()))
                .collect();
            builder.add_action(local[s], action.name(), dist);
        }
    }
    builder.set_initial(0);
    let ids = unknown.iter().map(|&s| local[s]).collect();
    (
        builder.build().expect("sub-game of a valid game is valid"),
        ids,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::is_proper;
    use crate::rational::{int, rat};

    fn coin() -> Game {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "a", vec![(t, rat(1, 2)), (z, rat(1, 2))]);
        b.set_initial(s);
        b.build().unwrap()
    }

    /// Max state with a self-loop and two exits of value 1/2 and 3/4.
    fn loop_with_exits() -> Game {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "stay", vec![(s, int(1))]);
        b.add_action(s, "half", vec![(t, rat(1, 2)), (z, rat(1, 2))]);
        b.add_action(s, "most", vec![(t, rat(3, 4)), (z, rat(1, 4))]);
        b.set_initial(s);
        b.build().unwrap()
    }

    #[test]
    fn coin_in_one_round() {
        let r = solve_si(&coin(), &SiConfig::default()).unwrap();
        assert_eq!(r.stats.iterations, 1);
        assert_eq!(r.values.exact().unwrap()[0], rat(1, 2));
    }

    #[test]
    fn attractor_start_escapes_the_loop() {
        let g = loop_with_exits();
        for init in [SiInit::Attractor, SiInit::ViSeeded] {
            let r = solve_si(
                &g,
                &SiConfig {
                    init,
                    ..SiConfig::default()
                },
            )
            .unwrap();
            assert_eq!(r.values.exact().unwrap()[0], rat(3, 4));
            assert_eq!(r.max_strategy.get(0), Some(2));
        }
    }

    #[test]
    fn repair_from_zero_estimates() {
        let g = loop_with_exits();
        let (sigma, repaired) = initial_strategy_from_estimates(&g, &[0.0, 1.0, 0.0]).unwrap();
        // all action values tie at 0 except the exits; argmax is "most"
        assert_eq!(sigma.get(0), Some(2));
        assert!(repaired.is_empty());
        let (sigma, repaired) = initial_strategy_from_estimates(&g, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(repaired, vec![0]);
        assert!(is_proper(&g, &sigma).unwrap());
    }

    #[test]
    fn topological_matches_plain() {
        let g = loop_with_exits();
        let plain = solve_si(&g, &SiConfig::default()).unwrap();
        let topo = topological_si(&g, &SiConfig::default()).unwrap();
        assert_eq!(plain.values, topo.values);
        assert_eq!(topo.stats.sub_solves, 1);
    }

    #[test]
    fn vi_opponent_is_close() {
        let g = loop_with_exits();
        let config = SiConfig {
            opponent: BestResponseMode::Vi,
            ..SiConfig::default()
        };
        let r = solve_si(&g, &config).unwrap();
        assert!((r.values.get(0) - 0.75).abs() < 1e-6);
        assert_eq!(r.guarantee, Guarantee::Epsilon);
    }
}
