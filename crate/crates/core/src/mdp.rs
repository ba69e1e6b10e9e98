//! Value iteration and the Minimizer's best response in a Maximizer-fixed
//! game.

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, Player, StateId, Strategy};
use crate::graph::zero_value_states;
use crate::rational::{solve_exact, Rational};
use crate::solution::Values;

/// Below this many states a parallel sweep costs more than it saves.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViConfig {
    pub epsilon: f64,
    pub max_iterations: usize,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            epsilon: 1e-6,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One synchronous Bellman update: Maximizer states take the best action
/// value, Minimizer states the worst, absorbing states keep their value.
pub fn bellman_step(game: &Game, values: &[f64]) -> Vec<f64> {
    let update = |s: StateId| -> f64 {
        if game.is_absorbing(s) {
            return values[s];
        }
        let q = game.actions(s).iter().map(|a| a.expect(values));
        match game.owner(s) {
            Player::Max => q.fold(f64::NEG_INFINITY, f64::max),
            Player::Min => q.fold(f64::INFINITY, f64::min),
        }
    };
    if game.num_states() >= PARALLEL_THRESHOLD {
        game.state_ids().into_par_iter().map(update).collect()
    } else {
        game.state_ids().map(update).collect()
    }
}

/// Bellman iteration from the target indicator until the largest update
/// drops below `epsilon`. The iterates increase towards the values but the
/// stopping rule gives no error bound.
pub fn unguaranteed_vi(game: &Game, config: &ViConfig) -> ViResult {
    unguaranteed_vi_observed(game, config, |_, _| {})
}

/// Like [`unguaranteed_vi`], calling `observe(k, v)` with every iterate.
pub fn unguaranteed_vi_observed(
    game: &Game,
    config: &ViConfig,
    mut observe: impl FnMut(usize, &[f64]),
) -> ViResult {
    let mut values: Vec<f64> = game.indicator_of_targets();
    observe(0, &values);
    for k in 1..=config.max_iterations {
        let next = bellman_step(game, &values);
        let delta = next
            .iter()
            .zip(&values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        values = next;
        observe(k, &values);
        if delta < config.epsilon {
            return ViResult {
                values,
                iterations: k,
                converged: true,
            };
        }
    }
    ViResult {
        values,
        iterations: config.max_iterations,
        converged: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BestResponseMode {
    Vi,
    PolicyIteration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestResponse {
    pub values: Values,
    pub strategy: Strategy,
    pub iterations: usize,
}

/// Minimal probability of reaching a target in a game whose Maximizer states
/// have a single action, together with a Minimizer strategy attaining it.
pub fn min_best_response(
    mdp: &Game,
    mode: BestResponseMode,
    precision: f64,
) -> Result<BestResponse> {
    if let Some(s) = mdp
        .state_ids()
        .find(|&s| mdp.is_controlled_by(s, Player::Max) && mdp.actions(s).len() != 1)
    {
        return Err(Error::Precondition(format!(
            "Maximizer state {s} has {} actions",
            mdp.actions(s).len()
        )));
    }
    match mode {
        BestResponseMode::Vi => Ok(min_vi(mdp, precision)),
        BestResponseMode::PolicyIteration => Ok(min_policy_iteration(mdp)),
    }
}

fn min_vi(mdp: &Game, precision: f64) -> BestResponse {
    let result = unguaranteed_vi(
        mdp,
        &ViConfig {
            epsilon: precision,
            max_iterations: usize::MAX,
        },
    );
    let values = result.values;
    let strategy = Strategy::from_fn(mdp, Player::Min, |s| {
        let q: Vec<f64> = mdp.actions(s).iter().map(|a| a.expect(&values)).collect();
        let best = q.iter().copied().fold(f64::INFINITY, f64::min);
        q.iter()
            .position(|&v| v <= best + precision)
            .expect("non-empty action list")
    });
    BestResponse {
        values: Values::Approx(values),
        strategy,
        iterations: result.iterations,
    }
}

fn min_policy_iteration(mdp: &Game) -> BestResponse {
    let mut zero = vec![false; mdp.num_states()];
    for s in zero_value_states(mdp) {
        zero[s] = true;
    }
    let stays_at_zero = |s: StateId| -> usize {
        mdp.actions(s)
            .iter()
            .position(|a| a.successors().all(|t| zero[t] || mdp.is_sink(t)))
            .expect("a zero-value Minimizer state can stay at zero")
    };
    let mut tau = Strategy::from_fn(
        mdp,
        Player::Min,
        |s| if zero[s] { stays_at_zero(s) } else { 0 },
    );
    let mut iterations = 0;
    loop {
        iterations += 1;
        let values = evaluate(mdp, &tau, &zero);
        let mut improved = false;
        for s in mdp
            .state_ids()
            .filter(|&s| mdp.is_controlled_by(s, Player::Min) && !zero[s])
        {
            let q: Vec<Rational> = mdp.actions(s).iter().map(|a| a.expect(&values)).collect();
            let best = q.iter().min().expect("non-empty action list");
            let current = tau.get(s).expect("Minimizer state has a choice");
            if *best < q[current] {
                tau.set(s, q.iter().position(|v| v == best).unwrap());
                improved = true;
            }
        }
        if !improved {
            return BestResponse {
                values: Values::Exact(values),
                strategy: tau,
                iterations,
            };
        }
    }
}

/// Exact reachability under a fixed Minimizer strategy, with the zero-value
/// states pinned to 0 so the system is non-singular.
fn evaluate(mdp: &Game, tau: &Strategy, zero: &[bool]) -> Vec<Rational> {
    let n = mdp.num_states();
    let unknown: Vec<StateId> = mdp
        .state_ids()
        .filter(|&s| !mdp.is_absorbing(s) && !zero[s])
        .collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let k = unknown.len();
    let mut a = vec![vec![Rational::zero(); k]; k];
    let mut b = vec![vec![Rational::zero()]; k];
    for (i, &s) in unknown.iter().enumerate() {
        a[i][i] = Rational::one();
        let action = tau.get(s).unwrap_or(0);
        for t in mdp.action(s, action).transitions() {
            if mdp.is_target(t.to) {
                b[i][0] += &t.prob;
            } else if index[t.to] != usize::MAX {
                a[i][index[t.to]] -= &t.prob;
            }
        }
    }
    let x = solve_exact(a, b).expect("every policy leaves the non-zero states almost surely");
    let mut values: Vec<Rational> = mdp.indicator_of_targets();
    for (i, &s) in unknown.iter().enumerate() {
        values[s] = x[i][0].clone();
    }
    values
}

/// The action whose lower bound beats the upper bound of every other action,
/// if there is one. `bounds[a] = (lower, upper)` for each action of `s`.
pub fn action_dominance_check(
    game: &Game,
    s: StateId,
    bounds: &[(f64, f64)],
) -> Result<Option<usize>> {
    if s >= game.num_states() {
        return Err(Error::UnknownState(s));
    }
    if bounds.len() != game.actions(s).len() {
        return Err(Error::Invalid(format!(
            "state {s} has {} actions, {} intervals given",
            game.actions(s).len(),
            bounds.len()
        )));
    }
    Ok((0..bounds.len()).find(|&a| (0..bounds.len()).all(|b| b == a || bounds[a].0 > bounds[b].1)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameBuilder;
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

    #[test]
    fn vi_on_coin() {
        let g = coin();
        let one = unguaranteed_vi(
            &g,
            &ViConfig {
                epsilon: 1e-9,
                max_iterations: 1,
            },
        );
        assert_eq!(one.values, vec![0.5, 1.0, 0.0]);
        let none = unguaranteed_vi(
            &g,
            &ViConfig {
                epsilon: 1e-9,
                max_iterations: 0,
            },
        );
        assert_eq!(none.values, vec![0.0, 1.0, 0.0]);
        assert!(!none.converged);
        assert!(unguaranteed_vi(&g, &ViConfig::default()).converged);
    }

    #[test]
    fn vi_self_loop_versus_exit() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        b.add_action(s, "stay", vec![(s, int(1))]);
        b.add_action(s, "go", vec![(t, int(1))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        let r = unguaranteed_vi(
            &g,
            &ViConfig {
                epsilon: 1e-9,
                max_iterations: 1,
            },
        );
        assert_eq!(r.values[0], 1.0);
    }

    #[test]
    fn minimizer_picks_the_sink() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Min);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "win", vec![(t, int(1))]);
        b.add_action(s, "lose", vec![(z, int(1))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        for mode in [BestResponseMode::Vi, BestResponseMode::PolicyIteration] {
            let br = min_best_response(&g, mode, 1e-9).unwrap();
            assert_eq!(br.values.get(0), 0.0);
            assert_eq!(br.strategy.get(0), Some(1));
        }
    }

    #[test]
    fn minimizer_stays_in_a_loop() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Min);
        let x = b.add_state(Player::Max);
        let t = b.add_target();
        b.add_action(s, "go", vec![(x, int(1))]);
        b.add_action(s, "stay", vec![(s, int(1))]);
        b.add_action(x, "a", vec![(t, rat(1, 2)), (s, rat(1, 2))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        let br = min_best_response(&g, BestResponseMode::PolicyIteration, 1e-9).unwrap();
        assert_eq!(br.values.exact().unwrap()[0], int(0));
        assert_eq!(br.strategy.get(0), Some(1));
    }

    #[test]
    fn chain_without_choices() {
        // s: 1/2 -> s2, 1/2 -> z; s2: 1/2 -> t, 1/2 -> s.  x = 1/3, y = 2/3
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let s2 = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "a", vec![(s2, rat(1, 2)), (z, rat(1, 2))]);
        b.add_action(s2, "a", vec![(t, rat(1, 2)), (s, rat(1, 2))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        let br = min_best_response(&g, BestResponseMode::PolicyIteration, 1e-9).unwrap();
        assert_eq!(
            br.values,
            Values::Exact(vec![rat(1, 3), rat(2, 3), int(1), int(0)])
        );
        let vi = min_best_response(&g, BestResponseMode::Vi, 1e-12).unwrap();
        assert!((vi.values.get(0) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_maximizer_choice() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        b.add_action(s, "a", vec![(t, int(1))]);
        b.add_action(s, "b", vec![(t, int(1))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        assert!(matches!(
            min_best_response(&g, BestResponseMode::Vi, 1e-9),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn dominance() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        b.add_action(s, "a", vec![(t, int(1))]);
        b.add_action(s, "b", vec![(t, int(1))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        assert_eq!(
            action_dominance_check(&g, s, &[(0.8, 0.9), (0.1, 0.2)]).unwrap(),
            Some(0)
        );
        assert_eq!(
            action_dominance_check(&g, s, &[(0.1, 0.5), (0.4, 0.6)]).unwrap(),
            None
        );
        assert_eq!(
            action_dominance_check(&g, t, &[(0.0, 1.0)]).unwrap(),
            Some(0)
        );
    }
}
