//! Exact ground truth by brute force: every pure memoryless strategy pair is
//! evaluated as an absorbing Markov chain in rational arithmetic.
//!
//! Deliberately naive and self-contained (its own elimination routine, no
//! shared solver code) so it can judge the other solvers.

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game::{induce_mc, Game, Player, StateId, Strategy};
use crate::rational::Rational;

pub const DEFAULT_CAP: u128 = 1 << 22;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleSolution {
    /// max over σ of min over τ, per state.
    pub values: Vec<Rational>,
    /// min over τ of max over σ; equal to `values` for every finite game.
    pub min_max_values: Vec<Rational>,
    pub max_strategy: Strategy,
    pub min_strategy: Strategy,
}

/// Number of strategy pairs the enumeration visits.
pub fn strategy_pair_count(game: &Game) -> u128 {
    game.state_ids()
        .filter(|&s| !game.is_absorbing(s))
        .map(|s| game.actions(s).len() as u128)
        .fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// All pure strategies of `player`, the first controlled state varying slowest.
pub fn all_strategies(game: &Game, player: Player) -> Vec<Strategy> {
    let owned: Vec<StateId> = game
        .state_ids()
        .filter(|&s| game.is_controlled_by(s, player))
        .collect();
    let mut out = Vec::new();
    let mut digits = vec![0usize; owned.len()];
    loop {
        let mut sigma = Strategy::first_actions(game, player);
        for (&s, &a) in owned.iter().zip(&digits) {
            sigma.set(s, a);
        }
        out.push(sigma);
        let mut i = owned.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < game.actions(owned[i]).len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

pub fn enumerate_solve(game: &Game) -> Result<OracleSolution> {
    enumerate_solve_capped(game, DEFAULT_CAP)
}

pub fn enumerate_solve_capped(game: &Game, cap: u128) -> Result<OracleSolution> {
    let count = strategy_pair_count(game);
    if count > cap {
        return Err(Error::EnumerationCap { count, cap });
    }
    let sigmas = all_strategies(game, Player::Max);
    let taus = all_strategies(game, Player::Min);
    let eval = |sigma: &Strategy, tau: &Strategy| -> Vec<Rational> {
        let chain = induce_mc(game, sigma, tau).expect("enumerated strategies are total");
        chain_reachability(&chain).expect("induced chain has one action per state")
    };
    let pointwise = |vectors: Vec<Vec<Rational>>, pick_max: bool| -> Vec<Rational> {
        vectors
            .into_iter()
            .reduce(|acc, v| {
                acc.into_iter()
                    .zip(v)
                    .map(|(a, b)| if (b > a) == pick_max && b != a { b } else { a })
                    .collect()
            })
            .expect("at least one strategy")
    };

    let inner_min: Vec<Vec<Rational>> = sigmas
        .par_iter()
        .map(|sigma| pointwise(taus.iter().map(|tau| eval(sigma, tau)).collect(), false))
        .collect();
    let inner_max: Vec<Vec<Rational>> = taus
        .par_iter()
        .map(|tau| pointwise(sigmas.iter().map(|sigma| eval(sigma, tau)).collect(), true))
        .collect();
    let values = pointwise(inner_min.clone(), true);
    let min_max_values = pointwise(inner_max.clone(), false);
    let best_sigma = inner_min
        .iter()
        .position(|v| *v == values)
        .expect("some σ is uniformly optimal");
    let best_tau = inner_max
        .iter()
        .position(|v| *v == min_max_values)
        .expect("some τ is uniformly optimal");
    Ok(OracleSolution {
        values,
        min_max_values,
        max_strategy: sigmas[best_sigma].clone(),
        min_strategy: taus[best_tau].clone(),
    })
}

/// Reachability probabilities of the targets in a game where every state has
/// exactly one action. States without a path to a target get 0; the rest
/// solve `(I - Q) x = b`.
pub fn chain_reachability(chain: &Game) -> Result<Vec<Rational>> {
    let n = chain.num_states();
    if let Some(s) = chain.state_ids().find(|&s| chain.actions(s).len() != 1) {
        return Err(Error::Precondition(format!(
            "state {s} has {} actions",
            chain.actions(s).len()
        )));
    }
    // backward closure of the targets
    let mut reaches = vec![false; n];
    for s in chain.targets() {
        reaches[s] = true;
    }
    let mut changed = true;
    while changed {
        changed = false;
        for s in 0..n {
            if !reaches[s] && chain.action(s, 0).successors().any(|t| reaches[t]) {
                reaches[s] = true;
                changed = true;
            }
        }
    }
    let unknown: Vec<StateId> = (0..n)
        .filter(|&s| reaches[s] && !chain.is_target(s))
        .collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in unknown.iter().enumerate() {
        index[s] = i;
    }
    let k = unknown.len();
    let mut matrix: Vec<Vec<Rational>> = vec![vec![Rational::zero(); k + 1]; k];
    for (i, &s) in unknown.iter().enumerate() {
        matrix[i][i] = Rational::one();
        for t in chain.action(s, 0).transitions() {
            if chain.is_target(t.to) {
                matrix[i][k] += &t.prob;
            } else if index[t.to] != usize::MAX {
                matrix[i][index[t.to]] -= &t.prob;
            }
        }
    }
    let x = gauss(matrix).ok_or_else(|| Error::Invalid("singular absorption system".into()))?;
    let mut values = vec![Rational::zero(); n];
    for s in chain.targets() {
        values[s] = Rational::one();
    }
    for (i, &s) in unknown.iter().enumerate() {
        values[s] = x[i].clone();
    }
    Ok(values)
}

/// Gaussian elimination with back substitution on an augmented matrix.
fn gauss(mut m: Vec<Vec<Rational>>) -> Option<Vec<Rational>> {
    let k = m.len();
    for col in 0..k {
        let pivot = (col..k).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, pivot);
        for r in col + 1..k {
            if m[r][col].is_zero() {
                continue;
            }
            let factor = &m[r][col] / &m[col][col];
            for c in col..=k {
                let delta = &factor * &m[col][c];
                m[r][c] -= delta;
            }
        }
    }
    let mut x = vec![Rational::zero(); k];
    for row in (0..k).rev() {
        let mut acc = m[row][k].clone();
        for c in row + 1..k {
            acc -= &m[row][c] * &x[c];
        }
        x[row] = acc / &m[row][row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameBuilder;
    use crate::rational::{int, rat};

    #[test]
    fn coin_is_one_half() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "a", vec![(t, rat(1, 2)), (z, rat(1, 2))]);
        b.set_initial(s);
        let sol = enumerate_solve(&b.build().unwrap()).unwrap();
        assert_eq!(sol.values, vec![rat(1, 2), int(1), int(0)]);
    }

    #[test]
    fn maximizer_picks_target() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "a", vec![(t, int(1))]);
        b.add_action(s, "b", vec![(z, int(1))]);
        b.set_initial(s);
        let sol = enumerate_solve(&b.build().unwrap()).unwrap();
        assert_eq!(sol.values[0], int(1));
        assert_eq!(sol.max_strategy.get(0), Some(0));
    }

    #[test]
    fn minimizer_loop_and_max_min_agree() {
        // Min state m: loop or go to Max state x; x: target or back to m.
        let mut b = GameBuilder::new();
        let m = b.add_state(Player::Min);
        let x = b.add_state(Player::Max);
        let t = b.add_target();
        b.add_action(m, "stay", vec![(m, int(1))]);
        b.add_action(m, "go", vec![(x, int(1))]);
        b.add_action(x, "win", vec![(t, rat(1, 2)), (m, rat(1, 2))]);
        b.add_action(x, "back", vec![(m, int(1))]);
        b.set_initial(m);
        let sol = enumerate_solve(&b.build().unwrap()).unwrap();
        assert_eq!(sol.values[0], int(0));
        assert_eq!(sol.values[1], rat(1, 2));
        assert_eq!(sol.values, sol.min_max_values);
        assert_eq!(sol.min_strategy.get(0), Some(0));
    }

    #[test]
    fn chain_loop_by_hand() {
        // s: 1/2 -> s', 1/2 -> z; s': 1/2 -> t, 1/2 -> s
        // x = y/2, y = 1/2 + x/2  =>  y = 2/3, x = 1/3
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let s2 = b.add_state(Player::Max);
        let t = b.add_target();
        let z = b.add_sink();
        b.add_action(s, "a", vec![(s2, rat(1, 2)), (z, rat(1, 2))]);
        b.add_action(s2, "a", vec![(t, rat(1, 2)), (s, rat(1, 2))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        let v = chain_reachability(&g).unwrap();
        assert_eq!(v, vec![rat(1, 3), rat(2, 3), int(1), int(0)]);

        // power iteration cross-check
        let mut p = vec![0.0f64, 0.0, 1.0, 0.0];
        for _ in 0..1_000_000 {
            let next = vec![0.5 * p[1], 0.5 + 0.5 * p[0], 1.0, 0.0];
            if next == p {
                break;
            }
            p = next;
        }
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-12 && (p[1] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absorbing_basics_and_cap() {
        let mut b = GameBuilder::new();
        let s = b.add_state(Player::Max);
        let z = b.add_sink();
        b.add_action(s, "a", vec![(s, int(1))]);
        b.add_action(s, "b", vec![(z, int(1))]);
        b.set_initial(s);
        let g = b.build().unwrap();
        assert_eq!(enumerate_solve(&g).unwrap().values, vec![int(0), int(0)]);
        assert!(matches!(
            enumerate_solve_capped(&g, 1),
            Err(Error::EnumerationCap { count: 2, cap: 1 })
        ));
        assert!(chain_reachability(&g).is_err());
    }
}
