mod common;

use proptest::prelude::*;
use sgsolve_core::mdp::{min_best_response, BestResponseMode};
use sgsolve_core::oracle::{all_strategies, enumerate_solve};
use sgsolve_core::transforms::{
    default_chain_length, eliminate_single_action_state, is_2act, is_half_probs, is_no1act,
    to_2act, to_cnf, to_half_probs, to_no1act, to_stopping, undo_half_probs, Origin,
    TransformResult,
};
use sgsolve_core::{induce_mdp, parse_model, render, Game, Player, Rational, Strategy};

fn values(game: &Game) -> Vec<Rational> {
    enumerate_solve(game).unwrap().values
}

/// Oracle values agree on every state that came from the original game.
fn preserves_values(original: &Game, result: &TransformResult) -> Result<(), TestCaseError> {
    let before = values(original);
    let after = values(&result.game);
    for (s, origin) in result.origin.iter().enumerate() {
        if let Origin::Original(o) = *origin {
            prop_assert_eq!(&after[s], &before[o], "state {} (originally {})", s, o);
        }
    }
    prop_assert_eq!(result.num_original(), original.num_states());
    Ok(())
}

proptest! {
    #![proptest_config(common::config(100))]

    #[test]
    fn render_then_parse_is_identity(game in common::games(7)) {
        let text = render(&game);
        let back = parse_model(&text).unwrap();
        prop_assert_eq!(&back, &game);
        prop_assert_eq!(render(&back), text);
    }

    #[test]
    fn to_2act_preserves_values(game in common::games(5)) {
        let result = to_2act(&game).unwrap();
        prop_assert!(is_2act(&result.game));
        preserves_values(&game, &result)?;
    }

    #[test]
    fn to_no1act_preserves_values(game in common::games(5)) {
        let result = to_no1act(&game).unwrap();
        prop_assert!(is_no1act(&result.game));
        preserves_values(&game, &result)?;
    }

    #[test]
    fn to_half_probs_preserves_values_and_undoes(game in common::dyadic_games(5)) {
        let result = to_half_probs(&game, 64).unwrap();
        prop_assert!(is_half_probs(&result.game));
        preserves_values(&game, &result)?;
        let undone = undo_half_probs(&result).unwrap();
        prop_assert_eq!(values(&undone), values(&game));
        prop_assert_eq!(render(&undone), render(&game));
    }

    #[test]
    fn eliminating_a_single_action_state_preserves_values(game in common::games(6)) {
        let candidate = game.state_ids().find(|&v| {
            !game.is_absorbing(v)
                && v != game.initial()
                && game.actions(v).len() == 1
                && game.action(v, 0).prob_to(v).is_none()
        });
        prop_assume!(candidate.is_some());
        let v = candidate.unwrap();
        let reduced = eliminate_single_action_state(&game, v).unwrap();
        let before = values(&game);
        let after = values(&reduced);
        for s in game.state_ids().filter(|&s| s != v) {
            let t = if s > v { s - 1 } else { s };
            prop_assert_eq!(&after[t], &before[s]);
        }
    }

    #[test]
    fn cnf_is_normal_form(game in common::dyadic_games(3)) {
        let result = to_cnf(&game, default_chain_length(&game), true, 64).unwrap();
        prop_assert_eq!(sgsolve_core::transforms::normal_form_violation(&result.game), None);
    }
}

proptest! {
    #![proptest_config(common::config(24))]

    /// Optimal strategies of the chain-extended game stay optimal in the
    /// original, for both players, when chains go only into end components.
    #[test]
    fn long_chains_keep_optimal_strategies(game in common::games(4)) {
        let m = default_chain_length(&game);
        let result = to_stopping(&game, m, true).unwrap();
        let solved = enumerate_solve(&result.game).unwrap();
        let new_id: Vec<usize> = (0..game.num_states())
            .map(|o| result.origin.iter().position(|x| *x == Origin::Original(o)).unwrap())
            .collect();
        let sigma = Strategy::from_fn(&game, Player::Max, |s| solved.max_strategy.get(new_id[s]).unwrap());
        let tau = Strategy::from_fn(&game, Player::Min, |s| solved.min_strategy.get(new_id[s]).unwrap());
        let truth = values(&game);

        let against_sigma = min_best_response(&induce_mdp(&game, &sigma).unwrap(), BestResponseMode::PolicyIteration, 0.0)
            .unwrap();
        prop_assert_eq!(against_sigma.values.exact().unwrap(), truth.as_slice());

        let best_against_tau = all_strategies(&game, Player::Max)
            .iter()
            .map(|s| common::pair_value(&game, s, &tau))
            .reduce(|a, b| a.into_iter().zip(b).map(|(x, y)| x.max(y)).collect())
            .unwrap();
        prop_assert_eq!(best_against_tau, truth);
    }
}
