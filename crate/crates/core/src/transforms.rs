//! Game rewrites towards Condon's normal form (2Act, ½Probs, stopping,
//! No1Act) and the value-preserving reductions that undo them.
//!
//! Every forward transform keeps the original states at their ids and
//! appends auxiliary states after them.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{Game, GameBuilder, Player, StateId, StateKind};
use crate::graph::{is_stopping, mec_decomposition};
use crate::rational::{dyadic_exponent, rat, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Original(StateId),
    /// Added by a transform; `of` names the original state it was built for.
    Auxiliary {
        of: Option<StateId>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformResult {
    pub game: Game,
    /// Indexed by new state id.
    pub origin: Vec<Origin>,
}

impl TransformResult {
    pub fn identity(game: &Game) -> Self {
        TransformResult {
            game: game.clone(),
            origin: game.state_ids().map(Origin::Original).collect(),
        }
    }

    /// Applies `next` to the transformed game and composes the origin maps.
    pub fn and_then(
        self,
        next: impl FnOnce(&Game) -> Result<TransformResult>,
    ) -> Result<TransformResult> {
        let step = next(&self.game)?;
        let origin = step
            .origin
            .iter()
            .map(|o| match *o {
                Origin::Original(s) => self.origin[s],
                Origin::Auxiliary { of: Some(s) } => Origin::Auxiliary {
                    of: root_of(self.origin[s]),
                },
                Origin::Auxiliary { of: None } => Origin::Auxiliary { of: None },
            })
            .collect();
        Ok(TransformResult {
            game: step.game,
            origin,
        })
    }

    pub fn num_original(&self) -> usize {
        self.origin
            .iter()
            .filter(|o| matches!(o, Origin::Original(_)))
            .count()
    }

    pub fn auxiliary_states(&self) -> Vec<StateId> {
        self.origin
            .iter()
            .enumerate()
            .filter_map(|(s, o)| matches!(o, Origin::Auxiliary { .. }).then_some(s))
            .collect()
    }
}

fn root_of(o: Origin) -> Option<StateId> {
    match o {
        Origin::Original(s) => Some(s),
        Origin::Auxiliary { of } => of,
    }
}

struct Rewriter {
    builder: GameBuilder,
    origin: Vec<Origin>,
}

impl Rewriter {
    fn new(game: &Game) -> Self {
        Rewriter {
            builder: game.to_builder(),
            origin: game.state_ids().map(Origin::Original).collect(),
        }
    }

    fn aux_state(&mut self, owner: Player, of: Option<StateId>) -> StateId {
        let s = self.builder.add_state(owner);
        self.origin.push(Origin::Auxiliary { of });
        s
    }

    fn first_of_kind(&mut self, kind: StateKind) -> StateId {
        if let Some(s) = (0..self.builder.num_states()).find(|&s| self.builder.kind(s) == kind) {
            return s;
        }
        let s = match kind {
            StateKind::Target => self.builder.add_target(),
            _ => self.builder.add_sink(),
        };
        self.origin.push(Origin::Auxiliary { of: None });
        s
    }

    fn fresh_name(&self, s: StateId, base: &str) -> String {
        let mut name = base.to_string();
        while self.builder.action_names(s).any(|n| n == name) {
            name.push('_');
        }
        name
    }

    fn finish(self) -> Result<TransformResult> {
        Ok(TransformResult {
            game: self.builder.build()?,
            origin: self.origin,
        })
    }
}

/// Splits states with more than two actions into a balanced binary tree of
/// auxiliary same-owner states: the first `k/2` actions go left, the rest
/// right; singleton groups stay as plain actions.
pub fn to_2act(game: &Game) -> Result<TransformResult> {
    let mut rw = Rewriter::new(game);
    for s in game.state_ids() {
        if game.actions(s).len() <= 2 {
            continue;
        }
        let actions = rw.builder.take_actions(s);
        attach_group(&mut rw, s, s, actions);
    }
    rw.finish()
}

type NamedDist = (String, Vec<(StateId, Rational)>);

fn attach_group(rw: &mut Rewriter, node: StateId, root: StateId, mut group: Vec<NamedDist>) {
    debug_assert!(group.len() >= 2);
    let right = group.split_off(group.len() / 2);
    for part in [group, right] {
        if part.len() == 1 {
            let (name, dist) = part.into_iter().next().unwrap();
            rw.builder.add_action(node, name, dist);
        } else {
            let owner = rw.builder.owner(root);
            let aux = rw.aux_state(owner, Some(root));
            let name = rw.fresh_name(node, &format!("via{aux}"));
            rw.builder
                .add_action(node, name, vec![(aux, Rational::one())]);
            attach_group(rw, aux, root, part);
        }
    }
}

/// Gives every single-action non-absorbing state a second action: Maximizer
/// states may give up (to a sink), Minimizer states may concede (to a target).
pub fn to_no1act(game: &Game) -> Result<TransformResult> {
    let mut rw = Rewriter::new(game);
    for s in game.state_ids() {
        if game.is_absorbing(s) || game.actions(s).len() != 1 {
            continue;
        }
        let dest = match game.owner(s) {
            Player::Max => rw.first_of_kind(StateKind::Sink),
            Player::Min => rw.first_of_kind(StateKind::Target),
        };
        let name = rw.fresh_name(s, "no1act");
        rw.builder
            .add_action(s, name, vec![(dest, Rational::one())]);
    }
    rw.finish()
}

/// Replaces every transition probability outside `{1/2, 1}` by a binary tree
/// of single-action auxiliary states. Each tree node sends 1/2 to either
/// child; the left child takes the first half of the probability mass in
/// successor order. Probabilities must be dyadic with at most `max_bits`
/// binary digits.
pub fn to_half_probs(game: &Game, max_bits: u32) -> Result<TransformResult> {
    let half = rat(1, 2);
    for s in game.state_ids().filter(|&s| !game.is_absorbing(s)) {
        for action in game.actions(s) {
            for t in action.transitions() {
                match dyadic_exponent(&t.prob) {
                    None => {
                        return Err(Error::NonDyadic {
                            state: s,
                            action: action.name().to_string(),
                            successor: t.to,
                            prob: t.prob.to_string(),
                        })
                    }
                    Some(bits) if bits > max_bits => {
                        return Err(Error::TooManyBits {
                            state: s,
                            action: action.name().to_string(),
                            prob: t.prob.to_string(),
                            max_bits,
                        })
                    }
                    _ => {}
                }
            }
        }
    }
    let mut rw = Rewriter::new(game);
    for s in game.state_ids().filter(|&s| !game.is_absorbing(s)) {
        for (a, action) in game.actions(s).iter().enumerate() {
            if action
                .transitions()
                .iter()
                .all(|t| t.prob == half || t.prob.is_one())
            {
                continue;
            }
            let dist: Vec<(StateId, Rational)> = action
                .transitions()
                .iter()
                .map(|t| (t.to, t.prob.clone()))
                .collect();
            let (left, right) = split_half(&dist);
            let l = tree_node(&mut rw, s, left);
            let r = tree_node(&mut rw, s, right);
            rw.builder
                .set_distribution(s, a, vec![(l, half.clone()), (r, half.clone())]);
        }
    }
    rw.finish()
}

type Distribution = Vec<(StateId, Rational)>;

/// Splits a distribution into two halves of mass 1/2 each, both rescaled to
/// sum to one.
fn split_half(dist: &[(StateId, Rational)]) -> (Distribution, Distribution) {
    let two = Rational::from_integer(2.into());
    let mut need = rat(1, 2);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for (s, p) in dist {
        if need.is_zero() {
            right.push((*s, p * &two));
            continue;
        }
        let take = if *p < need { p.clone() } else { need.clone() };
        need -= &take;
        let rest = p - &take;
        left.push((*s, &take * &two));
        if !rest.is_zero() {
            right.push((*s, rest * &two));
        }
    }
    (left, right)
}

fn tree_node(rw: &mut Rewriter, root: StateId, dist: Vec<(StateId, Rational)>) -> StateId {
    if dist.len() == 1 {
        return dist[0].0;
    }
    let owner = rw.builder.owner(root);
    let node = rw.aux_state(owner, Some(root));
    let (left, right) = split_half(&dist);
    let l = tree_node(rw, root, left);
    let r = tree_node(rw, root, right);
    let half = rat(1, 2);
    rw.builder
        .add_action(node, "split", vec![(l, half.clone()), (r, half)]);
    node
}

/// Makes the game stopping: every affected action first enters a chain of `m`
/// auxiliary states; chain state `i` follows the original distribution with
/// probability 1/2 and moves on with 1/2, the last one moving on to a sink.
/// The total diverted mass is `2^-m`. With `mec_only`, only actions of states
/// inside non-absorbing MECs are affected.
pub fn to_stopping(game: &Game, m: usize, mec_only: bool) -> Result<TransformResult> {
    if m == 0 {
        return Err(Error::Precondition("chain length must be positive".into()));
    }
    let n = game.num_states();
    if m <= 2 * n.saturating_sub(1) {
        log::warn!(
            "chain length {m} does not exceed 2(|S|-1) = {}; strategies may change",
            2 * n.saturating_sub(1)
        );
    }
    let affected: Vec<StateId> = if mec_only {
        let mut v: Vec<StateId> = mec_decomposition(game)
            .into_iter()
            .filter(|mec| !mec.is_absorbing())
            .flat_map(|mec| mec.states)
            .collect();
        v.sort_unstable();
        v
    } else {
        game.state_ids()
            .filter(|&s| !game.is_absorbing(s))
            .collect()
    };
    let mut rw = Rewriter::new(game);
    if affected.is_empty() {
        return rw.finish();
    }
    let sink = rw.first_of_kind(StateKind::Sink);
    let half = rat(1, 2);
    for &s in &affected {
        for (a, action) in game.actions(s).iter().enumerate() {
            let owner = game.owner(s);
            let chain: Vec<StateId> = (0..m).map(|_| rw.aux_state(owner, Some(s))).collect();
            for (i, &c) in chain.iter().enumerate() {
                let onward = chain.get(i + 1).copied().unwrap_or(sink);
                let mut dist: BTreeMap<StateId, Rational> = BTreeMap::new();
                for t in action.transitions() {
                    *dist.entry(t.to).or_insert_with(Rational::zero) += &t.prob * &half;
                }
                *dist.entry(onward).or_insert_with(Rational::zero) += half.clone();
                rw.builder.add_action(c, "eps", dist.into_iter().collect());
            }
            rw.builder
                .set_distribution(s, a, vec![(chain[0], Rational::one())]);
        }
    }
    rw.finish()
}

/// Removes a single-action state `v`, redirecting every transition into `v`
/// to `v`'s successors: `δ'(s,a,x) = δ(s,a,x) + δ(s,a,v)·δ(v,x)`. States above
/// `v` shift down by one id.
pub fn eliminate_single_action_state(game: &Game, v: StateId) -> Result<Game> {
    if v >= game.num_states() {
        return Err(Error::UnknownState(v));
    }
    if game.is_absorbing(v) {
        return Err(Error::Precondition(format!("state {v} is absorbing")));
    }
    if v == game.initial() {
        return Err(Error::Precondition(format!(
            "state {v} is the initial state"
        )));
    }
    if game.actions(v).len() != 1 {
        return Err(Error::Precondition(format!(
            "state {v} has {} actions",
            game.actions(v).len()
        )));
    }
    let through = game.action(v, 0);
    if through.prob_to(v).is_some() {
        return Err(Error::Precondition(format!(
            "state {v} can return to itself"
        )));
    }
    let mut builder = game.to_builder();
    for s in game
        .state_ids()
        .filter(|&s| s != v && !game.is_absorbing(s))
    {
        for (a, action) in game.actions(s).iter().enumerate() {
            let Some(pv) = action.prob_to(v) else {
                continue;
            };
            let mut dist: BTreeMap<StateId, Rational> = BTreeMap::new();
            for t in action.transitions().iter().filter(|t| t.to != v) {
                *dist.entry(t.to).or_insert_with(Rational::zero) += t.prob.clone();
            }
            for t in through.transitions() {
                *dist.entry(t.to).or_insert_with(Rational::zero) += pv * &t.prob;
            }
            builder.set_distribution(s, a, dist.into_iter().collect());
        }
    }
    builder.remove_state(v);
    builder.build()
}

/// Eliminates every auxiliary state of `result`, highest id first, so the
/// original states keep their ids.
pub fn undo_half_probs(result: &TransformResult) -> Result<Game> {
    let mut game = result.game.clone();
    for v in result.auxiliary_states().into_iter().rev() {
        game = eliminate_single_action_state(&game, v)?;
    }
    Ok(game)
}

pub fn is_2act(game: &Game) -> bool {
    game.state_ids().all(|s| game.actions(s).len() <= 2)
}

pub fn is_half_probs(game: &Game) -> bool {
    let half = rat(1, 2);
    game.states()
        .iter()
        .flat_map(|st| st.actions())
        .flat_map(|a| a.transitions())
        .all(|t| t.prob == half || t.prob.is_one())
}

pub fn is_no1act(game: &Game) -> bool {
    game.state_ids()
        .all(|s| game.is_absorbing(s) || game.actions(s).len() >= 2)
}

/// Which normal-form requirement fails first, if any.
pub fn normal_form_violation(game: &Game) -> Option<&'static str> {
    if !is_2act(game) {
        Some("2Act")
    } else if !is_half_probs(game) {
        Some("1/2Probs")
    } else if !is_stopping(game) {
        Some("Stopping")
    } else if !is_no1act(game) {
        Some("No1Act")
    } else {
        None
    }
}

/// Smallest chain length with `2^-m < 4^-(|S|-1)`.
pub fn default_chain_length(game: &Game) -> usize {
    2 * game.num_states().saturating_sub(1) + 1
}

/// Full normal form: stopping, then ½Probs, then 2Act, then No1Act.
pub fn to_cnf(game: &Game, m: usize, mec_only: bool, max_bits: u32) -> Result<TransformResult> {
    TransformResult::identity(game)
        .and_then(|g| to_stopping(g, m, mec_only))?
        .and_then(|g| to_half_probs(g, max_bits))?
        .and_then(to_2act)?
        .and_then(to_no1act)
}
