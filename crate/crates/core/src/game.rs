//! Simple stochastic games with exact rational transition probabilities.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::ops::{Add, Deref, Mul};

use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

pub type StateId = usize;
pub type ActionIdx = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    Max,
    Min,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Max => Player::Min,
            Player::Min => Player::Max,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Normal,
    Target,
    Sink,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub to: StateId,
    pub prob: Rational,
    prob_f64: f64,
}

impl Transition {
    fn new(to: StateId, prob: Rational) -> Self {
        let prob_f64 = rational::to_f64(&prob);
        Transition { to, prob, prob_f64 }
    }

    pub fn prob_f64(&self) -> f64 {
        self.prob_f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    name: String,
    transitions: Vec<Transition>,
}

impl Action {
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sparse distribution, sorted by successor id.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn successors(&self) -> impl Iterator<Item = StateId> + '_ {
        self.transitions.iter().map(|t| t.to)
    }

    pub fn prob_to(&self, s: StateId) -> Option<&Rational> {
        self.transitions
            .binary_search_by_key(&s, |t| t.to)
            .ok()
            .map(|i| &self.transitions[i].prob)
    }

    /// Expected value of `values` under this action's distribution.
    pub fn expect<T: Scalar>(&self, values: &[T]) -> T {
        let mut acc = T::zero();
        for t in &self.transitions {
            acc = acc + T::weight(t) * values[t.to].clone();
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct State {
    owner: Player,
    kind: StateKind,
    actions: Vec<Action>,
}

impl State {
    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn kind(&self) -> StateKind {
        self.kind
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn is_absorbing(&self) -> bool {
        self.kind != StateKind::Normal
    }
}

/// An immutable, validated game. State ids are dense; targets and sinks carry
/// a single probability-one self-loop named `loop`.
#[derive(Clone, Debug, PartialEq)]
pub struct Game {
    states: Vec<State>,
    initial: StateId,
}

pub const LOOP_ACTION: &str = "loop";

impl Game {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_ids(&self) -> std::ops::Range<StateId> {
        0..self.states.len()
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn state(&self, s: StateId) -> &State {
        &self.states[s]
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn owner(&self, s: StateId) -> Player {
        self.states[s].owner
    }

    pub fn kind(&self, s: StateId) -> StateKind {
        self.states[s].kind
    }

    pub fn is_target(&self, s: StateId) -> bool {
        self.states[s].kind == StateKind::Target
    }

    pub fn is_sink(&self, s: StateId) -> bool {
        self.states[s].kind == StateKind::Sink
    }

    pub fn is_absorbing(&self, s: StateId) -> bool {
        self.states[s].is_absorbing()
    }

    /// Non-absorbing state owned by `player`.
    pub fn is_controlled_by(&self, s: StateId, player: Player) -> bool {
        !self.is_absorbing(s) && self.owner(s) == player
    }

    pub fn actions(&self, s: StateId) -> &[Action] {
        &self.states[s].actions
    }

    pub fn action(&self, s: StateId, a: ActionIdx) -> &Action {
        &self.states[s].actions[a]
    }

    pub fn action_by_name(&self, s: StateId, name: &str) -> Option<ActionIdx> {
        self.states[s].actions.iter().position(|a| a.name == name)
    }

    pub fn targets(&self) -> Vec<StateId> {
        self.state_ids().filter(|&s| self.is_target(s)).collect()
    }

    pub fn sinks(&self) -> Vec<StateId> {
        self.state_ids().filter(|&s| self.is_sink(s)).collect()
    }

    pub fn max_actions(&self) -> usize {
        self.states
            .iter()
            .map(|s| s.actions.len())
            .max()
            .unwrap_or(0)
    }

    /// Initial values: 1 on targets, 0 elsewhere.
    pub fn indicator_of_targets<T: Scalar>(&self) -> Vec<T> {
        self.state_ids()
            .map(|s| {
                if self.is_target(s) {
                    T::one()
                } else {
                    T::zero()
                }
            })
            .collect()
    }

    pub fn to_builder(&self) -> GameBuilder {
        GameBuilder {
            states: self
                .states
                .iter()
                .map(|st| BuilderState {
                    owner: st.owner,
                    kind: st.kind,
                    actions: if st.is_absorbing() {
                        Vec::new()
                    } else {
                        st.actions
                            .iter()
                            .map(|a| {
                                (
                                    a.name.clone(),
                                    a.transitions
                                        .iter()
                                        .map(|t| (t.to, t.prob.clone()))
                                        .collect(),
                                )
                            })
                            .collect()
                    },
                })
                .collect(),
            initial: Some(self.initial),
        }
    }
}

/// Number types a value vector may hold.
pub trait Scalar:
    Clone + Debug + PartialOrd + Zero + One + Add<Output = Self> + Mul<Output = Self>
{
    fn weight(t: &Transition) -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn as_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn weight(t: &Transition) -> Self {
        t.prob_f64
    }
    fn from_rational(r: &Rational) -> Self {
        rational::to_f64(r)
    }
    fn as_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for Rational {
    fn weight(t: &Transition) -> Self {
        t.prob.clone()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn as_f64(&self) -> f64 {
        rational::to_f64(self)
    }
}

/// Per-state values, exact or binary64. Entries lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueVector<T>(Vec<T>);

impl<T: Scalar> ValueVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        let slack = 1e-12;
        for (s, v) in values.iter().enumerate() {
            let f = v.as_f64();
            if !(-slack..=1.0 + slack).contains(&f) {
                return Err(Error::Invalid(format!(
                    "value {f} of state {s} outside [0,1]"
                )));
            }
        }
        Ok(ValueVector(values))
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(Scalar::as_f64).collect()
    }
}

impl<T> Deref for ValueVector<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.0
    }
}

/// `V(s,a)`: the one-step expectation of `values` when playing `a` at `s`.
pub fn action_value<T: Scalar>(game: &Game, values: &[T], s: StateId, a: ActionIdx) -> Result<T> {
    if s >= game.num_states() {
        return Err(Error::UnknownState(s));
    }
    if a >= game.actions(s).len() {
        return Err(Error::UnknownAction {
            state: s,
            action: a.to_string(),
        });
    }
    if values.len() != game.num_states() {
        return Err(Error::Invalid(format!(
            "value vector has length {}, game has {} states",
            values.len(),
            game.num_states()
        )));
    }
    Ok(game.action(s, a).expect(values))
}

/// A pure memoryless strategy of one player.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Strategy {
    player: Player,
    choices: Vec<Option<ActionIdx>>,
}

impl Strategy {
    /// Every controlled state picks action 0.
    pub fn first_actions(game: &Game, player: Player) -> Strategy {
        Self::from_fn(game, player, |_| 0)
    }

    pub fn from_fn(
        game: &Game,
        player: Player,
        mut pick: impl FnMut(StateId) -> ActionIdx,
    ) -> Strategy {
        let choices = game
            .state_ids()
            .map(|s| game.is_controlled_by(s, player).then(|| pick(s)))
            .collect();
        Strategy { player, choices }
    }

    pub fn from_choices(
        game: &Game,
        player: Player,
        choices: Vec<Option<ActionIdx>>,
    ) -> Result<Strategy> {
        let strategy = Strategy { player, choices };
        strategy.check(game)?;
        Ok(strategy)
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn get(&self, s: StateId) -> Option<ActionIdx> {
        self.choices.get(s).copied().flatten()
    }

    pub fn choices(&self) -> &[Option<ActionIdx>] {
        &self.choices
    }

    pub fn set(&mut self, s: StateId, a: ActionIdx) {
        debug_assert!(self.choices[s].is_some());
        self.choices[s] = Some(a);
    }

    pub fn domain(&self) -> impl Iterator<Item = StateId> + '_ {
        self.choices
            .iter()
            .enumerate()
            .filter_map(|(s, c)| c.map(|_| s))
    }

    pub fn check(&self, game: &Game) -> Result<()> {
        if self.choices.len() != game.num_states() {
            return Err(Error::StrategyMismatch(format!(
                "strategy covers {} states, game has {}",
                self.choices.len(),
                game.num_states()
            )));
        }
        for (s, choice) in self.choices.iter().enumerate() {
            match (game.is_controlled_by(s, self.player), choice) {
                (true, None) => {
                    return Err(Error::StrategyMismatch(format!("no choice for state {s}")));
                }
                (false, Some(_)) => {
                    return Err(Error::StrategyMismatch(format!(
                        "state {s} is not controlled by {:?}",
                        self.player
                    )));
                }
                (true, Some(a)) if *a >= game.actions(s).len() => {
                    return Err(Error::StrategyMismatch(format!(
                        "state {s} has no action {a}"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn restrict(game: &Game, strategies: &[&Strategy]) -> Result<Game> {
    let mut builder = game.to_builder();
    for strategy in strategies {
        strategy.check(game)?;
        for s in strategy.domain() {
            let a = strategy.get(s).expect("domain state has a choice");
            builder.keep_only_action(s, a);
        }
    }
    builder.build()
}

/// The Markov chain `G[σ,τ]`: every state keeps only its chosen action.
pub fn induce_mc(game: &Game, sigma: &Strategy, tau: &Strategy) -> Result<Game> {
    if sigma.player != Player::Max || tau.player != Player::Min {
        return Err(Error::StrategyMismatch(
            "expected a Maximizer and a Minimizer strategy".into(),
        ));
    }
    restrict(game, &[sigma, tau])
}

/// The Minimizer MDP `G[σ]`.
pub fn induce_mdp(game: &Game, sigma: &Strategy) -> Result<Game> {
    if sigma.player != Player::Max {
        return Err(Error::StrategyMismatch(
            "expected a Maximizer strategy".into(),
        ));
    }
    restrict(game, &[sigma])
}

#[derive(Clone, Debug)]
struct BuilderState {
    owner: Player,
    kind: StateKind,
    actions: Vec<(String, Vec<(StateId, Rational)>)>,
}

/// Mutable staging area for games. `build` validates every invariant.
#[derive(Clone, Debug, Default)]
pub struct GameBuilder {
    states: Vec<BuilderState>,
    initial: Option<StateId>,
}

impl GameBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn add_state(&mut self, owner: Player) -> StateId {
        self.push(owner, StateKind::Normal)
    }

    pub fn add_target(&mut self) -> StateId {
        self.push(Player::Max, StateKind::Target)
    }

    pub fn add_sink(&mut self) -> StateId {
        self.push(Player::Max, StateKind::Sink)
    }

    fn push(&mut self, owner: Player, kind: StateKind) -> StateId {
        self.states.push(BuilderState {
            owner,
            kind,
            actions: Vec::new(),
        });
        self.states.len() - 1
    }

    pub fn owner(&self, s: StateId) -> Player {
        self.states[s].owner
    }

    pub fn kind(&self, s: StateId) -> StateKind {
        self.states[s].kind
    }

    pub fn set_kind(&mut self, s: StateId, kind: StateKind) {
        self.states[s].kind = kind;
        if kind != StateKind::Normal {
            self.states[s].actions.clear();
        }
    }

    pub fn set_initial(&mut self, s: StateId) {
        self.initial = Some(s);
    }

    pub fn add_action(
        &mut self,
        s: StateId,
        name: impl Into<String>,
        distribution: Vec<(StateId, Rational)>,
    ) -> ActionIdx {
        let actions = &mut self.states[s].actions;
        actions.push((name.into(), distribution));
        actions.len() - 1
    }

    pub fn action_names(&self, s: StateId) -> impl Iterator<Item = &str> {
        self.states[s].actions.iter().map(|(n, _)| n.as_str())
    }

    pub fn num_actions(&self, s: StateId) -> usize {
        self.states[s].actions.len()
    }

    pub fn distribution(&self, s: StateId, a: ActionIdx) -> &[(StateId, Rational)] {
        &self.states[s].actions[a].1
    }

    pub fn set_distribution(
        &mut self,
        s: StateId,
        a: ActionIdx,
        distribution: Vec<(StateId, Rational)>,
    ) {
        self.states[s].actions[a].1 = distribution;
    }

    pub fn take_actions(&mut self, s: StateId) -> Vec<(String, Vec<(StateId, Rational)>)> {
        std::mem::take(&mut self.states[s].actions)
    }

    fn keep_only_action(&mut self, s: StateId, a: ActionIdx) {
        let actions = &mut self.states[s].actions;
        let kept = actions.swap_remove(a);
        actions.clear();
        actions.push(kept);
    }

    /// Drops state `v`; ids above it shift down by one. Transitions into `v`
    /// must already be gone.
    pub fn remove_state(&mut self, v: StateId) {
        self.states.remove(v);
        for st in &mut self.states {
            for (_, dist) in &mut st.actions {
                for (to, _) in dist.iter_mut() {
                    debug_assert_ne!(*to, v);
                    if *to > v {
                        *to -= 1;
                    }
                }
            }
        }
        if let Some(init) = self.initial.as_mut() {
            if *init > v {
                *init -= 1;
            }
        }
    }

    pub fn build(self) -> Result<Game> {
        let n = self.states.len();
        if n == 0 {
            return Err(Error::Invalid("game has no states".into()));
        }
        let initial = self
            .initial
            .ok_or_else(|| Error::Invalid("no initial state".into()))?;
        if initial >= n {
            return Err(Error::Invalid(format!(
                "initial state {initial} does not exist"
            )));
        }
        let mut states = Vec::with_capacity(n);
        for (s, st) in self.states.into_iter().enumerate() {
            let actions = if st.kind != StateKind::Normal {
                if !st.actions.is_empty() {
                    return Err(Error::Invalid(format!(
                        "absorbing state {s} declares actions"
                    )));
                }
                vec![Action {
                    name: LOOP_ACTION.to_string(),
                    transitions: vec![Transition::new(s, Rational::one())],
                }]
            } else {
                if st.actions.is_empty() {
                    return Err(Error::Invalid(format!("state {s} has no actions")));
                }
                let mut actions = Vec::with_capacity(st.actions.len());
                for (name, dist) in st.actions {
                    if actions.iter().any(|a: &Action| a.name == name) {
                        return Err(Error::Invalid(format!(
                            "state {s} declares action {name} twice"
                        )));
                    }
                    actions.push(build_action(s, name, dist, n)?);
                }
                actions
            };
            states.push(State {
                owner: st.owner,
                kind: st.kind,
                actions,
            });
        }
        Ok(Game { states, initial })
    }
}

fn build_action(
    s: StateId,
    name: String,
    dist: Vec<(StateId, Rational)>,
    n: usize,
) -> Result<Action> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::Invalid(format!(
            "state {s}: bad action name {name:?}"
        )));
    }
    let mut merged: BTreeMap<StateId, Rational> = BTreeMap::new();
    for (to, p) in dist {
        if to >= n {
            return Err(Error::Invalid(format!(
                "({s}, {name}) leads to unknown state {to}"
            )));
        }
        if p <= Rational::zero() || p > Rational::one() {
            return Err(Error::Invalid(format!(
                "({s}, {name}) -> {to} has probability {p} outside (0,1]"
            )));
        }
        *merged.entry(to).or_insert_with(Rational::zero) += p;
    }
    let total: Rational = merged.values().cloned().sum();
    if total != Rational::one() {
        return Err(Error::Invalid(format!(
            "distribution at ({s}, {name}) sums to {total}"
        )));
    }
    Ok(Action {
        name,
        transitions: merged
            .into_iter()
            .map(|(to, p)| Transition::new(to, p))
            .collect(),
    })
}
