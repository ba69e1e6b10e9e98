//! Structural analysis: maximal end components, attractors, properness and
//! the orderings used by topological solving.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{induce_mdp, ActionIdx, Game, Player, StateId, StateKind, Strategy};

/// Strongly connected components of a graph given as adjacency lists,
/// restricted to `active` nodes. Returns a component id per node
/// (`usize::MAX` for inactive nodes). Iterative Tarjan.
pub(crate) fn scc(adj: &[Vec<usize>], active: &[bool]) -> Vec<usize> {
    let n = adj.len();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut next_comp = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if !active[root] || index[root] != UNSEEN {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut edge)) = call.last_mut() {
            if *edge < adj[v].len() {
                let w = adj[v][*edge];
                *edge += 1;
                if !active[w] {
                    continue;
                }
                if index[w] == UNSEEN {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(parent, _)) = call.last() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = next_comp;
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MecKind {
    /// A single target or sink with its self-loop.
    Absorbing,
    MaxOnly,
    MinOnly,
    Mixed,
}

/// A maximal end component.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mec {
    /// Sorted state ids.
    pub states: Vec<StateId>,
    /// Per state of `states` (same order), the actions whose successors all
    /// stay inside.
    pub staying: Vec<Vec<ActionIdx>>,
    /// State-action pairs with some successor outside.
    pub exiting: Vec<(StateId, ActionIdx)>,
    /// States outside reached in one step by an exiting pair, sorted.
    pub exits: Vec<StateId>,
    pub kind: MecKind,
}

impl Mec {
    pub fn contains(&self, s: StateId) -> bool {
        self.states.binary_search(&s).is_ok()
    }

    pub fn position(&self, s: StateId) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    pub fn is_absorbing(&self) -> bool {
        self.kind == MecKind::Absorbing
    }

    /// States of `player` inside the component.
    pub fn states_of(&self, game: &Game, player: Player) -> Vec<StateId> {
        self.states
            .iter()
            .copied()
            .filter(|&s| game.is_controlled_by(s, player))
            .collect()
    }
}

fn classify(game: &Game, states: &[StateId]) -> MecKind {
    if states.len() == 1 && game.is_absorbing(states[0]) {
        return MecKind::Absorbing;
    }
    let has_max = states.iter().any(|&s| game.owner(s) == Player::Max);
    let has_min = states.iter().any(|&s| game.owner(s) == Player::Min);
    match (has_max, has_min) {
        (true, true) => MecKind::Mixed,
        (false, true) => MecKind::MinOnly,
        _ => MecKind::MaxOnly,
    }
}

/// Maximal end components by iterated SCC refinement: drop every action
/// leaving its state's SCC, drop states left without actions, recompute SCCs,
/// repeat to a fixpoint. Components are ordered by smallest state id;
/// targets and sinks appear as singleton components.
pub fn mec_decomposition(game: &Game) -> Vec<Mec> {
    let n = game.num_states();
    let mut allowed: Vec<Vec<bool>> = game
        .state_ids()
        .map(|s| vec![true; game.actions(s).len()])
        .collect();
    let mut active = vec![true; n];
    let comp = loop {
        let adj: Vec<Vec<usize>> = game
            .state_ids()
            .map(|s| {
                let mut succ: Vec<usize> = game
                    .actions(s)
                    .iter()
                    .zip(&allowed[s])
                    .filter(|(_, &ok)| ok)
                    .flat_map(|(a, _)| a.successors())
                    .collect();
                succ.sort_unstable();
                succ.dedup();
                succ
            })
            .collect();
        let comp = scc(&adj, &active);
        let mut changed = false;
        for s in 0..n {
            if !active[s] {
                continue;
            }
            for (a, action) in game.actions(s).iter().enumerate() {
                if allowed[s][a]
                    && action
                        .successors()
                        .any(|t| !active[t] || comp[t] != comp[s])
                {
                    allowed[s][a] = false;
                    changed = true;
                }
            }
            if !allowed[s].iter().any(|&ok| ok) {
                active[s] = false;
                changed = true;
            }
        }
        if !changed {
            break comp;
        }
    };

    let mut groups: Vec<Vec<StateId>> = Vec::new();
    let mut group_of_comp: std::collections::HashMap<usize, usize> = Default::default();
    for s in 0..n {
        if !active[s] {
            continue;
        }
        let g = *group_of_comp.entry(comp[s]).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(s);
    }
    groups
        .into_iter()
        .map(|states| build_mec(game, states))
        .collect()
}

fn build_mec(game: &Game, states: Vec<StateId>) -> Mec {
    let inside = |t: StateId| states.binary_search(&t).is_ok();
    let mut staying = Vec::with_capacity(states.len());
    let mut exiting = Vec::new();
    let mut exits = BTreeSet::new();
    for &s in &states {
        let mut stay = Vec::new();
        for (a, action) in game.actions(s).iter().enumerate() {
            if action.successors().all(inside) {
                stay.push(a);
            } else {
                exiting.push((s, a));
                exits.extend(action.successors().filter(|&t| !inside(t)));
            }
        }
        staying.push(stay);
    }
    let kind = classify(game, &states);
    Mec {
        states,
        staying,
        exiting,
        exits: exits.into_iter().collect(),
        kind,
    }
}

/// Layered backward search from targets and sinks. A Maximizer state joins
/// the next layer when one of its actions reaches the discovered set with
/// positive probability and picks the lowest such action; a Minimizer state
/// joins when all its actions do. The result is proper on the discovered
/// region; undiscovered states are reported as an error.
pub fn attractor_strategy(game: &Game) -> Result<Strategy> {
    let (layer, choice) = attractor_layers(game, |s| game.is_absorbing(s));
    let stuck: Vec<StateId> = game.state_ids().filter(|&s| layer[s].is_none()).collect();
    if !stuck.is_empty() {
        return Err(Error::CannotReachAbsorbing(stuck));
    }
    Ok(Strategy::from_fn(game, Player::Max, |s| {
        choice[s].expect("discovered Maximizer state has a choice")
    }))
}

/// Layer index per state and the Maximizer's layer-decreasing action.
pub(crate) fn attractor_layers(
    game: &Game,
    seed: impl Fn(StateId) -> bool,
) -> (Vec<Option<usize>>, Vec<Option<ActionIdx>>) {
    attractor_layers_restricted(game, seed, |_, _| true)
}

/// Attractor layers where Maximizer states may only use actions passing
/// `allowed`; Minimizer states still need every action to hit.
pub(crate) fn attractor_layers_restricted(
    game: &Game,
    seed: impl Fn(StateId) -> bool,
    allowed: impl Fn(StateId, ActionIdx) -> bool,
) -> (Vec<Option<usize>>, Vec<Option<ActionIdx>>) {
    let n = game.num_states();
    let mut layer: Vec<Option<usize>> = (0..n).map(|s| seed(s).then_some(0)).collect();
    let mut choice: Vec<Option<ActionIdx>> = vec![None; n];
    let mut depth = 0;
    loop {
        depth += 1;
        let known = |t: StateId, layer: &[Option<usize>]| layer[t].is_some_and(|l| l < depth);
        let mut found = Vec::new();
        for s in 0..n {
            if layer[s].is_some() {
                continue;
            }
            let hits = |a: ActionIdx| game.action(s, a).successors().any(|t| known(t, &layer));
            match game.owner(s) {
                Player::Max => {
                    if let Some(a) = (0..game.actions(s).len()).find(|&a| allowed(s, a) && hits(a))
                    {
                        found.push((s, Some(a)));
                    }
                }
                Player::Min => {
                    if (0..game.actions(s).len()).all(hits) {
                        found.push((s, None));
                    }
                }
            }
        }
        if found.is_empty() {
            break;
        }
        for (s, a) in found {
            layer[s] = Some(depth);
            choice[s] = a;
        }
    }
    (layer, choice)
}

/// Non-absorbing states from which the Minimizer can keep the play away from
/// every target forever (value exactly 0).
pub fn zero_value_states(game: &Game) -> Vec<StateId> {
    let (layer, _) = attractor_layers(game, |s| game.is_target(s));
    game.state_ids()
        .filter(|&s| layer[s].is_none() && !game.is_absorbing(s))
        .collect()
}

/// States with no path to any target under any strategy pair.
pub fn dead_states(game: &Game) -> Vec<StateId> {
    let n = game.num_states();
    let mut pred: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in game.state_ids() {
        for a in game.actions(s) {
            for t in a.successors() {
                pred[t].push(s);
            }
        }
    }
    let mut seen = vec![false; n];
    let mut queue: Vec<StateId> = game.targets();
    for &t in &queue {
        seen[t] = true;
    }
    while let Some(t) = queue.pop() {
        for &p in &pred[t] {
            if !seen[p] {
                seen[p] = true;
                queue.push(p);
            }
        }
    }
    game.state_ids()
        .filter(|&s| !seen[s] && !game.is_absorbing(s))
        .collect()
}

/// Turns the given states into sinks, keeping ids.
pub fn collapse_to_sinks(game: &Game, states: &[StateId]) -> Game {
    let mut builder = game.to_builder();
    for &s in states {
        builder.set_kind(s, StateKind::Sink);
    }
    builder
        .build()
        .expect("collapsing states to sinks keeps the game valid")
}

/// Proper: no end component of `G[σ]` avoids targets and sinks.
pub fn is_proper(game: &Game, sigma: &Strategy) -> Result<bool> {
    let mdp = induce_mdp(game, sigma)?;
    Ok(mec_decomposition(&mdp).iter().all(Mec::is_absorbing))
}

/// The states lying in a non-absorbing end component of `G[σ]`.
pub fn improper_states(game: &Game, sigma: &Strategy) -> Result<Vec<StateId>> {
    let mdp = induce_mdp(game, sigma)?;
    let mut states: Vec<StateId> = mec_decomposition(&mdp)
        .into_iter()
        .filter(|m| !m.is_absorbing())
        .flat_map(|m| m.states)
        .collect();
    states.sort_unstable();
    Ok(states)
}

/// Every MEC is a single target or sink.
pub fn is_stopping(game: &Game) -> bool {
    mec_decomposition(game).iter().all(Mec::is_absorbing)
}

/// Forward closure of `from` under all actions, sorted.
pub fn accessible_states(game: &Game, from: &[StateId]) -> Vec<StateId> {
    let mut seen = vec![false; game.num_states()];
    let mut stack: Vec<StateId> = Vec::new();
    for &s in from {
        if !seen[s] {
            seen[s] = true;
            stack.push(s);
        }
    }
    while let Some(s) = stack.pop() {
        for a in game.actions(s) {
            for t in a.successors() {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
    }
    game.state_ids().filter(|&s| seen[s]).collect()
}

/// Depth-first post-order of the MEC quotient graph (all actions) from the
/// initial state; states outside any MEC are pass-through nodes. MECs not
/// reachable from the initial state follow in index order.
///
/// This is not a topological order: two MECs can reach each other through
/// non-staying actions, in which case their relative order is just the DFS
/// finishing order.
pub fn mec_postorder(game: &Game, mecs: &[Mec]) -> Vec<usize> {
    let n = game.num_states();
    let k = mecs.len();
    let mut node_of = vec![usize::MAX; n];
    for (i, m) in mecs.iter().enumerate() {
        for &s in &m.states {
            node_of[s] = i;
        }
    }
    for s in 0..n {
        if node_of[s] == usize::MAX {
            node_of[s] = k + s;
        }
    }
    let mut members: Vec<Vec<StateId>> = vec![Vec::new(); k + n];
    for s in 0..n {
        members[node_of[s]].push(s);
    }
    let succ: Vec<Vec<usize>> = members
        .iter()
        .enumerate()
        .map(|(node, states)| {
            let mut out: Vec<usize> = states
                .iter()
                .flat_map(|&s| game.actions(s).iter().flat_map(|a| a.successors()))
                .map(|t| node_of[t])
                .filter(|&m| m != node)
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();

    let mut visited = vec![false; k + n];
    let mut order = Vec::with_capacity(k);
    let root = node_of[game.initial()];
    let mut stack = vec![(root, 0usize)];
    visited[root] = true;
    while let Some(&mut (node, ref mut i)) = stack.last_mut() {
        if *i < succ[node].len() {
            let next = succ[node][*i];
            *i += 1;
            if !visited[next] {
                visited[next] = true;
                stack.push((next, 0));
            }
        } else {
            stack.pop();
            if node < k {
                order.push(node);
            }
        }
    }
    order.extend((0..k).filter(|&i| !visited[i]));
    order
}
