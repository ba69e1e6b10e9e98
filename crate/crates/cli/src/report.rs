//! JSON shapes printed by the CLI. Every report deserializes back into the
//! same type, which is how the tests pin the schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sgsolve_core::graph::{accessible_states, mec_postorder};
use sgsolve_core::oracle::OracleSolution;
use sgsolve_core::qp_solver::QpSolution;
use sgsolve_core::transforms::Origin;
use sgsolve_core::{
    Game, Guarantee, Mec, MecKind, Player, SolveResult, StateId, Stats, Strategy, Values,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Strategies {
    /// State id to action name.
    pub max: BTreeMap<StateId, String>,
    pub min: BTreeMap<StateId, String>,
}

impl Strategies {
    pub fn new(game: &Game, max: &Strategy, min: &Strategy) -> Self {
        let named = |sigma: &Strategy| {
            sigma
                .domain()
                .map(|s| {
                    (
                        s,
                        game.action(s, sigma.get(s).expect("in domain"))
                            .name()
                            .to_owned(),
                    )
                })
                .collect()
        };
        Strategies {
            max: named(max),
            min: named(min),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveReport {
    pub method: String,
    pub guarantee: Guarantee,
    pub initial: StateId,
    pub values: Vec<f64>,
    /// Reduced fractions, present when the method is exact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_values: Option<Vec<String>>,
    pub strategies: Strategies,
    pub stats: Stats,
    /// States the initial state cannot reach; their values are still given.
    pub unreachable: Vec<StateId>,
}

impl SolveReport {
    pub fn from_result(game: &Game, result: &SolveResult) -> Self {
        SolveReport {
            method: result.method.clone(),
            guarantee: result.guarantee,
            initial: game.initial(),
            values: result.values.to_f64(),
            exact_values: result
                .values
                .exact()
                .map(|v| v.iter().map(|r| r.to_string()).collect()),
            strategies: Strategies::new(game, &result.max_strategy, &result.min_strategy),
            stats: result.stats.clone(),
            unreachable: unreachable_states(game),
        }
    }

    pub fn from_oracle(game: &Game, solution: &OracleSolution, stats: Stats) -> Self {
        let result = SolveResult {
            values: Values::Exact(solution.values.clone()),
            max_strategy: solution.max_strategy.clone(),
            min_strategy: solution.min_strategy.clone(),
            stats,
            method: "oracle".into(),
            guarantee: Guarantee::Exact,
        };
        Self::from_result(game, &result)
    }

    pub fn to_text(&self, game: &Game) -> String {
        let mut out = format!(
            "method {} ({})\n",
            self.method,
            guarantee_name(self.guarantee)
        );
        for s in game.state_ids() {
            let value = match &self.exact_values {
                Some(v) => v[s].clone(),
                None => format!("{:.9}", self.values[s]),
            };
            let (owner, choice) = match game.owner(s) {
                _ if game.is_target(s) => ("target", None),
                _ if game.is_sink(s) => ("sink", None),
                Player::Max => ("max", self.strategies.max.get(&s)),
                Player::Min => ("min", self.strategies.min.get(&s)),
            };
            let marker = if s == self.initial { "*" } else { " " };
            out.push_str(&format!(
                "{marker}{s:>5}  {owner:<6}  {value:<20}  {}\n",
                choice.map_or("", |c| c)
            ));
        }
        if !self.unreachable.is_empty() {
            out.push_str(&format!(
                "unreachable from initial state: {:?}\n",
                self.unreachable
            ));
        }
        out
    }
}

/// Printed, with exit status 1, when the QP solver finds no certified point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpFailureReport {
    pub method: String,
    pub success: bool,
    /// State values of the best point seen.
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub restarts_used: usize,
    pub iterations: usize,
    pub program_vars: usize,
    pub program_constraints: usize,
}

impl QpFailureReport {
    pub fn new(game: &Game, solution: &QpSolution, vars: usize, constraints: usize) -> Self {
        QpFailureReport {
            method: "qp".into(),
            success: false,
            values: solution.values[..game.num_states()].to_vec(),
            objective: solution.objective,
            max_violation: solution.max_violation,
            restarts_used: solution.restarts_used,
            iterations: solution.iterations,
            program_vars: vars,
            program_constraints: constraints,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecEntry {
    pub states: Vec<StateId>,
    pub kind: MecKind,
    /// Per state, the names of its actions that stay inside.
    pub staying: BTreeMap<StateId, Vec<String>>,
    pub exiting: Vec<(StateId, String)>,
    pub exits: Vec<StateId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MecReport {
    pub mecs: Vec<MecEntry>,
    /// Indices into `mecs`, every component after all components it can reach.
    pub postorder: Vec<usize>,
    pub unreachable: Vec<StateId>,
}

impl MecReport {
    pub fn new(game: &Game, mecs: &[Mec]) -> Self {
        let entries = mecs
            .iter()
            .map(|m| MecEntry {
                states: m.states.clone(),
                kind: m.kind,
                staying: m
                    .states
                    .iter()
                    .zip(&m.staying)
                    .map(|(&s, acts)| {
                        (
                            s,
                            acts.iter()
                                .map(|&a| game.action(s, a).name().to_owned())
                                .collect(),
                        )
                    })
                    .collect(),
                exiting: m
                    .exiting
                    .iter()
                    .map(|&(s, a)| (s, game.action(s, a).name().to_owned()))
                    .collect(),
                exits: m.exits.clone(),
            })
            .collect();
        MecReport {
            mecs: entries,
            postorder: mec_postorder(game, mecs),
            unreachable: unreachable_states(game),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, m) in self.mecs.iter().enumerate() {
            out.push_str(&format!("mec {i} {:?} states {:?}\n", m.kind, m.states));
            for (s, acts) in &m.staying {
                out.push_str(&format!("  stay {s}: {}\n", acts.join(" ")));
            }
            for (s, a) in &m.exiting {
                out.push_str(&format!("  exit ({s}, {a})\n"));
            }
            if !m.exits.is_empty() {
                out.push_str(&format!("  exit states {:?}\n", m.exits));
            }
        }
        out.push_str(&format!("postorder {:?}\n", self.postorder));
        if !self.unreachable.is_empty() {
            out.push_str(&format!(
                "unreachable from initial state: {:?}\n",
                self.unreachable
            ));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformReport {
    pub output: String,
    pub origin_map: String,
    pub states: usize,
    pub auxiliary: usize,
}

/// Written next to a transformed game.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OriginMap<'a> {
    pub source: &'a str,
    pub transform: &'a str,
    /// Indexed by state id of the transformed game.
    pub origin: &'a [Origin],
}

pub fn unreachable_states(game: &Game) -> Vec<StateId> {
    let reach = accessible_states(game, &[game.initial()]);
    let mut seen = vec![false; game.num_states()];
    for s in reach {
        seen[s] = true;
    }
    game.state_ids().filter(|&s| !seen[s]).collect()
}

pub fn guarantee_name(g: Guarantee) -> &'static str {
    match g {
        Guarantee::Exact => "exact",
        Guarantee::Epsilon => "epsilon",
        Guarantee::Unguaranteed => "UNGUARANTEED",
    }
}
