//! Quadratic programs whose optimal solutions (objective 0) are the game
//! values: Condon's program for games in normal form, and the improved
//! program with end-component constraints that needs only 2Act.

use std::collections::BTreeMap;
use std::fmt::Write;

use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{ActionIdx, Game, Player, StateId};
use crate::graph::{Mec, MecKind};
use crate::rational::{solve_exact, to_f64, Rational};
use crate::transforms::{is_2act, normal_form_violation};

pub type VarId = usize;

/// Default cap on local strategy pairs enumerated per mixed MEC.
pub const DEFAULT_PAIR_CAP: u128 = 1 << 20;

/// `constant + Σ coef·x_var`, terms sorted by variable with nonzero
/// coefficients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AffineExpr {
    pub constant: Rational,
    pub terms: Vec<(VarId, Rational)>,
}

impl AffineExpr {
    pub fn constant(c: Rational) -> Self {
        AffineExpr {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn var(v: VarId) -> Self {
        AffineExpr {
            constant: Rational::zero(),
            terms: vec![(v, Rational::one())],
        }
    }

    /// `V(s,a)` over the state variables.
    pub fn action(game: &Game, s: StateId, a: ActionIdx) -> Self {
        Self::from_terms(
            Rational::zero(),
            game.action(s, a)
                .transitions()
                .iter()
                .map(|t| (t.to, t.prob.clone())),
        )
    }

    pub fn from_terms(
        constant: Rational,
        terms: impl IntoIterator<Item = (VarId, Rational)>,
    ) -> Self {
        let mut merged: BTreeMap<VarId, Rational> = BTreeMap::new();
        for (v, c) in terms {
            *merged.entry(v).or_insert_with(Rational::zero) += c;
        }
        AffineExpr {
            constant,
            terms: merged.into_iter().filter(|(_, c)| !c.is_zero()).collect(),
        }
    }

    pub fn minus(&self, other: &AffineExpr) -> AffineExpr {
        Self::from_terms(
            &self.constant - &other.constant,
            self.terms
                .iter()
                .cloned()
                .chain(other.terms.iter().map(|(v, c)| (*v, -c))),
        )
    }

    pub fn eval_f64(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(to_f64(&self.constant), |acc, (v, c)| {
                acc + to_f64(c) * x[*v]
            })
    }

    pub fn eval_exact(&self, x: &[Rational]) -> Rational {
        self.terms
            .iter()
            .fold(self.constant.clone(), |acc, (v, c)| acc + c * &x[*v])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    pub name: String,
    pub lhs: AffineExpr,
    pub relation: Relation,
    pub rhs: AffineExpr,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectKind {
    Max,
    Min,
}

/// `var = max(options)` or `var = min(options)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectConstraint {
    pub name: String,
    pub var: VarId,
    pub kind: SelectKind,
    pub options: Vec<AffineExpr>,
}

impl SelectConstraint {
    pub fn select_f64(&self, x: &[f64]) -> f64 {
        let vals = self.options.iter().map(|e| e.eval_f64(x));
        match self.kind {
            SelectKind::Max => vals.fold(f64::NEG_INFINITY, f64::max),
            SelectKind::Min => vals.fold(f64::INFINITY, f64::min),
        }
    }

    pub fn select_exact(&self, x: &[Rational]) -> Rational {
        let vals = self.options.iter().map(|e| e.eval_exact(x));
        match self.kind {
            SelectKind::Max => vals.max(),
            SelectKind::Min => vals.min(),
        }
        .expect("select constraints have options")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Condon,
    Improved,
}

/// Variables `0..num_states` are the state values; auxiliary variables
/// follow. All variables live in `[0, 1]`. Auxiliary variables are defined by
/// select constraints over state variables only.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticProgram {
    pub variant: Variant,
    pub num_states: usize,
    pub var_names: Vec<String>,
    pub fixed: Vec<(VarId, Rational)>,
    pub linear: Vec<LinearConstraint>,
    pub selects: Vec<SelectConstraint>,
    /// Minimize the sum of these products.
    pub objective: Vec<(AffineExpr, AffineExpr)>,
}

impl QuadraticProgram {
    fn new(variant: Variant, game: &Game) -> Self {
        let mut qp = QuadraticProgram {
            variant,
            num_states: game.num_states(),
            var_names: game.state_ids().map(|s| format!("v{s}")).collect(),
            fixed: Vec::new(),
            linear: Vec::new(),
            selects: Vec::new(),
            objective: Vec::new(),
        };
        for s in game.state_ids() {
            if game.is_target(s) {
                qp.fixed.push((s, Rational::one()));
            } else if game.is_sink(s) {
                qp.fixed.push((s, Rational::zero()));
            }
        }
        qp
    }

    pub fn num_vars(&self) -> usize {
        self.var_names.len()
    }

    /// Number of constraints, counting each fixed variable as one.
    pub fn num_constraints(&self) -> usize {
        self.fixed.len() + self.linear.len() + self.selects.len()
    }

    fn linear(&mut self, name: String, lhs: AffineExpr, relation: Relation, rhs: AffineExpr) {
        self.linear.push(LinearConstraint {
            name,
            lhs,
            relation,
            rhs,
        });
    }

    /// Per-state player inequalities plus the complementarity product.
    fn two_action_state(&mut self, game: &Game, s: StateId) {
        let relation = match game.owner(s) {
            Player::Max => Relation::Ge,
            Player::Min => Relation::Le,
        };
        let tag = if relation == Relation::Ge { "ge" } else { "le" };
        for a in 0..2 {
            self.linear(
                format!("{tag}{s}a{a}"),
                AffineExpr::var(s),
                relation,
                AffineExpr::action(game, s, a),
            );
        }
        let gap = |a| AffineExpr::var(s).minus(&AffineExpr::action(game, s, a));
        self.objective.push((gap(0), gap(1)));
    }

    /// Fills in the auxiliary variables from the state values.
    pub fn complete(&self, state_values: &[f64]) -> Vec<f64> {
        let mut x = state_values.to_vec();
        x.resize(self.num_vars(), 0.0);
        for sel in self.selects.iter().filter(|sel| sel.var >= self.num_states) {
            x[sel.var] = sel.select_f64(&x);
        }
        x
    }

    pub fn complete_exact(&self, state_values: &[Rational]) -> Vec<Rational> {
        let mut x = state_values.to_vec();
        x.resize(self.num_vars(), Rational::zero());
        for sel in self.selects.iter().filter(|sel| sel.var >= self.num_states) {
            x[sel.var] = sel.select_exact(&x);
        }
        x
    }

    pub fn objective_f64(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .map(|(f, g)| f.eval_f64(x) * g.eval_f64(x))
            .sum()
    }
}

/// Condon's program. The game must be in normal form: at most two actions,
/// probabilities in {1/2, 1}, stopping, and two actions at every
/// non-absorbing state.
pub fn build_condon_qp(game: &Game) -> Result<QuadraticProgram> {
    if let Some(requirement) = normal_form_violation(game) {
        return Err(Error::NormalForm(requirement));
    }
    let mut qp = QuadraticProgram::new(Variant::Condon, game);
    for s in game.state_ids().filter(|&s| !game.is_absorbing(s)) {
        qp.two_action_state(game, s);
    }
    Ok(qp)
}

pub fn build_improved_qp(game: &Game, mecs: &[Mec]) -> Result<QuadraticProgram> {
    build_improved_qp_capped(game, mecs, DEFAULT_PAIR_CAP)
}

/// The improved program: ordinary constraints outside end components and,
/// per non-absorbing MEC, constraints pinning its values to its exits.
pub fn build_improved_qp_capped(
    game: &Game,
    mecs: &[Mec],
    pair_cap: u128,
) -> Result<QuadraticProgram> {
    if !is_2act(game) {
        return Err(Error::NormalForm("2Act"));
    }
    let mut qp = QuadraticProgram::new(Variant::Improved, game);
    let mut in_mec = vec![false; game.num_states()];
    for mec in mecs.iter().filter(|m| !m.is_absorbing()) {
        for &s in &mec.states {
            in_mec[s] = true;
        }
    }
    for s in game
        .state_ids()
        .filter(|&s| !game.is_absorbing(s) && !in_mec[s])
    {
        if game.actions(s).len() == 2 {
            qp.two_action_state(game, s);
        } else {
            qp.linear(
                format!("eq{s}"),
                AffineExpr::var(s),
                Relation::Eq,
                AffineExpr::action(game, s, 0),
            );
        }
    }

    for mec in mecs {
        let count = local_pair_count(game, mec);
        if mec.kind == MecKind::Mixed && count > pair_cap {
            return Err(Error::TooManyStrategyPairs {
                mec: mec.states.clone(),
                count,
                cap: pair_cap,
            });
        }
    }
    let mixed_groups: Vec<Option<MixedGroups>> = mecs
        .par_iter()
        .map(|mec| (mec.kind == MecKind::Mixed).then(|| mixed_groups(game, mec)))
        .collect();

    for (i, mec) in mecs.iter().enumerate() {
        match mec.kind {
            MecKind::Absorbing => {}
            MecKind::MinOnly => {
                for &s in &mec.states {
                    qp.linear(
                        format!("zero{s}"),
                        AffineExpr::var(s),
                        Relation::Eq,
                        AffineExpr::default(),
                    );
                }
            }
            MecKind::MaxOnly => {
                let exits: Vec<AffineExpr> = mec
                    .exiting
                    .iter()
                    .map(|&(s, a)| AffineExpr::action(game, s, a))
                    .collect();
                for &s in &mec.states {
                    if exits.is_empty() {
                        qp.linear(
                            format!("zero{s}"),
                            AffineExpr::var(s),
                            Relation::Eq,
                            AffineExpr::default(),
                        );
                    } else {
                        qp.selects.push(SelectConstraint {
                            name: format!("best{s}"),
                            var: s,
                            kind: SelectKind::Max,
                            options: exits.clone(),
                        });
                    }
                }
            }
            MecKind::Mixed => {
                let groups = mixed_groups[i].as_ref().expect("computed for mixed MECs");
                let mut outer: Vec<Vec<AffineExpr>> = vec![Vec::new(); mec.states.len()];
                for (k, per_state) in groups.iter().enumerate() {
                    for (pos, options) in per_state.iter().enumerate() {
                        let s = mec.states[pos];
                        let y = qp.var_names.len();
                        qp.var_names.push(format!("y{s}s{k}"));
                        qp.selects.push(SelectConstraint {
                            name: format!("inner{s}s{k}"),
                            var: y,
                            kind: SelectKind::Min,
                            options: options.clone(),
                        });
                        outer[pos].push(AffineExpr::var(y));
                    }
                }
                for (pos, options) in outer.into_iter().enumerate() {
                    let s = mec.states[pos];
                    qp.selects.push(SelectConstraint {
                        name: format!("outer{s}"),
                        var: s,
                        kind: SelectKind::Max,
                        options,
                    });
                }
            }
        }
    }
    // auxiliary definitions first, so completing them is a single pass
    let n = qp.num_states;
    qp.selects.sort_by_key(|sel| sel.var < n);
    Ok(qp)
}

/// Per local Maximizer strategy, per MEC state, the exit expressions over all
/// local Minimizer strategies.
type MixedGroups = Vec<Vec<Vec<AffineExpr>>>;

fn mixed_groups(game: &Game, mec: &Mec) -> MixedGroups {
    let pairs = enumerate_local_strategy_pairs(game, mec);
    let taus = local_strategies(game, mec, Player::Min).len();
    pairs
        .chunks(taus)
        .map(|by_sigma| {
            let probs: Vec<ExitProbabilities> = by_sigma
                .iter()
                .map(|pair| {
                    mec_reach_probabilities(game, mec, pair)
                        .expect("enumerated pairs match the MEC")
                })
                .collect();
            (0..mec.states.len())
                .map(|pos| {
                    probs
                        .iter()
                        .map(|p| {
                            AffineExpr::from_terms(
                                Rational::zero(),
                                mec.exits.iter().copied().zip(p.probs[pos].iter().cloned()),
                            )
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Local strategies of the MEC states of one player.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LocalStrategyPair {
    pub sigma: Vec<(StateId, ActionIdx)>,
    pub tau: Vec<(StateId, ActionIdx)>,
}

pub fn local_pair_count(game: &Game, mec: &Mec) -> u128 {
    mec.states
        .iter()
        .map(|&s| game.actions(s).len() as u128)
        .fold(1, |a, k| a.saturating_mul(k))
}

fn local_strategies(game: &Game, mec: &Mec, player: Player) -> Vec<Vec<(StateId, ActionIdx)>> {
    let owned = mec.states_of(game, player);
    let mut out = Vec::new();
    let mut digits = vec![0usize; owned.len()];
    loop {
        out.push(owned.iter().copied().zip(digits.iter().copied()).collect());
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

/// All pairs of local strategies: Maximizer strategies in lexicographic order
/// (first state slowest), and for each of them every Minimizer strategy in
/// the same order.
pub fn enumerate_local_strategy_pairs(game: &Game, mec: &Mec) -> Vec<LocalStrategyPair> {
    let sigmas = local_strategies(game, mec, Player::Max);
    let taus = local_strategies(game, mec, Player::Min);
    sigmas
        .iter()
        .flat_map(|sigma| {
            taus.iter().map(move |tau| LocalStrategyPair {
                sigma: sigma.clone(),
                tau: tau.clone(),
            })
        })
        .collect()
}

/// Absorption probabilities into the MEC's exit states.
#[derive(Clone, Debug, PartialEq)]
pub struct ExitProbabilities {
    /// `probs[i][j]`: from the i-th MEC state into the j-th exit.
    pub probs: Vec<Vec<Rational>>,
}

/// Probability of leaving the MEC through each exit state when both players
/// follow the local pair inside it, exits treated as absorbing.
pub fn mec_reach_probabilities(
    game: &Game,
    mec: &Mec,
    pair: &LocalStrategyPair,
) -> Result<ExitProbabilities> {
    let k = mec.states.len();
    let mut choice: Vec<Option<ActionIdx>> = vec![None; k];
    for (player, part) in [(Player::Max, &pair.sigma), (Player::Min, &pair.tau)] {
        for &(s, a) in part.iter() {
            let pos = mec
                .position(s)
                .ok_or_else(|| Error::StrategyMismatch(format!("state {s} is not in the MEC")))?;
            if game.owner(s) != player || a >= game.actions(s).len() || choice[pos].is_some() {
                return Err(Error::StrategyMismatch(format!(
                    "bad local choice {a} at state {s}"
                )));
            }
            choice[pos] = Some(a);
        }
    }
    let choice: Vec<ActionIdx> = choice
        .into_iter()
        .enumerate()
        .map(|(pos, c)| {
            c.ok_or_else(|| {
                Error::StrategyMismatch(format!("no local choice at {}", mec.states[pos]))
            })
        })
        .collect::<Result<_>>()?;
    let action = |pos: usize| game.action(mec.states[pos], choice[pos]);

    // MEC states that can leave under the pair; the others stay forever
    let mut leaves = vec![false; k];
    let mut changed = true;
    while changed {
        changed = false;
        for pos in 0..k {
            if !leaves[pos]
                && action(pos).successors().any(|t| match mec.position(t) {
                    Some(q) => leaves[q],
                    None => true,
                })
            {
                leaves[pos] = true;
                changed = true;
            }
        }
    }
    let unknown: Vec<usize> = (0..k).filter(|&p| leaves[p]).collect();
    let mut index = vec![usize::MAX; k];
    for (i, &p) in unknown.iter().enumerate() {
        index[p] = i;
    }
    let m = unknown.len();
    let e = mec.exits.len();
    let mut a = vec![vec![Rational::zero(); m]; m];
    let mut b = vec![vec![Rational::zero(); e]; m];
    for (i, &p) in unknown.iter().enumerate() {
        a[i][i] = Rational::one();
        for t in action(p).transitions() {
            match mec.position(t.to) {
                Some(q) if index[q] != usize::MAX => a[i][index[q]] -= &t.prob,
                Some(_) => {}
                None => {
                    let j = mec
                        .exits
                        .binary_search(&t.to)
                        .expect("outside successor is an exit");
                    b[i][j] += &t.prob;
                }
            }
        }
    }
    let x = solve_exact(a, b).expect("states that can leave do so almost surely");
    let mut probs = vec![vec![Rational::zero(); e]; k];
    for (i, &p) in unknown.iter().enumerate() {
        probs[p] = x[i].clone();
    }
    Ok(ExitProbabilities { probs })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpSolutionReport {
    pub feasible: bool,
    pub max_violation: f64,
    pub objective: f64,
    pub residuals: Vec<(String, f64)>,
}

/// Evaluates every constraint and the objective at the given state values
/// (auxiliary variables are derived from their definitions).
pub fn verify_solution(
    qp: &QuadraticProgram,
    values: &[f64],
    tol: f64,
) -> Result<QpSolutionReport> {
    if values.len() != qp.num_states {
        return Err(Error::Invalid(format!(
            "expected {} values, got {}",
            qp.num_states,
            values.len()
        )));
    }
    let x = qp.complete(values);
    let mut residuals = Vec::with_capacity(qp.num_constraints() + qp.num_states);
    for (v, &value) in values.iter().enumerate() {
        residuals.push((
            format!("bound_{}", qp.var_names[v]),
            (-value).max(value - 1.0).max(0.0),
        ));
    }
    for (v, c) in &qp.fixed {
        residuals.push((
            format!("fix_{}", qp.var_names[*v]),
            (x[*v] - to_f64(c)).abs(),
        ));
    }
    for con in &qp.linear {
        let diff = con.lhs.eval_f64(&x) - con.rhs.eval_f64(&x);
        let r = match con.relation {
            Relation::Le => diff.max(0.0),
            Relation::Ge => (-diff).max(0.0),
            Relation::Eq => diff.abs(),
        };
        residuals.push((con.name.clone(), r));
    }
    for sel in &qp.selects {
        residuals.push((sel.name.clone(), (x[sel.var] - sel.select_f64(&x)).abs()));
    }
    let max_violation = residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max);
    Ok(QpSolutionReport {
        feasible: max_violation <= tol,
        max_violation,
        objective: qp.objective_f64(&x),
        residuals,
    })
}

/// Exact check: every constraint holds and the objective is 0.
pub fn verify_exact(qp: &QuadraticProgram, values: &[Rational]) -> bool {
    if values.len() != qp.num_states
        || values
            .iter()
            .any(|v| v.is_negative() || *v > Rational::one())
    {
        return false;
    }
    let x = qp.complete_exact(values);
    qp.fixed.iter().all(|(v, c)| x[*v] == *c)
        && qp.linear.iter().all(|con| {
            let (l, r) = (con.lhs.eval_exact(&x), con.rhs.eval_exact(&x));
            match con.relation {
                Relation::Le => l <= r,
                Relation::Ge => l >= r,
                Relation::Eq => l == r,
            }
        })
        && qp
            .selects
            .iter()
            .all(|sel| x[sel.var] == sel.select_exact(&x))
        && qp
            .objective
            .iter()
            .all(|(f, g)| (f.eval_exact(&x) * g.eval_exact(&x)).is_zero())
}

/// Big-M rows (M = 1) for one select constraint; binary `i` is variable
/// `first_binary + i`.
pub fn lower_select(sel: &SelectConstraint, first_binary: VarId) -> Vec<LinearConstraint> {
    let mut rows = Vec::new();
    let v = AffineExpr::var(sel.var);
    for (i, option) in sel.options.iter().enumerate() {
        let diff = v.minus(option);
        let b = AffineExpr::var(first_binary + i);
        match sel.kind {
            SelectKind::Max => {
                rows.push(LinearConstraint {
                    name: format!("{}_ge{i}", sel.name),
                    lhs: diff.clone(),
                    relation: Relation::Ge,
                    rhs: AffineExpr::default(),
                });
                rows.push(LinearConstraint {
                    name: format!("{}_ub{i}", sel.name),
                    lhs: AffineExpr::from_terms(
                        diff.constant,
                        diff.terms.into_iter().chain(b.terms),
                    ),
                    relation: Relation::Le,
                    rhs: AffineExpr::constant(Rational::one()),
                });
            }
            SelectKind::Min => {
                rows.push(LinearConstraint {
                    name: format!("{}_le{i}", sel.name),
                    lhs: diff.clone(),
                    relation: Relation::Le,
                    rhs: AffineExpr::default(),
                });
                rows.push(LinearConstraint {
                    name: format!("{}_lb{i}", sel.name),
                    lhs: diff.minus(&b),
                    relation: Relation::Ge,
                    rhs: AffineExpr::constant(-Rational::one()),
                });
            }
        }
    }
    rows.push(LinearConstraint {
        name: format!("{}_one", sel.name),
        lhs: AffineExpr::from_terms(
            Rational::zero(),
            (0..sel.options.len()).map(|i| (first_binary + i, Rational::one())),
        ),
        relation: Relation::Eq,
        rhs: AffineExpr::constant(Rational::one()),
    });
    rows
}

fn number(r: &Rational) -> String {
    format!("{}", to_f64(r))
}

fn write_terms(out: &mut String, terms: &[(VarId, Rational)], name: &dyn Fn(VarId) -> String) {
    if terms.is_empty() {
        out.push_str(" 0");
        return;
    }
    for (i, (v, c)) in terms.iter().enumerate() {
        let sign = if c.is_negative() { "-" } else { "+" };
        let mag = c.abs();
        if i == 0 {
            out.push_str(if c.is_negative() { " -" } else { "" });
        } else {
            write!(out, " {sign}").unwrap();
        }
        if mag.is_one() {
            write!(out, " {}", name(*v)).unwrap();
        } else {
            write!(out, " {} {}", number(&mag), name(*v)).unwrap();
        }
    }
}

fn write_row(out: &mut String, con: &LinearConstraint, name: &dyn Fn(VarId) -> String) {
    let diff = con.lhs.minus(&con.rhs);
    write!(out, " {}:", con.name).unwrap();
    write_terms(out, &diff.terms, name);
    let op = match con.relation {
        Relation::Le => "<=",
        Relation::Eq => "=",
        Relation::Ge => ">=",
    };
    writeln!(out, " {op} {}", number(&-&diff.constant)).unwrap();
}

/// CPLEX LP text. Select constraints become big-M rows over binaries
/// `b0, b1, ...` numbered in constraint order.
pub fn export_lp(qp: &QuadraticProgram) -> String {
    let n = qp.num_vars();
    let mut binaries = 0;
    let mut lowered = Vec::new();
    for sel in &qp.selects {
        lowered.extend(lower_select(sel, n + binaries));
        binaries += sel.options.len();
    }
    let name = |v: VarId| {
        if v < n {
            qp.var_names[v].clone()
        } else {
            format!("b{}", v - n)
        }
    };

    // expand Σ f·g into constant, linear and quadratic parts
    let mut constant = Rational::zero();
    let mut linear: BTreeMap<VarId, Rational> = BTreeMap::new();
    let mut quadratic: BTreeMap<(VarId, VarId), Rational> = BTreeMap::new();
    for (f, g) in &qp.objective {
        constant += &f.constant * &g.constant;
        for (v, c) in &g.terms {
            *linear.entry(*v).or_insert_with(Rational::zero) += &f.constant * c;
        }
        for (v, c) in &f.terms {
            *linear.entry(*v).or_insert_with(Rational::zero) += &g.constant * c;
        }
        for (i, a) in &f.terms {
            for (j, b) in &g.terms {
                let key = if i <= j { (*i, *j) } else { (*j, *i) };
                *quadratic.entry(key).or_insert_with(Rational::zero) += a * b;
            }
        }
    }
    let linear: Vec<(VarId, Rational)> = linear.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    let quadratic: Vec<((VarId, VarId), Rational)> = quadratic
        .into_iter()
        .filter(|(_, c)| !c.is_zero())
        .collect();

    let mut out = String::new();
    let variant = match qp.variant {
        Variant::Condon => "condon",
        Variant::Improved => "improved",
    };
    writeln!(out, "\\ sgsolve {variant} program").unwrap();
    writeln!(out, "Minimize").unwrap();
    out.push_str(" obj:");
    let mut empty = true;
    if !linear.is_empty() {
        write_terms(&mut out, &linear, &name);
        empty = false;
    }
    if !quadratic.is_empty() {
        out.push_str(if empty { " [" } else { " + [" });
        for (k, ((i, j), c)) in quadratic.iter().enumerate() {
            let doubled = c * Rational::from_integer(2.into());
            let sign = if doubled.is_negative() { "-" } else { "+" };
            if k == 0 {
                out.push_str(if doubled.is_negative() { " -" } else { "" });
            } else {
                write!(out, " {sign}").unwrap();
            }
            let mag = doubled.abs();
            let coef = if mag.is_one() {
                String::new()
            } else {
                format!(" {}", number(&mag))
            };
            if i == j {
                write!(out, "{coef} {} ^ 2", name(*i)).unwrap();
            } else {
                write!(out, "{coef} {} * {}", name(*i), name(*j)).unwrap();
            }
        }
        out.push_str(" ] / 2");
        empty = false;
    }
    if !constant.is_zero() || empty {
        let sign = if constant.is_negative() { "-" } else { "+" };
        if empty {
            write!(out, " {}", number(&constant)).unwrap();
        } else {
            write!(out, " {sign} {}", number(&constant.abs())).unwrap();
        }
    }
    out.push('\n');

    writeln!(out, "Subject To").unwrap();
    for (v, c) in &qp.fixed {
        writeln!(out, " fix_{}: {} = {}", name(*v), name(*v), number(c)).unwrap();
    }
    for con in qp.linear.iter().chain(&lowered) {
        write_row(&mut out, con, &name);
    }
    writeln!(out, "Bounds").unwrap();
    for v in 0..n {
        writeln!(out, " 0 <= {} <= 1", name(v)).unwrap();
    }
    if binaries > 0 {
        writeln!(out, "Binaries").unwrap();
        for b in 0..binaries {
            writeln!(out, " b{b}").unwrap();
        }
    }
    writeln!(out, "End").unwrap();
    out
}
