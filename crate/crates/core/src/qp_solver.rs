//! A certifying local solver for the programs built in [`crate::qp`].
//!
//! Projected descent on the bilinear objective with select constraints
//! resolved to their current branch, plus an active-set polish that solves
//! the equality system obtained by zeroing the smaller factor of every
//! product. A point is only ever accepted after [`verify_solution`] confirms
//! feasibility and a zero objective, so failure is a possible, honest
//! outcome.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::game::Game;
use crate::graph::{collapse_to_sinks, mec_decomposition, zero_value_states};
use crate::mdp::{unguaranteed_vi, ViConfig};
use crate::qp::{
    build_improved_qp, verify_solution, AffineExpr, QuadraticProgram, Relation, SelectKind,
};
use crate::rational::{solve_f64, to_f64};
use crate::si::strategies_from_values;
use crate::solution::{Guarantee, SolveResult, Stats, Values};
use crate::transforms::to_2act;

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolverConfig {
    pub objective_tol: f64,
    pub feasibility_tol: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    /// Initial step of the diminishing rule `step / sqrt(1 + t/100)`.
    pub step: f64,
    pub seed: u64,
    /// State values used as restart 0.
    pub warm_start: Option<Vec<f64>>,
    pub selector_period: usize,
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Restarts evaluated together; fixed so results do not depend on the
    /// thread count.
    pub batch: usize,
}

impl Default for QpSolverConfig {
    fn default() -> Self {
        QpSolverConfig {
            objective_tol: 1e-9,
            feasibility_tol: 1e-8,
            max_iterations: 100_000,
            restarts: 16,
            step: 0.1,
            seed: 0,
            warm_start: None,
            selector_period: 50,
            stall_window: 500,
            stall_tol: 1e-12,
            batch: 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QpSolution {
    pub success: bool,
    /// State values of the accepted point, or of the best point seen.
    pub values: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    /// Index of the accepted restart.
    pub restart: Option<usize>,
    pub restarts_used: usize,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
struct Lin {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

impl Lin {
    fn new(e: &AffineExpr) -> Self {
        Lin {
            constant: to_f64(&e.constant),
            terms: e.terms.iter().map(|(v, c)| (*v, to_f64(c))).collect(),
        }
    }

    fn diff(a: &AffineExpr, b: &AffineExpr) -> Self {
        Lin::new(&a.minus(b))
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(v, c)| acc + c * x[v])
    }
}

struct Select {
    var: usize,
    kind: SelectKind,
    /// `var - option` per option.
    gaps: Vec<Lin>,
}

impl Select {
    fn branch(&self, x: &[f64]) -> usize {
        let vals: Vec<f64> = self.gaps.iter().map(|g| x[self.var] - g.eval(x)).collect();
        let mut best = 0;
        for (i, &v) in vals.iter().enumerate() {
            let better = match self.kind {
                SelectKind::Max => v > vals[best],
                SelectKind::Min => v < vals[best],
            };
            if better {
                best = i;
            }
        }
        best
    }
}

/// The program in binary64, rows in the form `expr = 0` or `expr >= 0`.
struct Compiled<'a> {
    qp: &'a QuadraticProgram,
    n: usize,
    fixed: Vec<Option<f64>>,
    equalities: Vec<Lin>,
    inequalities: Vec<Lin>,
    selects: Vec<Select>,
    objective: Vec<(Lin, Lin)>,
}

impl<'a> Compiled<'a> {
    fn new(qp: &'a QuadraticProgram) -> Self {
        let n = qp.num_vars();
        let mut fixed = vec![None; n];
        for (v, c) in &qp.fixed {
            fixed[*v] = Some(to_f64(c));
        }
        let mut equalities = Vec::new();
        let mut inequalities = Vec::new();
        for con in &qp.linear {
            match con.relation {
                Relation::Eq => equalities.push(Lin::diff(&con.lhs, &con.rhs)),
                Relation::Ge => inequalities.push(Lin::diff(&con.lhs, &con.rhs)),
                Relation::Le => inequalities.push(Lin::diff(&con.rhs, &con.lhs)),
            }
        }
        let selects = qp
            .selects
            .iter()
            .map(|sel| Select {
                var: sel.var,
                kind: sel.kind,
                gaps: sel
                    .options
                    .iter()
                    .map(|o| Lin::diff(&AffineExpr::var(sel.var), o))
                    .collect(),
            })
            .collect();
        let objective = qp
            .objective
            .iter()
            .map(|(f, g)| (Lin::new(f), Lin::new(g)))
            .collect();
        Compiled {
            qp,
            n,
            fixed,
            equalities,
            inequalities,
            selects,
            objective,
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        self.objective
            .iter()
            .map(|(f, g)| f.eval(x) * g.eval(x))
            .sum()
    }

    fn pin(&self, x: &mut [f64]) {
        for (v, f) in self.fixed.iter().enumerate() {
            match f {
                Some(c) => x[v] = *c,
                None => x[v] = x[v].clamp(0.0, 1.0),
            }
        }
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (f, g) in &self.objective {
            let (fv, gv) = (f.eval(x), g.eval(x));
            for &(v, c) in &f.terms {
                grad[v] += c * gv;
            }
            for &(v, c) in &g.terms {
                grad[v] += c * fv;
            }
        }
    }

    /// Moves `x` onto the row `expr = 0` (or into `expr >= 0`) along the
    /// free coordinates.
    fn project_row(&self, row: &Lin, x: &mut [f64], equality: bool) {
        let val = row.eval(x);
        if val >= 0.0 && (!equality || val == 0.0) {
            return;
        }
        let norm: f64 = row
            .terms
            .iter()
            .filter(|(v, _)| self.fixed[*v].is_none())
            .map(|(_, c)| c * c)
            .sum();
        if norm == 0.0 {
            return;
        }
        let step = val / norm;
        for &(v, c) in &row.terms {
            if self.fixed[v].is_none() {
                x[v] -= step * c;
            }
        }
    }

    fn project(&self, x: &mut [f64], branches: &[usize], sweeps: usize) {
        for _ in 0..sweeps {
            for row in &self.equalities {
                self.project_row(row, x, true);
            }
            for row in &self.inequalities {
                self.project_row(row, x, false);
            }
            for (sel, &b) in self.selects.iter().zip(branches) {
                for (i, gap) in sel.gaps.iter().enumerate() {
                    if i == b {
                        self.project_row(gap, x, true);
                    } else {
                        match sel.kind {
                            SelectKind::Max => self.project_row(gap, x, false),
                            SelectKind::Min => {
                                let neg = Lin {
                                    constant: -gap.constant,
                                    terms: gap.terms.iter().map(|&(v, c)| (v, -c)).collect(),
                                };
                                self.project_row(&neg, x, false)
                            }
                        }
                    }
                }
            }
            self.pin(x);
        }
    }

    /// Solves the square equality system given by the fixed variables, the
    /// linear equalities, the current select branches and, per product, the
    /// factor that is currently closer to zero.
    fn polish(&self, x: &[f64]) -> Option<Vec<f64>> {
        let free: Vec<usize> = (0..self.n).filter(|&v| self.fixed[v].is_none()).collect();
        let mut col = vec![usize::MAX; self.n];
        for (i, &v) in free.iter().enumerate() {
            col[v] = i;
        }
        let mut rows: Vec<&Lin> = self.equalities.iter().collect();
        for sel in &self.selects {
            rows.push(&sel.gaps[sel.branch(x)]);
        }
        for (f, g) in &self.objective {
            rows.push(if f.eval(x).abs() <= g.eval(x).abs() {
                f
            } else {
                g
            });
        }
        if rows.len() != free.len() {
            return None;
        }
        let mut a = vec![vec![0.0; free.len()]; rows.len()];
        let mut b = vec![0.0; rows.len()];
        for (r, row) in rows.iter().enumerate() {
            b[r] = -row.constant;
            for &(v, c) in &row.terms {
                match self.fixed[v] {
                    Some(f) => b[r] -= c * f,
                    None => a[r][col[v]] += c,
                }
            }
        }
        let sol = solve_f64(a, b)?;
        let mut y = x.to_vec();
        for (i, &v) in free.iter().enumerate() {
            y[v] = sol[i];
        }
        self.pin(&mut y);
        Some(y)
    }

    fn certify(&self, x: &[f64], config: &QpSolverConfig) -> Candidate {
        let report = verify_solution(self.qp, &x[..self.qp.num_states], config.feasibility_tol)
            .expect("state vector has the program's length");
        Candidate {
            success: report.feasible && report.objective.abs() <= config.objective_tol,
            values: x[..self.qp.num_states].to_vec(),
            objective: report.objective,
            max_violation: report.max_violation,
            iterations: 0,
        }
    }
}

#[derive(Clone, Debug)]
struct Candidate {
    success: bool,
    values: Vec<f64>,
    objective: f64,
    max_violation: f64,
    iterations: usize,
}

impl Candidate {
    fn merit(&self) -> f64 {
        self.objective.abs() + self.max_violation
    }
}

fn run_restart(c: &Compiled, config: &QpSolverConfig, k: usize) -> Candidate {
    let mut x = vec![0.0; c.n];
    match (&config.warm_start, k) {
        (Some(warm), 0) => x[..warm.len().min(c.n)].copy_from_slice(&warm[..warm.len().min(c.n)]),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
            for v in x.iter_mut().take(c.qp.num_states) {
                *v = rng.random::<f64>();
            }
        }
    }
    c.pin(&mut x);
    x = c.qp.complete(&x[..c.qp.num_states]);

    let mut best = c.certify(&x, config);
    let mut grad = vec![0.0; c.n];
    let mut branches: Vec<usize> = c.selects.iter().map(|s| s.branch(&x)).collect();
    let mut window_start = c.objective(&x);
    let mut ran = config.max_iterations;
    for t in 0..config.max_iterations {
        if t % config.selector_period == 0 {
            branches = c.selects.iter().map(|s| s.branch(&x)).collect();
            if let Some(y) = c.polish(&x) {
                let cand = c.certify(&y, config);
                if cand.success {
                    return Candidate {
                        iterations: t,
                        ..cand
                    };
                }
            }
            let here = c.certify(&x, config);
            log::trace!(
                "restart {k} t {t}: objective {:e}, violation {:e}",
                here.objective,
                here.max_violation
            );
            if here.success {
                return Candidate {
                    iterations: t,
                    ..here
                };
            }
            if here.merit() < best.merit() {
                best = here;
            }
        }
        c.gradient(&x, &mut grad);
        // Scale so no coordinate moves further than the step itself; long
        // chains of products otherwise give gradients far above one.
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        let eta = config.step / (1.0 + t as f64 / 100.0).sqrt() / gmax.max(1.0);
        for (xv, g) in x.iter_mut().zip(&grad) {
            *xv -= eta * g;
        }
        c.project(&mut x, &branches, 3);
        if (t + 1) % config.stall_window == 0 {
            let now = c.objective(&x);
            if (window_start - now).abs() <= config.stall_tol * window_start.abs().max(1e-300) {
                ran = t + 1;
                break;
            }
            window_start = now;
        }
    }
    let last = c.certify(&x, config);
    if last.success || last.merit() < best.merit() {
        best = last;
    }
    Candidate {
        iterations: ran,
        ..best
    }
}

/// Runs restarts in fixed-size batches until one certifies. Among certified
/// restarts of the first successful batch, the lowest objective wins, ties to
/// the lower index.
pub fn solve_qp(qp: &QuadraticProgram, config: &QpSolverConfig) -> QpSolution {
    assert!(config.restarts >= 1 && config.objective_tol > 0.0 && config.feasibility_tol > 0.0);
    let compiled = Compiled::new(qp);
    let batch = config.batch.max(1);
    let mut best: Option<(usize, Candidate)> = None;
    let mut iterations = 0;
    let mut start = 0;
    while start < config.restarts {
        let end = (start + batch).min(config.restarts);
        let results: Vec<Candidate> = (start..end)
            .into_par_iter()
            .map(|k| run_restart(&compiled, config, k))
            .collect();
        iterations += results.iter().map(|r| r.iterations).sum::<usize>();
        let winner = results
            .iter()
            .enumerate()
            .filter(|(_, r)| r.success)
            .min_by(|a, b| {
                a.1.objective
                    .abs()
                    .total_cmp(&b.1.objective.abs())
                    .then(a.0.cmp(&b.0))
            });
        if let Some((i, r)) = winner {
            return QpSolution {
                success: true,
                values: r.values.clone(),
                objective: r.objective,
                max_violation: r.max_violation,
                restart: Some(start + i),
                restarts_used: end,
                iterations,
            };
        }
        for (i, r) in results.into_iter().enumerate() {
            if best.as_ref().is_none_or(|(_, b)| r.merit() < b.merit()) {
                best = Some((start + i, r));
            }
        }
        start = end;
    }
    let (_, r) = best.expect("at least one restart");
    QpSolution {
        success: false,
        values: r.values,
        objective: r.objective,
        max_violation: r.max_violation,
        restart: None,
        restarts_used: config.restarts,
        iterations,
    }
}

/// Unguaranteed value iteration on the whole game as a QP starting point.
/// It may be infeasible for the program.
pub fn warm_start_values(game: &Game, epsilon: f64) -> Vec<f64> {
    unguaranteed_vi(
        game,
        &ViConfig {
            epsilon,
            ..ViConfig::default()
        },
    )
    .values
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpOptions {
    pub solver: QpSolverConfig,
    /// Value-iteration precision for a warm start, if any.
    pub warm_start: Option<f64>,
    /// Turn states the Minimizer can trap into sinks before building.
    pub zero_preprocess: bool,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions {
            solver: QpSolverConfig::default(),
            warm_start: None,
            zero_preprocess: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpOutcome {
    /// Present when the solver certified a solution.
    pub result: Option<SolveResult>,
    pub solution: QpSolution,
    pub program_vars: usize,
    pub program_constraints: usize,
}

/// The full QP route: optional zero-value preprocessing, the 2Act transform,
/// MEC decomposition, the improved program, and the local solver. Values and
/// strategies refer to the states of `game`.
pub fn solve_game_qp(game: &Game, options: &QpOptions) -> Result<QpOutcome> {
    let start = Instant::now();
    let prepared = if options.zero_preprocess {
        collapse_to_sinks(game, &zero_value_states(game))
    } else {
        game.clone()
    };
    let binary = to_2act(&prepared)?.game;
    let qp = build_improved_qp(&binary, &mec_decomposition(&binary))?;
    let mut solver = options.solver.clone();
    if let Some(eps) = options.warm_start {
        solver.warm_start = Some(warm_start_values(&binary, eps));
    }
    let solution = solve_qp(&qp, &solver);
    let result = if solution.success {
        let values: Vec<f64> = solution.values[..game.num_states()].to_vec();
        // Certified residuals are far below this; it only decides ties.
        let (max_strategy, min_strategy) =
            strategies_from_values(game, &values, solver.feasibility_tol * 100.0);
        Some(SolveResult {
            values: Values::Approx(values),
            max_strategy,
            min_strategy,
            stats: Stats {
                iterations: solution.iterations,
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                restarts: Some(solution.restarts_used),
                objective: Some(solution.objective),
                ..Stats::default()
            },
            method: "qp".into(),
            guarantee: Guarantee::Epsilon,
        })
    } else {
        None
    };
    Ok(QpOutcome {
        result,
        solution,
        program_vars: qp.num_vars(),
        program_constraints: qp.num_constraints(),
    })
}
