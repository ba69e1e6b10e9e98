use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{ArgGroup, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sgsolve_core::generate::{generate_random_game, GenConfig};
use sgsolve_core::graph::{collapse_to_sinks, zero_value_states};
use sgsolve_core::mdp::{unguaranteed_vi, BestResponseMode, ViConfig};
use sgsolve_core::oracle::{enumerate_solve_capped, DEFAULT_CAP};
use sgsolve_core::qp::{build_condon_qp, build_improved_qp, export_lp};
use sgsolve_core::qp_solver::{solve_game_qp, QpOptions, QpSolverConfig};
use sgsolve_core::si::{solve_si, SiConfig, SiInit};
use sgsolve_core::transforms::{
    default_chain_length, normal_form_violation, to_2act, to_cnf, to_half_probs, to_no1act,
    to_stopping, TransformResult,
};
use sgsolve_core::{
    mec_decomposition, parse_model, render, Game, Guarantee, Player, SolveResult, Stats, Strategy,
    Values,
};

use sgsolve_cli::check::{check_game, CheckOptions};
use sgsolve_cli::report::{MecReport, OriginMap, QpFailureReport, SolveReport, TransformReport};

#[derive(Parser)]
#[command(
    name = "sgsolve",
    version,
    about = "Reachability values of simple stochastic games"
)]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute values and strategies.
    Solve(SolveArgs),
    /// Exact values by enumerating every pure strategy pair.
    Oracle {
        file: PathBuf,
        /// Largest number of strategy pairs to enumerate.
        #[arg(long, default_value_t = DEFAULT_CAP)]
        cap: u128,
    },
    /// Maximal end components and their bottom-up order.
    Mec { file: PathBuf },
    /// Rewrite a game; writes the new game and a JSON map from new to old states.
    Transform(TransformArgs),
    /// Write the quadratic program of a game in LP format.
    ExportQp(ExportArgs),
    /// Generate seeded random games.
    Gen(GenArgs),
    /// Cross-validate oracle, strategy iteration and the QP solver.
    Check(CheckArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Si,
    Qp,
    Vi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Attractor,
    Vi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OpponentArg {
    Vi,
    Pi,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WarmStart {
    Vi,
}

#[derive(clap::Args)]
struct SolveArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Si)]
    method: Method,
    /// Initial Maximizer strategy for strategy iteration.
    #[arg(long, value_enum, default_value_t = InitArg::Vi)]
    init: InitArg,
    /// How the Minimizer's best response is computed.
    #[arg(long, value_enum, default_value_t = OpponentArg::Pi)]
    opponent: OpponentArg,
    /// Solve end components bottom-up, freezing solved states.
    #[arg(long)]
    topological: bool,
    /// Start the QP solver from value-iteration estimates.
    #[arg(long, value_enum)]
    warm_start: Option<WarmStart>,
    /// Random restarts of the QP solver before giving up.
    #[arg(long, default_value_t = 16)]
    restarts: usize,
    /// Seed of the QP solver's restarts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stopping threshold of value iteration, also used for value-iteration
    /// best responses and warm starts.
    #[arg(long)]
    precision: Option<f64>,
    /// Iteration cap for value iteration or for each QP restart.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Keep states of value zero in the quadratic program.
    #[arg(long)]
    no_zero_preprocess: bool,
}

#[derive(clap::Args)]
#[command(group(ArgGroup::new("transform").required(true)))]
struct TransformArgs {
    file: PathBuf,
    /// Full normal form: stopping, 1/2 probabilities, two actions, no single-action states.
    #[arg(long, group = "transform")]
    to_cnf: bool,
    /// Make every play end by inserting chains that leak to a sink.
    #[arg(long, group = "transform")]
    to_stopping: bool,
    /// At most two actions per state.
    #[arg(long = "to-2act", group = "transform")]
    to_2act: bool,
    /// At least two actions per non-absorbing state.
    #[arg(long = "to-no1act", group = "transform")]
    to_no1act: bool,
    /// Only probabilities 1/2 and 1; needs power-of-two denominators.
    #[arg(long, group = "transform")]
    to_half_probs: bool,
    /// Length of each inserted chain; defaults to 2(|S|-1)+1.
    #[arg(long)]
    m: Option<usize>,
    /// Insert chains only into actions of states inside end components (default).
    #[arg(long, conflicts_with = "all_actions")]
    mec_only: bool,
    /// Insert chains into every action of every non-absorbing state.
    #[arg(long)]
    all_actions: bool,
    /// Largest denominator exponent accepted by the 1/2-probability split.
    #[arg(long, default_value_t = 64)]
    max_bits: u32,
    /// Output game; defaults to `<input stem>.<transform>.sg` beside the input.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Condon,
    Improved,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Lp,
}

#[derive(clap::Args)]
struct ExportArgs {
    file: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Improved)]
    variant: VariantArg,
    #[arg(long, value_enum, default_value_t = Format::Lp)]
    format: Format,
    /// Keep states of value zero in the improved program.
    #[arg(long)]
    no_zero_preprocess: bool,
    /// Chain length used when the Condon variant needs the normal-form transform.
    #[arg(long)]
    m: Option<usize>,
    /// Output file; defaults to the input path with extension `.lp`.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Non-absorbing states; a target and a sink are added.
    #[arg(long, default_value_t = 6)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    max_actions: usize,
    #[arg(long, default_value_t = 3)]
    max_successors: usize,
    /// Only power-of-two denominators, so the 1/2-probability split applies.
    #[arg(long)]
    dyadic: bool,
    /// Chance of an edge back to an earlier state; raises the number of end components.
    #[arg(long, default_value_t = 0.4)]
    back_edge: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of games, with seeds `seed..seed+count`.
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Single output file; stdout when absent and `count` is 1.
    #[arg(short, long, conflicts_with = "out_dir")]
    output: Option<PathBuf>,
    /// Directory receiving `game-<seed>.sg` files.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(clap::Args)]
struct CheckArgs {
    /// Game files or directories of `.sg` files.
    paths: Vec<PathBuf>,
    /// Additionally check this many random games with seeds `seed..seed+random`.
    #[arg(long, default_value_t = 0)]
    random: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest accepted deviation of approximate methods from the reference.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Games with more strategy pairs are checked against exact strategy
    /// iteration instead of the oracle.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Treat a QP run without certificate as a disagreement.
    #[arg(long)]
    strict: bool,
}

/// A run that parsed its input but could not produce a certified answer.
#[derive(Debug)]
struct SolveFailure;

impl std::fmt::Display for SolveFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("solve failed")
    }
}

impl std::error::Error for SolveFailure {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<SolveFailure>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var("SGSOLVE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("SGSOLVE_THREADS={raw:?} is not a thread count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Solve(args) => solve(args, cli.json),
        Command::Oracle { file, cap } => {
            let game = load(file)?;
            let start = Instant::now();
            let solution = enumerate_solve_capped(&game, *cap)?;
            let stats = Stats {
                wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
                ..Stats::default()
            };
            emit(
                cli.json,
                &SolveReport::from_oracle(&game, &solution, stats),
                |r| r.to_text(&game),
            )
        }
        Command::Mec { file } => {
            let game = load(file)?;
            let report = MecReport::new(&game, &mec_decomposition(&game));
            emit(cli.json, &report, MecReport::to_text)
        }
        Command::Transform(args) => transform(args, cli.json),
        Command::ExportQp(args) => export(args, cli.json),
        Command::Gen(args) => gen(args),
        Command::Check(args) => run_check(args, cli.json),
    }
}

fn load(path: &Path) -> anyhow::Result<Game> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_model(&text).with_context(|| format!("{}", path.display()))
}

fn emit<T: Serialize>(
    json: bool,
    value: &T,
    text: impl FnOnce(&T) -> String,
) -> anyhow::Result<()> {
    if json {
        out(&(serde_json::to_string_pretty(value)? + "\n"))
    } else {
        out(&text(value))
    }
}

/// Writes to stdout; a reader that went away early is not an error.
fn out(text: &str) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|()| stdout.flush())
    {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn solve(args: &SolveArgs, json: bool) -> anyhow::Result<()> {
    let game = load(&args.file)?;
    if let Some(p) = args.precision {
        if !(p > 0.0 && p.is_finite()) {
            bail!("--precision must be positive, got {p}");
        }
    }
    let result = match args.method {
        Method::Si => {
            let defaults = SiConfig::default();
            let config = SiConfig {
                init: match args.init {
                    InitArg::Attractor => SiInit::Attractor,
                    InitArg::Vi => SiInit::ViSeeded,
                },
                vi_epsilon: args.precision.unwrap_or(defaults.vi_epsilon),
                opponent: match args.opponent {
                    OpponentArg::Vi => BestResponseMode::Vi,
                    OpponentArg::Pi => BestResponseMode::PolicyIteration,
                },
                opponent_precision: args.precision.unwrap_or(defaults.opponent_precision),
                topological: args.topological,
            };
            solve_si(&game, &config)?
        }
        Method::Vi => solve_vi(&game, args),
        Method::Qp => {
            let defaults = QpSolverConfig::default();
            let options = QpOptions {
                solver: QpSolverConfig {
                    restarts: args.restarts.max(1),
                    seed: args.seed,
                    max_iterations: args.max_iterations.unwrap_or(defaults.max_iterations),
                    ..defaults
                },
                warm_start: args
                    .warm_start
                    .map(|WarmStart::Vi| args.precision.unwrap_or(1e-6)),
                zero_preprocess: !args.no_zero_preprocess,
            };
            let outcome = solve_game_qp(&game, &options)?;
            match outcome.result {
                Some(r) => r,
                None => {
                    let report = QpFailureReport::new(
                        &game,
                        &outcome.solution,
                        outcome.program_vars,
                        outcome.program_constraints,
                    );
                    if json {
                        out(&(serde_json::to_string_pretty(&report)? + "\n"))?;
                    } else {
                        eprintln!(
                            "qp: no certified solution after {} restarts (best objective {:e}, max violation {:e})",
                            report.restarts_used, report.objective, report.max_violation
                        );
                    }
                    return Err(SolveFailure.into());
                }
            }
        }
    };
    let report = SolveReport::from_result(&game, &result);
    emit(json, &report, |r| r.to_text(&game))
}

fn solve_vi(game: &Game, args: &SolveArgs) -> SolveResult {
    let start = Instant::now();
    let defaults = ViConfig::default();
    let config = ViConfig {
        epsilon: args.precision.unwrap_or(defaults.epsilon),
        max_iterations: args.max_iterations.unwrap_or(defaults.max_iterations),
    };
    let vi = unguaranteed_vi(game, &config);
    if !vi.converged {
        log::warn!(
            "value iteration stopped after {} iterations without meeting the threshold",
            vi.iterations
        );
    }
    let greedy = |player: Player| {
        Strategy::from_fn(game, player, |s| {
            let q: Vec<f64> = game
                .actions(s)
                .iter()
                .map(|a| a.expect(&vi.values))
                .collect();
            let best = match player {
                Player::Max => q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Player::Min => q.iter().copied().fold(f64::INFINITY, f64::min),
            };
            q.iter()
                .position(|&v| (v - best).abs() <= config.epsilon)
                .unwrap_or(0)
        })
    };
    SolveResult {
        max_strategy: greedy(Player::Max),
        min_strategy: greedy(Player::Min),
        values: Values::Approx(vi.values),
        stats: Stats {
            iterations: vi.iterations,
            wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
            ..Stats::default()
        },
        method: "vi".into(),
        guarantee: Guarantee::Unguaranteed,
    }
}

fn default_output(input: &Path, suffix: &str) -> PathBuf {
    let stem = input
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "game".into());
    input.with_file_name(format!("{stem}.{suffix}.sg"))
}

fn transform(args: &TransformArgs, json: bool) -> anyhow::Result<()> {
    let game = load(&args.file)?;
    let mec_only = args.mec_only || !args.all_actions;
    let m = args.m.unwrap_or_else(|| default_chain_length(&game));
    let (name, result): (&str, TransformResult) = if args.to_cnf {
        ("cnf", to_cnf(&game, m, mec_only, args.max_bits)?)
    } else if args.to_stopping {
        ("stopping", to_stopping(&game, m, mec_only)?)
    } else if args.to_2act {
        ("2act", to_2act(&game)?)
    } else if args.to_no1act {
        ("no1act", to_no1act(&game)?)
    } else {
        ("half-probs", to_half_probs(&game, args.max_bits)?)
    };
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| default_output(&args.file, name));
    let origin_path = output.with_extension("origin.json");
    fs::write(&output, render(&result.game))
        .with_context(|| format!("cannot write {}", output.display()))?;
    let source = args.file.display().to_string();
    let map = OriginMap {
        source: &source,
        transform: name,
        origin: &result.origin,
    };
    fs::write(&origin_path, serde_json::to_string_pretty(&map)? + "\n")
        .with_context(|| format!("cannot write {}", origin_path.display()))?;
    let report = TransformReport {
        output: output.display().to_string(),
        origin_map: origin_path.display().to_string(),
        states: result.game.num_states(),
        auxiliary: result.auxiliary_states().len(),
    };
    emit(json, &report, |r| {
        format!(
            "wrote {} ({} states, {} auxiliary) and {}\n",
            r.output, r.states, r.auxiliary, r.origin_map
        )
    })
}

fn export(args: &ExportArgs, json: bool) -> anyhow::Result<()> {
    let game = load(&args.file)?;
    let Format::Lp = args.format;
    let qp = match args.variant {
        VariantArg::Condon => match normal_form_violation(&game) {
            None => build_condon_qp(&game)?,
            Some(requirement) => {
                log::info!("game violates {requirement}; exporting the program of its normal form");
                let m = args.m.unwrap_or_else(|| default_chain_length(&game));
                build_condon_qp(&to_cnf(&game, m, true, 64)?.game)?
            }
        },
        VariantArg::Improved => {
            let prepared = if args.no_zero_preprocess {
                game
            } else {
                collapse_to_sinks(&game, &zero_value_states(&game))
            };
            let binary = to_2act(&prepared)?.game;
            build_improved_qp(&binary, &mec_decomposition(&binary))?
        }
    };
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| args.file.with_extension("lp"));
    fs::write(&output, export_lp(&qp))
        .with_context(|| format!("cannot write {}", output.display()))?;
    #[derive(Serialize)]
    struct ExportReport {
        output: String,
        variables: usize,
        constraints: usize,
    }
    let report = ExportReport {
        output: output.display().to_string(),
        variables: qp.num_vars(),
        constraints: qp.num_constraints(),
    };
    emit(json, &report, |r| {
        format!(
            "wrote {} ({} variables, {} constraints)\n",
            r.output, r.variables, r.constraints
        )
    })
}

fn gen(args: &GenArgs) -> anyhow::Result<()> {
    if args.states == 0 || args.max_actions == 0 || args.max_successors == 0 {
        bail!("--states, --max-actions and --max-successors must be positive");
    }
    if !(0.0..=1.0).contains(&args.back_edge) {
        bail!("--back-edge must lie in [0, 1]");
    }
    let config = GenConfig {
        states: args.states,
        max_actions: args.max_actions,
        max_successors: args.max_successors,
        dyadic: args.dyadic,
        back_edge: args.back_edge,
        ..GenConfig::default()
    };
    let seeds = args.seed..args.seed + args.count;
    match (&args.out_dir, &args.output) {
        (Some(dir), _) => {
            fs::create_dir_all(dir)?;
            for seed in seeds {
                let path = dir.join(format!("game-{seed}.sg"));
                fs::write(&path, render(&generate_random_game(&config, seed)))
                    .with_context(|| format!("cannot write {}", path.display()))?;
            }
        }
        (None, _) if args.count != 1 => bail!("--count above 1 needs --out-dir"),
        (None, Some(path)) => fs::write(path, render(&generate_random_game(&config, args.seed)))
            .with_context(|| format!("cannot write {}", path.display()))?,
        (None, None) => out(&render(&generate_random_game(&config, args.seed)))?,
    }
    Ok(())
}

fn collect_games(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(path)?
                .map(|e| e.map(|e| e.path()))
                .collect::<Result<_, _>>()?;
            inside.retain(|p| p.extension().is_some_and(|e| e == "sg"));
            inside.sort();
            files.extend(inside);
        } else {
            files.push(path.clone());
        }
    }
    Ok(files)
}

fn run_check(args: &CheckArgs, json: bool) -> anyhow::Result<()> {
    let files = collect_games(&args.paths)?;
    if files.is_empty() && args.random == 0 {
        bail!("nothing to check: give game files, directories or --random N");
    }
    let options = CheckOptions {
        tolerance: args.tolerance,
        oracle_cap: args.cap,
        qp: QpOptions::default(),
        strict: args.strict,
    };
    let mut games = Vec::new();
    for f in &files {
        games.push((f.display().to_string(), load(f)?));
    }
    let config = GenConfig {
        back_edge: 0.33,
        ..GenConfig::default()
    };
    for seed in args.seed..args.seed + args.random {
        let config = GenConfig {
            states: 2 + (seed % 5) as usize,
            ..config.clone()
        };
        games.push((
            format!("random-{seed}"),
            generate_random_game(&config, seed),
        ));
    }
    let mut all_agree = true;
    let mut entries = Vec::new();
    for (name, game) in &games {
        let entry = check_game(name, game, &options);
        all_agree &= entry.agree;
        if !json {
            out(&(entry.to_text() + "\n"))?;
        }
        entries.push(entry);
    }
    if json {
        out(&(serde_json::to_string_pretty(&entries)? + "\n"))?;
    } else {
        let bad = entries.iter().filter(|e| !e.agree).count();
        out(&format!("{} games, {} disagreements\n", entries.len(), bad))?;
    }
    if all_agree {
        Ok(())
    } else {
        Err(SolveFailure.into())
    }
}
