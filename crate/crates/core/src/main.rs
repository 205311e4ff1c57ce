use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mcap::domain::RandomSource;
use mcap::experiment::{load_scenario, run_experiment, write_results, ExperimentConfig, Policy};
use mcap::parser::{format_program, parse_program};
use mcap::planner::{run_episode, EpisodeSpec, Variant};
use mcap::program::{reduce_to_normal_form, Program};
use mcap::rescue::{generate_initial, RescueConfig, RescueDomain};
use mcap::search::{BackupWeights, SearchParams};
use mcap::semantics::pot;

#[derive(Parser)]
#[command(name = "mcap", version, about = "Monte Carlo planning with action programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Base,
    Events,
    GoalChange,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Mcap,
    Mcts,
}

#[derive(clap::Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 1000)]
    budget: usize,
    #[arg(long, default_value_t = 40)]
    hmax: usize,
    #[arg(long, default_value_t = 0.9)]
    gamma: f64,
    #[arg(long, default_value_t = 10.0)]
    c: f64,
    /// Weigh successors by their share of child visits instead of the
    /// action's visit count.
    #[arg(long)]
    normalized_weights: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Print the canonical form of a program.
    Parse { file: PathBuf },
    /// Print the normal-form entries of a condition-free program.
    Normalize { file: PathBuf },
    /// Print the continuations of a program in a scenario's initial state.
    Pot {
        file: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one online episode and print its trace.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        program: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, value_enum, default_value = "base")]
        variant: VariantArg,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Run repeated episodes and write per-step statistics.
    Experiment {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[arg(long, value_enum)]
        policy: PolicyArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Total width of the confidence interval to reach at every step.
        #[arg(long, default_value_t = 0.1)]
        ci: f64,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        #[arg(long, default_value_t = 50)]
        horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
    },
}

/// Failure category, mapped to the exit code.
enum Failure {
    Usage(String),
    Domain(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 2,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn domain(e: impl std::fmt::Display) -> Failure {
    Failure::Domain(e.to_string())
}

fn read_program(path: &Path) -> Result<Program, Failure> {
    let src = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    parse_program(&src).map_err(|e| usage(format!("{}:{e}", path.display())))
}

fn scenario(path: &Path) -> Result<(RescueConfig, Option<u64>), Failure> {
    let s = load_scenario(path).map_err(domain)?;
    Ok((s.rescue, s.seed))
}

fn search_params(a: &SearchArgs) -> Result<SearchParams, Failure> {
    let p = SearchParams::new(a.hmax, a.gamma, a.c, a.budget).map_err(usage)?;
    Ok(if a.normalized_weights {
        p.with_weights(BackupWeights::Normalized)
    } else {
        p
    })
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Base => Variant::Base,
        VariantArg::Events => Variant::Events,
        VariantArg::GoalChange => Variant::GoalChange,
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Parse { file } => {
            println!("{}", format_program(&read_program(&file)?));
        }
        Command::Normalize { file } => {
            let nf = reduce_to_normal_form(&read_program(&file)?).map_err(domain)?;
            for e in &nf {
                println!("{e}");
            }
        }
        Command::Pot { file, scenario: path, seed } => {
            let program = read_program(&file)?;
            let (cfg, file_seed) = scenario(&path)?;
            let s = generate_initial(&cfg, &mut RandomSource::from_seed(seed.or(file_seed).unwrap_or(0)))
                .map_err(domain)?;
            let dom = RescueDomain::new(cfg);
            for e in &pot(&dom, &s, &program).map_err(domain)? {
                println!("{e}");
            }
        }
        Command::Plan {
            scenario: path,
            program,
            seed,
            horizon,
            variant: v,
            search,
        } => {
            let program = read_program(&program)?;
            let (rescue, file_seed) = scenario(&path)?;
            let spec = EpisodeSpec {
                rescue,
                search: search_params(&search)?,
                program,
                variant: variant(v),
                horizon,
            };
            let trace = run_episode(&spec, seed.or(file_seed).unwrap_or(0)).map_err(domain)?;
            println!("step action safe burning reused");
            println!("0 - {} {} -", trace.initial.safe_ratio(), trace.initial.burning_ratio());
            for r in &trace.records {
                let action = r.action.as_ref().map_or("-".to_string(), |a| a.to_string());
                println!("{} {} {} {} {}", r.step, action, r.safe_ratio, r.burning_ratio, r.reused);
            }
        }
        Command::Experiment {
            variant: v,
            policy,
            out,
            scenario: path,
            episodes,
            ci,
            level,
            horizon,
            seed,
            search,
        } => {
            let rescue = match path {
                Some(p) => scenario(&p)?.0,
                None => RescueConfig::default(),
            };
            let cfg = ExperimentConfig {
                variant: variant(v),
                policy: match policy {
                    PolicyArg::Mcap => Policy::Mcap,
                    PolicyArg::Mcts => Policy::Mcts,
                },
                rescue,
                search: search_params(&search)?,
                horizon,
                episodes,
                ci_target: ci / 2.0,
                ci_level: level,
                seed,
                ..ExperimentConfig::default()
            };
            cfg.validate().map_err(usage)?;
            let table = run_experiment(&cfg).map_err(domain)?;
            write_results(&table, &out).map_err(domain)?;
            eprintln!("{} episodes, max half-width {}", table.episodes, table.max_half_width());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = match &f {
                Failure::Usage(m) | Failure::Domain(m) => m,
            };
            eprintln!("error: {msg}");
            ExitCode::from(f.code())
        }
    }
}
