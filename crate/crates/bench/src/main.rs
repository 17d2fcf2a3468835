use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spbfgs::problems::{by_name, BUILTIN_NAMES};
use spbfgs::Budget;
use spbfgs_bench::config::load_config;
use spbfgs_bench::{checks, run_experiment, write_outputs};

#[derive(Parser)]
#[command(name = "spbfgs-bench", version, about = "Noisy quasi-Newton benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a config file.
    Run {
        config: PathBuf,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides SPBFGS_OUT_DIR and the config).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Budget in noisy function evaluations.
        #[arg(long, conflicts_with = "budget_iters")]
        budget_evals: Option<usize>,
        /// Budget in iterations.
        #[arg(long)]
        budget_iters: Option<usize>,
        /// Also write per-iteration traces.
        #[arg(long)]
        trace: bool,
    },
    /// Run the oracle and invariant suites.
    Verify {
        #[arg(long, default_value_t = 20_220_101)]
        seed: u64,
    },
    /// Print the built-in problems.
    ListProblems,
}

fn run(
    config: PathBuf,
    seed: Option<u64>,
    out_dir: Option<PathBuf>,
    replicates: Option<usize>,
    budget_evals: Option<usize>,
    budget_iters: Option<usize>,
    trace: bool,
) -> ExitCode {
    let mut spec = match load_config(&config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = seed {
        spec.master_seed = s;
    }
    if let Some(dir) = out_dir.or_else(|| std::env::var_os("SPBFGS_OUT_DIR").map(PathBuf::from)) {
        spec.out_dir = dir;
    }
    if let Ok(w) = std::env::var("SPBFGS_WORKERS") {
        match w.parse() {
            Ok(n) => spec.workers = n,
            Err(_) => {
                eprintln!("error: SPBFGS_WORKERS must be a non-negative integer, got {w:?}");
                return ExitCode::from(2);
            }
        }
    }
    if let Some(r) = replicates {
        spec.replicates = r;
    }
    if let Some(n) = budget_evals {
        spec.budget = Budget::FunctionEvals(n);
    }
    if let Some(n) = budget_iters {
        spec.budget = Budget::Iterations(n);
    }
    spec.write_traces |= trace;

    let out = match run_experiment(&spec) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match write_outputs(&spec, &out) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    for row in &out.rows {
        let mean = row.dopt.as_ref().map_or("-".into(), |s| format!("{:.2}", s.mean));
        println!(
            "{:<10} {:<12} eps_f={:<8e} eps_g={:<8e} runs={:<3} mean_dopt={mean}",
            row.problem, row.method, row.eps_f, row.eps_g, row.n_runs
        );
    }
    let failed = out.failed_runs();
    if failed > 0 {
        eprintln!("{failed} run(s) failed; see runs.csv");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, seed, out_dir, replicates, budget_evals, budget_iters, trace } => {
            run(config, seed, out_dir, replicates, budget_evals, budget_iters, trace)
        }
        Command::Verify { seed } => {
            let outcomes = checks::run_all(seed);
            for o in &outcomes {
                println!("[{}] {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            if outcomes.iter().all(|o| o.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::ListProblems => {
            for name in BUILTIN_NAMES {
                let p = by_name(name).expect("builtin");
                println!("{:<10} n={:<3} phi*={}", name, p.dim(), p.phi_star().unwrap_or(f64::NAN));
            }
            ExitCode::SUCCESS
        }
    }
}
