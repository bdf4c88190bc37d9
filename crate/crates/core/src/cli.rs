//! Command-line surface: instance generation, solving, policy simulation,
//! the exact oracle, and cut-file plumbing.
//!
//! Exit codes: 0 success, 1 usage/IO/validation error, 2 infeasibility
//! (including missing cut coverage), 3 numerical failure, 4 size guard.

use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::bellman::StageError;
use crate::model::{self, RiskParams};
use crate::portfolio;
use crate::rddp::{self, OracleError, RddpConfig, RddpError};
use crate::sim;
use crate::value::CutSet;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_GUARD: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "rddp", about = "Risk-averse dual dynamic programming solver", version)]
pub struct Cli {
    /// Cap on worker threads (default: all cores).
    #[arg(long, global = true, env = "RDDP_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the bundled portfolio benchmark instance.
    GenPortfolio {
        #[arg(long, env = "RDDP_OUT")]
        out: PathBuf,
        /// Proportional fee applied to both buys and sells, every asset.
        #[arg(long, env = "RDDP_FEES", default_value_t = 0.004)]
        fees: f64,
        #[arg(long, env = "RDDP_HORIZON", default_value_t = 5)]
        horizon: usize,
        #[arg(long, env = "RDDP_LAMBDA", default_value_t = 0.0)]
        lambda: f64,
        #[arg(long, env = "RDDP_ALPHA", default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, env = "RDDP_GRID", default_value_t = 19)]
        grid: usize,
        #[arg(long, env = "RDDP_WEALTH", default_value_t = 1.0)]
        wealth: f64,
        /// Give the market noise its own quadrature dimension (atoms per
        /// state become 81) instead of collapsing it to its conditional mean.
        #[arg(long, env = "RDDP_MARKET_NOISE", default_value_t = false)]
        market_noise: bool,
    },
    /// Run the solver and write cut and bound-trace files.
    Solve {
        #[arg(long, env = "RDDP_MODEL")]
        model: PathBuf,
        #[arg(long, env = "RDDP_ITERS")]
        iters: usize,
        #[arg(long, env = "RDDP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "RDDP_OUT_CUTS")]
        out_cuts: PathBuf,
        #[arg(long, env = "RDDP_TRACE")]
        trace: PathBuf,
        /// Greedy trajectories sampled per iteration.
        #[arg(long, env = "RDDP_TRAJECTORIES", default_value_t = 1)]
        trajectories: usize,
    },
    /// Evaluate the greedy policy of a cut file by Monte Carlo rollout.
    Simulate {
        #[arg(long, env = "RDDP_MODEL")]
        model: PathBuf,
        #[arg(long, env = "RDDP_CUTS")]
        cuts: PathBuf,
        #[arg(long, env = "RDDP_RUNS", default_value_t = 3000)]
        runs: usize,
        #[arg(long, env = "RDDP_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, env = "RDDP_REPORT")]
        report: PathBuf,
    },
    /// Print the exact value by scenario-tree enumeration (small instances).
    Oracle {
        #[arg(long, env = "RDDP_MODEL")]
        model: PathBuf,
    },
    /// Validate a cut file against a model and rewrite it in canonical form.
    ExportCuts {
        #[arg(long, env = "RDDP_MODEL")]
        model: PathBuf,
        #[arg(long, env = "RDDP_CUTS")]
        cuts: PathBuf,
        #[arg(long, env = "RDDP_OUT")]
        out: PathBuf,
    },
}

fn load_model_file(path: &PathBuf) -> Result<crate::model::MdpModel, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let model = model::load_model(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(format!("{} invalid:\n  {}", path.display(), violations.join("\n  ")));
    }
    Ok(model)
}

fn load_cuts_file(path: &PathBuf, model: &crate::model::MdpModel) -> Result<CutSet, String> {
    let file = fs::File::open(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    CutSet::from_csv(file, model.horizon, model.num_d(), model.n)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn stage_exit(err: &StageError) -> i32 {
    match err {
        StageError::Infeasible { .. } | StageError::MissingCuts { .. } => EXIT_INFEASIBLE,
        StageError::Unbounded { .. } | StageError::Numerical { .. } => EXIT_NUMERICAL,
    }
}

pub fn run(cli: Cli) -> i32 {
    if let Some(threads) = cli.threads {
        // Ignore the error when a pool already exists (tests reuse the process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_ERROR
        }
    }
}

fn dispatch(command: Command) -> Result<i32, String> {
    match command {
        Command::GenPortfolio { out, fees, horizon, lambda, alpha, grid, wealth, market_noise } => {
            let mut params = portfolio::default_params();
            params.independent_market_noise = market_noise;
            params.delta_plus = vec![fees; 3];
            params.delta_minus = vec![fees; 3];
            params.horizon = horizon;
            params.grid_size = grid;
            params.initial_wealth = wealth;
            params.wealth_cap = 10.0 * wealth;
            params.risk = RiskParams { lambda, alpha };
            let model = portfolio::build_instance(&params).map_err(|e| e.to_string())?;
            fs::write(&out, model::save_model(&model))
                .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            let sidecar = out.with_extension("params.json");
            let params_json = serde_json::to_string_pretty(&params).expect("params serialize");
            fs::write(&sidecar, params_json)
                .map_err(|e| format!("cannot write {}: {e}", sidecar.display()))?;
            println!(
                "wrote {} (|D|={}, |Omega_d|={}, n={}, m={}, T={}, lambda={}, alpha={})",
                out.display(),
                model.num_d(),
                model.states[0].outcomes.len(),
                model.n,
                model.m,
                model.horizon,
                lambda,
                alpha,
            );
            Ok(EXIT_OK)
        }
        Command::Solve { model, iters, seed, out_cuts, trace, trajectories } => {
            let instance = load_model_file(&model)?;
            let mut config = RddpConfig::new(iters, seed);
            config.trajectories_per_iteration = trajectories;
            let result = match rddp::run(&instance, &config) {
                Ok(r) => r,
                Err(err @ RddpError::Stage { .. }) => {
                    eprintln!("error: {err}");
                    let RddpError::Stage { source, .. } = err else { unreachable!() };
                    return Ok(stage_exit(&source));
                }
                Err(e) => return Err(e.to_string()),
            };
            let mut cut_bytes = Vec::new();
            result.cuts.to_csv(&mut cut_bytes).map_err(|e| e.to_string())?;
            fs::write(&out_cuts, cut_bytes)
                .map_err(|e| format!("cannot write {}: {e}", out_cuts.display()))?;
            let mut trace_text = String::from("iteration,lb\n");
            for (i, lb) in result.lb_trace.iter().enumerate() {
                trace_text.push_str(&format!("{},{:.17e}\n", i + 1, lb));
            }
            fs::write(&trace, trace_text)
                .map_err(|e| format!("cannot write {}: {e}", trace.display()))?;
            println!(
                "solved in {} iterations, {:.1} ms: lb = {:.9}, {} cuts",
                result.iterations_run,
                result.wall_time.as_secs_f64() * 1e3,
                result.lb_trace.last().copied().unwrap_or(f64::NEG_INFINITY),
                result.cuts.total_cuts(),
            );
            Ok(EXIT_OK)
        }
        Command::Simulate { model, cuts, runs, seed, report } => {
            let instance = load_model_file(&model)?;
            let cut_set = load_cuts_file(&cuts, &instance)?;
            let mut uncovered = Vec::new();
            for t in 1..=instance.horizon {
                for d in 0..instance.num_d() {
                    if cut_set.is_empty_at(t, d) {
                        uncovered.push(format!("(t={t}, d={d})"));
                    }
                }
            }
            if !uncovered.is_empty() {
                eprintln!("error: cut file does not cover {}", uncovered.join(", "));
                return Ok(EXIT_INFEASIBLE);
            }
            match sim::simulate(&instance, &cut_set, runs, seed) {
                Ok(r) => {
                    let json = serde_json::to_string_pretty(&r).expect("report serialize");
                    fs::write(&report, json)
                        .map_err(|e| format!("cannot write {}: {e}", report.display()))?;
                    println!(
                        "{} runs: mean cost {:.9}, sd {:.9}, 2-se band [{:.9}, {:.9}]",
                        r.runs, r.mean_return, r.std_return, r.ci2sd.0, r.ci2sd.1
                    );
                    Ok(EXIT_OK)
                }
                Err(err @ sim::SimError::Run { .. }) => {
                    eprintln!("error: {err}");
                    let sim::SimError::Run { source, .. } = err else { unreachable!() };
                    Ok(stage_exit(&source))
                }
                Err(e) => Err(e.to_string()),
            }
        }
        Command::Oracle { model } => {
            let instance = load_model_file(&model)?;
            match rddp::exact_oracle(&instance) {
                Ok(v) => {
                    println!("exact value: {v:.12}");
                    Ok(EXIT_OK)
                }
                Err(e @ (OracleError::TreeTooLarge { .. } | OracleError::ActionTooLarge { .. })) => {
                    eprintln!("error: {e}");
                    Ok(EXIT_GUARD)
                }
                Err(e @ OracleError::LpFailed(_)) => {
                    eprintln!("error: {e}");
                    Ok(EXIT_NUMERICAL)
                }
            }
        }
        Command::ExportCuts { model, cuts, out } => {
            let instance = load_model_file(&model)?;
            let cut_set = load_cuts_file(&cuts, &instance)?;
            let mut bytes = Vec::new();
            cut_set.to_csv(&mut bytes).map_err(|e| e.to_string())?;
            fs::write(&out, bytes).map_err(|e| format!("cannot write {}: {e}", out.display()))?;
            println!("wrote {} ({} cuts)", out.display(), cut_set.total_cuts());
            Ok(EXIT_OK)
        }
    }
}
