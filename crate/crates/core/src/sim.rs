//! Monte Carlo evaluation of the greedy policy induced by a cut set: roll
//! trajectories under the model's discretized dynamics and aggregate total
//! costs.

use std::collections::HashMap;
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bellman::{self, StageError};
use crate::linalg::{axpy, dot, matvec};
use crate::model::MdpModel;
use crate::risk::{self, FiniteDistribution};
use crate::value::CutSet;

/// Quantile levels at which the empirical tail risk of total cost is
/// reported; includes 1.0 so the mean appears in the same table.
pub const REPORT_ALPHAS: [f64; 5] = [1.0, 0.7, 0.5, 0.1, 0.05];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: usize,
    /// Mean total cost across runs (negative = wealth gain for the
    /// portfolio cost convention).
    pub mean_return: f64,
    /// Sample standard deviation of the total cost.
    pub std_return: f64,
    /// (alpha, empirical tail average) pairs over the run totals.
    pub empirical_avar: Vec<(f64, f64)>,
    /// Per-run total cost, in run order.
    pub trajectories: Option<Vec<f64>>,
    /// Two-standard-error band around the mean.
    pub ci2sd: (f64, f64),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("run {run}, stage {t}: {source}")]
    Run {
        run: usize,
        t: usize,
        #[source]
        source: StageError,
    },
    #[error("runs must be positive")]
    NoRuns,
}

fn sample_outcome(model: &MdpModel, d: usize, rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let outcomes = &model.states[d].outcomes;
    for (w, o) in outcomes.iter().enumerate() {
        acc += o.prob;
        if u < acc {
            return w;
        }
    }
    outcomes.len() - 1
}

/// Greedy actions memoized on the exact state bits. Trajectories share long
/// state prefixes (the initial state is common to every run, and cash-heavy
/// policies revisit identical states), and the greedy action depends only on
/// (t, d, x), so caching is a pure speedup that cannot change results.
type ActionCache = Mutex<HashMap<(usize, usize, Vec<u64>), Vec<f64>>>;

fn greedy_action_cached(
    model: &MdpModel,
    cuts: &CutSet,
    cache: &ActionCache,
    t: usize,
    d: usize,
    x: &[f64],
) -> Result<Vec<f64>, StageError> {
    let key = (t, d, x.iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
    if let Some(action) = cache.lock().unwrap().get(&key) {
        return Ok(action.clone());
    }
    let action = bellman::solve_stage(model, t, d, x, cuts)?.action;
    cache.lock().unwrap().insert(key, action.clone());
    Ok(action)
}

fn rollout(
    model: &MdpModel,
    cuts: &CutSet,
    cache: &ActionCache,
    seed: u64,
    run: usize,
) -> Result<f64, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    let mut d = model.initial.d;
    let mut x = model.initial.x.clone();
    let mut total = 0.0;
    // Stage costs accrue at every decision epoch t = 0..=T, including the
    // terminal stage whose LP carries a cost but no continuation.
    for t in 0..=model.horizon {
        let a = greedy_action_cached(model, cuts, cache, t, d, &x)
            .map_err(|source| SimError::Run { run, t, source })?;
        let w = sample_outcome(model, d, &mut rng);
        let o = &model.states[d].outcomes[w];
        let mut x_next = matvec(&o.t_x, &x);
        let ta = matvec(&o.t_a, &a);
        axpy(1.0, &ta, &mut x_next);
        axpy(1.0, &o.u, &mut x_next);
        total += dot(&model.cost.c_a, &a) + dot(&model.cost.c_x, &x) + dot(&model.cost.c_n, &x_next);
        d = o.next_d;
        x = x_next;
    }
    Ok(total)
}

fn aggregate(totals: Vec<f64>) -> SimReport {
    let runs = totals.len();
    let mean = totals.iter().sum::<f64>() / runs as f64;
    let var = if runs > 1 {
        totals.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / (runs - 1) as f64
    } else {
        0.0
    };
    let std = var.sqrt();
    let se2 = 2.0 * std / (runs as f64).sqrt();
    let dist = FiniteDistribution::new(vec![1.0 / runs as f64; runs], totals.clone())
        .expect("uniform empirical distribution is well-formed");
    let empirical_avar = REPORT_ALPHAS
        .iter()
        .map(|&alpha| {
            (
                alpha,
                risk::avar_primal(&dist, alpha).expect("alpha levels are in (0, 1]"),
            )
        })
        .collect();
    SimReport {
        runs,
        mean_return: mean,
        std_return: std,
        empirical_avar,
        trajectories: Some(totals),
        ci2sd: (mean - se2, mean + se2),
    }
}

/// Rolls `runs` independent greedy-policy trajectories from the initial
/// state and reports total-cost statistics. Per-run sampling streams make
/// the report independent of execution order and bit-reproducible.
pub fn simulate(
    model: &MdpModel,
    cuts: &CutSet,
    runs: usize,
    seed: u64,
) -> Result<SimReport, SimError> {
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    let cache: ActionCache = Mutex::new(HashMap::new());
    let totals: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|run| rollout(model, cuts, &cache, seed, run))
        .collect::<Result<_, _>>()?;
    Ok(aggregate(totals))
}

/// Mean wealth gain of the greedy policy: the negated mean total cost.
pub fn risk_neutral_return(
    model: &MdpModel,
    cuts: &CutSet,
    runs: usize,
    seed: u64,
) -> Result<f64, SimError> {
    Ok(-simulate(model, cuts, runs, seed)?.mean_return)
}

/// Exploratory variant for the portfolio benchmark: samples the underlying
/// continuous return/market dynamics instead of the discretized atoms, with
/// nearest-grid lookup for the policy's discrete state. Not comparable to
/// the solver bound and excluded from the verification suites.
pub fn simulate_portfolio_continuous(
    params: &crate::portfolio::PortfolioParams,
    cuts: &CutSet,
    runs: usize,
    seed: u64,
) -> Result<SimReport, SimError> {
    let model = crate::portfolio::build_instance(params)
        .expect("params validated by the caller");
    let grid = crate::portfolio::market_grid(params).expect("params validated by the caller");
    // Conditional regression of the market noise on the return noise.
    let block: Vec<Vec<f64>> = (0..3).map(|i| params.sigma[i][..3].to_vec()).collect();
    let chol = crate::linalg::cholesky(&block, 1e-14).expect("return block positive definite");
    let sigma_ev = [params.sigma[0][3], params.sigma[1][3], params.sigma[2][3]];
    let beta = crate::linalg::solve_dense(&block, &sigma_ev, 1e-14)
        .expect("return block positive definite");
    let resid_sd = (params.sigma[3][3] - dot(&beta, &sigma_ev)).max(0.0).sqrt();

    let totals: Vec<f64> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let normal = |rng: &mut ChaCha8Rng| {
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen();
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let mut z = grid[model.initial.d];
            let mut x = model.initial.x.clone();
            let mut total = 0.0;
            for t in 0..=model.horizon {
                let d = nearest(&grid, z);
                let a = bellman::solve_stage(&model, t, d, &x, cuts)
                    .map_err(|source| SimError::Run { run, t, source })?
                    .action;
                let g: Vec<f64> = (0..4).map(|_| normal(&mut rng)).collect();
                let e: Vec<f64> = (0..3)
                    .map(|row| (0..=row).map(|c| chol[row][c] * g[c]).sum())
                    .collect();
                let v = dot(&beta, &e) + resid_sd * g[3];
                let returns: Vec<f64> = (0..3)
                    .map(|i| (params.a_r[i] + params.b_r[i] * z + e[i]).exp())
                    .collect();
                let mut x_next = vec![0.0; 4];
                let mut spent = 0.0;
                for i in 0..3 {
                    x_next[i] = returns[i] * (x[i] + a[i] - a[i + 3]);
                    spent += (1.0 + params.delta_plus[i]) * a[i]
                        - (1.0 - params.delta_minus[i]) * a[i + 3];
                }
                x_next[3] = params.r_f * (x[3] - spent);
                total += x.iter().sum::<f64>() - x_next.iter().sum::<f64>();
                z = params.a_z + params.b_z * z + v;
                x = x_next;
            }
            Ok(total)
        })
        .collect::<Result<_, _>>()?;
    Ok(aggregate(totals))
}

fn nearest(grid: &[f64], z: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        if (z - g).abs() < best_dist {
            best = i;
            best_dist = (z - g).abs();
        }
    }
    best
}
