//! The solver driver: iterated forward sampling and backward cut passes that
//! grow a guaranteed lower bound on the optimal value function, plus an exact
//! scenario-tree oracle for desk-scale verification.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::bellman::{self, StageError};
use crate::linalg::{axpy, matvec};
use crate::model::{MdpModel, StageConstraints};
use crate::value::{Cut, CutOrigin, CutSet};

/// Upper limit on scenario-tree size for the exact oracle.
pub const ORACLE_NODE_GUARD: usize = 100_000;
/// Upper limit on the action dimension for the exact oracle.
pub const ORACLE_ACTION_GUARD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCutMode {
    /// Seed every (t, d) with a constant cut derived from interval arithmetic
    /// over the cost data, the action boxes, and the instance's state box.
    IntervalBound,
    /// Seed every (t, d) with the given constant; the caller asserts it lower
    /// bounds every stage value function.
    Constant(f64),
}

#[derive(Debug, Clone)]
pub struct RddpConfig {
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub trajectories_per_iteration: usize,
    pub initial_cut_mode: InitialCutMode,
    /// Stop once the initial-state bound improves by less than
    /// `stall_tolerance` over `stall_window` iterations.
    pub stall_tolerance: f64,
    pub stall_window: usize,
}

impl RddpConfig {
    pub fn new(max_iterations: usize, rng_seed: u64) -> Self {
        RddpConfig {
            max_iterations,
            rng_seed,
            trajectories_per_iteration: 1,
            initial_cut_mode: InitialCutMode::IntervalBound,
            stall_tolerance: 0.0,
            stall_window: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RddpResult {
    pub cuts: CutSet,
    /// Lower bound at the initial state after each iteration; nondecreasing.
    pub lb_trace: Vec<f64>,
    pub iterations_run: usize,
    pub wall_time: Duration,
}

#[derive(Debug, Error)]
pub enum RddpError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("model invalid: {0:?}")]
    InvalidModel(Vec<String>),
    #[error("iteration {iteration}: {source}")]
    Stage {
        iteration: usize,
        #[source]
        source: StageError,
    },
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("scenario tree has {nodes} nodes, above the guard of {guard}")]
    TreeTooLarge { nodes: usize, guard: usize },
    #[error("action dimension {m} above the oracle guard of {guard}")]
    ActionTooLarge { m: usize, guard: usize },
    #[error("deterministic-equivalent LP failed: {0}")]
    LpFailed(String),
}

/// Componentwise minimum of `w'v` over the box `[lo, hi]`.
fn box_min(w: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    w.iter()
        .zip(lo.iter().zip(hi))
        .map(|(&c, (&l, &h))| (c * l).min(c * h))
        .sum()
}

/// A lower bound on any single-stage cost, from interval arithmetic over the
/// cost vectors, the per-state action boxes, and the instance's state box.
pub fn stage_cost_lower_bound(model: &MdpModel) -> f64 {
    let mut bound = f64::INFINITY;
    for state in &model.states {
        let c = &state.constraints;
        for o in &state.outcomes {
            // cost = (c_a + Ta' c_n)'a + (c_x + Tx' c_n)'x + c_n'U
            let mut a_coef = crate::linalg::matvec_t(&o.t_a, &model.cost.c_n);
            axpy(1.0, &model.cost.c_a, &mut a_coef);
            let mut x_coef = crate::linalg::matvec_t(&o.t_x, &model.cost.c_n);
            axpy(1.0, &model.cost.c_x, &mut x_coef);
            let constant: f64 = model.cost.c_n.iter().zip(&o.u).map(|(a, b)| a * b).sum();
            let v = box_min(&a_coef, &c.lower, &c.upper)
                + box_min(&x_coef, &model.x_box.lo, &model.x_box.hi)
                + constant;
            bound = bound.min(v);
        }
    }
    bound
}

/// Seeds every (t, d) with one constant cut so that the stage LPs are
/// bounded from iteration one.
pub fn seed_cuts(model: &MdpModel, mode: InitialCutMode) -> CutSet {
    let mut cuts = CutSet::new(model.horizon, model.num_d(), model.n);
    let per_stage = match mode {
        InitialCutMode::IntervalBound => stage_cost_lower_bound(model),
        InitialCutMode::Constant(_) => 0.0,
    };
    for t in 1..=model.horizon {
        let q_c = match mode {
            InitialCutMode::IntervalBound => per_stage * (model.horizon - t + 1) as f64,
            InitialCutMode::Constant(v) => v,
        };
        for d in 0..model.num_d() {
            cuts.add_cut(
                t,
                d,
                Cut {
                    q_x: vec![0.0; model.n],
                    q_c,
                    origin: CutOrigin::seed(t, d, model.n),
                },
            )
            .expect("seed cut dimensions are correct by construction");
        }
    }
    cuts
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

fn advance(model: &MdpModel, d: usize, w: usize, x: &[f64], a: &[f64]) -> (usize, Vec<f64>) {
    let o = &model.states[d].outcomes[w];
    let mut next = matvec(&o.t_x, x);
    let ta_a = matvec(&o.t_a, a);
    axpy(1.0, &ta_a, &mut next);
    axpy(1.0, &o.u, &mut next);
    (o.next_d, next)
}

/// The greedy action with respect to the cut-approximated continuation.
pub fn greedy_policy_action(
    model: &MdpModel,
    cuts: &CutSet,
    t: usize,
    d: usize,
    x: &[f64],
) -> Result<Vec<f64>, StageError> {
    Ok(bellman::solve_stage(model, t, d, x, cuts)?.action)
}

/// Runs the iterative lower-bounding scheme: sample a trajectory with the
/// greedy policy, then walk the horizon backwards adding one cut per
/// (stage, discrete state, trajectory) from the stage-LP duals, and re-solve
/// at the initial state to update the bound.
pub fn run(model: &MdpModel, config: &RddpConfig) -> Result<RddpResult, RddpError> {
    if config.max_iterations < 1 {
        return Err(RddpError::Config("max_iterations must be at least 1".into()));
    }
    if config.trajectories_per_iteration < 1 {
        return Err(RddpError::Config("trajectories_per_iteration must be at least 1".into()));
    }
    if config.stall_window < 1 {
        return Err(RddpError::Config("stall_window must be at least 1".into()));
    }
    let violations = model.validate();
    if !violations.is_empty() {
        return Err(RddpError::InvalidModel(violations));
    }

    let start = Instant::now();
    let mut cuts = seed_cuts(model, config.initial_cut_mode);
    let mut lb_trace = Vec::new();
    let mut iterations_run = 0;
    let horizon = model.horizon;

    for iteration in 1..=config.max_iterations {
        iterations_run = iteration;
        let stage_err = |source: StageError| RddpError::Stage { iteration, source };

        // Forward pass: sample states along greedy trajectories.
        let mut sampled: Vec<Vec<Vec<f64>>> = Vec::new(); // [traj][t-1] -> x_t
        for traj in 0..config.trajectories_per_iteration {
            let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
            rng.set_stream(((iteration as u64) << 32) | traj as u64);
            let mut d = model.initial.d;
            let mut x = model.initial.x.clone();
            let mut xs = Vec::with_capacity(horizon);
            for t in 0..=horizon {
                let stage = bellman::solve_stage(model, t, d, &x, &cuts).map_err(stage_err)?;
                if t == horizon {
                    break;
                }
                let w = sample_outcome(model, d, &mut rng);
                let (nd, nx) = advance(model, d, w, &x, &stage.action);
                d = nd;
                x = nx;
                xs.push(x.clone());
            }
            sampled.push(xs);
        }

        // Backward pass: one cut per (t, d', trajectory), all d' covered.
        for t in (1..=horizon).rev() {
            for xs in &sampled {
                let x_t = &xs[t - 1];
                let new_cuts: Vec<Result<Cut, StageError>> = (0..model.num_d())
                    .into_par_iter()
                    .map(|d_prime| {
                        let stage = bellman::solve_stage(model, t, d_prime, x_t, &cuts)?;
                        Ok(bellman::extract_cut(model, t, d_prime, x_t, &stage, &cuts, iteration))
                    })
                    .collect();
                for (d_prime, cut) in new_cuts.into_iter().enumerate() {
                    let cut = cut.map_err(stage_err)?;
                    cuts.add_cut(t, d_prime, cut)
                        .expect("generated cut dimensions match the model");
                }
            }
        }

        // Update the lower bound at the initial state.
        let root = bellman::solve_stage(model, 0, model.initial.d, &model.initial.x, &cuts)
            .map_err(stage_err)?;
        lb_trace.push(root.value);

        if lb_trace.len() > config.stall_window {
            let prev = lb_trace[lb_trace.len() - 1 - config.stall_window];
            if lb_trace[lb_trace.len() - 1] - prev < config.stall_tolerance {
                break;
            }
        }
    }

    Ok(RddpResult {
        cuts,
        lb_trace,
        iterations_run,
        wall_time: start.elapsed(),
    })
}

fn count_tree_nodes(model: &MdpModel, t: usize, d: usize, guard: usize) -> usize {
    if t > model.horizon {
        return 1;
    }
    let mut total = 1;
    for o in &model.states[d].outcomes {
        total += count_tree_nodes(model, t + 1, o.next_d, guard);
        if total > guard {
            return total;
        }
    }
    total
}

/// Exact optimal value at the initial state, by solving the nested risk
/// recursion as one deterministic-equivalent LP over the full scenario tree.
pub fn exact_oracle(model: &MdpModel) -> Result<f64, OracleError> {
    exact_oracle_at(model, 0, model.initial.d, &model.initial.x)
}

/// Exact optimal stage value at an arbitrary (t, d, x); test support for cut
/// validity checks.
pub fn exact_oracle_at(model: &MdpModel, t: usize, d: usize, x: &[f64]) -> Result<f64, OracleError> {
    if model.m > ORACLE_ACTION_GUARD {
        return Err(OracleError::ActionTooLarge { m: model.m, guard: ORACLE_ACTION_GUARD });
    }
    let nodes = count_tree_nodes(model, t, d, ORACLE_NODE_GUARD);
    if nodes > ORACLE_NODE_GUARD {
        return Err(OracleError::TreeTooLarge { nodes, guard: ORACLE_NODE_GUARD });
    }
    let mut builder = TreeLpBuilder::new(model);
    let root_x = builder.fixed_state(x);
    let root_value = builder.node(t, d, root_x);
    builder.objective[root_value] = 1.0;
    let problem = builder.finish();
    let sol = crate::lp::solve(&problem);
    if sol.status != crate::lp::LpStatus::Optimal {
        return Err(OracleError::LpFailed(format!("{:?}", sol.status)));
    }
    Ok(sol.objective)
}

/// Assembles the deterministic equivalent: per-node actions, state vectors
/// linked by the transition equalities, and the risk mapping written as its
/// minimization LP at every node. Monotonicity of the nested mapping lets a
/// single joint minimization reproduce the recursion.
struct TreeLpBuilder<'a> {
    model: &'a MdpModel,
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    eq_rows: Vec<Vec<(usize, f64)>>,
    eq_rhs: Vec<f64>,
    ge_rows: Vec<Vec<(usize, f64)>>,
    ge_rhs: Vec<f64>,
}

impl<'a> TreeLpBuilder<'a> {
    fn new(model: &'a MdpModel) -> Self {
        TreeLpBuilder {
            model,
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            ge_rows: Vec::new(),
            ge_rhs: Vec::new(),
        }
    }

    fn var(&mut self, lo: f64, hi: f64) -> usize {
        self.objective.push(0.0);
        self.lower.push(lo);
        self.upper.push(hi);
        self.objective.len() - 1
    }

    fn vars(&mut self, count: usize, lo: f64, hi: f64) -> Vec<usize> {
        (0..count).map(|_| self.var(lo, hi)).collect()
    }

    fn fixed_state(&mut self, x: &[f64]) -> Vec<usize> {
        x.iter().map(|&v| self.var(v, v)).collect()
    }

    /// Emits the subtree rooted at (t, d) with state variables `x_vars`;
    /// returns the variable carrying the node's value. Past the horizon the
    /// value is identically zero.
    fn node(&mut self, t: usize, d: usize, x_vars: Vec<usize>) -> usize {
        let model = self.model;
        if t > model.horizon {
            return self.var(0.0, 0.0);
        }
        let state = &model.states[d];
        let constraints: &StageConstraints = &state.constraints;
        let m = model.m;
        let n = model.n;
        let lambda = model.risk.lambda;
        let alpha = model.risk.alpha;
        let robust = alpha == 0.0;
        let num_outcomes = state.outcomes.len();

        let a_vars: Vec<usize> = (0..m).map(|i| self.var(constraints.lower[i], constraints.upper[i])).collect();
        let z_vars = self.vars(num_outcomes, f64::NEG_INFINITY, f64::INFINITY);
        let value_var = self.var(f64::NEG_INFINITY, f64::INFINITY);

        // Admissibility: A a + X x {=,>=} b.
        for row in 0..constraints.num_rows() {
            let mut coeffs: Vec<(usize, f64)> = Vec::new();
            for i in 0..m {
                coeffs.push((a_vars[i], constraints.a_mat[row][i]));
            }
            for i in 0..n {
                coeffs.push((x_vars[i], constraints.x_mat[row][i]));
            }
            match constraints.sense(row) {
                crate::model::RowSense::Eq => {
                    self.eq_rows.push(coeffs);
                    self.eq_rhs.push(constraints.b_vec[row]);
                }
                crate::model::RowSense::Ge => {
                    self.ge_rows.push(coeffs);
                    self.ge_rhs.push(constraints.b_vec[row]);
                }
            }
        }

        // Children and per-outcome cost definitions.
        for (w, o) in state.outcomes.iter().enumerate() {
            let child_x = self.vars(n, f64::NEG_INFINITY, f64::INFINITY);
            // x' - Tx x - Ta a = U
            for i in 0..n {
                let mut coeffs = vec![(child_x[i], 1.0)];
                for j in 0..n {
                    coeffs.push((x_vars[j], -o.t_x[i][j]));
                }
                for j in 0..m {
                    coeffs.push((a_vars[j], -o.t_a[i][j]));
                }
                self.eq_rows.push(coeffs);
                self.eq_rhs.push(o.u[i]);
            }
            let child_value = self.node(t + 1, o.next_d, child_x.clone());
            // z(w) - c_a'a - c_x'x - c_n'x' - child_value = 0
            let mut coeffs = vec![(z_vars[w], 1.0), (child_value, -1.0)];
            for j in 0..m {
                coeffs.push((a_vars[j], -model.cost.c_a[j]));
            }
            for j in 0..n {
                coeffs.push((x_vars[j], -model.cost.c_x[j]));
                coeffs.push((child_x[j], -model.cost.c_n[j]));
            }
            self.eq_rows.push(coeffs);
            self.eq_rhs.push(0.0);
        }

        // Risk mapping: value = (1-lambda) E[z] + lambda tail(z).
        let mut value_row = vec![(value_var, 1.0)];
        for (w, o) in state.outcomes.iter().enumerate() {
            value_row.push((z_vars[w], -o.prob * (1.0 - lambda)));
        }
        if lambda > 0.0 {
            if robust {
                let worst = self.var(f64::NEG_INFINITY, f64::INFINITY);
                value_row.push((worst, -lambda));
                for w in 0..num_outcomes {
                    self.ge_rows.push(vec![(worst, 1.0), (z_vars[w], -1.0)]);
                    self.ge_rhs.push(0.0);
                }
            } else {
                let mu = self.var(f64::NEG_INFINITY, f64::INFINITY);
                let xi_vars = self.vars(num_outcomes, 0.0, f64::INFINITY);
                value_row.push((mu, -lambda));
                for (w, o) in state.outcomes.iter().enumerate() {
                    value_row.push((xi_vars[w], -o.prob * lambda / alpha));
                    self.ge_rows.push(vec![(xi_vars[w], 1.0), (mu, 1.0), (z_vars[w], -1.0)]);
                    self.ge_rhs.push(0.0);
                }
            }
        }
        self.eq_rows.push(value_row);
        self.eq_rhs.push(0.0);

        value_var
    }

    fn finish(self) -> crate::lp::LpProblem {
        let ncols = self.objective.len();
        let densify = |rows: Vec<Vec<(usize, f64)>>| -> Vec<Vec<f64>> {
            rows.into_iter()
                .map(|sparse| {
                    let mut row = vec![0.0; ncols];
                    for (j, v) in sparse {
                        row[j] += v;
                    }
                    row
                })
                .collect()
        };
        crate::lp::LpProblem {
            objective: self.objective,
            eq_rows: densify(self.eq_rows),
            eq_rhs: self.eq_rhs,
            ge_rows: densify(self.ge_rows),
            ge_rhs: self.ge_rhs,
            lower: self.lower,
            upper: self.upper,
        }
    }
}
