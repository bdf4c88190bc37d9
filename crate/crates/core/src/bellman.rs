//! Stage problem: builds and solves the one-step linear program for a given
//! (t, d, x) against the next-stage cut sets, and turns the optimal duals
//! into a new value-function cut.
//!
//! Variable order (relied on by the tests): actions `a` (m entries), then the
//! risk block, then per-outcome cost variables `z`, then per-outcome
//! continuation variables `y` (interior stages only). The risk block is
//! `mu, xi(omega)` for alpha > 0 and a single worst-case epigraph scalar `w`
//! for alpha = 0. Row order: constraint equalities, `z` definitions, then on
//! the >= side constraint inequalities, cut rows per (omega, cut), risk rows.

use thiserror::Error;

use crate::linalg::{dot, matvec, matvec_t};
use crate::lp::{self, LpProblem, LpStatus};
use crate::model::{MdpModel, RowSense};
use crate::value::{Cut, CutOrigin, CutSet};

#[derive(Debug, Error)]
pub enum StageError {
    #[error("no cuts available for stage {t}, discrete state {d}")]
    MissingCuts { t: usize, d: usize },
    #[error("stage LP infeasible at t={t}, d={d}, x={x:?}: the model violates complete recourse there")]
    Infeasible { t: usize, d: usize, x: Vec<f64> },
    #[error("stage LP unbounded at t={t}, d={d}: impossible under finite action boxes")]
    Unbounded { t: usize, d: usize },
    #[error("stage LP numerical failure at t={t}, d={d}")]
    Numerical { t: usize, d: usize },
}

/// Duals of the stage LP, grouped by constraint family. `d1` is indexed by
/// the model's constraint rows (equalities and inequalities alike), `d2` per
/// outcome, `d5` per (outcome, cut index). Bound duals are the reduced costs
/// of the action variables.
#[derive(Debug, Clone)]
pub struct StageDuals {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d5: Vec<(usize, usize, f64)>,
    pub action_reduced_costs: Vec<f64>,
    pub risk_rows: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct StageSolution {
    pub action: Vec<f64>,
    pub value: f64,
    pub duals: StageDuals,
}

/// Row/column bookkeeping for unpacking an `LpSolution`.
#[derive(Debug, Clone)]
pub struct StageLayout {
    /// model constraint row index per leading equality row
    pub eq_d1: Vec<usize>,
    /// model constraint row index per leading >= row
    pub ge_d1: Vec<usize>,
    /// (omega, cut index) per cut row, in emission order
    pub d5: Vec<(usize, usize)>,
    pub num_outcomes: usize,
    pub has_continuation: bool,
}

#[derive(Debug)]
pub struct StageLp {
    pub problem: LpProblem,
    pub layout: StageLayout,
}

/// Assembles the stage LP. For `t = horizon` the continuation variables and
/// cut rows are omitted. For `alpha = 0` the AV@R block is replaced by the
/// worst-case epigraph `w >= z(omega)` with objective term `lambda * w`.
pub fn build_stage_lp(
    model: &MdpModel,
    t: usize,
    d: usize,
    x: &[f64],
    next_cuts: &CutSet,
) -> Result<StageLp, StageError> {
    build_stage_lp_selected(model, t, d, x, next_cuts, None)
}

/// As `build_stage_lp`, but emitting cut rows only for the given per-outcome
/// cut indices (None = all). Used by the lazy row generation in
/// `solve_stage`: rows omitted at an optimum that violates none of them have
/// dual value zero, so the restricted duals are optimal for the full LP.
fn build_stage_lp_selected(
    model: &MdpModel,
    t: usize,
    d: usize,
    x: &[f64],
    next_cuts: &CutSet,
    selection: Option<&[Vec<usize>]>,
) -> Result<StageLp, StageError> {
    let terminal = t == model.horizon;
    let state = &model.states[d];
    let outcomes = &state.outcomes;
    let num_outcomes = outcomes.len();
    let m = model.m;
    let robust = model.risk.alpha == 0.0;
    let lambda = model.risk.lambda;

    if !terminal {
        for o in outcomes {
            if next_cuts.is_empty_at(t + 1, o.next_d) {
                return Err(StageError::MissingCuts { t: t + 1, d: o.next_d });
            }
        }
    }

    // Column layout.
    let risk_block = if robust { 1 } else { 1 + num_outcomes }; // w | mu, xi
    let z0 = m + risk_block;
    let y0 = z0 + num_outcomes;
    let ncols = if terminal { y0 } else { y0 + num_outcomes };

    let mut objective = vec![0.0; ncols];
    let mut lower = vec![f64::NEG_INFINITY; ncols];
    let mut upper = vec![f64::INFINITY; ncols];
    for i in 0..m {
        lower[i] = state.constraints.lower[i];
        upper[i] = state.constraints.upper[i];
    }
    if robust {
        objective[m] = lambda; // w
    } else {
        objective[m] = lambda; // mu
        for (w, o) in outcomes.iter().enumerate() {
            objective[m + 1 + w] = o.prob * lambda / model.risk.alpha;
            lower[m + 1 + w] = 0.0;
        }
    }
    for (w, o) in outcomes.iter().enumerate() {
        objective[z0 + w] = o.prob * (1.0 - lambda);
    }

    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut ge_rows = Vec::new();
    let mut ge_rhs = Vec::new();
    let mut eq_d1 = Vec::new();
    let mut ge_d1 = Vec::new();

    // Constraint rows A a {=,>=} b - X x.
    for row in 0..state.constraints.num_rows() {
        let mut coeffs = vec![0.0; ncols];
        coeffs[..m].copy_from_slice(&state.constraints.a_mat[row]);
        let rhs = state.constraints.b_vec[row] - dot(&state.constraints.x_mat[row], x);
        match state.constraints.sense(row) {
            RowSense::Eq => {
                eq_rows.push(coeffs);
                eq_rhs.push(rhs);
                eq_d1.push(row);
            }
            RowSense::Ge => {
                ge_rows.push(coeffs);
                ge_rhs.push(rhs);
                ge_d1.push(row);
            }
        }
    }

    // z definitions: z(w) - (c_a + Ta' c_n)'a - y(w) = (c_x + Tx' c_n)'x + c_n'U.
    for (w, o) in outcomes.iter().enumerate() {
        let mut coeffs = vec![0.0; ncols];
        coeffs[z0 + w] = 1.0;
        let action_cost = {
            let mut v = matvec_t(&o.t_a, &model.cost.c_n);
            for (vi, ci) in v.iter_mut().zip(&model.cost.c_a) {
                *vi += ci;
            }
            v
        };
        for i in 0..m {
            coeffs[i] = -action_cost[i];
        }
        if !terminal {
            coeffs[y0 + w] = -1.0;
        }
        let state_cost = dot(&model.cost.c_x, x)
            + dot(&model.cost.c_n, &matvec(&o.t_x, x))
            + dot(&model.cost.c_n, &o.u);
        eq_rows.push(coeffs);
        eq_rhs.push(state_cost);
    }

    // Cut rows: y(w) - (Ta' q_x)'a >= q_x'(Tx x + U) + q_c.
    let mut d5 = Vec::new();
    if !terminal {
        for (w, o) in outcomes.iter().enumerate() {
            let tx_x_u = {
                let mut v = matvec(&o.t_x, x);
                for (vi, ui) in v.iter_mut().zip(&o.u) {
                    *vi += ui;
                }
                v
            };
            let all = next_cuts.cuts_at(t + 1, o.next_d);
            let indices: Vec<usize> = match selection {
                Some(sel) => sel[w].clone(),
                None => (0..all.len()).collect(),
            };
            for j in indices {
                let cut = &all[j];
                let mut coeffs = vec![0.0; ncols];
                coeffs[y0 + w] = 1.0;
                let slope_a = matvec_t(&o.t_a, &cut.q_x);
                for i in 0..m {
                    coeffs[i] = -slope_a[i];
                }
                ge_rows.push(coeffs);
                ge_rhs.push(dot(&cut.q_x, &tx_x_u) + cut.q_c);
                d5.push((w, j));
            }
        }
    }

    // Risk rows.
    for (w, _) in outcomes.iter().enumerate() {
        let mut coeffs = vec![0.0; ncols];
        if robust {
            coeffs[m] = 1.0; // w
            coeffs[z0 + w] = -1.0;
        } else {
            coeffs[m + 1 + w] = 1.0; // xi
            coeffs[m] = 1.0; // mu
            coeffs[z0 + w] = -1.0;
        }
        ge_rows.push(coeffs);
        ge_rhs.push(0.0);
    }

    Ok(StageLp {
        problem: LpProblem { objective, eq_rows, eq_rhs, ge_rows, ge_rhs, lower, upper },
        layout: StageLayout {
            eq_d1,
            ge_d1,
            d5,
            num_outcomes,
            has_continuation: !terminal,
        },
    })
}

/// Solves the stage LP and unpacks the greedy action, the stage value, and
/// the grouped duals.
pub fn solve_stage(
    model: &MdpModel,
    t: usize,
    d: usize,
    x: &[f64],
    next_cuts: &CutSet,
) -> Result<StageSolution, StageError> {
    let terminal = t == model.horizon;
    let state = &model.states[d];
    let num_outcomes = state.outcomes.len();

    // Lazy row generation over the cut rows: start from the strongest cut per
    // outcome at the zero-action next state, re-solve adding the most
    // violated cut per outcome until the optimum satisfies them all. The
    // omitted rows then hold with slack, so their duals are zero and the
    // restricted solution is optimal for the full stage LP.
    let mut selection: Vec<Vec<usize>> = vec![Vec::new(); num_outcomes];
    if !terminal {
        for (w, o) in state.outcomes.iter().enumerate() {
            if next_cuts.is_empty_at(t + 1, o.next_d) {
                return Err(StageError::MissingCuts { t: t + 1, d: o.next_d });
            }
            let mut anchor = matvec(&o.t_x, x);
            for (ai, &ui) in anchor.iter_mut().zip(&o.u) {
                *ai += ui;
            }
            let best = argmax_cut(next_cuts.cuts_at(t + 1, o.next_d), &anchor).0;
            selection[w].push(best);
        }
    }

    let mut rounds = 0;
    let (stage, sol) = loop {
        let stage = build_stage_lp_selected(model, t, d, x, next_cuts, Some(&selection))?;
        let sol = lp::solve(&stage.problem);
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                return Err(StageError::Infeasible { t, d, x: x.to_vec() });
            }
            LpStatus::Unbounded => return Err(StageError::Unbounded { t, d }),
            LpStatus::NumericalFailure => return Err(StageError::Numerical { t, d }),
        }
        if terminal {
            break (stage, sol);
        }
        let action = &sol.primal[..model.m];
        let robust = model.risk.alpha == 0.0;
        let risk_block = if robust { 1 } else { 1 + num_outcomes };
        let y0 = model.m + risk_block + num_outcomes;
        let mut grew = false;
        for (w, o) in state.outcomes.iter().enumerate() {
            let mut x_next = matvec(&o.t_x, x);
            let ta_a = matvec(&o.t_a, action);
            for i in 0..model.n {
                x_next[i] += ta_a[i] + o.u[i];
            }
            let cuts = next_cuts.cuts_at(t + 1, o.next_d);
            let (best, value) = argmax_cut(cuts, &x_next);
            let y_w = sol.primal[y0 + w];
            if value > y_w + 1e-9 * (1.0 + y_w.abs()) && !selection[w].contains(&best) {
                selection[w].push(best);
                grew = true;
            }
        }
        rounds += 1;
        if !grew || rounds > 200 {
            break (stage, sol);
        }
    };

    let layout = &stage.layout;
    let k = model.states[d].constraints.num_rows();
    let mut d1 = vec![0.0; k];
    for (pos, &row) in layout.eq_d1.iter().enumerate() {
        d1[row] = sol.duals_eq[pos];
    }
    for (pos, &row) in layout.ge_d1.iter().enumerate() {
        d1[row] = sol.duals_ge[pos];
    }
    let d2 = sol.duals_eq[layout.eq_d1.len()..layout.eq_d1.len() + layout.num_outcomes].to_vec();
    let cut_base = layout.ge_d1.len();
    let d5 = layout
        .d5
        .iter()
        .enumerate()
        .map(|(i, &(w, j))| (w, j, sol.duals_ge[cut_base + i]))
        .collect();
    let risk_base = cut_base + layout.d5.len();
    let risk_rows = sol.duals_ge[risk_base..risk_base + layout.num_outcomes].to_vec();
    Ok(StageSolution {
        action: sol.primal[..model.m].to_vec(),
        value: sol.objective,
        duals: StageDuals {
            d1,
            d2,
            d5,
            action_reduced_costs: sol.reduced_costs[..model.m].to_vec(),
            risk_rows,
        },
    })
}

fn argmax_cut(cuts: &[Cut], x: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (j, cut) in cuts.iter().enumerate() {
        let value = dot(&cut.q_x, x) + cut.q_c;
        if value > best_value {
            best = j;
            best_value = value;
        }
    }
    (best, best_value)
}

/// LP-sensitivity subgradient of the stage value at the expansion point:
/// slope from the duals of every row whose right-hand side depends on x,
/// intercept chosen so the cut is tight at `x_hat`.
pub fn extract_cut(
    model: &MdpModel,
    t: usize,
    d: usize,
    x_hat: &[f64],
    stage: &StageSolution,
    next_cuts: &CutSet,
    iteration: usize,
) -> Cut {
    let state = &model.states[d];
    let n = model.n;
    let mut e_x = vec![0.0; n];

    // -X' d1
    for (row, &dual) in stage.duals.d1.iter().enumerate() {
        if dual != 0.0 {
            for i in 0..n {
                e_x[i] -= dual * state.constraints.x_mat[row][i];
            }
        }
    }
    // sum_w d2(w) (c_x + Tx(w)' c_n)
    for (w, &dual) in stage.duals.d2.iter().enumerate() {
        if dual != 0.0 {
            let tx_cn = matvec_t(&state.outcomes[w].t_x, &model.cost.c_n);
            for i in 0..n {
                e_x[i] += dual * (model.cost.c_x[i] + tx_cn[i]);
            }
        }
    }
    // sum_{w,j} d5(w,j) Tx(w)' q_{x,j}
    for &(w, j, dual) in &stage.duals.d5 {
        if dual != 0.0 {
            let o = &state.outcomes[w];
            let cut = &next_cuts.cuts_at(t + 1, o.next_d)[j];
            let slope = matvec_t(&o.t_x, &cut.q_x);
            for i in 0..n {
                e_x[i] += dual * slope[i];
            }
        }
    }

    let e_c = stage.value - dot(&e_x, x_hat);
    Cut {
        q_x: e_x,
        q_c: e_c,
        origin: CutOrigin { iteration, t, d, x: x_hat.to_vec() },
    }
}
