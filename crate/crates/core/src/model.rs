//! Data structures for hybrid linearly controlled MDPs: finitely many
//! discrete states, a continuous state vector, continuous actions inside a
//! polytope, and per-outcome affine transitions
//! `x' = Tx x + Ta a + U`, `d' = next_d`.
//!
//! All model data is immutable after validation and shared read-only by the
//! solver, the simulator, and the instance builders.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::{self, LpProblem, LpStatus};

/// Probability tolerance for "sums to one" checks.
pub const PROB_TOL: f64 = 1e-12;

/// Risk preference: `rho(Z) = (1 - lambda) E[Z] + lambda AV@R_alpha(Z)`.
/// `alpha = 0` selects the worst-case (robust) evaluation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl RiskParams {
    pub fn risk_neutral() -> Self {
        RiskParams { lambda: 0.0, alpha: 1.0 }
    }

    pub fn robust() -> Self {
        RiskParams { lambda: 1.0, alpha: 0.0 }
    }
}

/// One atom of the finite one-step sample space attached to a discrete state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub prob: f64,
    pub next_d: usize,
    #[serde(rename = "Tx")]
    pub t_x: Vec<Vec<f64>>,
    #[serde(rename = "Ta")]
    pub t_a: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    pub u: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowSense {
    Eq,
    Ge,
}

/// The admissible-action polytope of one discrete state:
/// rows `A a {=,>=} b - X x` plus the finite box `l <= a <= u`.
///
/// Rows default to equalities; `senses` marks individual rows as `>=`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConstraints {
    #[serde(rename = "A")]
    pub a_mat: Vec<Vec<f64>>,
    #[serde(rename = "b")]
    pub b_vec: Vec<f64>,
    #[serde(rename = "X")]
    pub x_mat: Vec<Vec<f64>>,
    #[serde(rename = "l")]
    pub lower: Vec<f64>,
    #[serde(rename = "u")]
    pub upper: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub senses: Vec<RowSense>,
}

impl StageConstraints {
    pub fn num_rows(&self) -> usize {
        self.a_mat.len()
    }

    pub fn sense(&self, row: usize) -> RowSense {
        self.senses.get(row).copied().unwrap_or(RowSense::Eq)
    }
}

/// Transition cost `c((d,x), a, (d',x')) = c_a'a + c_x'x + c_n'x'`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    #[serde(rename = "ca")]
    pub c_a: Vec<f64>,
    #[serde(rename = "cx")]
    pub c_x: Vec<f64>,
    #[serde(rename = "cn")]
    pub c_n: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteState {
    pub constraints: StageConstraints,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub d: usize,
    pub x: Vec<f64>,
}

/// Bounding box for the reachable continuous states; used to seed initial
/// value-function cuts with a finite lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// A full problem instance. Constraint data is stationary across time;
/// time-dependence enters only through the horizon index of value functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpModel {
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub risk: RiskParams,
    pub initial: InitialState,
    pub states: Vec<DiscreteState>,
    pub cost: CostSpec,
    pub x_box: StateBox,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl MdpModel {
    pub fn num_d(&self) -> usize {
        self.states.len()
    }

    /// Drops zero-probability atoms. Called on load and by instance builders
    /// so downstream code never sees a vacuous atom.
    pub fn normalize(&mut self) {
        for state in &mut self.states {
            state.outcomes.retain(|o| o.prob != 0.0);
        }
    }

    /// Checks every structural invariant plus a complete-recourse smoke check:
    /// for each discrete state, feasibility of the action polytope at x = 0 is
    /// verified by one LP solve. (Recourse for every reachable x cannot be
    /// checked in general; this catches trivially broken instances.)
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.horizon < 1 {
            v.push("horizon must be at least 1".to_string());
        }
        if self.n == 0 || self.m == 0 {
            v.push("n and m must be positive".to_string());
        }
        let r = &self.risk;
        if !(0.0..=1.0).contains(&r.lambda) {
            v.push(format!("risk.lambda {} outside [0, 1]", r.lambda));
        }
        if !(0.0..=1.0).contains(&r.alpha) {
            v.push(format!("risk.alpha {} outside [0, 1]", r.alpha));
        }
        if self.initial.d >= self.num_d() {
            v.push(format!("initial.d {} out of range", self.initial.d));
        }
        if self.initial.x.len() != self.n {
            v.push("initial.x dimension mismatch".to_string());
        }
        if self.x_box.lo.len() != self.n || self.x_box.hi.len() != self.n {
            v.push("x_box dimension mismatch".to_string());
        }
        for i in 0..self.x_box.lo.len().min(self.x_box.hi.len()) {
            let (lo, hi) = (self.x_box.lo[i], self.x_box.hi[i]);
            if !lo.is_finite() || !hi.is_finite() {
                v.push(format!("x_box component {i} must be finite"));
            } else if lo > hi {
                v.push(format!("x_box bound order violated at component {i}"));
            }
        }
        for (c, field, rows, cols) in [
            (&self.cost.c_a, "ca", 1usize, self.m),
            (&self.cost.c_x, "cx", 1, self.n),
            (&self.cost.c_n, "cn", 1, self.n),
        ] {
            let _ = rows;
            if c.len() != cols {
                v.push(format!("cost.{field} has length {}, expected {cols}", c.len()));
            }
        }
        for (d, state) in self.states.iter().enumerate() {
            self.validate_constraints(d, &state.constraints, &mut v);
            if state.outcomes.is_empty() {
                v.push(format!("state {d}: no outcomes"));
                continue;
            }
            let mut total = 0.0;
            for (w, o) in state.outcomes.iter().enumerate() {
                if o.prob <= 0.0 {
                    v.push(format!("state {d}, outcome {w}: prob {} not positive", o.prob));
                }
                total += o.prob;
                if o.next_d >= self.num_d() {
                    v.push(format!("state {d}, outcome {w}: next_d {} out of range", o.next_d));
                }
                if o.t_x.len() != self.n || o.t_x.iter().any(|r| r.len() != self.n) {
                    v.push(format!("state {d}, outcome {w}: Tx is not {0}x{0}", self.n));
                }
                if o.t_a.len() != self.n || o.t_a.iter().any(|r| r.len() != self.m) {
                    v.push(format!("state {d}, outcome {w}: Ta is not {}x{}", self.n, self.m));
                }
                if o.u.len() != self.n {
                    v.push(format!("state {d}, outcome {w}: U has length {}", o.u.len()));
                }
            }
            if (total - 1.0).abs() > PROB_TOL {
                v.push(format!("state {d}: outcome probabilities sum to {total}, not 1"));
            }
        }
        // Complete-recourse smoke check at x = 0, only when the data above is
        // dimensionally sound.
        if v.is_empty() {
            for (d, state) in self.states.iter().enumerate() {
                if !action_polytope_feasible(&state.constraints) {
                    v.push(format!(
                        "state {d}: action polytope infeasible at x = 0 (complete recourse smoke check)"
                    ));
                }
            }
        }
        v
    }

    fn validate_constraints(&self, d: usize, c: &StageConstraints, v: &mut Vec<String>) {
        let k = c.num_rows();
        if c.b_vec.len() != k {
            v.push(format!("state {d}: b has length {}, expected {k}", c.b_vec.len()));
        }
        if c.x_mat.len() != k {
            v.push(format!("state {d}: X has {} rows, expected {k}", c.x_mat.len()));
        }
        if c.a_mat.iter().any(|r| r.len() != self.m) {
            v.push(format!("state {d}: A row width differs from m = {}", self.m));
        }
        if c.x_mat.iter().any(|r| r.len() != self.n) {
            v.push(format!("state {d}: X row width differs from n = {}", self.n));
        }
        if !c.senses.is_empty() && c.senses.len() != k {
            v.push(format!("state {d}: senses has length {}, expected {k}", c.senses.len()));
        }
        if c.lower.len() != self.m || c.upper.len() != self.m {
            v.push(format!("state {d}: action bounds must have length m = {}", self.m));
        } else {
            for i in 0..self.m {
                if !c.lower[i].is_finite() || !c.upper[i].is_finite() {
                    v.push(format!("state {d}: action bound {i} must be finite"));
                } else if c.lower[i] > c.upper[i] {
                    v.push(format!("state {d}: bound order violated at action {i}"));
                }
            }
        }
    }
}

fn action_polytope_feasible(c: &StageConstraints) -> bool {
    let k = c.num_rows();
    let m = c.lower.len();
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut ge_rows = Vec::new();
    let mut ge_rhs = Vec::new();
    for i in 0..k {
        match c.sense(i) {
            RowSense::Eq => {
                eq_rows.push(c.a_mat[i].clone());
                eq_rhs.push(c.b_vec[i]);
            }
            RowSense::Ge => {
                ge_rows.push(c.a_mat[i].clone());
                ge_rhs.push(c.b_vec[i]);
            }
        }
    }
    let problem = LpProblem {
        objective: vec![0.0; m],
        eq_rows,
        eq_rhs,
        ge_rows,
        ge_rhs,
        lower: c.lower.clone(),
        upper: c.upper.clone(),
    };
    lp::solve(&problem).status == LpStatus::Optimal
}

/// Parses an instance file. Zero-probability atoms are dropped; structural
/// violations are left to `validate`.
pub fn load_model(text: &str) -> Result<MdpModel, ModelError> {
    let mut model: MdpModel = serde_json::from_str(text)?;
    model.normalize();
    Ok(model)
}

/// Serializes an instance. Reals round-trip exactly (shortest representation
/// that re-parses to the same bit pattern).
pub fn save_model(model: &MdpModel) -> String {
    serde_json::to_string_pretty(model).expect("model serialization cannot fail")
}
