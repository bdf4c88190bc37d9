//! One-step conditional risk mapping on finite distributions:
//! `rho(Z) = (1 - lambda) E[Z] + lambda AV@R_alpha(Z)`, with AV@R available
//! both in primal envelope form (greedy tail fill) and in dual LP form.
//! `alpha = 0` is served by a dedicated worst-case path; the `p / alpha`
//! division is never performed there.

use thiserror::Error;

use crate::lp::{self, LpProblem, LpStatus};
use crate::model::{RiskParams, PROB_TOL};

/// Inputs with |Z| beyond this are rejected; the absolute tolerances used
/// throughout assume values normalized below it.
pub const MAX_ABS_VALUE: f64 = 1e6;

#[derive(Debug, Error, PartialEq)]
pub enum RiskError {
    #[error("alpha {0} outside (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("distribution invalid: {0}")]
    InvalidDistribution(String),
    #[error("dual LP did not solve: {0}")]
    DualLpFailed(String),
}

/// A finite reference distribution paired with the realizations of a random
/// cost. Zero-probability atoms are dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
    values: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(probs: Vec<f64>, values: Vec<f64>) -> Result<Self, RiskError> {
        if probs.len() != values.len() {
            return Err(RiskError::InvalidDistribution(format!(
                "{} probabilities vs {} values",
                probs.len(),
                values.len()
            )));
        }
        if probs.is_empty() {
            return Err(RiskError::InvalidDistribution("empty distribution".into()));
        }
        if probs.iter().any(|&p| p < 0.0) {
            return Err(RiskError::InvalidDistribution("negative probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(RiskError::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        if values.iter().any(|v| !v.is_finite() || v.abs() > MAX_ABS_VALUE) {
            return Err(RiskError::InvalidDistribution(format!(
                "values must be finite with magnitude at most {MAX_ABS_VALUE}"
            )));
        }
        let (probs, values) = probs
            .into_iter()
            .zip(values)
            .filter(|&(p, _)| p > 0.0)
            .unzip();
        Ok(FiniteDistribution { probs, values })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn expectation(&self) -> f64 {
        self.probs.iter().zip(&self.values).map(|(p, z)| p * z).sum()
    }
}

/// AV@R by the envelope maximization over {q : 0 <= q <= p/alpha, sum q = 1}:
/// sort values descending, assign q = p/alpha until the unit mass is
/// exhausted, fractional last atom. Ties broken by atom index.
pub fn avar_primal(dist: &FiniteDistribution, alpha: f64) -> Result<f64, RiskError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RiskError::AlphaOutOfRange(alpha));
    }
    let mut order: Vec<usize> = (0..dist.values.len()).collect();
    order.sort_by(|&a, &b| {
        dist.values[b]
            .partial_cmp(&dist.values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut remaining = 1.0;
    let mut acc = 0.0;
    for &i in &order {
        if remaining <= 0.0 {
            break;
        }
        let q = (dist.probs[i] / alpha).min(remaining);
        acc += q * dist.values[i];
        remaining -= q;
    }
    Ok(acc)
}

/// AV@R by its dual LP: `min mu + (1/alpha) p'xi` over `xi + 1 mu >= Z`,
/// `xi >= 0`. The returned `mu` is an alpha-quantile of Z.
pub fn avar_dual(dist: &FiniteDistribution, alpha: f64) -> Result<(f64, f64, Vec<f64>), RiskError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(RiskError::AlphaOutOfRange(alpha));
    }
    let k = dist.values.len();
    // Variables: mu, xi_0 .. xi_{k-1}.
    let mut objective = vec![1.0];
    objective.extend(dist.probs.iter().map(|p| p / alpha));
    let mut ge_rows = Vec::with_capacity(k);
    for i in 0..k {
        let mut row = vec![1.0; 1];
        row.extend((0..k).map(|j| if j == i { 1.0 } else { 0.0 }));
        ge_rows.push(row);
    }
    let mut lower = vec![f64::NEG_INFINITY];
    lower.extend(std::iter::repeat(0.0).take(k));
    let problem = LpProblem {
        objective,
        ge_rows,
        ge_rhs: dist.values.clone(),
        lower,
        upper: vec![f64::INFINITY; k + 1],
        ..Default::default()
    };
    let sol = lp::solve(&problem);
    if sol.status != LpStatus::Optimal {
        return Err(RiskError::DualLpFailed(format!("{:?}", sol.status)));
    }
    Ok((sol.objective, sol.primal[0], sol.primal[1..].to_vec()))
}

/// Maximum realization over atoms with positive probability. The evaluation
/// path for `alpha = 0`.
pub fn worst_case(dist: &FiniteDistribution) -> f64 {
    dist.values.iter().fold(f64::NEG_INFINITY, |acc, &v| acc.max(v))
}

/// The convex combination of expectation and AV@R (worst case at alpha = 0).
pub fn rho(dist: &FiniteDistribution, risk: &RiskParams) -> Result<f64, RiskError> {
    let tail = if risk.lambda == 0.0 {
        0.0
    } else if risk.alpha == 0.0 {
        worst_case(dist)
    } else {
        avar_primal(dist, risk.alpha)?
    };
    Ok((1.0 - risk.lambda) * dist.expectation() + risk.lambda * tail)
}
