//! The bundled dynamic portfolio benchmark: three risky assets plus cash,
//! an AR(1) market state discretized to a uniform grid, Gauss--Hermite
//! discretization of the jointly normal return noise, and proportional
//! transaction fees linearized through a buy/sell split of the trade vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cholesky, solve_dense};
use crate::model::{
    CostSpec, DiscreteState, InitialState, MdpModel, Outcome, RiskParams, RowSense,
    StageConstraints, StateBox,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioParams {
    /// Per-asset intercepts of the log-return regressions.
    pub a_r: Vec<f64>,
    /// Per-asset loadings on the market state.
    pub b_r: Vec<f64>,
    pub a_z: f64,
    pub b_z: f64,
    /// 4x4 covariance of (return noise e, market noise v); last row/column
    /// is the market component.
    pub sigma: Vec<Vec<f64>>,
    /// Gross risk-free return on cash.
    pub r_f: f64,
    /// Proportional fees on buys, per asset.
    pub delta_plus: Vec<f64>,
    /// Proportional fees on sells, per asset.
    pub delta_minus: Vec<f64>,
    pub grid_size: usize,
    pub quad_points: usize,
    pub grid_halfwidth_sd: f64,
    pub horizon: usize,
    pub initial_wealth: f64,
    /// Upper bound of the per-component trade box.
    pub wealth_cap: f64,
    pub risk: RiskParams,
    /// When set, the market noise v gets its own quadrature dimension
    /// (atoms per state become quad_points^4) instead of being collapsed to
    /// its conditional mean given e.
    pub independent_market_noise: bool,
}

#[derive(Debug, Error)]
pub enum PortfolioError {
    #[error("grid_size must be odd and positive, got {0}")]
    GridSizeEven(usize),
    #[error("market process nonstationary: |b_z| = {0} >= 1")]
    Nonstationary(f64),
    #[error("quad_points {0} unsupported (1, 2, or 3)")]
    QuadPoints(usize),
    #[error("return covariance block is not positive definite")]
    ReturnBlockNotPd,
    #[error("invalid parameters: {0}")]
    BadParams(String),
}

/// Appendix-style benchmark calibration: NYSE large/mid/small-cap return
/// regressions on the dividend-yield market state, fees at 40 basis points
/// each way, a 19-point market grid, and 27 return atoms per state.
pub fn default_params() -> PortfolioParams {
    PortfolioParams {
        a_r: vec![0.0053, 0.0067, 0.0072],
        b_r: vec![0.0028, 0.0049, 0.0062],
        a_z: 0.0,
        b_z: 0.97,
        sigma: vec![
            vec![0.002894, 0.003532, 0.003910, -0.000115],
            vec![0.003532, 0.004886, 0.005712, -0.000144],
            vec![0.003910, 0.005712, 0.007259, -0.000163],
            vec![-0.000115, -0.000144, -0.000163, 0.052900],
        ],
        r_f: 1.00042,
        delta_plus: vec![0.004; 3],
        delta_minus: vec![0.004; 3],
        grid_size: 19,
        quad_points: 3,
        grid_halfwidth_sd: 2.0,
        horizon: 5,
        initial_wealth: 1.0,
        wealth_cap: 10.0,
        risk: RiskParams::risk_neutral(),
        independent_market_noise: false,
    }
}

fn check_params(p: &PortfolioParams) -> Result<(), PortfolioError> {
    if p.a_r.len() != 3 || p.b_r.len() != 3 || p.delta_plus.len() != 3 || p.delta_minus.len() != 3 {
        return Err(PortfolioError::BadParams("asset vectors must have length 3".into()));
    }
    if p.sigma.len() != 4 || p.sigma.iter().any(|r| r.len() != 4) {
        return Err(PortfolioError::BadParams("sigma must be 4x4".into()));
    }
    for i in 0..4 {
        for j in 0..4 {
            if (p.sigma[i][j] - p.sigma[j][i]).abs() > 1e-12 {
                return Err(PortfolioError::BadParams("sigma must be symmetric".into()));
            }
        }
    }
    if p.delta_plus.iter().chain(&p.delta_minus).any(|&f| f < 0.0) {
        return Err(PortfolioError::BadParams("fees must be nonnegative".into()));
    }
    if p.horizon < 1 || p.initial_wealth <= 0.0 || p.wealth_cap <= 0.0 || p.r_f <= 0.0 {
        return Err(PortfolioError::BadParams(
            "horizon, initial_wealth, wealth_cap, r_f must be positive".into(),
        ));
    }
    Ok(())
}

/// Stationary standard deviation of the AR(1) market state.
pub fn stationary_sd(params: &PortfolioParams) -> Result<f64, PortfolioError> {
    if params.b_z.abs() >= 1.0 {
        return Err(PortfolioError::Nonstationary(params.b_z.abs()));
    }
    Ok((params.sigma[3][3] / (1.0 - params.b_z * params.b_z)).sqrt())
}

/// Uniform, symmetric market-state grid; the middle element is exactly zero.
pub fn market_grid(params: &PortfolioParams) -> Result<Vec<f64>, PortfolioError> {
    if params.grid_size == 0 || params.grid_size % 2 == 0 {
        return Err(PortfolioError::GridSizeEven(params.grid_size));
    }
    let sd = stationary_sd(params)?;
    let w = params.grid_halfwidth_sd * sd;
    let half = (params.grid_size / 2) as i64;
    let step = if half == 0 { 0.0 } else { w / half as f64 };
    Ok((0..params.grid_size)
        .map(|i| (i as i64 - half) as f64 * step)
        .collect())
}

pub fn snap_to_grid(grid: &[f64], z: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &g) in grid.iter().enumerate() {
        let dist = (z - g).abs();
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

/// One discretized noise atom: gross returns for the three risky assets and
/// the (pre-snapping) next market state.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadAtom {
    pub prob: f64,
    pub returns: Vec<f64>,
    pub z_next: f64,
}

fn hermite_rule(points: usize) -> Result<(Vec<f64>, Vec<f64>), PortfolioError> {
    // Probabilists' Gauss--Hermite nodes/weights for a standard normal.
    match points {
        1 => Ok((vec![0.0], vec![1.0])),
        2 => Ok((vec![-1.0, 1.0], vec![0.5, 0.5])),
        3 => Ok((
            vec![-3.0f64.sqrt(), 0.0, 3.0f64.sqrt()],
            vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
        )),
        other => Err(PortfolioError::QuadPoints(other)),
    }
}

/// Tensor-product quadrature of the return noise at market state z. The
/// market noise is collapsed to its conditional mean given the return noise
/// (default) or given its own quadrature dimension on the residual.
pub fn quadrature(params: &PortfolioParams, z: f64) -> Result<Vec<QuadAtom>, PortfolioError> {
    check_params(params)?;
    let (nodes, weights) = hermite_rule(params.quad_points)?;
    let block: Vec<Vec<f64>> = (0..3).map(|i| params.sigma[i][..3].to_vec()).collect();
    let chol = cholesky(&block, 1e-14).ok_or(PortfolioError::ReturnBlockNotPd)?;
    let sigma_ev = [params.sigma[0][3], params.sigma[1][3], params.sigma[2][3]];
    // Regression of v on e and the leftover variance.
    let beta = solve_dense(&block, &sigma_ev, 1e-14).ok_or(PortfolioError::ReturnBlockNotPd)?;
    let resid_var = (params.sigma[3][3] - crate::linalg::dot(&beta, &sigma_ev)).max(0.0);
    let resid_sd = resid_var.sqrt();

    let mut atoms = Vec::new();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            for k in 0..nodes.len() {
                let u = [nodes[i], nodes[j], nodes[k]];
                let e: Vec<f64> = (0..3)
                    .map(|row| (0..=row).map(|c| chol[row][c] * u[c]).sum())
                    .collect();
                let returns: Vec<f64> = (0..3)
                    .map(|a| (params.a_r[a] + params.b_r[a] * z + e[a]).exp())
                    .collect();
                let v_mean = crate::linalg::dot(&beta, &e);
                let prob = weights[i] * weights[j] * weights[k];
                if params.independent_market_noise {
                    for (vn, vw) in nodes.iter().zip(&weights) {
                        atoms.push(QuadAtom {
                            prob: prob * vw,
                            returns: returns.clone(),
                            z_next: params.a_z + params.b_z * z + v_mean + resid_sd * vn,
                        });
                    }
                } else {
                    atoms.push(QuadAtom {
                        prob,
                        returns,
                        z_next: params.a_z + params.b_z * z + v_mean,
                    });
                }
            }
        }
    }
    Ok(atoms)
}

/// Assembles the full instance: n = 4 continuous components (three holdings
/// plus cash), m = 6 actions (per-asset buys then sells), one discrete state
/// per grid point, and the wealth-reduction cost.
pub fn build_instance(params: &PortfolioParams) -> Result<MdpModel, PortfolioError> {
    check_params(params)?;
    let grid = market_grid(params)?;
    let n = 4;
    let m = 6;

    // Trade admissibility: cash after fees stays nonnegative, and no asset is
    // sold short. Rows are >= constraints A a + X x >= 0.
    let mut a_mat = Vec::new();
    let mut x_mat = Vec::new();
    let mut senses = Vec::new();
    let mut cash_row = vec![0.0; m];
    for i in 0..3 {
        cash_row[i] = -(1.0 + params.delta_plus[i]);
        cash_row[i + 3] = 1.0 - params.delta_minus[i];
    }
    a_mat.push(cash_row);
    x_mat.push(vec![0.0, 0.0, 0.0, 1.0]);
    senses.push(RowSense::Ge);
    for i in 0..3 {
        let mut row = vec![0.0; m];
        row[i] = 1.0;
        row[i + 3] = -1.0;
        a_mat.push(row);
        let mut xrow = vec![0.0; n];
        xrow[i] = 1.0;
        x_mat.push(xrow);
        senses.push(RowSense::Ge);
    }
    let constraints = StageConstraints {
        b_vec: vec![0.0; a_mat.len()],
        a_mat,
        x_mat,
        lower: vec![0.0; m],
        upper: vec![params.wealth_cap; m],
        senses,
    };

    let mut r_max = params.r_f;
    let mut states = Vec::with_capacity(grid.len());
    for &z in &grid {
        let atoms = quadrature(params, z)?;
        let outcomes = atoms
            .into_iter()
            .map(|atom| {
                let r = &atom.returns;
                r_max = r.iter().fold(r_max, |acc, &v| acc.max(v));
                let mut t_x = vec![vec![0.0; n]; n];
                for i in 0..3 {
                    t_x[i][i] = r[i];
                }
                t_x[3][3] = params.r_f;
                let mut t_a = vec![vec![0.0; m]; n];
                for i in 0..3 {
                    t_a[i][i] = r[i];
                    t_a[i][i + 3] = -r[i];
                    t_a[3][i] = -params.r_f * (1.0 + params.delta_plus[i]);
                    t_a[3][i + 3] = params.r_f * (1.0 - params.delta_minus[i]);
                }
                Outcome {
                    prob: atom.prob,
                    next_d: snap_to_grid(&grid, atom.z_next),
                    t_x,
                    t_a,
                    u: vec![0.0; n],
                }
            })
            .collect();
        states.push(DiscreteState { constraints: constraints.clone(), outcomes });
    }

    // Wealth cannot grow faster than the best gross return anywhere, and no
    // component can go negative; that caps every reachable coordinate.
    let wealth_bound = params.initial_wealth * r_max.powi(params.horizon as i32);

    let model = MdpModel {
        horizon: params.horizon,
        n,
        m,
        risk: params.risk,
        initial: InitialState {
            d: grid.len() / 2,
            x: vec![0.0, 0.0, 0.0, params.initial_wealth],
        },
        states,
        cost: CostSpec {
            c_a: vec![0.0; m],
            c_x: vec![1.0; n],
            c_n: vec![-1.0; n],
        },
        x_box: StateBox { lo: vec![0.0; n], hi: vec![wealth_bound; n] },
    };
    Ok(model)
}
