//! Dense linear-programming solver returning the primal solution together
//! with dual values for every constraint row. The duals are the raw material
//! for value-function cut extraction, so the solver works on vertices: a
//! two-phase bounded-variable revised simplex with Dantzig pricing, a
//! Bland's-rule fallback against cycling, and periodic basis refactorization.
//!
//! Sign conventions (fixed here, relied on bit-exactly by `bellman`):
//! the problem is a minimization `min c'z` over `E z = f`, `G z >= h`,
//! `l <= z <= u`; at optimality `duals_ge >= 0` and the objective equals
//! `duals_eq'f + duals_ge'h + ` bound terms.

/// Entering-candidate threshold on reduced costs.
const DUAL_TOL: f64 = 1e-9;
/// Pivot magnitude threshold in the ratio test.
const PIVOT_TOL: f64 = 1e-10;
/// Primal feasibility tolerance.
const FEAS_TOL: f64 = 1e-8;
/// Refactorize the basis after this many eta updates.
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LpProblem {
    /// Minimized objective coefficients, one per variable.
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub ge_rows: Vec<Vec<f64>>,
    pub ge_rhs: Vec<f64>,
    /// Entries may be `-inf`.
    pub lower: Vec<f64>,
    /// Entries may be `+inf`.
    pub upper: Vec<f64>,
}

impl LpProblem {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Singular basis or failed self-check; distinct from `Infeasible`.
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals_eq: Vec<f64>,
    /// Nonnegative at optimality (>= rows of a minimization).
    pub duals_ge: Vec<f64>,
    /// Reduced costs of the structural variables; the duals of active box
    /// bounds. Zero on basic variables.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
}

impl LpSolution {
    fn failed(status: LpStatus) -> Self {
        LpSolution {
            status,
            primal: Vec::new(),
            duals_eq: Vec::new(),
            duals_ge: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
        }
    }
}

/// Solves the problem. Deterministic: identical inputs produce identical
/// pivot sequences and identical output.
pub fn solve(problem: &LpProblem) -> LpSolution {
    match Simplex::new(problem) {
        Some(mut s) => s.run(problem),
        None => LpSolution::failed(LpStatus::NumericalFailure),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic with both bounds infinite, parked at zero.
    Free,
}

/// Dense LU factors with partial pivoting. Row `i` of the factors
/// corresponds to original row `perm[i]`.
struct LuFactors {
    m: usize,
    f: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    fn factor(dense: Vec<f64>, m: usize) -> Option<LuFactors> {
        let mut f = dense;
        let mut perm: Vec<usize> = (0..m).collect();
        for col in 0..m {
            let mut piv = col;
            let mut best = f[col * m + col].abs();
            for row in col + 1..m {
                let v = f[row * m + col].abs();
                if v > best {
                    best = v;
                    piv = row;
                }
            }
            if best <= PIVOT_TOL {
                return None;
            }
            if piv != col {
                for k in 0..m {
                    f.swap(col * m + k, piv * m + k);
                }
                perm.swap(col, piv);
            }
            let inv = 1.0 / f[col * m + col];
            for row in col + 1..m {
                let mult = f[row * m + col] * inv;
                if mult != 0.0 {
                    f[row * m + col] = mult;
                    for k in col + 1..m {
                        f[row * m + k] -= mult * f[col * m + k];
                    }
                } else {
                    f[row * m + col] = 0.0;
                }
            }
        }
        Some(LuFactors { m, f, perm })
    }

    /// Solves B x = b in place.
    fn solve(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        scratch.clear();
        scratch.extend(self.perm.iter().map(|&p| b[p]));
        for row in 1..m {
            let mut s = scratch[row];
            for col in 0..row {
                s -= self.f[row * m + col] * scratch[col];
            }
            scratch[row] = s;
        }
        for row in (0..m).rev() {
            let mut s = scratch[row];
            for col in row + 1..m {
                s -= self.f[row * m + col] * scratch[col];
            }
            scratch[row] = s / self.f[row * m + row];
        }
        b.copy_from_slice(scratch);
    }

    /// Solves B^T y = c in place.
    fn solve_t(&self, c: &mut [f64], scratch: &mut Vec<f64>) {
        let m = self.m;
        scratch.clear();
        scratch.extend_from_slice(c);
        // U^T w = c (forward)
        for row in 0..m {
            let mut s = scratch[row];
            for col in 0..row {
                s -= self.f[col * m + row] * scratch[col];
            }
            scratch[row] = s / self.f[row * m + row];
        }
        // L^T v = w (backward, unit diagonal)
        for row in (0..m).rev() {
            let mut s = scratch[row];
            for col in row + 1..m {
                s -= self.f[col * m + row] * scratch[col];
            }
            scratch[row] = s;
        }
        for (i, &p) in self.perm.iter().enumerate() {
            c[p] = scratch[i];
        }
    }
}

struct Simplex {
    nrows: usize,
    n_eq: usize,
    n_struct: usize,
    /// structural | ge-slacks | artificials
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    xb: Vec<f64>,
    rhs: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<(usize, Vec<f64>)>,
    scratch: Vec<f64>,
    degenerate_pivots: usize,
    bland: bool,
}

enum StepOutcome {
    Optimal,
    Unbounded,
    Pivoted,
    Failure,
}

impl Simplex {
    fn new(problem: &LpProblem) -> Option<Simplex> {
        let n = problem.num_vars();
        if n == 0
            || problem.lower.len() != n
            || problem.upper.len() != n
            || problem.eq_rows.len() != problem.eq_rhs.len()
            || problem.ge_rows.len() != problem.ge_rhs.len()
            || problem.eq_rows.iter().any(|r| r.len() != n)
            || problem.ge_rows.iter().any(|r| r.len() != n)
        {
            return None;
        }
        let n_eq = problem.eq_rows.len();
        let n_ge = problem.ge_rows.len();
        let nrows = n_eq + n_ge;
        let total = n + n_ge + nrows;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); total];
        for (i, row) in problem.eq_rows.iter().chain(problem.ge_rows.iter()).enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    cols[j].push((i, v));
                }
            }
        }
        for g in 0..n_ge {
            cols[n + g].push((n_eq + g, -1.0));
        }

        let mut lower = problem.lower.clone();
        let mut upper = problem.upper.clone();
        lower.extend(std::iter::repeat(0.0).take(n_ge));
        upper.extend(std::iter::repeat(f64::INFINITY).take(n_ge));
        // Artificial bounds are set up during phase-1 construction.
        lower.extend(std::iter::repeat(0.0).take(nrows));
        upper.extend(std::iter::repeat(0.0).take(nrows));

        let rhs: Vec<f64> = problem.eq_rhs.iter().chain(problem.ge_rhs.iter()).copied().collect();

        Some(Simplex {
            nrows,
            n_eq,
            n_struct: n,
            cols,
            lower,
            upper,
            cost: Vec::new(),
            state: vec![VarState::AtLower; total],
            basis: Vec::new(),
            xb: Vec::new(),
            rhs,
            lu: None,
            etas: Vec::new(),
            scratch: Vec::new(),
            degenerate_pivots: 0,
            bland: false,
        })
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            VarState::AtLower => self.lower[j],
            VarState::AtUpper => self.upper[j],
            VarState::Free => 0.0,
            VarState::Basic => unreachable!("basic variable has no nonbasic value"),
        }
    }

    fn run(&mut self, problem: &LpProblem) -> LpSolution {
        let n = self.n_struct;
        let n_ge = self.cols.len() - n - self.nrows;
        let art0 = n + n_ge;

        for (j, (&lo, &up)) in self.lower.iter().zip(&self.upper).take(n + n_ge).enumerate() {
            if lo > up {
                return LpSolution::failed(LpStatus::Infeasible);
            }
            self.state[j] = if lo.is_finite() {
                VarState::AtLower
            } else if up.is_finite() {
                VarState::AtUpper
            } else {
                VarState::Free
            };
        }

        // Residuals at the nonbasic point decide the starting basis: slacks
        // cover ge rows where they can, artificials cover the rest.
        let mut residual = self.rhs.clone();
        for j in 0..n + n_ge {
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                for &(i, a) in &self.cols[j] {
                    residual[i] -= a * v;
                }
            }
        }
        self.basis = vec![usize::MAX; self.nrows];
        self.xb = vec![0.0; self.nrows];
        for i in 0..self.nrows {
            let slack = if i >= self.n_eq { Some(n + (i - self.n_eq)) } else { None };
            match slack {
                Some(s) if residual[i] <= 0.0 => {
                    // G z - s = h with s = -(residual) >= 0.
                    self.basis[i] = s;
                    self.state[s] = VarState::Basic;
                    self.xb[i] = -residual[i];
                }
                _ => {
                    let a = art0 + i;
                    self.cols[a] = vec![(i, if residual[i] >= 0.0 { 1.0 } else { -1.0 })];
                    self.upper[a] = f64::INFINITY;
                    self.basis[i] = a;
                    self.state[a] = VarState::Basic;
                    self.xb[i] = residual[i].abs();
                }
            }
        }

        if self.refactor().is_err() {
            return LpSolution::failed(LpStatus::NumericalFailure);
        }

        // Phase 1: minimize the sum of artificial values.
        self.cost = vec![0.0; self.cols.len()];
        for a in art0..self.cols.len() {
            self.cost[a] = 1.0;
        }
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        match self.iterate() {
            StepOutcome::Optimal => {}
            StepOutcome::Unbounded | StepOutcome::Failure => {
                return LpSolution::failed(LpStatus::NumericalFailure);
            }
            StepOutcome::Pivoted => unreachable!(),
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(&b, _)| b >= art0)
            .map(|(_, &v)| v.abs())
            .sum();
        if infeasibility > FEAS_TOL * scale {
            return LpSolution::failed(LpStatus::Infeasible);
        }

        // Phase 2: real costs; artificials pinned to zero.
        for a in art0..self.cols.len() {
            self.cost[a] = 0.0;
            self.upper[a] = 0.0;
            if self.state[a] != VarState::Basic {
                self.state[a] = VarState::AtLower;
            }
        }
        self.cost[..n].copy_from_slice(&problem.objective);
        self.degenerate_pivots = 0;
        self.bland = false;
        match self.iterate() {
            StepOutcome::Optimal => self.extract(problem),
            StepOutcome::Unbounded => LpSolution::failed(LpStatus::Unbounded),
            StepOutcome::Failure => LpSolution::failed(LpStatus::NumericalFailure),
            StepOutcome::Pivoted => unreachable!(),
        }
    }

    fn refactor(&mut self) -> Result<(), ()> {
        let m = self.nrows;
        if m == 0 {
            self.lu = None;
            self.etas.clear();
            return Ok(());
        }
        let mut dense = vec![0.0; m * m];
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                dense[i * m + pos] = v;
            }
        }
        match LuFactors::factor(dense, m) {
            Some(lu) => {
                self.lu = Some(lu);
                self.etas.clear();
                self.recompute_basics();
                Ok(())
            }
            None => Err(()),
        }
    }

    /// xb = B^-1 (b - N v_N), recomputed from scratch for accuracy.
    fn recompute_basics(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.cols.len() {
            if self.state[j] != VarState::Basic {
                let v = self.nonbasic_value(j);
                if v != 0.0 {
                    for &(i, a) in &self.cols[j] {
                        r[i] -= a * v;
                    }
                }
            }
        }
        self.ftran(&mut r);
        self.xb = r;
    }

    fn ftran(&mut self, v: &mut [f64]) {
        if let Some(lu) = &self.lu {
            lu.solve(v, &mut self.scratch);
        }
        for (r, d) in &self.etas {
            let t = v[*r] / d[*r];
            for (i, &di) in d.iter().enumerate() {
                if di != 0.0 && i != *r {
                    v[i] -= di * t;
                }
            }
            v[*r] = t;
        }
    }

    fn btran(&mut self, c: &mut [f64]) {
        for (r, d) in self.etas.iter().rev() {
            let s: f64 = d.iter().zip(c.iter()).map(|(&a, &b)| a * b).sum();
            c[*r] = (c[*r] - (s - d[*r] * c[*r])) / d[*r];
        }
        if let Some(lu) = &self.lu {
            lu.solve_t(c, &mut self.scratch);
        }
    }

    fn row_duals(&mut self) -> Vec<f64> {
        let mut y: Vec<f64> = self.basis.iter().map(|&j| self.cost[j]).collect();
        self.btran(&mut y);
        y
    }

    fn iterate(&mut self) -> StepOutcome {
        let total = self.cols.len();
        let cap = 200 * (self.nrows + total) + 10_000;
        let bland_after = 3 * (self.nrows + total);
        for _ in 0..cap {
            match self.step(bland_after) {
                StepOutcome::Pivoted => continue,
                other => return other,
            }
        }
        StepOutcome::Failure
    }

    fn step(&mut self, bland_after: usize) -> StepOutcome {
        let y = self.row_duals();

        // Pricing: Dantzig by default, Bland once stalling is detected.
        let mut entering: Option<(usize, f64, f64)> = None; // (col, reduced cost, score)
        for j in 0..self.cols.len() {
            let st = self.state[j];
            if st == VarState::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let mut d = self.cost[j];
            for &(i, a) in &self.cols[j] {
                d -= y[i] * a;
            }
            let eligible = match st {
                VarState::AtLower => d < -DUAL_TOL,
                VarState::AtUpper => d > DUAL_TOL,
                VarState::Free => d.abs() > DUAL_TOL,
                VarState::Basic => false,
            };
            if !eligible {
                continue;
            }
            if self.bland {
                entering = Some((j, d, d.abs()));
                break;
            }
            let score = d.abs();
            if entering.map_or(true, |(_, _, best)| score > best) {
                entering = Some((j, d, score));
            }
        }
        let (q, d_q, _) = match entering {
            Some(e) => e,
            None => return StepOutcome::Optimal,
        };
        let dir: f64 = match self.state[q] {
            VarState::AtLower => 1.0,
            VarState::AtUpper => -1.0,
            VarState::Free => {
                if d_q < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            VarState::Basic => unreachable!(),
        };

        let mut w = vec![0.0; self.nrows];
        for &(i, a) in &self.cols[q] {
            w[i] = a;
        }
        self.ftran(&mut w);

        // Ratio test: the entering variable moves by dir * delta.
        let v_q = self.nonbasic_value(q);
        let own_limit = if dir > 0.0 { self.upper[q] - v_q } else { v_q - self.lower[q] };
        let mut best_delta = own_limit;
        let mut leaving: Option<usize> = None; // row index
        let mut best_g = 0.0f64;
        for i in 0..self.nrows {
            let g = dir * w[i];
            let limit = if g > PIVOT_TOL {
                let lb = self.lower[self.basis[i]];
                if lb.is_finite() {
                    (self.xb[i] - lb) / g
                } else {
                    continue;
                }
            } else if g < -PIVOT_TOL {
                let ub = self.upper[self.basis[i]];
                if ub.is_finite() {
                    (ub - self.xb[i]) / -g
                } else {
                    continue;
                }
            } else {
                continue;
            };
            let limit = limit.max(0.0);
            let better = match leaving {
                None => limit < best_delta - 1e-12,
                Some(r) => {
                    if limit < best_delta - 1e-12 {
                        true
                    } else if limit > best_delta + 1e-12 {
                        false
                    } else if self.bland {
                        self.basis[i] < self.basis[r]
                    } else {
                        g.abs() > best_g
                    }
                }
            };
            if better || (leaving.is_none() && limit <= best_delta) {
                best_delta = best_delta.min(limit);
                leaving = Some(i);
                best_g = g.abs();
            }
        }

        if best_delta.is_infinite() {
            return StepOutcome::Unbounded;
        }
        let delta = best_delta.max(0.0);
        if delta <= PIVOT_TOL {
            self.degenerate_pivots += 1;
            if self.degenerate_pivots > bland_after {
                self.bland = true;
            }
        }

        match leaving {
            None => {
                // Bound flip: the entering variable runs to its other bound.
                for i in 0..self.nrows {
                    if w[i] != 0.0 {
                        self.xb[i] -= delta * dir * w[i];
                    }
                }
                self.state[q] = if dir > 0.0 { VarState::AtUpper } else { VarState::AtLower };
            }
            Some(r) => {
                if w[r].abs() <= PIVOT_TOL {
                    return StepOutcome::Failure;
                }
                for i in 0..self.nrows {
                    if i != r && w[i] != 0.0 {
                        self.xb[i] -= delta * dir * w[i];
                    }
                }
                let out = self.basis[r];
                self.state[out] = if dir * w[r] > 0.0 {
                    VarState::AtLower
                } else {
                    VarState::AtUpper
                };
                if !self.lower[out].is_finite() && !self.upper[out].is_finite() {
                    self.state[out] = VarState::Free;
                }
                self.basis[r] = q;
                self.state[q] = VarState::Basic;
                self.xb[r] = v_q + dir * delta;
                self.etas.push((r, w));
                if self.etas.len() >= REFACTOR_EVERY && self.refactor().is_err() {
                    return StepOutcome::Failure;
                }
            }
        }
        StepOutcome::Pivoted
    }

    fn extract(&mut self, problem: &LpProblem) -> LpSolution {
        let n = self.n_struct;
        let mut primal = vec![0.0; n];
        for j in 0..n {
            if self.state[j] != VarState::Basic {
                primal[j] = self.nonbasic_value(j);
            }
        }
        for (i, &j) in self.basis.iter().enumerate() {
            if j < n {
                primal[j] = self.xb[i];
            }
        }
        let objective: f64 = problem.objective.iter().zip(&primal).map(|(c, x)| c * x).sum();

        let y = self.row_duals();
        let duals_eq = y[..self.n_eq].to_vec();
        let duals_ge = y[self.n_eq..].to_vec();

        let mut reduced_costs = vec![0.0; n];
        for j in 0..n {
            if self.state[j] != VarState::Basic {
                let mut d = self.cost[j];
                for &(i, a) in &self.cols[j] {
                    d -= y[i] * a;
                }
                reduced_costs[j] = d;
            }
        }

        let mut solution = LpSolution {
            status: LpStatus::Optimal,
            primal,
            duals_eq,
            duals_ge,
            reduced_costs,
            objective,
        };
        if !self.self_check(problem, &solution, &y) {
            solution.status = LpStatus::NumericalFailure;
        }
        solution
    }

    /// Strong duality, complementary slackness, primal and dual feasibility;
    /// the solver refuses to report Optimal when its own certificate fails.
    fn self_check(&self, problem: &LpProblem, sol: &LpSolution, y: &[f64]) -> bool {
        let scale = 1.0 + self.rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let x = &sol.primal;
        for (row, &b) in problem.eq_rows.iter().zip(&problem.eq_rhs) {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            if (act - b).abs() > FEAS_TOL * scale {
                return false;
            }
        }
        for (row, &b) in problem.ge_rows.iter().zip(&problem.ge_rhs) {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            if act < b - FEAS_TOL * scale {
                return false;
            }
        }
        for j in 0..x.len() {
            if x[j] < problem.lower[j] - FEAS_TOL * scale || x[j] > problem.upper[j] + FEAS_TOL * scale {
                return false;
            }
        }
        if sol.duals_ge.iter().any(|&v| v < -DUAL_TOL) {
            return false;
        }
        // Dual objective: y'b plus reduced-cost contributions of nonbasic
        // variables held at finite bounds.
        let mut dual_obj: f64 = y.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
        for j in 0..self.n_struct + (self.cols.len() - self.n_struct - self.nrows) {
            if self.state[j] == VarState::Basic || self.state[j] == VarState::Free {
                continue;
            }
            let v = self.nonbasic_value(j);
            if v != 0.0 {
                let mut d = self.cost[j];
                for &(i, a) in &self.cols[j] {
                    d -= y[i] * a;
                }
                dual_obj += d * v;
            }
        }
        let gap_tol = 1e-7 * (1.0 + sol.objective.abs());
        if (sol.objective - dual_obj).abs() > gap_tol {
            return false;
        }
        for (g, (row, &b)) in problem.ge_rows.iter().zip(&problem.ge_rhs).enumerate() {
            let act: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
            if ((act - b) * sol.duals_ge[g]).abs() > 1e-7 * (1.0 + sol.objective.abs()) * scale {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds(n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![lo; n], vec![hi; n])
    }

    #[test]
    fn single_variable_bound_row() {
        // minimize x subject to x >= 1
        let problem = LpProblem {
            objective: vec![1.0],
            ge_rows: vec![vec![1.0]],
            ge_rhs: vec![1.0],
            lower: vec![f64::NEG_INFINITY],
            upper: vec![f64::INFINITY],
            ..Default::default()
        };
        let sol = solve(&problem);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-9);
        assert!((sol.duals_ge[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_facet() {
        // minimize -x - y subject to x + y <= 1 (as -x - y >= -1), box [0,1]
        let (lower, upper) = bounds(2, 0.0, 1.0);
        let problem = LpProblem {
            objective: vec![-1.0, -1.0],
            ge_rows: vec![vec![-1.0, -1.0]],
            ge_rhs: vec![-1.0],
            lower,
            upper,
            ..Default::default()
        };
        let sol = solve(&problem);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.primal[0] + sol.primal[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x >= 2 with x <= 1
        let problem = LpProblem {
            objective: vec![1.0],
            ge_rows: vec![vec![1.0]],
            ge_rhs: vec![2.0],
            lower: vec![0.0],
            upper: vec![1.0],
            ..Default::default()
        };
        assert_eq!(solve(&problem).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let problem = LpProblem {
            objective: vec![-1.0],
            lower: vec![0.0],
            upper: vec![f64::INFINITY],
            ..Default::default()
        };
        assert_eq!(solve(&problem).status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_with_free_variable() {
        // minimize x + 2y subject to x + y = 3, y in [0, 1], x free
        let problem = LpProblem {
            objective: vec![1.0, 2.0],
            eq_rows: vec![vec![1.0, 1.0]],
            eq_rhs: vec![3.0],
            lower: vec![f64::NEG_INFINITY, 0.0],
            upper: vec![f64::INFINITY, 1.0],
            ..Default::default()
        };
        let sol = solve(&problem);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 3.0).abs() < 1e-9);
        assert!(sol.primal[1].abs() < 1e-9);
        // y = 1 on the equality row; reduced cost of y is 2 - 1 = 1 >= 0.
        assert!((sol.duals_eq[0] - 1.0).abs() < 1e-9);
        assert!((sol.reduced_costs[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn no_rows_bound_flips_only() {
        let problem = LpProblem {
            objective: vec![1.0, -1.0],
            lower: vec![-2.0, -2.0],
            upper: vec![3.0, 3.0],
            ..Default::default()
        };
        let sol = solve(&problem);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_eq!(sol.primal, vec![-2.0, 3.0]);
    }

    #[test]
    fn determinism_bitwise() {
        let problem = LpProblem {
            objective: vec![1.0, -2.0, 0.5],
            eq_rows: vec![vec![1.0, 1.0, 1.0]],
            eq_rhs: vec![2.0],
            ge_rows: vec![vec![1.0, -1.0, 0.0]],
            ge_rhs: vec![-1.0],
            lower: vec![0.0, 0.0, 0.0],
            upper: vec![2.0, 2.0, 2.0],
            ..Default::default()
        };
        let a = solve(&problem);
        let b = solve(&problem);
        assert_eq!(a.primal, b.primal);
        assert_eq!(a.duals_eq, b.duals_eq);
        assert_eq!(a.duals_ge, b.duals_ge);
        assert!(a.objective.to_bits() == b.objective.to_bits());
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Many redundant rows through the same vertex.
        let problem = LpProblem {
            objective: vec![-1.0, -1.0],
            ge_rows: vec![
                vec![-1.0, 0.0],
                vec![0.0, -1.0],
                vec![-1.0, -1.0],
                vec![-2.0, -2.0],
                vec![-1.0, -2.0],
                vec![-2.0, -1.0],
            ],
            ge_rhs: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            lower: vec![0.0, 0.0],
            upper: vec![5.0, 5.0],
            ..Default::default()
        };
        let sol = solve(&problem);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-9);
    }
}
