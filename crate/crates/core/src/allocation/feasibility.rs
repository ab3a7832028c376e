//! Second-order-cone feasibility subproblem of the max-min SINR bisection.
//!
//! With `psi = sqrt(rho)` and slacks `X_u`, `Y_u`, a target `gamma` is
//! achievable when some point satisfies, for every user `u = (k, j)`,
//!
//! ```text
//! || [X_u, Y_u, sigma_f] || <= (1/sqrt(gamma)) sum_{a serves j} psi_a^k c_ua
//! sum_{l != j} ( sum_{a serves l} psi_a^k c_ua )^2  <= X_u^2
//! sum_a sum_n (psi_a^n)^2 G_a^u beta_a^u            <= Y_u^2
//! ```
//!
//! together with `sum_n (psi_a^n)^2 <= budget_a` and `psi >= 0`, where
//! `c_ua = sqrt(G_a^u) lambda_a^u`.
//!
//! The check solves a max-margin version of this system with an
//! interior-point conic solver and re-verifies the returned point with
//! [`FeasibilityProblem::residual`], which is the authoritative test.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::config::{NetworkConfig, SolverOptions};
use crate::error::{Error, Result};
use crate::performance::{LambdaTable, PowerAllocation};
use crate::propagation::CouplingMatrix;

/// Data of one feasibility check. Everything except `gamma` depends only on
/// the coupling, so a problem is rebuilt across bisection steps with
/// [`FeasibilityProblem::with_gamma`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityProblem {
    pub gamma: f64,
    pub cells: usize,
    pub users_per_cell: usize,
    pub arrays_per_cell: usize,
    /// `sqrt(G_a^u) lambda_a^u`, row-major by user over all arrays.
    pub amplitude: Vec<f64>,
    /// `G_a^u beta_a^u`, row-major by user over all arrays.
    pub undirected_weight: Vec<f64>,
    pub budgets: Vec<f64>,
    pub noise: f64,
}

/// A candidate point: `psi` laid out like [`PowerAllocation::rho`].
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub psi: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Assignment {
    pub fn to_allocation(&self, users_per_cell: usize) -> PowerAllocation {
        PowerAllocation { users_per_cell, rho: self.psi.iter().map(|p| p * p).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Assignment),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }
}

/// Solver bookkeeping for one check.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SubproblemStats {
    pub iterations: u32,
    /// Normalized residual of the candidate point (0 when trivially feasible).
    pub residual: f64,
}

pub fn build_feasibility(gamma: f64, coupling: &CouplingMatrix, config: &NetworkConfig) -> FeasibilityProblem {
    let lambda = LambdaTable::new(coupling, config);
    let (n_users, n_arrays) = (coupling.num_users(), coupling.num_arrays());
    let mut amplitude = Vec::with_capacity(n_users * n_arrays);
    let mut undirected_weight = Vec::with_capacity(n_users * n_arrays);
    for u in 0..n_users {
        for a in 0..n_arrays {
            let g = coupling.gain(u, a);
            amplitude.push(g.sqrt() * lambda.get(u, a));
            undirected_weight.push(g * coupling.beta(u, a));
        }
    }
    FeasibilityProblem {
        gamma,
        cells: coupling.cells,
        users_per_cell: coupling.users_per_cell,
        arrays_per_cell: coupling.arrays_per_cell,
        amplitude,
        undirected_weight,
        budgets: vec![config.array_budget(); n_arrays],
        noise: config.forward_noise_w,
    }
}

impl FeasibilityProblem {
    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn num_arrays(&self) -> usize {
        self.cells * self.arrays_per_cell
    }

    pub fn num_psi(&self) -> usize {
        self.num_arrays() * self.users_per_cell
    }

    /// `psi` variables plus the two slacks per user.
    pub fn num_variables(&self) -> usize {
        self.num_psi() + 2 * self.num_users()
    }

    /// One SINR cone per user.
    pub fn cone_constraints(&self) -> usize {
        self.num_users()
    }

    /// Pilot-contamination and undirected-interference bounds.
    pub fn interference_constraints(&self) -> usize {
        2 * self.num_users()
    }

    pub fn budget_constraints(&self) -> usize {
        self.num_arrays()
    }

    pub fn nonnegativity_constraints(&self) -> usize {
        self.num_psi()
    }

    #[inline]
    fn amp(&self, u: usize, a: usize) -> f64 {
        self.amplitude[u * self.num_arrays() + a]
    }

    fn cell_arrays(&self, cell: usize) -> std::ops::Range<usize> {
        cell * self.arrays_per_cell..(cell + 1) * self.arrays_per_cell
    }

    /// `sum_{a serves cell} psi_a^k c_ua`.
    fn coherent(&self, psi: &[f64], u: usize, cell: usize) -> f64 {
        let k = u % self.users_per_cell;
        self.cell_arrays(cell).map(|a| psi[a * self.users_per_cell + k] * self.amp(u, a)).sum()
    }

    /// `(signal amplitude, pilot contamination, undirected)` for user `u`.
    pub fn user_terms(&self, psi: &[f64], u: usize) -> (f64, f64, f64) {
        let j = u / self.users_per_cell;
        let signal = self.coherent(psi, u, j);
        let contamination = (0..self.cells).filter(|&l| l != j).map(|l| self.coherent(psi, u, l).powi(2)).sum();
        let k_count = self.users_per_cell;
        let undirected = (0..self.num_arrays())
            .map(|a| {
                let power: f64 = psi[a * k_count..(a + 1) * k_count].iter().map(|p| p * p).sum();
                power * self.undirected_weight[u * self.num_arrays() + a]
            })
            .sum();
        (signal, contamination, undirected)
    }

    /// Largest normalized constraint violation of `point`. Cone violations
    /// are relative to `||[X, Y, sigma_f]||`, slack bounds relative to
    /// `X^2 + sigma_f^2` (resp. `Y^2`), budgets relative to the budget and
    /// negative entries relative to `sqrt(budget)`.
    pub fn residual(&self, point: &Assignment) -> f64 {
        let k_count = self.users_per_cell;
        let sigma2 = self.noise;
        let mut worst = 0.0f64;
        for u in 0..self.num_users() {
            let (signal, contamination, undirected) = self.user_terms(&point.psi, u);
            let (x, y) = (point.x[u], point.y[u]);
            let lhs = (x * x + y * y + sigma2).sqrt();
            if self.gamma > 0.0 {
                let rhs = signal / self.gamma.sqrt();
                worst = worst.max((lhs - rhs) / lhs);
            }
            worst = worst.max((contamination - x * x) / (x * x + sigma2));
            worst = worst.max((undirected - y * y) / (y * y + sigma2));
        }
        for (a, &b) in self.budgets.iter().enumerate() {
            let row = &point.psi[a * k_count..(a + 1) * k_count];
            let power: f64 = row.iter().map(|p| p * p).sum();
            worst = worst.max((power - b) / b);
            for &p in row {
                worst = worst.max(-p / b.sqrt());
            }
        }
        worst.max(0.0)
    }

    /// Smallest SINR over users achieved by `psi`.
    pub fn min_sinr(&self, psi: &[f64]) -> f64 {
        (0..self.num_users())
            .map(|u| {
                let (signal, contamination, undirected) = self.user_terms(psi, u);
                signal * signal / (contamination + undirected + self.noise)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Completes `psi` with the smallest admissible slacks.
    pub fn complete(&self, psi: Vec<f64>) -> Assignment {
        let (x, y) = (0..self.num_users())
            .map(|u| {
                let (_, c, d) = self.user_terms(&psi, u);
                (c.sqrt(), d.sqrt())
            })
            .unzip();
        Assignment { psi, x, y }
    }

    /// Upper bound on any achievable minimum SINR: the smallest over users of
    /// the interference-free SINR with every serving array at full budget.
    pub fn sinr_upper_bound(&self) -> f64 {
        (0..self.num_users())
            .map(|u| {
                let j = u / self.users_per_cell;
                let amp: f64 = self.cell_arrays(j).map(|a| self.budgets[a].sqrt() * self.amp(u, a)).sum();
                amp * amp / self.noise
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Triplet accumulator for the constraint matrix.
#[derive(Default)]
struct Triplets {
    rows: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    b: Vec<f64>,
}

impl Triplets {
    fn next_row(&mut self, b: f64) -> usize {
        self.b.push(b);
        self.b.len() - 1
    }

    fn push(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.rows.push(row);
            self.cols.push(col);
            self.vals.push(v);
        }
    }
}

/// Decides feasibility of `problem`. A `Feasible` verdict always carries a
/// point with `residual <= opts.feas_tol`.
pub fn check_feasibility(problem: &FeasibilityProblem, opts: &SolverOptions) -> Result<(Feasibility, SubproblemStats)> {
    let n_psi = problem.num_psi();
    if problem.gamma <= 0.0 {
        let point = problem.complete(vec![0.0; n_psi]);
        return Ok((Feasibility::Feasible(point), SubproblemStats::default()));
    }

    let n_arrays = problem.num_arrays();
    let n_users = problem.num_users();
    let k_count = problem.users_per_cell;
    let t_col = |a: usize| n_psi + a;
    let s_col = n_psi + n_arrays;
    let n_vars = s_col + 1;
    let scale: Vec<f64> = problem.budgets.iter().map(|b| b.sqrt()).collect();
    let sigma = problem.noise.sqrt();
    let inv_sqrt_gamma = 1.0 / problem.gamma.sqrt();

    // Variables are psi / sqrt(budget), t_a >= ||psi_a|| / sqrt(budget), and
    // the margin s. Each user cone is divided through by its largest
    // coefficient; the margin stays unscaled.
    let mut tr = Triplets::default();
    let mut cones = Vec::with_capacity(n_users + n_arrays + 1);
    for u in 0..n_users {
        let (j, k) = (u / k_count, u % k_count);
        let mut peak = 1.0f64;
        for (a, sc) in scale.iter().enumerate() {
            let c = problem.amp(u, a) * sc / sigma;
            let c = if a / problem.arrays_per_cell == j { c * inv_sqrt_gamma } else { c };
            peak = peak.max(c);
            let w = (problem.undirected_weight[u * n_arrays + a] * problem.budgets[a]).sqrt() / sigma;
            peak = peak.max(w);
        }
        let kappa = 1.0 / peak;

        let head = tr.next_row(0.0);
        for a in problem.cell_arrays(j) {
            let c = kappa * inv_sqrt_gamma * problem.amp(u, a) * scale[a] / sigma;
            tr.push(head, a * k_count + k, -c);
        }
        tr.push(head, s_col, 1.0);
        for l in (0..problem.cells).filter(|&l| l != j) {
            let row = tr.next_row(0.0);
            for a in problem.cell_arrays(l) {
                tr.push(row, a * k_count + k, -kappa * problem.amp(u, a) * scale[a] / sigma);
            }
        }
        for a in 0..n_arrays {
            let row = tr.next_row(0.0);
            let w = (problem.undirected_weight[u * n_arrays + a] * problem.budgets[a]).sqrt() / sigma;
            tr.push(row, t_col(a), -kappa * w);
        }
        tr.next_row(kappa);
        cones.push(SupportedConeT::SecondOrderConeT(1 + (problem.cells - 1) + n_arrays + 1));
    }
    for a in 0..n_arrays {
        let row = tr.next_row(0.0);
        tr.push(row, t_col(a), -1.0);
        for k in 0..k_count {
            let row = tr.next_row(0.0);
            tr.push(row, a * k_count + k, -1.0);
        }
        cones.push(SupportedConeT::SecondOrderConeT(1 + k_count));
    }
    for a in 0..n_arrays {
        let row = tr.next_row(1.0);
        tr.push(row, t_col(a), 1.0);
    }
    for i in 0..n_psi {
        let row = tr.next_row(0.0);
        tr.push(row, i, -1.0);
    }
    cones.push(SupportedConeT::NonnegativeConeT(n_arrays + n_psi));

    let m = tr.b.len();
    let a_mat = CscMatrix::new_from_triplets(m, n_vars, tr.rows, tr.cols, tr.vals);
    let p_mat = CscMatrix::zeros((n_vars, n_vars));
    let mut q = vec![0.0; n_vars];
    q[s_col] = -1.0;

    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_solver_iters)
        .tol_gap_abs(1e-7)
        .tol_gap_rel(1e-7)
        .tol_feas(1e-7)
        .build()
        .map_err(|e| Error::NumericalBreakdown(format!("solver settings: {e:?}")))?;
    let mut solver = DefaultSolver::new(&p_mat, &q, &a_mat, &tr.b, &cones, settings)
        .map_err(|e| Error::NumericalBreakdown(format!("solver setup: {e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let iterations = sol.iterations;

    if sol.status == SolverStatus::NumericalError && sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown(format!("solver status {:?}", sol.status)));
    }
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBreakdown("non-finite solver iterate".into()));
    }

    // project onto the box and the budget balls, then fill in the slacks
    let mut psi = vec![0.0; n_psi];
    for a in 0..n_arrays {
        let row: Vec<f64> = sol.x[a * k_count..(a + 1) * k_count].iter().map(|&v| v.max(0.0)).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let shrink = if norm > 1.0 { 1.0 / norm } else { 1.0 };
        for (k, v) in row.into_iter().enumerate() {
            psi[a * k_count + k] = v * shrink * scale[a];
        }
    }
    let point = problem.complete(psi);
    let residual = problem.residual(&point);
    if !residual.is_finite() {
        return Err(Error::NumericalBreakdown("non-finite residual".into()));
    }
    let stats = SubproblemStats { iterations, residual };
    if residual <= opts.feas_tol {
        Ok((Feasibility::Feasible(point), stats))
    } else {
        Ok((Feasibility::Infeasible, stats))
    }
}
