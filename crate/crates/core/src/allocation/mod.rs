//! Forward-link power allocation: uniform (UPA), centralized max-min (CPA)
//! and decentralized local max-min (DPA).

pub mod feasibility;

use std::collections::BTreeSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::Result;
use crate::geometry::CellLayout;
use crate::performance::PowerAllocation;
use crate::propagation::CouplingMatrix;

pub use feasibility::{
    build_feasibility, check_feasibility, Assignment, Feasibility, FeasibilityProblem, SubproblemStats,
};

/// Allocation strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Upa,
    Cpa,
    Dpa,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scheme::Upa => "upa",
            Scheme::Cpa => "cpa",
            Scheme::Dpa => "dpa",
        })
    }
}

impl std::str::FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "upa" => Ok(Scheme::Upa),
            "cpa" => Ok(Scheme::Cpa),
            "dpa" => Ok(Scheme::Dpa),
            other => Err(crate::Error::InvalidConfig(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Every array splits its budget evenly over the users of its cell.
pub fn upa(config: &NetworkConfig, layout: &CellLayout) -> PowerAllocation {
    let k = config.users_per_cell;
    let rho = layout.arrays.iter().flat_map(|a| std::iter::repeat_n(a.budget / k as f64, k)).collect();
    PowerAllocation { users_per_cell: k, rho }
}

/// Trace of one bisection run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport {
    /// Minimum SINR certified by the last feasible point.
    pub gamma_star: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// `(gamma_min, gamma_max)` before each step, and once at exit.
    pub bracket_history: Vec<(f64, f64)>,
    /// Residual of the returned point.
    pub feasibility_residual: f64,
    pub bisection_iterations: u32,
    pub subproblem_iterations: u64,
    pub wall_time_s: f64,
}

impl PartialEq for SolverReport {
    /// Compares the numerical trace; wall time is ignored.
    fn eq(&self, o: &Self) -> bool {
        self.gamma_star == o.gamma_star
            && self.gamma_min == o.gamma_min
            && self.gamma_max == o.gamma_max
            && self.bracket_history == o.bracket_history
            && self.feasibility_residual == o.feasibility_residual
            && self.bisection_iterations == o.bisection_iterations
            && self.subproblem_iterations == o.subproblem_iterations
    }
}

/// Max-min SINR allocation by bisection over conic feasibility checks.
pub fn cpa(coupling: &CouplingMatrix, config: &NetworkConfig) -> Result<(PowerAllocation, SolverReport)> {
    let start = Instant::now();
    let opts = &config.solver;
    let base = build_feasibility(0.0, coupling, config);
    let mut gamma_min = 0.0;
    let mut gamma_max = base.sinr_upper_bound();
    let mut best = base.complete(vec![0.0; base.num_psi()]);
    let mut residual = 0.0;
    let mut history = Vec::new();
    let mut iterations = 0u32;
    let mut sub_iterations = 0u64;

    while gamma_max - gamma_min > opts.delta_rel * gamma_max && iterations < opts.max_bisection_iters {
        history.push((gamma_min, gamma_max));
        let gamma = 0.5 * (gamma_min + gamma_max);
        let (verdict, stats) = check_feasibility(&base.with_gamma(gamma), opts)?;
        sub_iterations += u64::from(stats.iterations);
        iterations += 1;
        match verdict {
            Feasibility::Feasible(point) => {
                // the point usually certifies more than the level it was asked for
                gamma_min = base.min_sinr(&point.psi).clamp(gamma, gamma_max);
                best = point;
                residual = stats.residual;
            }
            Feasibility::Infeasible => gamma_max = gamma,
        }
    }
    history.push((gamma_min, gamma_max));

    let report = SolverReport {
        gamma_star: gamma_min,
        gamma_min,
        gamma_max,
        bracket_history: history,
        feasibility_residual: residual,
        bisection_iterations: iterations,
        subproblem_iterations: sub_iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((best.to_allocation(coupling.users_per_cell), report))
}

/// Cells, arrays and users one array considers in the decentralized scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subnetwork {
    pub center: usize,
    /// Member cells in ascending order.
    pub cells: Vec<usize>,
    pub arrays: Vec<usize>,
    pub users: Vec<usize>,
}

/// `cell` and every cell within `config.solver.dpa_rings` hops of it on the
/// torus, with their arrays and users.
pub fn local_subnetwork(layout: &CellLayout, cell: usize, config: &NetworkConfig) -> Subnetwork {
    let mut members = BTreeSet::from([cell]);
    let mut frontier = vec![cell];
    for _ in 0..config.solver.dpa_rings {
        let mut next = Vec::new();
        for &c in &frontier {
            for n in layout.neighbors(c) {
                if members.insert(n) {
                    next.push(n);
                }
            }
        }
        frontier = next;
    }
    let cells: Vec<usize> = members.into_iter().collect();
    let k = config.users_per_cell;
    Subnetwork {
        center: cell,
        arrays: cells.iter().flat_map(|&c| layout.cell_arrays(c)).collect(),
        users: cells.iter().flat_map(|&c| c * k..(c + 1) * k).collect(),
        cells,
    }
}

/// Decentralized allocation with the per-cell bisection reports.
///
/// The arrays of one cell share a sub-network, so the local problem is
/// solved once per cell and each array keeps its own row.
pub fn dpa_with_reports(
    coupling: &CouplingMatrix,
    layout: &CellLayout,
    config: &NetworkConfig,
) -> Result<(PowerAllocation, Vec<SolverReport>)> {
    let k = coupling.users_per_cell;
    let apc = coupling.arrays_per_cell;
    let local: Vec<(PowerAllocation, SolverReport, usize)> = (0..coupling.cells)
        .into_par_iter()
        .map(|cell| {
            let sub = local_subnetwork(layout, cell, config);
            let (alloc, report) = cpa(&coupling.restrict(&sub.cells), config)?;
            let pos = sub.cells.iter().position(|&c| c == cell).expect("center is a member");
            Ok((alloc, report, pos))
        })
        .collect::<Result<_>>()?;

    let mut out = PowerAllocation::zeros(coupling.num_arrays(), k);
    let mut reports = Vec::with_capacity(local.len());
    for (cell, (alloc, report, pos)) in local.into_iter().enumerate() {
        for i in 0..apc {
            let (global, sub) = (cell * apc + i, pos * apc + i);
            out.rho[global * k..(global + 1) * k].copy_from_slice(alloc.row(sub));
        }
        reports.push(report);
    }
    Ok((out, reports))
}

pub fn dpa(coupling: &CouplingMatrix, layout: &CellLayout, config: &NetworkConfig) -> Result<PowerAllocation> {
    dpa_with_reports(coupling, layout, config).map(|(a, _)| a)
}
