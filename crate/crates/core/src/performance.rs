//! Closed-form downlink SINR lower bound under MMSE estimation and conjugate
//! beamforming with pilot reuse across cells.
//!
//! For user `u = (k, j)` with forward powers `rho` the bound reads
//!
//! ```text
//! P   = | sum_{a serves j} sqrt(rho_a^u G_a^u) lambda_a^u |^2
//! I1  = sum_{l != j} | sum_{a serves l} sqrt(rho_a^(k,l) G_a^u) lambda_a^u |^2
//! I2  = sum_a rho_a G_a^u beta_a^u            (rho_a: total power of array a)
//! SINR = P / (I1 + I2 + sigma_f^2)
//! lambda_a^u = sqrt( M rho_r tau G_a^u beta_a^u^2 / (sigma_r^2 + rho_r tau sum_v G_a^(k,v) beta_a^(k,v)) )
//! ```
//!
//! where the sum over `v` runs over the users sharing pilot `k` in every cell.

use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::propagation::CouplingMatrix;

/// Forward-link powers, watts. Array `a` serves the `K` users of its cell;
/// entry `(a, k)` lives at `a * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub users_per_cell: usize,
    pub rho: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(n_arrays: usize, users_per_cell: usize) -> Self {
        Self { users_per_cell, rho: vec![0.0; n_arrays * users_per_cell] }
    }

    pub fn num_arrays(&self) -> usize {
        self.rho.len() / self.users_per_cell
    }

    #[inline]
    pub fn get(&self, a: usize, k: usize) -> f64 {
        self.rho[a * self.users_per_cell + k]
    }

    pub fn set(&mut self, a: usize, k: usize, v: f64) {
        self.rho[a * self.users_per_cell + k] = v;
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.rho[a * self.users_per_cell..(a + 1) * self.users_per_cell]
    }

    /// Total transmit power of array `a`.
    pub fn total(&self, a: usize) -> f64 {
        self.row(a).iter().sum()
    }

    pub fn totals(&self) -> Vec<f64> {
        (0..self.num_arrays()).map(|a| self.total(a)).collect()
    }

    /// Largest budget excess over all arrays, relative to the budget.
    pub fn budget_violation(&self, budget: f64) -> f64 {
        (0..self.num_arrays()).map(|a| (self.total(a) - budget) / budget).fold(0.0, f64::max)
    }

    /// Checks nonnegativity and per-array budgets up to relative slack `tol`.
    pub fn is_valid(&self, budget: f64, tol: f64) -> bool {
        self.rho.iter().all(|&r| r >= 0.0 && r.is_finite()) && self.budget_violation(budget) <= tol
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { users_per_cell: self.users_per_cell, rho: self.rho.iter().map(|r| r * c).collect() }
    }
}

/// `lambda_a^u` for every (user, array) pair, row-major by user.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaTable {
    n_arrays: usize,
    values: Vec<f64>,
}

impl LambdaTable {
    pub fn new(coupling: &CouplingMatrix, config: &NetworkConfig) -> Self {
        let n_arrays = coupling.num_arrays();
        let k_count = coupling.users_per_cell;
        let pilot_energy = config.reverse_power_w * config.pilot_length;
        // denominators per (array, pilot)
        let mut denom = vec![config.reverse_noise_w; n_arrays * k_count];
        for cell in 0..coupling.cells {
            for k in 0..k_count {
                let u = coupling.user(cell, k);
                for a in 0..n_arrays {
                    denom[a * k_count + k] += pilot_energy * coupling.gain(u, a) * coupling.beta(u, a);
                }
            }
        }
        let mut values = Vec::with_capacity(coupling.num_users() * n_arrays);
        for u in 0..coupling.num_users() {
            let k = coupling.pilot_of_user(u);
            for a in 0..n_arrays {
                let (g, b) = (coupling.gain(u, a), coupling.beta(u, a));
                let num = coupling.elements[a] * pilot_energy * g * b * b;
                values.push((num / denom[a * k_count + k]).sqrt());
            }
        }
        Self { n_arrays, values }
    }

    #[inline]
    pub fn get(&self, u: usize, a: usize) -> f64 {
        self.values[u * self.n_arrays + a]
    }
}

pub fn lambda_coeff(coupling: &CouplingMatrix, u: usize, a: usize, config: &NetworkConfig) -> f64 {
    let k = coupling.pilot_of_user(u);
    let pilot_energy = config.reverse_power_w * config.pilot_length;
    let contamination: f64 = (0..coupling.cells)
        .map(|v| {
            let w = coupling.user(v, k);
            coupling.gain(w, a) * coupling.beta(w, a)
        })
        .sum();
    let (g, b) = (coupling.gain(u, a), coupling.beta(u, a));
    let num = coupling.elements[a] * pilot_energy * g * b * b;
    (num / (config.reverse_noise_w + pilot_energy * contamination)).sqrt()
}

fn check_dims(coupling: &CouplingMatrix, allocation: &PowerAllocation) -> Result<()> {
    if allocation.users_per_cell != coupling.users_per_cell
        || allocation.rho.len() != coupling.num_arrays() * coupling.users_per_cell
    {
        return Err(Error::DimensionMismatch(format!(
            "allocation has {} entries with K = {}, coupling needs {} arrays x K = {}",
            allocation.rho.len(),
            allocation.users_per_cell,
            coupling.num_arrays(),
            coupling.users_per_cell
        )));
    }
    Ok(())
}

/// Decoding coefficients `epsilon_a^u` per user and serving array, computed
/// directly from large-scale quantities. Row-major, `arrays_per_cell` per user.
pub fn decoding_coefficients(
    coupling: &CouplingMatrix,
    allocation: &PowerAllocation,
    config: &NetworkConfig,
) -> Result<Vec<f64>> {
    check_dims(coupling, allocation)?;
    let pilot_energy = config.reverse_power_w * config.pilot_length;
    let apc = coupling.arrays_per_cell;
    let mut eps = Vec::with_capacity(coupling.num_users() * apc);
    for u in 0..coupling.num_users() {
        let (j, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
        for a in coupling.cell_arrays(j) {
            let contamination: f64 = (0..coupling.cells)
                .map(|l| {
                    let w = coupling.user(l, k);
                    coupling.gain(w, a) * coupling.beta(w, a)
                })
                .sum();
            let num = (coupling.elements[a] * pilot_energy * allocation.get(a, k)).sqrt()
                * coupling.gain(u, a)
                * coupling.beta(u, a);
            eps.push(num / (config.reverse_noise_w + pilot_energy * contamination).sqrt());
        }
    }
    Ok(eps)
}

/// Per-user terms of the bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserSinr {
    pub signal: f64,
    pub pilot_contamination: f64,
    pub undirected: f64,
    pub sinr: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrBreakdown {
    pub arrays_per_cell: usize,
    pub users: Vec<UserSinr>,
    /// Decoding coefficients, `arrays_per_cell` entries per user.
    pub epsilon: Vec<f64>,
}

impl SinrBreakdown {
    pub fn sinr(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.sinr).collect()
    }

    pub fn rates(&self) -> Vec<f64> {
        self.users.iter().map(|u| u.rate).collect()
    }

    pub fn min_sinr(&self) -> f64 {
        self.users.iter().map(|u| u.sinr).fold(f64::INFINITY, f64::min)
    }

    pub fn min_rate(&self) -> f64 {
        self.users.iter().map(|u| u.rate).fold(f64::INFINITY, f64::min)
    }

    pub fn epsilon(&self, u: usize) -> &[f64] {
        &self.epsilon[u * self.arrays_per_cell..(u + 1) * self.arrays_per_cell]
    }
}

/// Coherent amplitude `sum_{a serves cell} sqrt(rho_a^k G_a^u) lambda_a^u`.
#[inline]
fn coherent_amplitude(
    coupling: &CouplingMatrix,
    lambda: &LambdaTable,
    allocation: &PowerAllocation,
    u: usize,
    cell: usize,
    k: usize,
) -> f64 {
    coupling.cell_arrays(cell).map(|a| (allocation.get(a, k) * coupling.gain(u, a)).sqrt() * lambda.get(u, a)).sum()
}

pub fn evaluate_sinr(
    coupling: &CouplingMatrix,
    allocation: &PowerAllocation,
    config: &NetworkConfig,
) -> Result<SinrBreakdown> {
    check_dims(coupling, allocation)?;
    let lambda = LambdaTable::new(coupling, config);
    let totals = allocation.totals();
    let apc = coupling.arrays_per_cell;
    let mut users = Vec::with_capacity(coupling.num_users());
    let mut epsilon = Vec::with_capacity(coupling.num_users() * apc);
    for u in 0..coupling.num_users() {
        let (j, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
        for a in coupling.cell_arrays(j) {
            epsilon.push((allocation.get(a, k) * coupling.gain(u, a)).sqrt() * lambda.get(u, a));
        }
        let signal = coherent_amplitude(coupling, &lambda, allocation, u, j, k).powi(2);
        let pilot_contamination: f64 = (0..coupling.cells)
            .filter(|&l| l != j)
            .map(|l| coherent_amplitude(coupling, &lambda, allocation, u, l, k).powi(2))
            .sum();
        let undirected: f64 =
            (0..coupling.num_arrays()).map(|a| totals[a] * coupling.gain(u, a) * coupling.beta(u, a)).sum();
        let sinr = signal / (pilot_contamination + undirected + config.forward_noise_w);
        users.push(UserSinr { signal, pilot_contamination, undirected, sinr, rate: (1.0 + sinr).log2() });
    }
    Ok(SinrBreakdown { arrays_per_cell: apc, users, epsilon })
}

/// Per-user SINR limit as the element count grows without bound: the ratio
/// of signal to pilot contamination with `lambda / sqrt(M)` in place of
/// `lambda`. Users without pilot contamination report `f64::INFINITY`.
pub fn asymptotic_sinr(
    coupling: &CouplingMatrix,
    allocation: &PowerAllocation,
    config: &NetworkConfig,
) -> Result<Vec<f64>> {
    check_dims(coupling, allocation)?;
    let unit = coupling.with_elements(1.0);
    let lambda = LambdaTable::new(&unit, config);
    Ok((0..coupling.num_users())
        .map(|u| {
            let (j, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
            let signal = coherent_amplitude(&unit, &lambda, allocation, u, j, k).powi(2);
            let contamination: f64 = (0..coupling.cells)
                .filter(|&l| l != j)
                .map(|l| coherent_amplitude(&unit, &lambda, allocation, u, l, k).powi(2))
                .sum();
            if contamination > 0.0 {
                signal / contamination
            } else {
                f64::INFINITY
            }
        })
        .collect())
}

/// Empirical distribution of user rates pooled over drops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCdf {
    sorted: Vec<f64>,
}

impl RateCdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if samples.iter().any(|v| v.is_nan()) {
            return Err(Error::NumericalBreakdown("NaN rate sample".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Percentile `p` in `[0, 100]` with lower interpolation: the sample at
    /// index `floor(p/100 * (n - 1))` of the sorted data.
    pub fn percentile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let idx = ((p.clamp(0.0, 100.0) / 100.0) * (n - 1) as f64 + 1e-9).floor() as usize;
        self.sorted[idx.min(n - 1)]
    }

    /// Rate achieved by 95% of users.
    pub fn likely_rate_95(&self) -> f64 {
        self.percentile(5.0)
    }

    /// Fraction of samples `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

pub fn rate_cdf(breakdowns: &[SinrBreakdown]) -> Result<RateCdf> {
    RateCdf::from_samples(breakdowns.iter().flat_map(|b| b.rates()).collect())
}
