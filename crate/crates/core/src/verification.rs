//! Monte Carlo check of the closed-form bound.
//!
//! Each trial draws Rayleigh channels, simulates the uplink pilot phase with
//! MMSE estimation at every array, applies conjugate beamforming with the
//! given powers and splits each user's received sample into five terms:
//!
//! * `T0` the deterministic-gain part the user decodes with its
//!   coefficients, `s * sum_a eps_a`;
//! * `T1` the fluctuation of the own beamforming gain around its mean;
//! * `T2` coherent leakage from copilot users' beams in other cells;
//! * `T3` beams of all other users;
//! * `T4` leakage through the estimation error, plus receiver noise.
//!
//! The split uses simulator-side knowledge of both the estimate and the
//! error, so it is an oracle rather than a receiver algorithm.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{Error, Result};
use crate::performance::{evaluate_sinr, LambdaTable, PowerAllocation};
use crate::propagation::{complex_normal, sample_small_scale, CouplingMatrix, SmallScaleBlock};

/// MMSE channel estimates for one coherence block.
#[derive(Debug, Clone)]
pub struct EstimationModel {
    pub n_arrays: usize,
    pub elements: usize,
    /// Scaling `theta` applied to the de-spread pilot observation, per (user, array).
    pub theta: Vec<f64>,
    pub ghat: Vec<Complex64>,
    pub gtilde: Vec<Complex64>,
}

impl EstimationModel {
    fn slot(&self, u: usize, a: usize) -> std::ops::Range<usize> {
        let start = (u * self.n_arrays + a) * self.elements;
        start..start + self.elements
    }

    pub fn ghat(&self, u: usize, a: usize) -> &[Complex64] {
        &self.ghat[self.slot(u, a)]
    }

    pub fn gtilde(&self, u: usize, a: usize) -> &[Complex64] {
        &self.gtilde[self.slot(u, a)]
    }
}

fn integer_elements(coupling: &CouplingMatrix) -> Result<usize> {
    let m = coupling.elements.first().copied().unwrap_or(0.0);
    if coupling.elements.iter().any(|&e| e != m) || m.fract() != 0.0 || m < 1.0 {
        return Err(Error::InvalidConfig("Monte Carlo needs the same integer element count on every array".into()));
    }
    Ok(m as usize)
}

/// Simulates pilot reception at every array and forms the MMSE estimates of
/// all user channels.
pub fn pilot_phase<R: rand::Rng + ?Sized>(
    coupling: &CouplingMatrix,
    small_scale: &SmallScaleBlock,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<EstimationModel> {
    let m = integer_elements(coupling)?;
    let (n_users, n_arrays) = (coupling.num_users(), coupling.num_arrays());
    if small_scale.n_users != n_users || small_scale.n_arrays != n_arrays || small_scale.elements != m {
        return Err(Error::DimensionMismatch(format!(
            "small-scale block is {}x{}x{}, expected {n_users}x{n_arrays}x{m}",
            small_scale.n_users, small_scale.n_arrays, small_scale.elements
        )));
    }
    let k_count = coupling.users_per_cell;
    let pilot_energy = config.reverse_power_w * config.pilot_length;
    let amp = pilot_energy.sqrt();
    let noise_amp = config.reverse_noise_w.sqrt();

    let g = |u: usize, a: usize| {
        let b = coupling.beta(u, a).sqrt();
        small_scale.vector(u, a).iter().map(move |h| h * b)
    };

    // de-spread observation per (array, pilot)
    let mut observed = vec![Complex64::new(0.0, 0.0); n_arrays * k_count * m];
    let mut denom = vec![config.reverse_noise_w; n_arrays * k_count];
    for a in 0..n_arrays {
        for k in 0..k_count {
            let obs = &mut observed[(a * k_count + k) * m..(a * k_count + k + 1) * m];
            for cell in 0..coupling.cells {
                let u = coupling.user(cell, k);
                let weight = amp * coupling.gain(u, a).sqrt();
                for (o, gv) in obs.iter_mut().zip(g(u, a)) {
                    *o += gv * weight;
                }
                denom[a * k_count + k] += pilot_energy * coupling.gain(u, a) * coupling.beta(u, a);
            }
            for o in obs.iter_mut() {
                *o += complex_normal(rng) * noise_amp;
            }
        }
    }

    let mut theta = Vec::with_capacity(n_users * n_arrays);
    let mut ghat = Vec::with_capacity(n_users * n_arrays * m);
    let mut gtilde = Vec::with_capacity(n_users * n_arrays * m);
    for u in 0..n_users {
        let k = coupling.pilot_of_user(u);
        for a in 0..n_arrays {
            let th = amp * coupling.gain(u, a).sqrt() * coupling.beta(u, a) / denom[a * k_count + k];
            theta.push(th);
            let obs = &observed[(a * k_count + k) * m..(a * k_count + k + 1) * m];
            for (o, gv) in obs.iter().zip(g(u, a)) {
                let est = o * th;
                ghat.push(est);
                gtilde.push(gv - est);
            }
        }
    }
    Ok(EstimationModel { n_arrays, elements: m, theta, ghat, gtilde })
}

/// One trial's received signal per user, split into its five terms.
#[derive(Debug, Clone, PartialEq)]
pub struct TermDecomposition {
    /// `terms[u] = [T0, T1, T2, T3, T4]`.
    pub terms: Vec<[Complex64; 5]>,
    /// Received sample computed directly from the transmitted vectors.
    pub received: Vec<Complex64>,
    pub symbols: Vec<Complex64>,
    /// Receiver noise included in `T4`.
    pub noise: Vec<Complex64>,
}

#[inline]
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Conjugate beamforming with the estimates in `est`, followed by reception
/// at every user.
pub fn beamform_and_receive<R: rand::Rng + ?Sized>(
    est: &EstimationModel,
    allocation: &PowerAllocation,
    symbols: &[Complex64],
    coupling: &CouplingMatrix,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<TermDecomposition> {
    let (n_users, n_arrays) = (coupling.num_users(), coupling.num_arrays());
    let k_count = coupling.users_per_cell;
    if symbols.len() != n_users
        || allocation.rho.len() != n_arrays * k_count
        || est.n_arrays != n_arrays
        || est.ghat.len() != n_users * n_arrays * est.elements
    {
        return Err(Error::DimensionMismatch("symbols, allocation or estimates do not match the coupling".into()));
    }
    let lambda = LambdaTable::new(coupling, config);
    let m = est.elements;

    // beam weight of user n on array a: sqrt(rho) / lambda
    let weight = |a: usize, k: usize| {
        let owner = coupling.user(coupling.serving[a], k);
        allocation.get(a, k).sqrt() / lambda.get(owner, a)
    };
    // transmitted row vectors x_a, stored conjugated-free as sum_n w s conj(ghat)
    let mut tx = vec![Complex64::new(0.0, 0.0); n_arrays * m];
    for a in 0..n_arrays {
        let cell = coupling.serving[a];
        for k in 0..k_count {
            let owner = coupling.user(cell, k);
            let c = weight(a, k) * symbols[owner];
            for (x, gh) in tx[a * m..(a + 1) * m].iter_mut().zip(est.ghat(owner, a)) {
                *x += gh.conj() * c;
            }
        }
    }

    let noise_amp = config.forward_noise_w.sqrt();
    let mut terms = Vec::with_capacity(n_users);
    let mut received = Vec::with_capacity(n_users);
    let mut noises = Vec::with_capacity(n_users);
    for u in 0..n_users {
        let (j, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
        let noise = complex_normal(rng) * noise_amp;
        let mut t = [Complex64::new(0.0, 0.0); 5];
        let mut direct = noise;
        for a in 0..n_arrays {
            let g_amp = coupling.gain(u, a).sqrt();
            let cell = coupling.serving[a];
            let ghat_u = est.ghat(u, a);
            let gtilde_u = est.gtilde(u, a);
            // direct: sqrt(G) x_a (ghat + gtilde)
            let x = &tx[a * m..(a + 1) * m];
            let through: Complex64 = x.iter().zip(ghat_u.iter().zip(gtilde_u)).map(|(xv, (h, e))| xv * (h + e)).sum();
            direct += through * g_amp;
            t[4] += x.iter().zip(gtilde_u).map(|(xv, e)| xv * e).sum::<Complex64>() * g_amp;

            for n in 0..k_count {
                let owner = coupling.user(cell, n);
                let coef = weight(a, n) * g_amp;
                let ip = inner(est.ghat(owner, a), ghat_u);
                let s = symbols[owner];
                if n != k {
                    t[3] += ip * coef * s;
                } else if cell != j {
                    t[2] += ip * coef * s;
                } else {
                    // own beam: split the gain into its mean lambda^2 and the fluctuation
                    let mean = lambda.get(u, a).powi(2);
                    t[0] += coef * mean * s;
                    t[1] += (ip - mean) * coef * s;
                }
            }
        }
        t[4] += noise;
        noises.push(noise);
        terms.push(t);
        received.push(direct);
    }
    Ok(TermDecomposition { terms, received, symbols: symbols.to_vec(), noise: noises })
}

/// Monte Carlo statistics for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserBoundCheck {
    /// Empirical variances of `T0..T4`.
    pub variance: [f64; 5],
    /// `|corr(Ti, Tj)|`, row-major 5x5.
    pub correlation: [[f64; 5]; 5],
    /// `Var[T1] + Var[T3] + Var[T4 - w]`, with the noise samples `w` removed
    /// exactly rather than through their variance.
    pub undirected_noiseless: f64,
    /// `Var[T0] / sum Var[T1..T4]`.
    pub empirical_sinr: f64,
    pub signal: f64,
    pub pilot_contamination: f64,
    pub undirected: f64,
    pub sinr: f64,
    /// Exact `E|T2|^2`: pilot contamination plus the beam-gain fluctuation
    /// of the copilot beams.
    pub expected_t2: f64,
    /// Largest `|T0 - s * sum eps|` over trials.
    pub t0_error: f64,
    /// Largest `|y - sum T|` over trials, relative to `sqrt(E|y|^2)`.
    pub split_error: f64,
}

impl UserBoundCheck {
    /// `Var[T1] + Var[T3] + Var[T4] - sigma_f^2`.
    pub fn undirected_empirical(&self, noise: f64) -> f64 {
        self.variance[1] + self.variance[3] + self.variance[4] - noise
    }

    pub fn max_correlation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..5 {
            for j in i + 1..5 {
                worst = worst.max(self.correlation[i][j]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub trials: usize,
    pub elements: usize,
    pub users: Vec<UserBoundCheck>,
}

pub const MIN_TRIALS: usize = 100;

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64 + 1);
    rng
}

/// Runs `trials` independent coherence blocks and compares the empirical
/// term variances with the closed-form bound.
pub fn validate_bound(
    coupling: &CouplingMatrix,
    allocation: &PowerAllocation,
    config: &NetworkConfig,
    trials: usize,
) -> Result<BoundReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidConfig(format!("at least {MIN_TRIALS} trials required, got {trials}")));
    }
    let m = integer_elements(coupling)?;
    let analytic = evaluate_sinr(coupling, allocation, config)?;
    let n_users = coupling.num_users();
    let n_arrays = coupling.num_arrays();

    let samples: Vec<TermDecomposition> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            let block = sample_small_scale(n_users, n_arrays, m, &mut rng);
            let est = pilot_phase(coupling, &block, config, &mut rng)?;
            let symbols: Vec<Complex64> = (0..n_users).map(|_| complex_normal(&mut rng)).collect();
            beamform_and_receive(&est, allocation, &symbols, coupling, config, &mut rng)
        })
        .collect::<Result<_>>()?;

    let lambda = LambdaTable::new(coupling, config);
    let n = trials as f64;
    let users = (0..n_users)
        .map(|u| {
            let (j, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
            let mut mean = [Complex64::new(0.0, 0.0); 5];
            for s in &samples {
                for (m, t) in mean.iter_mut().zip(&s.terms[u]) {
                    *m += t / n;
                }
            }
            let mut cov = [[Complex64::new(0.0, 0.0); 5]; 5];
            for s in &samples {
                let d: Vec<Complex64> = (0..5).map(|i| s.terms[u][i] - mean[i]).collect();
                for i in 0..5 {
                    for jj in 0..5 {
                        cov[i][jj] += d[i] * d[jj].conj() / n;
                    }
                }
            }
            let variance: [f64; 5] = std::array::from_fn(|i| cov[i][i].re);
            let correlation: [[f64; 5]; 5] = std::array::from_fn(|i| {
                std::array::from_fn(|jj| cov[i][jj].norm() / (variance[i] * variance[jj]).sqrt())
            });

            let leak_mean = samples.iter().map(|s| s.terms[u][4] - s.noise[u]).sum::<Complex64>() / n;
            let leak_var = samples.iter().map(|s| (s.terms[u][4] - s.noise[u] - leak_mean).norm_sqr()).sum::<f64>() / n;
            let eps_sum: f64 = analytic.epsilon(u).iter().sum();
            let t0_error = samples.iter().map(|s| (s.terms[u][0] - s.symbols[u] * eps_sum).norm()).fold(0.0, f64::max);
            let power: f64 = samples.iter().map(|s| s.received[u].norm_sqr()).sum::<f64>() / n;
            let split_error = samples
                .iter()
                .map(|s| (s.received[u] - s.terms[u].iter().sum::<Complex64>()).norm())
                .fold(0.0, f64::max)
                / power.sqrt();

            let fluctuation: f64 = (0..coupling.cells)
                .filter(|&l| l != j)
                .flat_map(|l| coupling.cell_arrays(l))
                .map(|a| allocation.get(a, k) * coupling.gain(u, a) * lambda.get(u, a).powi(2) / m as f64)
                .sum();
            let us = &analytic.users[u];
            UserBoundCheck {
                variance,
                correlation,
                undirected_noiseless: variance[1] + variance[3] + leak_var,
                empirical_sinr: variance[0] / variance[1..].iter().sum::<f64>(),
                signal: us.signal,
                pilot_contamination: us.pilot_contamination,
                undirected: us.undirected,
                sinr: us.sinr,
                expected_t2: us.pilot_contamination + fluctuation,
                t0_error,
                split_error,
            }
        })
        .collect();
    Ok(BoundReport { trials, elements: m, users })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AntennaMode;

    fn two_cell() -> (CouplingMatrix, NetworkConfig) {
        let cfg = NetworkConfig {
            cells: 2,
            users_per_cell: 2,
            antennas_per_array: 8.0,
            pilot_length: 2.0,
            ..Default::default()
        };
        let mut gain = vec![0.01; 4 * 6];
        let mut beta = vec![0.0; 4 * 6];
        for u in 0..4 {
            for a in 0..6 {
                if u / 2 == a / 3 {
                    gain[u * 6 + a] = 2.98;
                }
                beta[u * 6 + a] = 1e-12 * (1.0 + ((u * 7 + a * 3) % 5) as f64);
            }
        }
        gain[6 + 3] = 2.98; // one cross-cell main-lobe path
        (CouplingMatrix::from_parts(2, 2, 3, 8.0, gain, beta).unwrap(), cfg)
    }

    #[test]
    fn noiseless_single_cell_estimates_exactly() {
        let cfg = NetworkConfig {
            cells: 1,
            users_per_cell: 1,
            mode: AntennaMode::Omni,
            antennas_per_array: 4.0,
            pilot_length: 1.0,
            reverse_noise_w: 1e-40,
            ..Default::default()
        };
        let m = CouplingMatrix::from_parts(1, 1, 1, 4.0, vec![1.0], vec![1e-10]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let block = sample_small_scale(1, 1, 4, &mut rng);
        let est = pilot_phase(&m, &block, &cfg, &mut rng).unwrap();
        for (e, h) in est.gtilde.iter().zip(block.vector(0, 0)) {
            assert!(e.norm() < 1e-9 * (h * 1e-5).norm().max(1e-5));
        }
    }

    #[test]
    fn estimate_and_error_variances() {
        let (m, cfg) = two_cell();
        let lambda = LambdaTable::new(&m, &cfg);
        let trials = 10_000;
        let (mut vh, mut ve, mut cross) = (vec![0.0; 24], vec![0.0; 24], vec![Complex64::new(0.0, 0.0); 24]);
        for t in 0..trials {
            let mut rng = trial_rng(99, t);
            let block = sample_small_scale(4, 6, 8, &mut rng);
            let est = pilot_phase(&m, &block, &cfg, &mut rng).unwrap();
            for u in 0..4 {
                for a in 0..6 {
                    let (h, e) = (est.ghat(u, a), est.gtilde(u, a));
                    vh[u * 6 + a] += h.iter().map(|z| z.norm_sqr()).sum::<f64>();
                    ve[u * 6 + a] += e.iter().map(|z| z.norm_sqr()).sum::<f64>();
                    cross[u * 6 + a] += inner(h, e);
                }
            }
        }
        let count = (trials * 8) as f64;
        for u in 0..4 {
            for a in 0..6 {
                let l2m = lambda.get(u, a).powi(2) / 8.0;
                let b = m.beta(u, a);
                assert!((vh[u * 6 + a] / count / l2m - 1.0).abs() < 0.05);
                assert!((ve[u * 6 + a] / count / (b - l2m) - 1.0).abs() < 0.05);
                let scale = (l2m * (b - l2m)).sqrt();
                assert!((cross[u * 6 + a] / count).norm() < 0.05 * scale);
            }
        }
    }

    #[test]
    fn terms_add_up_and_t0_is_exact() {
        let (m, cfg) = two_cell();
        let alloc = PowerAllocation { users_per_cell: 2, rho: (0..12).map(|i| 0.05 + 0.01 * i as f64).collect() };
        let report = validate_bound(&m, &alloc, &cfg, 200).unwrap();
        for u in &report.users {
            assert!(u.t0_error <= 1e-12 * u.signal.sqrt());
            assert!(u.split_error < 1e-10);
        }
    }

    #[test]
    fn rejects_fractional_elements() {
        let (m, cfg) = two_cell();
        let alloc = PowerAllocation::zeros(6, 2);
        let frac = m.with_elements(8.5);
        assert!(validate_bound(&frac, &alloc, &cfg, 200).is_err());
        assert!(validate_bound(&m, &alloc, &cfg, 10).is_err());
    }

    #[test]
    fn reproducible_under_seed() {
        let (m, cfg) = two_cell();
        let alloc = PowerAllocation { users_per_cell: 2, rho: vec![0.1; 12] };
        let a = validate_bound(&m, &alloc, &cfg, 150).unwrap();
        let b = validate_bound(&m, &alloc, &cfg, 150).unwrap();
        assert_eq!(a, b);
    }
}
