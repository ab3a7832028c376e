//! Reference implementations shared by the integration tests. These are
//! written as plain loops over cells, arrays and users and do not call into
//! the library's evaluation code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sectored_mimo::{AntennaMode, CouplingMatrix, NetworkConfig, PowerAllocation};

/// Hand-built network with explicit gains and large-scale coefficients.
#[derive(Debug, Clone)]
pub struct Instance {
    pub cells: usize,
    pub k: usize,
    pub apc: usize,
    pub m: f64,
    /// `gain[u][a]` with `u = cell * k + pilot` and `a = cell * apc + i`.
    pub gain: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub cfg: NetworkConfig,
}

impl Instance {
    /// Tables of a library coupling matrix, for checking library output on
    /// real drops. All arrays must share one element count.
    pub fn from_coupling(c: &CouplingMatrix, cfg: &NetworkConfig) -> Self {
        let n = c.num_arrays();
        let rows = |t: &[f64]| t.chunks(n).map(<[f64]>::to_vec).collect();
        assert!(c.elements.iter().all(|&e| e == c.elements[0]));
        Instance {
            cells: c.cells,
            k: c.users_per_cell,
            apc: c.arrays_per_cell,
            m: c.elements[0],
            gain: rows(&c.gain),
            beta: rows(&c.beta),
            cfg: cfg.clone(),
        }
    }

    pub fn coupling(&self) -> CouplingMatrix {
        let flat = |t: &Vec<Vec<f64>>| t.iter().flatten().copied().collect::<Vec<_>>();
        CouplingMatrix::from_parts(self.cells, self.k, self.apc, self.m, flat(&self.gain), flat(&self.beta)).unwrap()
    }

    pub fn arrays(&self) -> usize {
        self.cells * self.apc
    }

    pub fn budget(&self) -> f64 {
        self.cfg.forward_power_w / self.apc as f64
    }
}

/// Random instance with gains drawn from the two lobe values and
/// coefficients log-uniform over five decades.
pub fn random_instance(rng: &mut ChaCha8Rng, cells: usize, k: usize, apc: usize, m: f64) -> Instance {
    let mode = if apc == 1 { AntennaMode::Omni } else { AntennaMode::Directional };
    let cfg = NetworkConfig { cells, users_per_cell: k, antennas_per_array: m, mode, ..Default::default() };
    let (n_users, n_arrays) = (cells * k, cells * apc);
    let mut gain = vec![vec![0.0; n_arrays]; n_users];
    let mut beta = vec![vec![0.0; n_arrays]; n_users];
    for u in 0..n_users {
        for a in 0..n_arrays {
            gain[u][a] = if apc == 1 {
                1.0
            } else if rng.gen_bool(0.4) {
                cfg.gain_main
            } else {
                cfg.gain_back
            };
            beta[u][a] = 10f64.powf(rng.gen_range(-14.0..-9.0));
        }
    }
    Instance { cells, k, apc, m, gain, beta, cfg }
}

pub fn random_allocation(rng: &mut ChaCha8Rng, inst: &Instance) -> PowerAllocation {
    let b = inst.budget();
    let mut rho = Vec::new();
    for _ in 0..inst.arrays() {
        let w: Vec<f64> = (0..inst.k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let scale = rng.gen_range(0.1..1.0) * b / w.iter().sum::<f64>();
        rho.extend(w.into_iter().map(|x| x * scale));
    }
    PowerAllocation { users_per_cell: inst.k, rho }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// MMSE estimate amplitude of user `u` at array `a`.
pub fn lambda(inst: &Instance, u: usize, a: usize) -> f64 {
    let cfg = &inst.cfg;
    let pilot = u % inst.k;
    let mut contamination = 0.0;
    for l in 0..inst.cells {
        let w = l * inst.k + pilot;
        contamination += inst.gain[w][a] * inst.beta[w][a];
    }
    let e = cfg.reverse_power_w * cfg.pilot_length;
    let num = inst.m * e * inst.gain[u][a] * inst.beta[u][a].powi(2);
    (num / (cfg.reverse_noise_w + e * contamination)).sqrt()
}

/// `[P, I1, I2, SINR]` for every user, with `rho(a, k)` the power array
/// `a` gives pilot `k`.
pub fn terms(inst: &Instance, rho: &dyn Fn(usize, usize) -> f64) -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for j in 0..inst.cells {
        for k in 0..inst.k {
            let u = j * inst.k + k;
            let mut signal = 0.0;
            let mut contamination = 0.0;
            for l in 0..inst.cells {
                let mut coherent = 0.0;
                for i in 0..inst.apc {
                    let a = l * inst.apc + i;
                    coherent += (rho(a, k) * inst.gain[u][a]).sqrt() * lambda(inst, u, a);
                }
                if l == j {
                    signal = coherent * coherent;
                } else {
                    contamination += coherent * coherent;
                }
            }
            let mut undirected = 0.0;
            for a in 0..inst.arrays() {
                let mut total = 0.0;
                for n in 0..inst.k {
                    total += rho(a, n);
                }
                undirected += total * inst.gain[u][a] * inst.beta[u][a];
            }
            let sinr = signal / (contamination + undirected + inst.cfg.forward_noise_w);
            out.push([signal, contamination, undirected, sinr]);
        }
    }
    out
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Minimum SINR over users of an allocation, from [`terms`].
pub fn min_sinr(inst: &Instance, rho: &dyn Fn(usize, usize) -> f64) -> f64 {
    terms(inst, rho).iter().map(|t| t[3]).fold(f64::INFINITY, f64::min)
}

/// Exhaustive max-min search for two cells with one user each. Every array
/// amplitude `psi = sqrt(rho)` takes `points` evenly spaced values in
/// `[0, sqrt(budget)]`. Returns the grid optimum and its amplitudes.
///
/// The six amplitudes split into a triple per cell. For a target `t`, a
/// pair of triples `(i, j)` works when `f_j <= A_i / t - B_i` (user of cell
/// 0) and `g_i <= C_j / t - D_j` (user of cell 1), so sorting the cell-1
/// triples by `f_j` with a running maximum of `C_j / t - D_j` decides each
/// target in `O(N log N)`. Bisection on `t` then pins down the optimum.
pub fn grid_max_min(inst: &Instance, points: usize) -> (f64, [f64; 6]) {
    assert!(inst.cells == 2 && inst.k == 1 && inst.apc == 3);
    let step = inst.budget().sqrt() / (points - 1) as f64;
    let noise = inst.cfg.forward_noise_w;
    let triples: Vec<[f64; 3]> = (0..points.pow(3))
        .map(|n| [n % points, (n / points) % points, n / (points * points)].map(|i| i as f64 * step))
        .collect();
    let lam: Vec<Vec<f64>> = (0..2).map(|u| (0..6).map(|a| lambda(inst, u, a)).collect()).collect();
    // coherent amplitude and power leakage of cell `c`'s triple at user `u`
    let parts = |u: usize, c: usize, p: &[f64; 3]| {
        let mut amp = 0.0;
        let mut leak = 0.0;
        for (i, x) in p.iter().enumerate() {
            let a = c * 3 + i;
            amp += x * inst.gain[u][a].sqrt() * lam[u][a];
            leak += x * x * inst.gain[u][a] * inst.beta[u][a];
        }
        (amp * amp, leak)
    };
    let n = triples.len();
    let (mut a_, mut b_, mut g_) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let (mut c_, mut d_, mut f_) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (idx, p) in triples.iter().enumerate() {
        let (s0, l0) = parts(0, 0, p);
        a_[idx] = s0;
        b_[idx] = l0 + noise;
        let (x1, l1) = parts(1, 0, p);
        g_[idx] = x1 + l1;
        let (s1, m1) = parts(1, 1, p);
        c_[idx] = s1;
        d_[idx] = m1 + noise;
        let (x0, m0) = parts(0, 1, p);
        f_[idx] = x0 + m0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| f_[x].total_cmp(&f_[y]));
    let sorted_f: Vec<f64> = order.iter().map(|&j| f_[j]).collect();

    let witness = |t: f64| -> Option<(usize, usize)> {
        let mut best = Vec::with_capacity(n);
        let mut run = (f64::NEG_INFINITY, 0usize);
        for &j in &order {
            let h = c_[j] / t - d_[j];
            if h > run.0 {
                run = (h, j);
            }
            best.push(run);
        }
        (0..n).find_map(|i| {
            let alpha = a_[i] / t - b_[i];
            let count = sorted_f.partition_point(|&f| f <= alpha);
            (count > 0 && best[count - 1].0 >= g_[i]).then(|| (i, best[count - 1].1))
        })
    };
    let value = |i: usize, j: usize| (a_[i] / (b_[i] + f_[j])).min(c_[j] / (d_[j] + g_[i]));

    let mut lo = 0.0;
    let mut hi = (0..n).map(|i| a_[i] / b_[i]).fold(0.0, f64::max);
    let mut best = (0usize, 0usize);
    for _ in 0..200 {
        if hi - lo <= 1e-14 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match witness(mid) {
            Some(w) => {
                lo = value(w.0, w.1).max(mid);
                best = w;
            }
            None => hi = mid,
        }
    }
    let (i, j) = best;
    let (p, q) = (triples[i], triples[j]);
    (value(i, j), [p[0], p[1], p[2], q[0], q[1], q[2]])
}
