//! Directivity, large-scale fading and the user/array coupling matrix.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{AntennaMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::geometry::{angle_to_boresight, CellLayout, UserDrop};

/// Sector pattern gain: main lobe within half the beamwidth (inclusive),
/// back lobe elsewhere. Unity in omni mode.
pub fn directivity_gain(phi: f64, config: &NetworkConfig) -> f64 {
    let (main, back) = config.effective_gains();
    if config.mode == AntennaMode::Omni || phi <= 0.5 * config.beamwidth_rad {
        main
    } else {
        back
    }
}

/// Large-scale fading from distance (km) and shadowing (dB).
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn pathloss_beta(d_km: f64, shadow_db: f64, config: &NetworkConfig) -> Result<f64> {
    if !(d_km > 0.0) {
        return Err(Error::NonpositiveDistance(d_km));
    }
    let pl = &config.pathloss;
    let db = pl.intercept_db - pl.slope_db_per_decade * d_km.log10() + shadow_db;
    Ok(10f64.powf(db / 10.0))
}

/// Large-scale gains between every user and every array.
///
/// Users are indexed `u = cell * K + k` and arrays `a = cell * A + i`, where
/// `A` is the number of arrays per cell. Entry `(u, a)` is stored at
/// `u * num_arrays + a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    pub cells: usize,
    pub users_per_cell: usize,
    pub arrays_per_cell: usize,
    /// Directivity power gain `G`.
    pub gain: Vec<f64>,
    /// Large-scale fading `beta`.
    pub beta: Vec<f64>,
    /// Serving cell of each array.
    pub serving: Vec<usize>,
    /// Element count of each array.
    pub elements: Vec<f64>,
}

impl CouplingMatrix {
    /// Builds a matrix from explicit row-major `gain`/`beta` tables, every
    /// array having `elements` elements.
    pub fn from_parts(
        cells: usize,
        users_per_cell: usize,
        arrays_per_cell: usize,
        elements: f64,
        gain: Vec<f64>,
        beta: Vec<f64>,
    ) -> Result<Self> {
        let n = cells * users_per_cell * cells * arrays_per_cell;
        if gain.len() != n || beta.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "expected {n} entries, got gain {} and beta {}",
                gain.len(),
                beta.len()
            )));
        }
        if beta.iter().chain(&gain).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("gain and beta must be positive".into()));
        }
        let n_arrays = cells * arrays_per_cell;
        Ok(Self {
            cells,
            users_per_cell,
            arrays_per_cell,
            gain,
            beta,
            serving: (0..n_arrays).map(|a| a / arrays_per_cell).collect(),
            elements: vec![elements; n_arrays],
        })
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn num_arrays(&self) -> usize {
        self.cells * self.arrays_per_cell
    }

    #[inline]
    pub fn gain(&self, u: usize, a: usize) -> f64 {
        self.gain[u * self.num_arrays() + a]
    }

    #[inline]
    pub fn beta(&self, u: usize, a: usize) -> f64 {
        self.beta[u * self.num_arrays() + a]
    }

    #[inline]
    pub fn user(&self, cell: usize, k: usize) -> usize {
        cell * self.users_per_cell + k
    }

    #[inline]
    pub fn cell_of_user(&self, u: usize) -> usize {
        u / self.users_per_cell
    }

    #[inline]
    pub fn pilot_of_user(&self, u: usize) -> usize {
        u % self.users_per_cell
    }

    pub fn cell_arrays(&self, cell: usize) -> std::ops::Range<usize> {
        cell * self.arrays_per_cell..(cell + 1) * self.arrays_per_cell
    }

    /// Same matrix with every array's element count replaced.
    pub fn with_elements(&self, elements: f64) -> Self {
        let mut c = self.clone();
        c.elements.iter_mut().for_each(|e| *e = elements);
        c
    }

    /// Copy of the sub-network formed by `cells`, renumbered in the given
    /// order.
    pub fn restrict(&self, cells: &[usize]) -> Self {
        let k = self.users_per_cell;
        let apc = self.arrays_per_cell;
        let arrays: Vec<usize> = cells.iter().flat_map(|&c| self.cell_arrays(c)).collect();
        let mut gain = Vec::with_capacity(cells.len() * k * arrays.len());
        let mut beta = Vec::with_capacity(gain.capacity());
        for &c in cells {
            for kk in 0..k {
                let u = self.user(c, kk);
                for &a in &arrays {
                    gain.push(self.gain(u, a));
                    beta.push(self.beta(u, a));
                }
            }
        }
        Self {
            cells: cells.len(),
            users_per_cell: k,
            arrays_per_cell: apc,
            gain,
            beta,
            serving: (0..arrays.len()).map(|a| a / apc).collect(),
            elements: arrays.iter().map(|&a| self.elements[a]).collect(),
        }
    }
}

/// Coupling for a user drop: wrapped distance, i.i.d. log-normal shadowing
/// per (user, array) pair, and the sector gain from the angle to boresight.
pub fn build_coupling<R: Rng + ?Sized>(
    layout: &CellLayout,
    drop: &UserDrop,
    config: &NetworkConfig,
    rng: &mut R,
) -> Result<CouplingMatrix> {
    let n_arrays = layout.arrays.len();
    let k = drop.users_per_cell;
    if k != config.users_per_cell || drop.positions.len() != layout.num_cells() * k {
        return Err(Error::DimensionMismatch(format!(
            "drop has {} users for {} cells x {} users",
            drop.positions.len(),
            layout.num_cells(),
            config.users_per_cell
        )));
    }
    let shadow = Normal::new(0.0, config.shadow_std_db).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let n = drop.positions.len() * n_arrays;
    let mut gain = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n);
    for &p in &drop.positions {
        for array in &layout.arrays {
            let d = layout.wrapped_distance(array.position, p);
            let psi = shadow.sample(rng);
            beta.push(pathloss_beta(d, psi, config)?);
            let phi = angle_to_boresight(array, p, layout)?;
            gain.push(directivity_gain(phi, config));
        }
    }
    Ok(CouplingMatrix {
        cells: layout.num_cells(),
        users_per_cell: k,
        arrays_per_cell: layout.arrays_per_cell,
        gain,
        beta,
        serving: layout.arrays.iter().map(|a| a.serving_cell).collect(),
        elements: layout.arrays.iter().map(|a| a.elements).collect(),
    })
}

/// Rayleigh fading vectors, one per (user, array) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallScaleBlock {
    pub n_users: usize,
    pub n_arrays: usize,
    pub elements: usize,
    pub h: Vec<Complex64>,
}

impl SmallScaleBlock {
    pub fn vector(&self, u: usize, a: usize) -> &[Complex64] {
        let start = (u * self.n_arrays + a) * self.elements;
        &self.h[start..start + self.elements]
    }
}

/// One circularly-symmetric complex normal sample of unit variance.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn sample_small_scale<R: Rng + ?Sized>(
    n_users: usize,
    n_arrays: usize,
    elements: usize,
    rng: &mut R,
) -> SmallScaleBlock {
    let h = (0..n_users * n_arrays * elements).map(|_| complex_normal(rng)).collect();
    SmallScaleBlock { n_users, n_arrays, elements, h }
}
