//! Scenario parameters.
//!
//! [`NetworkConfig`] holds everything in linear units (watts, km, radians).
//! The on-disk form, [`ConfigFile`], keeps power and noise in dBm and is
//! converted exactly once, at load time.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Antenna deployment per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaMode {
    /// Three 120° arrays at alternating corners of every cell.
    Directional,
    /// One omnidirectional array at the cell center.
    Omni,
}

impl AntennaMode {
    pub fn arrays_per_cell(self) -> usize {
        match self {
            AntennaMode::Directional => 3,
            AntennaMode::Omni => 1,
        }
    }
}

impl std::fmt::Display for AntennaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AntennaMode::Directional => f.write_str("directional"),
            AntennaMode::Omni => f.write_str("omni"),
        }
    }
}

impl std::str::FromStr for AntennaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "directional" | "dir" => Ok(AntennaMode::Directional),
            "omni" | "omnidirectional" => Ok(AntennaMode::Omni),
            other => Err(Error::InvalidConfig(format!("unknown antenna mode `{other}`"))),
        }
    }
}

/// Log-distance pathloss: `10 log10(beta) = intercept - slope * log10(d_km) + shadow`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pathloss {
    pub intercept_db: f64,
    pub slope_db_per_decade: f64,
}

impl Default for Pathloss {
    /// COST-231 at 1900 MHz.
    fn default() -> Self {
        Self { intercept_db: -140.0, slope_db_per_decade: 35.2 }
    }
}

/// Tolerances for the centralized allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Bisection stops once `gamma_max - gamma_min <= delta_rel * gamma_max`.
    pub delta_rel: f64,
    /// Largest normalized constraint violation accepted as feasible.
    pub feas_tol: f64,
    pub max_bisection_iters: u32,
    /// Interior-point iteration cap per feasibility subproblem.
    pub max_solver_iters: u32,
    /// Rings of neighboring cells each array considers in the decentralized scheme.
    pub dpa_rings: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { delta_rel: 1e-3, feas_tol: 1e-6, max_bisection_iters: 100, max_solver_iters: 200, dpa_rings: 1 }
    }
}

/// All scenario parameters, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of cells `L`.
    pub cells: usize,
    /// Users per cell `K`.
    pub users_per_cell: usize,
    /// Elements per directional array `M`. The omni base station carries `3M`.
    ///
    /// Real-valued because the closed-form bound is defined for any positive
    /// element count; the Monte Carlo oracle requires an integer.
    pub antennas_per_array: f64,
    pub mode: AntennaMode,
    pub cell_radius_km: f64,
    pub exclusion_radius_km: f64,
    pub gain_main: f64,
    pub gain_back: f64,
    pub beamwidth_rad: f64,
    /// Per-user reverse-link (pilot) power `rho_r`, watts.
    pub reverse_power_w: f64,
    /// Per-base-station forward-link budget `rho_f`, watts.
    pub forward_power_w: f64,
    pub reverse_noise_w: f64,
    pub forward_noise_w: f64,
    /// Pilot length `tau` in symbols.
    pub pilot_length: f64,
    pub pathloss: Pathloss,
    /// Standard deviation of the log-normal shadowing, dB.
    pub shadow_std_db: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            cells: 19,
            users_per_cell: 9,
            antennas_per_array: 100.0 / 3.0,
            mode: AntennaMode::Directional,
            cell_radius_km: 1.0,
            exclusion_radius_km: 0.06,
            gain_main: 2.98,
            gain_back: 0.01,
            beamwidth_rad: 2.0 * PI / 3.0,
            reverse_power_w: dbm_to_watts(23.0),
            forward_power_w: dbm_to_watts(30.0),
            reverse_noise_w: dbm_to_watts(-92.0),
            forward_noise_w: dbm_to_watts(-92.0),
            pilot_length: 9.0,
            pathloss: Pathloss::default(),
            shadow_std_db: SHADOW_STD_DB,
            seed: 1,
            solver: SolverOptions::default(),
        }
    }
}

/// Default shadowing spread: variance 8 dB², i.e. a standard deviation of
/// `sqrt(8)` dB.
pub const SHADOW_STD_DB: f64 = 2.828_427_124_746_190_3;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

impl NetworkConfig {
    pub fn arrays_per_cell(&self) -> usize {
        self.mode.arrays_per_cell()
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn num_arrays(&self) -> usize {
        self.cells * self.arrays_per_cell()
    }

    /// Forward-link budget of a single array.
    pub fn array_budget(&self) -> f64 {
        self.forward_power_w / self.arrays_per_cell() as f64
    }

    /// Element count of a single array: `M` directional, `3M` omni.
    pub fn elements_per_array(&self) -> f64 {
        match self.mode {
            AntennaMode::Directional => self.antennas_per_array,
            AntennaMode::Omni => 3.0 * self.antennas_per_array,
        }
    }

    /// `(main, back)` lobe gains in effect; unity for omni arrays.
    pub fn effective_gains(&self) -> (f64, f64) {
        match self.mode {
            AntennaMode::Directional => (self.gain_main, self.gain_back),
            AntennaMode::Omni => (1.0, 1.0),
        }
    }

    /// Sets `M` from the total element count per base station.
    pub fn with_base_station_elements(mut self, mb: f64) -> Self {
        self.antennas_per_array = mb / 3.0;
        self
    }

    // negated comparisons so that NaN fields are rejected too
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cells < 1 {
            return bad("cells must be at least 1".into());
        }
        if self.users_per_cell < 1 {
            return bad("users_per_cell must be at least 1".into());
        }
        if !(self.antennas_per_array >= 1.0) || !self.antennas_per_array.is_finite() {
            return bad(format!("antennas_per_array must be >= 1, got {}", self.antennas_per_array));
        }
        if !(self.pilot_length >= self.users_per_cell as f64) {
            return bad(format!(
                "pilot_length {} is shorter than users_per_cell {}",
                self.pilot_length, self.users_per_cell
            ));
        }
        if !(self.cell_radius_km > 0.0) {
            return bad("cell_radius_km must be positive".into());
        }
        if !(self.exclusion_radius_km >= 0.0 && self.exclusion_radius_km < self.cell_radius_km) {
            return bad(format!("exclusion_radius_km {} must lie in [0, cell_radius_km)", self.exclusion_radius_km));
        }
        for (name, v) in [
            ("reverse_power", self.reverse_power_w),
            ("forward_power", self.forward_power_w),
            ("reverse_noise", self.reverse_noise_w),
            ("forward_noise", self.forward_noise_w),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.shadow_std_db >= 0.0) {
            return bad("shadow_std_db must be nonnegative".into());
        }
        if self.mode == AntennaMode::Directional {
            if !(self.gain_main > 0.0 && self.gain_back > 0.0) {
                return bad("lobe gains must be positive".into());
            }
            if self.gain_main > 3.0 {
                return bad(format!("gain_main {} exceeds 3", self.gain_main));
            }
            if (self.gain_main + 2.0 * self.gain_back - 3.0).abs() > 1e-9 {
                return bad(format!(
                    "lossless antenna requires gain_main + 2*gain_back = 3, got {}",
                    self.gain_main + 2.0 * self.gain_back
                ));
            }
            if !(self.beamwidth_rad > 0.0 && self.beamwidth_rad <= 2.0 * PI) {
                return bad("beamwidth_rad must lie in (0, 2pi]".into());
            }
        }
        let s = &self.solver;
        if !(s.delta_rel > 0.0 && s.delta_rel < 1.0) {
            return bad("solver.delta_rel must lie in (0, 1)".into());
        }
        if !(s.feas_tol > 0.0) {
            return bad("solver.feas_tol must be positive".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let cfg = NetworkConfig::from(file);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&ConfigFile::from(self)).expect("config serializes")
    }
}

/// On-disk configuration document. Missing keys take the defaults of
/// [`NetworkConfig::default`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub cells: usize,
    pub users_per_cell: usize,
    pub antennas_per_array: f64,
    pub mode: AntennaMode,
    pub cell_radius_km: f64,
    pub exclusion_radius_km: f64,
    pub gain_main: f64,
    pub gain_back: f64,
    pub beamwidth_rad: f64,
    pub reverse_power_dbm: f64,
    pub forward_power_dbm: f64,
    pub reverse_noise_dbm: f64,
    pub forward_noise_dbm: f64,
    pub pilot_length: f64,
    pub pathloss: Pathloss,
    pub shadow_std_db: f64,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile::from(&NetworkConfig::default())
    }
}

impl From<&NetworkConfig> for ConfigFile {
    fn from(c: &NetworkConfig) -> Self {
        Self {
            cells: c.cells,
            users_per_cell: c.users_per_cell,
            antennas_per_array: c.antennas_per_array,
            mode: c.mode,
            cell_radius_km: c.cell_radius_km,
            exclusion_radius_km: c.exclusion_radius_km,
            gain_main: c.gain_main,
            gain_back: c.gain_back,
            beamwidth_rad: c.beamwidth_rad,
            reverse_power_dbm: watts_to_dbm(c.reverse_power_w),
            forward_power_dbm: watts_to_dbm(c.forward_power_w),
            reverse_noise_dbm: watts_to_dbm(c.reverse_noise_w),
            forward_noise_dbm: watts_to_dbm(c.forward_noise_w),
            pilot_length: c.pilot_length,
            pathloss: c.pathloss,
            shadow_std_db: c.shadow_std_db,
            seed: c.seed,
            solver: c.solver,
        }
    }
}

impl From<ConfigFile> for NetworkConfig {
    fn from(f: ConfigFile) -> Self {
        Self {
            cells: f.cells,
            users_per_cell: f.users_per_cell,
            antennas_per_array: f.antennas_per_array,
            mode: f.mode,
            cell_radius_km: f.cell_radius_km,
            exclusion_radius_km: f.exclusion_radius_km,
            gain_main: f.gain_main,
            gain_back: f.gain_back,
            beamwidth_rad: f.beamwidth_rad,
            reverse_power_w: dbm_to_watts(f.reverse_power_dbm),
            forward_power_w: dbm_to_watts(f.forward_power_dbm),
            reverse_noise_w: dbm_to_watts(f.reverse_noise_dbm),
            forward_noise_w: dbm_to_watts(f.forward_noise_dbm),
            pilot_length: f.pilot_length,
            pathloss: f.pathloss,
            shadow_std_db: f.shadow_std_db,
            seed: f.seed,
            solver: f.solver,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        NetworkConfig::default().validate().unwrap();
    }

    #[test]
    fn default_powers() {
        let c = NetworkConfig::default();
        assert!((c.forward_power_w - 1.0).abs() < 1e-12);
        assert!((watts_to_dbm(c.reverse_noise_w) + 92.0).abs() < 1e-9);
        assert!((c.gain_main + 2.0 * c.gain_back - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_lossy_gains() {
        let c = NetworkConfig { gain_main: 2.5, gain_back: 0.01, ..Default::default() };
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        // omni mode ignores the lobe gains
        let c = NetworkConfig { mode: AntennaMode::Omni, ..c };
        c.validate().unwrap();
    }

    #[test]
    fn rejects_short_pilots() {
        let c = NetworkConfig { pilot_length: 4.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_large_exclusion() {
        let c = NetworkConfig { exclusion_radius_km: 1.0, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = NetworkConfig { seed: 77, cells: 7, ..Default::default() };
        let back = NetworkConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back.seed, 77);
        assert_eq!(back.cells, 7);
        assert!((back.forward_noise_w / c.forward_noise_w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_toml_uses_defaults() {
        let c = NetworkConfig::from_toml("cells = 7\nforward_power_dbm = 33.0\n").unwrap();
        assert_eq!(c.cells, 7);
        assert_eq!(c.users_per_cell, 9);
        assert!((c.forward_power_w - 10f64.powf(0.3)).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(NetworkConfig::from_toml("celz = 7\n").is_err());
    }
}
