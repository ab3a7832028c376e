//! Scenario orchestration and file output.
//!
//! A scenario is one (antenna mode, scheme) setting swept over a list of
//! per-base-station element counts `M_B`. Each drop owns a ChaCha stream
//! keyed by `(seed, drop index)`, and the `M_B` sweep reuses the drop's
//! geometry and shadowing, so results do not depend on the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{cpa, dpa_with_reports, upa, Scheme, SolverReport};
use crate::config::{AntennaMode, NetworkConfig};
use crate::error::{Error, Result};
use crate::geometry::{build_layout, drop_users, CellLayout};
use crate::performance::{evaluate_sinr, PowerAllocation, RateCdf, SinrBreakdown};
use crate::propagation::{build_coupling, CouplingMatrix};

pub const SUMMARY_PERCENTILES: [f64; 7] = [1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0];

pub const CSV_HEADER: &str = "drop,cell,user,P,I1,I2,sinr,rate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub base: NetworkConfig,
    pub mode: AntennaMode,
    pub scheme: Scheme,
    /// Total elements per base station for each sweep point.
    pub mb: Vec<f64>,
    pub n_drops: usize,
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl ScenarioSpec {
    pub fn new(base: NetworkConfig, mode: AntennaMode, scheme: Scheme, mb: Vec<f64>, n_drops: usize) -> Self {
        Self { base, mode, scheme, mb, n_drops, output_dir: None, threads: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_drops < 1 {
            return Err(Error::InvalidConfig("at least one drop is required".into()));
        }
        if self.mb.is_empty() {
            return Err(Error::InvalidConfig("the M_B sweep is empty".into()));
        }
        if let Some(bad) = self.mb.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return Err(Error::InvalidConfig(format!("M_B must be positive, got {bad}")));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("thread count must be positive".into()));
        }
        self.config_for(self.mb[0]).validate()
    }

    /// Configuration of one sweep point.
    pub fn config_for(&self, mb: f64) -> NetworkConfig {
        NetworkConfig { mode: self.mode, ..self.base.clone() }.with_base_station_elements(mb)
    }
}

/// One user of one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRecord {
    pub drop: usize,
    pub cell: usize,
    pub user: usize,
    pub signal: f64,
    pub pilot_contamination: f64,
    pub undirected: f64,
    pub sinr: f64,
    pub rate: f64,
    /// Power allotted to this user by each serving array.
    pub powers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropFailure {
    pub drop: usize,
    pub message: String,
}

/// Results for one `M_B` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub mb: f64,
    pub records: Vec<UserRecord>,
    /// Solver traces per successful drop: one for CPA, one per cell for DPA,
    /// none for UPA.
    pub reports: Vec<(usize, Vec<SolverReport>)>,
    pub failures: Vec<DropFailure>,
}

impl SweepResult {
    pub fn rates(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.rate).collect()
    }

    pub fn cdf(&self) -> Result<RateCdf> {
        RateCdf::from_samples(self.rates())
    }

    pub fn likely_rate_95(&self) -> Result<f64> {
        self.cdf().map(|c| c.likely_rate_95())
    }

    /// Minimum rate per successful drop, ordered by drop index.
    pub fn min_rate_per_drop(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            let e = out.entry(r.drop).or_insert(f64::INFINITY);
            *e = f64::min(*e, r.rate);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub spec: ScenarioSpec,
    pub sweeps: Vec<SweepResult>,
}

impl RunResult {
    pub fn sweep(&self, mb: f64) -> Option<&SweepResult> {
        self.sweeps.iter().find(|s| s.mb == mb)
    }
}

/// Per-drop RNG, independent of scheduling.
pub fn drop_rng(seed: u64, drop: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(drop as u64);
    rng
}

type Allocated = (PowerAllocation, Vec<SolverReport>);

fn allocate(scheme: Scheme, coupling: &CouplingMatrix, layout: &CellLayout, cfg: &NetworkConfig) -> Result<Allocated> {
    match scheme {
        Scheme::Upa => Ok((upa(cfg, layout), Vec::new())),
        Scheme::Cpa => cpa(coupling, cfg).map(|(a, r)| (a, vec![r])),
        Scheme::Dpa => dpa_with_reports(coupling, layout, cfg),
    }
}

fn records(drop: usize, coupling: &CouplingMatrix, alloc: &PowerAllocation, b: &SinrBreakdown) -> Vec<UserRecord> {
    b.users
        .iter()
        .enumerate()
        .map(|(u, s)| {
            let (cell, k) = (coupling.cell_of_user(u), coupling.pilot_of_user(u));
            UserRecord {
                drop,
                cell,
                user: k,
                signal: s.signal,
                pilot_contamination: s.pilot_contamination,
                undirected: s.undirected,
                sinr: s.sinr,
                rate: s.rate,
                powers: coupling.cell_arrays(cell).map(|a| alloc.get(a, k)).collect(),
            }
        })
        .collect()
}

enum Outcome {
    Ok(Vec<UserRecord>, Vec<SolverReport>),
    Failed(String),
}

fn run_drop(spec: &ScenarioSpec, layout: &CellLayout, drop: usize) -> Result<Vec<Outcome>> {
    let cfg0 = spec.config_for(spec.mb[0]);
    let mut rng = drop_rng(cfg0.seed, drop);
    let users = drop_users(&cfg0, layout, &mut rng)?;
    let coupling = build_coupling(layout, &users, &cfg0, &mut rng)?;
    spec.mb
        .iter()
        .map(|&mb| {
            let cfg = spec.config_for(mb);
            let coupling = coupling.with_elements(cfg.elements_per_array());
            match allocate(spec.scheme, &coupling, layout, &cfg) {
                Ok((alloc, reports)) => {
                    let b = evaluate_sinr(&coupling, &alloc, &cfg)?;
                    Ok(Outcome::Ok(records(drop, &coupling, &alloc, &b), reports))
                }
                Err(e @ (Error::NumericalBreakdown(_) | Error::DimensionMismatch(_))) => {
                    Ok(Outcome::Failed(e.to_string()))
                }
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Runs every drop of the scenario. Drops whose allocation fails are
/// recorded and excluded; a sweep point where every drop failed is an error.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<RunResult> {
    spec.validate()?;
    let layout = build_layout(&spec.config_for(spec.mb[0]))?;
    let work = || -> Result<Vec<Vec<Outcome>>> {
        (0..spec.n_drops).into_par_iter().map(|d| run_drop(spec, &layout, d)).collect()
    };
    let per_drop = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut sweeps: Vec<SweepResult> = spec
        .mb
        .iter()
        .map(|&mb| SweepResult { mb, records: Vec::new(), reports: Vec::new(), failures: Vec::new() })
        .collect();
    for (drop, outcomes) in per_drop.into_iter().enumerate() {
        for (sweep, outcome) in sweeps.iter_mut().zip(outcomes) {
            match outcome {
                Outcome::Ok(rec, rep) => {
                    sweep.records.extend(rec);
                    sweep.reports.push((drop, rep));
                }
                Outcome::Failed(message) => sweep.failures.push(DropFailure { drop, message }),
            }
        }
    }
    if sweeps.iter().any(|s| s.records.is_empty()) {
        return Err(Error::AllDropsFailed(spec.n_drops));
    }
    Ok(RunResult { spec: spec.clone(), sweeps })
}

/// Aggregated solver statistics for a summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub runs: usize,
    pub mean_bisection_iterations: f64,
    pub max_bisection_iterations: u32,
    pub total_subproblem_iterations: u64,
    pub max_feasibility_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scheme: Scheme,
    pub mode: AntennaMode,
    pub mb: f64,
    pub seed: u64,
    pub n_drops: usize,
    pub failed_drops: Vec<usize>,
    pub rows: usize,
    /// Rate percentiles keyed `p1`, `p5`, ... in bits/s/Hz.
    pub percentiles: BTreeMap<String, f64>,
    pub likely_rate_95: f64,
    pub solver: Option<SolverSummary>,
    pub config: NetworkConfig,
}

pub fn summarize(result: &RunResult, sweep: &SweepResult) -> Result<Summary> {
    let cdf = sweep.cdf()?;
    let flat: Vec<&SolverReport> = sweep.reports.iter().flat_map(|(_, r)| r).collect();
    let solver = (!flat.is_empty()).then(|| SolverSummary {
        runs: flat.len(),
        mean_bisection_iterations: flat.iter().map(|r| f64::from(r.bisection_iterations)).sum::<f64>()
            / flat.len() as f64,
        max_bisection_iterations: flat.iter().map(|r| r.bisection_iterations).max().unwrap_or(0),
        total_subproblem_iterations: flat.iter().map(|r| r.subproblem_iterations).sum(),
        max_feasibility_residual: flat.iter().map(|r| r.feasibility_residual).fold(0.0, f64::max),
    });
    let spec = &result.spec;
    Ok(Summary {
        scheme: spec.scheme,
        mode: spec.mode,
        mb: sweep.mb,
        seed: spec.base.seed,
        n_drops: spec.n_drops,
        failed_drops: sweep.failures.iter().map(|f| f.drop).collect(),
        rows: sweep.records.len(),
        percentiles: SUMMARY_PERCENTILES.iter().map(|&p| (format!("p{p}"), cdf.percentile(p))).collect(),
        likely_rate_95: cdf.likely_rate_95(),
        solver,
        config: spec.config_for(sweep.mb),
    })
}

pub fn csv_string(sweep: &SweepResult) -> String {
    let mut out = String::with_capacity(128 * (sweep.records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &sweep.records {
        writeln!(
            out,
            "{},{},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e}",
            r.drop, r.cell, r.user, r.signal, r.pilot_contamination, r.undirected, r.sinr, r.rate
        )
        .expect("writing to a string");
    }
    out
}

/// Rates in the `rate` column of an exported CSV.
pub fn parse_csv_rates(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::InvalidConfig("unexpected CSV header".into()));
    }
    lines
        .map(|l| {
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::InvalidConfig(format!("malformed CSV line `{l}`")))
        })
        .collect()
}

pub fn csv_path(dir: &Path, mb: f64) -> PathBuf {
    dir.join(format!("rates_mb{mb}.csv"))
}

pub fn summary_path(dir: &Path, mb: f64) -> PathBuf {
    dir.join(format!("summary_mb{mb}.json"))
}

/// Writes `rates_mb<M_B>.csv` and `summary_mb<M_B>.json` for every sweep
/// point and returns the written paths. Nothing is written unless every
/// sweep point has records.
pub fn export(result: &RunResult, dir: &Path) -> Result<Vec<PathBuf>> {
    if result.sweeps.is_empty() || result.sweeps.iter().any(|s| s.records.is_empty()) {
        return Err(Error::EmptyInput);
    }
    let mut files = Vec::new();
    for sweep in &result.sweeps {
        let summary = serde_json::to_string_pretty(&summarize(result, sweep)?)
            .map_err(|e| Error::NumericalBreakdown(e.to_string()))?;
        files.push((csv_path(dir, sweep.mb), csv_string(sweep)));
        files.push((summary_path(dir, sweep.mb), summary + "\n"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (path, text) in &files {
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Runs, exports when an output directory is set, and reports the elapsed time.
pub fn run_and_export(spec: &ScenarioSpec) -> Result<(RunResult, f64)> {
    let start = Instant::now();
    let result = run_scenario(spec)?;
    if let Some(dir) = &spec.output_dir {
        export(&result, dir)?;
    }
    Ok((result, start.elapsed().as_secs_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(scheme: Scheme) -> ScenarioSpec {
        let base = NetworkConfig { cells: 7, users_per_cell: 2, ..Default::default() };
        ScenarioSpec::new(base, AntennaMode::Directional, scheme, vec![30.0, 300.0], 2)
    }

    #[test]
    fn row_count() {
        let r = run_scenario(&small(Scheme::Upa)).unwrap();
        for s in &r.sweeps {
            assert_eq!(s.records.len(), 2 * 7 * 2);
            assert!(s.failures.is_empty());
            assert!(s.reports.iter().all(|(_, r)| r.is_empty()));
        }
    }

    #[test]
    fn deterministic() {
        let a = run_scenario(&small(Scheme::Cpa)).unwrap();
        let b = run_scenario(&small(Scheme::Cpa)).unwrap();
        assert_eq!(csv_string(&a.sweeps[0]), csv_string(&b.sweeps[0]));
        assert_eq!(a.sweeps[1].records, b.sweeps[1].records);
    }

    #[test]
    fn larger_arrays_raise_rates() {
        let r = run_scenario(&small(Scheme::Upa)).unwrap();
        for (lo, hi) in r.sweeps[0].records.iter().zip(&r.sweeps[1].records) {
            assert!(hi.sinr > lo.sinr);
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small(Scheme::Upa);
        s.n_drops = 0;
        assert!(matches!(run_scenario(&s), Err(Error::InvalidConfig(_))));
        let mut s = small(Scheme::Upa);
        s.mb = vec![];
        assert!(run_scenario(&s).is_err());
        let mut s = small(Scheme::Upa);
        s.base.cells = 5;
        assert_eq!(run_scenario(&s).unwrap_err().exit_code(), 1);
    }

    #[test]
    fn csv_format() {
        let r = run_scenario(&small(Scheme::Upa)).unwrap();
        let text = csv_string(&r.sweeps[0]);
        let second = text.lines().nth(1).unwrap();
        assert!(second.starts_with("0,0,0,"));
        let mantissa = second.split(',').nth(3).unwrap().split('e').next().unwrap();
        assert_eq!(mantissa.replace('.', "").len(), 12);
    }

    #[test]
    fn export_empty_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = run_scenario(&small(Scheme::Upa)).unwrap();
        r.sweeps[1].records.clear();
        let out = dir.path().join("out");
        assert!(matches!(export(&r, &out), Err(Error::EmptyInput)));
        assert!(!out.exists());
    }

    #[test]
    fn summary_matches_cdf() {
        let r = run_scenario(&small(Scheme::Upa)).unwrap();
        let s = summarize(&r, &r.sweeps[0]).unwrap();
        assert_eq!(s.percentiles["p5"], s.likely_rate_95);
        assert_eq!(s.rows, 28);
        assert!(s.solver.is_none());
    }
}
