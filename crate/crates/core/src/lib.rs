//! Downlink simulation and power allocation for sectorized multi-cell
//! massive MIMO.
//!
//! The pipeline for one random network realization ("drop") is
//! [`geometry::build_layout`] → [`geometry::drop_users`] →
//! [`propagation::build_coupling`] → an allocation from [`allocation`] →
//! [`performance::evaluate_sinr`]. [`verification`] cross-checks the
//! closed-form bound against a physical-layer Monte Carlo simulation, and
//! [`harness`] runs whole scenarios and writes their outputs.

pub mod allocation;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod performance;
pub mod propagation;
pub mod verification;

pub use allocation::{cpa, dpa, upa, Scheme, SolverReport};
pub use config::{AntennaMode, NetworkConfig, SolverOptions};
pub use error::{Error, Result};
pub use geometry::{build_layout, drop_users, CellLayout, Point, UserDrop};
pub use performance::{evaluate_sinr, PowerAllocation, RateCdf, SinrBreakdown};
pub use propagation::{build_coupling, CouplingMatrix};
