//! Simulation harness for contact-based base calibration: configuration,
//! scene assembly, the calibration loop, traces, sweeps and reports.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod fixtures;
pub mod mesh_io;
pub mod report;
pub mod scene;
pub mod sdf_cache;
pub mod trace;

pub use config::ExperimentConfig;
pub use experiment::{run_once, run_sweep, RunResult};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{path}: {msg}", path = .0.display(), msg = .1)]
    Format(PathBuf, String),
    #[error(transparent)]
    Geometry(#[from] touchcal_core::geometry::GeometryError),
    #[error(transparent)]
    Filter(#[from] touchcal_core::filter::FilterError),
    #[error(transparent)]
    Action(#[from] touchcal_core::action::ActionError),
    #[error(transparent)]
    Sim(#[from] touchcal_core::sim::SimError),
    #[error(transparent)]
    Kinematics(#[from] touchcal_core::kinematics::KinematicsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
