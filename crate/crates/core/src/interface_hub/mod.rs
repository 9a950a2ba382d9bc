//! Scenario files, AIS baselines, the TL cache lifecycle and the end-to-end
//! pipeline shared by the command line and the HTTP service.

pub mod ais;
pub mod fixtures;
pub mod pipeline;
pub mod scenario;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ais::{ingest_ais, parse_ais, AisBaseline, AisRecord, AisTrack, MAX_AIS_GAP_S};
pub use pipeline::{Engine, ResultBundle, RunMetadata, TlTile, VoyageResult};
pub use scenario::{parse_scenario, DataPaths, MammalSpec, Position, ScenarioConfig, Seeds, ShipSection, SimSettings, TlMode, TlSettings};

use crate::geo::GeoError;
use crate::noise_source::SourceError;
use crate::propagation::PropagationError;
use crate::route_planner::PlannerError;
use crate::sim_engine::SimError;
use crate::speed_optimizer::SpeedError;
use crate::wildlife::WildlifeError;

#[derive(Debug, Error)]
pub enum HubError {
    /// Malformed or invalid scenario. `line` is 1-based when known.
    #[error("{}", parse_message(key, *line, message))]
    Parse { key: String, line: Option<usize>, message: String },
    #[error("{key}: file {} does not exist", path.display())]
    MissingFile { key: String, path: PathBuf },
    #[error("AIS track: {0}")]
    Ais(String),
    #[error("AIS track has missing values spanning more than 30 min: {}", fmt_gaps(.0))]
    AisGaps(Vec<(f64, f64)>),
    #[error("{0}")]
    Validation(String),
    #[error("TL cache {} is missing; run precompute-tl and fit-rbf first", .0.display())]
    MissingCache(PathBuf),
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Wildlife(#[from] WildlifeError),
}

fn parse_message(key: &str, line: Option<usize>, message: &str) -> String {
    match line {
        Some(l) => format!("scenario key '{key}' (line {l}): {message}"),
        None => format!("scenario key '{key}': {message}"),
    }
}

fn fmt_gaps(gaps: &[(f64, f64)]) -> String {
    gaps.iter().map(|(a, b)| format!("[{a}, {b}] s")).collect::<Vec<_>>().join(", ")
}

impl HubError {
    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        HubError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    /// Errors caused by the user's inputs rather than by the engine.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HubError::Parse { .. }
                | HubError::MissingFile { .. }
                | HubError::Ais(_)
                | HubError::AisGaps(_)
                | HubError::Validation(_)
                | HubError::MissingCache(_)
        )
    }
}
