//! Mammal initialisation from sighting densities and straight-line drift.

mod kde;
mod mammal;

use std::path::Path;

use thiserror::Error;

pub use kde::{kde_fit, BandwidthRule, KdeModel, MAX_REJECTIONS};
pub use mammal::{
    advance, forecast, init_population, step_trajectory, MammalState, DEFAULT_SPEED_RANGE_KT, MAX_MAMMAL_DEPTH_M,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WildlifeError {
    #[error("no data points")]
    EmptyData,
    #[error("bandwidth in dimension {dim} is zero; use a fixed bandwidth for single or constant samples")]
    DegenerateBandwidth { dim: usize },
    #[error("no acceptable sample after {attempts} attempts in {region}")]
    Sampling { attempts: usize, region: String },
    #[error("{0}")]
    Config(String),
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

fn read_numeric_rows(path: &Path, min_cols: usize, max_cols: usize) -> Result<Vec<Vec<f64>>, WildlifeError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| WildlifeError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let parse_err = |message: String| WildlifeError::Parse { path: path.display().to_string(), line, message };
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row: Vec<f64> = rec
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<f64>().map_err(|_| parse_err(format!("'{t}' is not a number"))))
            .collect::<Result<_, _>>()?;
        if row.len() < min_cols || row.len() > max_cols {
            return Err(parse_err(format!("expected {min_cols} to {max_cols} values, found {}", row.len())));
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Sightings CSV with columns `lat, lon[, weight]`. Weights are returned only
/// when every row has one.
pub fn read_sightings(path: &Path) -> Result<(Vec<Vec<f64>>, Option<Vec<f64>>), WildlifeError> {
    let rows = read_numeric_rows(path, 2, 3)?;
    if rows.is_empty() {
        return Err(WildlifeError::EmptyData);
    }
    let weights = rows.iter().all(|r| r.len() == 3).then(|| rows.iter().map(|r| r[2]).collect());
    Ok((rows.iter().map(|r| vec![r[0], r[1]]).collect(), weights))
}

/// Depth CSV with a single `max_depth_m` column.
pub fn read_depths(path: &Path) -> Result<Vec<Vec<f64>>, WildlifeError> {
    let rows = read_numeric_rows(path, 1, 1)?;
    if rows.is_empty() {
        return Err(WildlifeError::EmptyData);
    }
    Ok(rows)
}
