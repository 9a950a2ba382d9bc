//! Coordinates, bathymetry, navigability masks and terrain line-of-sight.

mod ascii;
mod grid;
mod point;

use std::sync::Arc;

use thiserror::Error;

pub use ascii::{load_region, AsciiGrid, NODATA_LAND_DEPTH};
pub use grid::{is_navigable, BathymetryGrid, RegionMask, LOS_STEP_M};
pub use point::{from_planar, to_planar, GeoPoint, PlanarPoint, EARTH_RADIUS_M, METERS_PER_NM};

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate (lat {lat}, lon {lon}, depth {depth})")]
    InvalidCoordinate { lat: f64, lon: f64, depth: f64 },
    #[error("point (lat {lat}, lon {lon}) is outside the grid")]
    OutOfBounds { lat: f64, lon: f64 },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("raster parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Bathymetry plus masks, shared read-only by every stage of the engine.
#[derive(Debug, Clone)]
pub struct Environment<T> {
    pub grid: Arc<BathymetryGrid<T>>,
    pub mask: Arc<RegionMask>,
    /// Minimum water depth for ship navigation, meters.
    pub min_depth: T,
}

impl<T: Real> Environment<T> {
    pub fn new(grid: BathymetryGrid<T>, mask: RegionMask, min_depth: T) -> Result<Self, GeoError> {
        if mask.rows != grid.rows || mask.cols != grid.cols {
            return Err(GeoError::InvalidGrid("mask and grid dimensions differ".into()));
        }
        Ok(Self { grid: Arc::new(grid), mask: Arc::new(mask), min_depth })
    }

    /// Ship validity: lane, not land, deep enough. Out-of-bounds is not navigable.
    pub fn is_navigable(&self, p: &GeoPoint<T>) -> bool {
        is_navigable(p, &self.mask, &self.grid, self.min_depth).unwrap_or(false)
    }

    /// Animal validity: any in-bounds water cell.
    pub fn is_water(&self, p: &GeoPoint<T>) -> bool {
        match self.grid.nearest_node(p) {
            Ok((r, c)) => !self.mask.land(r, c) && self.grid.node(r, c) > T::zero(),
            Err(_) => false,
        }
    }

    pub fn blocked_fraction(&self, src: &GeoPoint<T>, rcv: &GeoPoint<T>) -> Result<T, GeoError> {
        self.grid.blocked_fraction(src, rcv)
    }
}
