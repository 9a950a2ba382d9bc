use serde::{Deserialize, Serialize};

use super::point::{to_planar, GeoPoint};
use super::GeoError;
use crate::num::Real;

/// Maximum spacing between line-of-sight samples, meters.
pub const LOS_STEP_M: f64 = 250.0;

/// Regular lat/lon grid of water depths (positive) and land elevations (negative).
///
/// Node `(row, col)` sits at `(origin_lat + row·cell, origin_lon + col·cell)`;
/// row 0 is the southern edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BathymetryGrid<T> {
    pub origin_lat: T,
    pub origin_lon: T,
    pub cell_size: T,
    pub rows: usize,
    pub cols: usize,
    depth: Vec<T>,
}

impl<T: Real> BathymetryGrid<T> {
    pub fn new(
        origin_lat: T,
        origin_lon: T,
        cell_size: T,
        rows: usize,
        cols: usize,
        depth: Vec<T>,
    ) -> Result<Self, GeoError> {
        if rows == 0 || cols == 0 {
            return Err(GeoError::InvalidGrid("grid must have at least one node".into()));
        }
        if !(cell_size > T::zero()) || !cell_size.is_finite() {
            return Err(GeoError::InvalidGrid(format!("cell size must be positive, got {cell_size}")));
        }
        if depth.len() != rows * cols {
            return Err(GeoError::InvalidGrid(format!(
                "expected {} depth values, got {}",
                rows * cols,
                depth.len()
            )));
        }
        if let Some(bad) = depth.iter().position(|d| !d.is_finite()) {
            return Err(GeoError::InvalidGrid(format!("non-finite depth at index {bad}")));
        }
        Ok(Self { origin_lat, origin_lon, cell_size, rows, cols, depth })
    }

    /// Builds a grid by evaluating `f(lat, lon)` at every node.
    pub fn from_fn(
        origin_lat: T,
        origin_lon: T,
        cell_size: T,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(T, T) -> T,
    ) -> Result<Self, GeoError> {
        let mut depth = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                let (lat, lon) = node_coords(origin_lat, origin_lon, cell_size, r, c);
                depth.push(f(lat, lon));
            }
        }
        Self::new(origin_lat, origin_lon, cell_size, rows, cols, depth)
    }

    pub fn depths(&self) -> &[T] {
        &self.depth
    }

    pub fn node(&self, row: usize, col: usize) -> T {
        self.depth[row * self.cols + col]
    }

    pub fn node_position(&self, row: usize, col: usize) -> (T, T) {
        node_coords(self.origin_lat, self.origin_lon, self.cell_size, row, col)
    }

    pub fn max_lat(&self) -> T {
        self.origin_lat + self.cell_size * T::lit((self.rows - 1) as f64)
    }

    pub fn max_lon(&self) -> T {
        self.origin_lon + self.cell_size * T::lit((self.cols - 1) as f64)
    }

    pub fn contains(&self, p: &GeoPoint<T>) -> bool {
        let eps = self.cell_size * T::lit(1e-9);
        p.lat.is_finite()
            && p.lon.is_finite()
            && p.lat >= self.origin_lat - eps
            && p.lat <= self.max_lat() + eps
            && p.lon >= self.origin_lon - eps
            && p.lon <= self.max_lon() + eps
    }

    fn check(&self, p: &GeoPoint<T>) -> Result<(), GeoError> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(GeoError::OutOfBounds { lat: p.lat.as_f64(), lon: p.lon.as_f64() })
        }
    }

    /// Fractional (row, col) coordinates clamped to the grid.
    fn fractional(&self, p: &GeoPoint<T>) -> (T, T) {
        let fr = ((p.lat - self.origin_lat) / self.cell_size).max(T::zero());
        let fc = ((p.lon - self.origin_lon) / self.cell_size).max(T::zero());
        (
            fr.min(T::lit((self.rows - 1) as f64)),
            fc.min(T::lit((self.cols - 1) as f64)),
        )
    }

    /// Index of the node nearest to `p`.
    pub fn nearest_node(&self, p: &GeoPoint<T>) -> Result<(usize, usize), GeoError> {
        self.check(p)?;
        let (fr, fc) = self.fractional(p);
        Ok((fr.round().as_f64() as usize, fc.round().as_f64() as usize))
    }

    /// Bilinear interpolation of the four surrounding nodes.
    pub fn depth_at(&self, p: &GeoPoint<T>) -> Result<T, GeoError> {
        self.check(p)?;
        let (fr, fc) = self.fractional(p);
        let r0 = fr.floor().as_f64() as usize;
        let c0 = fc.floor().as_f64() as usize;
        let r1 = (r0 + 1).min(self.rows - 1);
        let c1 = (c0 + 1).min(self.cols - 1);
        let tr = fr - T::lit(r0 as f64);
        let tc = fc - T::lit(c0 as f64);
        let one = T::one();
        let south = self.node(r0, c0) * (one - tc) + self.node(r0, c1) * tc;
        let north = self.node(r1, c0) * (one - tc) + self.node(r1, c1) * tc;
        Ok(south * (one - tr) + north * tr)
    }

    /// True when the node nearest to `p` is land (negative depth).
    pub fn is_land(&self, p: &GeoPoint<T>) -> Result<bool, GeoError> {
        let (r, c) = self.nearest_node(p)?;
        Ok(self.node(r, c) < T::zero())
    }

    /// Fraction of line-of-sight samples between `src` and `rcv` that fall on land.
    ///
    /// Samples are spaced at most [`LOS_STEP_M`] apart including both endpoints.
    /// Endpoints are put in a canonical order first so the result is exactly
    /// symmetric.
    pub fn blocked_fraction(&self, src: &GeoPoint<T>, rcv: &GeoPoint<T>) -> Result<T, GeoError> {
        self.check(src)?;
        self.check(rcv)?;
        let (a, b) = if (src.lat, src.lon) <= (rcv.lat, rcv.lon) { (src, rcv) } else { (rcv, src) };
        let d = to_planar(b, a)?;
        let dist = d.x.hypot(d.y).as_f64();
        let segments = ((dist / LOS_STEP_M).ceil() as usize).max(1);
        let mut land = 0usize;
        for k in 0..=segments {
            let t = T::lit(k as f64 / segments as f64);
            let q = GeoPoint::surface(a.lat + (b.lat - a.lat) * t, a.lon + (b.lon - a.lon) * t);
            if self.is_land(&q)? {
                land += 1;
            }
        }
        Ok(T::lit(land as f64 / (segments + 1) as f64))
    }
}

fn node_coords<T: Real>(lat0: T, lon0: T, cell: T, row: usize, col: usize) -> (T, T) {
    (lat0 + cell * T::lit(row as f64), lon0 + cell * T::lit(col as f64))
}

/// Grid-aligned land and shipping-lane layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    pub rows: usize,
    pub cols: usize,
    is_land: Vec<bool>,
    is_lane: Vec<bool>,
}

impl RegionMask {
    pub fn new(rows: usize, cols: usize, is_land: Vec<bool>, is_lane: Vec<bool>) -> Result<Self, GeoError> {
        if is_land.len() != rows * cols || is_lane.len() != rows * cols {
            return Err(GeoError::InvalidGrid("mask layers do not match grid dimensions".into()));
        }
        if let Some(i) = (0..rows * cols).find(|&i| is_land[i] && is_lane[i]) {
            return Err(GeoError::InvalidGrid(format!(
                "cell ({}, {}) is marked both land and lane",
                i / cols,
                i % cols
            )));
        }
        Ok(Self { rows, cols, is_land, is_lane })
    }

    /// Land from negative depths (plus an optional explicit land layer); lanes
    /// from the optional lane layer (all water when absent), minus land.
    pub fn derive<T: Real>(
        grid: &BathymetryGrid<T>,
        lane: Option<&[bool]>,
        land: Option<&[bool]>,
    ) -> Result<Self, GeoError> {
        let n = grid.rows * grid.cols;
        for layer in [lane, land].into_iter().flatten() {
            if layer.len() != n {
                return Err(GeoError::InvalidGrid("mask layers do not match grid dimensions".into()));
            }
        }
        let is_land: Vec<bool> = (0..n)
            .map(|i| grid.depths()[i] < T::zero() || land.is_some_and(|l| l[i]))
            .collect();
        let is_lane = (0..n).map(|i| !is_land[i] && lane.is_none_or(|l| l[i])).collect();
        Self::new(grid.rows, grid.cols, is_land, is_lane)
    }

    pub fn land(&self, row: usize, col: usize) -> bool {
        self.is_land[row * self.cols + col]
    }

    pub fn lane(&self, row: usize, col: usize) -> bool {
        self.is_lane[row * self.cols + col]
    }

    pub fn lane_layer(&self) -> &[bool] {
        &self.is_lane
    }

    pub fn land_layer(&self) -> &[bool] {
        &self.is_land
    }
}

/// True iff the cell at `p` is lane, not land, and at least `min_depth` deep.
pub fn is_navigable<T: Real>(
    p: &GeoPoint<T>,
    mask: &RegionMask,
    grid: &BathymetryGrid<T>,
    min_depth: T,
) -> Result<bool, GeoError> {
    if mask.rows != grid.rows || mask.cols != grid.cols {
        return Err(GeoError::InvalidGrid("mask and grid dimensions differ".into()));
    }
    let (r, c) = grid.nearest_node(p)?;
    Ok(mask.lane(r, c) && !mask.land(r, c) && grid.depth_at(p)? >= min_depth)
}
