//! ESRI ASCII raster reading and writing.
//!
//! `xllcorner`/`yllcorner` (or the `*center` variants) are taken as the
//! position of the south-west grid node. Values are listed north row first.

use std::fmt::Write as _;
use std::path::Path;

use super::grid::{BathymetryGrid, RegionMask};
use super::GeoError;
use crate::num::Real;

/// Depth substituted for NODATA cells in bathymetry; treated as land.
pub const NODATA_LAND_DEPTH: f64 = -9999.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AsciiGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    /// Row-major, row 0 = south.
    pub values: Vec<f64>,
}

impl AsciiGrid {
    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let mut ncols = None;
        let mut nrows = None;
        let mut xll = None;
        let mut yll = None;
        let mut cellsize = None;
        let mut nodata = None;
        let mut rows_north_first: Vec<f64> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap_or_default();
            if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) {
                let value = parts.next().ok_or_else(|| GeoError::Parse {
                    line: line_no,
                    message: format!("header key '{first}' has no value"),
                })?;
                let num = |v: &str| -> Result<f64, GeoError> {
                    v.parse::<f64>().map_err(|_| GeoError::Parse {
                        line: line_no,
                        message: format!("header '{first}' value '{v}' is not a number"),
                    })
                };
                match first.to_ascii_lowercase().as_str() {
                    "ncols" => ncols = Some(num(value)? as usize),
                    "nrows" => nrows = Some(num(value)? as usize),
                    "xllcorner" | "xllcenter" => xll = Some(num(value)?),
                    "yllcorner" | "yllcenter" => yll = Some(num(value)?),
                    "cellsize" => cellsize = Some(num(value)?),
                    "nodata_value" => nodata = Some(num(value)?),
                    other => {
                        return Err(GeoError::Parse { line: line_no, message: format!("unknown header key '{other}'") })
                    }
                }
                continue;
            }
            for tok in line.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|_| GeoError::Parse {
                    line: line_no,
                    message: format!("value '{tok}' is not a number"),
                })?;
                rows_north_first.push(v);
            }
        }
        let missing = |k: &str| GeoError::Parse { line: 0, message: format!("missing header key '{k}'") };
        let ncols = ncols.ok_or_else(|| missing("ncols"))?;
        let nrows = nrows.ok_or_else(|| missing("nrows"))?;
        let xll = xll.ok_or_else(|| missing("xllcorner"))?;
        let yll = yll.ok_or_else(|| missing("yllcorner"))?;
        let cellsize = cellsize.ok_or_else(|| missing("cellsize"))?;
        if rows_north_first.len() != ncols * nrows {
            return Err(GeoError::Parse {
                line: 0,
                message: format!("expected {} values, found {}", ncols * nrows, rows_north_first.len()),
            });
        }
        let mut values = Vec::with_capacity(ncols * nrows);
        for r in (0..nrows).rev() {
            values.extend_from_slice(&rows_north_first[r * ncols..(r + 1) * ncols]);
        }
        Ok(Self { ncols, nrows, xll, yll, cellsize, nodata, values })
    }

    pub fn read(path: &Path) -> Result<Self, GeoError> {
        let text = std::fs::read_to_string(path).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "ncols {}", self.ncols);
        let _ = writeln!(s, "nrows {}", self.nrows);
        let _ = writeln!(s, "xllcorner {}", self.xll);
        let _ = writeln!(s, "yllcorner {}", self.yll);
        let _ = writeln!(s, "cellsize {}", self.cellsize);
        if let Some(nd) = self.nodata {
            let _ = writeln!(s, "NODATA_value {nd}");
        }
        for r in (0..self.nrows).rev() {
            let row: Vec<String> =
                self.values[r * self.ncols..(r + 1) * self.ncols].iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), GeoError> {
        std::fs::write(path, self.to_text()).map_err(|e| GeoError::Io(format!("{}: {e}", path.display())))
    }

    pub fn from_bathymetry<T: Real>(grid: &BathymetryGrid<T>) -> Self {
        Self {
            ncols: grid.cols,
            nrows: grid.rows,
            xll: grid.origin_lon.as_f64(),
            yll: grid.origin_lat.as_f64(),
            cellsize: grid.cell_size.as_f64(),
            nodata: None,
            values: grid.depths().iter().map(|d| d.as_f64()).collect(),
        }
    }

    pub fn from_layer(grid_like: &AsciiGrid, layer: &[bool]) -> Self {
        Self {
            nodata: None,
            values: layer.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
            ..grid_like.clone()
        }
    }

    fn is_nodata(&self, v: f64) -> bool {
        self.nodata.is_some_and(|nd| v == nd)
    }

    /// NODATA cells become land.
    pub fn to_bathymetry<T: Real>(&self) -> Result<BathymetryGrid<T>, GeoError> {
        let depth = self
            .values
            .iter()
            .map(|&v| T::lit(if self.is_nodata(v) { NODATA_LAND_DEPTH } else { v }))
            .collect();
        BathymetryGrid::new(T::lit(self.yll), T::lit(self.xll), T::lit(self.cellsize), self.nrows, self.ncols, depth)
    }

    /// Non-zero cells are `true`; NODATA is `false`.
    pub fn to_layer(&self) -> Vec<bool> {
        self.values.iter().map(|&v| !self.is_nodata(v) && v != 0.0).collect()
    }

    pub fn same_shape<T: Real>(&self, grid: &BathymetryGrid<T>) -> bool {
        self.nrows == grid.rows && self.ncols == grid.cols
    }
}

/// Loads a bathymetry raster and optional lane/land masks into a grid and mask.
pub fn load_region<T: Real>(
    bathymetry: &Path,
    lane_mask: Option<&Path>,
    land_mask: Option<&Path>,
) -> Result<(BathymetryGrid<T>, RegionMask), GeoError> {
    let grid: BathymetryGrid<T> = AsciiGrid::read(bathymetry)?.to_bathymetry()?;
    let load_layer = |p: &Path| -> Result<Vec<bool>, GeoError> {
        let g = AsciiGrid::read(p)?;
        if !g.same_shape(&grid) {
            return Err(GeoError::InvalidGrid(format!("{} does not match the bathymetry shape", p.display())));
        }
        Ok(g.to_layer())
    };
    let lane = lane_mask.map(load_layer).transpose()?;
    let land = land_mask.map(load_layer).transpose()?;
    let mask = RegionMask::derive(&grid, lane.as_deref(), land.as_deref())?;
    Ok((grid, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "ncols 3\nnrows 2\nxllcorner -123.5\nyllcorner 48.5\ncellsize 0.01\nNODATA_value -9999\n\
                          1 2 3\n-9999 5 6\n";

    #[test]
    fn parses_north_row_first() {
        let g = AsciiGrid::parse(SAMPLE).unwrap();
        assert_eq!(g.values, vec![-9999.0, 5.0, 6.0, 1.0, 2.0, 3.0]);
        let b: BathymetryGrid<f64> = g.to_bathymetry().unwrap();
        assert_eq!(b.node(1, 0), 1.0);
        assert_eq!(b.node(0, 0), NODATA_LAND_DEPTH);
        assert_eq!(b.origin_lon, -123.5);
    }

    #[test]
    fn text_round_trip() {
        let g = AsciiGrid::parse(SAMPLE).unwrap();
        assert_eq!(AsciiGrid::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn reports_bad_lines() {
        let err = AsciiGrid::parse("ncols 1\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nabc\n");
        assert!(err.is_err());
        let err = AsciiGrid::parse("ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1 x\n").unwrap_err();
        assert!(matches!(err, GeoError::Parse { line: 6, .. }), "{err:?}");
        assert!(AsciiGrid::parse("nrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\n1\n").is_err());
    }
}
