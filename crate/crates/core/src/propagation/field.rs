use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{synth_tl_bands, SOURCE_DEPTH_M};
use super::PropagationError;
use crate::geo::{from_planar, Environment, GeoPoint, PlanarPoint};
use crate::manifest::Manifest;
use crate::noise_source::BAND_COUNT;

pub const INPUT_DIM: usize = 5;
pub const MAX_RECEIVER_DEPTH_M: f64 = 100.0;

const CACHE_KIND: &str = "tl_field_cache";
const SAMPLES_FILE: &str = "samples.csv";
const MANIFEST_FILE: &str = "manifest.txt";

/// One source/receiver pair with its band TL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlSample {
    /// `(s_lat, s_lon, r_lat, r_lon, r_z)`.
    pub x: [f64; INPUT_DIM],
    pub tl: [f64; BAND_COUNT],
}

impl TlSample {
    pub fn input(src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> [f64; INPUT_DIM] {
        [src.lat, src.lon, rcv.lat, rcv.lon, rcv.depth]
    }
}

/// Receiver lattice around each source: range × bearing × depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub ranges_m: Vec<f64>,
    pub bearings_deg: Vec<f64>,
    pub depths_m: Vec<f64>,
}

impl LatticeSpec {
    /// `n_ranges` equally spaced ranges in `[min_range, radius]`, `n_bearings`
    /// bearings from north, and the given depths.
    pub fn regular(min_range_m: f64, radius_m: f64, n_ranges: usize, n_bearings: usize, depths_m: Vec<f64>) -> Self {
        let ranges_m = if n_ranges <= 1 {
            vec![radius_m]
        } else {
            (0..n_ranges)
                .map(|i| min_range_m + (radius_m - min_range_m) * i as f64 / (n_ranges - 1) as f64)
                .collect()
        };
        let bearings_deg = (0..n_bearings).map(|i| 360.0 * i as f64 / n_bearings as f64).collect();
        Self { ranges_m, bearings_deg, depths_m }
    }

    pub fn cardinality(&self) -> usize {
        self.ranges_m.len() * self.bearings_deg.len() * self.depths_m.len()
    }
}

/// Precomputed band TL around a set of ship source positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlFieldCache {
    pub sources: Vec<GeoPoint<f64>>,
    pub radius_m: f64,
    pub lattice: LatticeSpec,
    pub samples: Vec<TlSample>,
}

/// Evaluates the synthetic field on the lattice around every source.
///
/// Receivers outside the grid or beyond `radius_m` are skipped. Output order is
/// source, range, bearing, depth regardless of thread scheduling.
pub fn precompute_field(
    sources: &[GeoPoint<f64>],
    radius_m: f64,
    lattice: &LatticeSpec,
    env: &Environment<f64>,
) -> Result<TlFieldCache, PropagationError> {
    if sources.is_empty() {
        return Err(PropagationError::Config("source list is empty".into()));
    }
    if !(radius_m > 0.0) {
        return Err(PropagationError::Config(format!("radius must be positive, got {radius_m}")));
    }
    if let Some(d) = lattice.depths_m.iter().find(|d| !(0.0..=MAX_RECEIVER_DEPTH_M).contains(*d)) {
        return Err(PropagationError::Config(format!("receiver depth {d} m outside [0, 100]")));
    }
    let sources: Vec<GeoPoint<f64>> = sources.iter().map(|s| s.with_depth(SOURCE_DEPTH_M)).collect();
    for s in &sources {
        if !env.is_navigable(s) {
            return Err(PropagationError::Config(format!("source ({}, {}) is not navigable", s.lat, s.lon)));
        }
    }
    let mut jobs = Vec::new();
    for (si, _) in sources.iter().enumerate() {
        for &r in lattice.ranges_m.iter().filter(|&&r| r > 0.0 && r <= radius_m) {
            for &b in &lattice.bearings_deg {
                jobs.push((si, r, b));
            }
        }
    }
    let grid = &env.grid;
    let chunks: Vec<Vec<TlSample>> = jobs
        .par_iter()
        .map(|&(si, r, b)| {
            let src = sources[si];
            let theta = b.to_radians();
            let surface = from_planar(&PlanarPoint::new(r * theta.sin(), r * theta.cos()), &src);
            if !grid.contains(&surface) {
                return Vec::new();
            }
            lattice
                .depths_m
                .iter()
                .map(|&z| {
                    let rcv = surface.with_depth(z);
                    let tl = synth_tl_bands(&src, &rcv, grid).expect("receiver checked in bounds");
                    TlSample { x: TlSample::input(&src, &rcv), tl }
                })
                .collect()
        })
        .collect();
    Ok(TlFieldCache { sources, radius_m, lattice: lattice.clone(), samples: chunks.into_iter().flatten().collect() })
}

impl TlFieldCache {
    pub fn band_matrix(&self) -> Vec<[f64; BAND_COUNT]> {
        self.samples.iter().map(|s| s.tl).collect()
    }

    pub fn manifest(&self) -> Manifest {
        let mut m = Manifest::new(CACHE_KIND);
        let src: Vec<String> = self.sources.iter().map(|s| format!("{} {}", s.lat, s.lon)).collect();
        m.set("radius_m", self.radius_m)
            .set("source_depth_m", SOURCE_DEPTH_M)
            .set("sources", src.join("; "))
            .set_list("lattice_ranges_m", &self.lattice.ranges_m)
            .set_list("lattice_bearings_deg", &self.lattice.bearings_deg)
            .set_list("lattice_depths_m", &self.lattice.depths_m)
            .set("sample_count", self.samples.len());
        m
    }

    /// Writes `samples.csv` and `manifest.txt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), PropagationError> {
        fs::create_dir_all(dir).map_err(|e| PropagationError::Io(e.to_string()))?;
        let mut w = csv::Writer::from_path(dir.join(SAMPLES_FILE))?;
        let mut header: Vec<String> = ["s_lat", "s_lon", "r_lat", "r_lon", "r_z"].map(String::from).to_vec();
        header.extend((1..=BAND_COUNT).map(|b| format!("tl_b{b}")));
        w.write_record(&header)?;
        for s in &self.samples {
            w.write_record(s.x.iter().chain(s.tl.iter()).map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| PropagationError::Io(e.to_string()))?;
        self.manifest().write(&dir.join(MANIFEST_FILE))?;
        Ok(())
    }

    pub fn exists(dir: &Path) -> bool {
        dir.join(SAMPLES_FILE).is_file() && dir.join(MANIFEST_FILE).is_file()
    }

    pub fn load(dir: &Path) -> Result<Self, PropagationError> {
        let m = Manifest::read(&dir.join(MANIFEST_FILE))?;
        m.expect_kind(CACHE_KIND)?;
        let sources = m
            .get("sources")?
            .split(';')
            .map(|pair| {
                let v: Vec<f64> = pair.split_whitespace().filter_map(|t| t.parse().ok()).collect();
                if v.len() == 2 {
                    Ok(GeoPoint::surface(v[0], v[1]).with_depth(SOURCE_DEPTH_M))
                } else {
                    Err(PropagationError::Config(format!("bad source entry '{pair}' in manifest")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let lattice = LatticeSpec {
            ranges_m: m.get_list("lattice_ranges_m")?,
            bearings_deg: m.get_list("lattice_bearings_deg")?,
            depths_m: m.get_list("lattice_depths_m")?,
        };
        let mut r = csv::Reader::from_path(dir.join(SAMPLES_FILE))?;
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|t| t.parse::<f64>().map_err(|_| PropagationError::Config(format!("bad number '{t}'"))))
                .collect::<Result<_, _>>()?;
            if vals.len() != INPUT_DIM + BAND_COUNT {
                return Err(PropagationError::Shape { expected: INPUT_DIM + BAND_COUNT, found: vals.len() });
            }
            let mut x = [0.0; INPUT_DIM];
            x.copy_from_slice(&vals[..INPUT_DIM]);
            let mut tl = [0.0; BAND_COUNT];
            tl.copy_from_slice(&vals[INPUT_DIM..]);
            samples.push(TlSample { x, tl });
        }
        let expected = m.get_f64("sample_count")? as usize;
        if expected != samples.len() {
            return Err(PropagationError::Shape { expected, found: samples.len() });
        }
        Ok(Self { sources, radius_m: m.get_f64("radius_m")?, lattice, samples })
    }
}
