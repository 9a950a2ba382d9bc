//! Synthetic regions and scenarios used by the bundled examples and tests.
//!
//! The strait fixture is a north-south channel 0.5° long with a shipping lane
//! down its western half and an island between the lane and a resident
//! mammal to the east.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::scenario::{DataPaths, MammalSpec, ScenarioConfig, Seeds, ShipSection, SimSettings, TlSettings};
use super::HubError;
use crate::geo::{AsciiGrid, BathymetryGrid, Environment, GeoPoint, RegionMask, METERS_PER_NM};
use crate::noise_source::{ShipClass, ShipSpec};
use crate::propagation::{RbfConfig, SigmaRule};
use crate::wildlife::MammalState;

pub const STRAIT_LAT0: f64 = 48.40;
pub const STRAIT_LON0: f64 = -123.60;
pub const STRAIT_CELL_DEG: f64 = 0.005;
pub const STRAIT_ROWS: usize = 101;
pub const STRAIT_COLS: usize = 121;
pub const STRAIT_DEPTH_M: f64 = 150.0;

const WEST_COAST_LON: f64 = -123.55;
const EAST_COAST_LON: f64 = -123.05;
const ISLAND_LAT: (f64, f64) = (48.68, 48.85);
const ISLAND_LON: (f64, f64) = (-123.39, -123.35);
const LANE_LON: (f64, f64) = (-123.46, -123.395);

pub const STRAIT_DEPARTURE: (f64, f64) = (48.88, -123.42);
pub const STRAIT_DESTINATION: (f64, f64) = (48.42, -123.42);
pub const STRAIT_MAMMAL: (f64, f64, f64) = (48.646343, -123.313054, 1.0);
pub const STRAIT_ETA_H: f64 = 2.4;

fn strait_depth(lat: f64, lon: f64) -> f64 {
    let island = (ISLAND_LAT.0..=ISLAND_LAT.1).contains(&lat) && (ISLAND_LON.0..=ISLAND_LON.1).contains(&lon);
    if lon < WEST_COAST_LON || lon > EAST_COAST_LON || island {
        -20.0
    } else {
        STRAIT_DEPTH_M
    }
}

pub fn strait_grid() -> BathymetryGrid<f64> {
    BathymetryGrid::from_fn(STRAIT_LAT0, STRAIT_LON0, STRAIT_CELL_DEG, STRAIT_ROWS, STRAIT_COLS, strait_depth)
        .expect("valid fixture grid")
}

/// Lane cells of the strait, row 0 south.
pub fn strait_lane(grid: &BathymetryGrid<f64>) -> Vec<bool> {
    let mut out = Vec::with_capacity(grid.rows * grid.cols);
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let (_, lon) = grid.node_position(r, c);
            out.push(lon >= LANE_LON.0 - 1e-9 && lon <= LANE_LON.1 + 1e-9);
        }
    }
    out
}

pub fn strait_environment() -> Environment<f64> {
    let grid = strait_grid();
    let lane = strait_lane(&grid);
    let mask = RegionMask::derive(&grid, Some(&lane), None).expect("valid fixture mask");
    Environment::new(grid, mask, 10.0).expect("matching fixture shapes")
}

pub fn strait_mammal() -> MammalState {
    let (lat, lon, depth) = STRAIT_MAMMAL;
    MammalState::stationary(1, GeoPoint::surface(lat, lon).with_depth(depth))
}

/// The 684.97 ft general-cargo vessel with an 8–16 kt speed window.
pub fn cargo_ship() -> ShipSpec {
    ShipSpec {
        name: "general cargo".into(),
        ais_type_id: 70,
        ship_class: ShipClass::Other,
        length_ft: 684.97,
        v_min_kt: 8.0,
        v_max_kt: 16.0,
    }
}

/// Straight run down the lane centre, NM.
pub fn strait_lane_length_nm() -> f64 {
    let a = GeoPoint::surface(STRAIT_DEPARTURE.0, STRAIT_DEPARTURE.1);
    let b = GeoPoint::surface(STRAIT_DESTINATION.0, STRAIT_DESTINATION.1);
    a.horizontal_distance(&b) / METERS_PER_NM
}

/// Baseline AIS track: straight down the lane at constant speed, one record
/// every five minutes.
pub fn strait_ais_csv() -> String {
    let n = (STRAIT_ETA_H * 12.0).round() as usize;
    let sog = strait_lane_length_nm() / STRAIT_ETA_H;
    let mut s = String::from("timestamp_s,lat,lon,sog_kt\n");
    let t0 = 1_700_000_000i64;
    for k in 0..=n {
        let f = k as f64 / n as f64;
        let lat = STRAIT_DEPARTURE.0 + (STRAIT_DESTINATION.0 - STRAIT_DEPARTURE.0) * f;
        let lon = STRAIT_DEPARTURE.1 + (STRAIT_DESTINATION.1 - STRAIT_DEPARTURE.1) * f;
        s.push_str(&format!("{},{lat:.6},{lon:.6},{sog:.4}\n", t0 + (f * STRAIT_ETA_H * 3600.0).round() as i64));
    }
    s
}

/// Sightings scattered around the mammal's home range east of the island.
pub fn strait_sightings_csv(seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = strait_environment();
    let lat = Normal::new(STRAIT_MAMMAL.0, 0.03).expect("positive sd");
    let lon = Normal::new(STRAIT_MAMMAL.1 + 0.02, 0.04).expect("positive sd");
    let mut sightings = String::from("lat,lon\n");
    let mut n = 0;
    while n < 60 {
        let p = GeoPoint::surface(lat.sample(&mut rng), lon.sample(&mut rng));
        if env.is_water(&p) {
            sightings.push_str(&format!("{:.6},{:.6}\n", p.lat, p.lon));
            n += 1;
        }
    }
    let mut depths = String::from("max_depth_m\n");
    for _ in 0..40 {
        depths.push_str(&format!("{:.1}\n", rng.random_range(2.0..60.0)));
    }
    (sightings, depths)
}

/// Scenario for the strait with one pinned mammal; paths relative to the
/// scenario file.
pub fn strait_scenario() -> ScenarioConfig {
    let (lat, lon, depth) = STRAIT_MAMMAL;
    let mut cfg = ScenarioConfig {
        name: "strait".into(),
        departure: STRAIT_DEPARTURE.into(),
        destination: STRAIT_DESTINATION.into(),
        eta_h: STRAIT_ETA_H,
        ship: ShipSection::from(&cargo_ship()),
        min_depth_m: 10.0,
        mammal_count: None,
        mammals: Some(vec![MammalSpec { id: 1, lat_deg: lat, lon_deg: lon, depth_m: depth, speed_kt: 0.0, heading_deg: 0.0 }]),
        data: DataPaths {
            bathymetry: "bathymetry.asc".into(),
            lane_mask: Some("lane.asc".into()),
            land_mask: None,
            sightings: Some("sightings.csv".into()),
            depths: Some("depths.csv".into()),
            tl_cache: "tl_cache".into(),
            ais_track: Some("ais.csv".into()),
        },
        seeds: Seeds { planner: 11, ga: 12, wildlife: 13 },
        legs: crate::speed_optimizer::DEFAULT_LEGS,
        tl: TlSettings::default(),
        planner: Default::default(),
        ga: Default::default(),
        sim: SimSettings::default(),
        warnings: Vec::new(),
        base_dir: PathBuf::new(),
    };
    cfg.normalize();
    cfg
}

/// Writes the strait scenario and its data files into `dir`; returns the
/// scenario path.
pub fn write_strait(dir: &Path) -> Result<PathBuf, HubError> {
    std::fs::create_dir_all(dir).map_err(|e| HubError::io(dir, e))?;
    let grid = strait_grid();
    let lane = strait_lane(&grid);
    let put = |name: &str, text: &str| -> Result<(), HubError> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| HubError::io(&p, e))
    };
    put("bathymetry.asc", &AsciiGrid::from_bathymetry(&grid).to_text())?;
    put("lane.asc", &AsciiGrid::from_layer(&AsciiGrid::from_bathymetry(&grid), &lane).to_text())?;
    let (sightings, depths) = strait_sightings_csv(5);
    put("sightings.csv", &sightings)?;
    put("depths.csv", &depths)?;
    put("ais.csv", &strait_ais_csv())?;
    let scenario = dir.join("scenario.json");
    put("scenario.json", &strait_scenario().to_json())?;
    Ok(scenario)
}

/// Small field used to check surrogate accuracy: four sources down the lane,
/// receivers from 3 to 11 km, about 780 samples. Starting the lattice clear of
/// the source avoids near-coincident centres, which keeps the kernel system
/// well conditioned and the ridge error at the centres near 1e-5 dB.
pub fn validation_tl_settings() -> TlSettings {
    TlSettings {
        source_count: 4,
        radius_m: 11_000.0,
        min_range_m: 3_000.0,
        ranges: 10,
        bearings: 20,
        rbf: RbfConfig { clusters: 50, sigma: SigmaRule::MedianNearestNeighbor { scale: 1.3 }, ..RbfConfig::default() },
        ..TlSettings::default()
    }
}

/// Long-haul configuration mirroring the 12.36 h cargo transit.
pub const C1_SCENARIO_JSON: &str = r#"{
  "name": "c1-cargo",
  "departure": { "lat_deg": 48.88, "lon_deg": -123.42 },
  "destination": { "lat_deg": 48.42, "lon_deg": -123.42 },
  "eta_h": 12.36,
  "ship": {
    "name": "general cargo",
    "ais_type_id": 70,
    "ship_class": "Other",
    "length_ft": 684.97,
    "v_min_kt": 8.0,
    "v_max_kt": 16.0
  },
  "mammal_count": 3,
  "data": {
    "bathymetry": "bathymetry.asc",
    "lane_mask": "lane.asc",
    "sightings": "sightings.csv",
    "depths": "depths.csv",
    "tl_cache": "tl_cache"
  },
  "seeds": { "planner": 1, "ga": 2, "wildlife": 3 }
}
"#;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strait_layout() {
        let env = strait_environment();
        let dep = GeoPoint::surface(STRAIT_DEPARTURE.0, STRAIT_DEPARTURE.1);
        let dst = GeoPoint::surface(STRAIT_DESTINATION.0, STRAIT_DESTINATION.1);
        assert!(env.is_navigable(&dep) && env.is_navigable(&dst));
        let m = strait_mammal();
        assert!(m.validate(&env).is_ok());
        assert!(!env.is_navigable(&m.position));
        assert!(!env.is_water(&GeoPoint::surface(48.75, -123.37)));
        // the island shades the northern lane from the mammal
        let north = GeoPoint::surface(48.80, -123.42).with_depth(6.0);
        assert!(env.blocked_fraction(&north, &m.position).unwrap() > 0.0);
        let south = GeoPoint::surface(48.60, -123.42).with_depth(6.0);
        assert_eq!(env.blocked_fraction(&south, &m.position).unwrap(), 0.0);
        assert!((strait_lane_length_nm() - 27.6).abs() < 0.1);
    }
}
