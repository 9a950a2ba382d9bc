//! Scenario files: JSON objects with unit-suffixed keys.
//!
//! Relative data paths resolve against the scenario file's directory. Seeds in
//! the `seeds` section override the `seed` fields of the planner and GA
//! sections.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HubError;
use crate::geo::GeoPoint;
use crate::noise_source::{ShipClass, ShipSpec};
use crate::propagation::{LatticeSpec, RbfConfig, SigmaRule, MAX_RECEIVER_DEPTH_M};
use crate::route_planner::PlannerConfig;
use crate::sim_engine::{SimConfig, DEFAULT_REPLAN_H, DEFAULT_TICK_H};
use crate::speed_optimizer::{GaConfig, DEFAULT_LEGS, DEFAULT_TABLE_STEP_M};
use crate::wildlife::{MammalState, MAX_MAMMAL_DEPTH_M};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub lat_deg: f64,
    pub lon_deg: f64,
}

impl Position {
    pub fn geo(&self) -> GeoPoint<f64> {
        GeoPoint::surface(self.lat_deg, self.lon_deg)
    }
}

impl From<(f64, f64)> for Position {
    fn from((lat_deg, lon_deg): (f64, f64)) -> Self {
        Self { lat_deg, lon_deg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShipSection {
    #[serde(default = "default_ship_name")]
    pub name: String,
    pub ais_type_id: i64,
    /// Derived from the AIS id when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ship_class: Option<ShipClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design_speed_kt: Option<f64>,
    pub length_ft: f64,
    pub v_min_kt: f64,
    pub v_max_kt: f64,
}

fn default_ship_name() -> String {
    "ship".into()
}

impl ShipSection {
    pub fn spec(&self) -> ShipSpec {
        ShipSpec {
            name: self.name.clone(),
            ais_type_id: self.ais_type_id,
            ship_class: self
                .ship_class
                .unwrap_or_else(|| ShipClass::from_ais(self.ais_type_id, self.length_ft, self.design_speed_kt)),
            length_ft: self.length_ft,
            v_min_kt: self.v_min_kt,
            v_max_kt: self.v_max_kt,
        }
    }
}

impl From<&ShipSpec> for ShipSection {
    fn from(s: &ShipSpec) -> Self {
        Self {
            name: s.name.clone(),
            ais_type_id: s.ais_type_id,
            ship_class: Some(s.ship_class),
            design_speed_kt: None,
            length_ft: s.length_ft,
            v_min_kt: s.v_min_kt,
            v_max_kt: s.v_max_kt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MammalSpec {
    pub id: u32,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub depth_m: f64,
    #[serde(default)]
    pub speed_kt: f64,
    #[serde(default)]
    pub heading_deg: f64,
}

impl MammalSpec {
    pub fn state(&self) -> MammalState {
        MammalState {
            id: self.id,
            position: GeoPoint::surface(self.lat_deg, self.lon_deg).with_depth(self.depth_m),
            speed_kt: self.speed_kt,
            heading_deg: self.heading_deg,
        }
    }
}

impl From<&MammalState> for MammalSpec {
    fn from(m: &MammalState) -> Self {
        Self {
            id: m.id,
            lat_deg: m.position.lat,
            lon_deg: m.position.lon,
            depth_m: m.position.depth,
            speed_kt: m.speed_kt,
            heading_deg: m.heading_deg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// ESRI ASCII grid, NODATA is land.
    pub bathymetry: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sightings: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depths: Option<PathBuf>,
    /// Directory holding the field cache and the fitted surrogate.
    pub tl_cache: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ais_track: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub planner: u64,
    pub ga: u64,
    pub wildlife: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Self::from_base(0)
    }
}

impl Seeds {
    /// Distinct stage seeds from one command-line seed.
    pub fn from_base(seed: u64) -> Self {
        Self { planner: seed, ga: seed.wrapping_add(1), wildlife: seed.wrapping_add(2) }
    }
}

/// Which TL model feeds the planner, optimizer and simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TlMode {
    /// Fitted surrogate from the TL cache.
    #[default]
    Rbf,
    /// Synthetic field evaluated directly; needs no cache.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TlSettings {
    pub mode: TlMode,
    /// Field sources, evenly spaced along the departure-destination chord.
    pub source_count: usize,
    pub radius_m: f64,
    pub min_range_m: f64,
    pub ranges: usize,
    pub bearings: usize,
    pub depths_m: Vec<f64>,
    pub rbf: RbfConfig,
}

impl Default for TlSettings {
    fn default() -> Self {
        Self {
            mode: TlMode::Rbf,
            source_count: 12,
            radius_m: 15_000.0,
            min_range_m: 500.0,
            ranges: 12,
            bearings: 16,
            depths_m: vec![1.0],
            rbf: RbfConfig {
                clusters: 150,
                sigma: SigmaRule::MedianNearestNeighbor { scale: 1.2 },
                ..RbfConfig::default()
            },
        }
    }
}

impl TlSettings {
    pub fn lattice(&self) -> LatticeSpec {
        LatticeSpec::regular(self.min_range_m, self.radius_m, self.ranges, self.bearings, self.depths_m.clone())
    }

    /// Source positions at the centres of `source_count` equal pieces of the
    /// chord.
    pub fn sources(&self, a: &GeoPoint<f64>, b: &GeoPoint<f64>) -> Vec<GeoPoint<f64>> {
        let n = self.source_count;
        (0..n)
            .map(|k| {
                let f = (k as f64 + 0.5) / n as f64;
                GeoPoint::surface(a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub tick_h: f64,
    /// 0 disables re-planning.
    pub replan_cadence_h: f64,
    pub table_step_m: f64,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self { tick_h: DEFAULT_TICK_H, replan_cadence_h: DEFAULT_REPLAN_H, table_step_m: DEFAULT_TABLE_STEP_M }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub departure: Position,
    pub destination: Position,
    pub eta_h: f64,
    pub ship: ShipSection,
    #[serde(default = "default_min_depth")]
    pub min_depth_m: f64,
    /// Mammals drawn from the sighting densities. Ignored when `mammals` is set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mammal_count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mammals: Option<Vec<MammalSpec>>,
    pub data: DataPaths,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_legs")]
    pub legs: usize,
    #[serde(default)]
    pub tl: TlSettings,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub ga: GaConfig,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(skip)]
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_name() -> String {
    "scenario".into()
}

fn default_min_depth() -> f64 {
    10.0
}

fn default_legs() -> usize {
    DEFAULT_LEGS
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let leaf = key.rsplit('.').next().unwrap_or(key);
    let leaf = leaf.split('[').next().unwrap_or(leaf);
    let needle = format!("\"{leaf}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}

fn backticked(message: &str) -> Option<&str> {
    let start = message.find('`')? + 1;
    let len = message[start..].find('`')?;
    Some(&message[start..start + len])
}

impl ScenarioConfig {
    /// Parses and validates a scenario; relative paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, HubError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: ScenarioConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.inner();
            let message = inner.to_string();
            let key = match (message.starts_with("missing field") || message.starts_with("unknown field"), backticked(&message)) {
                (true, Some(field)) if path == "." => field.to_string(),
                (true, Some(field)) => format!("{path}.{field}"),
                _ => path,
            };
            let line = (inner.line() > 0).then_some(inner.line());
            HubError::Parse { key, line, message: message.split(" at line ").next().unwrap_or(&message).to_string() }
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.normalize();
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    /// Pretty JSON with every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises") + "\n"
    }

    pub(crate) fn normalize(&mut self) {
        self.planner.seed = self.seeds.planner;
        self.ga.seed = self.seeds.ga;
        self.tl.rbf.seed = self.seeds.planner;
        self.warnings.clear();
        if self.mammals.is_some() && self.mammal_count.is_some() {
            self.warnings
                .push("both mammal_count and mammals are present; the explicit mammals are used".into());
        }
    }

    /// Replaces every seed, as the `--seed` flag does.
    pub fn reseed(&mut self, seed: u64) {
        self.seeds = Seeds::from_base(seed);
        self.normalize();
    }

    pub fn validate(&self) -> Result<(), HubError> {
        self.validate_with(&self.to_json())
    }

    fn validate_with(&self, text: &str) -> Result<(), HubError> {
        let err = |key: &str, message: String| HubError::Parse { key: key.into(), line: line_of(text, key), message };
        if !(self.eta_h > 0.0) || !self.eta_h.is_finite() {
            return Err(err("eta_h", format!("must be a positive number of hours, got {}", self.eta_h)));
        }
        for (key, p) in [("departure", &self.departure), ("destination", &self.destination)] {
            if !(-90.0..=90.0).contains(&p.lat_deg) {
                return Err(err(&format!("{key}.lat_deg"), format!("{} is outside [-90, 90]", p.lat_deg)));
            }
            if !(-180.0..=180.0).contains(&p.lon_deg) {
                return Err(err(&format!("{key}.lon_deg"), format!("{} is outside [-180, 180]", p.lon_deg)));
            }
        }
        if self.departure == self.destination {
            return Err(err("destination", "departure and destination coincide".into()));
        }
        let s = &self.ship;
        if !(s.length_ft > 0.0) {
            return Err(err("ship.length_ft", format!("must be positive, got {}", s.length_ft)));
        }
        if !(s.v_min_kt > 0.0) {
            return Err(err("ship.v_min_kt", format!("must be positive, got {}", s.v_min_kt)));
        }
        if !(s.v_max_kt >= s.v_min_kt) {
            return Err(err("ship.v_max_kt", format!("{} is below v_min_kt {}", s.v_max_kt, s.v_min_kt)));
        }
        if !(self.min_depth_m >= 0.0) {
            return Err(err("min_depth_m", format!("must be ≥ 0, got {}", self.min_depth_m)));
        }
        if self.legs == 0 {
            return Err(err("legs", "must be at least 1".into()));
        }
        match (&self.mammals, self.mammal_count) {
            (Some(ms), _) => {
                let mut ids = HashSet::new();
                for (i, m) in ms.iter().enumerate() {
                    let key = format!("mammals[{i}]");
                    if !ids.insert(m.id) {
                        return Err(err(&format!("{key}.id"), format!("duplicate mammal id {}", m.id)));
                    }
                    if !(0.0..=MAX_MAMMAL_DEPTH_M).contains(&m.depth_m) {
                        return Err(err(&format!("{key}.depth_m"), format!("{} is outside [0, 100]", m.depth_m)));
                    }
                    if !(m.speed_kt >= 0.0) {
                        return Err(err(&format!("{key}.speed_kt"), format!("must be ≥ 0, got {}", m.speed_kt)));
                    }
                    if !(-90.0..=90.0).contains(&m.lat_deg) || !(-180.0..=180.0).contains(&m.lon_deg) {
                        return Err(err(&format!("{key}.lat_deg"), "position out of range".into()));
                    }
                }
            }
            (None, Some(n)) if n > 0 => {
                if self.data.sightings.is_none() {
                    return Err(err("data.sightings", "required when mammal_count is used".into()));
                }
                if self.data.depths.is_none() {
                    return Err(err("data.depths", "required when mammal_count is used".into()));
                }
            }
            (None, Some(_)) => {}
            (None, None) => return Err(err("mammal_count", "give mammal_count or an explicit mammals list".into())),
        }
        let tl = &self.tl;
        if tl.source_count == 0 || tl.ranges == 0 || tl.bearings == 0 || tl.depths_m.is_empty() {
            return Err(err("tl", "source_count, ranges, bearings and depths_m must be non-empty".into()));
        }
        if !(tl.radius_m > 0.0) || !(tl.min_range_m >= 0.0) || tl.min_range_m > tl.radius_m {
            return Err(err("tl.radius_m", "need 0 ≤ min_range_m ≤ radius_m and radius_m > 0".into()));
        }
        if let Some(d) = tl.depths_m.iter().find(|d| !(0.0..=MAX_RECEIVER_DEPTH_M).contains(*d)) {
            return Err(err("tl.depths_m", format!("{d} is outside [0, 100]")));
        }
        if tl.rbf.clusters == 0 || tl.rbf.per_cluster == 0 {
            return Err(err("tl.rbf", "clusters and per_cluster must be at least 1".into()));
        }
        self.planner.validate().map_err(|e| err("planner", e.to_string()))?;
        self.ga.validate().map_err(|e| err("ga", e.to_string()))?;
        if !(self.sim.tick_h > 0.0) {
            return Err(err("sim.tick_h", format!("must be positive, got {}", self.sim.tick_h)));
        }
        if !(self.sim.replan_cadence_h >= 0.0) {
            return Err(err("sim.replan_cadence_h", "must be ≥ 0".into()));
        }
        if !(self.sim.table_step_m > 0.0) {
            return Err(err("sim.table_step_m", "must be positive".into()));
        }
        self.check_files()
    }

    fn check_files(&self) -> Result<(), HubError> {
        let d = &self.data;
        let uses_densities = self.mammals.is_none();
        let files = [
            ("data.bathymetry", Some(&d.bathymetry), true),
            ("data.lane_mask", d.lane_mask.as_ref(), true),
            ("data.land_mask", d.land_mask.as_ref(), true),
            ("data.sightings", d.sightings.as_ref(), uses_densities),
            ("data.depths", d.depths.as_ref(), uses_densities),
            ("data.ais_track", d.ais_track.as_ref(), true),
        ];
        for (key, path, needed) in files {
            if let (Some(p), true) = (path, needed) {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(HubError::MissingFile { key: key.into(), path: full });
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn tl_cache_dir(&self) -> PathBuf {
        self.resolve(&self.data.tl_cache)
    }

    pub fn ship_spec(&self) -> ShipSpec {
        self.ship.spec()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            tick_h: self.sim.tick_h,
            replan_cadence_h: self.sim.replan_cadence_h,
            ga: self.ga.clone(),
            table_step_m: self.sim.table_step_m,
        }
    }
}

/// Reads, validates and echoes a scenario file. Defaults and warnings are
/// logged.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, HubError> {
    if !path.is_file() {
        return Err(HubError::MissingFile { key: "scenario".into(), path: path.to_path_buf() });
    }
    let text = std::fs::read_to_string(path).map_err(|e| HubError::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let cfg = ScenarioConfig::from_json(&text, &base)?;
    for w in &cfg.warnings {
        log::warn!("{}: {w}", path.display());
    }
    log::info!("scenario {} with defaults applied:\n{}", path.display(), cfg.to_json());
    Ok(cfg)
}
