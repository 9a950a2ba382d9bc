//! Scenario-to-results pipeline: environment, mammals, TL cache, route,
//! speeds, replay and comparison.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ais::{ingest_ais, AisBaseline};
use super::scenario::{MammalSpec, ScenarioConfig, Seeds, TlMode};
use super::HubError;
use crate::geo::{load_region, Environment, GeoPoint};
use crate::manifest::{ENGINE_VERSION, FORMAT_VERSION};
use crate::noise_source::ShipSpec;
use crate::propagation::{precompute_field, rbf_fit, DirectTl, RbfInterpolant, TlFieldCache, TlModel};
use crate::route_planner::{plan_route, PlanResult, Route, COST_OFFSET_DB};
use crate::sim_engine::{compare, footprint, run_voyage, ComparisonTable, EventLog, FootprintReport, VoyageContext};
use crate::speed_optimizer::{
    optimize_speeds, ExposureModel, Optimized, SpeedProfile, VoyageConstraints, PENALTY_WEIGHT_DB,
};
use crate::wildlife::{
    init_population, kde_fit, read_depths, read_sightings, BandwidthRule, MammalState, DEFAULT_SPEED_RANGE_KT,
};

const FIELD_DIR: &str = "field";
const RBF_DIR: &str = "rbf";

pub type Progress<'a> = Option<&'a (dyn Fn(f64) + Sync)>;

/// One replayed voyage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoyageResult {
    pub route: Route,
    pub profile: SpeedProfile,
    pub log: EventLog,
    pub footprint: FootprintReport,
}

impl VoyageResult {
    /// Writes `{prefix}_route.csv`, `_profile.csv`, `_log.csv` and `_footprint.csv`.
    pub fn write(&self, dir: &Path, prefix: &str) -> Result<(), HubError> {
        write_text(&dir.join(format!("{prefix}_route.csv")), &self.route.to_csv())?;
        write_text(&dir.join(format!("{prefix}_profile.csv")), &self.profile.to_csv())?;
        write_text(&dir.join(format!("{prefix}_log.csv")), &self.log.to_csv())?;
        write_text(&dir.join(format!("{prefix}_footprint.csv")), &self.footprint.to_csv())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub engine_version: String,
    pub format_version: String,
    pub scenario: String,
    pub seeds: Seeds,
    pub tl_mode: TlMode,
    pub legs: usize,
    pub tick_h: f64,
    pub replan_cadence_h: f64,
    pub cost_offset_db: f64,
    pub penalty_weight_db: f64,
    pub planner_batches: usize,
    pub ga_generations: usize,
    /// Planned-ahead objective of the optimized and constant profiles.
    pub planned_js_db: Option<f64>,
    pub planned_constant_js_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub metadata: RunMetadata,
    /// Mammal states at departure.
    pub mammals: Vec<MammalSpec>,
    pub optimized: VoyageResult,
    pub baseline: Option<VoyageResult>,
    pub comparison: Option<ComparisonTable>,
}

impl ResultBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serialises") + "\n"
    }

    /// Every CSV plus `result.json` and, with a baseline, `comparison.csv`,
    /// `comparison_mammals.csv` and `summary.txt`.
    pub fn write(&self, dir: &Path) -> Result<(), HubError> {
        std::fs::create_dir_all(dir).map_err(|e| HubError::io(dir, e))?;
        self.optimized.write(dir, "optimized")?;
        if let Some(b) = &self.baseline {
            b.write(dir, "baseline")?;
        }
        if let Some(c) = &self.comparison {
            write_text(&dir.join("comparison.csv"), &c.summary_csv())?;
            write_text(&dir.join("comparison_mammals.csv"), &c.mammals_csv())?;
            write_text(&dir.join("summary.txt"), &c.summary_text())?;
        }
        write_text(&dir.join("result.json"), &self.to_json())
    }
}

/// Mean band TL from one source to the grid nodes, south row first. Land
/// nodes are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlTile {
    pub src_lat: f64,
    pub src_lon: f64,
    pub depth_m: f64,
    pub lats: Vec<f64>,
    pub lons: Vec<f64>,
    pub tl_db: Vec<Vec<Option<f64>>>,
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), HubError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| HubError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| HubError::io(path, e))
}

/// A loaded scenario with its environment.
pub struct Engine {
    pub scenario: ScenarioConfig,
    pub env: Environment<f64>,
    pub ship: ShipSpec,
}

impl Engine {
    pub fn load(scenario: ScenarioConfig) -> Result<Self, HubError> {
        let d = &scenario.data;
        let lane = d.lane_mask.as_ref().map(|p| scenario.resolve(p));
        let land = d.land_mask.as_ref().map(|p| scenario.resolve(p));
        let (grid, mask) = load_region(&scenario.resolve(&d.bathymetry), lane.as_deref(), land.as_deref())?;
        let env = Environment::new(grid, mask, scenario.min_depth_m)?;
        let ship = scenario.ship_spec();
        ship.validate()?;
        for (key, p) in [("departure", &scenario.departure), ("destination", &scenario.destination)] {
            if !env.is_navigable(&p.geo()) {
                return Err(HubError::Validation(format!(
                    "{key} ({}, {}) is not navigable water in the lane",
                    p.lat_deg, p.lon_deg
                )));
            }
        }
        Ok(Self { scenario, env, ship })
    }

    pub fn field_dir(&self) -> PathBuf {
        self.scenario.tl_cache_dir().join(FIELD_DIR)
    }

    pub fn rbf_dir(&self) -> PathBuf {
        self.scenario.tl_cache_dir().join(RBF_DIR)
    }

    /// Explicit mammals, or `mammal_count` draws from the sighting densities
    /// with the wildlife seed.
    pub fn mammals(&self) -> Result<Vec<MammalState>, HubError> {
        let s = &self.scenario;
        let states: Vec<MammalState> = match (&s.mammals, s.mammal_count) {
            (Some(ms), _) => ms.iter().map(MammalSpec::state).collect(),
            (None, Some(n)) if n > 0 => {
                let sightings = s.data.sightings.as_ref().ok_or_else(|| HubError::Validation("data.sightings is required".into()))?;
                let depths = s.data.depths.as_ref().ok_or_else(|| HubError::Validation("data.depths is required".into()))?;
                let (points, weights) = read_sightings(&s.resolve(sightings))?;
                let positions = kde_fit(&points, weights.as_deref(), &BandwidthRule::Scott)?;
                let depth_model = kde_fit(&read_depths(&s.resolve(depths))?, None, &BandwidthRule::Scott)?;
                let mut rng = ChaCha8Rng::seed_from_u64(s.seeds.wildlife);
                init_population(n, &positions, &depth_model, DEFAULT_SPEED_RANGE_KT, &self.env, &mut rng)?
            }
            _ => Vec::new(),
        };
        for m in &states {
            m.validate(&self.env).map_err(|e| HubError::Validation(e.to_string()))?;
        }
        Ok(states)
    }

    /// Samples the synthetic field around sources on the chord and stores it
    /// in the cache directory.
    pub fn precompute_tl(&self) -> Result<TlFieldCache, HubError> {
        let s = &self.scenario;
        let sources = s.tl.sources(&s.departure.geo(), &s.destination.geo());
        let field = precompute_field(&sources, s.tl.radius_m, &s.tl.lattice(), &self.env)?;
        field.save(&self.field_dir())?;
        log::info!("stored {} TL samples in {}", field.samples.len(), self.field_dir().display());
        Ok(field)
    }

    pub fn load_field(&self) -> Result<TlFieldCache, HubError> {
        let dir = self.field_dir();
        if !TlFieldCache::exists(&dir) {
            return Err(HubError::MissingCache(dir));
        }
        Ok(TlFieldCache::load(&dir)?)
    }

    pub fn fit_rbf(&self) -> Result<RbfInterpolant, HubError> {
        let field = self.load_field()?;
        let rbf = rbf_fit(&field.samples, &self.scenario.tl.rbf)?;
        rbf.save(&self.rbf_dir())?;
        log::info!("fitted {} centres, σ = {:.4}", rbf.centers().len(), rbf.sigma());
        Ok(rbf)
    }

    /// The TL model selected by the scenario. The surrogate must have been
    /// fitted beforehand.
    pub fn tl_model(&self) -> Result<Arc<dyn TlModel>, HubError> {
        match self.scenario.tl.mode {
            TlMode::Direct => Ok(Arc::new(DirectTl { grid: Arc::clone(&self.env.grid) })),
            TlMode::Rbf => {
                let dir = self.rbf_dir();
                if !RbfInterpolant::exists(&dir) {
                    return Err(HubError::MissingCache(dir));
                }
                Ok(Arc::new(RbfInterpolant::load(&dir)?))
            }
        }
    }

    pub fn plan(&self, tl: &dyn TlModel, mammals: &[MammalState]) -> Result<PlanResult, HubError> {
        let s = &self.scenario;
        let positions: Vec<GeoPoint<f64>> = mammals.iter().map(|m| m.position).collect();
        Ok(plan_route(&s.departure.geo(), &s.destination.geo(), &positions, tl, &self.env, &s.planner)?)
    }

    pub fn optimize(
        &self,
        tl: &dyn TlModel,
        mammals: &[MammalState],
        route: &Route,
        progress: Progress<'_>,
    ) -> Result<Optimized, HubError> {
        let s = &self.scenario;
        let c = VoyageConstraints::new(s.eta_h, route.length_nm(), self.ship.v_min_kt, self.ship.v_max_kt);
        let model =
            ExposureModel::build(route, mammals, s.eta_h, s.legs, &self.ship, tl, &self.env, s.sim.table_step_m)?;
        Ok(optimize_speeds(&model, &c, &s.ga, progress)?)
    }

    /// The recorded voyage; requires `data.ais_track`.
    pub fn baseline(&self) -> Result<AisBaseline, HubError> {
        let path = self.scenario.data.ais_track.as_ref().ok_or_else(|| {
            HubError::Validation("a baseline needs an AIS track; set data.ais_track in the scenario".into())
        })?;
        ingest_ais(&self.scenario.resolve(path), self.scenario.legs)
    }

    pub fn simulate(
        &self,
        tl: &dyn TlModel,
        route: &Route,
        profile: &SpeedProfile,
        mammals: &[MammalState],
        replan: bool,
    ) -> Result<VoyageResult, HubError> {
        let mut cfg = self.scenario.sim_config();
        if !replan {
            cfg.replan_cadence_h = 0.0;
        }
        let ctx = VoyageContext { env: &self.env, tl, ship: &self.ship };
        let log = run_voyage(&ctx, route, profile, mammals, &cfg)?;
        let footprint = footprint(&log)?;
        Ok(VoyageResult { route: route.clone(), profile: profile.clone(), log, footprint })
    }

    /// Plans, optimizes and replays the voyage; with an AIS track also replays
    /// the baseline and compares. `with_baseline = true` without a track is an
    /// error.
    pub fn run(&self, tl: &dyn TlModel, with_baseline: Option<bool>, progress: Progress<'_>) -> Result<ResultBundle, HubError> {
        let report = |f: f64| {
            if let Some(p) = progress {
                p(f)
            }
        };
        let want_baseline = with_baseline.unwrap_or(self.scenario.data.ais_track.is_some());
        let baseline_input = if want_baseline { Some(self.baseline()?) } else { None };
        let mammals = self.mammals()?;
        report(0.02);
        let plan = self.plan(tl, &mammals)?;
        report(0.15);
        let ga_progress = |f: f64| report(0.15 + 0.45 * f);
        let opt = self.optimize(tl, &mammals, &plan.route, Some(&ga_progress))?;
        report(0.6);
        let optimized = self.simulate(tl, &plan.route, &opt.profile, &mammals, true)?;
        report(0.9);
        let baseline = baseline_input
            .map(|b| self.simulate(tl, &b.route, &b.profile, &mammals, false))
            .transpose()?;
        let comparison = baseline.as_ref().map(|b| compare(&b.footprint, &optimized.footprint)).transpose()?;
        report(1.0);
        let s = &self.scenario;
        Ok(ResultBundle {
            metadata: RunMetadata {
                engine_version: ENGINE_VERSION.into(),
                format_version: FORMAT_VERSION.into(),
                scenario: s.name.clone(),
                seeds: s.seeds,
                tl_mode: s.tl.mode,
                legs: s.legs,
                tick_h: s.sim.tick_h,
                replan_cadence_h: s.sim.replan_cadence_h,
                cost_offset_db: COST_OFFSET_DB,
                penalty_weight_db: PENALTY_WEIGHT_DB,
                planner_batches: plan.batch_costs.len(),
                ga_generations: opt.generations,
                planned_js_db: opt.objective_db,
                planned_constant_js_db: opt.constant_objective_db,
            },
            mammals: mammals.iter().map(MammalSpec::from).collect(),
            optimized,
            baseline,
            comparison,
        })
    }

    /// TL heatmap from `src` over the grid, at most `max_cells` nodes per side.
    pub fn tl_tile(&self, tl: &dyn TlModel, src: &GeoPoint<f64>, depth_m: f64, max_cells: usize) -> Result<TlTile, HubError> {
        let g = &self.env.grid;
        if !g.contains(src) {
            return Err(HubError::Validation(format!("source ({}, {}) is outside the grid", src.lat, src.lon)));
        }
        let stride = g.rows.max(g.cols).div_ceil(max_cells.max(1)).max(1);
        let rows: Vec<usize> = (0..g.rows).step_by(stride).collect();
        let cols: Vec<usize> = (0..g.cols).step_by(stride).collect();
        let lats = rows.iter().map(|&r| g.node_position(r, 0).0).collect();
        let lons = cols.iter().map(|&c| g.node_position(0, c).1).collect();
        let tl_db = rows
            .iter()
            .map(|&r| {
                cols.iter()
                    .map(|&c| {
                        let (lat, lon) = g.node_position(r, c);
                        let rcv = GeoPoint::surface(lat, lon).with_depth(depth_m);
                        self.env.is_water(&rcv).then(|| tl.mean_tl(src, &rcv))
                    })
                    .collect()
            })
            .collect();
        Ok(TlTile { src_lat: src.lat, src_lon: src.lon, depth_m, lats, lons, tl_db })
    }
}
