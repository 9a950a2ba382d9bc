//! Closed-loop voyage replay: ship and mammal nodes advanced on a fixed tick,
//! received levels logged per mammal, periodic speed re-planning, and
//! exposure accounting over the log.

mod report;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use report::{compare, footprint, reduction_percent, ComparisonRow, ComparisonTable, FootprintReport, MammalFootprint};

use crate::geo::{Environment, GeoPoint, METERS_PER_NM};
use crate::noise_source::{broadband_level, ShipSpec, SourceError, SourceSpectrum};
use crate::propagation::{TlModel, SOURCE_DEPTH_M};
use crate::route_planner::Route;
use crate::speed_optimizer::{
    optimize_speeds, ExposureModel, GaConfig, SpeedError, SpeedProfile, VoyageConstraints, DEFAULT_TABLE_STEP_M,
};
use crate::wildlife::{step_trajectory, MammalState};

/// Default tick, hours.
pub const DEFAULT_TICK_H: f64 = 1.0 / 60.0;

/// Default re-planning cadence, hours.
pub const DEFAULT_REPLAN_H: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation setup: {0}")]
    Config(String),
    #[error("profile covers {tdt_nm:.4} NM but the route is {length_nm:.4} NM")]
    Inconsistent { tdt_nm: f64, length_nm: f64 },
    #[error("event log is empty")]
    EmptyLog,
    #[error("mammal ids differ between reports: {0:?} vs {1:?}")]
    IdMismatch(Vec<u32>, Vec<u32>),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Speed(#[from] SpeedError),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Shared read-only inputs of a voyage.
#[derive(Clone, Copy)]
pub struct VoyageContext<'a> {
    pub env: &'a Environment<f64>,
    pub tl: &'a dyn TlModel,
    pub ship: &'a ShipSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub tick_h: f64,
    /// Re-plan the remaining speeds this often; 0 disables re-planning.
    pub replan_cadence_h: f64,
    pub ga: GaConfig,
    pub table_step_m: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { tick_h: DEFAULT_TICK_H, replan_cadence_h: DEFAULT_REPLAN_H, ga: GaConfig::default(), table_step_m: DEFAULT_TABLE_STEP_M }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub t_h: f64,
    pub ship: GeoPoint<f64>,
    /// Speed held from this record to the next.
    pub v_kt: f64,
    pub progress_nm: f64,
    pub mammals: Vec<MammalState>,
    /// Broadband received level per mammal, dB re 1 µPa.
    pub nl_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanEvent {
    pub t_h: f64,
    pub legs: usize,
    pub objective_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EventLog {
    pub mammal_ids: Vec<u32>,
    pub records: Vec<LogRecord>,
    pub replans: Vec<ReplanEvent>,
}

impl EventLog {
    pub fn header(&self) -> String {
        let mut h = String::from("t_h,ship_lat,ship_lon,v_kt");
        for id in &self.mammal_ids {
            let _ = write!(h, ",m{id}_lat,m{id}_lon,m{id}_depth_m,m{id}_nl_db");
        }
        h
    }

    /// CSV with `t_h, ship_lat, ship_lon, v_kt` then per mammal
    /// `lat, lon, depth_m, nl_db`.
    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for r in &self.records {
            let _ = write!(s, "{},{},{},{}", r.t_h, r.ship.lat, r.ship.lon, r.v_kt);
            for (m, nl) in r.mammals.iter().zip(&r.nl_db) {
                let _ = write!(s, ",{},{},{},{}", m.position.lat, m.position.lon, m.position.depth, nl);
            }
            s.push('\n');
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SimError> {
        std::fs::write(path, self.to_csv()).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))
    }

    pub fn end_time_h(&self) -> Option<f64> {
        self.records.last().map(|r| r.t_h)
    }
}

/// Broadband received level at each mammal for a ship at `ship` moving at
/// `v_kt`. A stopped ship is silent.
pub fn received_levels(
    ship: &ShipSpec,
    tl: &dyn TlModel,
    ship_pos: &GeoPoint<f64>,
    v_kt: f64,
    mammals: &[MammalState],
) -> Result<Vec<f64>, SimError> {
    if mammals.is_empty() {
        return Ok(Vec::new());
    }
    if v_kt <= 0.0 {
        return Ok(vec![f64::NEG_INFINITY; mammals.len()]);
    }
    let nls = SourceSpectrum::<f64>::compute(ship, v_kt)?;
    let src = ship_pos.with_depth(SOURCE_DEPTH_M);
    mammals
        .iter()
        .map(|m| {
            let tl_b = tl.band_tl(&src, &m.position);
            let nl: Vec<f64> = nls.levels.iter().zip(tl_b.iter()).map(|(a, b)| a - b).collect();
            Ok(broadband_level(&nl)?)
        })
        .collect()
}

/// Replays a voyage along `route` under `profile`.
///
/// Records are written at `t = k·tick` plus a final partial tick at the ETA.
/// Every `replan_cadence_h` the remaining speeds are re-optimised for the
/// remaining distance and time on the remaining route with the current mammal
/// states. The run is deterministic for a given configuration.
pub fn run_voyage(
    ctx: &VoyageContext<'_>,
    route: &Route,
    profile: &SpeedProfile,
    mammals: &[MammalState],
    cfg: &SimConfig,
) -> Result<EventLog, SimError> {
    if !(cfg.tick_h > 0.0) || !(cfg.replan_cadence_h >= 0.0) {
        return Err(SimError::Config("tick must be positive and the re-planning cadence non-negative".into()));
    }
    if profile.legs() == 0 || !(profile.dt_h > 0.0) {
        return Err(SimError::Config("speed profile is empty".into()));
    }
    ctx.ship.validate()?;
    let length_nm = route.length_nm();
    let tdt_nm = profile.tdt_nm();
    if ((tdt_nm - length_nm).abs() * METERS_PER_NM) > crate::speed_optimizer::DISTANCE_TOLERANCE_M {
        return Err(SimError::Inconsistent { tdt_nm, length_nm });
    }
    for m in mammals {
        m.validate(ctx.env).map_err(|e| SimError::Config(e.to_string()))?;
    }

    let eta = profile.eta_h();
    let mut log = EventLog { mammal_ids: mammals.iter().map(|m| m.id).collect(), ..EventLog::default() };
    let mut active = profile.clone();
    let mut t0 = 0.0;
    let mut progress = 0.0;
    let mut states = mammals.to_vec();
    let mut t_prev = 0.0;
    let mut next_replan = if cfg.replan_cadence_h > 0.0 { cfg.replan_cadence_h } else { f64::INFINITY };
    let eps = 1e-9 * eta.max(1.0);

    for k in 0usize.. {
        let mut t = (k as f64 * cfg.tick_h).min(eta);
        if eta - t < eps {
            t = eta;
        }
        if k > 0 {
            let dt = t - t_prev;
            let d = active.distance_at(t - t0) - active.distance_at(t_prev - t0);
            progress = (progress + d).min(length_nm);
            states = states.iter().map(|s| step_trajectory(s, dt, ctx.env)).collect();
        }
        if t >= next_replan - eps && t < eta - eps {
            next_replan += cfg.replan_cadence_h;
            if !states.is_empty() {
                if let Some((p, ev)) = replan(ctx, route, profile.dt_h, &states, progress, t, eta, cfg, log.replans.len())? {
                    active = p;
                    t0 = t;
                    log.replans.push(ev);
                }
            }
        }
        let v = active.speed_at(t - t0);
        let ship = route.position_at_nm(progress);
        let nl_db = received_levels(ctx.ship, ctx.tl, &ship, v, &states)?;
        log.records.push(LogRecord { t_h: t, ship, v_kt: v, progress_nm: progress, mammals: states.clone(), nl_db });
        if t >= eta {
            break;
        }
        t_prev = t;
    }
    Ok(log)
}

#[allow(clippy::too_many_arguments)]
fn replan(
    ctx: &VoyageContext<'_>,
    route: &Route,
    dt_h: f64,
    states: &[MammalState],
    progress_nm: f64,
    t: f64,
    eta: f64,
    cfg: &SimConfig,
    index: usize,
) -> Result<Option<(SpeedProfile, ReplanEvent)>, SimError> {
    let remaining_h = eta - t;
    let remaining_nm = route.length_nm() - progress_nm;
    let legs = ((remaining_h / dt_h).round() as usize).max(1);
    let c = VoyageConstraints::new(remaining_h, remaining_nm, ctx.ship.v_min_kt, ctx.ship.v_max_kt);
    if remaining_nm * METERS_PER_NM <= c.tolerance_m || c.validate().is_err() {
        log::debug!("skipping re-plan at t = {t:.3} h: {remaining_nm:.3} NM in {remaining_h:.3} h");
        return Ok(None);
    }
    let tail = route.tail(progress_nm);
    let model = ExposureModel::build(&tail, states, remaining_h, legs, ctx.ship, ctx.tl, ctx.env, cfg.table_step_m)?;
    let ga = GaConfig { seed: cfg.ga.seed.wrapping_add(1 + index as u64), ..cfg.ga.clone() };
    let out = optimize_speeds(&model, &c, &ga, None)?;
    log::debug!("re-planned {legs} legs at t = {t:.3} h, J_s {:?}", out.objective_db);
    Ok(Some((out.profile, ReplanEvent { t_h: t, legs, objective_db: out.objective_db })))
}
