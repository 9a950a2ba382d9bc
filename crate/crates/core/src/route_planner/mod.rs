//! Route search over the navigable workspace with a transmission-loss-aware
//! cost: Batch Informed Trees with an implicit random geometric graph.

mod bitstar;
mod route;

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bitstar::{plan_route, PlanResult};
pub use route::{Route, Se2State};

use crate::geo::{from_planar, to_planar, Environment, GeoError, GeoPoint, PlanarPoint};
use crate::propagation::TlModel;

/// Constant added to the local cost so it stays non-negative, dB.
pub const COST_OFFSET_DB: f64 = 200.0;

/// Spacing of validity checks along an edge, meters.
pub const EDGE_CHECK_M: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("{which} ({lat}, {lon}) is not navigable")]
    InvalidEndpoint { which: &'static str, lat: f64, lon: f64 },
    #[error("start and goal coincide")]
    SameEndpoints,
    #[error(
        "no route found after {batches} batches ({samples} samples, {vertices} tree vertices); \
         closest tree vertex is {closest_m:.0} m from the goal"
    )]
    NoSolution { batches: usize, samples: usize, vertices: usize, closest_m: f64 },
    #[error("invalid planner configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub batch_size: usize,
    pub max_batches: usize,
    /// Wall-clock budget. Runs that stop on it are not reproducible.
    pub time_budget_s: Option<f64>,
    pub goal_radius_m: f64,
    /// Sub-segment length for cost integration along edges, meters.
    pub cost_step_m: f64,
    /// Stop after this many consecutive batches improving the incumbent by
    /// less than `convergence_rel_tol` relative.
    pub stall_batches: usize,
    pub convergence_rel_tol: f64,
    pub seed: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            batch_size: 150,
            max_batches: 40,
            time_budget_s: None,
            goal_radius_m: 500.0,
            cost_step_m: 250.0,
            stall_batches: 5,
            convergence_rel_tol: 1e-4,
            seed: 0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.batch_size == 0 || self.max_batches == 0 {
            return Err(PlannerError::Config("batch_size and max_batches must be at least 1".into()));
        }
        if !(self.goal_radius_m >= 0.0) || !(self.cost_step_m > 0.0) {
            return Err(PlannerError::Config("goal_radius_m must be ≥ 0 and cost_step_m > 0".into()));
        }
        Ok(())
    }
}

/// `C − mean_j(band-mean TL from p to mammal j)`, clamped at zero. With no
/// mammals the cost is `C`.
pub fn local_cost(p: &GeoPoint<f64>, mammals: &[GeoPoint<f64>], tl: &dyn TlModel) -> f64 {
    if mammals.is_empty() {
        return COST_OFFSET_DB;
    }
    let mean: f64 = mammals.iter().map(|m| tl.mean_tl(p, m)).sum::<f64>() / mammals.len() as f64;
    (COST_OFFSET_DB - mean).max(0.0)
}

/// Cost functional over a planar frame: each edge contributes the midpoint
/// local cost of its sub-segments times their length divided by `norm_m`.
pub struct CostField<'a> {
    tl: &'a dyn TlModel,
    mammals: Vec<GeoPoint<f64>>,
    reference: GeoPoint<f64>,
    norm_m: f64,
    step_m: f64,
    min_seen: Cell<f64>,
}

impl<'a> CostField<'a> {
    pub fn new(
        tl: &'a dyn TlModel,
        mammals: &[GeoPoint<f64>],
        reference: GeoPoint<f64>,
        norm_m: f64,
        step_m: f64,
    ) -> Self {
        Self { tl, mammals: mammals.to_vec(), reference, norm_m, step_m, min_seen: Cell::new(f64::INFINITY) }
    }

    pub fn local(&self, p: &PlanarPoint<f64>) -> f64 {
        let c = local_cost(&from_planar(p, &self.reference), &self.mammals, self.tl);
        if c < self.min_seen.get() {
            self.min_seen.set(c);
        }
        c
    }

    /// Smallest local cost evaluated so far.
    pub fn min_seen(&self) -> f64 {
        self.min_seen.get()
    }

    pub fn norm_m(&self) -> f64 {
        self.norm_m
    }

    pub fn edge_cost(&self, a: &PlanarPoint<f64>, b: &PlanarPoint<f64>) -> f64 {
        let len = a.distance(b);
        if len == 0.0 {
            return 0.0;
        }
        if self.mammals.is_empty() {
            return COST_OFFSET_DB * len / self.norm_m;
        }
        let n = (len / self.step_m).ceil().max(1.0) as usize;
        let sub = len / n as f64;
        (0..n).map(|k| self.local(&a.lerp(b, (k as f64 + 0.5) / n as f64))).sum::<f64>() * sub / self.norm_m
    }
}

/// Route objective: sum over edges of [`CostField::edge_cost`], with arc
/// length normalised by the endpoint chord so a straight route has total
/// weight one.
pub fn route_cost(route: &Route, mammals: &[GeoPoint<f64>], tl: &dyn TlModel, step_m: f64) -> f64 {
    let pts = route.planar_points();
    let chord = pts[0].distance(&pts[pts.len() - 1]);
    let norm = if chord > 0.0 { chord } else { route.length_m().max(1.0) };
    let field = CostField::new(tl, mammals, route.reference, norm, step_m);
    pts.windows(2).map(|w| field.edge_cost(&w[0], &w[1])).sum()
}

/// Planar view of the environment about a reference point.
pub struct Workspace<'a> {
    pub env: &'a Environment<f64>,
    pub reference: GeoPoint<f64>,
    pub min: PlanarPoint<f64>,
    pub max: PlanarPoint<f64>,
}

impl<'a> Workspace<'a> {
    pub fn new(env: &'a Environment<f64>, reference: GeoPoint<f64>) -> Result<Self, PlannerError> {
        let g = &env.grid;
        let lo = to_planar(&GeoPoint::surface(g.origin_lat, g.origin_lon), &reference)?;
        let hi = to_planar(&GeoPoint::surface(g.max_lat(), g.max_lon()), &reference)?;
        Ok(Self { env, reference, min: lo, max: hi })
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    pub fn contains(&self, p: &PlanarPoint<f64>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn is_valid(&self, p: &PlanarPoint<f64>) -> bool {
        self.contains(p) && self.env.is_navigable(&from_planar(p, &self.reference))
    }

    /// Checks both endpoints and interior points at most [`EDGE_CHECK_M`] apart.
    pub fn segment_valid(&self, a: &PlanarPoint<f64>, b: &PlanarPoint<f64>) -> bool {
        let n = (a.distance(b) / EDGE_CHECK_M).ceil().max(1.0) as usize;
        (0..=n).all(|k| self.is_valid(&a.lerp(b, k as f64 / n as f64)))
    }
}
