//! Batch Informed Trees.
//!
//! Samples arrive in batches and form an implicit random geometric graph. A
//! single tree grows from the start with edges processed in order of
//! `g_T(v) + ĉ(v, x) + ĥ(x)`. Heuristics are straight-line distance times the
//! smallest per-meter cost observed, so they are exact with no mammals.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CostField, PlannerConfig, PlannerError, Route, Workspace, COST_OFFSET_DB};
use crate::geo::{to_planar, Environment, GeoPoint, PlanarPoint};
use crate::propagation::TlModel;

const START: usize = 0;
const GOAL: usize = 1;
const LATTICE_SIDE: usize = 24;
const SAMPLE_ATTEMPTS_PER_POINT: usize = 50;
const RADIUS_MARGIN: f64 = 1.1;

/// Planner output with search diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub route: Route,
    /// Incumbent cost after each batch, `inf` before the first solution.
    pub batch_costs: Vec<f64>,
    /// Heuristic cost per meter used when the search stopped.
    pub heuristic_rate: f64,
    pub samples_drawn: usize,
    pub edges_evaluated: usize,
    /// `ĥ` at every returned waypoint is at most the realised remaining cost.
    pub heuristic_admissible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeState {
    Sample,
    Tree,
    Dead,
}

#[derive(Debug, Clone)]
struct Node {
    p: PlanarPoint<f64>,
    g: f64,
    parent: Option<usize>,
    children: Vec<usize>,
    state: NodeState,
}

#[derive(Debug, PartialEq)]
struct QItem {
    key: f64,
    a: usize,
    b: usize,
}

impl Eq for QItem {}

impl Ord for QItem {
    // reversed for a min-heap, ties broken by index for determinism
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.a.cmp(&self.a)).then_with(|| other.b.cmp(&self.b))
    }
}

impl PartialOrd for QItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn peek_key(q: &BinaryHeap<QItem>) -> f64 {
    q.peek().map_or(f64::INFINITY, |i| i.key)
}

struct Search<'a> {
    ws: Workspace<'a>,
    field: CostField<'a>,
    nodes: Vec<Node>,
    rate: f64,
    measure: f64,
    cache: HashMap<(usize, usize), Option<f64>>,
    rng: ChaCha8Rng,
    edges_evaluated: usize,
    samples_drawn: usize,
}

impl Search<'_> {
    fn dist(&self, i: usize, j: usize) -> f64 {
        self.nodes[i].p.distance(&self.nodes[j].p)
    }

    fn g_hat(&self, i: usize) -> f64 {
        self.dist(START, i) * self.rate
    }

    fn h_hat(&self, i: usize) -> f64 {
        self.dist(i, GOAL) * self.rate
    }

    fn c_hat(&self, i: usize, j: usize) -> f64 {
        self.dist(i, j) * self.rate
    }

    fn f_hat_point(&self, p: &PlanarPoint<f64>) -> f64 {
        (p.distance(&self.nodes[START].p) + p.distance(&self.nodes[GOAL].p)) * self.rate
    }

    fn c_best(&self) -> f64 {
        self.nodes[GOAL].g
    }

    fn true_cost(&mut self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        if let Some(c) = self.cache.get(&key) {
            return *c;
        }
        self.edges_evaluated += 1;
        let (a, b) = (self.nodes[i].p, self.nodes[j].p);
        let c = self.ws.segment_valid(&a, &b).then(|| self.field.edge_cost(&a, &b));
        self.cache.insert(key, c);
        c
    }

    fn alive(&self) -> usize {
        self.nodes.iter().filter(|n| n.state != NodeState::Dead).count()
    }

    fn on_incumbent_path(&self) -> Vec<bool> {
        let mut mark = vec![false; self.nodes.len()];
        if self.nodes[GOAL].state == NodeState::Tree {
            let mut cur = Some(GOAL);
            while let Some(i) = cur {
                mark[i] = true;
                cur = self.nodes[i].parent;
            }
        }
        mark
    }

    /// Drops samples and vertices that cannot improve the incumbent.
    fn prune(&mut self) {
        let cb = self.c_best();
        if !cb.is_finite() {
            return;
        }
        let keep = self.on_incumbent_path();
        for i in 0..self.nodes.len() {
            if self.nodes[i].state == NodeState::Sample && i != GOAL && self.g_hat(i) + self.h_hat(i) >= cb {
                self.nodes[i].state = NodeState::Dead;
            }
        }
        let doomed: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                self.nodes[i].state == NodeState::Tree && !keep[i] && self.g_hat(i) + self.h_hat(i) > cb
            })
            .collect();
        for v in doomed {
            if self.nodes[v].state != NodeState::Tree {
                continue;
            }
            self.detach(v);
            self.nodes[v].state = NodeState::Dead;
            let mut stack = std::mem::take(&mut self.nodes[v].children);
            while let Some(c) = stack.pop() {
                stack.extend(std::mem::take(&mut self.nodes[c].children));
                let salvage = self.g_hat(c) + self.h_hat(c) < cb;
                let n = &mut self.nodes[c];
                n.parent = None;
                n.g = f64::INFINITY;
                n.state = if salvage { NodeState::Sample } else { NodeState::Dead };
            }
        }
    }

    fn detach(&mut self, v: usize) {
        if let Some(p) = self.nodes[v].parent.take() {
            self.nodes[p].children.retain(|&c| c != v);
        }
    }

    fn add_samples(&mut self, count: usize) {
        let cb = self.c_best();
        let start = self.nodes[START].p;
        let goal = self.nodes[GOAL].p;
        let rect_area = self.ws.area();
        let ellipse = if cb.is_finite() && self.rate > 0.0 {
            let a = 0.5 * cb / self.rate;
            let c = 0.5 * start.distance(&goal);
            let b = (a * a - c * c).max(0.0).sqrt();
            (PI * a * b < rect_area).then_some((a, b))
        } else {
            None
        };
        let region_area = ellipse.map_or(rect_area, |(a, b)| PI * a * b);
        let center = start.lerp(&goal, 0.5);
        let angle = (goal.y - start.y).atan2(goal.x - start.x);
        let (cos, sin) = (angle.cos(), angle.sin());

        let mut accepted = 0;
        let mut attempts = 0;
        while accepted < count && attempts < count * SAMPLE_ATTEMPTS_PER_POINT {
            attempts += 1;
            let p = match ellipse {
                Some((a, b)) => {
                    let r = self.rng.random::<f64>().sqrt();
                    let t = self.rng.random_range(0.0..2.0 * PI);
                    let (u, v) = (a * r * t.cos(), b * r * t.sin());
                    PlanarPoint::new(center.x + u * cos - v * sin, center.y + u * sin + v * cos)
                }
                None => PlanarPoint::new(
                    self.rng.random_range(self.ws.min.x..=self.ws.max.x),
                    self.rng.random_range(self.ws.min.y..=self.ws.max.y),
                ),
            };
            if cb.is_finite() && self.f_hat_point(&p) >= cb {
                continue;
            }
            if !self.ws.is_valid(&p) {
                continue;
            }
            accepted += 1;
            self.nodes.push(Node { p, g: f64::INFINITY, parent: None, children: Vec::new(), state: NodeState::Sample });
        }
        self.samples_drawn += accepted;
        if attempts > 0 && accepted > 0 {
            self.measure = region_area * accepted as f64 / attempts as f64;
        }
    }

    fn radius(&self) -> f64 {
        let q = self.alive().max(2) as f64;
        let gamma = 2.0 * (1.5f64).sqrt() * (self.measure / PI).sqrt();
        RADIUS_MARGIN * gamma * (q.ln() / q).sqrt()
    }

    fn expand(&self, v: usize, r: f64, qe: &mut BinaryHeap<QItem>) {
        let cb = self.c_best();
        let gv = self.nodes[v].g;
        let parent = self.nodes[v].parent;
        for (x, n) in self.nodes.iter().enumerate() {
            if x == v || n.state == NodeState::Dead || self.dist(v, x) > r {
                continue;
            }
            let c_hat = self.c_hat(v, x);
            match n.state {
                NodeState::Sample => {
                    if self.g_hat(v) + c_hat + self.h_hat(x) < cb {
                        qe.push(QItem { key: gv + c_hat + self.h_hat(x), a: v, b: x });
                    }
                }
                NodeState::Tree => {
                    if Some(x) == parent || n.parent == Some(v) || x == START {
                        continue;
                    }
                    if self.g_hat(v) + c_hat + self.h_hat(x) < cb && gv + c_hat < n.g {
                        qe.push(QItem { key: gv + c_hat + self.h_hat(x), a: v, b: x });
                    }
                }
                NodeState::Dead => {}
            }
        }
    }

    fn connect(&mut self, v: usize, x: usize, g: f64) {
        if self.nodes[x].state == NodeState::Tree {
            self.detach(x);
            let delta = self.nodes[x].g - g;
            let mut stack = self.nodes[x].children.clone();
            while let Some(c) = stack.pop() {
                self.nodes[c].g -= delta;
                stack.extend(self.nodes[c].children.iter().copied());
            }
        }
        let n = &mut self.nodes[x];
        n.g = g;
        n.parent = Some(v);
        n.state = NodeState::Tree;
        self.nodes[v].children.push(x);
    }

    fn run_batch(&mut self) {
        let r = self.radius();
        let mut qv: BinaryHeap<QItem> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].state == NodeState::Tree)
            .map(|i| QItem { key: self.nodes[i].g + self.h_hat(i), a: i, b: i })
            .collect();
        let mut qe = BinaryHeap::new();
        let mut expanded_g = vec![f64::NAN; self.nodes.len()];
        loop {
            while !qv.is_empty() && peek_key(&qv) <= peek_key(&qe) {
                let v = qv.pop().expect("non-empty").a;
                if self.nodes[v].state != NodeState::Tree || expanded_g[v] == self.nodes[v].g {
                    continue;
                }
                expanded_g[v] = self.nodes[v].g;
                self.expand(v, r, &mut qe);
            }
            let Some(QItem { key, a: v, b: x }) = qe.pop() else { break };
            if self.nodes[v].state != NodeState::Tree || self.nodes[x].state == NodeState::Dead {
                continue;
            }
            let cb = self.c_best();
            let gv = self.nodes[v].g;
            let c_hat = self.c_hat(v, x);
            if key >= cb && gv + c_hat + self.h_hat(x) >= cb {
                break;
            }
            if gv + c_hat >= self.nodes[x].g {
                continue;
            }
            let Some(c) = self.true_cost(v, x) else { continue };
            if self.g_hat(v) + c + self.h_hat(x) >= cb || gv + c >= self.nodes[x].g {
                continue;
            }
            self.connect(v, x, gv + c);
            qv.push(QItem { key: self.nodes[x].g + self.h_hat(x), a: x, b: x });
        }
    }

    fn update_rate(&mut self) {
        let seen = self.field.min_seen();
        if seen.is_finite() {
            self.rate = self.rate.min(seen.max(0.0) / self.field.norm_m());
        }
    }

    fn path(&self) -> Vec<PlanarPoint<f64>> {
        let mut out = Vec::new();
        let mut cur = Some(GOAL);
        while let Some(i) = cur {
            out.push(self.nodes[i].p);
            cur = self.nodes[i].parent;
        }
        out.reverse();
        out
    }
}

/// Plans a route from `start` to `goal` minimising the exposure-weighted cost
/// with mammal positions frozen at plan time.
pub fn plan_route(
    start: &GeoPoint<f64>,
    goal: &GeoPoint<f64>,
    mammals: &[GeoPoint<f64>],
    tl: &dyn TlModel,
    env: &Environment<f64>,
    config: &PlannerConfig,
) -> Result<PlanResult, PlannerError> {
    config.validate()?;
    let start = start.with_depth(0.0);
    let goal = goal.with_depth(0.0);
    for (which, p) in [("start", &start), ("goal", &goal)] {
        if !env.is_navigable(p) {
            return Err(PlannerError::InvalidEndpoint { which, lat: p.lat, lon: p.lon });
        }
    }
    let ws = Workspace::new(env, start)?;
    let goal_p = to_planar(&goal, &start)?;
    let origin = PlanarPoint::new(0.0, 0.0);
    let chord = goal_p.distance(&origin);
    if chord == 0.0 {
        return Err(PlannerError::SameEndpoints);
    }
    let field = CostField::new(tl, mammals, start, chord, config.cost_step_m);

    if chord <= config.goal_radius_m && ws.segment_valid(&origin, &goal_p) {
        let mut route = Route::from_planar(start, &[origin, goal_p])?;
        let cost = field.edge_cost(&origin, &goal_p);
        route.cost = Some(cost);
        return Ok(PlanResult {
            route,
            batch_costs: vec![cost],
            heuristic_rate: field.min_seen().min(COST_OFFSET_DB) / chord,
            samples_drawn: 0,
            edges_evaluated: 1,
            heuristic_admissible: true,
        });
    }

    // seed the heuristic with a coarse lattice of the workspace
    for i in 0..LATTICE_SIDE {
        for j in 0..LATTICE_SIDE {
            let p = PlanarPoint::new(
                ws.min.x + (ws.max.x - ws.min.x) * (i as f64 + 0.5) / LATTICE_SIDE as f64,
                ws.min.y + (ws.max.y - ws.min.y) * (j as f64 + 0.5) / LATTICE_SIDE as f64,
            );
            if ws.is_valid(&p) {
                field.local(&p);
            }
        }
    }
    field.local(&origin);
    field.local(&goal_p);
    let rate = field.min_seen().min(COST_OFFSET_DB).max(0.0) / chord;

    let measure = ws.area();
    let mut search = Search {
        ws,
        field,
        nodes: vec![
            Node { p: origin, g: 0.0, parent: None, children: Vec::new(), state: NodeState::Tree },
            Node { p: goal_p, g: f64::INFINITY, parent: None, children: Vec::new(), state: NodeState::Sample },
        ],
        rate,
        measure,
        cache: HashMap::new(),
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        edges_evaluated: 0,
        samples_drawn: 0,
    };

    let clock = Instant::now();
    let mut batch_costs = Vec::new();
    let mut stalled = 0;
    for batch in 0..config.max_batches {
        if config.time_budget_s.is_some_and(|b| clock.elapsed().as_secs_f64() > b) {
            log::info!("planner time budget reached after {batch} batches");
            break;
        }
        search.prune();
        search.add_samples(config.batch_size);
        search.run_batch();
        search.update_rate();
        let cb = search.c_best();
        if let Some(&prev) = batch_costs.last() {
            let prev: f64 = prev;
            if prev.is_finite() && (prev - cb) <= config.convergence_rel_tol * prev {
                stalled += 1;
            } else {
                stalled = 0;
            }
        }
        batch_costs.push(cb);
        log::debug!("batch {batch}: incumbent {cb:.6}, radius {:.1} m", search.radius());
        if stalled >= config.stall_batches {
            break;
        }
    }

    if !search.c_best().is_finite() {
        let closest_m = search
            .nodes
            .iter()
            .filter(|n| n.state == NodeState::Tree)
            .map(|n| n.p.distance(&goal_p))
            .fold(f64::INFINITY, f64::min);
        return Err(PlannerError::NoSolution {
            batches: batch_costs.len(),
            samples: search.samples_drawn,
            vertices: search.nodes.iter().filter(|n| n.state == NodeState::Tree).count(),
            closest_m,
        });
    }

    let pts = search.path();
    let mut route = Route::from_planar(start, &pts)?;
    route.cost = Some(search.c_best());

    // post-hoc check of ĥ against realised cost-to-go
    let mut remaining = 0.0;
    let mut admissible = true;
    for k in (0..pts.len() - 1).rev() {
        remaining += search.field.edge_cost(&pts[k], &pts[k + 1]);
        if pts[k].distance(&goal_p) * search.rate > remaining * (1.0 + 1e-9) + 1e-9 {
            admissible = false;
        }
    }
    if !admissible {
        log::warn!("cost-to-go heuristic exceeded realised cost on the returned route");
    }

    Ok(PlanResult {
        route,
        batch_costs,
        heuristic_rate: search.rate,
        samples_drawn: search.samples_drawn,
        edges_evaluated: search.edges_evaluated,
        heuristic_admissible: admissible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{BathymetryGrid, RegionMask};
    use crate::propagation::DirectTl;
    use std::sync::Arc;

    fn open_env() -> Environment<f64> {
        let g = BathymetryGrid::from_fn(-0.05, -0.05, 0.005, 41, 61, |_, _| 100.0).unwrap();
        let m = RegionMask::derive(&g, None, None).unwrap();
        Environment::new(g, m, 10.0).unwrap()
    }

    #[test]
    fn obstacle_free_is_nearly_straight() {
        let env = open_env();
        let tl = DirectTl { grid: Arc::clone(&env.grid) };
        let (s, g) = (GeoPoint::surface(0.0, -0.04), GeoPoint::surface(0.02, 0.2));
        let out = plan_route(&s, &g, &[], &tl, &env, &PlannerConfig::default()).unwrap();
        let straight = s.horizontal_distance(&g);
        let len = out.route.length_m();
        assert!(len >= straight * (1.0 - 1e-9));
        assert!(len <= straight * 1.01, "{len} vs {straight}");
        assert!(out.heuristic_admissible);
        assert!(out.batch_costs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn goal_inside_radius_is_direct() {
        let env = open_env();
        let tl = DirectTl { grid: Arc::clone(&env.grid) };
        let s = GeoPoint::surface(0.0, 0.0);
        let g = GeoPoint::surface(0.003, 0.0);
        let out = plan_route(&s, &g, &[], &tl, &env, &PlannerConfig::default()).unwrap();
        assert_eq!(out.route.len(), 2);
        assert!((out.route.cost.unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn endpoint_validation() {
        let env = open_env();
        let tl = DirectTl { grid: Arc::clone(&env.grid) };
        let s = GeoPoint::surface(0.0, 0.0);
        let cfg = PlannerConfig::default();
        assert_eq!(plan_route(&s, &s, &[], &tl, &env, &cfg), Err(PlannerError::SameEndpoints));
        assert!(matches!(
            plan_route(&s, &GeoPoint::surface(1.0, 1.0), &[], &tl, &env, &cfg),
            Err(PlannerError::InvalidEndpoint { which: "goal", .. })
        ));
    }

    #[test]
    fn unreachable_goal_reports_diagnostics() {
        // full-height wall
        let g = BathymetryGrid::from_fn(-0.05, -0.05, 0.005, 21, 41, |_, lon: f64| if lon.abs() < 0.006 { -5.0 } else { 50.0 })
            .unwrap();
        let m = RegionMask::derive(&g, None, None).unwrap();
        let env = Environment::new(g, m, 10.0).unwrap();
        let tl = DirectTl { grid: Arc::clone(&env.grid) };
        let cfg = PlannerConfig { max_batches: 3, batch_size: 50, ..Default::default() };
        match plan_route(&GeoPoint::surface(0.0, -0.04), &GeoPoint::surface(0.0, 0.04), &[], &tl, &env, &cfg) {
            Err(PlannerError::NoSolution { batches, closest_m, .. }) => {
                assert_eq!(batches, 3);
                assert!(closest_m > 1000.0);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let env = open_env();
        let tl = DirectTl { grid: Arc::clone(&env.grid) };
        let (s, g) = (GeoPoint::surface(-0.03, -0.04), GeoPoint::surface(0.03, 0.2));
        let m = [GeoPoint::surface(0.0, 0.08).with_depth(20.0)];
        let cfg = PlannerConfig { max_batches: 6, seed: 4, ..Default::default() };
        let a = plan_route(&s, &g, &m, &tl, &env, &cfg).unwrap();
        let b = plan_route(&s, &g, &m, &tl, &env, &cfg).unwrap();
        assert_eq!(a, b);
        let cost = super::super::route_cost(&a.route, &m, &tl, cfg.cost_step_m);
        assert!((cost - a.route.cost.unwrap()).abs() < 1e-9 * cost);
    }
}
