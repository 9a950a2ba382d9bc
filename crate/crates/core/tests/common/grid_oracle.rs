//! 8-connected shortest path over square planar cells, used as an
//! independent check on planner route lengths.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use quietvoyage_core::geo::{to_planar, BathymetryGrid, Environment, GeoPoint, PlanarPoint, RegionMask};
use quietvoyage_core::route_planner::Workspace;

/// Flat 100 m basin with a north-south land wall at lon 0.1 reaching from
/// the southern edge to lat 0.03. Start and goal sit on either side of it.
pub fn walled_fixture() -> (Environment<f64>, GeoPoint<f64>, GeoPoint<f64>) {
    let g = BathymetryGrid::from_fn(-0.05, -0.05, 0.005, 21, 61, |lat: f64, lon: f64| {
        if (lon - 0.1).abs() < 0.006 && lat < 0.03 {
            -5.0
        } else {
            100.0
        }
    })
    .unwrap();
    let m = RegionMask::derive(&g, None, None).unwrap();
    let env = Environment::new(g, m, 10.0).unwrap();
    (env, GeoPoint::surface(-0.02, 0.05), GeoPoint::surface(-0.02, 0.15))
}

/// Length of the shortest cell-centre path from `start` to `goal`, meters,
/// including the legs to and from the nearest reachable cell centres.
pub fn grid_path_length(env: &Environment<f64>, start: &GeoPoint<f64>, goal: &GeoPoint<f64>, cell_m: f64) -> Option<f64> {
    let ws = Workspace::new(env, *start).ok()?;
    let nx = ((ws.max.x - ws.min.x) / cell_m).floor() as usize;
    let ny = ((ws.max.y - ws.min.y) / cell_m).floor() as usize;
    let centre = |i: usize, j: usize| PlanarPoint::new(ws.min.x + (i as f64 + 0.5) * cell_m, ws.min.y + (j as f64 + 0.5) * cell_m);
    let valid: Vec<bool> = (0..nx * ny).map(|k| ws.is_valid(&centre(k % nx, k / nx))).collect();

    let snap = |p: &PlanarPoint<f64>| -> Option<(usize, f64)> {
        (0..nx * ny)
            .filter(|&k| valid[k])
            .map(|k| (k, centre(k % nx, k / nx).distance(p)))
            .filter(|&(k, d)| d <= 2.0 * cell_m && ws.segment_valid(p, &centre(k % nx, k / nx)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    let s = to_planar(start, start).ok()?;
    let g = to_planar(goal, start).ok()?;
    let (s_node, s_off) = snap(&s)?;
    let (g_node, g_off) = snap(&g)?;

    let mut dist = vec![f64::INFINITY; nx * ny];
    let mut heap = BinaryHeap::new();
    dist[s_node] = 0.0;
    // non-negative floats order like their bit patterns
    heap.push(Reverse((0f64.to_bits(), s_node)));
    while let Some(Reverse((bits, k))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[k] {
            continue;
        }
        if k == g_node {
            return Some(s_off + d + g_off);
        }
        let (i, j) = ((k % nx) as i64, (k / nx) as i64);
        for (di, dj) in [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)] {
            let (a, b) = (i + di, j + dj);
            if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                continue;
            }
            let n = b as usize * nx + a as usize;
            if !valid[n] {
                continue;
            }
            let (p, q) = (centre(i as usize, j as usize), centre(a as usize, b as usize));
            if !ws.segment_valid(&p, &q) {
                continue;
            }
            let nd = d + p.distance(&q);
            if nd < dist[n] {
                dist[n] = nd;
                heap.push(Reverse((nd.to_bits(), n)));
            }
        }
    }
    None
}
