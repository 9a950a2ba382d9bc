use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kde::KdeModel;
use super::WildlifeError;
use crate::geo::{from_planar, Environment, GeoPoint, PlanarPoint, METERS_PER_NM};

pub const MAX_MAMMAL_DEPTH_M: f64 = 100.0;

/// Default drift speed range, knots.
pub const DEFAULT_SPEED_RANGE_KT: (f64, f64) = (0.5, 2.5);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MammalState {
    pub id: u32,
    /// Depth is the receiver depth and stays fixed during a voyage.
    pub position: GeoPoint<f64>,
    pub speed_kt: f64,
    /// Degrees true, `[0, 360)`.
    pub heading_deg: f64,
}

impl MammalState {
    pub fn stationary(id: u32, position: GeoPoint<f64>) -> Self {
        Self { id, position, speed_kt: 0.0, heading_deg: 0.0 }
    }

    pub fn validate(&self, env: &Environment<f64>) -> Result<(), WildlifeError> {
        let p = &self.position;
        p.validate().map_err(|e| WildlifeError::Config(format!("mammal {}: {e}", self.id)))?;
        if !(0.0..=MAX_MAMMAL_DEPTH_M).contains(&p.depth) {
            return Err(WildlifeError::Config(format!("mammal {} depth {} m outside [0, 100]", self.id, p.depth)));
        }
        if !(self.speed_kt >= 0.0) || !self.heading_deg.is_finite() {
            return Err(WildlifeError::Config(format!("mammal {} needs speed ≥ 0 and a finite heading", self.id)));
        }
        if !env.is_water(p) {
            return Err(WildlifeError::Config(format!("mammal {} at ({}, {}) is not in water", self.id, p.lat, p.lon)));
        }
        Ok(())
    }
}

/// Draws `count` mammals: positions from the 2-D model (lat, lon) restricted to
/// water, depths from the 1-D model clamped to `[0, 100]`, speed uniform in
/// `speed_range_kt` and heading uniform in `[0, 360)`. Ids run from 1.
pub fn init_population<R: Rng + ?Sized>(
    count: usize,
    positions: &KdeModel<f64>,
    depths: &KdeModel<f64>,
    speed_range_kt: (f64, f64),
    env: &Environment<f64>,
    rng: &mut R,
) -> Result<Vec<MammalState>, WildlifeError> {
    if count == 0 {
        return Err(WildlifeError::Config("mammal count must be at least 1".into()));
    }
    if positions.dim() != 2 || depths.dim() != 1 {
        return Err(WildlifeError::Config("position model must be 2-D and depth model 1-D".into()));
    }
    let (lo, hi) = speed_range_kt;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(WildlifeError::Config(format!("invalid speed range [{lo}, {hi}]")));
    }
    let pos = positions.sample(count, rng, |p| env.is_water(&GeoPoint::surface(p[0], p[1])))?;
    let dep = depths.sample(count, rng, |_| true)?;
    Ok(pos
        .iter()
        .zip(&dep)
        .enumerate()
        .map(|(i, (p, d))| {
            let speed_kt = if hi > lo { rng.random_range(lo..=hi) } else { lo };
            let heading_deg = rng.random_range(0.0..360.0);
            MammalState {
                id: i as u32 + 1,
                position: GeoPoint::surface(p[0], p[1]).with_depth(d[0].clamp(0.0, MAX_MAMMAL_DEPTH_M)),
                speed_kt,
                heading_deg,
            }
        })
        .collect())
}

fn normalize_heading(h: f64) -> f64 {
    let r = h.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

fn displaced(p: &GeoPoint<f64>, east: f64, north: f64) -> GeoPoint<f64> {
    from_planar(&PlanarPoint::new(east, north), p).with_depth(p.depth)
}

/// Advances one step of straight drift. A blocked step reflects the heading
/// about the blocked axis (east-west blocked mirrors the east component,
/// north-south the north component, both reverses) and retries once; if that
/// is blocked too the mammal holds position with the reflected heading.
pub fn step_trajectory(state: &MammalState, dt_h: f64, env: &Environment<f64>) -> MammalState {
    if !(dt_h > 0.0) || state.speed_kt == 0.0 {
        return *state;
    }
    let dist = state.speed_kt * METERS_PER_NM * dt_h;
    let theta = state.heading_deg.to_radians();
    let (east, north) = (dist * theta.sin(), dist * theta.cos());
    let p = &state.position;
    let next = displaced(p, east, north);
    if env.is_water(&next) {
        return MammalState { position: next, ..*state };
    }
    let x_blocked = !env.is_water(&displaced(p, east, 0.0));
    let y_blocked = !env.is_water(&displaced(p, 0.0, north));
    let reflected = match (x_blocked, y_blocked) {
        (true, false) => 360.0 - state.heading_deg,
        (false, true) => 180.0 - state.heading_deg,
        _ => state.heading_deg + 180.0,
    };
    let heading_deg = normalize_heading(reflected);
    let theta = heading_deg.to_radians();
    let retry = displaced(p, dist * theta.sin(), dist * theta.cos());
    let position = if env.is_water(&retry) { retry } else { *p };
    MammalState { position, heading_deg, ..*state }
}

/// Advances by `duration_h` in steps no longer than `max_step_h`.
pub fn advance(state: &MammalState, duration_h: f64, max_step_h: f64, env: &Environment<f64>) -> MammalState {
    let mut s = *state;
    if !(duration_h > 0.0) {
        return s;
    }
    let steps = (duration_h / max_step_h - 1e-9).ceil().max(1.0) as usize;
    let dt = duration_h / steps as f64;
    for _ in 0..steps {
        s = step_trajectory(&s, dt, env);
    }
    s
}

/// States of every mammal at each of the ascending `times_h`, stepping from
/// `t = 0` with steps no longer than `max_step_h`. Indexed `[time][mammal]`.
pub fn forecast(
    states: &[MammalState],
    times_h: &[f64],
    max_step_h: f64,
    env: &Environment<f64>,
) -> Vec<Vec<MammalState>> {
    let mut current = states.to_vec();
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times_h.len());
    for &target in times_h {
        let dt = target - t;
        if dt > 0.0 {
            current = current.iter().map(|s| advance(s, dt, max_step_h, env)).collect();
            t = target;
        }
        out.push(current.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{to_planar, BathymetryGrid, RegionMask};
    use crate::wildlife::{kde_fit, BandwidthRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Open water with land east of lon −123.2.
    fn env() -> Environment<f64> {
        let g = BathymetryGrid::from_fn(48.0, -123.5, 0.005, 81, 81, |_, lon: f64| if lon > -123.2 { -5.0 } else { 80.0 })
            .unwrap();
        let m = RegionMask::derive(&g, None, None).unwrap();
        Environment::new(g, m, 15.0).unwrap()
    }

    fn at(lat: f64, lon: f64, speed: f64, heading: f64) -> MammalState {
        MammalState { id: 1, position: GeoPoint::surface(lat, lon).with_depth(20.0), speed_kt: speed, heading_deg: heading }
    }

    #[test]
    fn zero_speed_holds() {
        let e = env();
        let s = at(48.2, -123.3, 0.0, 45.0);
        assert_eq!(step_trajectory(&s, 1.0, &e), s);
    }

    #[test]
    fn open_water_displacement() {
        let e = env();
        let s = at(48.2, -123.45, 1.5, 90.0);
        let n = step_trajectory(&s, 1.0, &e);
        let d = to_planar(&n.position, &s.position).unwrap();
        assert!((d.x - 1.5 * METERS_PER_NM).abs() < 1e-6);
        assert!(d.y.abs() < 1e-6);
        assert_eq!(n.position.depth, 20.0);
        let moved = d.x.hypot(d.y);
        assert!((moved / (1.5 * METERS_PER_NM) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn coast_reflects_heading() {
        let e = env();
        // 0.8 NM west of the coast, heading east at 2 kt for 1 h
        let s = at(48.2, -123.22, 2.0, 90.0);
        let n = step_trajectory(&s, 1.0, &e);
        assert_ne!(n.heading_deg, 90.0);
        assert!((n.heading_deg - 270.0).abs() < 1e-9);
        assert!(e.is_water(&n.position));
        let diag = step_trajectory(&at(48.2, -123.22, 2.0, 45.0), 1.0, &e);
        assert!((diag.heading_deg - 315.0).abs() < 1e-9);
        assert!(e.is_water(&diag.position));
    }

    #[test]
    fn cornered_mammal_holds() {
        // single water cell surrounded by land
        let g = BathymetryGrid::from_fn(48.0, -123.5, 0.01, 11, 11, |lat: f64, lon: f64| {
            if (lat - 48.05).abs() < 0.001 && (lon + 123.45).abs() < 0.001 {
                30.0
            } else {
                -3.0
            }
        })
        .unwrap();
        let m = RegionMask::derive(&g, None, None).unwrap();
        let e = Environment::new(g, m, 10.0).unwrap();
        let s = at(48.05, -123.45, 2.0, 10.0);
        let n = step_trajectory(&s, 1.0, &e);
        assert_eq!(n.position, s.position);
        assert!((n.heading_deg - 190.0).abs() < 1e-9);
    }

    #[test]
    fn long_runs_stay_in_water() {
        let e = env();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut s = at(48.1 + rng.random_range(0.0..0.2), rng.random_range(-123.45..-123.21), rng.random_range(0.5..2.5), rng.random_range(0.0..360.0));
            for _ in 0..300 {
                s = step_trajectory(&s, 1.0 / 60.0, &e);
                assert!(e.is_water(&s.position));
                assert!((0.0..360.0).contains(&s.heading_deg));
            }
        }
    }

    #[test]
    fn population_contract() {
        let e = env();
        let pos = kde_fit(&[vec![48.2, -123.3], vec![48.25, -123.35], vec![48.15, -123.28]], None, &BandwidthRule::Scott).unwrap();
        let dep = kde_fit(&[vec![5.0], vec![95.0], vec![60.0]], None, &BandwidthRule::Scott).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pop = init_population(5, &pos, &dep, DEFAULT_SPEED_RANGE_KT, &e, &mut rng).unwrap();
        assert_eq!(pop.iter().map(|m| m.id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        for m in &pop {
            m.validate(&e).unwrap();
            assert!((0.5..=2.5).contains(&m.speed_kt));
        }
        let again = init_population(5, &pos, &dep, DEFAULT_SPEED_RANGE_KT, &e, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(pop, again);
        assert!(init_population(0, &pos, &dep, DEFAULT_SPEED_RANGE_KT, &e, &mut rng).is_err());
    }

    #[test]
    fn deep_samples_are_clamped() {
        let e = env();
        let pos = kde_fit(&[vec![48.2, -123.3]], None, &BandwidthRule::Fixed(vec![0.01, 0.01])).unwrap();
        let dep = kde_fit(&[vec![150.0]], None, &BandwidthRule::Fixed(vec![1.0])).unwrap();
        let pop = init_population(10, &pos, &dep, (1.0, 1.0), &e, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(pop.iter().all(|m| m.position.depth == MAX_MAMMAL_DEPTH_M && m.speed_kt == 1.0));
    }

    #[test]
    fn forecast_matches_stepping() {
        let e = env();
        let s = [at(48.2, -123.25, 2.0, 80.0), at(48.3, -123.4, 1.0, 200.0)];
        let times = [0.25, 0.5, 1.0];
        let f = forecast(&s, &times, 1.0 / 60.0, &e);
        assert_eq!(f.len(), 3);
        let mut manual = s.to_vec();
        for _ in 0..60 {
            manual = manual.iter().map(|m| step_trajectory(m, 1.0 / 60.0, &e)).collect();
        }
        for (a, b) in f[2].iter().zip(&manual) {
            assert!((a.position.lat - b.position.lat).abs() < 1e-12);
            assert!((a.position.lon - b.position.lon).abs() < 1e-12);
        }
    }
}
