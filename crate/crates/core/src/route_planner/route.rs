use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::geo::{from_planar, to_planar, GeoPoint, PlanarPoint, METERS_PER_NM};

/// Planar pose. Yaw is carried for export and never constrained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Se2State {
    pub x: f64,
    pub y: f64,
    /// Radians, counter-clockwise from east.
    pub yaw: f64,
}

impl Se2State {
    pub fn planar(&self) -> PlanarPoint<f64> {
        PlanarPoint::new(self.x, self.y)
    }
}

/// Waypoint polyline in the planar frame of `reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub reference: GeoPoint<f64>,
    pub waypoints: Vec<Se2State>,
    /// Route objective including the cost offset; `None` when not evaluated.
    pub cost: Option<f64>,
}

fn with_yaw(points: &[PlanarPoint<f64>]) -> Vec<Se2State> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let (a, b) = if i + 1 < n { (points[i], points[i + 1]) } else { (points[i - 1], points[i]) };
            Se2State { x: points[i].x, y: points[i].y, yaw: (b.y - a.y).atan2(b.x - a.x) }
        })
        .collect()
}

impl Route {
    pub fn from_planar(reference: GeoPoint<f64>, points: &[PlanarPoint<f64>]) -> Result<Self, PlannerError> {
        if points.len() < 2 {
            return Err(PlannerError::Config("a route needs at least two waypoints".into()));
        }
        Ok(Self { reference: reference.with_depth(0.0), waypoints: with_yaw(points), cost: None })
    }

    /// Route through geographic waypoints, projected about the first one.
    pub fn from_geo(points: &[GeoPoint<f64>]) -> Result<Self, PlannerError> {
        let Some(first) = points.first() else {
            return Err(PlannerError::Config("a route needs at least two waypoints".into()));
        };
        let planar = points.iter().map(|p| to_planar(p, first)).collect::<Result<Vec<_>, _>>()?;
        Self::from_planar(*first, &planar)
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn planar_points(&self) -> Vec<PlanarPoint<f64>> {
        self.waypoints.iter().map(Se2State::planar).collect()
    }

    pub fn geo_waypoints(&self) -> Vec<GeoPoint<f64>> {
        self.waypoints.iter().map(|w| from_planar(&w.planar(), &self.reference)).collect()
    }

    pub fn to_geo(&self, p: &PlanarPoint<f64>) -> GeoPoint<f64> {
        from_planar(p, &self.reference)
    }

    pub fn segment_lengths_m(&self) -> Vec<f64> {
        self.waypoints.windows(2).map(|w| w[0].planar().distance(&w[1].planar())).collect()
    }

    pub fn length_m(&self) -> f64 {
        self.segment_lengths_m().iter().sum()
    }

    pub fn length_nm(&self) -> f64 {
        self.length_m() / METERS_PER_NM
    }

    /// Distance along the route at every waypoint, NM.
    pub fn cumulative_nm(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for l in self.segment_lengths_m() {
            acc += l;
            out.push(acc / METERS_PER_NM);
        }
        out
    }

    /// Planar position after `s_m` meters, clamped to the endpoints.
    pub fn planar_at(&self, s_m: f64) -> PlanarPoint<f64> {
        let pts = self.planar_points();
        if s_m <= 0.0 {
            return pts[0];
        }
        let mut remaining = s_m;
        for w in pts.windows(2) {
            let l = w[0].distance(&w[1]);
            if remaining <= l && l > 0.0 {
                return w[0].lerp(&w[1], remaining / l);
            }
            remaining -= l;
        }
        pts[pts.len() - 1]
    }

    /// Geographic position after `s_nm` nautical miles along the route.
    pub fn position_at_nm(&self, s_nm: f64) -> GeoPoint<f64> {
        self.to_geo(&self.planar_at(s_nm * METERS_PER_NM))
    }

    /// The part of the route after `s_nm`, in the same planar frame.
    pub fn tail(&self, s_nm: f64) -> Self {
        let s_m = s_nm * METERS_PER_NM;
        let pts = self.planar_points();
        let mut out = vec![self.planar_at(s_m)];
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += w[0].distance(&w[1]);
            if acc > s_m {
                out.push(w[1]);
            }
        }
        if out.len() < 2 {
            out.push(pts[pts.len() - 1]);
        }
        Self { reference: self.reference, waypoints: with_yaw(&out), cost: None }
    }

    pub fn start(&self) -> GeoPoint<f64> {
        self.to_geo(&self.waypoints[0].planar())
    }

    pub fn end(&self) -> GeoPoint<f64> {
        self.to_geo(&self.waypoints[self.waypoints.len() - 1].planar())
    }

    /// CSV with columns `index,lat,lon,cumulative_nm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,lat,lon,cumulative_nm\n");
        for (i, (p, c)) in self.geo_waypoints().iter().zip(self.cumulative_nm()).enumerate() {
            s.push_str(&format!("{i},{},{},{}\n", p.lat, p.lon, c));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), PlannerError> {
        let mut f = std::fs::File::create(path).map_err(|e| PlannerError::Io(e.to_string()))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| PlannerError::Io(e.to_string()))
    }

    /// Reads a route CSV written by [`Route::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self, PlannerError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| PlannerError::Io(e.to_string()))?;
        let mut pts = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| PlannerError::Io(e.to_string()))?;
            let lat: f64 = rec.get(1).and_then(|t| t.parse().ok()).ok_or_else(|| PlannerError::Io("bad lat".into()))?;
            let lon: f64 = rec.get(2).and_then(|t| t.parse().ok()).ok_or_else(|| PlannerError::Io("bad lon".into()))?;
            pts.push(GeoPoint::surface(lat, lon));
        }
        Self::from_geo(&pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn route() -> Route {
        let r = GeoPoint::surface(48.5, -123.4);
        Route::from_planar(r, &[PlanarPoint::new(0.0, 0.0), PlanarPoint::new(3000.0, 4000.0), PlanarPoint::new(3000.0, 10000.0)])
            .unwrap()
    }

    #[test]
    fn lengths_and_positions() {
        let r = route();
        assert_eq!(r.segment_lengths_m(), vec![5000.0, 6000.0]);
        assert!((r.length_nm() - 11000.0 / 1852.0).abs() < 1e-12);
        let c = r.cumulative_nm();
        assert_eq!(c[0], 0.0);
        assert!((c[2] - r.length_nm()).abs() < 1e-12);
        let mid = r.planar_at(2500.0);
        assert!((mid.x - 1500.0).abs() < 1e-9 && (mid.y - 2000.0).abs() < 1e-9);
        let past = r.planar_at(1e9);
        assert_eq!((past.x, past.y), (3000.0, 10000.0));
        assert!((r.waypoints[1].yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let r = route();
        let text = r.to_csv();
        assert!(text.starts_with("index,lat,lon,cumulative_nm\n0,"));
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("route.csv");
        r.write_csv(&p).unwrap();
        let back = Route::read_csv(&p).unwrap();
        for (a, b) in back.planar_points().iter().zip(r.planar_points()) {
            assert!(a.distance(&b) < 1e-6);
        }
    }

    #[test]
    fn needs_two_points() {
        assert!(Route::from_geo(&[GeoPoint::surface(48.0, -123.0)]).is_err());
        assert!(Route::from_geo(&[]).is_err());
    }
}
