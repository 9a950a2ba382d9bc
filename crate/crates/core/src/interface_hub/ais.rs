//! Recorded AIS tracks as baseline voyages.
//!
//! CSV columns `timestamp_s,lat,lon,sog_kt`; an empty field is a missing value.
//! Missing values are bridged linearly in time when the complete records on
//! either side are at most 30 min apart.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HubError;
use crate::geo::{to_planar, GeoPoint, METERS_PER_NM};
use crate::route_planner::Route;
use crate::speed_optimizer::SpeedProfile;

/// Longest span of missing values that is bridged by interpolation.
pub const MAX_AIS_GAP_S: f64 = 1800.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub timestamp_s: f64,
    pub lat: f64,
    pub lon: f64,
    pub sog_kt: f64,
}

/// Complete records with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisTrack {
    pub records: Vec<AisRecord>,
}

/// A track turned into the engine's route and leg structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisBaseline {
    pub track: AisTrack,
    pub route: Route,
    pub profile: SpeedProfile,
    pub eta_h: f64,
    pub tdt_nm: f64,
}

struct RawRow {
    t: f64,
    values: [Option<f64>; 3],
}

fn field(rec: &csv::StringRecord, i: usize, line: usize, name: &str) -> Result<Option<f64>, HubError> {
    match rec.get(i).map(str::trim) {
        None | Some("") => Ok(None),
        Some(t) => t
            .parse::<f64>()
            .map(Some)
            .map_err(|_| HubError::Ais(format!("line {line}: {name} '{t}' is not a number"))),
    }
}

/// Fills missing entries of column `c` linearly in time. Spans longer than
/// [`MAX_AIS_GAP_S`] are collected in `gaps` and left empty.
fn interpolate(rows: &mut [RawRow], c: usize, name: &str, gaps: &mut Vec<(f64, f64)>) -> Result<(), HubError> {
    let known: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].values[c].is_some()).collect();
    for i in 0..rows.len() {
        if rows[i].values[c].is_some() {
            continue;
        }
        let before = known.iter().rev().find(|&&k| k < i);
        let after = known.iter().find(|&&k| k > i);
        let (Some(&a), Some(&b)) = (before, after) else {
            return Err(HubError::Ais(format!("{name} missing at t = {} s with no value on both sides", rows[i].t)));
        };
        let (ta, tb) = (rows[a].t, rows[b].t);
        if tb - ta > MAX_AIS_GAP_S {
            if !gaps.contains(&(ta, tb)) {
                gaps.push((ta, tb));
            }
            continue;
        }
        let (va, vb) = (rows[a].values[c].expect("known"), rows[b].values[c].expect("known"));
        rows[i].values[c] = Some(va + (vb - va) * (rows[i].t - ta) / (tb - ta));
    }
    Ok(())
}

pub fn parse_ais_str(text: &str) -> Result<AisTrack, HubError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| HubError::Ais(format!("line {line}: {e}")))?;
        let t = field(&rec, 0, line, "timestamp_s")?
            .ok_or_else(|| HubError::Ais(format!("line {line}: timestamp_s is required")))?;
        let values = [field(&rec, 1, line, "lat")?, field(&rec, 2, line, "lon")?, field(&rec, 3, line, "sog_kt")?];
        rows.push(RawRow { t, values });
    }
    if rows.len() < 2 {
        return Err(HubError::Ais(format!("need at least 2 records, found {}", rows.len())));
    }
    if let Some(w) = rows.windows(2).find(|w| !(w[1].t > w[0].t)) {
        return Err(HubError::Ais(format!(
            "timestamps out of order: {} s followed by {} s",
            w[0].t, w[1].t
        )));
    }
    let mut gaps = Vec::new();
    for (c, name) in ["lat", "lon", "sog_kt"].into_iter().enumerate() {
        interpolate(&mut rows, c, name, &mut gaps)?;
    }
    if !gaps.is_empty() {
        gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
        return Err(HubError::AisGaps(gaps));
    }
    let records: Vec<AisRecord> = rows
        .iter()
        .map(|r| AisRecord {
            timestamp_s: r.t,
            lat: r.values[0].expect("filled"),
            lon: r.values[1].expect("filled"),
            sog_kt: r.values[2].expect("filled"),
        })
        .collect();
    if let Some(r) = records.iter().find(|r| !(r.sog_kt >= 0.0)) {
        return Err(HubError::Ais(format!("negative speed over ground at t = {} s", r.timestamp_s)));
    }
    Ok(AisTrack { records })
}

pub fn parse_ais(path: &Path) -> Result<AisTrack, HubError> {
    let text = std::fs::read_to_string(path).map_err(|e| HubError::io(path, e))?;
    parse_ais_str(&text)
}

impl AisTrack {
    pub fn duration_h(&self) -> f64 {
        (self.records[self.records.len() - 1].timestamp_s - self.records[0].timestamp_s) / 3600.0
    }

    /// Resamples onto `legs` equal legs. Leg speeds come from the distance
    /// sailed along the track in each leg, so the profile covers the route
    /// exactly; the recorded SOG is kept in the track only.
    pub fn to_baseline(&self, legs: usize) -> Result<AisBaseline, HubError> {
        if legs == 0 {
            return Err(HubError::Validation("leg count must be at least 1".into()));
        }
        let points: Vec<GeoPoint<f64>> = self.records.iter().map(|r| GeoPoint::surface(r.lat, r.lon)).collect();
        for p in &points {
            p.validate()?;
        }
        let reference = points[0];
        let planar = points.iter().map(|p| to_planar(p, &reference)).collect::<Result<Vec<_>, _>>()?;
        let mut cumulative_m = vec![0.0];
        for w in planar.windows(2) {
            cumulative_m.push(cumulative_m[cumulative_m.len() - 1] + w[0].distance(&w[1]));
        }
        let t0 = self.records[0].timestamp_s;
        let times_h: Vec<f64> = self.records.iter().map(|r| (r.timestamp_s - t0) / 3600.0).collect();
        let eta_h = self.duration_h();
        let distance_at = |t: f64| -> f64 {
            let i = times_h.partition_point(|&x| x <= t).clamp(1, times_h.len() - 1);
            let (ta, tb) = (times_h[i - 1], times_h[i]);
            let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
            cumulative_m[i - 1] + (cumulative_m[i] - cumulative_m[i - 1]) * f
        };
        let dt_h = eta_h / legs as f64;
        let speeds_kt = (0..legs)
            .map(|k| {
                let a = if k == 0 { 0.0 } else { distance_at(k as f64 * dt_h) };
                let b = if k + 1 == legs { cumulative_m[cumulative_m.len() - 1] } else { distance_at((k + 1) as f64 * dt_h) };
                (b - a) / METERS_PER_NM / dt_h
            })
            .collect();
        let mut kept = vec![planar[0]];
        for p in &planar[1..] {
            if p.distance(&kept[kept.len() - 1]) > 1e-6 {
                kept.push(*p);
            }
        }
        if kept.len() < 2 {
            return Err(HubError::Ais("track does not move".into()));
        }
        let route = Route::from_planar(reference, &kept)?;
        let profile = SpeedProfile::new(speeds_kt, dt_h);
        Ok(AisBaseline { track: self.clone(), tdt_nm: route.length_nm(), route, profile, eta_h })
    }
}

/// Reads, checks and resamples an AIS track onto `legs` legs.
pub fn ingest_ais(path: &Path, legs: usize) -> Result<AisBaseline, HubError> {
    parse_ais(path)?.to_baseline(legs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interface_hub::fixtures::{strait_ais_csv, strait_lane_length_nm, STRAIT_ETA_H};

    #[test]
    fn one_hour_at_ten_knots() {
        // 10 NM due north at 48° N
        let dlat = 10.0 * METERS_PER_NM / (crate::geo::EARTH_RADIUS_M * std::f64::consts::PI / 180.0);
        let text = format!("timestamp_s,lat,lon,sog_kt\n0,48.0,-123.0,10\n3600,{},-123.0,10\n", 48.0 + dlat);
        let b = parse_ais_str(&text).unwrap().to_baseline(1).unwrap();
        assert_eq!(b.profile.legs(), 1);
        assert!((b.profile.speeds_kt[0] - 10.0).abs() < 1e-9);
        assert!((b.tdt_nm - 10.0).abs() < 1e-9);
        assert!((b.eta_h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_speed_is_interpolated() {
        let t = parse_ais_str("timestamp_s,lat,lon,sog_kt\n0,48.0,-123.0,10\n900,48.015,-123.0,\n1800,48.03,-123.0,14\n").unwrap();
        assert!((t.records[1].sog_kt - 12.0).abs() < 1e-12);
        let t = parse_ais_str("timestamp_s,lat,lon,sog_kt\n0,48.0,-123.0,10\n900,,,10\n1800,48.02,-123.02,10\n").unwrap();
        assert!((t.records[1].lat - 48.01).abs() < 1e-12 && (t.records[1].lon + 123.01).abs() < 1e-12);
        assert!(parse_ais_str("timestamp_s,lat,lon,sog_kt\n0,48.0,-123.0,\n900,48.0,-123.1,10\n").is_err());
    }

    #[test]
    fn shuffled_rows_rejected() {
        let e = parse_ais_str("timestamp_s,lat,lon,sog_kt\n600,48.01,-123.0,10\n0,48.0,-123.0,10\n1200,48.02,-123.0,10\n");
        assert!(matches!(e, Err(HubError::Ais(m)) if m.contains("out of order")));
    }

    #[test]
    fn long_gaps_listed() {
        let e = parse_ais_str(
            "timestamp_s,lat,lon,sog_kt\n0,48.0,-123.0,10\n1800,,,10\n3600,48.1,-123.0,\n5400,48.1,-123.0,10\n\
             6000,48.2,-123.0,\n9000,48.2,-123.1,12\n",
        );
        match e {
            Err(HubError::AisGaps(g)) => assert_eq!(g, vec![(0.0, 3600.0), (1800.0, 5400.0), (5400.0, 9000.0)]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strait_track_reproduces_voyage() {
        let b = parse_ais_str(&strait_ais_csv()).unwrap().to_baseline(24).unwrap();
        assert!((b.eta_h - STRAIT_ETA_H).abs() / STRAIT_ETA_H < 0.005);
        assert!((b.tdt_nm - strait_lane_length_nm()).abs() / strait_lane_length_nm() < 0.005);
        assert!((b.profile.tdt_nm() - b.tdt_nm).abs() < 1e-9);
    }
}
