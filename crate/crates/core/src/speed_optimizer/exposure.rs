use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sel_total, SpeedError};
use crate::geo::{Environment, METERS_PER_NM};
use crate::noise_source::{ShipSpec, SourceSpectrum};
use crate::num::{db_to_power, power_to_db};
use crate::propagation::TlModel;
use crate::route_planner::Route;
use crate::wildlife::{forecast, MammalState};

/// Spacing of the along-route level tables, meters.
pub const DEFAULT_TABLE_STEP_M: f64 = 25.0;

/// Mammal forecast step, hours.
const FORECAST_STEP_H: f64 = 1.0 / 60.0;

/// Per-mammal exposure of one speed profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MammalExposure {
    pub id: u32,
    /// Broadband received level per leg, dB re 1 µPa.
    pub nl_db: Vec<f64>,
    /// Exposure per leg, µPa²·h.
    pub energy: Vec<f64>,
    /// dB re 1 µPa²·h.
    pub sel_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureLedger {
    pub dt_h: f64,
    pub mammals: Vec<MammalExposure>,
    /// Mean SEL over mammals, `None` without mammals.
    pub mean_sel_db: Option<f64>,
}

/// Precomputed exposure geometry for one route, mammal forecast and ship.
///
/// For leg `i` and mammal `j` the table holds
/// `K_ij(s) = broadband(NLS_b(v_ref) − TL_b(route(s) → m_j(t_i)))` on a
/// regular grid of along-route distance `s`, with `t_i` the leg midpoint time.
/// The received level at speed `v` is then `K_ij(s) + 60·log10(v/v_ref)`.
#[derive(Debug, Clone)]
pub struct ExposureModel {
    dt_h: f64,
    legs: usize,
    route_nm: f64,
    step_nm: f64,
    v_ref: f64,
    ids: Vec<u32>,
    /// `[leg][mammal]`.
    tables: Vec<Vec<Arc<Vec<f64>>>>,
}

impl ExposureModel {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        route: &Route,
        mammals: &[MammalState],
        eta_h: f64,
        legs: usize,
        ship: &ShipSpec,
        tl: &dyn TlModel,
        env: &Environment<f64>,
        table_step_m: f64,
    ) -> Result<Self, SpeedError> {
        if legs == 0 {
            return Err(SpeedError::EmptyLegs);
        }
        if !(eta_h > 0.0) {
            return Err(SpeedError::Domain { quantity: "eta_h", value: eta_h });
        }
        if !(table_step_m > 0.0) {
            return Err(SpeedError::Domain { quantity: "table step", value: table_step_m });
        }
        ship.validate()?;
        let dt_h = eta_h / legs as f64;
        let v_ref = ship.v_max_kt;
        let spectrum = SourceSpectrum::<f64>::compute(ship, v_ref)?;
        let route_nm = route.length_nm();
        let step_nm = table_step_m / METERS_PER_NM;
        let n_s = (route_nm / step_nm).ceil() as usize + 1;
        let ship_positions: Vec<_> = (0..n_s).map(|k| route.position_at_nm((k as f64 * step_nm).min(route_nm))).collect();

        let times: Vec<f64> = (0..legs).map(|i| (i as f64 + 0.5) * dt_h).collect();
        let states = forecast(mammals, &times, FORECAST_STEP_H, env);

        let build_table = |m: &MammalState| -> Vec<f64> {
            ship_positions
                .par_iter()
                .map(|s| {
                    let tl_b = tl.band_tl(s, &m.position);
                    let nl: Vec<f64> = spectrum.levels.iter().zip(tl_b.iter()).map(|(a, b)| a - b).collect();
                    crate::noise_source::broadband_level(&nl).expect("30 bands")
                })
                .collect()
        };

        let mut tables: Vec<Vec<Arc<Vec<f64>>>> = Vec::with_capacity(legs);
        for i in 0..legs {
            let row = (0..mammals.len())
                .map(|j| match tables.last() {
                    // stationary mammals share one table
                    Some(prev) if states[i - 1][j].position == states[i][j].position => Arc::clone(&prev[j]),
                    _ => Arc::new(build_table(&states[i][j])),
                })
                .collect();
            tables.push(row);
        }
        Ok(Self { dt_h, legs, route_nm, step_nm, v_ref, ids: mammals.iter().map(|m| m.id).collect(), tables })
    }

    pub fn legs(&self) -> usize {
        self.legs
    }

    pub fn dt_h(&self) -> f64 {
        self.dt_h
    }

    pub fn mammal_count(&self) -> usize {
        self.ids.len()
    }

    pub fn route_nm(&self) -> f64 {
        self.route_nm
    }

    fn lookup(&self, table: &[f64], s_nm: f64) -> f64 {
        let f = (s_nm.clamp(0.0, self.route_nm) / self.step_nm).max(0.0);
        let i = (f.floor() as usize).min(table.len() - 1);
        let j = (i + 1).min(table.len() - 1);
        let t = f - i as f64;
        table[i] * (1.0 - t) + table[j] * t
    }

    /// Received level per mammal and leg, `[mammal][leg]`.
    pub fn leg_levels(&self, speeds_kt: &[f64]) -> Vec<Vec<f64>> {
        assert_eq!(speeds_kt.len(), self.legs, "one speed per leg");
        let mut mids = Vec::with_capacity(self.legs);
        let mut cum = 0.0;
        for &v in speeds_kt {
            mids.push(cum + 0.5 * v * self.dt_h);
            cum += v * self.dt_h;
        }
        let shifts: Vec<f64> = speeds_kt.iter().map(|&v| 60.0 * (v / self.v_ref).log10()).collect();
        (0..self.ids.len())
            .map(|j| (0..self.legs).map(|i| self.lookup(&self.tables[i][j], mids[i]) + shifts[i]).collect())
            .collect()
    }

    /// Mean SEL over mammals, dB re 1 µPa²·h.
    pub fn objective(&self, speeds_kt: &[f64]) -> Result<f64, SpeedError> {
        if self.ids.is_empty() {
            return Err(SpeedError::NoMammals);
        }
        let levels = self.leg_levels(speeds_kt);
        let mut total = 0.0;
        for l in &levels {
            total += sel_total(l, self.dt_h)?;
        }
        Ok(total / levels.len() as f64)
    }

    pub fn ledger(&self, speeds_kt: &[f64]) -> ExposureLedger {
        let levels = self.leg_levels(speeds_kt);
        let mammals: Vec<MammalExposure> = levels
            .into_iter()
            .zip(&self.ids)
            .map(|(nl_db, &id)| {
                let energy: Vec<f64> = nl_db.iter().map(|&l| db_to_power(l) * self.dt_h).collect();
                let sel_db = power_to_db(energy.iter().sum::<f64>());
                MammalExposure { id, nl_db, energy, sel_db }
            })
            .collect();
        let mean_sel_db =
            (!mammals.is_empty()).then(|| mammals.iter().map(|m| m.sel_db).sum::<f64>() / mammals.len() as f64);
        ExposureLedger { dt_h: self.dt_h, mammals, mean_sel_db }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{from_planar, to_planar, BathymetryGrid, GeoPoint, PlanarPoint, RegionMask};
    use crate::noise_source::{broadband_level, ShipClass, BAND_COUNT};
    use crate::propagation::{slant_range, tl_from_geometry, SOURCE_DEPTH_M};
    use crate::noise_source::DECIDECADE_BANDS_HZ;

    struct SpreadingTl;
    impl TlModel for SpreadingTl {
        fn band_tl(&self, s: &GeoPoint<f64>, r: &GeoPoint<f64>) -> [f64; BAND_COUNT] {
            let range = slant_range(&s.with_depth(SOURCE_DEPTH_M), r);
            std::array::from_fn(|b| tl_from_geometry(range, 0.0, DECIDECADE_BANDS_HZ[b]))
        }
    }

    fn env() -> Environment<f64> {
        let g = BathymetryGrid::from_fn(48.0, -123.6, 0.01, 61, 61, |_, _| 100.0).unwrap();
        let m = RegionMask::derive(&g, None, None).unwrap();
        Environment::new(g, m, 10.0).unwrap()
    }

    fn ship() -> ShipSpec {
        ShipSpec {
            name: "test".into(),
            ais_type_id: 70,
            ship_class: ShipClass::Other,
            length_ft: 684.97,
            v_min_kt: 8.0,
            v_max_kt: 16.0,
        }
    }

    fn route() -> Route {
        let a = GeoPoint::surface(48.1, -123.3);
        Route::from_planar(a, &[PlanarPoint::new(0.0, 0.0), PlanarPoint::new(0.0, 2.0 * 12.0 * METERS_PER_NM)]).unwrap()
    }

    #[test]
    fn single_mammal_objective_is_its_sel_and_duplicates_do_not_change_mean() {
        let e = env();
        let r = route();
        let m = MammalState::stationary(1, GeoPoint::surface(48.3, -123.25).with_depth(20.0));
        let one = ExposureModel::build(&r, &[m], 2.0, 2, &ship(), &SpreadingTl, &e, DEFAULT_TABLE_STEP_M).unwrap();
        let two = ExposureModel::build(&r, &[m, MammalState { id: 2, ..m }], 2.0, 2, &ship(), &SpreadingTl, &e, DEFAULT_TABLE_STEP_M)
            .unwrap();
        let v = [10.0, 14.0];
        let j1 = one.objective(&v).unwrap();
        assert!((j1 - one.ledger(&v).mammals[0].sel_db).abs() < 1e-9);
        assert!((two.objective(&v).unwrap() - j1).abs() < 1e-12);
        let none = ExposureModel::build(&r, &[], 2.0, 2, &ship(), &SpreadingTl, &e, DEFAULT_TABLE_STEP_M).unwrap();
        assert_eq!(none.objective(&v), Err(SpeedError::NoMammals));
        assert_eq!(none.ledger(&v).mean_sel_db, None);
    }

    #[test]
    fn leg_levels_match_direct_midpoint_evaluation() {
        let e = env();
        let r = route();
        let m = MammalState::stationary(1, GeoPoint::surface(48.25, -123.27).with_depth(30.0));
        let model = ExposureModel::build(&r, &[m], 2.0, 2, &ship(), &SpreadingTl, &e, 10.0).unwrap();
        let v = [9.0, 15.0];
        let levels = model.leg_levels(&v);
        let mids = [4.5, 9.0 + 7.5];
        for (i, &s) in mids.iter().enumerate() {
            let ship_pos = r.position_at_nm(s);
            let spec = SourceSpectrum::<f64>::compute(&ship(), v[i]).unwrap();
            let tl = SpreadingTl.band_tl(&ship_pos, &m.position);
            let nl: Vec<f64> = spec.levels.iter().zip(tl.iter()).map(|(a, b)| a - b).collect();
            let direct = broadband_level(&nl).unwrap();
            assert!((levels[0][i] - direct).abs() < 0.01, "leg {i}: {} vs {direct}", levels[0][i]);
        }
    }

    #[test]
    fn brute_force_minute_integration() {
        // five-minute legs: the midpoint rule tracks a per-minute sum
        let e = env();
        let r = route();
        let mid = r.position_at_nm(12.0);
        let m = MammalState::stationary(1, from_planar(&PlanarPoint::new(8000.0, 0.0), &mid).with_depth(15.0));
        let model = ExposureModel::build(&r, &[m], 2.0, 24, &ship(), &SpreadingTl, &e, 10.0).unwrap();
        let v: Vec<f64> = (0..24).map(|i| if i % 2 == 0 { 10.0 } else { 14.0 }).collect();
        let profile = super::super::SpeedProfile::new(v.clone(), 2.0 / 24.0);
        let j = model.objective(&v).unwrap();
        let mut energy = 0.0;
        let dt = 1.0 / 60.0;
        for k in 0..120 {
            let t = (k as f64 + 0.5) * dt;
            let spec = SourceSpectrum::<f64>::compute(&ship(), profile.speed_at(t)).unwrap();
            let tl = SpreadingTl.band_tl(&r.position_at_nm(profile.distance_at(t)), &m.position);
            let nl: Vec<f64> = spec.levels.iter().zip(tl.iter()).map(|(a, b)| a - b).collect();
            energy += db_to_power(broadband_level(&nl).unwrap()) * dt;
        }
        let brute = power_to_db(energy);
        assert!((j - brute).abs() < 0.05, "{j} vs {brute}");
        let d = to_planar(&m.position, &mid).unwrap();
        assert!((d.x - 8000.0).abs() < 1e-6);
    }
}
