//! Per-leg speed profiles minimising mean sound exposure under distance, ETA
//! and speed-bound constraints.

mod exposure;
mod ga;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exposure::{ExposureLedger, ExposureModel, MammalExposure, DEFAULT_TABLE_STEP_M};
pub use ga::{optimize_speeds, penalized_fitness, GaConfig, Optimized, PENALTY_WEIGHT_DB};

use crate::geo::METERS_PER_NM;
use crate::noise_source::{broadband_level, SourceError};
use crate::num::{power_to_db, Real};

/// Distance tolerance on total distance travelled, meters.
pub const DISTANCE_TOLERANCE_M: f64 = 100.0;

/// Default number of speed legs.
pub const DEFAULT_LEGS: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpeedError {
    #[error("infeasible constraints: {0}")]
    Infeasible(String),
    #[error("objective undefined without mammals")]
    NoMammals,
    #[error("empty leg list")]
    EmptyLegs,
    #[error("{quantity} must be positive, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("no distance-feasible profile found; best violation {violation_m:.1} m at J_s {objective:.3} dB")]
    NoFeasible { violation_m: f64, objective: f64 },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error("{0}")]
    Model(String),
    #[error("i/o error: {0}")]
    Io(String),
}

/// Total distance travelled `Σ v_i·Δt`, NM.
pub fn tdt(speeds_kt: &[f64], dt_h: f64) -> f64 {
    speeds_kt.iter().sum::<f64>() * dt_h
}

/// Broadband received level of one leg from source band levels and band TL.
pub fn leg_noise<T: Real>(nls: &[T], tl: &[T]) -> Result<T, SpeedError> {
    if nls.len() != tl.len() || nls.is_empty() {
        return Err(SpeedError::EmptyLegs);
    }
    let nl: Vec<T> = nls.iter().zip(tl).map(|(&s, &t)| s - t).collect();
    Ok(broadband_level(&nl)?)
}

/// `10·log10((Δt/1 h)·Σ 10^(NL_i/10))`, dB re 1 µPa²·h.
pub fn sel_total<T: Real>(levels: &[T], dt_h: T) -> Result<T, SpeedError> {
    if levels.is_empty() {
        return Err(SpeedError::EmptyLegs);
    }
    if !(dt_h > T::zero()) {
        return Err(SpeedError::Domain { quantity: "leg duration", value: dt_h.as_f64() });
    }
    Ok(broadband_level(levels)? + power_to_db(dt_h))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoyageConstraints {
    pub eta_h: f64,
    pub length_nm: f64,
    pub v_min_kt: f64,
    pub v_max_kt: f64,
    pub tolerance_m: f64,
}

impl VoyageConstraints {
    pub fn new(eta_h: f64, length_nm: f64, v_min_kt: f64, v_max_kt: f64) -> Self {
        Self { eta_h, length_nm, v_min_kt, v_max_kt, tolerance_m: DISTANCE_TOLERANCE_M }
    }

    pub fn validate(&self) -> Result<(), SpeedError> {
        for (quantity, value) in [("eta_h", self.eta_h), ("length_nm", self.length_nm), ("v_min_kt", self.v_min_kt)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SpeedError::Domain { quantity, value });
            }
        }
        if !(self.v_max_kt >= self.v_min_kt) {
            return Err(SpeedError::Infeasible(format!("v_max {} kt below v_min {} kt", self.v_max_kt, self.v_min_kt)));
        }
        let tol_nm = self.tolerance_m / METERS_PER_NM;
        let lo = (self.length_nm - tol_nm) / self.eta_h;
        let hi = (self.length_nm + tol_nm) / self.eta_h;
        if hi < self.v_min_kt || lo > self.v_max_kt {
            return Err(SpeedError::Infeasible(format!(
                "required mean speed {:.3} kt outside [{}, {}] kt",
                self.length_nm / self.eta_h,
                self.v_min_kt,
                self.v_max_kt
            )));
        }
        Ok(())
    }

    /// Distance violation beyond the tolerance, meters.
    pub fn violation_m(&self, tdt_nm: f64) -> f64 {
        ((tdt_nm - self.length_nm).abs() * METERS_PER_NM - self.tolerance_m).max(0.0)
    }
}

/// Piecewise-constant speeds over equal legs of `dt_h` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedProfile {
    pub speeds_kt: Vec<f64>,
    pub dt_h: f64,
}

impl SpeedProfile {
    pub fn new(speeds_kt: Vec<f64>, dt_h: f64) -> Self {
        Self { speeds_kt, dt_h }
    }

    /// Constant `l/ETA` over `legs` legs.
    pub fn constant(c: &VoyageConstraints, legs: usize) -> Self {
        Self { speeds_kt: vec![c.length_nm / c.eta_h; legs], dt_h: c.eta_h / legs as f64 }
    }

    pub fn legs(&self) -> usize {
        self.speeds_kt.len()
    }

    pub fn eta_h(&self) -> f64 {
        self.dt_h * self.legs() as f64
    }

    pub fn tdt_nm(&self) -> f64 {
        tdt(&self.speeds_kt, self.dt_h)
    }

    /// Speed at time `t_h`; the last leg extends past the end.
    pub fn speed_at(&self, t_h: f64) -> f64 {
        let i = ((t_h / self.dt_h).floor().max(0.0) as usize).min(self.legs() - 1);
        self.speeds_kt[i]
    }

    /// Distance covered by time `t_h`, NM, integrating exactly across legs.
    pub fn distance_at(&self, t_h: f64) -> f64 {
        let mut d = 0.0;
        for (i, &v) in self.speeds_kt.iter().enumerate() {
            let t0 = i as f64 * self.dt_h;
            if t_h <= t0 {
                break;
            }
            d += v * (t_h - t0).min(self.dt_h);
        }
        d
    }

    pub fn satisfies(&self, c: &VoyageConstraints) -> bool {
        let eps = 1e-9;
        c.violation_m(self.tdt_nm()) == 0.0
            && self.speeds_kt.iter().all(|&v| v >= c.v_min_kt - eps && v <= c.v_max_kt + eps)
    }

    /// CSV with columns `leg_index,t_start_h,v_knots,cumulative_nm`; the
    /// cumulative distance is at the end of the leg.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("leg_index,t_start_h,v_knots,cumulative_nm\n");
        let mut cum = 0.0;
        for (i, &v) in self.speeds_kt.iter().enumerate() {
            cum += v * self.dt_h;
            s.push_str(&format!("{i},{},{v},{cum}\n", i as f64 * self.dt_h));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SpeedError> {
        let mut f = std::fs::File::create(path).map_err(|e| SpeedError::Io(e.to_string()))?;
        f.write_all(self.to_csv().as_bytes()).map_err(|e| SpeedError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::db_to_power;
    use proptest::prelude::*;

    #[test]
    fn tdt_examples() {
        assert_eq!(tdt(&[10.0, 10.0], 1.0), 20.0);
        assert_eq!(tdt(&[0.0, 0.0, 0.0], 1.0), 0.0);
        assert_eq!(tdt(&[8.0, 16.0], 0.5), 12.0);
    }

    #[test]
    fn sel_examples() {
        assert!((sel_total(&[100.0_f64], 1.0).unwrap() - 100.0).abs() < 1e-12);
        assert!((sel_total(&[100.0_f64, 100.0], 1.0).unwrap() - 103.0103).abs() < 1e-4);
        assert!((sel_total(&[100.0_f64], 0.5).unwrap() - 96.9897).abs() < 1e-4);
        assert!(sel_total::<f64>(&[], 1.0).is_err());
        assert!(sel_total(&[100.0], 0.0).is_err());
        assert!((sel_total(&[100.0_f32], 1.0).unwrap() - 100.0).abs() < 1e-4);
    }

    #[test]
    fn leg_noise_shifts() {
        let nls: Vec<f64> = (0..30).map(|b| 150.0 + (b as f64 * 0.7).sin() * 8.0).collect();
        let tl: Vec<f64> = (0..30).map(|b| 60.0 + b as f64).collect();
        let base = leg_noise(&nls, &tl).unwrap();
        assert_eq!(leg_noise(&nls, &[0.0; 30]).unwrap(), broadband_level(&nls).unwrap());
        let faster: Vec<f64> = nls.iter().map(|l| l + 60.0 * 2f64.log10()).collect();
        assert!((leg_noise(&faster, &tl).unwrap() - base - 18.0618).abs() < 1e-4);
        let louder_tl: Vec<f64> = tl.iter().map(|t| t + 10.0).collect();
        assert!((leg_noise(&nls, &louder_tl).unwrap() - base + 10.0).abs() < 1e-9);
    }

    #[test]
    fn constraint_checks() {
        let c = VoyageConstraints::new(12.36, 150.0, 8.0, 16.0);
        c.validate().unwrap();
        assert!(VoyageConstraints::new(1.0, 150.0, 8.0, 16.0).validate().is_err());
        assert!(VoyageConstraints::new(0.0, 150.0, 8.0, 16.0).validate().is_err());
        assert!(VoyageConstraints::new(10.0, 100.0, 12.0, 11.0).validate().is_err());
        assert_eq!(c.violation_m(150.0 + 50.0 / 1852.0), 0.0);
        assert!((c.violation_m(150.0 + 300.0 / 1852.0) - 200.0).abs() < 1e-9);
    }

    #[test]
    fn profile_kinematics() {
        let p = SpeedProfile::new(vec![10.0, 20.0], 0.5);
        assert_eq!(p.eta_h(), 1.0);
        assert_eq!(p.tdt_nm(), 15.0);
        assert_eq!(p.distance_at(0.25), 2.5);
        assert_eq!(p.distance_at(0.75), 10.0);
        assert_eq!(p.distance_at(2.0), 15.0);
        assert_eq!(p.speed_at(0.6), 20.0);
        assert_eq!(p.speed_at(5.0), 20.0);
        let csv = p.to_csv();
        assert_eq!(csv, "leg_index,t_start_h,v_knots,cumulative_nm\n0,0,10,5\n1,0.5,20,15\n");
    }

    proptest! {
        #[test]
        fn sel_matches_per_minute_energy(levels in prop::collection::vec(60.0..180.0f64, 1..12), minutes in 1usize..90) {
            let dt_h = minutes as f64 / 60.0;
            let energy: f64 = levels.iter().map(|&l| (0..minutes).map(|_| db_to_power(l) / 60.0).sum::<f64>()).sum();
            let brute = power_to_db(energy);
            prop_assert!((sel_total(&levels, dt_h).unwrap() - brute).abs() < 1e-6);
        }

        #[test]
        fn doubling_duration_adds_three_db(levels in prop::collection::vec(60.0..180.0f64, 1..12), dt in 0.01..5.0f64) {
            let d = sel_total(&levels, 2.0 * dt).unwrap() - sel_total(&levels, dt).unwrap();
            prop_assert!((d - 3.0103).abs() < 1e-3);
        }
    }
}
