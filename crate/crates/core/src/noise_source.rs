//! Ship source-level spectra per decidecade band.
//!
//! The spectrum is a type-dependent baseline shifted by a speed term
//! `60·log10(v/v_T)` and a length term `20·log10(l/300 ft)`. Levels are the
//! values at the nominal band centre frequencies. The model carries a
//! ±6 dB (rms) statistical uncertainty, reported via
//! [`MODEL_UNCERTAINTY_DB`] and never added to the levels.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{db_to_power, power_to_db, Real};

pub const BAND_COUNT: usize = 30;

/// Nominal centre frequencies of the 30 decidecade bands, Hz.
pub const DECIDECADE_BANDS_HZ: [f64; BAND_COUNT] = [
    12.5, 16.0, 20.0, 25.0, 31.5, 40.0, 50.0, 63.0, 80.0, 100.0, 125.0, 160.0, 200.0, 250.0, 315.0, 400.0, 500.0,
    630.0, 800.0, 1000.0, 1250.0, 1600.0, 2000.0, 2500.0, 3150.0, 4000.0, 5000.0, 6300.0, 8000.0, 10000.0,
];

/// Reference ship length, feet.
pub const REFERENCE_LENGTH_FT: f64 = 300.0;

/// Statistical uncertainty of the source model, dB rms.
pub const MODEL_UNCERTAINTY_DB: f64 = 6.0;

const FEET_PER_METER: f64 = 1.0 / 0.3048;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("{quantity} must be positive, got {value}")]
    Domain { quantity: &'static str, value: f64 },
    #[error("broadband level of an empty band set")]
    Empty,
    #[error("unknown ship class '{0}'")]
    UnknownClass(String),
    #[error("i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShipClass {
    Fishing,
    Tug,
    Naval,
    Recreational,
    GovernmentResearch,
    Cruise,
    Passenger,
    Bulker,
    Containership,
    VehicleCarrier,
    Tanker,
    Dredger,
    Other,
}

impl ShipClass {
    pub const ALL: [ShipClass; 13] = [
        ShipClass::Fishing,
        ShipClass::Tug,
        ShipClass::Naval,
        ShipClass::Recreational,
        ShipClass::GovernmentResearch,
        ShipClass::Cruise,
        ShipClass::Passenger,
        ShipClass::Bulker,
        ShipClass::Containership,
        ShipClass::VehicleCarrier,
        ShipClass::Tanker,
        ShipClass::Dredger,
        ShipClass::Other,
    ];

    /// Type reference speed `v_T`, knots.
    pub fn reference_speed(self) -> f64 {
        match self {
            ShipClass::Fishing => 6.4,
            ShipClass::Tug => 3.7,
            ShipClass::Naval => 11.1,
            ShipClass::Recreational => 10.6,
            ShipClass::GovernmentResearch => 8.0,
            ShipClass::Cruise => 17.1,
            ShipClass::Passenger => 9.7,
            ShipClass::Bulker => 13.9,
            ShipClass::Containership => 18.0,
            ShipClass::VehicleCarrier => 15.8,
            ShipClass::Tanker => 12.4,
            ShipClass::Dredger => 9.5,
            ShipClass::Other => 7.4,
        }
    }

    pub fn is_cargo(self) -> bool {
        matches!(
            self,
            ShipClass::Containership | ShipClass::VehicleCarrier | ShipClass::Bulker | ShipClass::Tanker
        )
    }

    /// Class from an AIS ship type ID and hull length.
    ///
    /// IDs 70 and 75–79 are shared between bulkers (design speed ≤ 16 kt) and
    /// container ships; without `design_speed_kt` they resolve to
    /// `Containership`. Vehicle carriers have no AIS ID and are only reachable
    /// through an explicit class.
    pub fn from_ais(ais_type_id: i64, length_ft: f64, design_speed_kt: Option<f64>) -> Self {
        match ais_type_id {
            30 => ShipClass::Fishing,
            31 | 32 | 52 => ShipClass::Tug,
            33 => ShipClass::Dredger,
            35 => ShipClass::Naval,
            36 | 37 => ShipClass::Recreational,
            51 | 53 | 55 => ShipClass::GovernmentResearch,
            60..=69 => {
                if length_ft / FEET_PER_METER > 100.0 {
                    ShipClass::Cruise
                } else {
                    ShipClass::Passenger
                }
            }
            71..=74 => ShipClass::Containership,
            70 | 75..=79 => match design_speed_kt {
                Some(v) if v <= 16.0 => ShipClass::Bulker,
                _ => ShipClass::Containership,
            },
            80..=89 => ShipClass::Tanker,
            _ => ShipClass::Other,
        }
    }

    fn spectrum_params(self, low_frequency_cargo: bool) -> SpectrumParams {
        if low_frequency_cargo {
            let d = match self {
                ShipClass::Containership | ShipClass::Bulker => 0.8,
                _ => 1.0,
            };
            SpectrumParams { k: 208.0, d, f1_per_kt: 600.0 }
        } else {
            let d = if self == ShipClass::Cruise { 4.0 } else { 3.0 };
            SpectrumParams { k: 191.0, d, f1_per_kt: 480.0 }
        }
    }
}

impl fmt::Display for ShipClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for ShipClass {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        ShipClass::ALL
            .into_iter()
            .find(|c| c.to_string().to_ascii_lowercase() == key)
            .ok_or_else(|| SourceError::UnknownClass(s.to_string()))
    }
}

struct SpectrumParams {
    k: f64,
    d: f64,
    f1_per_kt: f64,
}

/// Reference speed for an AIS type ID, knots. Total: unmatched IDs map to `Other`.
pub fn reference_speed(ais_type_id: i64, length_ft: f64) -> f64 {
    ShipClass::from_ais(ais_type_id, length_ft, None).reference_speed()
}

/// Ship characteristics relevant to the source model and voyage constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShipSpec {
    pub name: String,
    pub ais_type_id: i64,
    pub ship_class: ShipClass,
    pub length_ft: f64,
    pub v_min_kt: f64,
    pub v_max_kt: f64,
}

impl ShipSpec {
    pub fn validate(&self) -> Result<(), SourceError> {
        if !(self.length_ft > 0.0) {
            return Err(SourceError::Domain { quantity: "length_ft", value: self.length_ft });
        }
        if !(self.v_min_kt > 0.0) {
            return Err(SourceError::Domain { quantity: "v_min_kt", value: self.v_min_kt });
        }
        if !(self.v_max_kt >= self.v_min_kt) {
            return Err(SourceError::Domain { quantity: "v_max_kt - v_min_kt", value: self.v_max_kt - self.v_min_kt });
        }
        Ok(())
    }

    pub fn reference_speed(&self) -> f64 {
        self.ship_class.reference_speed()
    }
}

/// Type baseline spectrum at frequency `f` (Hz), dB re 1 µPa·m.
///
/// Both branches use the squared resonance term `((1 − (f/f1)²)² + D²)`.
pub fn baseline_spectrum<T: Real>(f: T, class: ShipClass) -> Result<T, SourceError> {
    if !(f > T::zero()) {
        return Err(SourceError::Domain { quantity: "frequency", value: f.as_f64() });
    }
    let low_cargo = class.is_cargo() && f < T::lit(100.0);
    Ok(baseline_with(f, class.reference_speed(), &class.spectrum_params(low_cargo), low_cargo))
}

fn baseline_with<T: Real>(f: T, v_t: f64, p: &SpectrumParams, low_cargo: bool) -> T {
    let ten = T::lit(10.0);
    let f1 = T::lit(p.f1_per_kt) / T::lit(v_t);
    let ratio = f / f1;
    let resonance = (T::one() - ratio * ratio).powi(2) + T::lit(p.d * p.d);
    if low_cargo {
        T::lit(p.k) - T::lit(40.0) * ratio.log10() + ten * f.log10() - ten * resonance.log10()
    } else {
        T::lit(p.k) - T::lit(20.0) * f1.log10() - ten * resonance.log10()
    }
}

/// Source level at frequency `f` (Hz) for speed `v` (kt) and length `l` (ft).
pub fn source_level<T: Real>(f: T, v: T, l: T, class: ShipClass) -> Result<T, SourceError> {
    if !(v > T::zero()) {
        return Err(SourceError::Domain { quantity: "speed", value: v.as_f64() });
    }
    if !(l > T::zero()) {
        return Err(SourceError::Domain { quantity: "length", value: l.as_f64() });
    }
    Ok(baseline_spectrum(f, class)? + speed_term(v, class) + length_term(l))
}

fn speed_term<T: Real>(v: T, class: ShipClass) -> T {
    T::lit(60.0) * (v / T::lit(class.reference_speed())).log10()
}

fn length_term<T: Real>(l: T) -> T {
    T::lit(20.0) * (l / T::lit(REFERENCE_LENGTH_FT)).log10()
}

/// Power sum of band levels: `10·log10(Σ 10^(L/10))`. Bands at −∞ contribute nothing.
pub fn broadband_level<T: Real>(levels: &[T]) -> Result<T, SourceError> {
    if levels.is_empty() {
        return Err(SourceError::Empty);
    }
    // factor out the maximum to keep the sum in range for large levels
    let max = levels.iter().copied().fold(T::neg_infinity(), T::max);
    if max == T::neg_infinity() {
        return Ok(max);
    }
    let sum: T = levels.iter().map(|&l| db_to_power(l - max)).sum();
    Ok(max + power_to_db(sum))
}

/// Source levels in all 30 bands for one ship state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpectrum<T> {
    pub levels: [T; BAND_COUNT],
    pub speed_kt: T,
}

impl<T: Real> SourceSpectrum<T> {
    pub fn compute(ship: &ShipSpec, speed_kt: T) -> Result<Self, SourceError> {
        let length = T::lit(ship.length_ft);
        let mut levels = [T::zero(); BAND_COUNT];
        for (slot, &f) in levels.iter_mut().zip(DECIDECADE_BANDS_HZ.iter()) {
            *slot = source_level(T::lit(f), speed_kt, length, ship.ship_class)?;
        }
        Ok(Self { levels, speed_kt })
    }

    pub fn broadband(&self) -> T {
        broadband_level(&self.levels).expect("30 bands")
    }

    /// Same spectrum at another speed: every band shifts by `60·log10(v'/v)`.
    pub fn at_speed(&self, speed_kt: T) -> Result<Self, SourceError> {
        if !(speed_kt > T::zero()) {
            return Err(SourceError::Domain { quantity: "speed", value: speed_kt.as_f64() });
        }
        let shift = T::lit(60.0) * (speed_kt / self.speed_kt).log10();
        let mut levels = self.levels;
        levels.iter_mut().for_each(|l| *l = *l + shift);
        Ok(Self { levels, speed_kt })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("frequency_hz,level_db\n");
        for (f, l) in DECIDECADE_BANDS_HZ.iter().zip(self.levels.iter()) {
            s.push_str(&format!("{f},{l}\n"));
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), SourceError> {
        std::fs::write(path, self.to_csv()).map_err(|e| SourceError::Io(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn bands_are_increasing() {
        assert!(DECIDECADE_BANDS_HZ.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(DECIDECADE_BANDS_HZ.len(), 30);
    }

    #[test]
    fn reference_speed_rows() {
        assert_eq!(reference_speed(30, 100.0), 6.4);
        assert_eq!(reference_speed(85, 600.0), 12.4);
        assert_eq!(reference_speed(999, 600.0), 7.4);
        assert_eq!(reference_speed(-1, 600.0), 7.4);
        // 100 m = 328.08 ft
        assert_eq!(reference_speed(65, 330.0), 17.1);
        assert_eq!(reference_speed(65, 328.0), 9.7);
        assert_eq!(ShipClass::from_ais(75, 600.0, Some(14.0)), ShipClass::Bulker);
        assert_eq!(ShipClass::from_ais(75, 600.0, Some(20.0)), ShipClass::Containership);
        assert_eq!(ShipClass::from_ais(72, 600.0, Some(14.0)), ShipClass::Containership);
    }

    #[test]
    fn class_names_parse() {
        assert_eq!("Government/Research".parse::<ShipClass>().unwrap(), ShipClass::GovernmentResearch);
        assert_eq!("vehicle_carrier".parse::<ShipClass>().unwrap(), ShipClass::VehicleCarrier);
        assert!("submarine".parse::<ShipClass>().is_err());
    }

    #[test]
    fn baseline_at_resonance_for_other() {
        let f1 = 480.0 / 7.4;
        let v = baseline_spectrum(f1, ShipClass::Other).unwrap();
        assert_abs_diff_eq!(v, 145.22, epsilon = 0.05);
    }

    #[test]
    fn cargo_low_frequency_branch() {
        // independent scratch evaluation of the low-frequency cargo formula
        let v = baseline_spectrum(50.0, ShipClass::Containership).unwrap();
        assert_abs_diff_eq!(v, 214.5168905102921, epsilon = 1e-9);
        // above 100 Hz the general branch applies
        let hi = baseline_spectrum(1000.0, ShipClass::Containership).unwrap();
        let f1: f64 = 480.0 / 18.0;
        let r: f64 = 1000.0 / f1;
        let expect = 191.0 - 20.0 * f1.log10() - 10.0 * ((1.0 - r * r).powi(2) + 9.0).log10();
        assert_abs_diff_eq!(hi, expect, epsilon = 1e-9);
    }

    #[test]
    fn baseline_depends_only_on_reference_speed_and_d() {
        // Fishing and Naval share K and D; at a common v_T their baselines coincide.
        let a = ShipClass::Fishing.spectrum_params(false);
        let b = ShipClass::Naval.spectrum_params(false);
        for &f in &DECIDECADE_BANDS_HZ {
            assert_eq!(baseline_with(f, 9.0, &a, false), baseline_with(f, 9.0, &b, false));
        }
        let cruise = ShipClass::Cruise.spectrum_params(false);
        assert_ne!(baseline_with(200.0, 9.0, &a, false), baseline_with(200.0, 9.0, &cruise, false));
    }

    #[test]
    fn domain_errors() {
        assert!(baseline_spectrum(0.0, ShipClass::Other).is_err());
        assert!(source_level(100.0, 0.0, 300.0, ShipClass::Other).is_err());
        assert!(source_level(100.0, 10.0, -1.0, ShipClass::Other).is_err());
        assert!(broadband_level::<f64>(&[]).is_err());
    }

    #[test]
    fn reference_state_equals_baseline() {
        for class in ShipClass::ALL {
            for &f in &DECIDECADE_BANDS_HZ {
                let v = source_level(f, class.reference_speed(), 300.0, class).unwrap();
                assert_abs_diff_eq!(v, baseline_spectrum(f, class).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn broadband_sums() {
        let mut one = [f64::NEG_INFINITY; 30];
        one[3] = 100.0;
        assert_abs_diff_eq!(broadband_level(&one).unwrap(), 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(broadband_level(&[100.0, 100.0]).unwrap(), 103.0103, epsilon = 1e-4);
        assert_abs_diff_eq!(broadband_level(&[100.0; 30]).unwrap(), 114.7712, epsilon = 1e-4);
    }

    #[test]
    fn spectrum_at_speed_matches_direct() {
        let ship = ShipSpec {
            name: "t".into(),
            ais_type_id: 70,
            ship_class: ShipClass::Other,
            length_ft: 684.97,
            v_min_kt: 8.0,
            v_max_kt: 16.0,
        };
        let s = SourceSpectrum::<f64>::compute(&ship, 12.0).unwrap();
        let direct = SourceSpectrum::<f64>::compute(&ship, 9.0).unwrap();
        let shifted = s.at_speed(9.0).unwrap();
        for (a, b) in direct.levels.iter().zip(shifted.levels.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert!(s.to_csv().starts_with("frequency_hz,level_db\n12.5,"));
    }

    #[test]
    fn single_precision_spectrum() {
        let v: f32 = source_level(100.0_f32, 14.8, 300.0, ShipClass::Other).unwrap();
        let w: f64 = source_level(100.0_f64, 14.8, 300.0, ShipClass::Other).unwrap();
        assert!((v as f64 - w).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn speed_law(band in 0usize..30, v in 0.5f64..30.0, a in 0.1f64..4.0, ci in 0usize..13) {
            let class = ShipClass::ALL[ci];
            let f = DECIDECADE_BANDS_HZ[band];
            let d = source_level(f, a * v, 500.0, class).unwrap() - source_level(f, v, 500.0, class).unwrap();
            prop_assert!((d - 60.0 * a.log10()).abs() < 1e-9);
        }

        #[test]
        fn length_law(band in 0usize..30, l in 20.0f64..1500.0, a in 0.2f64..4.0) {
            let f = DECIDECADE_BANDS_HZ[band];
            let d = source_level(f, 10.0, a * l, ShipClass::Tanker).unwrap()
                - source_level(f, 10.0, l, ShipClass::Tanker).unwrap();
            prop_assert!((d - 20.0 * a.log10()).abs() < 1e-9);
        }

        #[test]
        fn broadband_bounds(levels in proptest::collection::vec(40.0f64..200.0, 30)) {
            let b = broadband_level(&levels).unwrap();
            let max = levels.iter().cloned().fold(f64::MIN, f64::max);
            prop_assert!(b >= max - 1e-9);
            prop_assert!(b <= max + 10.0 * 30f64.log10() + 1e-9);
        }

        #[test]
        fn reference_speed_total(id in any::<i64>(), l in 1.0f64..2000.0) {
            let v = reference_speed(id, l);
            prop_assert!(v > 0.0);
        }
    }
}
