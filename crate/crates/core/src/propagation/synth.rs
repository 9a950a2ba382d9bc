//! Synthetic transmission loss: spherical spreading, Thorp absorption and a
//! terrain-occlusion penalty. Stands in for a precomputed ray-trace field with
//! the same source/receiver interface.

use crate::geo::{BathymetryGrid, GeoError, GeoPoint};
use crate::noise_source::{BAND_COUNT, DECIDECADE_BANDS_HZ};
use crate::num::Real;

/// Ship source depth, meters.
pub const SOURCE_DEPTH_M: f64 = 6.0;

/// Extra loss when the whole line of sight crosses land, dB.
pub const SHADOW_LOSS_DB: f64 = 60.0;

/// Thorp seawater absorption, dB/km, for frequency in kHz.
pub fn thorp_absorption<T: Real>(f_khz: T) -> T {
    let f2 = f_khz * f_khz;
    T::lit(0.11) * f2 / (T::one() + f2) + T::lit(44.0) * f2 / (T::lit(4100.0) + f2) + T::lit(2.75e-4) * f2
        + T::lit(0.003)
}

/// Slant range between source and receiver, meters.
pub fn slant_range<T: Real>(src: &GeoPoint<T>, rcv: &GeoPoint<T>) -> T {
    src.horizontal_distance(rcv).hypot(rcv.depth - src.depth)
}

/// TL from range and occlusion fraction at one frequency.
pub fn tl_from_geometry<T: Real>(range_m: T, blocked: T, f_hz: T) -> T {
    let spreading = T::lit(20.0) * range_m.max(T::one()).log10();
    let absorption = thorp_absorption(f_hz / T::lit(1000.0)) * range_m / T::lit(1000.0);
    spreading + absorption + T::lit(SHADOW_LOSS_DB) * blocked
}

/// Synthetic TL between `src` and `rcv` at `f_hz`, dB.
pub fn synth_tl<T: Real>(
    src: &GeoPoint<T>,
    rcv: &GeoPoint<T>,
    f_hz: T,
    grid: &BathymetryGrid<T>,
) -> Result<T, GeoError> {
    let blocked = grid.blocked_fraction(src, rcv)?;
    Ok(tl_from_geometry(slant_range(src, rcv), blocked, f_hz))
}

/// Synthetic TL in all 30 bands. Geometry is evaluated once.
pub fn synth_tl_bands<T: Real>(
    src: &GeoPoint<T>,
    rcv: &GeoPoint<T>,
    grid: &BathymetryGrid<T>,
) -> Result<[T; BAND_COUNT], GeoError> {
    let blocked = grid.blocked_fraction(src, rcv)?;
    let r = slant_range(src, rcv);
    let mut out = [T::zero(); BAND_COUNT];
    for (slot, &f) in out.iter_mut().zip(DECIDECADE_BANDS_HZ.iter()) {
        *slot = tl_from_geometry(r, blocked, T::lit(f));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{from_planar, to_planar, PlanarPoint};
    use approx::assert_abs_diff_eq;

    fn open_grid() -> BathymetryGrid<f64> {
        BathymetryGrid::from_fn(48.0, -123.5, 0.01, 51, 51, |_, _| 150.0).unwrap()
    }

    fn walled_grid() -> BathymetryGrid<f64> {
        BathymetryGrid::from_fn(48.0, -123.5, 0.002, 101, 101, |_, lon| {
            if lon > -123.41 && lon < -123.39 {
                -20.0
            } else {
                150.0
            }
        })
        .unwrap()
    }

    fn offset(src: &GeoPoint<f64>, east: f64, north: f64, depth: f64) -> GeoPoint<f64> {
        from_planar(&PlanarPoint::new(east, north), src).with_depth(depth)
    }

    #[test]
    fn reference_distance_is_zero_loss() {
        let g = open_grid();
        let s = GeoPoint::new(48.2, -123.2, 6.0).unwrap();
        let r = offset(&s, 1.0, 0.0, 6.0);
        for &f in &DECIDECADE_BANDS_HZ {
            let tl = synth_tl(&s, &r, f, &g).unwrap();
            assert!(tl >= 0.0 && tl < 0.002, "{f}: {tl}");
        }
    }

    #[test]
    fn one_kilometre_low_frequency() {
        let g = open_grid();
        let s = GeoPoint::new(48.2, -123.2, 6.0).unwrap();
        let r = offset(&s, 0.0, 1000.0, 6.0);
        let d = to_planar(&r, &s).unwrap();
        assert_abs_diff_eq!(d.y, 1000.0, epsilon = 1e-6);
        assert_abs_diff_eq!(synth_tl(&s, &r, 12.5, &g).unwrap(), 60.00, epsilon = 0.01);
    }

    #[test]
    fn full_occlusion_adds_shadow_loss() {
        let g = walled_grid();
        let s = GeoPoint::surface(48.1, -123.40).with_depth(6.0);
        let r = GeoPoint::surface(48.15, -123.40).with_depth(6.0);
        let blocked = g.blocked_fraction(&s, &r).unwrap();
        assert_eq!(blocked, 1.0);
        let range = slant_range(&s, &r);
        let open = tl_from_geometry(range, 0.0, 1000.0);
        assert_abs_diff_eq!(synth_tl(&s, &r, 1000.0, &g).unwrap(), open + 60.0, epsilon = 1e-9);
    }

    #[test]
    fn monotone_in_range_over_open_water() {
        let g = open_grid();
        let s = GeoPoint::new(48.25, -123.25, 6.0).unwrap();
        for &f in &[12.5, 1000.0, 10000.0] {
            let mut last = -1.0;
            for k in 0..200 {
                let r = offset(&s, 60.0 * k as f64, 40.0 * k as f64, 30.0);
                let tl = synth_tl(&s, &r, f, &g).unwrap();
                assert!(tl >= last, "non-monotone at step {k}");
                last = tl;
            }
        }
    }

    #[test]
    fn bands_match_single_frequency() {
        let g = walled_grid();
        let s = GeoPoint::surface(48.1, -123.45).with_depth(6.0);
        let r = GeoPoint::surface(48.12, -123.35).with_depth(50.0);
        let bands = synth_tl_bands(&s, &r, &g).unwrap();
        for (b, &f) in bands.iter().zip(DECIDECADE_BANDS_HZ.iter()) {
            assert_eq!(*b, synth_tl(&s, &r, f, &g).unwrap());
        }
    }
}
