use serde::{Deserialize, Serialize};

use super::GeoError;
use crate::num::Real;

/// Mean Earth radius used by the local projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Meters per nautical mile.
pub const METERS_PER_NM: f64 = 1852.0;

/// Geographic position with a depth below the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    /// Degrees north.
    pub lat: T,
    /// Degrees east, negative west.
    pub lon: T,
    /// Meters below the surface.
    pub depth: T,
}

impl<T: Real> GeoPoint<T> {
    pub fn new(lat: T, lon: T, depth: T) -> Result<Self, GeoError> {
        let p = Self { lat, lon, depth };
        p.validate()?;
        Ok(p)
    }

    /// Surface point, no validation.
    pub fn surface(lat: T, lon: T) -> Self {
        Self { lat, lon, depth: T::zero() }
    }

    pub fn with_depth(self, depth: T) -> Self {
        Self { depth, ..self }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        let ok = self.lat.is_finite()
            && self.lon.is_finite()
            && self.depth.is_finite()
            && self.lat.abs() <= T::lit(90.0)
            && self.lon.abs() <= T::lit(180.0)
            && self.depth >= T::zero();
        if ok {
            Ok(())
        } else {
            Err(GeoError::InvalidCoordinate {
                lat: self.lat.as_f64(),
                lon: self.lon.as_f64(),
                depth: self.depth.as_f64(),
            })
        }
    }

    /// Horizontal distance in meters under the local equirectangular projection
    /// about `self`.
    pub fn horizontal_distance(&self, other: &Self) -> T {
        let d = project(other, self);
        d.x.hypot(d.y)
    }
}

/// Position in the local planar frame, meters east/north of a reference point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPoint<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> PlanarPoint<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn lerp(&self, other: &Self, t: T) -> Self {
        Self { x: self.x + (other.x - self.x) * t, y: self.y + (other.y - self.y) * t }
    }
}

fn project<T: Real>(p: &GeoPoint<T>, reference: &GeoPoint<T>) -> PlanarPoint<T> {
    let r = T::lit(EARTH_RADIUS_M);
    let k = T::PI() / T::lit(180.0) * r;
    PlanarPoint {
        x: (p.lon - reference.lon) * k * reference.lat.to_radians().cos(),
        y: (p.lat - reference.lat) * k,
    }
}

/// Equirectangular projection of `p` about `reference`.
pub fn to_planar<T: Real>(p: &GeoPoint<T>, reference: &GeoPoint<T>) -> Result<PlanarPoint<T>, GeoError> {
    let finite = p.lat.is_finite() && p.lon.is_finite() && reference.lat.is_finite() && reference.lon.is_finite();
    if !finite || p.lat.abs() >= T::lit(89.0) || reference.lat.abs() >= T::lit(89.0) {
        return Err(GeoError::InvalidCoordinate {
            lat: p.lat.as_f64(),
            lon: p.lon.as_f64(),
            depth: p.depth.as_f64(),
        });
    }
    Ok(project(p, reference))
}

/// Inverse of [`to_planar`]; the returned point is at the surface.
pub fn from_planar<T: Real>(p: &PlanarPoint<T>, reference: &GeoPoint<T>) -> GeoPoint<T> {
    let k = T::PI() / T::lit(180.0) * T::lit(EARTH_RADIUS_M);
    GeoPoint {
        lat: reference.lat + p.y / k,
        lon: reference.lon + p.x / (k * reference.lat.to_radians().cos()),
        depth: T::zero(),
    }
}
