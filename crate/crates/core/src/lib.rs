//! Noise-aware voyage planning engine.

pub mod geo;
pub mod interface_hub;
pub mod manifest;
pub mod noise_source;
pub mod num;
pub mod propagation;
pub mod route_planner;
pub mod sim_engine;
pub mod speed_optimizer;
pub mod wildlife;

/// `f64` instantiations of the scalar-generic types.
pub type GeoPoint = geo::GeoPoint<f64>;
pub type PlanarPoint = geo::PlanarPoint<f64>;
pub type BathymetryGrid = geo::BathymetryGrid<f64>;
pub type Environment = geo::Environment<f64>;
pub type SourceSpectrum = noise_source::SourceSpectrum<f64>;
pub type KdeModel = wildlife::KdeModel<f64>;
