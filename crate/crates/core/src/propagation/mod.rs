//! Transmission loss: synthetic field generation, PCA band compression, the
//! Gaussian RBF surrogate and the passive sonar equation.

mod field;
mod pca;
mod rbf;
mod synth;

use std::sync::Arc;

use thiserror::Error;

pub use field::{precompute_field, LatticeSpec, TlFieldCache, TlSample, INPUT_DIM, MAX_RECEIVER_DEPTH_M};
pub use pca::{pca_fit, pca_fit_k, PcaBasis, PCA_COMPONENTS};
pub use rbf::{fit_with_basis, kernel, rbf_fit, RbfConfig, RbfInterpolant, RbfQuery, SigmaRule, Trend, RIDGE};
pub use synth::{slant_range, synth_tl, synth_tl_bands, thorp_absorption, tl_from_geometry, SHADOW_LOSS_DB, SOURCE_DEPTH_M};

use crate::geo::{BathymetryGrid, GeoError, GeoPoint};
use crate::manifest::ManifestError;
use crate::noise_source::{broadband_level, SourceSpectrum, BAND_COUNT};
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PropagationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("need at least {needed} samples, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("kernel system of size {n} is singular after regularisation (condition ≈ {condition:.3e})")]
    SingularSystem { condition: f64, n: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<csv::Error> for PropagationError {
    fn from(e: csv::Error) -> Self {
        PropagationError::Io(e.to_string())
    }
}

/// Received broadband level: per band `NLS − TL`, then a power sum.
pub fn received_level<T: Real>(nls: &[T], tl: &[T]) -> Result<T, PropagationError> {
    if nls.len() != tl.len() || nls.is_empty() {
        return Err(PropagationError::Shape { expected: nls.len(), found: tl.len() });
    }
    let nl: Vec<T> = nls.iter().zip(tl).map(|(&s, &t)| s - t).collect();
    Ok(broadband_level(&nl).expect("non-empty"))
}

pub fn received_level_from_spectrum<T: Real>(
    nls: &SourceSpectrum<T>,
    tl: &[T; BAND_COUNT],
) -> T {
    received_level(&nls.levels, tl).expect("30 bands each")
}

/// Band TL between a ship position and a receiver.
pub trait TlModel: Send + Sync {
    fn band_tl(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> [f64; BAND_COUNT];

    /// Arithmetic mean of the band TL values.
    fn mean_tl(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> f64 {
        self.band_tl(src, rcv).iter().sum::<f64>() / BAND_COUNT as f64
    }
}

impl TlModel for RbfInterpolant {
    fn band_tl(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> [f64; BAND_COUNT] {
        self.eval(&src.with_depth(SOURCE_DEPTH_M), rcv).tl
    }
}

/// Direct evaluation of the synthetic field. Points outside the grid get
/// spreading and absorption only.
#[derive(Debug, Clone)]
pub struct DirectTl {
    pub grid: Arc<BathymetryGrid<f64>>,
}

impl TlModel for DirectTl {
    fn band_tl(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> [f64; BAND_COUNT] {
        let src = src.with_depth(SOURCE_DEPTH_M);
        synth_tl_bands(&src, rcv, &self.grid).unwrap_or_else(|_| {
            let r = slant_range(&src, rcv);
            std::array::from_fn(|b| tl_from_geometry(r, 0.0, crate::noise_source::DECIDECADE_BANDS_HZ[b]))
        })
    }
}

impl<M: TlModel + ?Sized> TlModel for Arc<M> {
    fn band_tl(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> [f64; BAND_COUNT] {
        (**self).band_tl(src, rcv)
    }
}
