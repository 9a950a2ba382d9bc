use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::PropagationError;
use crate::noise_source::BAND_COUNT;

/// Number of principal components kept for the band TL.
pub const PCA_COMPONENTS: usize = 10;

/// Principal directions of the band TL vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaBasis {
    pub mean: [f64; BAND_COUNT],
    /// Orthonormal rows, largest variance first.
    pub components: Vec<[f64; BAND_COUNT]>,
    pub explained_variance: Vec<f64>,
}

/// Fits the top [`PCA_COMPONENTS`] directions of mean-centred samples.
pub fn pca_fit(samples: &[[f64; BAND_COUNT]]) -> Result<PcaBasis, PropagationError> {
    pca_fit_k(samples, PCA_COMPONENTS)
}

pub fn pca_fit_k(samples: &[[f64; BAND_COUNT]], k: usize) -> Result<PcaBasis, PropagationError> {
    let n = samples.len();
    if n < k || k == 0 || k > BAND_COUNT {
        return Err(PropagationError::InsufficientData { needed: k.max(1), found: n });
    }
    let mut mean = [0.0; BAND_COUNT];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(BAND_COUNT, BAND_COUNT);
    for s in samples {
        for i in 0..BAND_COUNT {
            let di = s[i] - mean[i];
            for j in i..BAND_COUNT {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..BAND_COUNT {
        for j in i..BAND_COUNT {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..BAND_COUNT).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut components = Vec::with_capacity(k);
    let mut explained_variance = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        let col = eig.eigenvectors.column(idx);
        let mut c = [0.0; BAND_COUNT];
        c.iter_mut().zip(col.iter()).for_each(|(d, s)| *d = *s);
        // sign convention: largest-magnitude entry positive
        let pivot = c.iter().copied().fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        components.push(c);
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaBasis { mean, components, explained_variance })
}

impl PcaBasis {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn project(&self, tl: &[f64; BAND_COUNT]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| c.iter().zip(tl.iter().zip(self.mean.iter())).map(|(ci, (t, m))| ci * (t - m)).sum())
            .collect()
    }

    /// `mean + Σ coeff_k · component_k`.
    pub fn reconstruct(&self, coeffs: &[f64]) -> [f64; BAND_COUNT] {
        let mut out = self.mean;
        for (c, &a) in self.components.iter().zip(coeffs) {
            out.iter_mut().zip(c.iter()).for_each(|(o, ci)| *o += a * ci);
        }
        out
    }
}
