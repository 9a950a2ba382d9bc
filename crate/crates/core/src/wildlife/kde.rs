//! Gaussian product-kernel density estimation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::WildlifeError;
use crate::num::Real;

/// Rejection budget per sample in [`KdeModel::sample`].
pub const MAX_REJECTIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule<T> {
    /// `h_d = n_eff^(−1/(d+4))·σ̂_d`.
    Scott,
    /// One bandwidth per dimension.
    Fixed(Vec<T>),
}

/// Density estimate over `n` points in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel<T> {
    dim: usize,
    /// Row-major `n × d`.
    points: Vec<T>,
    /// Normalised to sum to one.
    weights: Vec<T>,
    bandwidth: Vec<T>,
}

fn weighted_std<T: Real>(values: impl Iterator<Item = T> + Clone, weights: &[T]) -> T {
    let mean: T = values.clone().zip(weights).map(|(v, &w)| v * w).sum();
    let var: T = values.zip(weights).map(|(v, &w)| w * (v - mean) * (v - mean)).sum();
    // unbiased with reliability weights: divide by 1 − Σw²
    let w2: T = weights.iter().map(|&w| w * w).sum();
    let denom = T::one() - w2;
    if denom <= T::zero() {
        T::zero()
    } else {
        (var / denom).sqrt()
    }
}

/// Fits a KDE to `points` given as rows of length `dim`.
pub fn kde_fit<T: Real>(
    points: &[Vec<T>],
    weights: Option<&[T]>,
    rule: &BandwidthRule<T>,
) -> Result<KdeModel<T>, WildlifeError> {
    let n = points.len();
    if n == 0 {
        return Err(WildlifeError::EmptyData);
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(WildlifeError::Config("all points need the same non-zero dimension".into()));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(WildlifeError::Config("data contains non-finite values".into()));
    }
    let weights: Vec<T> = match weights {
        None => vec![T::one() / T::lit(n as f64); n],
        Some(w) => {
            if w.len() != n || w.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return Err(WildlifeError::Config("weights must be finite, non-negative and one per point".into()));
            }
            let total: T = w.iter().copied().sum();
            if !(total > T::zero()) {
                return Err(WildlifeError::Config("weights sum to zero".into()));
            }
            w.iter().map(|&x| x / total).collect()
        }
    };
    let bandwidth = match rule {
        BandwidthRule::Fixed(h) => {
            if h.len() != dim {
                return Err(WildlifeError::Config(format!("expected {dim} bandwidths, got {}", h.len())));
            }
            h.clone()
        }
        BandwidthRule::Scott => {
            let n_eff = T::one() / weights.iter().map(|&w| w * w).sum::<T>();
            let factor = n_eff.powf(-T::one() / T::lit(dim as f64 + 4.0));
            (0..dim)
                .map(|d| weighted_std(points.iter().map(move |p| p[d]), &weights) * factor)
                .collect()
        }
    };
    if let Some(d) = bandwidth.iter().position(|&h| !(h > T::zero()) || !h.is_finite()) {
        return Err(WildlifeError::DegenerateBandwidth { dim: d });
    }
    Ok(KdeModel { dim, points: points.iter().flatten().copied().collect(), weights, bandwidth })
}

impl<T: Real> KdeModel<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn bandwidth(&self) -> &[T] {
        &self.bandwidth
    }

    pub fn point(&self, i: usize) -> &[T] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Density at `x`: `Σ w_i Π_d φ((x_d − x_id)/h_d)/h_d`.
    pub fn pdf(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.dim, "query dimension");
        let norm = (T::lit(2.0) * T::PI()).powf(T::lit(self.dim as f64) / T::lit(2.0))
            * self.bandwidth.iter().copied().fold(T::one(), |a, h| a * h);
        let half = T::lit(0.5);
        let sum: T = (0..self.len())
            .map(|i| {
                let q: T = self
                    .point(i)
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidth)
                    .map(|((&c, &v), &h)| {
                        let z = (v - c) / h;
                        z * z
                    })
                    .sum();
                self.weights[i] * (-half * q).exp()
            })
            .sum();
        sum / norm
    }
}

impl KdeModel<f64> {
    /// Draws one point per call of the smoothed bootstrap: pick a data point by
    /// weight, add Gaussian noise scaled by the bandwidth. Candidates rejected
    /// by `accept` are redrawn up to [`MAX_REJECTIONS`] times.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        count: usize,
        rng: &mut R,
        accept: impl Fn(&[f64]) -> bool,
    ) -> Result<Vec<Vec<f64>>, WildlifeError> {
        let mut cumulative = Vec::with_capacity(self.len());
        let mut acc = 0.0;
        for &w in &self.weights {
            acc += w;
            cumulative.push(acc);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut drawn = None;
            for _ in 0..MAX_REJECTIONS {
                let u: f64 = rng.random_range(0.0..acc);
                let i = cumulative.partition_point(|&c| c <= u).min(self.len() - 1);
                let candidate: Vec<f64> = self
                    .point(i)
                    .iter()
                    .zip(&self.bandwidth)
                    .map(|(&c, &h)| {
                        let z: f64 = StandardNormal.sample(rng);
                        c + h * z
                    })
                    .collect();
                if accept(&candidate) {
                    drawn = Some(candidate);
                    break;
                }
            }
            match drawn {
                Some(p) => out.push(p),
                None => {
                    return Err(WildlifeError::Sampling {
                        attempts: MAX_REJECTIONS,
                        region: self.support_description(),
                    })
                }
            }
        }
        Ok(out)
    }

    fn support_description(&self) -> String {
        let ranges: Vec<String> = (0..self.dim)
            .map(|d| {
                let (lo, hi) = (0..self.len())
                    .map(|i| self.point(i)[d])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
                format!("[{:.6}, {:.6}] ± {:.3e}", lo, hi, 3.0 * self.bandwidth[d])
            })
            .collect();
        format!("kernel support {}", ranges.join(" × "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(0.0..3.0)]).collect()
    }

    #[test]
    fn empty_is_rejected() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(kde_fit(&empty, None, &BandwidthRule::Scott), Err(WildlifeError::EmptyData)));
    }

    #[test]
    fn single_point_needs_fixed_bandwidth() {
        let one = vec![vec![48.6, -123.3]];
        assert!(matches!(
            kde_fit(&one, None, &BandwidthRule::Scott),
            Err(WildlifeError::DegenerateBandwidth { .. })
        ));
        let h = 0.01;
        let m = kde_fit(&one, None, &BandwidthRule::Fixed(vec![h, h])).unwrap();
        let peak = m.pdf(&[48.6, -123.3]);
        assert!((peak - 1.0 / (2.0 * std::f64::consts::PI * h * h)).abs() < 1e-9 * peak);
        // symmetric about the centre, maximal there
        for &(dx, dy) in &[(0.003, 0.0), (0.0, 0.007), (0.004, -0.002)] {
            let a = m.pdf(&[48.6 + dx, -123.3 + dy]);
            let b = m.pdf(&[48.6 - dx, -123.3 - dy]);
            assert!((a - b).abs() < 1e-9 * peak);
            assert!(a < peak);
        }
    }

    #[test]
    fn scott_bandwidth() {
        let data: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let m = kde_fit(&data, None, &BandwidthRule::Scott).unwrap();
        // σ̂ = sqrt(2.5), n^(−1/5)
        let expect = 2.5_f64.sqrt() * 5.0_f64.powf(-0.2);
        assert!((m.bandwidth()[0] - expect).abs() < 1e-12);
    }

    #[test]
    fn duplicated_data_same_density_at_fixed_bandwidth() {
        let data = cloud(40, 5);
        let scott = kde_fit(&data, None, &BandwidthRule::Scott).unwrap();
        let doubled: Vec<Vec<f64>> = data.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
        let same_h = kde_fit(&doubled, None, &BandwidthRule::Fixed(scott.bandwidth().to_vec())).unwrap();
        let rescott = kde_fit(&doubled, None, &BandwidthRule::Scott).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let q = [rng.random_range(-1.5..1.5), rng.random_range(-0.5..3.5)];
            assert!((scott.pdf(&q) - same_h.pdf(&q)).abs() < 1e-12);
        }
        // the only difference under Scott's rule is the bandwidth change in n
        assert!(rescott.bandwidth()[0] < scott.bandwidth()[0]);
    }

    fn integrate_2d(m: &KdeModel<f64>) -> f64 {
        let h = m.bandwidth();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for i in 0..m.len() {
            for d in 0..2 {
                lo[d] = lo[d].min(m.point(i)[d] - 6.0 * h[d]);
                hi[d] = hi[d].max(m.point(i)[d] + 6.0 * h[d]);
            }
        }
        let steps = 400;
        let dx = (hi[0] - lo[0]) / steps as f64;
        let dy = (hi[1] - lo[1]) / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                total += m.pdf(&[lo[0] + (i as f64 + 0.5) * dx, lo[1] + (j as f64 + 0.5) * dy]);
            }
        }
        total * dx * dy
    }

    #[test]
    fn integrates_to_one() {
        let m2 = kde_fit(&cloud(25, 1), None, &BandwidthRule::Scott).unwrap();
        assert!((integrate_2d(&m2) - 1.0).abs() < 1e-3);

        let depths: Vec<Vec<f64>> = [12.0, 30.0, 31.0, 55.0, 80.0].iter().map(|&d| vec![d]).collect();
        let m1 = kde_fit(&depths, None, &BandwidthRule::Scott).unwrap();
        let h = m1.bandwidth()[0];
        let (lo, hi) = (12.0 - 6.0 * h, 80.0 + 6.0 * h);
        let steps = 20_000;
        let dx = (hi - lo) / steps as f64;
        let total: f64 = (0..steps).map(|i| m1.pdf(&[lo + (i as f64 + 0.5) * dx])).sum::<f64>() * dx;
        assert!((total - 1.0).abs() < 1e-3);
    }

    #[test]
    fn weights_shift_mass() {
        let data = vec![vec![0.0_f64], vec![10.0]];
        let h = BandwidthRule::Fixed(vec![1.0]);
        let m = kde_fit(&data, Some(&[3.0, 1.0]), &h).unwrap();
        assert!((m.pdf(&[0.0]) / m.pdf(&[10.0]) - 3.0).abs() < 1e-9);
        assert!(kde_fit(&data, Some(&[1.0]), &h).is_err());
        assert!(kde_fit(&data, Some(&[0.0, 0.0]), &h).is_err());
    }

    #[test]
    fn sampling_statistics() {
        let h = 0.2;
        let m = kde_fit(&[vec![3.0, -1.0]], None, &BandwidthRule::Fixed(vec![h, h])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        assert!(m.sample(0, &mut rng, |_| true).unwrap().is_empty());
        let s = m.sample(10_000, &mut rng, |_| true).unwrap();
        for (d, c) in [3.0, -1.0].iter().enumerate() {
            let mean = s.iter().map(|p| p[d]).sum::<f64>() / s.len() as f64;
            assert!((mean - c).abs() < 3.0 * h / 100.0, "dim {d}: {mean}");
        }
        let tiny = kde_fit(&[vec![3.0, -1.0]], None, &BandwidthRule::Fixed(vec![1e-300, 1e-300])).unwrap();
        assert!(tiny.sample(20, &mut rng, |_| true).unwrap().iter().all(|p| p == &[3.0, -1.0]));
    }

    #[test]
    fn rejection_budget() {
        let m = kde_fit(&[vec![0.0]], None, &BandwidthRule::Fixed(vec![1.0])).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let accepted = m.sample(50, &mut rng, |p| p[0] > 0.0).unwrap();
        assert!(accepted.iter().all(|p| p[0] > 0.0));
        match m.sample(1, &mut rng, |p| p[0] > 100.0) {
            Err(WildlifeError::Sampling { attempts, region }) => {
                assert_eq!(attempts, MAX_REJECTIONS);
                assert!(region.contains("kernel support"));
            }
            other => panic!("expected sampling error, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let m = kde_fit(&cloud(30, 2), None, &BandwidthRule::Scott).unwrap();
        let a = m.sample(100, &mut ChaCha8Rng::seed_from_u64(9), |_| true).unwrap();
        let b = m.sample(100, &mut ChaCha8Rng::seed_from_u64(9), |_| true).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_precision_pdf() {
        let m = kde_fit(&[vec![1.0_f32]], None, &BandwidthRule::Fixed(vec![0.5_f32])).unwrap();
        let peak = m.pdf(&[1.0]);
        assert!((peak - 1.0 / (0.5 * (2.0 * std::f32::consts::PI).sqrt())).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn density_is_non_negative(x in -50.0..50.0f64, y in -50.0..50.0f64, seed in 0u64..50) {
            let m = kde_fit(&cloud(10, seed), None, &BandwidthRule::Scott).unwrap();
            prop_assert!(m.pdf(&[x, y]) >= 0.0);
        }
    }
}
