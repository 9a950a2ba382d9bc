//! Gaussian radial-basis surrogate of the band TL field.
//!
//! Band TL vectors are compressed to [`PCA_COMPONENTS`](super::PCA_COMPONENTS) principal coefficients
//! and each coefficient gets its own weight column over a shared set of
//! centres. Inputs are normalised per dimension to unit variance before the
//! kernel `ψ(r) = exp(−½ (r/σ)²)` is applied.
//!
//! With [`Trend::Spreading`] the surrogate models the residual left after
//! spherical spreading and Thorp absorption over the slant range, and adds
//! that trend back on evaluation.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::{TlSample, INPUT_DIM};
use super::pca::{pca_fit, PcaBasis};
use super::synth::{slant_range, tl_from_geometry, SOURCE_DEPTH_M};
use super::PropagationError;
use crate::geo::GeoPoint;
use crate::manifest::Manifest;
use crate::noise_source::{BAND_COUNT, DECIDECADE_BANDS_HZ};

/// Diagonal regularisation added to the kernel matrix.
pub const RIDGE: f64 = 1e-8;

const RBF_KIND: &str = "rbf_interpolant";
const KMEANS_ITERATIONS: usize = 50;

/// Kernel width rule, in normalised input units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SigmaRule {
    /// `scale ×` median nearest-neighbour distance between centres.
    MedianNearestNeighbor { scale: f64 },
    Fixed { sigma: f64 },
}

impl Default for SigmaRule {
    fn default() -> Self {
        SigmaRule::MedianNearestNeighbor { scale: 1.0 }
    }
}

/// Deterministic part removed before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    None,
    /// `20·log10(max(r, 1)) + α(f)·r/1000` over the slant range from a source
    /// at the standard source depth.
    #[default]
    Spreading,
}

impl Trend {
    fn name(self) -> &'static str {
        match self {
            Trend::None => "none",
            Trend::Spreading => "spreading",
        }
    }

    fn parse(s: &str) -> Result<Self, PropagationError> {
        match s {
            "none" => Ok(Trend::None),
            "spreading" => Ok(Trend::Spreading),
            other => Err(PropagationError::Config(format!("unknown trend '{other}'"))),
        }
    }

    pub fn eval(self, x: &[f64; INPUT_DIM]) -> [f64; BAND_COUNT] {
        match self {
            Trend::None => [0.0; BAND_COUNT],
            Trend::Spreading => {
                let src = GeoPoint::new(x[0], x[1], SOURCE_DEPTH_M).unwrap_or(GeoPoint::surface(x[0], x[1]));
                let rcv = GeoPoint { lat: x[2], lon: x[3], depth: x[4] };
                let r = slant_range(&src, &rcv);
                std::array::from_fn(|b| tl_from_geometry(r, 0.0, DECIDECADE_BANDS_HZ[b]))
            }
        }
    }

    fn residual(self, s: &TlSample) -> [f64; BAND_COUNT] {
        let t = self.eval(&s.x);
        std::array::from_fn(|b| s.tl[b] - t[b])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfConfig {
    pub clusters: usize,
    pub per_cluster: usize,
    #[serde(default)]
    pub sigma: SigmaRule,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trend: Trend,
}

fn default_ridge() -> f64 {
    RIDGE
}

impl Default for RbfConfig {
    fn default() -> Self {
        Self { clusters: 50, per_cluster: 10, sigma: SigmaRule::default(), ridge: RIDGE, seed: 0, trend: Trend::default() }
    }
}

#[inline]
pub fn kernel(r: f64, sigma: f64) -> f64 {
    (-0.5 * (r / sigma).powi(2)).exp()
}

/// Result of a surrogate query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbfQuery {
    pub tl: [f64; BAND_COUNT],
    /// Query fell outside the centre bounding box inflated by 2σ.
    pub extrapolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfInterpolant {
    centers: Vec<[f64; INPUT_DIM]>,
    input_mean: [f64; INPUT_DIM],
    input_scale: [f64; INPUT_DIM],
    sigma: f64,
    ridge: f64,
    trend: Trend,
    /// `centers × components`, row-major.
    weights: Vec<f64>,
    basis: PcaBasis,
    #[serde(skip)]
    normalized: Vec<[f64; INPUT_DIM]>,
    #[serde(skip)]
    bbox: ([f64; INPUT_DIM], [f64; INPUT_DIM]),
}

struct Normalizer {
    mean: [f64; INPUT_DIM],
    scale: [f64; INPUT_DIM],
}

impl Normalizer {
    fn fit(xs: &[[f64; INPUT_DIM]]) -> Self {
        let n = xs.len() as f64;
        let mut mean = [0.0; INPUT_DIM];
        let mut scale = [1.0; INPUT_DIM];
        for d in 0..INPUT_DIM {
            mean[d] = xs.iter().map(|x| x[d]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[d] - mean[d]).powi(2)).sum::<f64>() / n;
            if var > 1e-24 {
                scale[d] = var.sqrt();
            }
        }
        Self { mean, scale }
    }

    fn apply(&self, x: &[f64; INPUT_DIM]) -> [f64; INPUT_DIM] {
        std::array::from_fn(|d| (x[d] - self.mean[d]) / self.scale[d])
    }
}

fn dist2(a: &[f64; INPUT_DIM], b: &[f64; INPUT_DIM]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Lloyd's k-means with k-means++ seeding. Returns the cluster of each point.
fn kmeans(points: &[[f64; INPUT_DIM]], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = points.len();
    let mut centroids: Vec<[f64; INPUT_DIM]> = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centroids.push(points[next]);
        let c = centroids[centroids.len() - 1];
        d2.iter_mut().zip(points).for_each(|(d, p)| *d = d.min(dist2(p, &c)));
    }
    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_ITERATIONS {
        let next: Vec<usize> = points
            .par_iter()
            .map(|p| {
                let mut best = (f64::INFINITY, 0);
                for (ci, c) in centroids.iter().enumerate() {
                    let d = dist2(p, c);
                    if d < best.0 {
                        best = (d, ci);
                    }
                }
                best.1
            })
            .collect();
        let changed = next != assign;
        assign = next;
        let mut sums = vec![[0.0; INPUT_DIM]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for ci in 0..k {
            if counts[ci] > 0 {
                centroids[ci] = std::array::from_fn(|d| sums[ci][d] / counts[ci] as f64);
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Picks up to `per_cluster` samples uniformly from each k-means cluster.
fn select_centers(normalized: &[[f64; INPUT_DIM]], clusters: usize, per_cluster: usize, seed: u64) -> Vec<usize> {
    let n = normalized.len();
    if clusters * per_cluster >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let assign = kmeans(normalized, clusters.min(n), &mut rng);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); clusters];
    for (i, &a) in assign.iter().enumerate() {
        members[a].push(i);
    }
    let mut chosen = Vec::new();
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
        chosen.extend(m.iter().take(per_cluster));
    }
    chosen.sort_unstable();
    chosen
}

fn median_nn_distance(points: &[[f64; INPUT_DIM]]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mut nn: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            points
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| dist2(p, q))
                .fold(f64::INFINITY, f64::min)
                .sqrt()
        })
        .collect();
    nn.sort_by(f64::total_cmp);
    let m = nn[nn.len() / 2];
    (m > 0.0).then_some(m)
}

/// Fits the surrogate: PCA over all (detrended) samples, k-means centre
/// selection, then one regularised kernel solve shared by every principal
/// component.
pub fn rbf_fit(samples: &[TlSample], config: &RbfConfig) -> Result<RbfInterpolant, PropagationError> {
    if config.clusters == 0 || config.per_cluster == 0 {
        return Err(PropagationError::Config("clusters and per_cluster must be at least 1".into()));
    }
    if config.clusters * config.per_cluster > samples.len() {
        return Err(PropagationError::Config(format!(
            "clusters × per_cluster = {} exceeds the {} available samples",
            config.clusters * config.per_cluster,
            samples.len()
        )));
    }
    let bands: Vec<[f64; BAND_COUNT]> = samples.iter().map(|s| config.trend.residual(s)).collect();
    let basis = pca_fit(&bands)?;
    fit_with_basis(samples, basis, config)
}

/// Same as [`rbf_fit`] with a precomputed PCA basis of the detrended TL.
pub fn fit_with_basis(
    samples: &[TlSample],
    basis: PcaBasis,
    config: &RbfConfig,
) -> Result<RbfInterpolant, PropagationError> {
    if samples.is_empty() {
        return Err(PropagationError::InsufficientData { needed: 1, found: 0 });
    }
    let inputs: Vec<[f64; INPUT_DIM]> = samples.iter().map(|s| s.x).collect();
    let norm = Normalizer::fit(&inputs);
    let normalized: Vec<[f64; INPUT_DIM]> = inputs.iter().map(|x| norm.apply(x)).collect();
    let chosen = select_centers(&normalized, config.clusters, config.per_cluster, config.seed);
    if chosen.is_empty() {
        return Err(PropagationError::InsufficientData { needed: 1, found: 0 });
    }
    let centers_n: Vec<[f64; INPUT_DIM]> = chosen.iter().map(|&i| normalized[i]).collect();
    let sigma = match config.sigma {
        SigmaRule::Fixed { sigma } => sigma,
        SigmaRule::MedianNearestNeighbor { scale } => median_nn_distance(&centers_n).unwrap_or(1.0) * scale,
    };
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(PropagationError::Config(format!("kernel width must be positive, got {sigma}")));
    }
    let n = centers_n.len();
    let k = basis.len();
    let psi = DMatrix::from_fn(n, n, |i, j| {
        kernel(dist2(&centers_n[i], &centers_n[j]).sqrt(), sigma) + if i == j { config.ridge } else { 0.0 }
    });
    let projected: Vec<Vec<f64>> = chosen.iter().map(|&i| basis.project(&config.trend.residual(&samples[i]))).collect();
    let rhs = DMatrix::from_fn(n, k, |i, c| projected[i][c]);
    let weights = match psi.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            let eig = SymmetricEigen::new(psi);
            let max = eig.eigenvalues.max();
            let min = eig.eigenvalues.min();
            return Err(PropagationError::SingularSystem { condition: max / min.abs().max(f64::MIN_POSITIVE), n });
        }
    };
    let mut flat = Vec::with_capacity(n * k);
    for i in 0..n {
        for c in 0..k {
            flat.push(weights[(i, c)]);
        }
    }
    let mut interp = RbfInterpolant {
        centers: chosen.iter().map(|&i| inputs[i]).collect(),
        input_mean: norm.mean,
        input_scale: norm.scale,
        sigma,
        ridge: config.ridge,
        trend: config.trend,
        weights: flat,
        basis,
        normalized: Vec::new(),
        bbox: ([0.0; INPUT_DIM], [0.0; INPUT_DIM]),
    };
    interp.rebuild();
    Ok(interp)
}

impl RbfInterpolant {
    fn normalizer(&self) -> Normalizer {
        Normalizer { mean: self.input_mean, scale: self.input_scale }
    }

    fn rebuild(&mut self) {
        let norm = self.normalizer();
        self.normalized = self.centers.iter().map(|x| norm.apply(x)).collect();
        let mut lo = [f64::INFINITY; INPUT_DIM];
        let mut hi = [f64::NEG_INFINITY; INPUT_DIM];
        for c in &self.normalized {
            for d in 0..INPUT_DIM {
                lo[d] = lo[d].min(c[d] - 2.0 * self.sigma);
                hi[d] = hi[d].max(c[d] + 2.0 * self.sigma);
            }
        }
        self.bbox = (lo, hi);
    }

    pub fn centers(&self) -> &[[f64; INPUT_DIM]] {
        &self.centers
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn trend(&self) -> Trend {
        self.trend
    }

    pub fn basis(&self) -> &PcaBasis {
        &self.basis
    }

    pub fn weight(&self, center: usize, component: usize) -> f64 {
        self.weights[center * self.basis.len() + component]
    }

    /// Principal-component coefficients at raw input `x`.
    pub fn coefficients(&self, x: &[f64; INPUT_DIM]) -> (Vec<f64>, bool) {
        let q = self.normalizer().apply(x);
        let extrapolated = (0..INPUT_DIM).any(|d| q[d] < self.bbox.0[d] || q[d] > self.bbox.1[d]);
        let k = self.basis.len();
        let mut coeffs = vec![0.0; k];
        let inv = -0.5 / (self.sigma * self.sigma);
        for (i, c) in self.normalized.iter().enumerate() {
            let w = (dist2(&q, c) * inv).exp();
            if w == 0.0 {
                continue;
            }
            let row = &self.weights[i * k..(i + 1) * k];
            coeffs.iter_mut().zip(row).for_each(|(a, l)| *a += w * l);
        }
        (coeffs, extrapolated)
    }

    pub fn eval_input(&self, x: &[f64; INPUT_DIM]) -> RbfQuery {
        let (coeffs, extrapolated) = self.coefficients(x);
        let mut tl = self.basis.reconstruct(&coeffs);
        let trend = self.trend.eval(x);
        tl.iter_mut().zip(trend.iter()).for_each(|(v, t)| *v = (*v + t).max(0.0));
        RbfQuery { tl, extrapolated }
    }

    /// Band TL from a ship position to a receiver.
    pub fn eval(&self, src: &GeoPoint<f64>, rcv: &GeoPoint<f64>) -> RbfQuery {
        self.eval_input(&TlSample::input(src, rcv))
    }

    pub fn save(&self, dir: &Path) -> Result<(), PropagationError> {
        fs::create_dir_all(dir).map_err(|e| PropagationError::Io(e.to_string()))?;
        let k = self.basis.len();
        let mut m = Manifest::new(RBF_KIND);
        m.set("kernel", "gaussian")
            .set("sigma", self.sigma)
            .set("ridge", self.ridge)
            .set("trend", self.trend.name())
            .set("center_count", self.centers.len())
            .set("components", k)
            .set_list("input_mean", &self.input_mean)
            .set_list("input_scale", &self.input_scale);
        m.write(&dir.join("manifest.txt"))?;

        let mut w = csv::Writer::from_path(dir.join("centers.csv"))?;
        w.write_record(["s_lat", "s_lon", "r_lat", "r_lon", "r_z"])?;
        for c in &self.centers {
            w.write_record(c.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| PropagationError::Io(e.to_string()))?;

        let mut w = csv::Writer::from_path(dir.join("weights.csv"))?;
        w.write_record((1..=k).map(|c| format!("w{c}")))?;
        for row in self.weights.chunks(k) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| PropagationError::Io(e.to_string()))?;

        let mut w = csv::Writer::from_path(dir.join("basis.csv"))?;
        let mut header = vec!["row".to_string(), "explained_variance".to_string()];
        header.extend((1..=BAND_COUNT).map(|b| format!("b{b}")));
        w.write_record(&header)?;
        let mut mean_row = vec!["mean".to_string(), String::new()];
        mean_row.extend(self.basis.mean.iter().map(|v| v.to_string()));
        w.write_record(&mean_row)?;
        for (i, (c, ev)) in self.basis.components.iter().zip(&self.basis.explained_variance).enumerate() {
            let mut row = vec![format!("pc{}", i + 1), ev.to_string()];
            row.extend(c.iter().map(|v| v.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| PropagationError::Io(e.to_string()))?;
        Ok(())
    }

    pub fn exists(dir: &Path) -> bool {
        ["manifest.txt", "centers.csv", "weights.csv", "basis.csv"].iter().all(|f| dir.join(f).is_file())
    }

    pub fn load(dir: &Path) -> Result<Self, PropagationError> {
        let m = Manifest::read(&dir.join("manifest.txt"))?;
        m.expect_kind(RBF_KIND)?;
        let k = m.get_f64("components")? as usize;
        let to5 = |v: Vec<f64>| -> Result<[f64; INPUT_DIM], PropagationError> {
            v.try_into().map_err(|v: Vec<f64>| PropagationError::Shape { expected: INPUT_DIM, found: v.len() })
        };
        let input_mean = to5(m.get_list("input_mean")?)?;
        let input_scale = to5(m.get_list("input_scale")?)?;
        let centers = read_rows(&dir.join("centers.csv"), INPUT_DIM, 0)?
            .into_iter()
            .map(|r| to5(r))
            .collect::<Result<Vec<_>, _>>()?;
        let weights: Vec<f64> = read_rows(&dir.join("weights.csv"), k, 0)?.into_iter().flatten().collect();
        if weights.len() != centers.len() * k {
            return Err(PropagationError::Shape { expected: centers.len() * k, found: weights.len() });
        }
        let basis_rows = read_rows(&dir.join("basis.csv"), BAND_COUNT + 1, 1)?;
        if basis_rows.len() != k + 1 {
            return Err(PropagationError::Shape { expected: k + 1, found: basis_rows.len() });
        }
        let to30 = |r: &[f64]| -> [f64; BAND_COUNT] { std::array::from_fn(|b| r[b + 1]) };
        let basis = PcaBasis {
            mean: to30(&basis_rows[0]),
            components: basis_rows[1..].iter().map(|r| to30(r)).collect(),
            explained_variance: basis_rows[1..].iter().map(|r| r[0]).collect(),
        };
        let mut interp = RbfInterpolant {
            centers,
            input_mean,
            input_scale,
            sigma: m.get_f64("sigma")?,
            ridge: m.get_f64("ridge")?,
            trend: Trend::parse(m.get("trend")?)?,
            weights,
            basis,
            normalized: Vec::new(),
            bbox: ([0.0; INPUT_DIM], [0.0; INPUT_DIM]),
        };
        interp.rebuild();
        Ok(interp)
    }
}

/// Numeric CSV rows; the first `skip` columns are dropped, blank cells read as NaN.
fn read_rows(path: &Path, width: usize, skip: usize) -> Result<Vec<Vec<f64>>, PropagationError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .skip(skip)
            .map(|t| if t.is_empty() { Ok(f64::NAN) } else { t.parse::<f64>() })
            .collect::<Result<_, _>>()
            .map_err(|e| PropagationError::Config(format!("{}: {e}", path.display())))?;
        if row.len() != width {
            return Err(PropagationError::Shape { expected: width, found: row.len() });
        }
        out.push(row);
    }
    Ok(out)
}
