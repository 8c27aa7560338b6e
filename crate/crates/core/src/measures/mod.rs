//! Discrete probability measures on R^d.
//!
//! Every measure in the crate (targets, Bass measures, smoothed measures)
//! is a weighted point cloud. Points are stored row-major in one flat
//! buffer so that OT kernels can walk them without indirection.

mod io;
mod order;
mod quadrature;

pub use io::{read_measure_csv, write_measure_csv};
pub use order::{check_convex_order, martingale_coupling, ConvexOrderCertificate, ConvexOrderReport};
pub use quadrature::{gauss_hermite_1d, QuadratureRule};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Weighted point cloud. Weights sum to one, every weight is positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    dim: usize,
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from a flat row-major buffer, validating and
    /// normalizing the weights. Zero-weight atoms are dropped.
    pub fn from_flat(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        if points.len() != dim * weights.len() {
            return Err(Error::DimensionMismatch {
                expected: dim * weights.len(),
                got: points.len(),
            });
        }
        normalize_parts(dim, points, weights)
    }

    pub fn from_points(points: &[Vec<f64>], weights: &[f64]) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::AllZeroWeights)?;
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(dim, flat, weights.to_vec())
    }

    /// One-dimensional measure from scalar atoms.
    pub fn from_1d(points: &[f64], weights: &[f64]) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        Self::from_flat(1, points.to_vec(), weights.to_vec())
    }

    pub fn uniform_1d(points: &[f64]) -> Result<Self> {
        Self::from_1d(points, &vec![1.0; points.len()])
    }

    pub fn dirac(at: &[f64]) -> Result<Self> {
        Self::from_flat(at.len(), at.to_vec(), vec![1.0])
    }

    /// Equal-weight midpoint-quantile discretization of N(mean, sd²) in d = 1.
    pub fn gaussian_quantiles_1d(mean: f64, sd: f64, n: usize) -> Result<Self> {
        if n == 0 || sd <= 0.0 || !sd.is_finite() || !mean.is_finite() {
            return Err(Error::InvalidInput(format!("bad quantile grid: n={n}, sd={sd}")));
        }
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        let pts: Vec<f64> = (0..n)
            .map(|i| mean + sd * std.inverse_cdf((i as f64 + 0.5) / n as f64))
            .collect();
        Self::uniform_1d(&pts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn flat_points(&self) -> &[f64] {
        &self.points
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// Applies `f` to every atom position, keeping weights.
    pub fn map_points<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut out = vec![0.0; self.points.len()];
        for (src, dst) in self.points.chunks_exact(self.dim).zip(out.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        Self::from_flat(self.dim, out, self.weights.clone())
    }

    pub fn translate(&self, c: &[f64]) -> Result<Self> {
        self.check_dim(c.len())?;
        self.map_points(|x, y| {
            for k in 0..x.len() {
                y[k] = x[k] + c[k];
            }
        })
    }

    pub fn scale(&self, s: f64) -> Result<Self> {
        self.map_points(|x, y| {
            for k in 0..x.len() {
                y[k] = s * x[k];
            }
        })
    }

    /// Same atoms, new weights (renormalized).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::InvalidInput("weight vector length".into()));
        }
        Self::from_flat(self.dim, self.points.clone(), weights)
    }

    /// Weighted union `(1-u)·self + u·other`.
    pub fn mixture(&self, other: &Self, u: f64) -> Result<Self> {
        self.check_dim(other.dim)?;
        let mut pts = self.points.clone();
        pts.extend_from_slice(&other.points);
        let mut w: Vec<f64> = self.weights.iter().map(|w| (1.0 - u) * w).collect();
        w.extend(other.weights.iter().map(|w| u * w));
        Self::from_flat(self.dim, pts, w)
    }

    /// Merges atoms sitting at identical positions.
    pub fn merge_duplicates(&self) -> Self {
        let d = self.dim;
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.point(a)
                .iter()
                .zip(self.point(b))
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut pts: Vec<f64> = Vec::with_capacity(self.points.len());
        let mut ws: Vec<f64> = Vec::with_capacity(self.len());
        for i in idx {
            let p = self.point(i);
            if let Some(last) = ws.len().checked_sub(1) {
                if &pts[last * d..(last + 1) * d] == p {
                    ws[last] += self.weights[i];
                    continue;
                }
            }
            pts.extend_from_slice(p);
            ws.push(self.weights[i]);
        }
        Self { dim: d, points: pts, weights: ws }
    }

    pub fn is_dirac(&self, tol: f64) -> bool {
        let b = barycenter(self);
        self.atoms()
            .all(|(p, _)| p.iter().zip(&b).all(|(x, c)| (x - c).abs() <= tol))
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got });
        }
        Ok(())
    }
}

fn normalize_parts(dim: usize, points: Vec<f64>, weights: Vec<f64>) -> Result<DiscreteMeasure> {
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("points"));
    }
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("weights"));
    }
    if let Some(&w) = weights.iter().find(|&&w| w < 0.0) {
        return Err(Error::NegativeWeight(w));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::AllZeroWeights);
    }
    // already normalized up to summation rounding: leave the weights alone
    // so that normalization is idempotent bit for bit
    let unit = (total - 1.0).abs() <= 4.0 * f64::EPSILON * weights.len() as f64;
    let mut pts = Vec::with_capacity(points.len());
    let mut ws = Vec::with_capacity(weights.len());
    for (p, &w) in points.chunks_exact(dim).zip(&weights) {
        if w > 0.0 {
            pts.extend_from_slice(p);
            ws.push(if unit { w } else { w / total });
        }
    }
    if !unit {
        // second pass absorbs rounding so the sum is 1 to machine precision
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
    }
    Ok(DiscreteMeasure { dim, points: pts, weights: ws })
}

/// Rescales weights to sum to one and drops zero-weight atoms.
pub fn normalize(m: &DiscreteMeasure) -> Result<DiscreteMeasure> {
    normalize_parts(m.dim, m.points.clone(), m.weights.clone())
}

pub fn barycenter(m: &DiscreteMeasure) -> Vec<f64> {
    let mut b = vec![0.0; m.dim];
    for (p, w) in m.atoms() {
        for (bk, pk) in b.iter_mut().zip(p) {
            *bk += w * pk;
        }
    }
    b
}

pub fn second_moment(m: &DiscreteMeasure) -> f64 {
    m.atoms().map(|(p, w)| w * dot(p, p)).sum()
}

/// Per-axis variance.
pub fn variance(m: &DiscreteMeasure) -> Vec<f64> {
    let b = barycenter(m);
    let mut v = vec![0.0; m.dim];
    for (p, w) in m.atoms() {
        for k in 0..m.dim {
            v[k] += w * (p[k] - b[k]).powi(2);
        }
    }
    v
}

/// Diagonal Gaussian N(mean, diag(variances)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl GaussianSpec {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), got: variances.len() });
        }
        if mean.is_empty() {
            return Err(Error::InvalidInput("empty Gaussian".into()));
        }
        if variances.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("variances must be positive".into()));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("mean"));
        }
        Ok(Self { mean, variances })
    }

    pub fn isotropic(dim: usize, t: f64) -> Result<Self> {
        Self::new(vec![0.0; dim], vec![t; dim])
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Tensor-product Gauss–Hermite discretization of a diagonal Gaussian.
pub fn discretize_gaussian(g: &GaussianSpec, n_per_axis: usize) -> Result<DiscreteMeasure> {
    if n_per_axis < 2 {
        return Err(Error::InvalidInput("need at least 2 nodes per axis".into()));
    }
    let rule = QuadratureRule::gauss_hermite(n_per_axis, g.dim())?;
    let sd: Vec<f64> = g.variances.iter().map(|v| v.sqrt()).collect();
    let mut pts = Vec::with_capacity(rule.nodes_flat().len());
    for node in rule.nodes() {
        pts.extend(node.iter().zip(&sd).zip(&g.mean).map(|((z, s), m)| m + s * z));
    }
    DiscreteMeasure::from_flat(g.dim(), pts, rule.weights().to_vec())
}

/// Finite-mixture realization of `m ∗ N(0, t·I)`: atom `x_i + √t·node_j`
/// with weight `w_i·r_j`.
pub fn gaussian_smooth(m: &DiscreteMeasure, t: f64, rule: &QuadratureRule) -> Result<DiscreteMeasure> {
    gaussian_smooth_pruned(m, t, rule, None)
}

/// As [`gaussian_smooth`], optionally dropping atoms lighter than `prune`
/// (the remaining weights are renormalized).
pub fn gaussian_smooth_pruned(
    m: &DiscreteMeasure,
    t: f64,
    rule: &QuadratureRule,
    prune: Option<f64>,
) -> Result<DiscreteMeasure> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing time must be positive, got {t}")));
    }
    m.check_dim(rule.dim())?;
    let d = m.dim;
    let st = t.sqrt();
    let cap = m.len() * rule.len();
    let mut pts = Vec::with_capacity(cap * d);
    let mut ws = Vec::with_capacity(cap);
    let floor = prune.unwrap_or(0.0);
    for (x, w) in m.atoms() {
        for (node, r) in rule.nodes().zip(rule.weights()) {
            let wr = w * r;
            if wr <= floor {
                continue;
            }
            pts.extend(x.iter().zip(node).map(|(a, b)| a + st * b));
            ws.push(wr);
        }
    }
    DiscreteMeasure::from_flat(d, pts, ws)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
