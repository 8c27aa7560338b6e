//! Transport maps read off discrete couplings, and their off-sample
//! evaluation.

use serde::{Deserialize, Serialize};

use super::{Coupling, TransportResult};
use crate::error::{Error, Result};
use crate::measures::{dist2, DiscreteMeasure};

/// Barycentric projection `T(x_i) = Σ_j π_ij y_j / Σ_j π_ij` for every
/// source atom, row-major (`rows × d`).
pub fn barycentric_projection(result: &TransportResult, target: &DiscreteMeasure) -> Result<Vec<f64>> {
    project_coupling(&result.coupling, target)
}

pub(crate) fn project_coupling(coupling: &Coupling, target: &DiscreteMeasure) -> Result<Vec<f64>> {
    let d = target.dim();
    let n = coupling.rows();
    let mut out = vec![0.0; n * d];
    let mut mass = vec![0.0; n];
    for &(i, j, p) in coupling.entries() {
        mass[i] += p;
        for (o, y) in out[i * d..(i + 1) * d].iter_mut().zip(target.point(j)) {
            *o += p * y;
        }
    }
    for (i, &m) in mass.iter().enumerate() {
        if m <= 0.0 {
            return Err(Error::EmptyRow(i));
        }
        out[i * d..(i + 1) * d].iter_mut().for_each(|v| *v /= m);
    }
    Ok(out)
}

/// Barycentric image of a single source atom.
pub fn brenier_map(result: &TransportResult, target: &DiscreteMeasure, at: usize) -> Result<Vec<f64>> {
    let d = target.dim();
    let mut acc = vec![0.0; d];
    let mut mass = 0.0;
    for &(i, j, p) in result.coupling.entries() {
        if i == at {
            mass += p;
            for (o, y) in acc.iter_mut().zip(target.point(j)) {
                *o += p * y;
            }
        }
    }
    if mass <= 0.0 {
        return Err(Error::EmptyRow(at));
    }
    acc.iter_mut().for_each(|v| *v /= mass);
    Ok(acc)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapMode {
    /// Piecewise-linear in d = 1, inverse-distance weighting otherwise.
    #[default]
    Auto,
    /// Inverse-distance weighting over the `k` nearest samples.
    Idw { k: usize },
}

/// Sampled vector field `x ↦ T(x)` on R^d. In d = 1 the samples are kept
/// sorted with duplicate abscissae merged, so evaluation is a binary search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSamples {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
}

impl MapSamples {
    pub fn new(dim: usize, points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() {
            return Err(Error::InvalidInput("map needs at least one sample".into()));
        }
        if points.len() % dim != 0 || points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
        }
        if points.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("map samples"));
        }
        if dim > 1 {
            return Ok(Self { dim, points, values });
        }
        let mut pairs: Vec<(f64, f64)> = points.into_iter().zip(values).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pts: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut vals: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut run = 0usize;
        for (x, v) in pairs {
            match pts.last() {
                Some(&last) if (x - last).abs() <= 1e-12 * (1.0 + last.abs()) => {
                    run += 1;
                    let k = vals.len() - 1;
                    vals[k] += (v - vals[k]) / run as f64;
                }
                _ => {
                    pts.push(x);
                    vals.push(v);
                    run = 1;
                }
            }
        }
        Ok(Self { dim, points: pts, values: vals })
    }

    pub fn from_1d(points: &[f64], values: &[f64]) -> Result<Self> {
        Self::new(1, points.to_vec(), values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn values_flat(&self) -> &[f64] {
        &self.values
    }

    /// In d = 1: whether the sampled values are nondecreasing.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.dim == 1 && self.values.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    fn eval_1d(&self, x: f64) -> f64 {
        let (p, v) = (&self.points, &self.values);
        let n = p.len();
        if x <= p[0] {
            return v[0];
        }
        if x >= p[n - 1] {
            return v[n - 1];
        }
        let k = p.partition_point(|&q| q <= x);
        let (x0, x1) = (p[k - 1], p[k]);
        let s = (x - x0) / (x1 - x0);
        v[k - 1] + s * (v[k] - v[k - 1])
    }

    fn eval_idw(&self, x: &[f64], k: usize, out: &mut [f64]) {
        let k = k.max(1).min(self.len());
        // (distance², index) of the k nearest samples, kept sorted
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for i in 0..self.len() {
            let d2 = dist2(x, self.point(i));
            if best.len() < k || d2 < best[best.len() - 1].0 {
                let pos = best.partition_point(|b| b.0 <= d2);
                best.insert(pos, (d2, i));
                best.truncate(k);
            }
        }
        if best[0].0 <= 1e-24 {
            out.copy_from_slice(self.value(best[0].1));
            return;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut total = 0.0;
        for &(d2, i) in &best {
            let w = 1.0 / d2;
            total += w;
            for (o, v) in out.iter_mut().zip(self.value(i)) {
                *o += w * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
    }

    /// Writes `T(x)` into `out`.
    pub fn eval_into(&self, x: &[f64], mode: MapMode, out: &mut [f64]) {
        match mode {
            MapMode::Auto if self.dim == 1 => out[0] = self.eval_1d(x[0]),
            MapMode::Auto => self.eval_idw(x, 4, out),
            MapMode::Idw { k } => self.eval_idw(x, k, out),
        }
    }
}

/// Off-sample evaluation of a sampled map.
pub fn map_evaluate(samples: &MapSamples, x: &[f64], mode: MapMode) -> Vec<f64> {
    let mut out = vec![0.0; samples.dim()];
    samples.eval_into(x, mode, &mut out);
    out
}
