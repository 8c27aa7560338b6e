//! Maximal-covariance optimal transport between discrete measures.
//!
//! All solvers maximize `Σ π_ij ⟨x_i, y_j⟩` directly; W₂ is recovered with
//! the moment identity `W₂² = m₂(p) + m₂(q) − 2·MCov(p, q)`.

mod brute;
mod entropic;
mod exact1d;
mod legendre;
mod maps;
mod simplex;

pub use brute::brute_force_mcov;
pub use entropic::mcov_entropic;
pub(crate) use exact1d::comonotone_pieces;
pub use exact1d::mcov_exact_1d;
pub use legendre::{legendre_transform_1d, lower_hull};
pub(crate) use maps::project_coupling;
pub use maps::{barycentric_projection, brenier_map, map_evaluate, MapMode, MapSamples};
pub use simplex::{mcov_lp, mcov_lp_with_cap, DEFAULT_LP_CAP};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::{second_moment, DiscreteMeasure};

/// Sparse transport plan. Entries are `(row, col, mass)` with positive mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coupling {
    rows: usize,
    cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Coupling {
    pub fn new(rows: usize, cols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        Self { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.rows];
        for &(i, _, p) in &self.entries {
            s[i] += p;
        }
        s
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.cols];
        for &(_, j, p) in &self.entries {
            s[j] += p;
        }
        s
    }

    /// Largest absolute deviation of the marginals from `(a, b)`.
    pub fn marginal_violation(&self, a: &[f64], b: &[f64]) -> f64 {
        let r = self.row_sums();
        let c = self.col_sums();
        r.iter()
            .zip(a)
            .chain(c.iter().zip(b))
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    /// Swaps the roles of source and target.
    pub fn transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            entries: self.entries.iter().map(|&(i, j, p)| (j, i, p)).collect(),
        }
    }

    /// `Σ π_ij ⟨x_i, y_j⟩`.
    pub fn covariance(&self, p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, m)| m * crate::measures::dot(p.point(i), q.point(j)))
            .sum()
    }
}

/// Kantorovich potentials in the MCov convention: `f_i + g_j ≥ ⟨x_i, y_j⟩`,
/// with equality on the support of an optimal plan. Normalized so that
/// `f[0] = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualPotentials {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl DualPotentials {
    pub(crate) fn normalized(mut f: Vec<f64>, mut g: Vec<f64>) -> Self {
        if let Some(&f0) = f.first() {
            f.iter_mut().for_each(|v| *v -= f0);
            g.iter_mut().for_each(|v| *v += f0);
        }
        Self { f, g }
    }

    pub fn dual_value(&self, a: &[f64], b: &[f64]) -> f64 {
        let fa: f64 = self.f.iter().zip(a).map(|(f, w)| f * w).sum();
        let gb: f64 = self.g.iter().zip(b).map(|(g, w)| g * w).sum();
        fa + gb
    }

    /// Largest violation of `f_i + g_j ≥ ⟨x_i, y_j⟩` over all pairs.
    pub fn max_infeasibility(&self, p: &DiscreteMeasure, q: &DiscreteMeasure) -> f64 {
        let mut worst = 0.0f64;
        for (i, (x, _)) in p.atoms().enumerate() {
            for (j, (y, _)) in q.atoms().enumerate() {
                let gap = crate::measures::dot(x, y) - self.f[i] - self.g[j];
                worst = worst.max(gap);
            }
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtMethodTag {
    Exact1d,
    Lp,
    Entropic,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub iterations: usize,
    pub marginal_violation: f64,
    pub duality_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransportResult {
    pub value: f64,
    pub coupling: Coupling,
    pub potentials: DualPotentials,
    pub method: OtMethodTag,
    pub epsilon: Option<f64>,
    pub diagnostics: SolverDiagnostics,
}

/// Solver selection for every MCov evaluation in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OtMethod {
    /// Quantile coupling in d = 1, network simplex otherwise.
    Exact,
    Entropic { epsilon: f64, max_iter: usize, tol: f64 },
}

impl Default for OtMethod {
    fn default() -> Self {
        OtMethod::Exact
    }
}

impl OtMethod {
    pub fn entropic(epsilon: f64) -> Self {
        OtMethod::Entropic { epsilon, max_iter: 100_000, tol: 1e-9 }
    }
}

pub fn mcov(p: &DiscreteMeasure, q: &DiscreteMeasure, method: &OtMethod) -> Result<TransportResult> {
    match *method {
        OtMethod::Exact if p.dim() == 1 => mcov_exact_1d(p, q),
        OtMethod::Exact => mcov_lp(p, q),
        OtMethod::Entropic { epsilon, max_iter, tol } => mcov_entropic(p, q, epsilon, max_iter, tol),
    }
}

pub fn mcov_value(p: &DiscreteMeasure, q: &DiscreteMeasure, method: &OtMethod) -> Result<f64> {
    mcov(p, q, method).map(|r| r.value)
}

/// Squared quadratic Wasserstein distance via the moment identity.
pub fn w2_squared(p: &DiscreteMeasure, q: &DiscreteMeasure, method: &OtMethod) -> Result<f64> {
    let cov = mcov_value(p, q, method)?;
    Ok(w2_from_mcov(second_moment(p), second_moment(q), cov))
}

pub(crate) fn w2_from_mcov(m2p: f64, m2q: f64, cov: f64) -> f64 {
    let w = m2p + m2q - 2.0 * cov;
    if w < 0.0 {
        if w < -1e-9 * (1.0 + m2p + m2q) {
            log::warn!("W2^2 = {w:e} is negative beyond rounding; clamping to 0");
        }
        0.0
    } else {
        w
    }
}

pub fn w2(p: &DiscreteMeasure, q: &DiscreteMeasure, method: &OtMethod) -> Result<f64> {
    w2_squared(p, q, method).map(f64::sqrt)
}
