//! The Bass martingale `M_t = ∇v̂_t(B_t)`, `v̂_t = v̂ ∗ γ^{1−t}`, built from a
//! solved Bass measure: simulation, marginal fidelity, static value, trace
//! of the volatility and the infinitesimal MCov rate.

mod paths;

pub use paths::{
    expected_trace_sigma, expected_trace_sigma_window, marginal_error, martingale_increment_bins, mbb_objective_estimate,
    resampling_floor, simulate_paths, BinStat, MarginalError, PathEnsemble, TraceEstimate,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bass::BassSolution;
use crate::error::{Error, Result};
use crate::measures::{gaussian_smooth, DiscreteMeasure, QuadratureRule};
use crate::ot::{mcov, mcov_value, project_coupling, MapMode, MapSamples, OtMethod};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BassMartingaleModel {
    pub alpha_hat: DiscreteMeasure,
    pub v_map: MapSamples,
    /// `∇φ̂` on the atoms of μ; needed for the static coupling only.
    pub phi_map: Option<MapSamples>,
    /// Integrates against γ^{1−t} when evaluating `∇v̂_t`.
    pub quadrature: QuadratureRule,
    pub rng_seed: u64,
}

impl BassMartingaleModel {
    pub fn new(alpha_hat: DiscreteMeasure, v_map: MapSamples, quadrature: QuadratureRule, rng_seed: u64) -> Result<Self> {
        alpha_hat.check_dim(v_map.dim())?;
        alpha_hat.check_dim(quadrature.dim())?;
        if v_map.dim() == 1 && !v_map.is_monotone(1e-9) {
            return Err(Error::NonMonotoneSamples);
        }
        Ok(Self { alpha_hat, v_map, phi_map: None, quadrature, rng_seed })
    }

    pub fn from_solution(sol: &BassSolution, quadrature: QuadratureRule, rng_seed: u64) -> Result<Self> {
        let mut m = Self::new(sol.alpha_hat.clone(), sol.v_map_samples.clone(), quadrature, rng_seed)?;
        m.phi_map = Some(sol.phi_map_samples.clone());
        Ok(m)
    }

    pub fn with_phi_map(mut self, phi: MapSamples) -> Self {
        self.phi_map = Some(phi);
        self
    }

    /// Replaces the sampled `∇v̂` by one read off a denser cloud `α̂ ∗ rule`.
    pub fn refine_v_map(mut self, nu: &DiscreteMeasure, rule: &QuadratureRule, method: &OtMethod) -> Result<Self> {
        self.v_map = sample_v_map(&self.alpha_hat, nu, rule, method)?;
        if self.v_map.dim() == 1 && !self.v_map.is_monotone(1e-9) {
            return Err(Error::NonMonotoneSamples);
        }
        Ok(self)
    }

    /// Dense equal-weight rule in d = 1, a small tensor Gauss–Hermite rule above.
    pub fn default_rule(dim: usize) -> Result<QuadratureRule> {
        if dim == 1 {
            QuadratureRule::quantile_midpoint_1d(128)
        } else {
            QuadratureRule::gauss_hermite(6, dim)
        }
    }

    pub fn dim(&self) -> usize {
        self.alpha_hat.dim()
    }

    pub(crate) fn map_vt_into(&self, x: &[f64], t: f64, out: &mut [f64], scratch: &mut [f64], tmp: &mut [f64]) {
        if t >= 1.0 {
            self.v_map.eval_into(x, MapMode::Auto, out);
            return;
        }
        let s = (1.0 - t.max(0.0)).sqrt();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (node, r) in self.quadrature.nodes().zip(self.quadrature.weights()) {
            for k in 0..x.len() {
                scratch[k] = x[k] + s * node[k];
            }
            self.v_map.eval_into(scratch, MapMode::Auto, tmp);
            for k in 0..x.len() {
                out[k] += r * tmp[k];
            }
        }
    }
}

/// `∇v̂` sampled on `α ∗ rule`: barycentric map of the solve `α∗γ → ν`.
pub fn sample_v_map(alpha: &DiscreteMeasure, nu: &DiscreteMeasure, rule: &QuadratureRule, method: &OtMethod) -> Result<MapSamples> {
    let smoothed = gaussian_smooth(alpha, 1.0, rule)?;
    let r = mcov(&smoothed, nu, method)?;
    let vals = project_coupling(&r.coupling, nu)?;
    MapSamples::new(alpha.dim(), smoothed.flat_points().to_vec(), vals)
}

/// `∇v̂_t(x) = (∇v̂ ∗ γ^{1−t})(x)`; at `t = 1` the sampled map itself.
pub fn map_vt(model: &BassMartingaleModel, x: &[f64], t: f64) -> Vec<f64> {
    let d = model.dim();
    let (mut out, mut a, mut b) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    model.map_vt_into(x, t, &mut out, &mut a, &mut b);
    out
}

/// Law of `M_t = ∇v̂_t(B_t)` with `B_t = Z + √t·ξ`, `Z ∼ α̂` and ξ drawn
/// from `rule`: atom `i·m + j` sits at `∇v̂_t(z_i + √t·ξ_j)`.
pub fn flow_marginal(model: &BassMartingaleModel, t: f64, rule: &QuadratureRule) -> Result<DiscreteMeasure> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidInput(format!("time {t} outside [0, 1]")));
    }
    let d = model.dim();
    model.alpha_hat.check_dim(rule.dim())?;
    let st = t.sqrt();
    let n = model.alpha_hat.len();
    let pts: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let z = model.alpha_hat.point(i);
            let (mut out, mut a, mut b, mut x) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let mut local = Vec::with_capacity(rule.len() * d);
            for node in rule.nodes() {
                x.iter_mut().zip(z.iter().zip(node)).for_each(|(x, (z, e))| *x = z + st * e);
                model.map_vt_into(&x, t, &mut out, &mut a, &mut b);
                local.extend_from_slice(&out);
            }
            local
        })
        .collect();
    let ws: Vec<f64> = model
        .alpha_hat
        .weights()
        .iter()
        .flat_map(|w| rule.weights().iter().map(move |r| w * r))
        .collect();
    DiscreteMeasure::from_flat(d, pts.concat(), ws)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StaticCouplingReport {
    /// `π̂_x = ∇v̂(γ_{∇φ̂(x)})` for every atom x of μ.
    pub kernels: Vec<DiscreteMeasure>,
    /// `P̃ = Σ_x μ(x)·MCov(π̂_x, γ)`.
    pub value: f64,
    /// `|bary(π̂_x) − x|` per atom.
    pub barycenter_violations: Vec<f64>,
    pub max_barycenter_violation: f64,
}

/// Static (one-period) value of the martingale coupling read off the model.
pub fn static_value(model: &BassMartingaleModel, mu: &DiscreteMeasure, quadrature: &QuadratureRule) -> Result<StaticCouplingReport> {
    let phi = model
        .phi_map
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("model carries no ∇φ̂ samples".into()))?;
    mu.check_dim(model.dim())?;
    mu.check_dim(quadrature.dim())?;
    let d = mu.dim();
    let gamma = DiscreteMeasure::from_flat(d, quadrature.nodes_flat().to_vec(), quadrature.weights().to_vec())?;
    let mut kernels = Vec::with_capacity(mu.len());
    let mut viol = Vec::with_capacity(mu.len());
    let mut value = 0.0;
    let (mut c, mut y, mut tmp) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    for (x, w) in mu.atoms() {
        phi.eval_into(x, MapMode::Auto, &mut c);
        let mut pts = Vec::with_capacity(quadrature.len() * d);
        for node in quadrature.nodes() {
            for k in 0..d {
                tmp[k] = c[k] + node[k];
            }
            model.v_map.eval_into(&tmp, MapMode::Auto, &mut y);
            pts.extend_from_slice(&y);
        }
        let kernel = DiscreteMeasure::from_flat(d, pts, quadrature.weights().to_vec())?;
        value += w * mcov_value(&kernel, &gamma, &OtMethod::Exact)?;
        let b = crate::measures::barycenter(&kernel);
        viol.push(b.iter().zip(x).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt());
        kernels.push(kernel);
    }
    let max_barycenter_violation = viol.iter().fold(0.0f64, |a, b| a.max(*b));
    Ok(StaticCouplingReport { kernels, value, barycenter_violations: viol, max_barycenter_violation })
}

/// Difference quotient `(MCov(α∗γ^h, μ_{t+h}) − MCov(α, μ_t)) / h` along a
/// marginal flow given as `(time, measure)` pairs, with exact OT and the
/// default Gauss–Hermite rule.
pub fn mcov_rate(alpha: &DiscreteMeasure, flow: &[(f64, DiscreteMeasure)], t: f64, h: f64) -> Result<f64> {
    let rule = QuadratureRule::gauss_hermite(if alpha.dim() == 1 { 32 } else { 8 }, alpha.dim())?;
    mcov_rate_with(alpha, flow, t, h, &rule, &OtMethod::Exact)
}

pub fn mcov_rate_with(
    alpha: &DiscreteMeasure,
    flow: &[(f64, DiscreteMeasure)],
    t: f64,
    h: f64,
    rule: &QuadratureRule,
    method: &OtMethod,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("rate step must be positive, got {h}")));
    }
    let at = |s: f64| {
        flow.iter()
            .find(|(u, _)| (u - s).abs() <= 1e-12 * (1.0 + s.abs()))
            .map(|(_, m)| m)
            .ok_or(Error::MissingMarginal(s))
    };
    let (mt, mth) = (at(t)?, at(t + h)?);
    let smoothed = gaussian_smooth(alpha, h, rule)?;
    let (a, b) = rayon::join(|| mcov_value(&smoothed, mth, method), || mcov_value(alpha, mt, method));
    Ok((a? - b?) / h)
}
