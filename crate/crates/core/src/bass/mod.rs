//! The Bass functional `V(α) = MCov(α∗γ, ν) − MCov(α, μ)`, its first-order
//! field, and minimizers.

mod fixed_point;
mod minimize;

pub use fixed_point::fixed_point_step;
pub use minimize::{minimize_v, BassSolution, SolveStatus, TraceRecord};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, QuadratureRule};
use crate::ot::{barycentric_projection, mcov, OtMethod, TransportResult};

/// Solver settings. Every field has a default, so partial JSON configs work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BassConfig {
    /// Gauss–Hermite nodes per axis used to realize `α∗γ`. `None` picks
    /// 32 in d = 1 and 16 per axis above.
    pub quad_nodes: Option<usize>,
    /// Initial step η₀ of the particle descent.
    pub step_size: f64,
    /// Step shrink factor on a rejected trial.
    pub backtrack: f64,
    /// Step growth factor after an accepted trial.
    pub growth: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_iter: usize,
    /// Residual `‖g‖_{L²(α)}` at which the descent stops.
    pub tol: f64,
    /// When no admissible step decreases V any more, the iterate counts as
    /// converged if its residual is below this level. Discrete OT makes V
    /// piecewise smooth, so the residual of a discrete minimizer does not
    /// go to zero.
    pub stall_tol: f64,
    pub recenter: bool,
    /// Spread is flagged once `m₂(α) > spread_threshold·(m₂(μ) + m₂(ν) + 1)`.
    pub spread_threshold: f64,
    pub method: OtMethod,
    /// Skip the convex-order pre-check (a warning is logged instead).
    pub skip_order_check: bool,
}

impl Default for BassConfig {
    fn default() -> Self {
        Self {
            quad_nodes: None,
            step_size: 1.0,
            backtrack: 0.5,
            growth: 2.0,
            armijo: 1e-4,
            max_step: 1e4,
            min_step: 1e-10,
            max_iter: 2000,
            tol: 1e-3,
            stall_tol: 1e-2,
            recenter: true,
            spread_threshold: 50.0,
            method: OtMethod::Exact,
            skip_order_check: false,
        }
    }
}

impl BassConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(what.to_string()));
        if !(self.step_size > 0.0) {
            return bad("step_size must be positive");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if !(self.growth >= 1.0) {
            return bad("growth must be at least 1");
        }
        if !(self.spread_threshold > 0.0) {
            return bad("spread_threshold must be positive");
        }
        if self.quad_nodes == Some(0) {
            return bad("quad_nodes must be positive");
        }
        Ok(())
    }

    pub fn rule(&self, dim: usize) -> Result<QuadratureRule> {
        let m = self.quad_nodes.unwrap_or(if dim == 1 { 32 } else { 16 });
        QuadratureRule::gauss_hermite(m, dim)
    }
}

/// One evaluation of V with the two transport solves behind it.
#[derive(Clone, Debug)]
pub struct BassEvaluation {
    pub value: f64,
    /// `α∗γ`, atom `i·m + j` is `z_i + node_j`.
    pub smoothed: DiscreteMeasure,
    /// Solve `α∗γ → ν`.
    pub smooth_result: TransportResult,
    /// Solve `α → μ`.
    pub base_result: TransportResult,
    nodes_per_atom: usize,
}

/// A point of the descent: α with its value and first-order field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BassIterate {
    pub alpha: DiscreteMeasure,
    pub value: f64,
    /// Row-major `n × d`.
    pub grad_field: Vec<f64>,
    pub residual: f64,
}

/// `α ∗ N(0, I)` with the per-atom layout the gradient relies on.
fn smooth_in_order(alpha: &DiscreteMeasure, rule: &QuadratureRule) -> Result<DiscreteMeasure> {
    alpha.check_dim(rule.dim())?;
    let d = alpha.dim();
    let mut pts = Vec::with_capacity(alpha.len() * rule.len() * d);
    let mut ws = Vec::with_capacity(alpha.len() * rule.len());
    for (z, w) in alpha.atoms() {
        for (node, r) in rule.nodes().zip(rule.weights()) {
            pts.extend(z.iter().zip(node).map(|(a, b)| a + b));
            ws.push(w * r);
        }
    }
    let out = DiscreteMeasure::from_flat(d, pts, ws)?;
    if out.len() != alpha.len() * rule.len() {
        return Err(Error::InvalidInput("smoothing underflowed a quadrature weight".into()));
    }
    Ok(out)
}

pub(crate) fn evaluate_with_rule(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    rule: &QuadratureRule,
    method: &OtMethod,
) -> Result<BassEvaluation> {
    mu.check_dim(alpha.dim())?;
    nu.check_dim(alpha.dim())?;
    let smoothed = smooth_in_order(alpha, rule)?;
    let (s, b) = rayon::join(|| mcov(&smoothed, nu, method), || mcov(alpha, mu, method));
    let (smooth_result, base_result) = (s?, b?);
    Ok(BassEvaluation {
        value: smooth_result.value - base_result.value,
        smoothed,
        smooth_result,
        base_result,
        nodes_per_atom: rule.len(),
    })
}

/// `V(α) = MCov(α∗γ, ν) − MCov(α, μ)`, returning both transport solves.
pub fn evaluate_v(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<BassEvaluation> {
    evaluate_with_rule(alpha, mu, nu, &config.rule(alpha.dim())?, &config.method)
}

impl BassEvaluation {
    /// `(∇v∗γ)(z_i)`: the `α∗γ → ν` map averaged over atom i's cloud.
    pub fn smoothed_map(&self, alpha: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        let d = alpha.dim();
        let m = self.nodes_per_atom;
        let tv = barycentric_projection(&self.smooth_result, nu)?;
        let mut out = vec![0.0; alpha.len() * d];
        for i in 0..alpha.len() {
            let wi = alpha.weight(i);
            let o = &mut out[i * d..(i + 1) * d];
            for j in 0..m {
                // the cloud weight relative to the atom is the rule weight
                let r = self.smoothed.weight(i * m + j) / wi;
                for (ok, t) in o.iter_mut().zip(&tv[(i * m + j) * d..(i * m + j + 1) * d]) {
                    *ok += r * t;
                }
            }
        }
        Ok(out)
    }

    /// `g(z_i) = (∇v∗γ)(z_i) − ∇u(z_i)`.
    pub fn gradient(&self, alpha: &DiscreteMeasure, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Vec<f64>> {
        let mut g = self.smoothed_map(alpha, nu)?;
        let tu = barycentric_projection(&self.base_result, mu)?;
        g.iter_mut().zip(&tu).for_each(|(a, b)| *a -= b);
        Ok(g)
    }
}

/// Weighted L² norm of a field under α.
pub fn field_norm(alpha: &DiscreteMeasure, field: &[f64]) -> f64 {
    let d = alpha.dim();
    alpha
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * field[i * d..(i + 1) * d].iter().map(|v| v * v).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}

/// First-order field of V at every atom of α (row-major `n × d`).
/// The partial derivative of V in atom `z_i` is `w_i·g(z_i)`.
pub fn gradient_field(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<Vec<f64>> {
    evaluate_v(alpha, mu, nu, config)?.gradient(alpha, mu, nu)
}

pub fn iterate_at(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<BassIterate> {
    let e = evaluate_v(alpha, mu, nu, config)?;
    let grad_field = e.gradient(alpha, mu, nu)?;
    Ok(BassIterate {
        alpha: alpha.clone(),
        value: e.value,
        residual: field_norm(alpha, &grad_field),
        grad_field,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakDualityReport {
    pub value: f64,
    pub primal_estimate: f64,
    /// `V(α) − primal_estimate`; nonnegative up to discretization error.
    pub margin: f64,
    pub tolerance: f64,
    pub violated: bool,
}

/// Checks `V(α) ≥ primal − tol` with `tol = 2%·(1 + |primal|)`.
pub fn weak_duality_check(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    primal_estimate: f64,
    config: &BassConfig,
) -> Result<WeakDualityReport> {
    weak_duality_check_with_tol(alpha, mu, nu, primal_estimate, 0.02, config)
}

pub fn weak_duality_check_with_tol(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    primal_estimate: f64,
    rel_tol: f64,
    config: &BassConfig,
) -> Result<WeakDualityReport> {
    let value = evaluate_v(alpha, mu, nu, config)?.value;
    let tolerance = rel_tol * (1.0 + primal_estimate.abs());
    let margin = value - primal_estimate;
    Ok(WeakDualityReport { value, primal_estimate, margin, tolerance, violated: margin < -tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::barycenter;

    fn q(sd: f64, n: usize) -> DiscreteMeasure {
        DiscreteMeasure::gaussian_quantiles_1d(0.0, sd, n).unwrap()
    }

    #[test]
    fn all_diracs_at_origin() {
        let d = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let e = evaluate_v(&d, &d, &d, &BassConfig::default()).unwrap();
        assert!(e.value.abs() < 1e-15);
    }

    #[test]
    fn gaussian_values() {
        let cfg = BassConfig::default();
        let (mu, nu) = (q(1.0, 64), q(2f64.sqrt(), 64));
        let v = evaluate_v(&q(1.0, 64), &mu, &nu, &cfg).unwrap().value;
        assert!((v - 1.0).abs() < 0.02, "{v}");
        let v = evaluate_v(&q(2.0, 64), &mu, &mu, &cfg).unwrap().value;
        assert!((v - (5f64.sqrt() - 2.0)).abs() < 0.02, "{v}");
    }

    #[test]
    fn single_atom_gradient_is_barycenter_gap() {
        let nu = DiscreteMeasure::uniform_1d(&[-1.0, 0.5, 0.5]).unwrap();
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let g = gradient_field(&a, &nu, &nu, &BassConfig::default()).unwrap();
        assert!(g[0].abs() < 1e-14);
        let mu = DiscreteMeasure::dirac(&[0.3]).unwrap();
        let g = gradient_field(&a, &mu, &nu, &BassConfig::default()).unwrap();
        assert!((g[0] - (barycenter(&nu)[0] - 0.3)).abs() < 1e-14);
    }

    #[test]
    fn gradient_vanishes_at_gaussian_solution() {
        let cfg = BassConfig::default();
        let it = iterate_at(&q(1.0, 200), &q(1.0, 200), &q(2f64.sqrt(), 200), &cfg).unwrap();
        assert!(it.residual <= 0.05, "{}", it.residual);
    }

    #[test]
    fn finite_difference_along_the_field() {
        let cfg = BassConfig::default();
        let mu = q(1.0, 40);
        let nu = q(1.7, 40);
        let alpha = DiscreteMeasure::from_1d(&[-1.2, -0.1, 0.4, 2.0], &[0.2, 0.3, 0.1, 0.4]).unwrap();
        let e = evaluate_v(&alpha, &mu, &nu, &cfg).unwrap();
        let g = e.gradient(&alpha, &mu, &nu).unwrap();
        let h = 1e-4;
        for i in 0..alpha.len() {
            // moving atom i by h along g_i raises V by w_i·|g_i|²·h
            let mut pts = alpha.flat_points().to_vec();
            pts[i] += h * g[i];
            let moved = DiscreteMeasure::from_flat(1, pts, alpha.weights().to_vec()).unwrap();
            let dv = evaluate_v(&moved, &mu, &nu, &cfg).unwrap().value - e.value;
            let pred = alpha.weight(i) * g[i] * g[i] * h;
            assert!((dv - pred).abs() <= 1e-3 * h + 1e-12, "atom {i}: {dv} vs {pred}");
        }
    }

    #[test]
    fn translation_invariance() {
        let cfg = BassConfig::default();
        let mu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[-2.0, 0.0, 2.0]).unwrap();
        let a = DiscreteMeasure::from_1d(&[-0.5, 0.2, 1.5], &[0.3, 0.3, 0.4]).unwrap();
        let v0 = evaluate_v(&a, &mu, &nu, &cfg).unwrap().value;
        let v1 = evaluate_v(&a.translate(&[3.7]).unwrap(), &mu, &nu, &cfg).unwrap().value;
        assert!((v0 - v1).abs() < 1e-8);
    }

    #[test]
    fn weak_duality_examples() {
        let cfg = BassConfig::default();
        let (mu, nu) = (q(1.0, 100), q(2f64.sqrt(), 100));
        let r = weak_duality_check(&q(3.0, 100), &mu, &nu, 1.0, &cfg).unwrap();
        assert!(!r.violated);
        assert!((r.value - (2f64.sqrt() * 10f64.sqrt() - 3.0)).abs() < 0.03, "{}", r.value);
        let d = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let r = weak_duality_check(&d, &d, &d, 0.0, &cfg).unwrap();
        assert!(!r.violated && r.margin.abs() < 1e-15);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = BassConfig { tol: 5e-4, ..Default::default() };
        let s = serde_json::to_string(&cfg).unwrap();
        let back: BassConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let partial: BassConfig = serde_json::from_str(r#"{"max_iter": 7}"#).unwrap();
        assert_eq!(partial.max_iter, 7);
    }
}
