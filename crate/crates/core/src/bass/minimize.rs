use serde::{Deserialize, Serialize};

use super::{evaluate_with_rule, field_norm, BassConfig, BassEvaluation};
use crate::error::{Error, Result};
use crate::measures::{barycenter, check_convex_order, second_moment, DiscreteMeasure};
use crate::ot::{project_coupling, MapSamples};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    /// α keeps spreading while V keeps decreasing: the infimum is
    /// (numerically) not attained.
    SpreadDetected,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub value: f64,
    pub residual: f64,
    pub second_moment: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BassSolution {
    pub alpha_hat: DiscreteMeasure,
    /// `∇v̂` sampled on `α̂∗γ`.
    pub v_map_samples: MapSamples,
    /// `∇φ̂` sampled on the atoms of μ.
    pub phi_map_samples: MapSamples,
    pub value: f64,
    pub residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<TraceRecord>,
}

struct State {
    alpha: DiscreteMeasure,
    eval: BassEvaluation,
    grad: Vec<f64>,
    residual: f64,
}

fn recentered(alpha: DiscreteMeasure) -> Result<DiscreteMeasure> {
    let b = barycenter(&alpha);
    if b.iter().all(|v| *v == 0.0) {
        return Ok(alpha);
    }
    let neg: Vec<f64> = b.iter().map(|v| -v).collect();
    alpha.translate(&neg)
}

fn step(alpha: &DiscreteMeasure, grad: &[f64], eta: f64, recenter: bool) -> Result<DiscreteMeasure> {
    let pts: Vec<f64> = alpha.flat_points().iter().zip(grad).map(|(z, g)| z - eta * g).collect();
    let next = DiscreteMeasure::from_flat(alpha.dim(), pts, alpha.weights().to_vec())?;
    if recenter {
        recentered(next)
    } else {
        Ok(next)
    }
}

/// Minimizes V by particle gradient descent `z_i ← z_i − η·g(z_i)` with a
/// backtracking (Armijo) line search on V.
///
/// Stops when the residual `‖g‖_{L²(α)}` drops below `config.tol` (or below
/// `config.stall_tol` once the line search can no longer decrease V), when
/// the iteration budget runs out, or when α spreads past the configured
/// second moment while V is still decreasing (non-attainment).
pub fn minimize_v(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    alpha0: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<BassSolution> {
    config.validate()?;
    mu.check_dim(nu.dim())?;
    alpha0.check_dim(mu.dim())?;
    if config.skip_order_check {
        log::warn!("convex-order pre-check skipped");
    } else {
        let report = check_convex_order(mu, nu)?;
        if !report.in_order {
            return Err(Error::ConvexOrderViolated(format!("{:?}", report.certificate)));
        }
    }
    let rule = config.rule(mu.dim())?;
    let spread_cap = config.spread_threshold * (second_moment(mu) + second_moment(nu) + 1.0);
    let eval_at = |alpha: DiscreteMeasure| -> Result<State> {
        let eval = evaluate_with_rule(&alpha, mu, nu, &rule, &config.method)?;
        let grad = eval.gradient(&alpha, mu, nu)?;
        let residual = field_norm(&alpha, &grad);
        Ok(State { alpha, eval, grad, residual })
    };

    let start = if config.recenter { recentered(alpha0.clone())? } else { alpha0.clone() };
    let mut cur = eval_at(start)?;
    let mut trace = vec![TraceRecord {
        iteration: 0,
        value: cur.eval.value,
        residual: cur.residual,
        second_moment: second_moment(&cur.alpha),
    }];
    let mut eta = config.step_size;
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    while iterations < config.max_iter {
        if cur.residual <= config.tol {
            status = SolveStatus::Converged;
            break;
        }
        let g2 = cur.residual * cur.residual;
        let mut accepted = None;
        while eta >= config.min_step {
            let trial = eval_at(step(&cur.alpha, &cur.grad, eta, config.recenter)?)?;
            if trial.eval.value <= cur.eval.value - config.armijo * eta * g2 {
                accepted = Some(trial);
                break;
            }
            eta *= config.backtrack;
        }
        let Some(next) = accepted else {
            // no step of any admissible length decreases V: the iterate sits
            // at the resolution limit of the discretization
            log::info!(
                "line search exhausted at iteration {iterations} (residual {:.3e})",
                cur.residual
            );
            if cur.residual <= config.stall_tol {
                status = SolveStatus::Converged;
            }
            break;
        };
        iterations += 1;
        let decreased = next.eval.value < cur.eval.value;
        cur = next;
        let m2 = second_moment(&cur.alpha);
        trace.push(TraceRecord { iteration: iterations, value: cur.eval.value, residual: cur.residual, second_moment: m2 });
        log::debug!("iter {iterations}: V = {:.8}, residual = {:.3e}, m2 = {m2:.4}, eta = {eta:.3e}", cur.eval.value, cur.residual);
        if m2 > spread_cap && decreased {
            status = SolveStatus::SpreadDetected;
            break;
        }
        eta = (eta * config.growth).min(config.max_step);
    }
    if status == SolveStatus::MaxIter && cur.residual <= config.tol {
        status = SolveStatus::Converged;
    }
    finish(cur, mu, nu, iterations, status, trace)
}

fn finish(
    cur: State,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    iterations: usize,
    status: SolveStatus,
    trace: Vec<TraceRecord>,
) -> Result<BassSolution> {
    let d = mu.dim();
    let v_vals = project_coupling(&cur.eval.smooth_result.coupling, nu)?;
    let v_map_samples = MapSamples::new(d, cur.eval.smoothed.flat_points().to_vec(), v_vals)?;
    let phi_vals = project_coupling(&cur.eval.base_result.coupling.transpose(), &cur.alpha)?;
    let phi_map_samples = MapSamples::new(d, mu.flat_points().to_vec(), phi_vals)?;
    Ok(BassSolution {
        value: cur.eval.value,
        residual: cur.residual,
        alpha_hat: cur.alpha,
        v_map_samples,
        phi_map_samples,
        iterations,
        status,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(sd: f64, n: usize) -> DiscreteMeasure {
        DiscreteMeasure::gaussian_quantiles_1d(0.0, sd, n).unwrap()
    }

    #[test]
    fn rejects_reversed_order() {
        let mu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let nu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let r = minimize_v(&mu, &nu, &nu, &BassConfig::default());
        assert!(matches!(r, Err(Error::ConvexOrderViolated(_))));
        let cfg = BassConfig { skip_order_check: true, max_iter: 3, ..Default::default() };
        assert!(minimize_v(&mu, &nu, &nu, &cfg).is_ok());
    }

    #[test]
    fn two_point_target_from_a_dirac() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let sol = minimize_v(&mu, &nu, &mu, &BassConfig::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Converged);
        assert!(second_moment(&sol.alpha_hat) <= 0.05);
        let exact = (2.0 / std::f64::consts::PI).sqrt();
        assert!((sol.value - exact).abs() < 0.02, "{}", sol.value);
    }

    #[test]
    fn descent_never_increases_v() {
        let mu = q(1.0, 50);
        let nu = q(1.5, 50);
        let cfg = BassConfig { max_iter: 40, ..Default::default() };
        let sol = minimize_v(&mu, &nu, &q(3.0, 50), &cfg).unwrap();
        for w in sol.trace.windows(2) {
            assert!(w[1].value <= w[0].value + 1e-12);
        }
        let first = sol.trace.first().unwrap().residual;
        assert!(sol.residual < first);
    }
}
