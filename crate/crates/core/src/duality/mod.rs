//! The dual problem `D(μ,ν) = inf_ψ ∫ψ dν − ∫(ψ*∗γ)* dμ` on the line.
//!
//! Potentials are piecewise linear on a grid. All conjugations and the
//! γ-smoothing (a finite quadrature mixture) are carried out exactly on that
//! representation, so the only approximation is the quadrature rule itself.

use serde::{Deserialize, Serialize};

use crate::bass::BassSolution;
use crate::error::{Error, Result};
use crate::martingale::{static_value, BassMartingaleModel};
use crate::measures::{DiscreteMeasure, QuadratureRule};
use crate::ot::{lower_hull, MapSamples};

/// Behaviour outside the grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Tails {
    /// `+∞` outside `[grid[0], grid[last]]`.
    Infinite,
    /// Affine continuation with the given slopes.
    Linear { left_slope: f64, right_slope: f64 },
}

/// Convex piecewise-linear function on the line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexPotential1D {
    grid: Vec<f64>,
    values: Vec<f64>,
    tails: Tails,
}

impl ConvexPotential1D {
    /// Builds the potential from grid data, replacing the values by their
    /// lower convex envelope.
    pub fn new(grid: Vec<f64>, values: Vec<f64>, tails: Tails) -> Result<Self> {
        if grid.is_empty() || grid.len() != values.len() || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateGrid);
        }
        if grid.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential grid"));
        }
        let hull = lower_hull(&grid, &values);
        let mut projected = values.clone();
        for w in hull.windows(2) {
            let (a, b) = (w[0], w[1]);
            let s = (values[b] - values[a]) / (grid[b] - grid[a]);
            for k in a + 1..b {
                projected[k] = values[a] + s * (grid[k] - grid[a]);
            }
        }
        if let Tails::Linear { left_slope, right_slope } = tails {
            if !(left_slope.is_finite() && right_slope.is_finite()) {
                return Err(Error::NonFinite("tail slopes"));
            }
            let n = grid.len();
            let (first, last) = if n >= 2 {
                (
                    (projected[1] - projected[0]) / (grid[1] - grid[0]),
                    (projected[n - 1] - projected[n - 2]) / (grid[n - 1] - grid[n - 2]),
                )
            } else {
                (right_slope, left_slope)
            };
            let tol = 1e-9 * (1.0 + left_slope.abs().max(right_slope.abs()));
            if left_slope > first + tol || right_slope < last - tol {
                return Err(Error::InvalidInput("tail slopes break convexity".into()));
            }
        }
        Ok(Self { grid, values: projected, tails })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tails(&self) -> Tails {
        self.tails
    }

    /// Span of the grid.
    pub fn span(&self) -> (f64, f64) {
        (self.grid[0], self.grid[self.grid.len() - 1])
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let (g, v) = (&self.grid, &self.values);
        let n = g.len();
        let (lo, hi) = self.span();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        if x < lo || x > hi {
            return match self.tails {
                Tails::Infinite if x < lo - slack || x > hi + slack => f64::INFINITY,
                Tails::Infinite => {
                    if x < lo {
                        v[0]
                    } else {
                        v[n - 1]
                    }
                }
                Tails::Linear { left_slope, right_slope } => {
                    if x < lo {
                        v[0] + left_slope * (x - lo)
                    } else {
                        v[n - 1] + right_slope * (x - hi)
                    }
                }
            };
        }
        if n == 1 {
            return v[0];
        }
        let k = g.partition_point(|&q| q <= x).clamp(1, n - 1);
        v[k - 1] + (x - g[k - 1]) * (v[k] - v[k - 1]) / (g[k] - g[k - 1])
    }

    /// Exact convex conjugate `f*(y) = sup_x (xy − f(x))`.
    pub fn conjugate(&self) -> Result<Self> {
        let hull = lower_hull(&self.grid, &self.values);
        let xs: Vec<f64> = hull.iter().map(|&i| self.grid[i]).collect();
        let fs: Vec<f64> = hull.iter().map(|&i| self.values[i]).collect();
        let k = xs.len();
        let slopes: Vec<f64> = (1..k).map(|i| (fs[i] - fs[i - 1]) / (xs[i] - xs[i - 1])).collect();
        match self.tails {
            Tails::Infinite => {
                if k == 1 {
                    return Self::new(vec![0.0], vec![-fs[0]], Tails::Linear { left_slope: xs[0], right_slope: xs[0] });
                }
                let vals: Vec<f64> = slopes.iter().enumerate().map(|(i, s)| s * xs[i] - fs[i]).collect();
                Self::new(slopes, vals, Tails::Linear { left_slope: xs[0], right_slope: xs[k - 1] })
            }
            Tails::Linear { left_slope, right_slope } => {
                let mut sig = Vec::with_capacity(k + 1);
                let mut vals = Vec::with_capacity(k + 1);
                let all = std::iter::once(left_slope).chain(slopes.iter().copied()).chain(std::iter::once(right_slope));
                for (i, s) in all.enumerate() {
                    let at = i.min(k - 1);
                    let v = s * xs[at] - fs[at];
                    match sig.last() {
                        Some(&last) if s <= last => {}
                        _ => {
                            sig.push(s);
                            vals.push(v);
                        }
                    }
                }
                Self::new(sig, vals, Tails::Infinite)
            }
        }
    }

    /// `(f ∗ γ)(y) = Σ_j r_j f(y + ξ_j)` for a symmetric rule, represented
    /// exactly: the result is piecewise linear with kinks at `grid − ξ_j`.
    pub fn smooth(&self, rule: &QuadratureRule) -> Result<Option<Self>> {
        if rule.dim() != 1 {
            return Err(Error::DimensionNotOne(rule.dim()));
        }
        let nodes = rule.nodes_flat();
        let (nmin, nmax) = nodes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let (lo, hi) = self.span();
        let (dom_lo, dom_hi) = match self.tails {
            Tails::Infinite => (lo - nmin, hi - nmax),
            Tails::Linear { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        };
        if dom_lo > dom_hi {
            // +∞ everywhere
            return Ok(None);
        }
        let mut knots: Vec<f64> = self
            .grid
            .iter()
            .flat_map(|g| nodes.iter().map(move |x| g - x))
            .filter(|y| *y >= dom_lo && *y <= dom_hi)
            .collect();
        if dom_lo.is_finite() {
            knots.push(dom_lo);
            knots.push(dom_hi);
        }
        knots.sort_by(f64::total_cmp);
        knots.dedup_by(|b, a| (*b - *a).abs() <= 1e-12 * (1.0 + a.abs()));
        let vals: Vec<f64> = knots
            .iter()
            .map(|&y| nodes.iter().zip(rule.weights()).map(|(x, r)| r * self.evaluate(y + x)).sum())
            .collect();
        Self::new(knots, vals, self.tails).map(Some)
    }
}

fn require_1d(m: &DiscreteMeasure) -> Result<()> {
    if m.dim() != 1 {
        return Err(Error::DimensionNotOne(m.dim()));
    }
    Ok(())
}

/// `∫ψ dν − ∫(ψ*∗γ)* dμ` with γ replaced by `rule`.
pub fn dual_objective(psi: &ConvexPotential1D, mu: &DiscreteMeasure, nu: &DiscreteMeasure, rule: &QuadratureRule) -> Result<f64> {
    require_1d(mu)?;
    require_1d(nu)?;
    let mut int_nu = 0.0;
    for (y, w) in nu.atoms() {
        let v = psi.evaluate(y[0]);
        if !v.is_finite() {
            return Err(Error::SupportOutsideGrid(y[0]));
        }
        int_nu += w * v;
    }
    let Some(smoothed) = psi.conjugate()?.smooth(rule)? else {
        return Ok(f64::INFINITY);
    };
    let inner = smoothed.conjugate()?;
    let mut int_mu = 0.0;
    for (x, w) in mu.atoms() {
        let v = inner.evaluate(x[0]);
        if !v.is_finite() {
            return Err(Error::SupportOutsideGrid(x[0]));
        }
        int_mu += w * v;
    }
    Ok(int_nu - int_mu)
}

/// `ψ̂ = v̂*` where `v̂` integrates sampled `∇v̂` (trapezoid rule, `v̂ = 0` at
/// the first sample).
pub fn candidate_from_map(v_map: &MapSamples) -> Result<ConvexPotential1D> {
    if v_map.dim() != 1 {
        return Err(Error::DimensionNotOne(v_map.dim()));
    }
    if !v_map.is_monotone(1e-9) {
        return Err(Error::NonMonotoneSamples);
    }
    let x = v_map.points_flat();
    let t = v_map.values_flat();
    let mut v = Vec::with_capacity(x.len());
    v.push(0.0);
    for k in 1..x.len() {
        v.push(v[k - 1] + 0.5 * (x[k] - x[k - 1]) * (t[k] + t[k - 1]));
    }
    let tails = Tails::Linear { left_slope: t[0], right_slope: t[t.len() - 1] };
    ConvexPotential1D::new(x.to_vec(), v, tails)?.conjugate()
}

pub fn candidate_from_solution(sol: &BassSolution) -> Result<ConvexPotential1D> {
    candidate_from_map(&sol.v_map_samples)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityReport {
    pub dual_value: f64,
    pub primal_value: f64,
    /// `dual − primal`; weak duality makes it nonnegative.
    pub gap: f64,
    pub psi_grid_span: (f64, f64),
    pub tolerance: f64,
    /// `gap < −tolerance`.
    pub violated: bool,
}

/// Dual value of the candidate `ψ̂` against the static primal value `P̃`,
/// both computed with the same quadrature rule.
pub fn duality_gap(sol: &BassSolution, mu: &DiscreteMeasure, nu: &DiscreteMeasure, rule: &QuadratureRule) -> Result<DualityReport> {
    require_1d(mu)?;
    let psi = candidate_from_solution(sol)?;
    let dual_value = dual_objective(&psi, mu, nu, rule)?;
    let model = BassMartingaleModel::from_solution(sol, rule.clone(), 0)?;
    let primal_value = static_value(&model, mu, rule)?.value;
    let gap = dual_value - primal_value;
    let tolerance = 0.02 * (1.0 + primal_value.abs());
    Ok(DualityReport {
        dual_value,
        primal_value,
        gap,
        psi_grid_span: psi.span(),
        tolerance,
        violated: gap < -tolerance,
    })
}
