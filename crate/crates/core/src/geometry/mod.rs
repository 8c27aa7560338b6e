//! Curves in W₂ and the behaviour of V (and `U = W₂²(α,μ) − W₂²(α∗γ,ν)`)
//! along them.
//!
//! Along McCann geodesics in d = 1 and along generalized geodesics with base
//! μ, V is convex; along linear mixtures it need not be. Profiles are judged
//! through centered second differences on a finite grid.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bass::{evaluate_v, BassConfig};
use crate::error::{Error, Result};
use crate::measures::{dot, second_moment, DiscreteMeasure};
use crate::ot::{comonotone_pieces, mcov, OtMethod};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Mccann1d,
    GeneralizedBaseMu,
    LinearMixture,
}

/// A curve `u ↦ α_u` between two measures.
///
/// For the transport kinds the curve is stored as a list of particles
/// `(Z₀ᵢ, Z₁ᵢ, wᵢ)`; `α_u` puts mass `wᵢ` at `(1−u)Z₀ᵢ + uZ₁ᵢ`. For generalized
/// geodesics every particle also remembers the atom `X` of μ it was glued
/// through.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicCurve {
    kind: CurveKind,
    alpha0: DiscreteMeasure,
    alpha1: DiscreteMeasure,
    base: Option<DiscreteMeasure>,
    z0: Vec<f64>,
    z1: Vec<f64>,
    weights: Vec<f64>,
    base_index: Vec<usize>,
}

impl GeodesicCurve {
    /// Comonotone pairing of the two quantile functions.
    pub fn mccann_1d(alpha0: &DiscreteMeasure, alpha1: &DiscreteMeasure) -> Result<Self> {
        for a in [alpha0, alpha1] {
            if a.dim() != 1 {
                return Err(Error::DimensionNotOne(a.dim()));
            }
        }
        let (mut z0, mut z1, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        comonotone_pieces(alpha0, alpha1, |i, j, m| {
            if m > 0.0 {
                z0.push(alpha0.point(i)[0]);
                z1.push(alpha1.point(j)[0]);
                weights.push(m);
            }
        });
        Ok(Self {
            kind: CurveKind::Mccann1d,
            alpha0: alpha0.clone(),
            alpha1: alpha1.clone(),
            base: None,
            z0,
            z1,
            weights,
            base_index: Vec::new(),
        })
    }

    /// Optimal plans `α₀ → μ` and `α₁ → μ`, glued through the atoms of μ.
    ///
    /// Given `X = x_k`, the two conditional laws of `Z₀` and `Z₁` are coupled
    /// by an optimal plan between them (comonotone in d = 1). Any gluing keeps
    /// both bivariate plans optimal; this one makes the curve constant when
    /// `α₀ = α₁` and reproduces the McCann interpolation in d = 1.
    pub fn generalized(alpha0: &DiscreteMeasure, alpha1: &DiscreteMeasure, mu: &DiscreteMeasure) -> Result<Self> {
        alpha0.check_dim(mu.dim())?;
        alpha1.check_dim(mu.dim())?;
        let (p0, p1) = rayon::join(|| mcov(alpha0, mu, &OtMethod::Exact), || mcov(alpha1, mu, &OtMethod::Exact));
        let (p0, p1) = (p0?, p1?);
        let mut by_base0: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mu.len()];
        let mut by_base1: Vec<Vec<(usize, f64)>> = vec![Vec::new(); mu.len()];
        for &(i, k, p) in p0.coupling.entries() {
            by_base0[k].push((i, p));
        }
        for &(j, k, p) in p1.coupling.entries() {
            by_base1[k].push((j, p));
        }
        let d = mu.dim();
        let (mut z0, mut z1, mut weights, mut base_index) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for k in 0..mu.len() {
            let (c0, c1) = (&by_base0[k], &by_base1[k]);
            if c0.is_empty() || c1.is_empty() {
                continue;
            }
            let total: f64 = c0.iter().map(|e| e.1).sum();
            // the two conditional laws given X = x_k, glued by an optimal plan
            let cond = |c: &[(usize, f64)], a: &DiscreteMeasure| {
                let pts: Vec<f64> = c.iter().flat_map(|&(i, _)| a.point(i).iter().copied()).collect();
                DiscreteMeasure::from_flat(d, pts, c.iter().map(|e| e.1).collect())
            };
            let plan = mcov(&cond(c0, alpha0)?, &cond(c1, alpha1)?, &OtMethod::Exact)?;
            for &(a, b, m) in plan.coupling.entries() {
                if m > 0.0 {
                    z0.extend_from_slice(alpha0.point(c0[a].0));
                    z1.extend_from_slice(alpha1.point(c1[b].0));
                    weights.push(m * total);
                    base_index.push(k);
                }
            }
        }
        Ok(Self {
            kind: CurveKind::GeneralizedBaseMu,
            alpha0: alpha0.clone(),
            alpha1: alpha1.clone(),
            base: Some(mu.clone()),
            z0,
            z1,
            weights,
            base_index,
        })
    }

    /// `α_u = (1−u)α₀ + uα₁` in the linear sense.
    pub fn linear_mixture(alpha0: &DiscreteMeasure, alpha1: &DiscreteMeasure) -> Result<Self> {
        alpha0.check_dim(alpha1.dim())?;
        Ok(Self {
            kind: CurveKind::LinearMixture,
            alpha0: alpha0.clone(),
            alpha1: alpha1.clone(),
            base: None,
            z0: Vec::new(),
            z1: Vec::new(),
            weights: Vec::new(),
            base_index: Vec::new(),
        })
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn alpha0(&self) -> &DiscreteMeasure {
        &self.alpha0
    }

    pub fn alpha1(&self) -> &DiscreteMeasure {
        &self.alpha1
    }

    pub fn base(&self) -> Option<&DiscreteMeasure> {
        self.base.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.alpha0.dim()
    }

    /// Number of particles (zero for linear mixtures).
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn particle(&self, i: usize) -> (&[f64], &[f64], f64) {
        let d = self.dim();
        (&self.z0[i * d..(i + 1) * d], &self.z1[i * d..(i + 1) * d], self.weights[i])
    }

    /// Base atom of particle `i` on a generalized geodesic.
    pub fn base_atom(&self, i: usize) -> Option<usize> {
        self.base_index.get(i).copied()
    }

    pub fn at(&self, u: f64) -> Result<DiscreteMeasure> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::InvalidInput(format!("curve parameter {u} outside [0, 1]")));
        }
        if self.kind == CurveKind::LinearMixture {
            return match u {
                0.0 => Ok(self.alpha0.clone()),
                1.0 => Ok(self.alpha1.clone()),
                _ => self.alpha0.mixture(&self.alpha1, u),
            };
        }
        let pts: Vec<f64> = self.z0.iter().zip(&self.z1).map(|(a, b)| (1.0 - u) * a + u * b).collect();
        DiscreteMeasure::from_flat(self.dim(), pts, self.weights.clone())
    }

    /// `E⟨Z_u, X⟩` under the glued coupling; it equals `MCov(α_u, μ)` because
    /// the coupling `(Z_u, X)` stays optimal along the curve.
    pub fn base_covariance(&self, u: f64) -> Option<f64> {
        let mu = self.base.as_ref()?;
        let d = self.dim();
        let mut zu = vec![0.0; d];
        let mut acc = 0.0;
        for (i, &k) in self.base_index.iter().enumerate() {
            let (a, b, w) = self.particle(i);
            zu.iter_mut().zip(a.iter().zip(b)).for_each(|(z, (a, b))| *z = (1.0 - u) * a + u * b);
            acc += w * dot(&zu, mu.point(k));
        }
        Some(acc)
    }
}

pub fn mccann_geodesic_1d(alpha0: &DiscreteMeasure, alpha1: &DiscreteMeasure, u: f64) -> Result<DiscreteMeasure> {
    GeodesicCurve::mccann_1d(alpha0, alpha1)?.at(u)
}

pub fn generalized_geodesic(
    alpha0: &DiscreteMeasure,
    alpha1: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    u: f64,
) -> Result<DiscreteMeasure> {
    GeodesicCurve::generalized(alpha0, alpha1, mu)?.at(u)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    /// The Bass functional.
    V,
    /// `W₂²(α,μ) − W₂²(α∗γ,ν)`; equals `2V` up to an additive constant.
    U,
}

pub fn functional_value(
    functional: Functional,
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<f64> {
    let e = evaluate_v(alpha, mu, nu, config)?;
    Ok(match functional {
        Functional::V => e.value,
        Functional::U => {
            let m2a = second_moment(alpha);
            let w_base = m2a + second_moment(mu) - 2.0 * e.base_result.value;
            let w_smooth = second_moment(&e.smoothed) + second_moment(nu) - 2.0 * e.smooth_result.value;
            w_base - w_smooth
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityProfile {
    pub functional: Functional,
    pub u: Vec<f64>,
    pub values: Vec<f64>,
    /// `f(u_{i+1}) − 2f(u_i) + f(u_{i−1})` for each interior grid point.
    pub second_differences: Vec<f64>,
    pub min_second_difference: f64,
    /// `1 + |f(α₀)| + |f(α₁)|`.
    pub scale: f64,
}

impl ConvexityProfile {
    fn from_values(functional: Functional, u: Vec<f64>, values: Vec<f64>) -> Self {
        let second_differences: Vec<f64> = values.windows(3).map(|w| w[2] - 2.0 * w[1] + w[0]).collect();
        let min_second_difference = second_differences.iter().copied().fold(f64::INFINITY, f64::min);
        let scale = 1.0 + values[0].abs() + values[values.len() - 1].abs();
        Self { functional, u, values, second_differences, min_second_difference, scale }
    }

    /// Every interior second difference is at least `−rel·scale`.
    pub fn is_convex(&self, rel: f64) -> bool {
        self.min_second_difference >= -rel * self.scale
    }

    /// CSV with columns `u,value,second_difference` (empty at the endpoints).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::InvalidInput(e.to_string());
        w.write_record(["u", "value", "second_difference"]).map_err(io)?;
        for (i, (u, v)) in self.u.iter().zip(&self.values).enumerate() {
            let sd = if i == 0 || i + 1 == self.u.len() { String::new() } else { self.second_differences[i - 1].to_string() };
            w.write_record([u.to_string(), v.to_string(), sd]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: Default::default(), source: e })
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

fn check_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.len() < 3 {
        return Err(Error::InvalidInput("profile grid needs at least three points".into()));
    }
    if u_grid.iter().any(|u| !(0.0..=1.0).contains(u)) || u_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("profile grid must be increasing within [0, 1]".into()));
    }
    Ok(())
}

/// Evenly spaced grid with `n` points on `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Values of `functional` along `curve`, evaluated in parallel over the grid.
pub fn convexity_profile(
    functional: Functional,
    curve: &GeodesicCurve,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    u_grid: &[f64],
    config: &BassConfig,
) -> Result<ConvexityProfile> {
    check_grid(u_grid)?;
    let values = u_grid
        .par_iter()
        .map(|&u| functional_value(functional, &curve.at(u)?, mu, nu, config))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvexityProfile::from_values(functional, u_grid.to_vec(), values))
}

pub fn linear_mixture_profile(
    alpha0: &DiscreteMeasure,
    alpha1: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    u_grid: &[f64],
    config: &BassConfig,
) -> Result<ConvexityProfile> {
    convexity_profile(Functional::V, &GeodesicCurve::linear_mixture(alpha0, alpha1)?, mu, nu, u_grid, config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrictnessReport {
    pub min_second_difference: f64,
    pub threshold: f64,
    pub strictly_convex: bool,
    pub profile: ConvexityProfile,
}

/// Checks that V is strictly convex along a 1D McCann geodesic whose
/// endpoints are not translates of each other, for non-Dirac ν: the smallest
/// interior second difference on a 9-point grid must exceed `1e-6·scale`.
///
/// With a finite quadrature rule and a finitely supported ν the discrete V is
/// piecewise linear in u, so ν and the rule must be fine enough for kinks to
/// fall between every pair of grid points.
pub fn strictness_probe(
    curve: &GeodesicCurve,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<StrictnessReport> {
    if curve.dim() != 1 {
        return Err(Error::DimensionNotOne(curve.dim()));
    }
    if curve.kind() == CurveKind::LinearMixture {
        return Err(Error::InvalidInput("strictness probe needs a transport curve".into()));
    }
    if nu.is_dirac(1e-12) {
        return Err(Error::NuIsDirac);
    }
    // translates ⇔ the quantile pairing shifts every particle by the same c
    let shifts: Vec<f64> = (0..curve.len()).map(|i| curve.particle(i).1[0] - curve.particle(i).0[0]).collect();
    let (lo, hi) = shifts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    let spread = curve.z0.iter().chain(&curve.z1).fold(1.0f64, |m, z| m.max(z.abs()));
    if hi - lo <= 1e-9 * spread {
        return Err(Error::EndpointsAreTranslates);
    }
    let profile = convexity_profile(Functional::V, curve, mu, nu, &uniform_grid(9), config)?;
    let threshold = 1e-6 * profile.scale;
    Ok(StrictnessReport {
        min_second_difference: profile.min_second_difference,
        threshold,
        strictly_convex: profile.min_second_difference > threshold,
        profile,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearWitness {
    pub alpha0: DiscreteMeasure,
    pub alpha1: DiscreteMeasure,
    pub profile: ConvexityProfile,
    pub trials: usize,
}

/// Random search over pairs of Dirac masses in `[-radius, radius]^d` for a
/// linear-mixture profile of V with an interior second difference below
/// `−rel·scale`. Returns the first witness found.
pub fn find_linear_witness(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    max_trials: usize,
    radius: f64,
    rel: f64,
    seed: u64,
    config: &BassConfig,
) -> Result<Option<LinearWitness>> {
    let d = mu.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = uniform_grid(9);
    for trial in 1..=max_trials {
        let a: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..=radius)).collect();
        let b: Vec<f64> = (0..d).map(|_| rng.gen_range(-radius..=radius)).collect();
        let (a0, a1) = (DiscreteMeasure::dirac(&a)?, DiscreteMeasure::dirac(&b)?);
        let profile = linear_mixture_profile(&a0, &a1, mu, nu, &grid, config)?;
        if profile.min_second_difference < -rel * profile.scale {
            return Ok(Some(LinearWitness { alpha0: a0, alpha1: a1, profile, trials: trial }));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{mcov_value, w2};

    fn q(m: f64, sd: f64, n: usize) -> DiscreteMeasure {
        DiscreteMeasure::gaussian_quantiles_1d(m, sd, n).unwrap()
    }

    fn close(a: &DiscreteMeasure, b: &DiscreteMeasure, tol: f64) -> bool {
        w2(a, b, &OtMethod::Exact).unwrap() <= tol
    }

    #[test]
    fn mccann_examples() {
        let a0 = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let a1 = DiscreteMeasure::uniform_1d(&[-2.0, 2.0]).unwrap();
        let mid = mccann_geodesic_1d(&a0, &a1, 0.5).unwrap();
        assert!(close(&mid, &DiscreteMeasure::uniform_1d(&[-1.5, 1.5]).unwrap(), 1e-12));
        assert!(close(&mccann_geodesic_1d(&a0, &a1, 0.0).unwrap(), &a0, 1e-9));
        assert!(close(&mccann_geodesic_1d(&a0, &a1, 1.0).unwrap(), &a1, 1e-9));
        let d = mccann_geodesic_1d(&DiscreteMeasure::dirac(&[1.0]).unwrap(), &DiscreteMeasure::dirac(&[4.0]).unwrap(), 0.5).unwrap();
        assert_eq!(d.flat_points(), &[2.5]);
        let two = DiscreteMeasure::from_flat(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(matches!(mccann_geodesic_1d(&two, &two, 0.5), Err(Error::DimensionNotOne(2))));
    }

    #[test]
    fn mccann_metric_property() {
        let a0 = DiscreteMeasure::from_1d(&[-1.0, 0.2, 3.0], &[0.3, 0.5, 0.2]).unwrap();
        let a1 = DiscreteMeasure::from_1d(&[-4.0, 0.0, 0.5, 1.0], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        let full = w2(&a0, &a1, &OtMethod::Exact).unwrap();
        let curve = GeodesicCurve::mccann_1d(&a0, &a1).unwrap();
        for u in [0.1, 0.25, 0.5, 0.9] {
            let d = w2(&a0, &curve.at(u).unwrap(), &OtMethod::Exact).unwrap();
            assert!((d - u * full).abs() <= 1e-8);
        }
    }

    #[test]
    fn generalized_examples() {
        let mu = DiscreteMeasure::from_1d(&[-1.0, 0.0, 2.0], &[0.25, 0.5, 0.25]).unwrap();
        let a = DiscreteMeasure::from_1d(&[-3.0, 1.0, 1.5], &[0.2, 0.3, 0.5]).unwrap();
        let same = GeodesicCurve::generalized(&a, &a, &mu).unwrap();
        for u in [0.0, 0.3, 1.0] {
            assert!(close(&same.at(u).unwrap(), &a, 1e-9));
        }
        let mid = generalized_geodesic(&DiscreteMeasure::dirac(&[-1.0]).unwrap(), &DiscreteMeasure::dirac(&[3.0]).unwrap(), &mu, 0.5).unwrap();
        assert!(mid.flat_points().iter().all(|x| (x - 1.0).abs() < 1e-15));
        // in d = 1 gluing through μ reproduces the comonotone pairing
        let b = DiscreteMeasure::from_1d(&[0.0, 2.0, 5.0, 6.0], &[0.4, 0.1, 0.3, 0.2]).unwrap();
        let g = generalized_geodesic(&a, &b, &mu, 0.4).unwrap();
        let m = mccann_geodesic_1d(&a, &b, 0.4).unwrap();
        assert!(close(&g, &m, 1e-9));
    }

    #[test]
    fn generalized_marginals_and_optimality() {
        let mu = DiscreteMeasure::from_points(&[vec![0.0, 0.0], vec![1.0, 0.5], vec![-1.0, 1.0], vec![0.3, -1.2]], &[0.25; 4]).unwrap();
        let a0 = DiscreteMeasure::from_points(&[vec![2.0, 0.0], vec![-1.0, -1.0], vec![0.0, 3.0]], &[0.5, 0.3, 0.2]).unwrap();
        let a1 = DiscreteMeasure::from_points(&[vec![0.5, 0.5], vec![-2.0, 1.0]], &[0.6, 0.4]).unwrap();
        let c = GeodesicCurve::generalized(&a0, &a1, &mu).unwrap();
        assert!(close(&c.at(0.0).unwrap(), &a0, 1e-9));
        assert!(close(&c.at(1.0).unwrap(), &a1, 1e-9));
        for u in [0.0, 0.35, 0.8, 1.0] {
            let direct = mcov_value(&c.at(u).unwrap(), &mu, &OtMethod::Exact).unwrap();
            assert!((c.base_covariance(u).unwrap() - direct).abs() <= 1e-8, "u={u}");
        }
    }

    fn cfg() -> BassConfig {
        BassConfig { quad_nodes: Some(16), ..Default::default() }
    }

    #[test]
    fn translation_profile_is_flat() {
        let mu = q(0.0, 1.0, 30);
        let nu = q(0.0, 1.5, 30);
        let a0 = DiscreteMeasure::from_1d(&[-0.4, 0.1, 0.9], &[0.3, 0.3, 0.4]).unwrap();
        let a1 = a0.translate(&[1.7]).unwrap();
        let curve = GeodesicCurve::mccann_1d(&a0, &a1).unwrap();
        let p = convexity_profile(Functional::V, &curve, &mu, &nu, &uniform_grid(9), &cfg()).unwrap();
        let v0 = p.values[0];
        assert!(p.values.iter().all(|v| (v - v0).abs() <= 1e-6));
        assert!(p.second_differences.iter().all(|s| s.abs() <= 1e-6));
        assert!(matches!(strictness_probe(&curve, &mu, &nu, &cfg()), Err(Error::EndpointsAreTranslates)));
    }

    #[test]
    fn dirac_endpoints_profile_is_convex_and_matches_u() {
        let mu = q(0.0, 1.0, 40);
        let nu = q(0.0, 2f64.sqrt(), 40);
        let curve = GeodesicCurve::mccann_1d(&DiscreteMeasure::dirac(&[-1.0]).unwrap(), &DiscreteMeasure::dirac(&[1.0]).unwrap()).unwrap();
        let grid = uniform_grid(9);
        let v = convexity_profile(Functional::V, &curve, &mu, &nu, &grid, &cfg()).unwrap();
        assert!(v.is_convex(1e-4));
        let u = convexity_profile(Functional::U, &curve, &mu, &nu, &grid, &cfg()).unwrap();
        let c0 = v.values[0] - 0.5 * u.values[0];
        for (a, b) in v.values.iter().zip(&u.values) {
            assert!((a - 0.5 * b - c0).abs() <= 1e-6);
        }
    }

    #[test]
    fn strictness_probe_examples() {
        let mu = q(0.0, 1.0, 50);
        let nu = q(0.0, 2.5, 200);
        let a0 = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let a1 = DiscreteMeasure::uniform_1d(&[-2.0, 2.0]).unwrap();
        let curve = GeodesicCurve::mccann_1d(&a0, &a1).unwrap();
        let r = strictness_probe(&curve, &mu, &nu, &cfg()).unwrap();
        assert!(r.strictly_convex, "{r:?}");
        let dirac = DiscreteMeasure::dirac(&[0.0]).unwrap();
        assert!(matches!(strictness_probe(&curve, &dirac, &dirac, &cfg()), Err(Error::NuIsDirac)));
    }

    #[test]
    fn linear_mixture_examples() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let a = DiscreteMeasure::uniform_1d(&[-0.5, 0.7]).unwrap();
        let flat = linear_mixture_profile(&a, &a, &mu, &nu, &uniform_grid(5), &cfg()).unwrap();
        assert!(flat.second_differences.iter().all(|s| s.abs() < 1e-12));
        let (a0, a1) = (DiscreteMeasure::dirac(&[-2.0]).unwrap(), DiscreteMeasure::dirac(&[2.0]).unwrap());
        let p = linear_mixture_profile(&a0, &a1, &mu, &nu, &uniform_grid(9), &cfg()).unwrap();
        let direct = evaluate_v(&a0, &mu, &nu, &cfg()).unwrap().value;
        assert!((p.values[0] - direct).abs() <= 1e-12);
        assert!(p.min_second_difference < -1e-3 * p.scale);
        let w = find_linear_witness(&mu, &nu, 50, 3.0, 1e-3, 7, &cfg()).unwrap();
        assert!(w.is_some());
    }

    #[test]
    fn profile_csv_layout() {
        let p = ConvexityProfile::from_values(Functional::V, vec![0.0, 0.5, 1.0], vec![1.0, 0.5, 1.0]);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "u,value,second_difference\n0,1,\n0.5,0.5,1\n1,1,\n");
        assert!(check_grid(&[0.0, 1.0]).is_err());
        assert!(check_grid(&[0.0, 0.7, 0.5]).is_err());
    }
}
