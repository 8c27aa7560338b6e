use super::{evaluate_v, BassConfig};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::ot::{mcov, project_coupling, MapSamples};

/// One step of the fixed-point map `α ↦ (∇u_α)⁻¹(μ)`, where
/// `∇u_α = ∇v∗γ` is read off the `α∗γ → ν` solve at the atoms of α.
///
/// In d = 1 the sampled map is inverted monotonically; otherwise μ is
/// transported onto the image cloud `{∇u_α(z_i)}` and each atom of μ is sent
/// to the barycenter of the preimages it is coupled with.
pub fn fixed_point_step(
    alpha: &DiscreteMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    config: &BassConfig,
) -> Result<DiscreteMeasure> {
    let e = evaluate_v(alpha, mu, nu, config)?;
    let image = e.smoothed_map(alpha, nu)?;
    let d = alpha.dim();
    if d == 1 {
        let mut pairs: Vec<(f64, f64)> = alpha.flat_points().iter().copied().zip(image.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.dedup_by(|b, a| b.0 == a.0);
        if pairs.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(Error::NonInvertibleMap);
        }
        let (z, u): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let inverse = MapSamples::from_1d(&u, &z)?;
        let mut out = vec![0.0; 1];
        return mu.map_points(|x, y| {
            inverse.eval_into(x, Default::default(), &mut out);
            y[0] = out[0];
        });
    }
    // μ → image cloud, then replace image points by their preimages z_i
    let cloud = DiscreteMeasure::from_flat(d, image, alpha.weights().to_vec())?;
    let plan = mcov(mu, &cloud, &config.method)?;
    let pts = project_coupling(&plan.coupling, alpha)?;
    DiscreteMeasure::from_flat(d, pts, mu.weights().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{w2, OtMethod};

    fn q(sd: f64, n: usize) -> DiscreteMeasure {
        DiscreteMeasure::gaussian_quantiles_1d(0.0, sd, n).unwrap()
    }

    #[test]
    fn gaussian_solution_is_a_fixed_point() {
        let cfg = BassConfig::default();
        let (mu, nu) = (q(1.0, 200), q(2f64.sqrt(), 200));
        let out = fixed_point_step(&mu, &mu, &nu, &cfg).unwrap();
        assert!(w2(&out, &mu, &OtMethod::Exact).unwrap() <= 0.05);
    }

    #[test]
    fn step_contracts_towards_the_solution() {
        let cfg = BassConfig::default();
        let (mu, nu) = (q(1.0, 200), q(2f64.sqrt(), 200));
        let a0 = q(2.0, 200);
        let a1 = fixed_point_step(&a0, &mu, &nu, &cfg).unwrap();
        let d0 = w2(&a0, &mu, &OtMethod::Exact).unwrap();
        let d1 = w2(&a1, &mu, &OtMethod::Exact).unwrap();
        assert!(d1 < d0, "{d1} !< {d0}");
    }

    #[test]
    fn dirac_source_maps_to_a_dirac() {
        let cfg = BassConfig::default();
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let alpha = DiscreteMeasure::uniform_1d(&[-0.5, 0.5]).unwrap();
        let out = fixed_point_step(&alpha, &mu, &nu, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.point(0)[0].abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_step_keeps_mu_weights() {
        let cfg = BassConfig { quad_nodes: Some(4), ..Default::default() };
        let mu = DiscreteMeasure::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![-1.0, 0.0]], &[0.5, 0.25, 0.25]).unwrap();
        let nu = DiscreteMeasure::from_points(&[vec![2.0, 0.5], vec![-2.0, -0.5], vec![0.0, 0.0]], &[0.25, 0.25, 0.5]).unwrap();
        let out = fixed_point_step(&mu, &mu, &nu, &cfg).unwrap();
        assert_eq!(out.weights(), mu.weights());
    }
}
