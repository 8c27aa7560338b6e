//! Log-domain Sinkhorn with ε-scaling on the cost `−⟨x, y⟩`.

use rayon::prelude::*;

use super::{Coupling, DualPotentials, OtMethodTag, SolverDiagnostics, TransportResult, DEFAULT_LP_CAP};
use crate::error::{Error, Result};
use crate::measures::{dot, DiscreteMeasure};

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let mx = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    mx + it.map(|v| (v - mx).exp()).sum::<f64>().ln()
}

/// Entropic approximation of MCov. The returned plan is rounded onto the
/// exact marginals before the value is reported.
pub fn mcov_entropic(
    p: &DiscreteMeasure,
    q: &DiscreteMeasure,
    epsilon: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TransportResult> {
    p.check_dim(q.dim())?;
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    let (n, m) = (p.len(), q.len());
    if n * m > DEFAULT_LP_CAP {
        return Err(Error::SizeCapExceeded { size: n * m, cap: DEFAULT_LP_CAP });
    }
    let a = p.weights();
    let b = q.weights();
    let la: Vec<f64> = a.iter().map(|w| w.ln()).collect();
    let lb: Vec<f64> = b.iter().map(|w| w.ln()).collect();
    let cost: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| -dot(p.point(i), q.point(j)))
        .collect();
    let cost_t: Vec<f64> = (0..m)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| cost[i * m + j])
        .collect();
    let scale = cost.iter().fold(0.0f64, |s, c| s.max(c.abs()));

    let mut f = vec![0.0; n];
    let mut g = vec![0.0; m];
    let mut iterations = 0usize;
    let mut eps = (0.2 * scale).max(epsilon);
    let mut violation;
    loop {
        let last_stage = eps <= epsilon;
        let stage_tol = if last_stage { tol } else { tol.max(1e-4) };
        let mut stage_iters = 0usize;
        loop {
            f.par_iter_mut().enumerate().for_each(|(i, fi)| {
                let row = &cost[i * m..(i + 1) * m];
                let lse = log_sum_exp((0..m).map(|j| lb[j] + (g[j] - row[j]) / eps));
                *fi = -eps * lse;
            });
            g.par_iter_mut().enumerate().for_each(|(j, gj)| {
                let col = &cost_t[j * n..(j + 1) * n];
                let lse = log_sum_exp((0..n).map(|i| la[i] + (f[i] - col[i]) / eps));
                *gj = -eps * lse;
            });
            iterations += 1;
            stage_iters += 1;
            // columns are exact after the g-update; measure the row error
            violation = (0..n)
                .into_par_iter()
                .map(|i| {
                    let row = &cost[i * m..(i + 1) * m];
                    let s: f64 = (0..m)
                        .map(|j| (la[i] + lb[j] + (f[i] + g[j] - row[j]) / eps).exp())
                        .sum();
                    (s - a[i]).abs()
                })
                .sum();
            if violation < stage_tol || (!last_stage && stage_iters >= 500) {
                break;
            }
            if iterations >= max_iter {
                return Err(Error::NoConvergence(max_iter));
            }
        }
        if last_stage {
            break;
        }
        eps = (0.5 * eps).max(epsilon);
    }

    // round onto the transport polytope
    let mut plan: Vec<f64> = (0..n * m)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / m, k % m);
            (la[i] + lb[j] + (f[i] + g[j] - cost[k]) / epsilon).exp()
        })
        .collect();
    for i in 0..n {
        let r: f64 = plan[i * m..(i + 1) * m].iter().sum();
        if r > a[i] {
            let s = a[i] / r;
            plan[i * m..(i + 1) * m].iter_mut().for_each(|v| *v *= s);
        }
    }
    let mut colsum = vec![0.0; m];
    for i in 0..n {
        for j in 0..m {
            colsum[j] += plan[i * m + j];
        }
    }
    let ys: Vec<f64> = (0..m).map(|j| if colsum[j] > b[j] { b[j] / colsum[j] } else { 1.0 }).collect();
    for i in 0..n {
        for j in 0..m {
            plan[i * m + j] *= ys[j];
        }
    }
    let err_r: Vec<f64> = (0..n).map(|i| a[i] - plan[i * m..(i + 1) * m].iter().sum::<f64>()).collect();
    let mut err_c = b.to_vec();
    for i in 0..n {
        for j in 0..m {
            err_c[j] -= plan[i * m + j];
        }
    }
    let l1: f64 = err_r.iter().map(|v| v.abs()).sum();
    if l1 > 0.0 {
        for i in 0..n {
            for j in 0..m {
                plan[i * m + j] += err_r[i] * err_c[j] / l1;
            }
        }
    }

    let entries: Vec<(usize, usize, f64)> = plan
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(k, &v)| (k / m, k % m, v))
        .collect();
    let coupling = Coupling::new(n, m, entries);
    let value = coupling.covariance(p, q);
    let potentials = DualPotentials::normalized(
        f.iter().map(|v| -v).collect(),
        g.iter().map(|v| -v).collect(),
    );
    let gap = (potentials.dual_value(a, b) - value).abs();
    Ok(TransportResult {
        value,
        coupling,
        potentials,
        method: OtMethodTag::Entropic,
        epsilon: Some(epsilon),
        diagnostics: SolverDiagnostics { iterations, marginal_violation: violation, duality_gap: gap },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{discretize_gaussian, GaussianSpec};
    use crate::ot::mcov_lp;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dirac_pair_is_zero() {
        let d = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let r = mcov_entropic(&d, &d, 0.1, 1000, 1e-9).unwrap();
        assert!(r.value.abs() < 1e-15);
    }

    #[test]
    fn epsilon_sweep_approaches_exact_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pts = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> { (0..2 * k).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let p = DiscreteMeasure::from_flat(2, pts(&mut rng, 30), vec![1.0; 30]).unwrap();
        let q = DiscreteMeasure::from_flat(2, pts(&mut rng, 25), vec![1.0; 25]).unwrap();
        let exact = mcov_lp(&p, &q).unwrap().value;
        let mut prev_gap = f64::INFINITY;
        for eps in [0.1, 0.05, 0.01] {
            let r = mcov_entropic(&p, &q, eps, 200_000, 1e-9).unwrap();
            let gap = exact - r.value;
            assert!(gap >= -1e-9, "entropic value above exact optimum: {gap}");
            assert!(gap <= prev_gap + 1e-12, "eps={eps}: gap {gap} after {prev_gap}");
            assert!(r.coupling.marginal_violation(p.weights(), q.weights()) < 1e-12);
            prev_gap = gap;
        }
        let scale = 1.0;
        assert!(prev_gap < 1e-2 * scale, "final gap {prev_gap}");
    }

    #[test]
    fn gaussian_pair_at_small_epsilon() {
        let p = discretize_gaussian(&GaussianSpec::isotropic(1, 1.0).unwrap(), 64).unwrap();
        let q = discretize_gaussian(&GaussianSpec::isotropic(1, 4.0).unwrap(), 64).unwrap();
        let r = mcov_entropic(&p, &q, 0.01, 200_000, 1e-6);
        let r = r.unwrap();
        assert!((r.value - 2.0).abs() < 0.02, "{}", r.value);
    }

    #[test]
    fn rejects_bad_epsilon() {
        let d = DiscreteMeasure::dirac(&[0.0]).unwrap();
        assert!(mcov_entropic(&d, &d, 0.0, 10, 1e-9).is_err());
    }

    #[test]
    fn reports_no_convergence() {
        let p = DiscreteMeasure::uniform_1d(&[-1.0, 0.0, 1.0]).unwrap();
        let q = DiscreteMeasure::uniform_1d(&[-2.0, 0.5, 2.0]).unwrap();
        assert!(matches!(mcov_entropic(&p, &q, 1e-3, 2, 1e-14), Err(Error::NoConvergence(2))));
    }
}
