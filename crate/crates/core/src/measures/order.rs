use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use super::{barycenter, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::ot::Coupling;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ConvexOrderCertificate {
    /// d = 1: every call price of `mu` is dominated; `min_slack` is the
    /// smallest `C_nu(k) - C_mu(k)` over all kinks `k`.
    CallDominance { min_slack: f64 },
    /// A coupling whose kernels have barycenter equal to their source atom.
    MartingaleCoupling(Coupling),
    MeanMismatch { mu_mean: Vec<f64>, nu_mean: Vec<f64> },
    /// The convex payoff `(x - strike)^+` integrates higher under `mu`.
    ViolatedCall { strike: f64, excess: f64 },
    /// No martingale coupling exists (LP infeasible).
    Infeasible,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexOrderReport {
    pub in_order: bool,
    pub certificate: ConvexOrderCertificate,
}

fn call_price(m: &DiscreteMeasure, k: f64) -> f64 {
    m.atoms().map(|(x, w)| w * (x[0] - k).max(0.0)).sum()
}

/// Decides `mu ⪯_c nu` for discrete measures. In d = 1 this compares call
/// prices at every kink; otherwise it searches for a martingale coupling.
pub fn check_convex_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ConvexOrderReport> {
    mu.check_dim(nu.dim())?;
    let scale = 1.0
        + mu.atoms()
            .chain(nu.atoms())
            .flat_map(|(p, _)| p.iter())
            .fold(0.0f64, |a, x| a.max(x.abs()));
    let tol = 1e-9 * scale;

    let (bm, bn) = (barycenter(mu), barycenter(nu));
    if bm.iter().zip(&bn).any(|(a, b)| (a - b).abs() > tol) {
        return Ok(ConvexOrderReport {
            in_order: false,
            certificate: ConvexOrderCertificate::MeanMismatch { mu_mean: bm, nu_mean: bn },
        });
    }

    if mu.dim() == 1 {
        let mut min_slack = f64::INFINITY;
        let mut worst = (0.0, 0.0);
        for (k, _) in mu.atoms().chain(nu.atoms()) {
            let slack = call_price(nu, k[0]) - call_price(mu, k[0]);
            if slack < min_slack {
                min_slack = slack;
                worst = (k[0], -slack);
            }
        }
        let certificate = if min_slack >= -tol {
            ConvexOrderCertificate::CallDominance { min_slack }
        } else {
            ConvexOrderCertificate::ViolatedCall { strike: worst.0, excess: worst.1 }
        };
        return Ok(ConvexOrderReport { in_order: min_slack >= -tol, certificate });
    }

    Ok(match martingale_coupling(mu, nu)? {
        Some(c) => ConvexOrderReport {
            in_order: true,
            certificate: ConvexOrderCertificate::MartingaleCoupling(c),
        },
        None => ConvexOrderReport { in_order: false, certificate: ConvexOrderCertificate::Infeasible },
    })
}

/// Finds some martingale coupling of `(mu, nu)` by linear programming, or
/// `None` when the LP is infeasible.
pub fn martingale_coupling(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Option<Coupling>> {
    mu.check_dim(nu.dim())?;
    let (n, m, d) = (mu.len(), nu.len(), mu.dim());
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = (0..n * m).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for i in 0..n {
        let row: Vec<_> = (0..m).map(|j| (vars[i * m + j], 1.0)).collect();
        lp.add_constraint(row.as_slice(), ComparisonOp::Eq, mu.weight(i));
        let x = mu.point(i);
        for k in 0..d {
            let expr: Vec<_> = (0..m)
                .map(|j| (vars[i * m + j], nu.point(j)[k] - x[k]))
                .collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, 0.0);
        }
    }
    // the last column constraint is implied by the others
    for j in 0..m.saturating_sub(1) {
        let col: Vec<_> = (0..n).map(|i| (vars[i * m + j], 1.0)).collect();
        lp.add_constraint(col.as_slice(), ComparisonOp::Eq, nu.weight(j));
    }
    match lp.solve() {
        Ok(sol) => {
            let mut entries = Vec::new();
            for i in 0..n {
                for j in 0..m {
                    let v = sol[vars[i * m + j]];
                    if v > 1e-14 {
                        entries.push((i, j, v));
                    }
                }
            }
            Ok(Some(Coupling::new(n, m, entries)))
        }
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(e) => Err(Error::InvalidInput(format!("martingale LP: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{discretize_gaussian, GaussianSpec};

    #[test]
    fn dirac_below_two_point() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        assert!(check_convex_order(&mu, &nu).unwrap().in_order);
        let r = check_convex_order(&nu, &mu).unwrap();
        assert!(!r.in_order);
        match r.certificate {
            ConvexOrderCertificate::ViolatedCall { strike, excess } => {
                assert_eq!(strike, 0.0);
                assert!((excess - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected certificate {other:?}"),
        }
    }

    #[test]
    fn measure_is_below_itself() {
        let m = DiscreteMeasure::from_1d(&[-2.0, 0.5, 3.0], &[0.3, 0.5, 0.2]).unwrap();
        assert!(check_convex_order(&m, &m).unwrap().in_order);
        let m2 = DiscreteMeasure::from_points(&[vec![0.0, 1.0], vec![2.0, -1.0]], &[0.5, 0.5]).unwrap();
        assert!(check_convex_order(&m2, &m2).unwrap().in_order);
    }

    #[test]
    fn mean_mismatch_is_reported() {
        let mu = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let nu = DiscreteMeasure::uniform_1d(&[0.0, 1.0]).unwrap();
        let r = check_convex_order(&mu, &nu).unwrap();
        assert!(!r.in_order);
        assert!(matches!(r.certificate, ConvexOrderCertificate::MeanMismatch { .. }));
    }

    #[test]
    fn lp_certificate_is_a_martingale_coupling() {
        let mu = DiscreteMeasure::from_points(&[vec![0.5, 0.0], vec![-0.5, 0.0]], &[0.5, 0.5]).unwrap();
        let nu = discretize_gaussian(&GaussianSpec::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap(), 3)
            .unwrap();
        let r = check_convex_order(&mu, &nu).unwrap();
        assert!(r.in_order);
        let ConvexOrderCertificate::MartingaleCoupling(c) = r.certificate else {
            panic!("expected coupling");
        };
        for (i, s) in c.row_sums().iter().enumerate() {
            assert!((s - mu.weight(i)).abs() < 1e-9);
        }
        for (j, s) in c.col_sums().iter().enumerate() {
            assert!((s - nu.weight(j)).abs() < 1e-9);
        }
        for i in 0..mu.len() {
            let mut b = [0.0; 2];
            for &(r, j, p) in c.entries() {
                if r == i {
                    b[0] += p * nu.point(j)[0];
                    b[1] += p * nu.point(j)[1];
                }
            }
            for k in 0..2 {
                assert!((b[k] / mu.weight(i) - mu.point(i)[k]).abs() < 1e-8);
            }
        }
        // reversed order has no martingale coupling
        let r = check_convex_order(&nu, &mu).unwrap();
        assert!(!r.in_order);
    }

    #[test]
    fn dimension_mismatch() {
        let a = DiscreteMeasure::dirac(&[0.0]).unwrap();
        let b = DiscreteMeasure::dirac(&[0.0, 0.0]).unwrap();
        assert!(matches!(check_convex_order(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lp_agrees_with_calls_in_1d() {
        let mu = DiscreteMeasure::from_1d(&[-1.0, 0.0, 2.0], &[0.25, 0.5, 0.25]).unwrap();
        let nu = DiscreteMeasure::from_1d(&[-3.0, 0.0, 1.0, 4.0], &[0.1, 0.65, 0.15, 0.1]).unwrap();
        assert!(check_convex_order(&mu, &nu).unwrap().in_order);
        let calls = check_convex_order(&mu, &nu).unwrap().in_order;
        let lp = martingale_coupling(&mu, &nu).unwrap().is_some();
        assert_eq!(calls, lp);
        let calls = check_convex_order(&nu, &mu).unwrap().in_order;
        let lp = martingale_coupling(&nu, &mu).unwrap().is_some();
        assert_eq!(calls, lp);
    }
}
