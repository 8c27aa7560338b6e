use super::{Coupling, DualPotentials, OtMethodTag, SolverDiagnostics, TransportResult};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;

/// Sorted atom order of a one-dimensional measure (stable on ties).
pub(crate) fn sorted_order(m: &DiscreteMeasure) -> Vec<usize> {
    let pts = m.flat_points();
    let mut idx: Vec<usize> = (0..m.len()).collect();
    idx.sort_by(|&a, &b| pts[a].total_cmp(&pts[b]));
    idx
}

/// Walks both quantile functions in lockstep, calling `emit(i, j, mass)`
/// for every piece of the comonotone coupling. When both cumulative
/// weights hit the same level the two atoms are advanced together
/// (left-closed quantile intervals).
pub(crate) fn comonotone_pieces<F>(p: &DiscreteMeasure, q: &DiscreteMeasure, mut emit: F)
where
    F: FnMut(usize, usize, f64),
{
    const TIE: f64 = 1e-15;
    let ip = sorted_order(p);
    let iq = sorted_order(q);
    let (la, lb) = (ip.len() - 1, iq.len() - 1);
    let (mut a, mut b) = (0usize, 0usize);
    let mut ra = p.weight(ip[0]);
    let mut rb = q.weight(iq[0]);
    loop {
        // the last atom on either side absorbs whatever rounding left over
        let m = match (a == la, b == lb) {
            (true, true) => ra.max(rb),
            (false, true) => ra,
            (true, false) => rb,
            (false, false) => ra.min(rb),
        };
        emit(ip[a], iq[b], m);
        if a == la && b == lb {
            break;
        }
        // one remainder drops to exactly zero; leftovers below TIE are
        // rounding noise and close the atom as well
        ra -= m;
        rb -= m;
        let step_a = (ra <= TIE || b == lb) && a < la;
        let step_b = (rb <= TIE || a == la) && b < lb;
        if step_a {
            a += 1;
            ra = p.weight(ip[a]);
        }
        if step_b {
            b += 1;
            rb = q.weight(iq[b]);
        }
    }
}

/// Exact MCov in d = 1 through the comonotone (quantile) coupling.
pub fn mcov_exact_1d(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<TransportResult> {
    if p.dim() != 1 {
        return Err(Error::DimensionNotOne(p.dim()));
    }
    if q.dim() != 1 {
        return Err(Error::DimensionNotOne(q.dim()));
    }
    let x = p.flat_points();
    let y = q.flat_points();
    let mut entries = Vec::with_capacity(p.len() + q.len());
    let mut f = vec![f64::NAN; p.len()];
    let mut g = vec![f64::NAN; q.len()];
    let mut prev: Option<(usize, usize)> = None;
    comonotone_pieces(p, q, |i, j, mass| {
        if mass > 0.0 {
            entries.push((i, j, mass));
        }
        match prev {
            None => {
                f[i] = 0.0;
                g[j] = x[i] * y[j];
            }
            Some((pi, pj)) => {
                if i != pi && j != pj {
                    // both advanced: link through the zero-mass corner (i, pj)
                    f[i] = x[i] * y[pj] - g[pj];
                    g[j] = x[i] * y[j] - f[i];
                } else if i != pi {
                    f[i] = x[i] * y[j] - g[j];
                } else if j != pj {
                    g[j] = x[i] * y[j] - f[i];
                }
            }
        }
        prev = Some((i, j));
    });
    let value: f64 = entries.iter().map(|&(i, j, m)| m * x[i] * y[j]).sum();
    let potentials = DualPotentials::normalized(f, g);
    let gap = (potentials.dual_value(p.weights(), q.weights()) - value).abs();
    let coupling = Coupling::new(p.len(), q.len(), entries);
    let marginal_violation = coupling.marginal_violation(p.weights(), q.weights());
    Ok(TransportResult {
        value,
        coupling,
        potentials,
        method: OtMethodTag::Exact1d,
        epsilon: None,
        diagnostics: SolverDiagnostics { iterations: 0, marginal_violation, duality_gap: gap },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{barycenter, discretize_gaussian, GaussianSpec};
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_atom_comonotone() {
        // enumerate both couplings of two equal atoms: +2 and -2
        let p = DiscreteMeasure::uniform_1d(&[1.0, -1.0]).unwrap();
        let q = DiscreteMeasure::uniform_1d(&[-2.0, 2.0]).unwrap();
        let r = mcov_exact_1d(&p, &q).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-15);
        assert_eq!(r.coupling.entries().len(), 2);
    }

    #[test]
    fn dirac_times_barycenter() {
        let p = DiscreteMeasure::dirac(&[-1.5]).unwrap();
        let q = DiscreteMeasure::from_1d(&[0.0, 1.0, 5.0], &[0.5, 0.25, 0.25]).unwrap();
        let r = mcov_exact_1d(&p, &q).unwrap();
        assert_abs_diff_eq!(r.value, -1.5 * barycenter(&q)[0], epsilon = 1e-14);
    }

    #[test]
    fn gaussian_mcov_is_product_of_sds() {
        let p = discretize_gaussian(&GaussianSpec::isotropic(1, 1.0).unwrap(), 64).unwrap();
        let q = discretize_gaussian(&GaussianSpec::isotropic(1, 4.0).unwrap(), 64).unwrap();
        let r = mcov_exact_1d(&p, &q).unwrap();
        assert_abs_diff_eq!(r.value, 2.0, epsilon = 1e-3);
    }

    #[test]
    fn potentials_are_dual_feasible_and_tight() {
        let p = DiscreteMeasure::from_1d(&[0.3, -1.0, 2.0, 0.3], &[0.1, 0.4, 0.25, 0.25]).unwrap();
        let q = DiscreteMeasure::from_1d(&[-3.0, 1.0, 0.0], &[0.5, 0.25, 0.25]).unwrap();
        let r = mcov_exact_1d(&p, &q).unwrap();
        assert_eq!(r.potentials.f[0], 0.0);
        assert!(r.potentials.max_infeasibility(&p, &q) <= 1e-12);
        assert_abs_diff_eq!(
            r.potentials.dual_value(p.weights(), q.weights()),
            r.value,
            epsilon = 1e-12
        );
        for &(i, j, _) in r.coupling.entries() {
            let slack = r.potentials.f[i] + r.potentials.g[j] - p.point(i)[0] * q.point(j)[0];
            assert!(slack.abs() < 1e-12);
        }
    }

    #[test]
    fn tied_cumulative_weights_keep_feasibility() {
        // cumulative levels coincide at 0.5
        let p = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let q = DiscreteMeasure::uniform_1d(&[-2.0, 3.0]).unwrap();
        let r = mcov_exact_1d(&p, &q).unwrap();
        assert_eq!(r.coupling.entries().len(), 2);
        assert!(r.potentials.max_infeasibility(&p, &q) <= 1e-12);
        assert_abs_diff_eq!(r.potentials.dual_value(p.weights(), q.weights()), r.value, epsilon = 1e-12);
    }

    #[test]
    fn rejects_higher_dimensions() {
        let p = DiscreteMeasure::dirac(&[0.0, 0.0]).unwrap();
        assert!(matches!(mcov_exact_1d(&p, &p), Err(Error::DimensionNotOne(2))));
    }
}
