use crate::error::{Error, Result};
use crate::measures::{dot, DiscreteMeasure};

const MAX_ATOMS: usize = 8;

/// Exact MCov between two equal-weight measures of the same size by
/// enumerating every permutation (n ≤ 8). Used as an oracle.
pub fn brute_force_mcov(p: &DiscreteMeasure, q: &DiscreteMeasure) -> Result<f64> {
    p.check_dim(q.dim())?;
    let n = p.len();
    if n > MAX_ATOMS {
        return Err(Error::SizeCapExceeded { size: n, cap: MAX_ATOMS });
    }
    if q.len() != n {
        return Err(Error::InvalidInput("brute force needs equally many atoms".into()));
    }
    let w = 1.0 / n as f64;
    if p.weights().iter().chain(q.weights()).any(|&x| (x - w).abs() > 1e-12) {
        return Err(Error::InvalidInput("brute force needs uniform weights".into()));
    }
    let gram: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| dot(p.point(i), q.point(j)))
        .collect();
    let score = |perm: &[usize]| -> f64 { perm.iter().enumerate().map(|(i, &j)| gram[i * n + j]).sum() };

    // Heap's algorithm
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = score(&perm);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            best = best.max(score(&perm));
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(best * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atoms() {
        let p = DiscreteMeasure::uniform_1d(&[-1.0, 1.0]).unwrap();
        let q = DiscreteMeasure::uniform_1d(&[2.0, -2.0]).unwrap();
        assert_eq!(brute_force_mcov(&p, &q).unwrap(), 2.0);
    }

    #[test]
    fn single_atom_is_inner_product() {
        let p = DiscreteMeasure::dirac(&[1.0, 2.0]).unwrap();
        let q = DiscreteMeasure::dirac(&[3.0, -1.0]).unwrap();
        assert_eq!(brute_force_mcov(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn enumerates_all_permutations() {
        // the optimum pairs 0↔2, 1↔0, 2↔1 which is neither identity nor reversal
        let p = DiscreteMeasure::uniform_1d(&[1.0, 2.0, 3.0]).unwrap();
        let q = DiscreteMeasure::uniform_1d(&[3.0, 1.0, 2.0]).unwrap();
        assert!((brute_force_mcov(&p, &q).unwrap() - 14.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn guards() {
        let big = DiscreteMeasure::uniform_1d(&[0.0; 9].iter().enumerate().map(|(i, _)| i as f64).collect::<Vec<_>>()).unwrap();
        assert!(matches!(brute_force_mcov(&big, &big), Err(Error::SizeCapExceeded { .. })));
        let a = DiscreteMeasure::from_1d(&[0.0, 1.0], &[0.3, 0.7]).unwrap();
        assert!(brute_force_mcov(&a, &a).is_err());
    }
}
