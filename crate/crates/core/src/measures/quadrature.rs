use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Discrete probability measure used to integrate against the standard
/// Gaussian on R^d. Nodes come in ± pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// Tensor-product Gauss–Hermite rule for N(0, I_d) with `m` nodes per axis.
    pub fn gauss_hermite(m: usize, dim: usize) -> Result<Self> {
        if m == 0 || dim == 0 {
            return Err(Error::InvalidInput("quadrature needs m ≥ 1 and d ≥ 1".into()));
        }
        let (x, w) = gauss_hermite_1d(m);
        Ok(tensor(&x, &w, dim))
    }

    /// Equal-weight midpoint quantiles of N(0,1). Useful as a dense
    /// sampling cloud; it does not reproduce the unit variance exactly.
    pub fn quantile_midpoint_1d(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("quadrature needs m ≥ 1".into()));
        }
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        let mut nodes: Vec<f64> = (0..m)
            .map(|i| std.inverse_cdf((i as f64 + 0.5) / m as f64))
            .collect();
        for i in 0..m / 2 {
            let a = 0.5 * (nodes[m - 1 - i] - nodes[i]);
            nodes[i] = -a;
            nodes[m - 1 - i] = a;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Ok(Self { dim: 1, nodes, weights: vec![1.0 / m as f64; m] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> std::slice::ChunksExact<'_, f64> {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Largest absolute node coordinate.
    pub fn radius(&self) -> f64 {
        self.nodes.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

fn tensor(x: &[f64], w: &[f64], dim: usize) -> QuadratureRule {
    let m = x.len();
    let total = m.pow(dim as u32);
    let mut nodes = Vec::with_capacity(total * dim);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; dim];
    for _ in 0..total {
        let mut wt = 1.0;
        for &k in &idx {
            nodes.push(x[k]);
            wt *= w[k];
        }
        weights.push(wt);
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    let s: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= s);
    QuadratureRule { dim, nodes, weights }
}

/// Nodes (ascending) and weights of the `m`-point Gauss–Hermite rule for
/// the standard normal density. Roots of the orthonormal Hermite
/// polynomials are refined by Newton's method from asymptotic guesses.
pub fn gauss_hermite_1d(m: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
    let n = m;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    // physicists' rule → standard normal
    let sqrt2 = std::f64::consts::SQRT_2;
    let mut nodes: Vec<f64> = x.iter().map(|v| v * sqrt2).collect();
    nodes.reverse();
    w.reverse();
    let s: f64 = w.iter().sum();
    let weights = w.iter().map(|v| v / s).collect();
    (nodes, weights)
}
