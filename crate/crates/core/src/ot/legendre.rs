//! Discrete convex conjugation on the line.

use crate::error::{Error, Result};

/// Indices of the vertices of the lower convex envelope of the points
/// `(x_i, y_i)`, `x` strictly increasing (monotone chain; collinear
/// interior points are dropped).
pub fn lower_hull(x: &[f64], y: &[f64]) -> Vec<usize> {
    let mut hull: Vec<usize> = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            // drop b unless it lies strictly below the chord a→i
            let cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Convex conjugate `ψ*(y) = max_i (y·x_i − ψ(x_i))` of grid data.
///
/// The conjugate of the piecewise-linear hull is itself piecewise linear;
/// it is returned at its kinks, which are the hull slopes (increasing).
/// Outside the returned range it continues affinely with slopes `grid[0]`
/// (left) and `grid[last]` (right).
pub fn legendre_transform_1d(grid: &[f64], values: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if grid.len() < 2 || grid.len() != values.len() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::DegenerateGrid);
    }
    if grid.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("legendre grid"));
    }
    let hull = lower_hull(grid, values);
    let mut slopes = Vec::with_capacity(hull.len() - 1);
    let mut conj = Vec::with_capacity(hull.len() - 1);
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let s = (values[b] - values[a]) / (grid[b] - grid[a]);
        slopes.push(s);
        conj.push(s * grid[a] - values[a]);
    }
    Ok((slopes, conj))
}
