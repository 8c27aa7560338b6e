use std::io::Write;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BassMartingaleModel;
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::ot::{w2, OtMethod};

/// Simulated paths of `(M, B)` on a uniform time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub dim: usize,
    pub n_paths: usize,
    /// `paths[(p·n_times + k)·d + c]` is coordinate c of `M_{t_k}` on path p.
    pub paths: Vec<f64>,
    /// Same layout for `B`.
    pub brownian: Vec<f64>,
    pub seed: u64,
}

impl PathEnsemble {
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    fn at<'a>(&self, buf: &'a [f64], p: usize, k: usize) -> &'a [f64] {
        let o = (p * self.n_times() + k) * self.dim;
        &buf[o..o + self.dim]
    }

    pub fn m(&self, p: usize, k: usize) -> &[f64] {
        self.at(&self.paths, p, k)
    }

    pub fn b(&self, p: usize, k: usize) -> &[f64] {
        self.at(&self.brownian, p, k)
    }

    /// Empirical law of `M_{t_k}` (equal weights).
    pub fn marginal(&self, k: usize) -> Result<DiscreteMeasure> {
        self.marginal_of_first(k, self.n_paths)
    }

    fn marginal_of_first(&self, k: usize, n: usize) -> Result<DiscreteMeasure> {
        let n = n.min(self.n_paths);
        let mut pts = Vec::with_capacity(n * self.dim);
        for p in 0..n {
            pts.extend_from_slice(self.m(p, k));
        }
        DiscreteMeasure::from_flat(self.dim, pts, vec![1.0; n])
    }

    /// Index of the grid time equal to `t` (within rounding).
    pub fn time_index(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|s| (s - t).abs() <= 1e-9)
    }

    /// CSV with columns `path_id,t,x1..xd,b1..bd`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io_err = |source| Error::Io { path: path.into(), source };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
        let mut header = vec!["path_id".to_string(), "t".to_string()];
        header.extend((1..=self.dim).map(|k| format!("x{k}")));
        header.extend((1..=self.dim).map(|k| format!("b{k}")));
        writeln!(f, "{}", header.join(",")).map_err(io_err)?;
        for p in 0..self.n_paths {
            for (k, t) in self.times.iter().enumerate() {
                write!(f, "{p},{t}").map_err(io_err)?;
                for v in self.m(p, k).iter().chain(self.b(p, k)) {
                    write!(f, ",{v:e}").map_err(io_err)?;
                }
                writeln!(f).map_err(io_err)?;
            }
        }
        f.flush().map_err(io_err)
    }
}

/// Simulates `M_t = ∇v̂_t(B_t)` with `B_0 ∼ α̂` on `n_steps + 1` uniform
/// times. Path p draws from its own ChaCha stream, so the output depends
/// only on `seed` and not on the thread count.
pub fn simulate_paths(model: &BassMartingaleModel, n_paths: usize, n_steps: usize, seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 || n_steps == 0 {
        return Err(Error::InvalidInput("need at least one path and one step".into()));
    }
    let d = model.dim();
    let nt = n_steps + 1;
    let times: Vec<f64> = (0..nt).map(|k| k as f64 / n_steps as f64).collect();
    let atoms = WeightedIndex::new(model.alpha_hat.weights())
        .map_err(|e| Error::InvalidInput(format!("Bass measure weights: {e}")))?;
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let mut b = model.alpha_hat.point(atoms.sample(&mut rng)).to_vec();
            let mut ms = Vec::with_capacity(nt * d);
            let mut bs = Vec::with_capacity(nt * d);
            let (mut out, mut s1, mut s2) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            for k in 0..nt {
                if k > 0 {
                    let sd = (times[k] - times[k - 1]).sqrt();
                    for bc in b.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *bc += sd * z;
                    }
                }
                model.map_vt_into(&b, times[k], &mut out, &mut s1, &mut s2);
                ms.extend_from_slice(&out);
                bs.extend_from_slice(&b);
            }
            (ms, bs)
        })
        .collect();
    let mut paths = Vec::with_capacity(n_paths * nt * d);
    let mut brownian = Vec::with_capacity(n_paths * nt * d);
    for (m, b) in per_path {
        paths.extend(m);
        brownian.extend(b);
    }
    Ok(PathEnsemble { times, dim: d, n_paths, paths, brownian, seed })
}

/// Largest sample the W₂ comparisons use in d ≥ 2 (exact OT is quadratic).
const MULTI_D_SAMPLE_CAP: usize = 400;

fn sample_cap(dim: usize) -> usize {
    if dim == 1 {
        usize::MAX
    } else {
        MULTI_D_SAMPLE_CAP
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalError {
    pub e0: f64,
    pub e1: f64,
}

/// W₂ distances between the simulated laws of `M_0`, `M_1` and μ, ν.
pub fn marginal_error(ensemble: &PathEnsemble, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<MarginalError> {
    let cap = sample_cap(ensemble.dim);
    let m0 = ensemble.marginal_of_first(0, cap)?;
    let m1 = ensemble.marginal_of_first(ensemble.n_times() - 1, cap)?;
    let (e0, e1) = rayon::join(|| w2(&m0, mu, &OtMethod::Exact), || w2(&m1, nu, &OtMethod::Exact));
    Ok(MarginalError { e0: e0?, e1: e1? })
}

/// W₂ between `m` and the empirical law of `n` i.i.d. draws from it: the
/// statistical floor that `marginal_error` is measured against.
pub fn resampling_floor(m: &DiscreteMeasure, n: usize, seed: u64) -> Result<f64> {
    let n = n.min(sample_cap(m.dim())).max(1);
    let idx = WeightedIndex::new(m.weights()).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(n * m.dim());
    for _ in 0..n {
        pts.extend_from_slice(m.point(idx.sample(&mut rng)));
    }
    let emp = DiscreteMeasure::from_flat(m.dim(), pts, vec![1.0; n])?;
    w2(&emp, m, &OtMethod::Exact)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// `E ∫_{t0}^{t1} tr(σ_t) dt` from the realized covariation `Σ ⟨ΔM, ΔB⟩`
/// over the grid intervals inside `[t0, t1]`. In expectation this equals
/// `E[⟨M_{t1}, B_{t1}⟩ − ⟨M_{t0}, B_{t0}⟩]`, with much smaller variance.
pub fn expected_trace_sigma_window(ensemble: &PathEnsemble, t0: f64, t1: f64) -> Result<TraceEstimate> {
    let k0 = ensemble.time_index(t0).ok_or(Error::MissingMarginal(t0))?;
    let k1 = ensemble.time_index(t1).ok_or(Error::MissingMarginal(t1))?;
    if k1 < k0 {
        return Err(Error::InvalidInput(format!("window [{t0}, {t1}] is reversed")));
    }
    let per_path: Vec<f64> = (0..ensemble.n_paths)
        .map(|p| {
            (k0..k1)
                .map(|k| {
                    let (m0, m1) = (ensemble.m(p, k), ensemble.m(p, k + 1));
                    let (b0, b1) = (ensemble.b(p, k), ensemble.b(p, k + 1));
                    (0..ensemble.dim).map(|c| (m1[c] - m0[c]) * (b1[c] - b0[c])).sum::<f64>()
                })
                .sum()
        })
        .collect();
    let n = per_path.len() as f64;
    let mean = per_path.iter().sum::<f64>() / n;
    let var = per_path.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(TraceEstimate { mean, std_err: (var / n).sqrt() })
}

/// `E ∫_0^1 tr(σ_t) dt` over the whole grid.
pub fn expected_trace_sigma(ensemble: &PathEnsemble) -> f64 {
    expected_trace_sigma_window(ensemble, 0.0, 1.0)
        .map(|e| e.mean)
        .unwrap_or(f64::NAN)
}

/// Path estimate of `E ∫_0^1 |σ_t − I|² dt = E|M_1|² − E|M_0|² − 2E∫tr σ + d`.
pub fn mbb_objective_estimate(ensemble: &PathEnsemble) -> f64 {
    let last = ensemble.n_times() - 1;
    let n = ensemble.n_paths as f64;
    let sq = |k: usize| (0..ensemble.n_paths).map(|p| ensemble.m(p, k).iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / n;
    sq(last) - sq(0) - 2.0 * expected_trace_sigma(ensemble) + ensemble.dim as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub count: usize,
    pub mean: f64,
    pub std_err: f64,
}

impl BinStat {
    /// `|mean| / SE` (0 for empty or degenerate bins).
    pub fn z_score(&self) -> f64 {
        if self.count < 2 || self.std_err == 0.0 {
            if self.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.mean.abs() / self.std_err
        }
    }
}

/// First-coordinate increments `M_{t_j} − M_{t_i}`, grouped into `bins`
/// equal-count bins of `M_{t_i}`. For a martingale every bin mean is zero.
pub fn martingale_increment_bins(ensemble: &PathEnsemble, i: usize, j: usize, bins: usize) -> Result<Vec<BinStat>> {
    if i >= j || j >= ensemble.n_times() || bins == 0 {
        return Err(Error::InvalidInput(format!("bad increment request ({i}, {j}, {bins} bins)")));
    }
    let mut pairs: Vec<(f64, f64)> = (0..ensemble.n_paths)
        .map(|p| (ensemble.m(p, i)[0], ensemble.m(p, j)[0] - ensemble.m(p, i)[0]))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pairs.len();
    Ok((0..bins)
        .map(|b| {
            let chunk = &pairs[b * n / bins..(b + 1) * n / bins];
            let c = chunk.len();
            if c == 0 {
                return BinStat { count: 0, mean: 0.0, std_err: 0.0 };
            }
            let mean = chunk.iter().map(|x| x.1).sum::<f64>() / c as f64;
            let var = chunk.iter().map(|x| (x.1 - mean).powi(2)).sum::<f64>() / (c as f64 - 1.0).max(1.0);
            BinStat { count: c, mean, std_err: (var / c as f64).sqrt() }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::QuadratureRule;
    use crate::ot::MapSamples;

    fn identity_model(alpha: DiscreteMeasure) -> BassMartingaleModel {
        let xs: Vec<f64> = (-800..=800).map(|i| i as f64 * 0.01).collect();
        BassMartingaleModel::new(alpha, MapSamples::from_1d(&xs, &xs).unwrap(), QuadratureRule::gauss_hermite(16, 1).unwrap(), 3).unwrap()
    }

    #[test]
    fn constant_map_gives_constant_paths() {
        let v = MapSamples::from_1d(&[-1.0, 1.0], &[0.25, 0.25]).unwrap();
        let a = DiscreteMeasure::uniform_1d(&[-0.5, 0.5]).unwrap();
        let m = BassMartingaleModel::new(a, v, QuadratureRule::gauss_hermite(8, 1).unwrap(), 0).unwrap();
        let e = simulate_paths(&m, 50, 4, 9).unwrap();
        assert!(e.paths.iter().all(|x| (*x - 0.25).abs() < 1e-15));
        let nu = DiscreteMeasure::dirac(&[0.25]).unwrap();
        let err = marginal_error(&e, &nu, &nu).unwrap();
        assert!(err.e1 <= 1e-12);
        assert_eq!(expected_trace_sigma(&e), 0.0);
    }

    #[test]
    fn brownian_model_statistics() {
        let alpha = DiscreteMeasure::gaussian_quantiles_1d(0.0, 1.0, 200).unwrap();
        let m = identity_model(alpha);
        let e = simulate_paths(&m, 10_000, 10, 42).unwrap();
        let m1 = e.marginal(10).unwrap();
        let var = crate::measures::variance(&m1)[0];
        assert!((var - 2.0).abs() < 0.1, "{var}");
        let tr = expected_trace_sigma_window(&e, 0.0, 1.0).unwrap();
        assert!((tr.mean - 1.0).abs() < 0.05, "{tr:?}");
        // martingale increment between t = 1/2 and t = 1
        let inc: Vec<f64> = (0..e.n_paths).map(|p| e.m(p, 10)[0] - e.m(p, 5)[0]).collect();
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let sd = (inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / inc.len() as f64).sqrt();
        assert!(mean.abs() <= 3.0 * sd / (inc.len() as f64).sqrt());
        // Brownian increments have variance Δt
        let db: Vec<f64> = (0..e.n_paths).map(|p| e.b(p, 1)[0] - e.b(p, 0)[0]).collect();
        let v = db.iter().map(|x| x * x).sum::<f64>() / db.len() as f64;
        assert!((v - 0.1).abs() < 0.01, "{v}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = identity_model(DiscreteMeasure::uniform_1d(&[-1.0, 0.0, 1.0]).unwrap());
        let a = simulate_paths(&m, 64, 5, 7).unwrap();
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| simulate_paths(&m, 64, 5, 7).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, simulate_paths(&m, 64, 5, 8).unwrap());
    }

    #[test]
    fn floor_is_small_for_large_samples() {
        let mu = DiscreteMeasure::gaussian_quantiles_1d(0.0, 1.0, 200).unwrap();
        let f = resampling_floor(&mu, 10_000, 1).unwrap();
        assert!(f > 0.0 && f < 0.08, "{f}");
    }

    #[test]
    fn csv_layout() {
        let m = identity_model(DiscreteMeasure::dirac(&[0.0]).unwrap());
        let e = simulate_paths(&m, 2, 2, 1).unwrap();
        let dir = std::env::temp_dir().join(format!("bassmbb-paths-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("paths.csv");
        e.write_csv(&p).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "path_id,t,x1,b1");
        assert_eq!(lines.len(), 1 + 2 * 3);
        std::fs::remove_dir_all(&dir).ok();
    }
}
