use std::path::{Path, PathBuf};

use bassmbb_core::bass::{minimize_v, BassSolution, SolveStatus};
use bassmbb_core::martingale::{
    expected_trace_sigma_window, marginal_error, mbb_objective_estimate, resampling_floor, simulate_paths,
    BassMartingaleModel,
};
use bassmbb_core::measures::{read_measure_csv, second_moment, write_measure_csv, DiscreteMeasure};
use serde::Serialize;

use crate::config::{config_hash, RunConfig};
use crate::{Common, Failure};

pub const SOLUTION_FILE: &str = "solution.json";

pub fn timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::invalid(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Failure::io(path, e))
}

pub fn read_measure(path: &Path) -> Result<DiscreteMeasure, Failure> {
    Ok(read_measure_csv(path)?)
}

pub struct Problem {
    pub config: RunConfig,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    pub inputs: Vec<(&'static str, PathBuf)>,
}

impl Problem {
    pub fn load(common: &Common) -> Result<Self, Failure> {
        let config = common.run_config()?;
        let (mu_path, nu_path) = (common.mu()?, common.nu()?);
        let mu = read_measure(mu_path)?;
        let nu = read_measure(nu_path)?;
        let mut inputs = vec![("mu", mu_path.to_path_buf()), ("nu", nu_path.to_path_buf())];
        if let Some(a) = &common.alpha0 {
            inputs.push(("alpha0", a.clone()));
        }
        ensure_dir(&common.out)?;
        Ok(Self { config, mu, nu, inputs })
    }

    pub fn hash(&self, command: &str, extra: &[(&str, &Path)]) -> Result<String, Failure> {
        let mut all: Vec<(&str, &Path)> = self.inputs.iter().map(|(n, p)| (*n, p.as_path())).collect();
        all.extend_from_slice(extra);
        config_hash(command, &self.config, &all)
    }

    pub fn solve(&self, common: &Common) -> Result<BassSolution, Failure> {
        let alpha0 = match &common.alpha0 {
            Some(p) => read_measure(p)?,
            None => self.mu.clone(),
        };
        Ok(minimize_v(&self.mu, &self.nu, &alpha0, &self.config.solver)?)
    }
}

#[derive(Serialize)]
struct SolveReport<'a> {
    version: u32,
    command: &'static str,
    config_hash: String,
    timestamp: u64,
    status: SolveStatus,
    value: f64,
    residual: f64,
    iterations: usize,
    alpha_hat_atoms: usize,
    alpha_hat_second_moment: f64,
    m2_trace: Vec<f64>,
    config: &'a RunConfig,
}

fn write_trace(path: &Path, sol: &BassSolution) -> Result<(), Failure> {
    let mut s = String::from("iteration,value,residual,second_moment\n");
    for r in &sol.trace {
        s.push_str(&format!("{},{},{},{}\n", r.iteration, r.value, r.residual, r.second_moment));
    }
    std::fs::write(path, s).map_err(|e| Failure::io(path, e))
}

pub fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Converged => 0,
        SolveStatus::SpreadDetected => 2,
        SolveStatus::MaxIter => 3,
    }
}

pub fn solve(common: &Common) -> Result<u8, Failure> {
    let problem = Problem::load(common)?;
    let hash = problem.hash("solve", &[])?;
    let sol = problem.solve(common)?;
    let out = &common.out;
    write_measure_csv(&out.join("alpha_hat.csv"), &sol.alpha_hat)?;
    write_trace(&out.join("trace.csv"), &sol)?;
    write_json(&out.join(SOLUTION_FILE), &sol)?;
    write_json(
        &out.join("report.json"),
        &SolveReport {
            version: crate::config::CONFIG_VERSION,
            command: "solve",
            config_hash: hash,
            timestamp: timestamp(),
            status: sol.status,
            value: sol.value,
            residual: sol.residual,
            iterations: sol.iterations,
            alpha_hat_atoms: sol.alpha_hat.len(),
            alpha_hat_second_moment: second_moment(&sol.alpha_hat),
            m2_trace: sol.trace.iter().map(|r| r.second_moment).collect(),
            config: &problem.config,
        },
    )?;
    println!("status: {:?}, value: {:.6}, residual: {:.3e}, iterations: {}", sol.status, sol.value, sol.residual, sol.iterations);
    Ok(status_code(sol.status))
}

pub fn load_solution(out: &Path) -> Result<BassSolution, Failure> {
    let path = out.join(SOLUTION_FILE);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Failure::invalid(format!("missing solve artifacts ({}: {e}); run `bassmbb solve` first", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct MarginalsReport {
    version: u32,
    command: &'static str,
    config_hash: String,
    timestamp: u64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    e0: f64,
    e1: f64,
    #[serde(rename = "E_tr_sigma")]
    e_tr_sigma: f64,
    #[serde(rename = "E_tr_sigma_std_err")]
    e_tr_sigma_std_err: f64,
    /// W₂ between ν and an i.i.d. sample of ν of the same size.
    floor_e1: f64,
    mbb_objective: f64,
}

pub fn simulate(common: &Common) -> Result<u8, Failure> {
    let problem = Problem::load(common)?;
    let solution_path = common.out.join(SOLUTION_FILE);
    let sol = load_solution(&common.out)?;
    let hash = problem.hash("simulate", &[("solution", &solution_path)])?;
    let cfg = &problem.config;
    let d = sol.alpha_hat.dim();
    let model = BassMartingaleModel::from_solution(&sol, BassMartingaleModel::default_rule(d)?, cfg.seed)?;
    let (n_paths, n_steps) = (cfg.simulate.n_paths, cfg.simulate.n_steps);
    let ens = simulate_paths(&model, n_paths, n_steps, cfg.seed)?;
    ens.write_csv(&common.out.join("paths.csv"))?;
    let err = marginal_error(&ens, &problem.mu, &problem.nu)?;
    let tr = expected_trace_sigma_window(&ens, 0.0, 1.0)?;
    let report = MarginalsReport {
        version: crate::config::CONFIG_VERSION,
        command: "simulate",
        config_hash: hash,
        timestamp: timestamp(),
        n_paths,
        n_steps,
        seed: cfg.seed,
        e0: err.e0,
        e1: err.e1,
        e_tr_sigma: tr.mean,
        e_tr_sigma_std_err: tr.std_err,
        floor_e1: resampling_floor(&problem.nu, n_paths, cfg.seed)?,
        mbb_objective: mbb_objective_estimate(&ens),
    };
    write_json(&common.out.join("marginals.json"), &report)?;
    println!("e0: {:.4}, e1: {:.4}, E_tr_sigma: {:.4} ± {:.4}", err.e0, err.e1, tr.mean, tr.std_err);
    Ok(0)
}
