use std::path::Path;

use bassmbb_core::bass::BassConfig;
use bassmbb_core::ot::OtMethod;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Failure;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSettings {
    pub n_paths: usize,
    pub n_steps: usize,
}

impl Default for SimulateSettings {
    fn default() -> Self {
        Self { n_paths: 4000, n_steps: 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    /// Largest accepted `|dual − primal|`.
    pub duality_gap_tol: f64,
    pub convexity_profiles: usize,
    pub convexity_grid: usize,
    /// Second differences must stay above `−rel·scale`.
    pub convexity_tol_rel: f64,
    pub rate_h: f64,
    pub rate_tol_rel: f64,
    /// Random α compared against the Bass measure in the rate check.
    pub rate_alphas: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            duality_gap_tol: 0.05,
            convexity_profiles: 20,
            convexity_grid: 9,
            convexity_tol_rel: 1e-6,
            rate_h: 0.05,
            rate_tol_rel: 0.05,
            rate_alphas: 10,
        }
    }
}

/// Everything a run depends on besides the input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: BassConfig,
    #[serde(default)]
    pub simulate: SimulateSettings,
    #[serde(default)]
    pub check: CheckSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            solver: BassConfig::default(),
            simulate: SimulateSettings::default(),
            check: CheckSettings::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::invalid(format!("{name} must be positive, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// Command-line overrides: seed, OT method and entropic ε.
    pub fn apply_overrides(&mut self, seed: Option<u64>, method: Option<&str>, epsilon: Option<f64>) -> Result<(), Failure> {
        if let Some(s) = seed {
            self.seed = s;
        }
        let entropic_default = |epsilon: f64| OtMethod::Entropic { epsilon, max_iter: 5000, tol: 1e-6 };
        match method {
            None => {
                if let Some(eps) = epsilon {
                    match &mut self.solver.method {
                        OtMethod::Entropic { epsilon, .. } => *epsilon = eps,
                        OtMethod::Exact => return Err(Failure::invalid("--epsilon requires --method entropic".into())),
                    }
                }
            }
            Some("exact") => {
                if epsilon.is_some() {
                    return Err(Failure::invalid("--epsilon requires --method entropic".into()));
                }
                self.solver.method = OtMethod::Exact;
            }
            Some("entropic") => {
                self.solver.method = match (self.solver.method, epsilon) {
                    (_, Some(eps)) => entropic_default(eps),
                    (OtMethod::Entropic { .. }, None) => self.solver.method,
                    (OtMethod::Exact, None) => entropic_default(0.05),
                };
            }
            Some(other) => return Err(Failure::invalid(format!("unknown method {other:?} (exact|entropic)"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.version != CONFIG_VERSION {
            return Err(Failure::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.solver.validate()?;
        if let OtMethod::Entropic { epsilon, max_iter, tol } = self.solver.method {
            positive("epsilon", epsilon)?;
            positive("entropic tol", tol)?;
            if max_iter == 0 {
                return Err(Failure::invalid("entropic max_iter must be positive".into()));
            }
        }
        if self.simulate.n_paths < 2 || self.simulate.n_steps == 0 {
            return Err(Failure::invalid("simulate needs n_paths ≥ 2 and n_steps ≥ 1".into()));
        }
        let c = &self.check;
        positive("duality_gap_tol", c.duality_gap_tol)?;
        positive("convexity_tol_rel", c.convexity_tol_rel)?;
        positive("rate_tol_rel", c.rate_tol_rel)?;
        positive("rate_h", c.rate_h)?;
        if c.rate_h > 1.0 {
            return Err(Failure::invalid("rate_h must not exceed 1".into()));
        }
        if c.convexity_grid < 3 {
            return Err(Failure::invalid("convexity_grid needs at least 3 points".into()));
        }
        Ok(())
    }
}

/// SHA-256 over the command, the effective configuration and the contents
/// of every input file.
pub fn config_hash(command: &str, config: &RunConfig, inputs: &[(&str, &Path)]) -> Result<String, Failure> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0]);
    h.update(serde_json::to_vec(config).map_err(|e| Failure::invalid(e.to_string()))?);
    for (name, path) in inputs {
        let bytes = std::fs::read(path).map_err(|e| Failure::io(path, e))?;
        h.update([0]);
        h.update(name.as_bytes());
        h.update([0]);
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(h.finalize()))
}
