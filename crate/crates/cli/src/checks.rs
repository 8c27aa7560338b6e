use bassmbb_core::duality::{duality_gap, DualityReport};
use bassmbb_core::geometry::{convexity_profile, uniform_grid, ConvexityProfile, Functional, GeodesicCurve};
use bassmbb_core::martingale::{expected_trace_sigma_window, flow_marginal, mcov_rate_with, simulate_paths, BassMartingaleModel};
use bassmbb_core::measures::{check_convex_order, ConvexOrderCertificate, DiscreteMeasure};
use bassmbb_core::ot::OtMethod;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::commands::{timestamp, write_json, Problem};
use crate::{CheckKind, Common, Failure};

#[derive(Serialize)]
struct CheckReport<T: Serialize> {
    version: u32,
    command: String,
    config_hash: String,
    timestamp: u64,
    passed: bool,
    /// Name of the violated quantity when the check fails.
    violated: Option<String>,
    details: T,
}

/// Runs one check, writes `check_<which>.json` and returns 0 (pass) or a
/// code-4 failure naming the violated quantity.
pub fn run(which: CheckKind, common: &Common) -> Result<u8, Failure> {
    let problem = Problem::load(common)?;
    let command = format!("check {}", which.name());
    let hash = problem.hash(&command, &[])?;
    let (violated, details) = match which {
        CheckKind::Order => order(&problem)?,
        CheckKind::Duality => duality(&problem, common)?,
        CheckKind::Convexity => convexity(&problem, common)?,
        CheckKind::Rate => rate(&problem, common)?,
    };
    let passed = violated.is_none();
    write_json(
        &common.out.join(format!("check_{}.json", which.name())),
        &CheckReport { version: crate::config::CONFIG_VERSION, command, config_hash: hash, timestamp: timestamp(), passed, violated: violated.clone(), details },
    )?;
    match violated {
        None => {
            println!("{}: pass", which.name());
            Ok(0)
        }
        Some(v) => Err(Failure::check(format!("{} check failed: {v}", which.name()))),
    }
}

type Outcome = (Option<String>, serde_json::Value);

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::invalid(e.to_string()))
}

fn order(p: &Problem) -> Result<Outcome, Failure> {
    let report = check_convex_order(&p.mu, &p.nu)?;
    let violated = (!report.in_order).then(|| match &report.certificate {
        ConvexOrderCertificate::MeanMismatch { .. } => "barycenters differ".to_string(),
        ConvexOrderCertificate::ViolatedCall { strike, excess } => {
            format!("call price at strike {strike} exceeds the target's by {excess:.3e}")
        }
        _ => "no martingale coupling exists".to_string(),
    });
    Ok((violated, to_value(&report)?))
}

#[derive(Serialize)]
struct DualityDetails {
    status: bassmbb_core::bass::SolveStatus,
    solver_value: f64,
    #[serde(flatten)]
    report: DualityReport,
    gap_tol: f64,
}

fn duality(p: &Problem, common: &Common) -> Result<Outcome, Failure> {
    let sol = p.solve(common)?;
    let rule = p.config.solver.rule(p.mu.dim())?;
    let report = duality_gap(&sol, &p.mu, &p.nu, &rule)?;
    let gap_tol = p.config.check.duality_gap_tol;
    let violated = if report.violated {
        Some(format!("weak duality: dual {:.6} < primal {:.6}", report.dual_value, report.primal_value))
    } else if report.gap.abs() > gap_tol {
        Some(format!("duality gap |{:.4e}| > {gap_tol}", report.gap))
    } else {
        None
    };
    Ok((violated, to_value(&DualityDetails { status: sol.status, solver_value: sol.value, report, gap_tol })?))
}

/// 1–4 atoms with coordinates in `[-radius, radius]` and random weights.
fn random_measure(rng: &mut ChaCha8Rng, dim: usize, radius: f64) -> Result<DiscreteMeasure, Failure> {
    let k = rng.gen_range(1..=4);
    let pts: Vec<f64> = (0..k * dim).map(|_| rng.gen_range(-radius..=radius)).collect();
    let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
    Ok(DiscreteMeasure::from_flat(dim, pts, ws)?)
}

fn support_radius(ms: &[&DiscreteMeasure]) -> f64 {
    1.0 + ms.iter().flat_map(|m| m.flat_points()).fold(0.0f64, |a, x| a.max(x.abs()))
}

#[derive(Serialize)]
struct ConvexityDetails {
    curve: &'static str,
    profiles: usize,
    tol_rel: f64,
    worst_relative_second_difference: f64,
    worst: Option<ConvexityProfile>,
}

fn convexity(p: &Problem, common: &Common) -> Result<Outcome, Failure> {
    let d = p.mu.dim();
    let cfg = &p.config;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let radius = support_radius(&[&p.mu, &p.nu]);
    let grid = uniform_grid(cfg.check.convexity_grid);
    let mut worst: Option<ConvexityProfile> = None;
    let mut worst_rel = f64::INFINITY;
    for _ in 0..cfg.check.convexity_profiles {
        let a0 = random_measure(&mut rng, d, radius)?;
        let a1 = random_measure(&mut rng, d, radius)?;
        // McCann geodesics in d = 1, generalized geodesics with base μ above
        let curve = if d == 1 { GeodesicCurve::mccann_1d(&a0, &a1)? } else { GeodesicCurve::generalized(&a0, &a1, &p.mu)? };
        let prof = convexity_profile(Functional::V, &curve, &p.mu, &p.nu, &grid, &cfg.solver)?;
        let rel = prof.min_second_difference / prof.scale;
        if rel < worst_rel {
            worst_rel = rel;
            worst = Some(prof);
        }
    }
    if let Some(w) = &worst {
        w.save_csv(&common.out.join("convexity_profile.csv"))?;
    }
    let tol = cfg.check.convexity_tol_rel;
    let violated = (worst_rel < -tol).then(|| format!("second difference {worst_rel:.3e}·scale below −{tol:e}·scale"));
    let details = ConvexityDetails {
        curve: if d == 1 { "mccann_1d" } else { "generalized_base_mu" },
        profiles: cfg.check.convexity_profiles,
        tol_rel: tol,
        worst_relative_second_difference: worst_rel,
        worst,
    };
    Ok((violated, to_value(&details)?))
}

#[derive(Serialize)]
struct RateDetails {
    h: f64,
    bass_rate: f64,
    path_rate: f64,
    path_rate_std_err: f64,
    tol_rel: f64,
    random_rates: Vec<f64>,
}

fn rate(p: &Problem, common: &Common) -> Result<Outcome, Failure> {
    let cfg = &p.config;
    let h = cfg.check.rate_h;
    let steps = (1.0 / h).round();
    if ((1.0 / h) - steps).abs() > 1e-9 {
        return Err(Failure::invalid(format!("rate_h = {h} must divide 1")));
    }
    let sol = p.solve(common)?;
    let d = sol.alpha_hat.dim();
    let rule = BassMartingaleModel::default_rule(d)?;
    let model = BassMartingaleModel::from_solution(&sol, rule.clone(), cfg.seed)?;
    let flow = vec![(0.0, flow_marginal(&model, 0.0, &rule)?), (h, flow_marginal(&model, h, &rule)?)];
    let smooth_rule = cfg.solver.rule(d)?;
    let rate_of = |a: &DiscreteMeasure| mcov_rate_with(a, &flow, 0.0, h, &smooth_rule, &OtMethod::Exact);
    let bass_rate = rate_of(&sol.alpha_hat)?;
    let ens = simulate_paths(&model, cfg.simulate.n_paths, steps as usize, cfg.seed)?;
    let window = expected_trace_sigma_window(&ens, 0.0, h)?;
    let (path_rate, path_se) = (window.mean / h, window.std_err / h);
    let tol = cfg.check.rate_tol_rel;
    let scale = 1.0 + path_rate.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let radius = support_radius(&[&sol.alpha_hat]);
    let random_rates = (0..cfg.check.rate_alphas)
        .map(|_| rate_of(&random_measure(&mut rng, d, radius)?).map_err(Failure::from))
        .collect::<Result<Vec<f64>, Failure>>()?;
    let violated = if (bass_rate - path_rate).abs() > tol * path_rate.abs().max(1e-12) + 3.0 * path_se {
        Some(format!("Bass-measure rate {bass_rate:.4} differs from the path rate {path_rate:.4} ± {path_se:.4}"))
    } else if let Some(r) = random_rates.iter().find(|r| **r < path_rate - tol * scale) {
        Some(format!("rate {r:.4} of a random α falls below the path rate {path_rate:.4}"))
    } else {
        None
    };
    let details = RateDetails { h, bass_rate, path_rate, path_rate_std_err: path_se, tol_rel: tol, random_rates };
    Ok((violated, to_value(&details)?))
}
