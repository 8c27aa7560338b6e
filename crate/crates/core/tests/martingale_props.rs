use bassmbb_core::bass::{minimize_v, BassConfig, BassSolution, SolveStatus};
use bassmbb_core::martingale::{
    expected_trace_sigma, expected_trace_sigma_window, map_vt, martingale_increment_bins, mbb_objective_estimate,
    mcov_rate, simulate_paths, static_value, BassMartingaleModel,
};
use bassmbb_core::measures::{second_moment, DiscreteMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(sd: f64, n: usize) -> DiscreteMeasure {
    DiscreteMeasure::gaussian_quantiles_1d(0.0, sd, n).unwrap()
}

fn solve(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> BassSolution {
    let sol = minimize_v(mu, nu, mu, &BassConfig::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Converged);
    sol
}

fn path_model(sol: &BassSolution, seed: u64) -> BassMartingaleModel {
    BassMartingaleModel::from_solution(sol, BassMartingaleModel::default_rule(1).unwrap(), seed).unwrap()
}

#[test]
fn increments_have_zero_conditional_mean() {
    let sol = solve(&q(1.0, 200), &q(2f64.sqrt(), 200));
    let ens = simulate_paths(&path_model(&sol, 1), 10_000, 5, 1).unwrap();
    for i in 0..5 {
        for j in i + 1..=5 {
            for b in martingale_increment_bins(&ens, i, j, 10).unwrap() {
                assert!(b.z_score().abs() <= 4.0, "({i}, {j}): {b:?}");
            }
        }
    }
}

#[test]
fn smoothed_maps_are_monotone() {
    let nu = DiscreteMeasure::from_1d(&[-2.0, -0.5, 0.0, 1.0, 3.0], &[0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
    let mu = DiscreteMeasure::from_1d(&[0.0, 0.4, 0.8], &[0.3, 0.4, 0.3]).unwrap();
    let sol = minimize_v(&mu, &nu, &mu, &BassConfig::default()).unwrap();
    let model = path_model(&sol, 0);
    for t in [0.0, 0.25, 0.5, 0.9, 1.0] {
        let vals: Vec<f64> = (-600..=600).map(|i| map_vt(&model, &[i as f64 * 0.01], t)[0]).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12), "t = {t}");
    }
}

#[test]
fn rate_inequality_on_the_gaussian_flow() {
    let sol = solve(&q(1.0, 200), &q(2f64.sqrt(), 200));
    let ens = simulate_paths(&path_model(&sol, 2), 10_000, 20, 2).unwrap();
    let (t, h) = (0.3, 0.05);
    let window = expected_trace_sigma_window(&ens, t, t + h).unwrap().mean / h;
    let flow_at = |s: f64| q((1.0 + s).sqrt(), 400);
    let flow = vec![(t, flow_at(t)), (t + h, flow_at(t + h))];
    let scale = 1.0 + window.abs();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let k = rng.gen_range(1..=5);
        let pts: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let ws: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
        let alpha = DiscreteMeasure::from_1d(&pts, &ws).unwrap();
        let rate = mcov_rate(&alpha, &flow, t, h).unwrap();
        assert!(rate >= window - 0.05 * scale, "{rate} < {window}");
    }
    let bass_measure = q((1.0 + t).sqrt(), 200);
    let rate = mcov_rate(&bass_measure, &flow, t, h).unwrap();
    assert!((rate - window).abs() <= 0.05 * scale);
}

#[test]
fn values_agree_on_the_gaussian_instance() {
    let mu = q(1.0, 200);
    let sol = solve(&mu, &q(2f64.sqrt(), 200));
    let rule = BassConfig::default().rule(1).unwrap();
    let p = static_value(&BassMartingaleModel::from_solution(&sol, rule.clone(), 0).unwrap(), &mu, &rule).unwrap().value;
    let tr = expected_trace_sigma(&simulate_paths(&path_model(&sol, 3), 10_000, 10, 3).unwrap());
    assert!((sol.value - p).abs() <= 0.03 * p, "{} vs {p}", sol.value);
    assert!((p - tr).abs() <= 0.05 * p, "{p} vs {tr}");
}

#[test]
fn mbb_objective_matches_the_value_relation() {
    let (mu, nu) = (q(1.0, 200), q(2.0, 200));
    let sol = solve(&mu, &nu);
    let rule = BassConfig::default().rule(1).unwrap();
    let p = static_value(&BassMartingaleModel::from_solution(&sol, rule.clone(), 0).unwrap(), &mu, &rule).unwrap().value;
    let mt = 1.0 + second_moment(&nu) - second_moment(&mu) - 2.0 * p;
    assert!(mt >= 0.0);
    let est = mbb_objective_estimate(&simulate_paths(&path_model(&sol, 5), 20_000, 20, 5).unwrap());
    assert!((est - mt).abs() <= 0.05 * mt, "{est} vs {mt}");
}
