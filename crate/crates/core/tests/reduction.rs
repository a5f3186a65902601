//! Cross-module checks of the two-stage reduction: chain against mean
//! flow in the competitive phase, and reduced-diffusion simulation against
//! the quadrature analytics on the coexistence line.

use rayon::prelude::*;

use coexist::analytics::{build_scale_table, expected_tau, hit_prob_pm};
use coexist::diffusion::{simulate_mstar, Boundary};
use coexist::flow::{integrate_flow, FlowOptions};
use coexist::model::Params;
use coexist::sim::{
    replicate_rng, run_batch, run_to_fixation, state_from_scaled, Extinct, Mode, SimConfig,
};
use coexist::stats::binomial_se;

/// In the competitive phase the scaled chain tracks the integrated mean
/// flow to within the usual root-N fluctuation scale. At N = 30000 a
/// 0.05 sup-norm corridor holds for at least 95% of runs, sampled at
/// matched times until the chain first touches the coexistence line.
/// (At N = 1000 the corridor would need to be ~0.1: the transverse
/// fluctuation is an order-1/sqrt(N) mean-reverting walk and the
/// along-line spread grows like sqrt(t a_mm / N).)
#[test]
fn chain_tracks_mean_flow_in_competitive_phase() {
    let n: u32 = 30_000;
    let q = 0.5;
    let p = Params::new(n, q).unwrap();
    let init = state_from_scaled(1.0 / 3.0, 1.0 / 3.0, p).unwrap();
    let y0 = init.scaled(p);

    let opts = FlowOptions {
        t_max: 100.0,
        ..FlowOptions::default()
    };
    let traj = integrate_flow(y0, q, &opts).unwrap();

    let sample_every = 0.01; // flow time between comparisons
    let steps_per_sample = (sample_every / opts.dt).round() as usize;
    let nf = f64::from(n);

    let runs = 100u64;
    let ok = (0..runs)
        .into_par_iter()
        .filter(|&i| {
            let mut cfg = SimConfig::new(p, init, Mode::ToGammaOrExtinction);
            cfg.record_path = true;
            let mut rng = replicate_rng(31_000, i);
            let (rec, path) = run_to_fixation(&cfg, &mut rng).unwrap();
            let stop = rec.tau_gamma.or(rec.tau_e).unwrap();
            let path = path.unwrap();
            let mut sup: f64 = 0.0;
            let mut cursor = 0usize;
            for (k, flow_idx) in (steps_per_sample..traj.points.len())
                .step_by(steps_per_sample)
                .enumerate()
            {
                let t_flow = (k + 1) as f64 * sample_every;
                let t_chain = t_flow * nf;
                if t_chain >= stop {
                    break;
                }
                while cursor + 1 < path.samples.len() && path.samples[cursor + 1].0 <= t_chain {
                    cursor += 1;
                }
                let (_, state) = path.samples[cursor];
                let (_, flow_pt) = traj.points[flow_idx];
                let dd = (state.d as f64 / nf - flow_pt.d()).abs();
                let dm = (state.m as f64 / nf - flow_pt.m()).abs();
                sup = sup.max(dd.max(dm));
            }
            sup <= 0.05
        })
        .count();
    assert!(
        ok >= 95,
        "only {ok}/{runs} chain paths stayed within the 0.05 corridor"
    );
}

/// The quadrature analytics and the Euler-Maruyama simulation of the
/// reduced diffusion agree within Monte Carlo resolution across the line:
/// absorption probability at 0 and mean absorption time, 10^4 paths per
/// starting point.
#[test]
fn em_paths_match_quadrature_analytics() {
    let q = 0.5;
    let dt = 1e-4;
    let n_paths = 10_000u64;
    let table = build_scale_table(q, 1000, 1e-6).unwrap();
    let mut xs: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    xs.push(1.0 / 3.0);
    for (j, &x0) in xs.iter().enumerate() {
        let results: Vec<(bool, f64)> = (0..n_paths)
            .into_par_iter()
            .map(|i| {
                let mut rng = replicate_rng(500 + j as u64, i);
                let (boundary, tau) = simulate_mstar(x0, q, dt, &mut rng).unwrap();
                (boundary == Boundary::Zero, tau)
            })
            .collect();
        let hits = results.iter().filter(|(zero, _)| *zero).count() as u64;
        let p_hat = hits as f64 / n_paths as f64;
        let p_se = binomial_se(p_hat, n_paths).max(1e-4);
        let p_ref = hit_prob_pm(x0, &table);
        assert!(
            (p_hat - p_ref).abs() <= 3.0 * p_se,
            "p_M at x0 = {x0}: EM {p_hat} vs quadrature {p_ref}"
        );

        let taus: Vec<f64> = results.iter().map(|(_, t)| *t).collect();
        let mean = taus.iter().sum::<f64>() / taus.len() as f64;
        let var = taus.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (taus.len() - 1) as f64;
        let se = (var / taus.len() as f64).sqrt();
        let tau_ref = expected_tau(x0, &table);
        assert!(
            (mean - tau_ref).abs() <= 3.0 * se,
            "E[tau] at x0 = {x0}: EM {mean} vs quadrature {tau_ref}"
        );
    }
}

/// Chain extinction statistics against the analytics at small N: the
/// fraction of runs whose first extinction is the generalist matches the
/// quadrature probability at the realized start.
#[test]
fn chain_extinction_fraction_matches_analytics_at_small_n() {
    let p = Params::new(100, 0.5).unwrap();
    let init = state_from_scaled(0.0, 1.0 / 3.0, p).unwrap();
    assert_eq!((init.d, init.m), (0, 34));
    let cfg = SimConfig::new(p, init, Mode::ToFirstExtinction);
    let records = run_batch(&cfg, 1000, 99).unwrap();
    let m_first = records
        .iter()
        .filter(|r| r.first_extinct == Some(Extinct::M))
        .count() as u64;
    let p_hat = m_first as f64 / 1000.0;
    let table = build_scale_table(0.5, 1000, 1e-6).unwrap();
    let p_ref = hit_prob_pm(0.34, &table);
    let se = binomial_se(p_hat, 1000);
    assert!(
        (p_hat - p_ref).abs() <= 3.0 * se,
        "chain {p_hat} vs analytic {p_ref} (se {se})"
    );
}
