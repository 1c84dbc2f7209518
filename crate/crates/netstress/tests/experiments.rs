use netstress::experiments::{
    fig2_gamma_sweep, fig3_nonlinearity_sweep, figa1_eigen_correlation, nonlinearity_grid, sample_antisymmetric,
    sample_matrix, simulate_observables, stochvol_check, variance_law_check,
};
use netstress::{AppError, Engine};
use netstress_core::analytic::random_matrix_correction;
use netstress_core::{Matrix, ModelParams, SimConfig};

fn engine() -> Engine {
    Engine::new(Some(2)).unwrap()
}

#[test]
fn fig2_theory_column_and_slope_metadata() {
    let base = ModelParams::new(6, 1.0, 0.1, 0.5).unwrap();
    let cfg = SimConfig::new(0.5, 50, 3, base.beta);
    let r = fig2_gamma_sweep(&engine(), &base, &[0.5, 1.0, 2.0], &cfg, 30).unwrap();
    assert_eq!(r.len(), 3);
    for (i, g) in [0.5, 1.0, 2.0].iter().enumerate() {
        let theory = random_matrix_correction(&base.with_gamma(*g).unwrap(), 0.5).unwrap();
        assert_eq!(r.theory[i], theory);
        assert_eq!(r.column("ratio").unwrap()[i], r.mc_mean[i] / theory);
        assert_eq!(r.n_diverged[i], 0);
        assert!(r.mc_stderr[i] > 0.0);
    }
    assert!(r.metadata["log_log_slope"].as_f64().unwrap().is_finite());
}

#[test]
fn fig2_single_matrix_uses_within_matrix_error() {
    let base = ModelParams::new(4, 1.0, 0.1, 1.0).unwrap();
    let cfg = SimConfig::new(0.2, 40, 1, base.beta);
    let r = fig2_gamma_sweep(&engine(), &base, &[1.0], &cfg, 1).unwrap();
    assert!(r.mc_stderr[0] > 0.0);
}

#[test]
fn fig2_rejects_empty_grid() {
    let base = ModelParams::new(4, 1.0, 0.1, 1.0).unwrap();
    let cfg = SimConfig::new(0.2, 4, 1, base.beta);
    assert!(matches!(fig2_gamma_sweep(&engine(), &base, &[], &cfg, 2), Err(AppError::Usage(_))));
}

#[test]
fn fig3_zero_sensitivity_matches_linear_model() {
    let p = ModelParams::new(6, 1.0, 0.1, 1.0).unwrap();
    let cfg = SimConfig::new(0.2, 20, 9, p.beta);
    let specs = nonlinearity_grid(&[0.0, 0.5], &[1.0, 3.0], 2.0).unwrap();
    assert_eq!(specs.len(), 4);
    let r = fig3_nonlinearity_sweep(&engine(), &p, &specs, &cfg, 6).unwrap();
    let ks = r.column("k").unwrap();
    let linear = r.column("linear_mc_mean").unwrap();
    let diff = r.column("diff_mean").unwrap();
    for i in 0..r.len() {
        if ks[i] == 0.0 {
            assert_eq!(r.mc_mean[i], linear[i]);
            assert_eq!(diff[i], 0.0);
        }
        approx::assert_relative_eq!(r.mc_mean[i] - linear[i], diff[i], epsilon = 1e-12);
        assert_eq!(r.column("maturity").unwrap()[i], 2.0);
    }
}

#[test]
fn fig_a1_mean_correlation_near_analytic_value() {
    let p = ModelParams::new(10, 1.0, 0.01, 3.0).unwrap();
    let r = figa1_eigen_correlation(&engine(), &p, 1.0, 400, 4).unwrap();
    let rho = r.metadata["pearson_mean_vs_first_order"].as_f64().unwrap();
    let analytic = r.metadata["pearson_mean_vs_first_order_analytic"].as_f64().unwrap();
    approx::assert_relative_eq!(analytic, 0.9f64.sqrt(), epsilon = 1e-15);
    assert!((rho - analytic).abs() < 0.03, "{rho} vs {analytic}");
    assert!(r.metadata["pearson_variance_vs_second_order"].as_f64().unwrap() > 0.0);
    assert!(figa1_eigen_correlation(&engine(), &p, 1.0, 99, 4).is_err());
}

#[test]
fn variance_law_holds_at_each_time() {
    let p = ModelParams::new(10, 1.0, 0.1, 1.0).unwrap();
    let r = variance_law_check(&engine(), &p, 0.1, 4000, 8).unwrap();
    for (i, ratio) in r.column("ratio").unwrap().iter().enumerate() {
        assert!((ratio - 1.0).abs() < 0.1, "row {i}: ratio {ratio}");
        assert!(((r.mc_mean[i] - r.theory[i]) / r.mc_stderr[i]).abs() < 4.0);
    }
    assert!(variance_law_check(&engine(), &p, 0.2, 100, 8).is_err());
}

#[test]
fn stochvol_effect_is_matrix_independent_for_antisymmetric_coupling() {
    let p = ModelParams::new(6, 1.0, 0.1, 0.5).unwrap().with_volvol(0.5).unwrap();
    let cfg = SimConfig {
        use_stochastic_vol: true,
        antithetic: true,
        ..SimConfig::new(0.2, 4000, 12, p.beta)
    };
    let anti = sample_antisymmetric(6, 12, 1).unwrap();
    assert_eq!(anti.add(&anti.transpose()).unwrap().max_abs(), 0.0);
    let r = stochvol_check(&engine(), &p, &[("antisymmetric".into(), anti)], &cfg).unwrap();
    assert_eq!(r.column("normalized_correction").unwrap()[0], 0.0);
    assert_eq!(r.theory[0], 0.0);
    let z = r.column("z_normalized_plus_level_shift").unwrap()[0];
    assert!(z.abs() < 4.0, "z = {z}");
}

#[test]
fn simulate_rows_are_stress_then_market() {
    let p = ModelParams::new(5, 1.0, 0.5, 0.3).unwrap();
    let m = sample_matrix(5, 2, 0, false).unwrap();
    let cfg = SimConfig::new(0.3, 400, 2, p.beta);
    let r = simulate_observables(&engine(), &p, &m, &cfg).unwrap();
    assert_eq!(r.axis, vec![0.0, 1.0]);
    assert_eq!(r.column("printed_leading").unwrap(), &[0.3, 0.3]);
    for i in 0..2 {
        assert!(((r.mc_mean[i] - r.theory[i]) / r.mc_stderr[i]).abs() < 4.0, "row {i}");
    }
}

#[test]
fn sampled_matrices_are_reproducible_and_distinct() {
    let a = sample_matrix(4, 1, 0, false).unwrap();
    assert_eq!(a, sample_matrix(4, 1, 0, false).unwrap());
    assert_ne!(a, sample_matrix(4, 1, 1, false).unwrap());
    let z = sample_matrix(4, 1, 0, true).unwrap();
    assert!((0..4).all(|i| z[(i, i)] == 0.0));
    assert_eq!(Matrix::identity(3).trace(), 3.0);
}
