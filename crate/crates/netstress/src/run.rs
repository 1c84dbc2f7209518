//! Command dispatch: builds the inputs a [`RunConfig`] describes, runs the
//! experiment and renders the result.

use std::io::Write as _;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use netstress_core::analytic::{
    contraction_terms, correlation_quadrature, expansion_correlations, market_noise_floor, market_uncertainty,
    random_matrix_stress, sign_opposition_check, stochvol_correction, stochvol_correction_normalized,
    stochvol_level_shift, stress_expectation, stress_from_correlations, MarketAverage,
};
use netstress_core::linalg::{eigen_summary, growth_rate, is_stationary};
use netstress_core::model::build_drift_matrix;
use netstress_core::Matrix;

use crate::config::{parse_config, Command, MatrixSource, ParseFailure, RunConfig};
use crate::engine::Engine;
use crate::error::{AppError, Result, EXIT_OK};
use crate::experiments::{
    fig2_gamma_sweep, fig3_nonlinearity_sweep, figa1_eigen_correlation, nonlinearity_grid, sample_antisymmetric,
    sample_matrix, simulate_observables, stochvol_check, variance_law_check,
};
use crate::matrix_io::read_matrix;
use crate::output::{render, FORMAT_TAG};

/// The single matrix a command runs on.
pub fn load_matrix(config: &RunConfig) -> Result<Matrix> {
    let n = config.params.n_banks;
    let m = match config.matrix_source {
        MatrixSource::Gaussian => sample_matrix(n, config.sim.seed, 0, false),
        MatrixSource::GaussianZeroDiag => sample_matrix(n, config.sim.seed, 0, true),
        MatrixSource::Identity => Ok(Matrix::identity(n)),
        MatrixSource::File => {
            let path = config
                .matrix_path
                .as_deref()
                .ok_or_else(|| AppError::Usage("--matrix file requires --matrix-file".into()))?;
            let m = read_matrix(path)?;
            return config
                .params
                .require_matrix(&m)
                .map(|()| m)
                .map_err(|e| AppError::model(path.display().to_string(), e));
        }
    };
    m.map_err(|e| AppError::model("matrix", e))
}

fn source_label(src: MatrixSource) -> &'static str {
    match src {
        MatrixSource::Gaussian => "gaussian",
        MatrixSource::GaussianZeroDiag => "gaussian-zero-diag",
        MatrixSource::File => "file",
        MatrixSource::Identity => "identity",
    }
}

#[derive(Serialize)]
struct Document<'a> {
    format: &'static str,
    config: &'a RunConfig,
    #[serde(flatten)]
    body: Value,
}

fn json_document(config: &RunConfig, body: Value) -> Result<String> {
    let doc = Document {
        format: FORMAT_TAG,
        config,
        body,
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| AppError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| AppError::Serialize(e.to_string()))
}

fn expansion_body(config: &RunConfig, m: &Matrix) -> Result<Value> {
    let p = &config.params;
    let t = config.sim.horizon;
    let ctx = |e| AppError::model("expansion", e);
    let stress = stress_expectation(p, m, t).map_err(ctx)?;
    let (first, second) = contraction_terms(m).map_err(ctx)?;
    let conditional = market_uncertainty(p, m, t, MarketAverage::Conditional).map_err(ctx)?;
    let ensemble = market_uncertainty(p, m, t, MarketAverage::Ensemble).map_err(ctx)?;
    let a_hat = build_drift_matrix(p, m).map_err(ctx)?;
    let eig = eigen_summary(m).map_err(ctx)?;
    let mut body = json!({
        "stress": to_value(&stress)?,
        "contractions": { "first": first, "second": second },
        "random_matrix_stress": random_matrix_stress(p, t).map_err(ctx)?,
        "market_uncertainty": {
            "conditional": to_value(&conditional)?,
            "ensemble": to_value(&ensemble)?,
            "noise_floor": market_noise_floor(p, t).map_err(ctx)?,
        },
        "sign_opposition": sign_opposition_check(m).map_err(ctx)?,
        "stationary": is_stationary(&a_hat).map_err(ctx)?,
        "growth_rate": growth_rate(&a_hat).map_err(ctx)?,
        "eigen_summary": to_value(&eig)?,
    });
    if p.volvol > 0.0 {
        let printed = stochvol_correction(p, m, t).map_err(ctx)?;
        let normalized = stochvol_correction_normalized(p, m, t).map_err(ctx)?;
        let level = stochvol_level_shift(p, t).map_err(ctx)?;
        body["stochastic_vol"] = json!({
            "published": printed,
            "normalized": normalized,
            "level_shift": level,
            "normalized_plus_level_shift": normalized + level,
        });
    }
    Ok(body)
}

fn quadrature_body(config: &RunConfig, m: &Matrix) -> Result<Value> {
    let p = &config.params;
    let t = config.sim.horizon;
    let ctx = |e| AppError::model("quadrature", e);
    let exact = correlation_quadrature(p, m, t, config.experiment.tol).map_err(ctx)?;
    let approx = expansion_correlations(p, m, t).map_err(ctx)?;
    let stress_exact = stress_from_correlations(&exact, p, t).map_err(ctx)?;
    let stress_approx = stress_from_correlations(&approx, p, t).map_err(ctx)?;
    let expansion = stress_expectation(p, m, t).map_err(ctx)?;
    Ok(json!({
        "stress_quadrature": stress_exact,
        "stress_expansion_correlations": stress_approx,
        "stress_expansion": expansion.total,
        "abs_diff": (stress_exact - expansion.total).abs(),
        "rel_diff": ((stress_exact - expansion.total) / stress_exact).abs(),
        "ws_max_abs_diff": exact.ws.max_abs_diff(&approx.ws),
        "ss_max_abs_diff": exact.ss.max_abs_diff(&approx.ss),
        "correlations": to_value(&exact)?,
    }))
}

/// Runs the command and returns the rendered output.
pub fn execute(config: &RunConfig, engine: &Engine) -> Result<String> {
    let p = &config.params;
    let sim = &config.sim;
    let ex = &config.experiment;
    let result = match config.command {
        Command::Expansion => {
            let m = load_matrix(config)?;
            return json_document(config, expansion_body(config, &m)?);
        }
        Command::Quadrature => {
            let m = load_matrix(config)?;
            return json_document(config, quadrature_body(config, &m)?);
        }
        Command::Simulate => simulate_observables(engine, p, &load_matrix(config)?, sim)?,
        Command::Fig2 => fig2_gamma_sweep(engine, p, &ex.gammas, sim, ex.n_matrices)?,
        Command::Fig3 => {
            let specs = nonlinearity_grid(&ex.k_values, &ex.l_values, ex.maturity)?;
            fig3_nonlinearity_sweep(engine, p, &specs, sim, ex.n_matrices)?
        }
        Command::FigA1 => figa1_eigen_correlation(engine, p, sim.horizon, ex.n_matrices, sim.seed)?,
        Command::VarianceCheck => variance_law_check(engine, p, sim.horizon, ex.n_matrices, sim.seed)?,
        Command::StochvolCheck => {
            let chosen = load_matrix(config)?;
            let anti = sample_antisymmetric(p.n_banks, sim.seed, 1).map_err(|e| AppError::model("matrix", e))?;
            let matrices = vec![
                (source_label(config.matrix_source).to_string(), chosen),
                ("antisymmetric".to_string(), anti),
            ];
            stochvol_check(engine, p, &matrices, sim)?
        }
    };
    render(config, &result, config.output_format)
}

/// Runs the command and writes its output to the configured destination.
pub fn run(config: &RunConfig) -> Result<()> {
    let engine = Engine::new(config.threads)?;
    let start = Instant::now();
    let text = execute(config, &engine)?;
    match &config.output_path {
        Some(path) => std::fs::write(path, &text).map_err(|source| AppError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|()| out.flush())
                .map_err(|source| AppError::Io {
                    path: "<stdout>".into(),
                    source,
                })?;
        }
    }
    eprintln!(
        "netstress {}: {:.3} s on {} thread(s)",
        config.command.name(),
        start.elapsed().as_secs_f64(),
        engine.threads()
    );
    Ok(())
}

/// Entry point of the binary; returns the process exit status.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let config = match parse_config(argv) {
        Ok(c) => c,
        Err(ParseFailure::Clap(e)) => {
            let _ = e.print();
            return e.exit_code();
        }
        Err(ParseFailure::App(e)) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&config) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
