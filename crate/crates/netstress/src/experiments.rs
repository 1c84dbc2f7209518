//! Parameter sweeps behind the figures and consistency checks.
//!
//! Matrices are drawn from the matrix stream of the run seed, matrix `k`
//! from stream index `k`, and shared by every sweep point (common random
//! numbers across γ or across nonlinearity cells). Trials of matrix `k` use
//! the derived seed `derive_seed(seed, k)`. Theory columns only ever come
//! from the analytic module.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use netstress_core::analytic::{
    contraction_terms, correction_variance, random_matrix_correction, stochvol_correction,
    stochvol_correction_normalized, stochvol_level_shift, stress_expectation,
};
use netstress_core::linalg::{eigen_summary, growth_rate};
use netstress_core::model::{build_drift_matrix, sample_gaussian_matrix, zero_diagonal};
use netstress_core::rng::{self, derive_seed, Domain};
use netstress_core::simulate::{
    self, observe_trial, simulate_coupled, stochvol_delta_trial, stress, PathVariant,
    MAX_DIVERGED_FRACTION,
};
use netstress_core::stats::{log_log_slope, mean_and_stderr, pearson, sample_variance};
use netstress_core::{Error as CoreError, Matrix, ModelParams, NonlinearSpec, Observable, SimConfig};

use crate::engine::Engine;
use crate::error::{AppError, Result};

/// Largest `growth_rate · horizon` accepted before a sweep refuses to run:
/// half the exponent range of `f64`, leaving room for the squared states.
pub const MAX_GROWTH_EXPONENT: f64 = 354.0;

/// Named extra column of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    /// Header name.
    pub name: String,
    /// One value per axis point.
    #[serde(with = "nan_as_null")]
    pub values: Vec<f64>,
}

/// Tabular result of a sweep: one row per axis point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    /// Experiment identifier.
    pub experiment: String,
    /// Meaning of the axis column.
    pub axis_name: String,
    /// Swept values.
    #[serde(with = "nan_as_null")]
    pub axis: Vec<f64>,
    /// Monte Carlo (or sampled) estimate per point.
    #[serde(with = "nan_as_null")]
    pub mc_mean: Vec<f64>,
    /// Standard error of `mc_mean`.
    #[serde(with = "nan_as_null")]
    pub mc_stderr: Vec<f64>,
    /// Analytic prediction per point.
    #[serde(with = "nan_as_null")]
    pub theory: Vec<f64>,
    /// Trials excluded as diverged per point.
    pub n_diverged: Vec<usize>,
    /// Additional per-point columns.
    pub extra: Vec<Column>,
    /// Parameters and summary statistics.
    pub metadata: BTreeMap<String, Value>,
}

impl SweepResult {
    fn new(experiment: &str, axis_name: &str) -> Self {
        Self {
            experiment: experiment.into(),
            axis_name: axis_name.into(),
            axis: Vec::new(),
            mc_mean: Vec::new(),
            mc_stderr: Vec::new(),
            theory: Vec::new(),
            n_diverged: Vec::new(),
            extra: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    fn push(&mut self, axis: f64, mean: f64, stderr: f64, theory: f64, diverged: usize) {
        self.axis.push(axis);
        self.mc_mean.push(mean);
        self.mc_stderr.push(stderr);
        self.theory.push(theory);
        self.n_diverged.push(diverged);
    }

    fn add_column(&mut self, name: &str, values: Vec<f64>) {
        self.extra.push(Column {
            name: name.into(),
            values,
        });
    }

    fn meta(&mut self, key: &str, value: Value) {
        self.metadata.insert(key.into(), value);
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.axis.len()
    }

    /// True when there are no rows.
    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    /// Extra column by name.
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.extra.iter().find(|c| c.name == name).map(|c| c.values.as_slice())
    }

    /// Checks that all columns have one value per row and standard errors
    /// are non-negative.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let n = self.axis.len();
        let lens = [self.mc_mean.len(), self.mc_stderr.len(), self.theory.len(), self.n_diverged.len()];
        if lens.iter().any(|l| *l != n) {
            return Err(format!("column lengths {lens:?} differ from axis length {n}"));
        }
        if let Some(c) = self.extra.iter().find(|c| c.values.len() != n) {
            return Err(format!("column `{}` has {} values for {n} rows", c.name, c.values.len()));
        }
        if self.mc_stderr.iter().any(|s| *s < 0.0) {
            return Err("negative standard error".into());
        }
        Ok(())
    }
}

/// Serialises NaN as JSON `null` and reads it back.
mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opts: Vec<Option<f64>> = values.iter().map(|v| v.is_finite().then_some(*v)).collect();
        opts.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opts = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opts.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }
}

/// Gaussian matrix number `index` of the run `seed`.
pub fn sample_matrix(n: usize, seed: u64, index: u64, no_self_interaction: bool) -> netstress_core::Result<Matrix> {
    let m = sample_gaussian_matrix(n, &mut rng::stream(seed, Domain::Matrices, index))?;
    if no_self_interaction {
        zero_diagonal(&m)
    } else {
        Ok(m)
    }
}

/// Antisymmetric matrix `(G - Gᵀ)/√2` built from Gaussian matrix `index`.
pub fn sample_antisymmetric(n: usize, seed: u64, index: u64) -> netstress_core::Result<Matrix> {
    let g = sample_matrix(n, seed, index, false)?;
    Ok(g.sub(&g.transpose())?.scale(std::f64::consts::FRAC_1_SQRT_2))
}

fn sample_matrices(engine: &Engine, n: usize, seed: u64, count: usize) -> Result<Vec<Matrix>> {
    engine
        .map(count, |k| sample_matrix(n, seed, k as u64, false))
        .into_iter()
        .collect::<netstress_core::Result<Vec<_>>>()
        .map_err(|e| AppError::model("sampling matrices", e))
}

fn params_record(p: &ModelParams) -> Value {
    json!({
        "n_banks": p.n_banks,
        "sigma": p.sigma,
        "beta": p.beta,
        "gamma": p.gamma,
        "volvol": p.volvol,
    })
}

fn sim_record(cfg: &SimConfig) -> Value {
    json!({
        "horizon": cfg.horizon,
        "dt": cfg.dt,
        "step": cfg.step_size(),
        "n_steps": cfg.n_steps(),
        "n_trials": cfg.n_trials,
        "seed": cfg.seed,
        "antithetic": cfg.antithetic,
        "use_stochastic_vol": cfg.use_stochastic_vol,
    })
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

/// Refuses to simulate when some drift matrix makes `e^{rate·t}` leave the
/// floating point range.
fn check_growth(engine: &Engine, params: &ModelParams, mats: &[Matrix], horizon: f64, label: &str) -> Result<()> {
    let rates = engine.map(mats.len(), |k| {
        build_drift_matrix(params, &mats[k]).and_then(|a| growth_rate(&a))
    });
    for (k, rate) in rates.into_iter().enumerate() {
        let rate = rate.map_err(|e| AppError::model(label, e))?;
        if rate * horizon > MAX_GROWTH_EXPONENT {
            return Err(AppError::Divergence(format!(
                "{label}: drift matrix of sample {k} grows at rate {rate:.4}; over horizon {horizon} \
                 the states overflow (rate*t = {:.1} > {MAX_GROWTH_EXPONENT})",
                rate * horizon
            )));
        }
    }
    Ok(())
}

fn check_divergence(values: usize, diverged: usize, label: &str) -> Result<()> {
    if diverged == values || diverged as f64 > MAX_DIVERGED_FRACTION * values as f64 {
        return Err(AppError::model(
            label,
            CoreError::TrialsDiverged {
                diverged,
                trials: values,
            },
        ));
    }
    Ok(())
}

/// Mean over matrices of per-matrix values with its standard error; with a
/// single matrix the within-matrix standard error is used.
fn across_matrices(per_matrix: &[f64], single_se: f64) -> (f64, f64) {
    let (mean, se) = mean_and_stderr(per_matrix);
    if per_matrix.len() < 2 {
        (mean, single_se)
    } else {
        (mean, se)
    }
}

/// Interaction correction of the ensemble stress as a function of γ.
///
/// For every γ the Monte Carlo stress of each sampled matrix, minus `σ²t`,
/// is averaged over matrices; the theory column is the ensemble cubic term
/// `σ²βγ²(N+1)t³/3`.
pub fn fig2_gamma_sweep(
    engine: &Engine,
    base: &ModelParams,
    gammas: &[f64],
    cfg: &SimConfig,
    n_matrices: usize,
) -> Result<SweepResult> {
    if gammas.is_empty() {
        return Err(usage("fig2 needs at least one gamma"));
    }
    if n_matrices == 0 {
        return Err(usage("fig2 needs at least one matrix"));
    }
    cfg.validate(base).map_err(|e| AppError::model("fig2", e))?;
    let n = base.n_banks;
    let t = cfg.horizon;
    let s2t = base.sigma * base.sigma * t;
    let trials = cfg.n_trials;
    let mats = sample_matrices(engine, n, cfg.seed, n_matrices)?;

    let mut out = SweepResult::new("fig2", "gamma");
    let mut ratio = Vec::new();
    let mut bound_held = Vec::new();
    for &gamma in gammas {
        let label = format!("gamma = {gamma}");
        let params = base.with_gamma(gamma).map_err(|e| AppError::model(&label, e))?;
        check_growth(engine, &params, &mats, t, &label)?;
        let values = engine.map(n_matrices * trials, |idx| {
            let (k, j) = (idx / trials, idx % trials);
            let cfg_k = SimConfig {
                seed: derive_seed(cfg.seed, k as u64),
                ..*cfg
            };
            observe_trial(&params, &mats[k], &cfg_k, Observable::Stress, j as u64)
        });
        let diverged = values.iter().filter(|v| v.is_none()).count();
        check_divergence(values.len(), diverged, &label)?;
        let mut per_matrix = Vec::with_capacity(n_matrices);
        let mut single_se = 0.0;
        for (k, chunk) in values.chunks(trials).enumerate() {
            let est = simulate::aggregate(chunk, cfg.antithetic)
                .map_err(|e| AppError::model(format!("{label}, matrix {k}"), e))?;
            per_matrix.push(est.mean - s2t);
            single_se = est.std_error;
        }
        let (mean, se) = across_matrices(&per_matrix, single_se);
        let theory = random_matrix_correction(&params, t).map_err(|e| AppError::model(&label, e))?;
        ratio.push(if theory != 0.0 { mean / theory } else { f64::NAN });
        bound_held.push(if mean + 3.0 * se >= theory { 1.0 } else { 0.0 });
        out.push(gamma, mean, se, theory, diverged);
    }
    out.add_column("ratio", ratio);
    out.add_column("lower_bound_held", bound_held);

    let positive: Vec<usize> = (0..out.len()).filter(|i| out.axis[*i] > 0.0).collect();
    let xs: Vec<f64> = positive.iter().map(|i| out.axis[*i]).collect();
    let ys: Vec<f64> = positive.iter().map(|i| out.mc_mean[*i]).collect();
    let slope = if xs.len() >= 2 { log_log_slope(&xs, &ys) } else { f64::NAN };
    out.meta("log_log_slope", json_f64(slope));
    out.meta("params", params_record(base));
    out.meta("sim", sim_record(cfg));
    out.meta("n_matrices", json!(n_matrices));
    out.meta("matrix_ensemble", json!("iid standard normal"));
    Ok(out)
}

fn json_f64(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Default grid of nonlinearity cells: every `(k, l)` pair.
pub fn nonlinearity_grid(ks: &[f64], ls: &[f64], maturity: f64) -> Result<Vec<NonlinearSpec>> {
    let mut specs = Vec::with_capacity(ks.len() * ls.len());
    for &k in ks {
        for &l in ls {
            specs.push(NonlinearSpec::new(k, l, maturity).map_err(|e| AppError::model(format!("k = {k}, l = {l}"), e))?);
        }
    }
    Ok(specs)
}

/// Stress correction under bond-style exposure nonlinearities, against the
/// linear model driven by the same noise and matrices.
pub fn fig3_nonlinearity_sweep(
    engine: &Engine,
    params: &ModelParams,
    specs: &[NonlinearSpec],
    cfg: &SimConfig,
    n_matrices: usize,
) -> Result<SweepResult> {
    if specs.is_empty() {
        return Err(usage("fig3 needs at least one (k, l) cell"));
    }
    if n_matrices == 0 {
        return Err(usage("fig3 needs at least one matrix"));
    }
    for s in specs {
        s.validate().map_err(|e| AppError::model("fig3", e))?;
    }
    cfg.validate(params).map_err(|e| AppError::model("fig3", e))?;
    let n = params.n_banks;
    let t = cfg.horizon;
    let s2t = params.sigma * params.sigma * t;
    let trials = cfg.n_trials;
    let mats = sample_matrices(engine, n, cfg.seed, n_matrices)?;

    let mut variants = vec![PathVariant {
        use_stochastic_vol: false,
        nonlinear: None,
    }];
    variants.extend(specs.iter().map(|s| PathVariant {
        use_stochastic_vol: false,
        nonlinear: Some(*s),
    }));
    let linear_cfg = SimConfig {
        nonlinear: None,
        use_stochastic_vol: false,
        ..*cfg
    };
    let rows: Vec<Vec<Option<f64>>> = engine.map(n_matrices * trials, |idx| {
        let (k, j) = (idx / trials, idx % trials);
        let cfg_k = SimConfig {
            seed: derive_seed(cfg.seed, k as u64),
            ..linear_cfg
        };
        match simulate_coupled(params, &mats[k], &cfg_k, &variants, j as u64) {
            Ok(states) => states
                .iter()
                .map(|s| {
                    let y = stress(&s.x);
                    (s.is_finite() && y.is_finite()).then_some(y)
                })
                .collect(),
            Err(_) => vec![None; variants.len()],
        }
    });

    let linear: Vec<Option<f64>> = rows.iter().map(|r| r[0]).collect();
    let linear_diverged = linear.iter().filter(|v| v.is_none()).count();
    check_divergence(linear.len(), linear_diverged, "linear baseline")?;
    let mut linear_per_matrix = Vec::with_capacity(n_matrices);
    for chunk in linear.chunks(trials) {
        let vals: Vec<f64> = chunk.iter().flatten().copied().collect();
        linear_per_matrix.push(mean_and_stderr(&vals).0 - s2t);
    }
    let (linear_mean, _) = mean_and_stderr(&linear_per_matrix);

    let theory = random_matrix_correction(params, t).map_err(|e| AppError::model("fig3", e))?;
    let mut out = SweepResult::new("fig3", "cell");
    let (mut ks, mut ls, mut mats_col) = (Vec::new(), Vec::new(), Vec::new());
    let (mut linear_col, mut diff_mean, mut diff_se, mut frac_above) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (c, spec) in specs.iter().enumerate() {
        let label = format!("k = {}, l = {}", spec.sensitivity, spec.cap);
        let col: Vec<Option<f64>> = rows.iter().map(|r| r[c + 1]).collect();
        let diverged = col.iter().filter(|v| v.is_none()).count();
        check_divergence(col.len(), diverged, &label)?;
        let mut per_matrix = Vec::with_capacity(n_matrices);
        let mut diffs = Vec::with_capacity(n_matrices);
        let mut single_se = (0.0, 0.0);
        for k in 0..n_matrices {
            let range = k * trials..(k + 1) * trials;
            let ys: Vec<f64> = col[range.clone()].iter().flatten().copied().collect();
            let ds: Vec<f64> = col[range.clone()]
                .iter()
                .zip(&linear[range])
                .filter_map(|(a, b)| Some((*a)? - (*b)?))
                .collect();
            let (my, sy) = mean_and_stderr(&ys);
            let (md, sd) = mean_and_stderr(&ds);
            per_matrix.push(my - s2t);
            diffs.push(md);
            single_se = (sy, sd);
        }
        let (mean, se) = across_matrices(&per_matrix, single_se.0);
        let (dm, dse) = across_matrices(&diffs, single_se.1);
        out.push(c as f64, mean, se, theory, diverged);
        ks.push(spec.sensitivity);
        ls.push(spec.cap);
        mats_col.push(spec.maturity);
        linear_col.push(linear_mean);
        diff_mean.push(dm);
        diff_se.push(dse);
        frac_above.push(diffs.iter().filter(|d| **d > 0.0).count() as f64 / diffs.len() as f64);
    }
    out.add_column("k", ks);
    out.add_column("l", ls);
    out.add_column("maturity", mats_col);
    out.add_column("linear_mc_mean", linear_col);
    out.add_column("diff_mean", diff_mean);
    out.add_column("diff_stderr", diff_se);
    out.add_column("frac_matrices_above_linear", frac_above);
    out.meta("params", params_record(params));
    out.meta("sim", sim_record(cfg));
    out.meta("n_matrices", json!(n_matrices));
    out.meta("linear_n_diverged", json!(linear_diverged));
    Ok(out)
}

/// Eigenvalue statistics of sampled matrices against the two contractions
/// of the stress expansion.
///
/// Per matrix: `mc_mean` holds the first-order contraction
/// `tr M - (1/N) Σ M_ij` and `theory` the second-order contraction; the
/// extra columns hold the eigenvalue mean and variance and the scaled
/// expansion terms for `params` at time `t`.
pub fn figa1_eigen_correlation(
    engine: &Engine,
    params: &ModelParams,
    t: f64,
    n_matrices: usize,
    seed: u64,
) -> Result<SweepResult> {
    if n_matrices < 100 {
        return Err(usage(format!("figA1 needs at least 100 matrices, got {n_matrices}")));
    }
    params.validate().map_err(|e| AppError::model("figA1", e))?;
    let n = params.n_banks;
    let rows = engine.map(n_matrices, |k| -> netstress_core::Result<[f64; 7]> {
        let m = sample_matrix(n, seed, k as u64, false)?;
        let eig = eigen_summary(&m)?;
        let (first, second) = contraction_terms(&m)?;
        let e = stress_expectation(params, &m, t)?;
        Ok([
            eig.mean_eigenvalue,
            eig.eigenvalue_variance,
            first,
            second,
            e.order_gamma,
            e.order_gamma2,
            if eig.max_real_part_exact { 1.0 } else { 0.0 },
        ])
    });
    let rows = rows
        .into_iter()
        .collect::<netstress_core::Result<Vec<_>>>()
        .map_err(|e| AppError::model("figA1", e))?;
    let col = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i]).collect() };
    let mut out = SweepResult::new("figA1", "matrix");
    for (k, r) in rows.iter().enumerate() {
        out.push(k as f64, r[2], 0.0, r[3], 0);
    }
    let (eig_mean, eig_var, first, second) = (col(0), col(1), col(2), col(3));
    let nf = n as f64;
    out.meta("pearson_mean_vs_first_order", json_f64(pearson(&eig_mean, &first)));
    out.meta("pearson_variance_vs_second_order", json_f64(pearson(&eig_var, &second)));
    out.meta("pearson_mean_vs_first_order_analytic", json!(((nf - 1.0) / nf).sqrt()));
    out.meta("eigensolver_fallbacks", json!(rows.iter().filter(|r| r[6] == 0.0).count()));
    out.add_column("eig_mean", eig_mean);
    out.add_column("eig_variance", eig_var);
    out.add_column("order_gamma", col(4));
    out.add_column("order_gamma2", col(5));
    out.meta("params", params_record(params));
    out.meta("t", json!(t));
    out.meta("seed", json!(seed));
    out.meta("n_matrices", json!(n_matrices));
    Ok(out)
}

/// Sample variance across matrices of the closed-form stress expectation at
/// `t`, `t/2` and `t/4`, against `σ⁴βγ²t⁴/(N-1)`.
pub fn variance_law_check(
    engine: &Engine,
    params: &ModelParams,
    t: f64,
    n_matrices: usize,
    seed: u64,
) -> Result<SweepResult> {
    params.validate().map_err(|e| AppError::model("variance-check", e))?;
    if !(t > 0.0 && params.beta * t <= 0.01 * (1.0 + 1e-12)) {
        return Err(usage(format!(
            "variance-check needs 0 < beta*t <= 0.01, got beta*t = {}",
            params.beta * t
        )));
    }
    if n_matrices < 4 {
        return Err(usage(format!("variance-check needs at least 4 matrices, got {n_matrices}")));
    }
    let n = params.n_banks;
    let times = [t, t / 2.0, t / 4.0];
    let totals = engine.map(n_matrices, |k| -> netstress_core::Result<[f64; 3]> {
        let m = sample_matrix(n, seed, k as u64, false)?;
        let mut out = [0.0; 3];
        for (o, tau) in out.iter_mut().zip(times) {
            *o = stress_expectation(params, &m, tau)?.total;
        }
        Ok(out)
    });
    let totals = totals
        .into_iter()
        .collect::<netstress_core::Result<Vec<_>>>()
        .map_err(|e| AppError::model("variance-check", e))?;
    let mut out = SweepResult::new("variance-check", "t");
    let mut ratio = Vec::new();
    for (i, tau) in times.iter().enumerate() {
        let vals: Vec<f64> = totals.iter().map(|r| r[i]).collect();
        let var = sample_variance(&vals);
        let se = variance_stderr(&vals, var);
        let theory = correction_variance(params, *tau).map_err(|e| AppError::model("variance-check", e))?;
        ratio.push(if theory != 0.0 { var / theory } else { f64::NAN });
        out.push(*tau, var, se, theory, 0);
    }
    out.add_column("ratio", ratio);
    out.meta("params", params_record(params));
    out.meta("seed", json!(seed));
    out.meta("n_matrices", json!(n_matrices));
    out.meta("route", json!("closed-form expansion per sampled matrix"));
    Ok(out)
}

/// Standard error of a sample variance from the fourth central moment.
fn variance_stderr(vals: &[f64], var: f64) -> f64 {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let v = (m4 - var * var * (n - 3.0) / (n - 1.0)) / n;
    v.max(0.0).sqrt()
}

/// Paired (common random numbers) Monte Carlo effect of stochastic
/// volatility on the stress, per labelled matrix.
///
/// `theory` is the published correction; the extra columns give the same
/// term with the `1/(N-1)` stress normalisation, the matrix-independent
/// level shift from `E σ(t)²`, their sum, and z-scores of the Monte Carlo
/// estimate against the published and the summed predictions.
pub fn stochvol_check(
    engine: &Engine,
    params: &ModelParams,
    matrices: &[(String, Matrix)],
    cfg: &SimConfig,
) -> Result<SweepResult> {
    if matrices.is_empty() {
        return Err(usage("stochvol-check needs at least one matrix"));
    }
    cfg.validate(params).map_err(|e| AppError::model("stochvol-check", e))?;
    let t = cfg.horizon;
    let mut out = SweepResult::new("stochvol-check", "matrix");
    let (mut normalized, mut level, mut total, mut z_printed, mut z_total) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, (label, m)) in matrices.iter().enumerate() {
        params.require_matrix(m).map_err(|e| AppError::model(label.as_str(), e))?;
        let values = engine.map(cfg.n_trials, |j| stochvol_delta_trial(params, m, cfg, j as u64));
        let est = simulate::aggregate(&values, cfg.antithetic).map_err(|e| AppError::model(label.as_str(), e))?;
        let printed = stochvol_correction(params, m, t).map_err(|e| AppError::model(label.as_str(), e))?;
        let norm = stochvol_correction_normalized(params, m, t).map_err(|e| AppError::model(label.as_str(), e))?;
        let shift = stochvol_level_shift(params, t).map_err(|e| AppError::model(label.as_str(), e))?;
        out.push(k as f64, est.mean, est.std_error, printed, est.n_diverged);
        normalized.push(norm);
        level.push(shift);
        total.push(norm + shift);
        z_printed.push((est.mean - printed) / est.std_error);
        z_total.push((est.mean - norm - shift) / est.std_error);
    }
    out.add_column("normalized_correction", normalized);
    out.add_column("level_shift", level);
    out.add_column("normalized_plus_level_shift", total);
    out.add_column("z_published", z_printed);
    out.add_column("z_normalized_plus_level_shift", z_total);
    out.meta(
        "matrices",
        Value::Array(matrices.iter().map(|(l, _)| json!(l)).collect()),
    );
    out.meta("params", params_record(params));
    out.meta("sim", sim_record(cfg));
    Ok(out)
}

/// Monte Carlo stress and squared market level for one matrix.
///
/// Row 0 is the stress against the short-time expansion, row 1 the squared
/// market level against its expansion with the `σ²t/N` noise floor; the
/// `printed_leading` column carries the `σ²t` leading term as published.
pub fn simulate_observables(
    engine: &Engine,
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
) -> Result<SweepResult> {
    use netstress_core::analytic::{market_noise_floor, market_uncertainty, MarketAverage};
    let ctx = |e| AppError::model("simulate", e);
    let t = cfg.horizon;
    let stress_est = engine.estimate(params, m, cfg, Observable::Stress).map_err(ctx)?;
    let market_est = engine.estimate(params, m, cfg, Observable::MarketSq).map_err(ctx)?;
    let y = stress_expectation(params, m, t).map_err(ctx)?;
    let z = market_uncertainty(params, m, t, MarketAverage::Conditional).map_err(ctx)?;
    let floor = market_noise_floor(params, t).map_err(ctx)?;
    let mut out = SweepResult::new("simulate", "observable");
    out.push(0.0, stress_est.mean, stress_est.std_error, y.total, stress_est.n_diverged);
    out.push(
        1.0,
        market_est.mean,
        market_est.std_error,
        floor + z.order_gamma + z.order_gamma2,
        market_est.n_diverged,
    );
    out.add_column("printed_leading", vec![y.order1, z.order1]);
    out.meta("observables", json!(["stress", "market_level_sq"]));
    out.meta("params", params_record(params));
    out.meta("sim", sim_record(cfg));
    Ok(out)
}
