//! Euler–Maruyama integration of the joint `(x, h, σ)` system, the stress and
//! market-level observables, and the trial-indexed Monte Carlo estimator.
//!
//! Each trial owns two noise streams (bank noise and volatility noise) keyed
//! by the run seed and the trial index, see [`crate::rng`]. The estimator
//! collects per-trial values in trial order before reducing them, so the
//! result is identical whether trials run sequentially here or in parallel in
//! the `netstress` engine.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::model::{ModelParams, NonlinearSpec, RandomStream};
use crate::rng::{self, Domain};
use crate::stats;

/// Upper bound on `β·dt`; the step must resolve the memory time scale.
pub const MAX_BETA_DT: f64 = 0.05;
/// Default number of steps across the horizon.
pub const DEFAULT_STEPS: f64 = 500.0;
/// Largest tolerated fraction of diverged trials before a run aborts.
pub const MAX_DIVERGED_FRACTION: f64 = 0.01;

/// Discretisation and sampling settings of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Integration horizon `t`.
    pub horizon: f64,
    /// Requested step size; the horizon is split into `ceil(horizon/dt)`
    /// equal steps.
    pub dt: f64,
    /// Number of independent paths.
    pub n_trials: usize,
    /// Run seed.
    pub seed: u64,
    /// Evolve σ(t) as a geometric Brownian motion with VolVol `ν`.
    pub use_stochastic_vol: bool,
    /// Optional exposure nonlinearity applied at every step.
    pub nonlinear: Option<NonlinearSpec>,
    /// Pair trial `2k` with trial `2k+1` driven by the negated noise.
    pub antithetic: bool,
}

impl SimConfig {
    /// Config with the default step `min(horizon/500, 0.05/β)`, constant
    /// volatility, linear interactions and no antithetic pairing.
    pub fn new(horizon: f64, n_trials: usize, seed: u64, beta: f64) -> Self {
        Self {
            horizon,
            dt: Self::default_dt(horizon, beta),
            n_trials,
            seed,
            use_stochastic_vol: false,
            nonlinear: None,
            antithetic: false,
        }
    }

    /// `min(horizon/500, 0.05/β)`.
    pub fn default_dt(horizon: f64, beta: f64) -> f64 {
        (horizon / DEFAULT_STEPS).min(MAX_BETA_DT / beta)
    }

    /// Checks the config against the model parameters.
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.validate()?;
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if self.dt > self.horizon {
            return Err(invalid(
                "dt",
                format!("step {} exceeds horizon {}", self.dt, self.horizon),
            ));
        }
        if self.dt * params.beta > MAX_BETA_DT * (1.0 + 1e-12) {
            return Err(invalid(
                "dt",
                format!(
                    "beta*dt = {} exceeds {MAX_BETA_DT}; the step does not resolve 1/beta",
                    self.dt * params.beta
                ),
            ));
        }
        if self.n_trials < 2 {
            return Err(invalid("n_trials", format!("need at least 2, got {}", self.n_trials)));
        }
        if self.antithetic && !self.n_trials.is_multiple_of(2) {
            return Err(invalid(
                "n_trials",
                format!("antithetic pairing needs an even count, got {}", self.n_trials),
            ));
        }
        if let Some(spec) = &self.nonlinear {
            spec.validate()?;
        }
        Ok(())
    }

    /// Number of integration steps.
    pub fn n_steps(&self) -> usize {
        let steps = libm::ceil(self.horizon / self.dt - 1e-9);
        (steps as usize).max(1)
    }

    /// Actual step size `horizon / n_steps` (equals `dt` when it divides the
    /// horizon).
    pub fn step_size(&self) -> f64 {
        self.horizon / self.n_steps() as f64
    }
}

/// Joint state of all banks.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    /// Bank states `x_i`.
    pub x: Vec<f64>,
    /// Recent variations `h_i`.
    pub h: Vec<f64>,
    /// Current volatility σ(t).
    pub sigma_t: f64,
    /// Elapsed time.
    pub time: f64,
}

impl StateVector {
    /// `x = 0`, `h = 0`, `σ(0) = sigma`, `t = 0`.
    pub fn initial(n: usize, sigma: f64) -> Self {
        Self {
            x: vec![0.0; n],
            h: vec![0.0; n],
            sigma_t: sigma,
            time: 0.0,
        }
    }

    /// False once any component has left the finite range.
    pub fn is_finite(&self) -> bool {
        self.sigma_t.is_finite()
            && self.x.iter().all(|v| v.is_finite())
            && self.h.iter().all(|v| v.is_finite())
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarloEstimate {
    /// Sample mean over finite trials.
    pub mean: f64,
    /// Standard error of the mean.
    pub std_error: f64,
    /// Trials run.
    pub n_trials: usize,
    /// Trials excluded because their state became non-finite.
    pub n_diverged: usize,
}

/// Path functional averaged by the estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Observable {
    /// Cross-sectional sample variance of the bank states.
    Stress,
    /// Squared market level `(mean_i x_i)²`.
    MarketSq,
    /// Cross-sectional mean of `h_i²`.
    RecentVariationSq,
    /// Volatility relative to its initial value, `σ(t)/σ(0)`.
    VolatilityRatio,
}

impl Observable {
    /// Evaluates the observable on a state started from volatility `sigma0`.
    pub fn evaluate(self, state: &StateVector, sigma0: f64) -> f64 {
        match self {
            Observable::Stress => stress(&state.x),
            Observable::MarketSq => market_level_sq(&state.x),
            Observable::RecentVariationSq => {
                state.h.iter().map(|h| h * h).sum::<f64>() / state.h.len() as f64
            }
            Observable::VolatilityRatio => state.sigma_t / sigma0,
        }
    }
}

/// Bessel-corrected sample variance of the bank states,
/// `1/(N-1) Σ_i x_i (x_i - x̄)`.
pub fn stress(x: &[f64]) -> f64 {
    let n = x.len();
    assert!(n >= 2, "stress needs at least two banks");
    let mean = x.iter().sum::<f64>() / n as f64;
    let ss: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    ss / (n - 1) as f64
}

/// Squared cross-sectional mean `((1/N) Σ_i x_i)²`.
pub fn market_level_sq(x: &[f64]) -> f64 {
    assert!(x.len() >= 2, "market level needs at least two banks");
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    mean * mean
}

/// Reusable stepping kernel; holds scratch buffers so a path allocates once.
struct Stepper<'a> {
    m: &'a Matrix,
    gamma: f64,
    beta: f64,
    sqrt_beta: f64,
    volvol: f64,
    stochastic_vol: bool,
    nonlinear: Option<NonlinearSpec>,
    dt: f64,
    weighted_h: Vec<f64>,
    drift: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(params: &ModelParams, m: &'a Matrix, cfg: &SimConfig, dt: f64) -> Self {
        let n = params.n_banks;
        Self {
            m,
            gamma: params.gamma,
            beta: params.beta,
            sqrt_beta: libm::sqrt(params.beta),
            volvol: params.volvol,
            stochastic_vol: cfg.use_stochastic_vol,
            nonlinear: cfg.nonlinear,
            dt,
            weighted_h: vec![0.0; n],
            drift: vec![0.0; n],
        }
    }

    /// Advances `s` by one step given `dw ~ N(0, dt)` per bank and
    /// `db ~ N(0, dt)`.
    #[inline]
    #[allow(clippy::needless_range_loop)]
    fn step(&mut self, s: &mut StateVector, dw: &[f64], db: f64) {
        // Column j of M scaled by the nonlinear factor is M·(f ∘ h).
        match &self.nonlinear {
            Some(spec) => {
                for ((w, h), x) in self.weighted_h.iter_mut().zip(&s.h).zip(&s.x) {
                    *w = spec.factor(*x) * h;
                }
            }
            None => self.weighted_h.copy_from_slice(&s.h),
        }
        if self.gamma != 0.0 {
            self.m.mul_vec_into(&self.weighted_h, &mut self.drift);
        } else {
            self.drift.iter_mut().for_each(|d| *d = 0.0);
        }
        let coupling_dt = self.gamma * self.dt;
        let decay = self.beta * self.dt;
        for i in 0..s.x.len() {
            let dx = s.sigma_t * dw[i] + coupling_dt * self.drift[i];
            let dh = -decay * s.h[i] + self.sqrt_beta * dx;
            s.x[i] += dx;
            s.h[i] += dh;
        }
        if self.stochastic_vol {
            let nu = self.volvol;
            s.sigma_t *= libm::exp(nu * db - 0.5 * nu * nu * self.dt);
        }
        s.time += self.dt;
    }
}

/// One Euler–Maruyama step of size `cfg.dt`.
///
/// `dw` holds the N bank increments and `db` the volatility increment, each
/// already distributed as `N(0, dt)`.
pub fn euler_step(
    s: &StateVector,
    dw: &[f64],
    db: f64,
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
) -> Result<StateVector> {
    params.require_matrix(m)?;
    let n = params.n_banks;
    if s.x.len() != n || s.h.len() != n || dw.len() != n {
        return Err(Error::Dimension(format!(
            "state/noise lengths ({}, {}, {}) for {n} banks",
            s.x.len(),
            s.h.len(),
            dw.len()
        )));
    }
    let mut next = s.clone();
    Stepper::new(params, m, cfg, cfg.dt).step(&mut next, dw, db);
    Ok(next)
}

/// Noise streams of one trial.
struct TrialNoise {
    bank: ChaCha8Rng,
    vol: ChaCha8Rng,
    sign: f64,
}

impl TrialNoise {
    fn new(seed: u64, trial_index: u64, antithetic: bool) -> Self {
        let (stream_index, sign) = if antithetic {
            (trial_index / 2, if trial_index.is_multiple_of(2) { 1.0 } else { -1.0 })
        } else {
            (trial_index, 1.0)
        };
        Self {
            bank: rng::stream(seed, Domain::BankNoise, stream_index),
            vol: rng::stream(seed, Domain::VolNoise, stream_index),
            sign,
        }
    }
}

/// Integrates one trial from `x = 0, h = 0, σ(0) = σ` to the horizon.
///
/// The noise is a pure function of `(cfg.seed, trial_index)`: bank increments
/// are drawn step by step in bank order from the bank stream, the volatility
/// increment from a separate stream that is only consumed when stochastic
/// volatility is on. Switching volatility or the nonlinearity on and off
/// therefore reuses the identical `W` path. A non-finite end state means the
/// trial diverged.
pub fn simulate_path(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    trial_index: u64,
) -> Result<StateVector> {
    params.require_matrix(m)?;
    cfg.validate(params)?;
    Ok(integrate(params, m, cfg, trial_index))
}

fn integrate(params: &ModelParams, m: &Matrix, cfg: &SimConfig, trial_index: u64) -> StateVector {
    let variant = PathVariant {
        use_stochastic_vol: cfg.use_stochastic_vol,
        nonlinear: cfg.nonlinear,
    };
    let mut out = integrate_coupled(params, m, cfg, core::slice::from_ref(&variant), trial_index);
    out.pop().expect("one variant in, one state out")
}

/// Per-path settings of paths that share one trial's noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathVariant {
    /// Evolve σ(t) as a geometric Brownian motion.
    pub use_stochastic_vol: bool,
    /// Optional exposure nonlinearity.
    pub nonlinear: Option<NonlinearSpec>,
}

fn integrate_coupled(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    variants: &[PathVariant],
    trial_index: u64,
) -> Vec<StateVector> {
    let n = params.n_banks;
    let steps = cfg.n_steps();
    let dt = cfg.step_size();
    let sqrt_dt = libm::sqrt(dt);
    let mut noise = TrialNoise::new(cfg.seed, trial_index, cfg.antithetic);
    let mut steppers: Vec<Stepper<'_>> = variants
        .iter()
        .map(|v| {
            let vcfg = SimConfig {
                use_stochastic_vol: v.use_stochastic_vol,
                nonlinear: v.nonlinear,
                ..*cfg
            };
            Stepper::new(params, m, &vcfg, dt)
        })
        .collect();
    let mut states = vec![StateVector::initial(n, params.sigma); variants.len()];
    let any_vol = variants.iter().any(|v| v.use_stochastic_vol);
    let mut dw = vec![0.0; n];
    let scale = noise.sign * sqrt_dt;
    for _ in 0..steps {
        for d in dw.iter_mut() {
            *d = scale * noise.bank.standard_normal();
        }
        let db = if any_vol {
            scale * noise.vol.standard_normal()
        } else {
            0.0
        };
        for (stepper, state) in steppers.iter_mut().zip(states.iter_mut()) {
            stepper.step(state, &dw, db);
        }
    }
    for state in states.iter_mut() {
        state.time = cfg.horizon;
    }
    states
}

/// End states of several paths driven by the same trial noise, one per
/// variant, in variant order.
///
/// Each state equals what [`simulate_path`] returns for the config with the
/// variant's settings.
pub fn simulate_coupled(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    variants: &[PathVariant],
    trial_index: u64,
) -> Result<Vec<StateVector>> {
    params.require_matrix(m)?;
    cfg.validate(params)?;
    for v in variants {
        if let Some(spec) = &v.nonlinear {
            spec.validate()?;
        }
    }
    Ok(integrate_coupled(params, m, cfg, variants, trial_index))
}

/// Observable value of one trial, `None` when the trial diverged.
pub fn observe_trial(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    observable: Observable,
    trial_index: u64,
) -> Option<f64> {
    let end = integrate(params, m, cfg, trial_index);
    if !end.is_finite() {
        return None;
    }
    let v = observable.evaluate(&end, params.sigma);
    v.is_finite().then_some(v)
}

/// Stress difference between the path with stochastic volatility and the
/// constant-volatility path driven by the same bank noise.
pub fn stochvol_delta_trial(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    trial_index: u64,
) -> Option<f64> {
    let variants = [
        PathVariant {
            use_stochastic_vol: true,
            nonlinear: cfg.nonlinear,
        },
        PathVariant {
            use_stochastic_vol: false,
            nonlinear: cfg.nonlinear,
        },
    ];
    let states = integrate_coupled(params, m, cfg, &variants, trial_index);
    let (with_vol, flat) = (&states[0], &states[1]);
    if !(with_vol.is_finite() && flat.is_finite()) {
        return None;
    }
    let d = stress(&with_vol.x) - stress(&flat.x);
    d.is_finite().then_some(d)
}

/// Reduces per-trial values (in trial order) to an estimate.
///
/// With antithetic pairing the standard error is computed over pair
/// averages; a pair with a diverged member is dropped whole. Fails when
/// every trial diverged or more than 1% did.
pub fn aggregate(values: &[Option<f64>], antithetic: bool) -> Result<MonteCarloEstimate> {
    let n_trials = values.len();
    let n_diverged = values.iter().filter(|v| v.is_none()).count();
    if n_trials == 0 || n_diverged == n_trials {
        return Err(Error::TrialsDiverged {
            diverged: n_diverged,
            trials: n_trials,
        });
    }
    if n_diverged as f64 > MAX_DIVERGED_FRACTION * n_trials as f64 {
        return Err(Error::TrialsDiverged {
            diverged: n_diverged,
            trials: n_trials,
        });
    }
    let samples: Vec<f64> = if antithetic {
        values
            .chunks(2)
            .filter_map(|pair| match pair {
                [Some(a), Some(b)] => Some(0.5 * (a + b)),
                _ => None,
            })
            .collect()
    } else {
        values.iter().flatten().copied().collect()
    };
    if samples.is_empty() {
        return Err(Error::TrialsDiverged {
            diverged: n_diverged,
            trials: n_trials,
        });
    }
    let (mean, std_error) = stats::mean_and_stderr(&samples);
    Ok(MonteCarloEstimate {
        mean,
        std_error,
        n_trials,
        n_diverged,
    })
}

/// Sequential Monte Carlo estimate of an observable at the horizon.
pub fn estimate_observable(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
    observable: Observable,
) -> Result<MonteCarloEstimate> {
    params.require_matrix(m)?;
    cfg.validate(params)?;
    let values: Vec<Option<f64>> = (0..cfg.n_trials as u64)
        .map(|trial| observe_trial(params, m, cfg, observable, trial))
        .collect();
    aggregate(&values, cfg.antithetic)
}

/// Sequential common-random-numbers estimate of the stochastic volatility
/// effect on the stress, `E[y(ν) - y(ν = 0)]`.
pub fn paired_stochvol_delta(
    params: &ModelParams,
    m: &Matrix,
    cfg: &SimConfig,
) -> Result<MonteCarloEstimate> {
    params.require_matrix(m)?;
    cfg.validate(params)?;
    let values: Vec<Option<f64>> = (0..cfg.n_trials as u64)
        .map(|trial| stochvol_delta_trial(params, m, cfg, trial))
        .collect();
    aggregate(&values, cfg.antithetic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(n: usize, sigma: f64, beta: f64, gamma: f64) -> ModelParams {
        ModelParams::new(n, sigma, beta, gamma).unwrap()
    }

    #[test]
    fn default_dt_rule() {
        let cfg = SimConfig::new(1.0, 10, 0, 0.01);
        assert_eq!(cfg.dt, 1.0 / 500.0);
        let cfg = SimConfig::new(20.0, 10, 0, 1.0);
        assert_eq!(cfg.dt, 0.04);
        let cfg = SimConfig::new(1000.0, 10, 0, 1.0);
        assert_eq!(cfg.dt, 0.05);
    }

    #[test]
    fn config_validation() {
        let p = params(3, 1.0, 1.0, 0.0);
        let good = SimConfig::new(1.0, 10, 0, 1.0);
        assert!(good.validate(&p).is_ok());
        assert!(SimConfig { dt: 2.0, ..good }.validate(&p).is_err());
        assert!(SimConfig { dt: 0.06, ..good }.validate(&p).is_err());
        assert!(SimConfig { n_trials: 1, ..good }.validate(&p).is_err());
        assert!(SimConfig { antithetic: true, n_trials: 11, ..good }.validate(&p).is_err());
        assert!(SimConfig { horizon: -1.0, ..good }.validate(&p).is_err());
    }

    #[test]
    fn step_count_covers_horizon() {
        let cfg = SimConfig { dt: 0.3, ..SimConfig::new(1.0, 2, 0, 0.1) };
        assert_eq!(cfg.n_steps(), 4);
        assert_relative_eq!(cfg.step_size(), 0.25);
        let cfg = SimConfig { dt: 0.1, ..cfg };
        assert_eq!(cfg.n_steps(), 10);
    }

    #[test]
    fn zero_noise_zero_memory_is_fixed_point() {
        let p = params(3, 1.0, 0.5, 2.0).with_volvol(0.7).unwrap();
        let m = Matrix::from_rows(&[[0.1, 0.2, 0.3], [0.4, 0.5, 0.6], [0.7, 0.8, 0.9]]).unwrap();
        let cfg = SimConfig { use_stochastic_vol: true, ..SimConfig::new(1.0, 2, 0, 0.5) };
        let mut s = StateVector::initial(3, 1.0);
        s.x = vec![1.0, -2.0, 0.5];
        let next = euler_step(&s, &[0.0; 3], 0.0, &p, &m, &cfg).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.h, s.h);
        // exp(-ν² dt / 2) drift of the log-normal step only
        assert_relative_eq!(next.sigma_t, libm::exp(-0.5 * 0.49 * cfg.dt), epsilon = 1e-15);
    }

    #[test]
    fn zero_noise_keeps_sigma_without_stochastic_vol() {
        let p = params(2, 1.3, 0.5, 1.0);
        let cfg = SimConfig::new(1.0, 2, 0, 0.5);
        let s = StateVector::initial(2, 1.3);
        let next = euler_step(&s, &[0.0; 2], 0.0, &p, &Matrix::identity(2), &cfg).unwrap();
        assert_eq!(next.sigma_t, 1.3);
        assert_eq!(next.x, vec![0.0; 2]);
    }

    #[test]
    fn no_interaction_moves_x_by_scaled_noise() {
        let p = params(3, 2.0, 0.5, 0.0);
        let cfg = SimConfig::new(1.0, 2, 0, 0.5);
        let mut s = StateVector::initial(3, 2.0);
        s.h = vec![5.0, -1.0, 3.0];
        let dw = [0.1, -0.2, 0.05];
        let next = euler_step(&s, &dw, 0.3, &p, &Matrix::identity(3), &cfg).unwrap();
        for (x, w) in next.x.iter().zip(dw) {
            assert_eq!(*x, 2.0 * w);
        }
    }

    #[test]
    fn hand_evaluated_step() {
        let p = params(2, 1.0, 1.0, 1.0);
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let cfg = SimConfig { dt: 0.01, ..SimConfig::new(1.0, 2, 0, 1.0) };
        let mut s = StateVector::initial(2, 1.0);
        s.h = vec![1.0, 0.0];
        let next = euler_step(&s, &[0.0, 0.0], 0.0, &p, &m, &cfg).unwrap();
        assert_relative_eq!(next.x[0], 0.0);
        assert_relative_eq!(next.x[1], 0.01, epsilon = 1e-16);
        assert_relative_eq!(next.h[0], 1.0 - 0.01, epsilon = 1e-16);
        assert_relative_eq!(next.h[1], 0.01, epsilon = 1e-16);
        assert_relative_eq!(next.time, 0.01);
    }

    #[test]
    fn nonlinear_factor_enters_the_drift() {
        // k = 1, x_1 = -ln 2 doubles column 1 of M.
        let p = params(2, 1.0, 1.0, 1.0);
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let spec = NonlinearSpec::new(1.0, 3.0, 0.1).unwrap();
        let cfg = SimConfig { dt: 0.01, nonlinear: Some(spec), ..SimConfig::new(1.0, 2, 0, 1.0) };
        let mut s = StateVector::initial(2, 1.0);
        s.x = vec![0.0, -core::f64::consts::LN_2];
        s.h = vec![0.0, 1.0];
        let next = euler_step(&s, &[0.0, 0.0], 0.0, &p, &m, &cfg).unwrap();
        assert_relative_eq!(next.x[0], 0.02, epsilon = 1e-15);
    }

    #[test]
    fn euler_step_dimension_errors() {
        let p = params(2, 1.0, 1.0, 1.0);
        let cfg = SimConfig::new(1.0, 2, 0, 1.0);
        let s = StateVector::initial(2, 1.0);
        assert!(euler_step(&s, &[0.0], 0.0, &p, &Matrix::identity(2), &cfg).is_err());
        assert!(euler_step(&s, &[0.0; 2], 0.0, &p, &Matrix::identity(3), &cfg).is_err());
    }

    #[test]
    fn stress_examples() {
        assert_eq!(stress(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(stress(&[0.0, 2.0]), 2.0);
        assert_eq!(stress(&[1.0, 2.0, 3.0]), 1.0);
    }

    #[test]
    fn market_level_examples() {
        assert_eq!(market_level_sq(&[0.0, 0.0]), 0.0);
        assert_eq!(market_level_sq(&[1.0, 1.0]), 1.0);
        assert_eq!(market_level_sq(&[1.0, -1.0]), 0.0);
    }

    proptest! {
        #[test]
        fn stress_is_non_negative(x in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
            prop_assert!(stress(&x) >= 0.0);
        }

        #[test]
        fn stress_is_shift_invariant(
            x in proptest::collection::vec(-100.0f64..100.0, 2..20),
            shift in -100.0f64..100.0,
        ) {
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            prop_assert!((stress(&x) - stress(&shifted)).abs() <= 1e-8 * (1.0 + stress(&x)));
        }
    }

    #[test]
    fn simulate_path_is_deterministic() {
        let p = params(4, 1.0, 0.5, 0.7).with_volvol(0.3).unwrap();
        let m = Matrix::from_rows(&[
            [0.1, -0.3, 0.2, 0.0],
            [0.5, 0.0, -0.1, 0.4],
            [0.0, 0.2, 0.3, -0.6],
            [0.9, 0.1, 0.0, 0.2],
        ])
        .unwrap();
        let cfg = SimConfig { use_stochastic_vol: true, ..SimConfig::new(1.0, 4, 17, 0.5) };
        let a = simulate_path(&p, &m, &cfg, 3).unwrap();
        let b = simulate_path(&p, &m, &cfg, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&p, &m, &cfg, 4).unwrap();
        assert_ne!(a.x, c.x);
        assert_eq!(a.time, 1.0);
    }

    #[test]
    fn volatility_and_nonlinearity_reuse_the_bank_noise() {
        // With γ = 0 the bank states are σ-weighted sums of the same dW, so a
        // nonlinearity cannot change them and σ(t) only rescales increments.
        let p = params(3, 1.0, 0.5, 0.0);
        let m = Matrix::identity(3);
        let base = SimConfig::new(1.0, 2, 5, 0.5);
        let spec = NonlinearSpec::new(0.5, 2.0, 0.1).unwrap();
        let a = simulate_path(&p, &m, &base, 0).unwrap();
        let b = simulate_path(&p, &m, &SimConfig { nonlinear: Some(spec), ..base }, 0).unwrap();
        assert_eq!(a, b);
        let vol = simulate_path(&p, &m, &SimConfig { use_stochastic_vol: true, ..base }, 0).unwrap();
        // ν = 0: σ(t) update is exp(0) = 1 exactly.
        assert_eq!(a, vol);
    }

    #[test]
    fn antithetic_pairs_mirror_the_noise() {
        let p = params(3, 1.0, 0.5, 0.0);
        let m = Matrix::identity(3);
        let cfg = SimConfig { antithetic: true, ..SimConfig::new(1.0, 4, 5, 0.5) };
        let even = simulate_path(&p, &m, &cfg, 2).unwrap();
        let odd = simulate_path(&p, &m, &cfg, 3).unwrap();
        for (a, b) in even.x.iter().zip(&odd.x) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn aggregate_policies() {
        let est = aggregate(&[Some(1.0), Some(3.0)], false).unwrap();
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.n_diverged, 0);
        assert!(matches!(aggregate(&[None, None], false), Err(Error::TrialsDiverged { .. })));
        // 1 of 10 diverged is above the 1% ceiling
        let mut v = vec![Some(1.0); 9];
        v.push(None);
        assert!(matches!(aggregate(&v, false), Err(Error::TrialsDiverged { diverged: 1, trials: 10 })));
        // 1 of 200 is tolerated and reported
        let mut v = vec![Some(1.0); 199];
        v.push(None);
        let est = aggregate(&v, false).unwrap();
        assert_eq!(est.n_diverged, 1);
        assert_eq!(est.n_trials, 200);
        // antithetic pairs reduce to their means
        let est = aggregate(&[Some(1.0), Some(3.0), Some(5.0), Some(7.0)], true).unwrap();
        assert_eq!(est.mean, 4.0);
        assert_relative_eq!(est.std_error, 2.0);
    }

    #[test]
    fn non_stationary_long_run_diverges() {
        // Â = β - √β γ M with a strongly unstable direction overflows long
        // before the horizon.
        let p = params(2, 1.0, 1.0, 50.0);
        let m = Matrix::identity(2);
        let cfg = SimConfig::new(100.0, 4, 0, 1.0);
        let err = estimate_observable(&p, &m, &cfg, Observable::Stress).unwrap_err();
        assert!(matches!(err, Error::TrialsDiverged { diverged: 4, trials: 4 }));
    }

    #[test]
    fn zero_volvol_paired_delta_is_exactly_zero() {
        let p = params(4, 1.0, 0.5, 0.8);
        let m = Matrix::from_rows(&[
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let cfg = SimConfig::new(0.5, 50, 3, 0.5);
        let est = paired_stochvol_delta(&p, &m, &cfg).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std_error, 0.0);
    }
}
