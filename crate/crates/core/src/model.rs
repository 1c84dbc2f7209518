//! Model parameters, interaction-matrix ensembles and the drift matrix.

use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;

/// Scalar constants of the network dynamics.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelParams {
    /// Number of banks `N` (at least 2).
    pub n_banks: usize,
    /// Baseline volatility `σ > 0`.
    pub sigma: f64,
    /// Inverse memory time scale `β > 0` of the recent variation.
    pub beta: f64,
    /// Interaction strength `γ`.
    pub gamma: f64,
    /// Volatility of volatility `ν ≥ 0`.
    pub volvol: f64,
}

impl ModelParams {
    /// Validated constructor with `volvol = 0`.
    pub fn new(n_banks: usize, sigma: f64, beta: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            n_banks,
            sigma,
            beta,
            gamma,
            volvol: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    /// Same parameters with a different volatility of volatility.
    pub fn with_volvol(mut self, volvol: f64) -> Result<Self> {
        self.volvol = volvol;
        self.validate()?;
        Ok(self)
    }

    /// Same parameters with a different interaction strength.
    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    /// Checks the parameter domains.
    pub fn validate(&self) -> Result<()> {
        if self.n_banks < 2 {
            return Err(invalid("n_banks", format!("need at least 2 banks, got {}", self.n_banks)));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(invalid("sigma", format!("must be finite and > 0, got {}", self.sigma)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(invalid("beta", format!("must be finite and > 0, got {}", self.beta)));
        }
        if !self.gamma.is_finite() {
            return Err(invalid("gamma", format!("must be finite, got {}", self.gamma)));
        }
        if !(self.volvol.is_finite() && self.volvol >= 0.0) {
            return Err(invalid("volvol", format!("must be finite and >= 0, got {}", self.volvol)));
        }
        Ok(())
    }

    /// Coupling `√β γ` of the interaction matrix inside the drift matrix.
    pub fn coupling(&self) -> f64 {
        libm::sqrt(self.beta) * self.gamma
    }

    /// Checks that `m` is `n_banks x n_banks`.
    pub fn require_matrix(&self, m: &Matrix) -> Result<()> {
        let n = m.require_square("interaction matrix")?;
        if n != self.n_banks {
            return Err(Error::Dimension(format!(
                "interaction matrix is {n}x{n} but n_banks = {}",
                self.n_banks
            )));
        }
        Ok(())
    }
}

/// Bond-style exposure nonlinearity `M_ij → M_ij · min(exp(-k x_j), l)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NonlinearSpec {
    /// Spread sensitivity `k ≥ 0`.
    pub sensitivity: f64,
    /// Maximum exposure multiplier `l ≥ 1`.
    pub cap: f64,
    /// Bond time to maturity, kept for labelling runs only.
    pub maturity: f64,
}

impl NonlinearSpec {
    /// Validated constructor.
    pub fn new(sensitivity: f64, cap: f64, maturity: f64) -> Result<Self> {
        let s = Self {
            sensitivity,
            cap,
            maturity,
        };
        s.validate()?;
        Ok(s)
    }

    /// Checks `k ≥ 0`, `l ≥ 1`, `T > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.sensitivity.is_finite() && self.sensitivity >= 0.0) {
            return Err(invalid("sensitivity", format!("must be >= 0, got {}", self.sensitivity)));
        }
        if !(self.cap.is_finite() && self.cap >= 1.0) {
            return Err(invalid("cap", format!("must be >= 1, got {}", self.cap)));
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(invalid("maturity", format!("must be > 0, got {}", self.maturity)));
        }
        Ok(())
    }

    /// Column multiplier `min(exp(-k x), l)` for a bank in state `x`.
    #[inline]
    pub fn factor(&self, x: f64) -> f64 {
        if self.sensitivity == 0.0 {
            return 1.0f64.min(self.cap);
        }
        // exp overflows to +inf for very negative states, which min() clamps.
        let raw = libm::exp(-self.sensitivity * x);
        if raw.is_nan() {
            raw
        } else {
            raw.min(self.cap)
        }
    }
}

/// Shape of the statistical capital constraint on exposures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ConstraintKind {
    /// `E Σ_j (γ M_ij)² = k²`.
    QuadraticMean,
    /// `E Σ_j γ |M_ij| = k`.
    AbsoluteMean,
}

/// Exposure budget constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CapitalConstraint {
    /// Budget `k > 0`.
    pub budget: f64,
    /// Constraint form.
    pub kind: ConstraintKind,
}

/// Source of standard normal draws.
///
/// Implemented for every [`RngCore`]; the model never owns randomness.
pub trait RandomStream {
    /// Next standard normal variate.
    fn standard_normal(&mut self) -> f64;
}

impl<R: RngCore + ?Sized> RandomStream for R {
    #[inline]
    fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

/// Drift matrix `Â = β I - √β γ M`.
pub fn build_drift_matrix(params: &ModelParams, m: &Matrix) -> Result<Matrix> {
    params.require_matrix(m)?;
    let n = params.n_banks;
    let coupling = params.coupling();
    let mut a = m.scale(-coupling);
    for i in 0..n {
        a[(i, i)] += params.beta;
    }
    Ok(a)
}

/// `n x n` matrix of i.i.d. standard normal entries, drawn row by row.
pub fn sample_gaussian_matrix<R: RandomStream + ?Sized>(n: usize, rng: &mut R) -> Result<Matrix> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    let data: Vec<f64> = (0..n * n).map(|_| rng.standard_normal()).collect();
    Matrix::new(n, n, data)
}

/// Copy of `m` with the diagonal set to zero (no self-interaction).
pub fn zero_diagonal(m: &Matrix) -> Result<Matrix> {
    let n = m.require_square("zero_diagonal argument")?;
    let mut out = m.clone();
    for i in 0..n {
        out[(i, i)] = 0.0;
    }
    Ok(out)
}

/// Symmetrised matrix `M̃ = M + Mᵀ`.
pub fn symmetrize(m: &Matrix) -> Result<Matrix> {
    m.require_square("symmetrize argument")?;
    m.add(&m.transpose())
}

/// Interaction strength that saturates a capital constraint for `n` banks:
/// `k/√N` for the quadratic form and `√(π/2)·k/N` for the absolute form.
pub fn gamma_for_constraint(n: usize, c: &CapitalConstraint) -> Result<f64> {
    if n < 2 {
        return Err(invalid("n", format!("need n >= 2, got {n}")));
    }
    if !(c.budget.is_finite() && c.budget > 0.0) {
        return Err(invalid("budget", format!("must be > 0, got {}", c.budget)));
    }
    let n = n as f64;
    Ok(match c.kind {
        ConstraintKind::QuadraticMean => c.budget / libm::sqrt(n),
        ConstraintKind::AbsoluteMean => {
            libm::sqrt(core::f64::consts::FRAC_PI_2) * c.budget / n
        }
    })
}

/// Interaction matrix with column `j` scaled by `min(exp(-k x_j), l)`.
pub fn nonlinear_factor(m: &Matrix, x: &[f64], spec: &NonlinearSpec) -> Result<Matrix> {
    let n = m.require_square("interaction matrix")?;
    spec.validate()?;
    if x.len() != n {
        return Err(Error::Dimension(format!("state of length {} for {n} banks", x.len())));
    }
    let factors: Vec<f64> = x.iter().map(|xj| spec.factor(*xj)).collect();
    let mut out = m.clone();
    for i in 0..n {
        for (j, f) in factors.iter().enumerate() {
            out[(i, j)] *= f;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn m22(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::from_rows(&[[a, b], [c, d]]).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 1.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2, 0.0, 1.0, 0.0).is_err());
        assert!(ModelParams::new(2, 1.0, -1.0, 0.0).is_err());
        assert!(ModelParams::new(2, 1.0, 1.0, f64::NAN).is_err());
        let p = ModelParams::new(2, 1.0, 1.0, -3.0).unwrap();
        assert!(p.with_volvol(-0.1).is_err());
        assert!(p.with_volvol(0.3).is_ok());
    }

    #[test]
    fn drift_matrix_examples() {
        let m = m22(0.3, -1.0, 2.0, 0.5);
        let p = ModelParams::new(2, 1.0, 0.7, 0.0).unwrap();
        assert_eq!(build_drift_matrix(&p, &m).unwrap(), Matrix::identity(2).scale(0.7));

        let p = ModelParams::new(2, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(build_drift_matrix(&p, &Matrix::identity(2)).unwrap(), Matrix::zeros(2, 2));

        let p = ModelParams::new(2, 1.0, 0.04, 2.0).unwrap();
        let a = build_drift_matrix(&p, &m22(0.0, 1.0, 1.0, 0.0)).unwrap();
        let want = m22(0.04, -0.4, -0.4, 0.04);
        assert!(a.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn drift_matrix_dimension_mismatch() {
        let p = ModelParams::new(3, 1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            build_drift_matrix(&p, &Matrix::identity(2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn gaussian_entries_have_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = sample_gaussian_matrix(1000, &mut rng).unwrap();
        let n = m.as_slice().len() as f64;
        let mean = m.sum() / n;
        let var = m.as_slice().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 3e-3, "mean {mean}");
        assert!((var - 1.0).abs() < 5e-3, "var {var}");
    }

    #[test]
    fn distinct_entries_are_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let trials = 100_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let m = sample_gaussian_matrix(2, &mut rng).unwrap();
            acc += m[(0, 1)] * m[(1, 0)];
        }
        let mean = acc / trials as f64;
        assert!(mean.abs() < 0.01, "E[M01 M10] = {mean}");
    }

    #[test]
    fn zero_diagonal_examples() {
        assert_eq!(zero_diagonal(&Matrix::identity(3)).unwrap(), Matrix::zeros(3, 3));
        let m = m22(1.0, 2.0, 3.0, 4.0);
        let z = zero_diagonal(&m).unwrap();
        assert_eq!(z, m22(0.0, 2.0, 3.0, 0.0));
        assert_eq!(zero_diagonal(&z).unwrap(), z);
    }

    #[test]
    fn symmetrize_examples() {
        assert_eq!(symmetrize(&Matrix::identity(2)).unwrap(), Matrix::identity(2).scale(2.0));
        assert_eq!(symmetrize(&m22(0.0, 1.0, -1.0, 0.0)).unwrap(), Matrix::zeros(2, 2));
        assert_eq!(symmetrize(&m22(1.0, 2.0, 3.0, 4.0)).unwrap(), m22(2.0, 5.0, 5.0, 8.0));
    }

    #[test]
    fn constraint_scalings() {
        let q = CapitalConstraint { budget: 1.0, kind: ConstraintKind::QuadraticMean };
        assert_relative_eq!(gamma_for_constraint(4, &q).unwrap(), 0.5, epsilon = 1e-15);
        let a = CapitalConstraint { budget: 2.0, kind: ConstraintKind::AbsoluteMean };
        assert_relative_eq!(gamma_for_constraint(4, &a).unwrap(), 0.626_657_068_657_750_1, epsilon = 1e-12);
        assert!(gamma_for_constraint(1, &q).is_err());
        let bad = CapitalConstraint { budget: 0.0, kind: ConstraintKind::QuadraticMean };
        assert!(gamma_for_constraint(4, &bad).is_err());
    }

    #[test]
    fn quadratic_constraint_hits_budget_in_expectation() {
        let n = 20;
        let c = CapitalConstraint { budget: 1.5, kind: ConstraintKind::QuadraticMean };
        let gamma = gamma_for_constraint(n, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let rows = 100_000;
        let mut acc = 0.0;
        for _ in 0..rows {
            let row_sq: f64 = (0..n)
                .map(|_| {
                    let v = gamma * rng.standard_normal();
                    v * v
                })
                .sum();
            acc += row_sq;
        }
        let mean = acc / rows as f64;
        assert!((mean / (c.budget * c.budget) - 1.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn absolute_constraint_hits_budget_in_expectation() {
        let n = 10;
        let c = CapitalConstraint { budget: 2.0, kind: ConstraintKind::AbsoluteMean };
        let gamma = gamma_for_constraint(n, &c).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows = 100_000;
        let mut acc = 0.0;
        for _ in 0..rows {
            acc += (0..n).map(|_| (gamma * rng.standard_normal()).abs()).sum::<f64>();
        }
        assert!((acc / rows as f64 / c.budget - 1.0).abs() < 0.02);
    }

    #[test]
    fn nonlinear_factor_examples() {
        let m = m22(1.0, 2.0, 3.0, 4.0);
        let k0 = NonlinearSpec::new(0.0, 3.0, 0.1).unwrap();
        assert_eq!(nonlinear_factor(&m, &[5.0, -7.0], &k0).unwrap(), m);
        let k1 = NonlinearSpec::new(1.0, 3.0, 0.1).unwrap();
        assert_eq!(nonlinear_factor(&m, &[0.0, 0.0], &k1).unwrap(), m);

        let scaled = nonlinear_factor(&m, &[0.0, -core::f64::consts::LN_2], &k1).unwrap();
        assert_relative_eq!(scaled[(0, 1)], 4.0, epsilon = 1e-14);
        assert_relative_eq!(scaled[(1, 1)], 8.0, epsilon = 1e-14);
        assert_eq!(scaled[(0, 0)], 1.0);
        // original untouched
        assert_eq!(m[(0, 1)], 2.0);
    }

    #[test]
    fn nonlinear_factor_clamps_overflow() {
        let spec = NonlinearSpec::new(10.0, 2.5, 0.1).unwrap();
        assert_eq!(spec.factor(-1e6), 2.5);
        assert_eq!(spec.factor(1e6), 0.0);
    }

    #[test]
    fn nonlinear_spec_validation() {
        assert!(NonlinearSpec::new(-0.1, 2.0, 0.1).is_err());
        assert!(NonlinearSpec::new(0.1, 0.5, 0.1).is_err());
        assert!(NonlinearSpec::new(0.1, 2.0, 0.0).is_err());
        let m = Matrix::identity(2);
        let spec = NonlinearSpec::new(0.1, 2.0, 0.1).unwrap();
        assert!(matches!(nonlinear_factor(&m, &[0.0], &spec), Err(Error::Dimension(_))));
    }

    fn square(n: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-5.0f64..5.0, n * n).prop_map(move |d| Matrix::new(n, n, d).unwrap())
    }

    proptest! {
        #[test]
        fn symmetrize_is_symmetric(m in (2usize..6).prop_flat_map(square)) {
            let s = symmetrize(&m).unwrap();
            prop_assert_eq!(&s, &s.transpose());
            prop_assert_eq!(symmetrize(&s).unwrap(), s.scale(2.0));
        }

        #[test]
        fn drift_is_linear_in_m(
            (a, b) in (2usize..6).prop_flat_map(|n| (square(n), square(n))),
            beta in 0.001f64..2.0,
            gamma in -4.0f64..4.0,
        ) {
            let n = a.rows();
            let p = ModelParams::new(n, 1.0, beta, gamma).unwrap();
            let bi = Matrix::identity(n).scale(beta);
            let lhs = build_drift_matrix(&p, &a.add(&b).unwrap()).unwrap().sub(&bi).unwrap();
            let rhs = build_drift_matrix(&p, &a).unwrap().sub(&bi).unwrap()
                .add(&build_drift_matrix(&p, &b).unwrap().sub(&bi).unwrap()).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }

        #[test]
        fn constraint_gamma_decreases_with_n(n in 2usize..10_000, budget in 0.01f64..100.0) {
            for kind in [ConstraintKind::QuadraticMean, ConstraintKind::AbsoluteMean] {
                let c = CapitalConstraint { budget, kind };
                prop_assert!(gamma_for_constraint(n + 1, &c).unwrap() < gamma_for_constraint(n, &c).unwrap());
            }
        }

        #[test]
        fn nonlinear_factor_never_exceeds_cap(
            m in square(4),
            x in proptest::collection::vec(-1e3f64..1e3, 4),
            k in 0.0f64..5.0,
            cap in 1.0f64..10.0,
        ) {
            let spec = NonlinearSpec::new(k, cap, 1.0).unwrap();
            let out = nonlinear_factor(&m, &x, &spec).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    prop_assert!(out[(i, j)].abs() <= cap * m[(i, j)].abs() * (1.0 + 1e-15));
                }
            }
        }
    }

    #[test]
    fn random_stream_on_trait_object() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dyn_rng: &mut dyn RngCore = &mut rng;
        let m = sample_gaussian_matrix(3, dyn_rng).unwrap();
        assert_eq!(m.rows(), 3);
    }
}
