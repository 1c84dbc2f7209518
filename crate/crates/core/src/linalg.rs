//! Dense real matrices and the few primitives the model needs: the matrix
//! exponential `e^{-Aτ}`, trace-identity eigenvalue moments, a real
//! Hessenberg/QR eigenvalue solve and the stationarity test on the drift
//! matrix.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major entries. Every entry must be finite.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!("empty {rows}x{cols} matrix")));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Self::new(n_rows, n_cols, data)
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// `n x n` identity.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.iter().enumerate() {
            m.data[i * n + i] = *d;
        }
        m
    }

    /// Row count.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Column count.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// True when `rows == cols`.
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Consumes the matrix returning its row-major entries.
    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Row `i` as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Returns `Err(Dimension)` unless the matrix is square.
    pub fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(Error::Dimension(format!(
                "{what} must be square, got {}x{}",
                self.rows, self.cols
            )))
        }
    }

    /// Sum of the diagonal, accumulated in index order.
    pub fn trace(&self) -> f64 {
        let n = self.rows.min(self.cols);
        let mut acc = 0.0;
        for i in 0..n {
            acc += self.data[i * self.cols + i];
        }
        acc
    }

    /// Sum of all entries.
    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Transposed copy.
    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Matrix product `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Writes `self * v` into `out`.
    ///
    /// Panics if the lengths do not match the matrix shape.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.cols);
        assert_eq!(out.len(), self.rows);
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o = dot(row, v);
        }
    }

    /// `self * v` as a new vector.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Dimension(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        let mut out = vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        Ok(out)
    }

    /// Entry-wise `self + other`.
    pub fn add(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Entry-wise `self - other`.
    pub fn sub(&self, other: &Matrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `factor * self`.
    pub fn scale(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Dimension(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.data[i * self.cols + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entry-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    fn add_scaled_in_place(&mut self, factor: f64, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    fn add_diagonal_in_place(&mut self, value: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += value;
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        assert!(i < self.rows && j < self.cols, "index ({i}, {j}) out of bounds");
        &mut self.data[i * self.cols + j]
    }
}

/// Dot product with four independent accumulators.
///
/// The summation order is fixed, so results are bitwise reproducible.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let tail_a = chunks_a.remainder();
    let tail_b = chunks_b.remainder();
    for (ca, cb) in chunks_a.zip(chunks_b) {
        acc[0] += ca[0] * cb[0];
        acc[1] += ca[1] * cb[1];
        acc[2] += ca[2] * cb[2];
        acc[3] += ca[3] * cb[3];
    }
    let mut tail = 0.0;
    for (x, y) in tail_a.iter().zip(tail_b) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

// [13/13] Padé coefficients of the exponential.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

/// `e^{-A·tau}` by scaling and squaring with a [13/13] Padé approximant.
pub fn expm(a: &Matrix, tau: f64) -> Result<Matrix> {
    let n = a.require_square("expm argument")?;
    if !tau.is_finite() {
        return Err(Error::Divergence(format!("non-finite time {tau}")));
    }
    if tau == 0.0 {
        return Ok(Matrix::identity(n));
    }
    let b = a.scale(-tau);
    let norm = b.norm_1();
    if !norm.is_finite() {
        return Err(Error::Divergence("exponent has non-finite norm".into()));
    }
    let squarings = if norm > THETA13 {
        libm::ceil(libm::log2(norm / THETA13)) as i32
    } else {
        0
    };
    let b = b.scale(libm::exp2(-(squarings as f64)));

    let b2 = b.matmul(&b)?;
    let b4 = b2.matmul(&b2)?;
    let b6 = b4.matmul(&b2)?;
    let c = &PADE13;

    let mut inner_u = b6.scale(c[13]);
    inner_u.add_scaled_in_place(c[11], &b4);
    inner_u.add_scaled_in_place(c[9], &b2);
    let mut u = b6.matmul(&inner_u)?;
    u.add_scaled_in_place(c[7], &b6);
    u.add_scaled_in_place(c[5], &b4);
    u.add_scaled_in_place(c[3], &b2);
    u.add_diagonal_in_place(c[1]);
    let u = b.matmul(&u)?;

    let mut inner_v = b6.scale(c[12]);
    inner_v.add_scaled_in_place(c[10], &b4);
    inner_v.add_scaled_in_place(c[8], &b2);
    let mut v = b6.matmul(&inner_v)?;
    v.add_scaled_in_place(c[6], &b6);
    v.add_scaled_in_place(c[4], &b4);
    v.add_scaled_in_place(c[2], &b2);
    v.add_diagonal_in_place(c[0]);

    let p = v.add(&u)?;
    let q = v.sub(&u)?;
    let mut r = solve(&q, &p)?;
    for _ in 0..squarings {
        r = r.matmul(&r)?;
        if !r.is_finite() {
            return Err(Error::Divergence(format!(
                "matrix exponential overflowed (tau = {tau})"
            )));
        }
    }
    if !r.is_finite() {
        return Err(Error::Divergence(format!(
            "matrix exponential overflowed (tau = {tau})"
        )));
    }
    Ok(r)
}

/// Solves `A X = B` by LU decomposition with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.require_square("system matrix")?;
    if b.rows != n {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {n}",
            b.rows
        )));
    }
    let mut lu = a.data.clone();
    let mut x = b.data.clone();
    let m = b.cols;
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
            .unwrap_or(k);
        if lu[pivot * n + k] == 0.0 {
            return Err(Error::Divergence("singular system".into()));
        }
        if pivot != k {
            for j in 0..n {
                lu.swap(k * n + j, pivot * n + j);
            }
            for j in 0..m {
                x.swap(k * m + j, pivot * m + j);
            }
        }
        let diag = lu[k * n + k];
        for i in (k + 1)..n {
            let factor = lu[i * n + k] / diag;
            if factor == 0.0 {
                continue;
            }
            for j in k..n {
                lu[i * n + j] -= factor * lu[k * n + j];
            }
            for j in 0..m {
                x[i * m + j] -= factor * x[k * m + j];
            }
        }
    }
    for k in (0..n).rev() {
        let diag = lu[k * n + k];
        for j in 0..m {
            let mut acc = x[k * m + j];
            for i in (k + 1)..n {
                acc -= lu[k * n + i] * x[i * m + j];
            }
            x[k * m + j] = acc / diag;
        }
    }
    Matrix::new(n, m, x)
}

/// Eigenvalue moments of a square matrix.
///
/// Mean and variance come from trace identities, so for a matrix with
/// complex eigenvalues `eigenvalue_variance = Σλ²/N - λ̄²` uses `λ²` (not
/// `|λ|²`) and may be negative.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EigenSummary {
    /// `trace(M) / N`.
    pub mean_eigenvalue: f64,
    /// `trace(M²) / N - mean²`.
    pub eigenvalue_variance: f64,
    /// Largest real part of the spectrum.
    pub max_real_part: f64,
    /// False when the eigenvalue solve failed and `max_real_part` is the
    /// Gershgorin upper bound instead.
    pub max_real_part_exact: bool,
}

/// Eigenvalue mean, variance and spectral abscissa of `m`.
pub fn eigen_summary(m: &Matrix) -> Result<EigenSummary> {
    let n = m.require_square("eigen_summary argument")?;
    let mean = m.trace() / n as f64;
    let mut trace_sq = 0.0;
    for i in 0..n {
        for k in 0..n {
            trace_sq += m[(i, k)] * m[(k, i)];
        }
    }
    let (max_real_part, exact) = match eigenvalues(m) {
        Some(ev) => (ev.iter().map(|(re, _)| *re).fold(f64::NEG_INFINITY, f64::max), true),
        None => (gershgorin_max_real(m), false),
    };
    Ok(EigenSummary {
        mean_eigenvalue: mean,
        eigenvalue_variance: trace_sq / n as f64 - mean * mean,
        max_real_part,
        max_real_part_exact: exact,
    })
}

/// Upper bound on the real parts of the spectrum from Gershgorin discs.
pub fn gershgorin_max_real(m: &Matrix) -> f64 {
    let n = m.rows;
    (0..n)
        .map(|i| {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            m[(i, i)] + radius
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound on the real parts of the spectrum from Gershgorin discs.
pub fn gershgorin_min_real(m: &Matrix) -> f64 {
    let n = m.rows;
    (0..n)
        .map(|i| {
            let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
            m[(i, i)] - radius
        })
        .fold(f64::INFINITY, f64::min)
}

/// Smallest real part of the spectrum of `a`, or the Gershgorin lower bound
/// when the eigenvalue solve does not converge.
pub fn min_real_part(a: &Matrix) -> Result<f64> {
    a.require_square("spectrum argument")?;
    Ok(match eigenvalues(a) {
        Some(ev) => ev.iter().map(|(re, _)| *re).fold(f64::INFINITY, f64::min),
        None => gershgorin_min_real(a),
    })
}

/// Whether the recent-variation dynamics `dh = -A h dt + noise` is
/// stationary, i.e. every eigenvalue of the drift matrix `A` has a strictly
/// positive real part.
///
/// When the eigenvalue solve fails the Gershgorin lower bound is used, which
/// can only report `false` for a borderline stationary matrix.
pub fn is_stationary(a: &Matrix) -> Result<bool> {
    Ok(min_real_part(a)? > 0.0)
}

/// Exponential growth rate `max(0, -min Re λ(A))` of `e^{-Aτ}`.
pub fn growth_rate(a: &Matrix) -> Result<f64> {
    Ok((-min_real_part(a)?).max(0.0))
}

/// All eigenvalues `(re, im)` of a real square matrix.
///
/// Balancing, reduction to upper Hessenberg form by stabilised elementary
/// similarity transforms and the Francis double-shift QR iteration. Returns
/// `None` when the iteration fails to converge.
pub fn eigenvalues(m: &Matrix) -> Option<Vec<(f64, f64)>> {
    if !m.is_square() || !m.is_finite() {
        return None;
    }
    let n = m.rows;
    let mut a = Dense1 {
        n,
        data: m.data.clone(),
    };
    balance(&mut a);
    hessenberg(&mut a);
    for i in 3..=n {
        for j in 1..=(i - 2) {
            *a.at(i, j) = 0.0;
        }
    }
    hqr(&mut a)
}

/// One-based square view used by the eigenvalue routines.
struct Dense1 {
    n: usize,
    data: Vec<f64>,
}

impl Dense1 {
    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[(i - 1) * self.n + (j - 1)]
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i - 1) * self.n + (j - 1)]
    }
}

fn balance(a: &mut Dense1) {
    const RADIX: f64 = 2.0;
    let n = a.n;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a.get(j, i).abs();
                    r += a.get(i, j).abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        *a.at(i, j) *= g;
                    }
                    for j in 1..=n {
                        *a.at(j, i) *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut Dense1) {
    let n = a.n;
    for m in 2..n {
        let mut x: f64 = 0.0;
        let mut i = m;
        for j in m..=n {
            if a.get(j, m - 1).abs() > x.abs() {
                x = a.get(j, m - 1);
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let tmp = a.get(i, j);
                *a.at(i, j) = a.get(m, j);
                *a.at(m, j) = tmp;
            }
            for j in 1..=n {
                let tmp = a.get(j, i);
                *a.at(j, i) = a.get(j, m);
                *a.at(j, m) = tmp;
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a.get(i, m - 1);
                if y != 0.0 {
                    y /= x;
                    *a.at(i, m - 1) = y;
                    for j in m..=n {
                        let v = a.get(m, j);
                        *a.at(i, j) -= y * v;
                    }
                    for j in 1..=n {
                        let v = a.get(j, i);
                        *a.at(j, m) += y * v;
                    }
                }
            }
        }
    }
}

#[inline]
fn with_sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

fn hqr(a: &mut Dense1) -> Option<Vec<(f64, f64)>> {
    const MAX_ITS: usize = 60;
    let n = a.n as isize;
    let mut wr = vec![0.0; a.n + 1];
    let mut wi = vec![0.0; a.n + 1];
    let g = |a: &Dense1, i: isize, j: isize| a.get(i as usize, j as usize);

    let mut anorm = 0.0;
    for i in 1..=n {
        for j in (i - 1).max(1)..=n {
            anorm += g(a, i, j).abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
    let (mut x, mut y, mut z, mut w): (f64, f64, f64, f64);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = g(a, l - 1, l - 1).abs() + g(a, l, l).abs();
                if s == 0.0 {
                    s = anorm;
                }
                if g(a, l, l - 1).abs() + s == s {
                    *a.at(l as usize, (l - 1) as usize) = 0.0;
                    break;
                }
                l -= 1;
            }
            x = g(a, nn, nn);
            if l == nn {
                wr[nn as usize] = x + t;
                wi[nn as usize] = 0.0;
                nn -= 1;
            } else {
                y = g(a, nn - 1, nn - 1);
                w = g(a, nn, nn - 1) * g(a, nn - 1, nn);
                if l == nn - 1 {
                    p = 0.5 * (y - x);
                    q = p * p + w;
                    z = libm::sqrt(q.abs());
                    x += t;
                    let (hi, lo) = (nn as usize, (nn - 1) as usize);
                    if q >= 0.0 {
                        z = p + with_sign(z, p);
                        wr[lo] = x + z;
                        wr[hi] = x + z;
                        if z != 0.0 {
                            wr[hi] = x - w / z;
                        }
                        wi[lo] = 0.0;
                        wi[hi] = 0.0;
                    } else {
                        wr[lo] = x + p;
                        wr[hi] = x + p;
                        wi[lo] = -z;
                        wi[hi] = z;
                    }
                    nn -= 2;
                } else {
                    if its == MAX_ITS {
                        return None;
                    }
                    if its == 10 || its == 20 {
                        t += x;
                        for i in 1..=nn {
                            *a.at(i as usize, i as usize) -= x;
                        }
                        let s = g(a, nn, nn - 1).abs() + g(a, nn - 1, nn - 2).abs();
                        x = 0.75 * s;
                        y = x;
                        w = -0.4375 * s * s;
                    }
                    its += 1;
                    let mut m = nn - 2;
                    while m >= l {
                        z = g(a, m, m);
                        r = x - z;
                        let s0 = y - z;
                        p = (r * s0 - w) / g(a, m + 1, m) + g(a, m, m + 1);
                        q = g(a, m + 1, m + 1) - z - r - s0;
                        r = g(a, m + 2, m + 1);
                        let s = p.abs() + q.abs() + r.abs();
                        p /= s;
                        q /= s;
                        r /= s;
                        if m == l {
                            break;
                        }
                        let u = g(a, m, m - 1).abs() * (q.abs() + r.abs());
                        let v = p.abs()
                            * (g(a, m - 1, m - 1).abs() + z.abs() + g(a, m + 1, m + 1).abs());
                        if u + v == v {
                            break;
                        }
                        m -= 1;
                    }
                    for i in (m + 2)..=nn {
                        *a.at(i as usize, (i - 2) as usize) = 0.0;
                        if i != m + 2 {
                            *a.at(i as usize, (i - 3) as usize) = 0.0;
                        }
                    }
                    let mut k = m;
                    while k < nn {
                        if k != m {
                            p = g(a, k, k - 1);
                            q = g(a, k + 1, k - 1);
                            r = 0.0;
                            if k != nn - 1 {
                                r = g(a, k + 2, k - 1);
                            }
                            x = p.abs() + q.abs() + r.abs();
                            if x != 0.0 {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        let s = with_sign(libm::sqrt(p * p + q * q + r * r), p);
                        if s != 0.0 {
                            if k == m {
                                if l != m {
                                    let v = g(a, k, k - 1);
                                    *a.at(k as usize, (k - 1) as usize) = -v;
                                }
                            } else {
                                *a.at(k as usize, (k - 1) as usize) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for j in k..=nn {
                                p = g(a, k, j) + q * g(a, k + 1, j);
                                if k != nn - 1 {
                                    p += r * g(a, k + 2, j);
                                    *a.at((k + 2) as usize, j as usize) -= p * z;
                                }
                                *a.at((k + 1) as usize, j as usize) -= p * y;
                                *a.at(k as usize, j as usize) -= p * x;
                            }
                            let mmin = if nn < k + 3 { nn } else { k + 3 };
                            for i in l..=mmin {
                                p = x * g(a, i, k) + y * g(a, i, k + 1);
                                if k != nn - 1 {
                                    p += z * g(a, i, k + 2);
                                    *a.at(i as usize, (k + 2) as usize) -= p * r;
                                }
                                *a.at(i as usize, (k + 1) as usize) -= p * q;
                                *a.at(i as usize, k as usize) -= p;
                            }
                        }
                        k += 1;
                    }
                }
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    let out: Vec<(f64, f64)> = (1..=a.n).map(|i| (wr[i], wi[i])).collect();
    if out.iter().all(|(re, im)| re.is_finite() && im.is_finite()) {
        Some(out)
    } else {
        None
    }
}
