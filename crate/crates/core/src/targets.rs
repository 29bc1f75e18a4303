//! Benchmark target densities.
//!
//! All densities are exposed only as *unnormalized log-densities*: the
//! samplers never exponentiate a raw density ratio, and normalization
//! constants are dropped throughout because only ratios enter acceptance
//! probabilities. Evaluations are pure functions and safe to call from any
//! number of threads.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// An unnormalized log-density over `dim()`-dimensional real space.
///
/// Implementations return `f64::NEG_INFINITY` outside their support instead
/// of trapping.
pub trait TargetDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
    /// Short identifier used in chain metadata and reports.
    fn id(&self) -> String;
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn id(&self) -> String {
        (**self).id()
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn id(&self) -> String {
        (**self).id()
    }
}

/// `-0.5 * sum(x_i^2)`, the standard Gaussian log-density with its constant
/// dropped.
pub fn std_gaussian_log_density(x: &[f64]) -> f64 {
    -0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

/// Isotropic unit Gaussian in `dim` dimensions.
#[derive(Debug, Clone)]
pub struct StdGaussian {
    dim: usize,
}

impl StdGaussian {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }
}

impl TargetDensity for StdGaussian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        std_gaussian_log_density(x)
    }
    fn id(&self) -> String {
        format!("std_gaussian(dim={})", self.dim)
    }
}

/// Correlated Gaussian defined by the first-order autoregressive recursion
/// `X_1 ~ N(0,1)`, `X_i | X_{i-1} ~ N(alpha * X_{i-1}, beta^2)` with
/// `beta = sqrt(1 - alpha^2)`, so every marginal is N(0,1).
#[derive(Debug, Clone)]
pub struct Ar1Gaussian {
    alpha: f64,
    beta: f64,
    dim: usize,
}

impl Ar1Gaussian {
    pub fn new(alpha: f64, dim: usize) -> Result<Self> {
        if !(alpha.abs() < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "ar1 alpha must satisfy |alpha| < 1, got {alpha}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be >= 1".into()));
        }
        let beta = (1.0 - alpha * alpha).sqrt();
        debug_assert!((alpha * alpha + beta * beta - 1.0).abs() < 1e-12);
        Ok(Self { alpha, beta, dim })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Map to the coordinate system in which the distribution is a standard
    /// Gaussian: `q_1 = x_1`, `q_i = (x_i - alpha*x_{i-1}) / beta`.
    pub fn whiten(&self, x: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(x.len());
        if x.is_empty() {
            return q;
        }
        q.push(x[0]);
        for i in 1..x.len() {
            q.push((x[i] - self.alpha * x[i - 1]) / self.beta);
        }
        q
    }

    /// Exact inverse of [`whiten`](Self::whiten): `x_1 = q_1`,
    /// `x_i = alpha*x_{i-1} + beta*q_i`.
    pub fn unwhiten(&self, q: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = Vec::with_capacity(q.len());
        if q.is_empty() {
            return x;
        }
        x.push(q[0]);
        for i in 1..q.len() {
            let prev = x[i - 1];
            x.push(self.alpha * prev + self.beta * q[i]);
        }
        x
    }

    /// The whitening transform as an explicit affine map (lower bidiagonal
    /// matrix, zero offset).
    pub fn whitening_map(&self) -> Result<AffineMap> {
        let n = self.dim;
        let mut m = DMatrix::<f64>::zeros(n, n);
        m[(0, 0)] = 1.0;
        for i in 1..n {
            m[(i, i)] = 1.0 / self.beta;
            m[(i, i - 1)] = -self.alpha / self.beta;
        }
        AffineMap::new(m, DVector::zeros(n))
    }

    /// Draw one exact sample by running the defining recursion forward.
    pub fn sample_exact<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim);
        let mut prev: f64 = StandardNormal.sample(rng);
        x.push(prev);
        for _ in 1..self.dim {
            let eps: f64 = StandardNormal.sample(rng);
            prev = self.alpha * prev + self.beta * eps;
            x.push(prev);
        }
        x
    }
}

/// `-0.5*x_1^2 - sum_{i>=2} (x_i - alpha*x_{i-1})^2 / (2*beta^2)`.
pub fn ar1_log_density(x: &[f64], alpha: f64, beta: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let mut acc = -0.5 * x[0] * x[0];
    let inv_two_beta2 = 1.0 / (2.0 * beta * beta);
    for i in 1..x.len() {
        let r = x[i] - alpha * x[i - 1];
        acc -= r * r * inv_two_beta2;
    }
    acc
}

impl TargetDensity for Ar1Gaussian {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        ar1_log_density(x, self.alpha, self.beta)
    }
    fn id(&self) -> String {
        format!("ar1(alpha={:?},dim={})", self.alpha, self.dim)
    }
}

/// `sum over pairs of 100*(x_{2i-1}^2 - x_{2i})^2 + (x_{2i-1} - 1)^2`.
///
/// The log-density is the *negative* of this; the positive form is unbounded
/// above and would not be integrable.
pub fn rosenbrock_negative_log_density(x: &[f64]) -> f64 {
    let mut f = 0.0;
    for pair in x.chunks_exact(2) {
        let a = pair[0] * pair[0] - pair[1];
        let b = pair[0] - 1.0;
        f += 100.0 * a * a + b * b;
    }
    f
}

/// Independent replications of the two-dimensional Rosenbrock density.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    dim: usize,
}

impl Rosenbrock {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "rosenbrock dimension must be even and positive, got {dim}"
            )));
        }
        Ok(Self { dim })
    }
}

impl TargetDensity for Rosenbrock {
    fn dim(&self) -> usize {
        self.dim
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        -rosenbrock_negative_log_density(x)
    }
    fn id(&self) -> String {
        format!("rosenbrock(dim={})", self.dim)
    }
}

/// An invertible affine change of coordinates `x -> A*x + b`.
#[derive(Debug, Clone)]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    inverse: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineMap {
    /// Condition-number proxy above which the matrix is rejected as
    /// effectively singular.
    const MAX_CONDITION: f64 = 1e12;

    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != offset.len() {
            return Err(Error::InvalidInput(format!(
                "affine map shape mismatch: {}x{} matrix, offset of length {}",
                matrix.nrows(),
                matrix.ncols(),
                offset.len()
            )));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidParameter("affine map matrix is singular".into()))?;
        let cond = inf_norm(&matrix) * inf_norm(&inverse);
        if !cond.is_finite() || cond > Self::MAX_CONDITION {
            return Err(Error::InvalidParameter(format!(
                "affine map matrix is numerically singular (condition proxy {cond:.3e})"
            )));
        }
        Ok(Self {
            matrix,
            inverse,
            offset,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: DMatrix::identity(dim, dim),
            inverse: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    /// `A*x + b`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(x);
        (&self.matrix * v + &self.offset).as_slice().to_vec()
    }

    /// `A^{-1} * (q - b)`.
    pub fn apply_inverse(&self, q: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(q) - &self.offset;
        (&self.inverse * v).as_slice().to_vec()
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// The pushforward of `target` under `map`: if `X` has density `pi` then
/// `Q = A*X + b` has log-density `log pi(A^{-1}(q - b))` up to the constant
/// `-log det A`, which cancels in acceptance ratios and is dropped.
#[derive(Clone)]
pub struct AffineTarget<T> {
    inner: T,
    map: AffineMap,
}

pub fn affine_wrap<T: TargetDensity>(target: T, map: AffineMap) -> Result<AffineTarget<T>> {
    if target.dim() != map.dim() {
        return Err(Error::InvalidInput(format!(
            "target dimension {} does not match map dimension {}",
            target.dim(),
            map.dim()
        )));
    }
    Ok(AffineTarget { inner: target, map })
}

impl<T: TargetDensity> TargetDensity for AffineTarget<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn log_density(&self, q: &[f64]) -> f64 {
        self.inner.log_density(&self.map.apply_inverse(q))
    }
    fn id(&self) -> String {
        format!("affine({})", self.inner.id())
    }
}
