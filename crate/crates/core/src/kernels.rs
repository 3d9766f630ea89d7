//! Bounded positive-definite kernels, Gram matrices, and RKHS elements stored
//! as finite kernel expansions.
//!
//! Vector-valued outputs use identity-scaled kernels `K(x, x') = k(x, x')·Id`,
//! so an element is a support plus a coefficient matrix whose columns are the
//! output coordinates. All norms are computed from kernel evaluations; no
//! explicit feature map is ever formed.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{lit, point_key, sq_dist, tol, Real};

/// A symmetric positive semi-definite kernel.
pub trait Kernel<T: Real>: Sync {
    fn eval(&self, x: &[T], y: &[T]) -> T;
}

/// Shipped kernel families; both satisfy `k(x, x) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec<T> {
    /// `exp(−‖x − y‖² / (2σ²))`
    Gaussian { sigma: T },
    /// `exp(−γ‖x − y‖)`
    Laplace { gamma: T },
}

impl<T: Real> KernelSpec<T> {
    pub fn gaussian(sigma: T) -> Result<Self> {
        let k = Self::Gaussian { sigma };
        k.validate()?;
        Ok(k)
    }

    pub fn laplace(gamma: T) -> Result<Self> {
        let k = Self::Laplace { gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            Self::Gaussian { sigma } => sigma,
            Self::Laplace { gamma } => gamma,
        };
        if p > T::zero() && p.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("kernel parameter must be positive, got {p}")))
        }
    }

    /// `sup_x √k(x, x)`.
    pub fn sup_bound(&self) -> T {
        T::one()
    }
}

impl<T: Real> Kernel<T> for KernelSpec<T> {
    #[inline]
    fn eval(&self, x: &[T], y: &[T]) -> T {
        match *self {
            Self::Gaussian { sigma } => (-sq_dist(x, y) / (lit::<T>(2.0) * sigma * sigma)).exp(),
            Self::Laplace { gamma } => (-gamma * sq_dist(x, y).sqrt()).exp(),
        }
    }
}

/// `⟨x, y⟩`. Unbounded, so it is not a [`KernelSpec`]; it gives explicit
/// finite-dimensional features for cross-checking Gram-only computations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LinearKernel;

impl<T: Real> Kernel<T> for LinearKernel {
    fn eval(&self, x: &[T], y: &[T]) -> T {
        x.iter().zip(y).map(|(&a, &b)| a * b).sum()
    }
}

fn common_dim<T>(points: &[Vec<T>]) -> Result<Option<usize>> {
    let Some(d) = points.first().map(Vec::len) else { return Ok(None) };
    for p in points {
        check_dim(d, p.len())?;
    }
    Ok(Some(d))
}

/// `G[i][j] = k(x_i, y_j)`.
pub fn gram<T: Real, K: Kernel<T> + ?Sized>(k: &K, xs: &[Vec<T>], ys: &[Vec<T>]) -> Result<Matrix<T>> {
    if let (Some(a), Some(b)) = (common_dim(xs)?, common_dim(ys)?) {
        check_dim(a, b)?;
    }
    Ok(Matrix::from_fn(xs.len(), ys.len(), |i, j| k.eval(&xs[i], &ys[j])))
}

/// Symmetric Gram matrix of one point set; the lower triangle is mirrored so
/// that symmetry is exact.
pub fn gram_sym<T: Real, K: Kernel<T> + ?Sized>(k: &K, xs: &[Vec<T>]) -> Result<Matrix<T>> {
    common_dim(xs)?;
    let n = xs.len();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = k.eval(&xs[i], &xs[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// `Σ_{i,j} k(x_i, x_j)⟨c_i, c_j⟩` without materializing the Gram matrix.
/// Row sums are gathered in order so the result does not depend on the
/// thread count.
pub(crate) fn quadratic_form<T: Real, K: Kernel<T> + ?Sized>(k: &K, support: &[Vec<T>], coeffs: &Matrix<T>) -> T {
    let n = support.len();
    let dot = |i: usize, j: usize| -> T {
        coeffs.row(i).iter().zip(coeffs.row(j)).map(|(&a, &b)| a * b).sum()
    };
    let rows: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut s = dot(i, i) * k.eval(&support[i], &support[i]);
            for j in 0..i {
                s += lit::<T>(2.0) * dot(i, j) * k.eval(&support[i], &support[j]);
            }
            s
        })
        .collect();
    rows.into_iter().sum()
}

/// RKHS element `Σ_i k(·, x_i)·c_i` with `c_i ∈ ℝ^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct RkhsVector<T> {
    pub support: Vec<Vec<T>>,
    /// One row per support point, one column per output coordinate.
    pub coeffs: Matrix<T>,
    pub kernel: KernelSpec<T>,
}

impl<T: Real> RkhsVector<T> {
    pub fn new(kernel: KernelSpec<T>, support: Vec<Vec<T>>, coeffs: Matrix<T>) -> Result<Self> {
        kernel.validate()?;
        if coeffs.rows() != support.len() {
            return Err(Error::InvalidArgument(format!(
                "{} coefficient rows for {} support points",
                coeffs.rows(),
                support.len()
            )));
        }
        common_dim(&support)?;
        Ok(Self { support, coeffs, kernel })
    }

    /// Scalar-output element with the given coefficients.
    pub fn scalar(kernel: KernelSpec<T>, support: Vec<Vec<T>>, coeffs: &[T]) -> Result<Self> {
        Self::new(kernel, support, Matrix::column(coeffs))
    }

    /// The canonical feature `k(·, x)`.
    pub fn section(kernel: KernelSpec<T>, x: Vec<T>) -> Self {
        Self { support: vec![x], coeffs: Matrix::column(&[T::one()]), kernel }
    }

    pub fn zero(kernel: KernelSpec<T>, output_dim: usize) -> Self {
        Self { support: Vec::new(), coeffs: Matrix::zeros(0, output_dim), kernel }
    }

    pub fn output_dim(&self) -> usize {
        self.coeffs.cols()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.support.first().map(Vec::len)
    }

    /// `f(x) = Σ_i c_i·k(x, x_i)`.
    pub fn eval(&self, x: &[T]) -> Result<Vec<T>> {
        if let Some(d) = self.input_dim() {
            check_dim(d, x.len())?;
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.output_dim()];
        for (i, s) in self.support.iter().enumerate() {
            let kv = self.kernel.eval(x, s);
            for (o, &c) in out.iter_mut().zip(self.coeffs.row(i)) {
                *o += c * kv;
            }
        }
        out
    }

    /// Scalar shortcut for single-output elements.
    pub fn eval_scalar(&self, x: &[T]) -> Result<T> {
        Ok(self.eval(x)?.first().copied().unwrap_or_else(T::zero))
    }

    /// `‖f‖²_H = trace(Cᵀ G C)`, clipped at zero.
    pub fn norm_squared(&self) -> T {
        quadratic_form(&self.kernel, &self.support, &self.coeffs).max(T::zero())
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// `⟨f, g⟩_H = trace(C_fᵀ G_fg C_g)`.
    pub fn inner(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        let mut s = T::zero();
        for (i, x) in self.support.iter().enumerate() {
            for (j, y) in other.support.iter().enumerate() {
                let c: T = self.coeffs.row(i).iter().zip(other.coeffs.row(j)).map(|(&a, &b)| a * b).sum();
                s += c * self.kernel.eval(x, y);
            }
        }
        Ok(s)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.kernel != other.kernel {
            return Err(Error::InvalidArgument("RKHS elements use different kernels".into()));
        }
        if self.output_dim() != other.output_dim() {
            return Err(Error::DimensionMismatch { expected: self.output_dim(), got: other.output_dim() });
        }
        if let (Some(a), Some(b)) = (self.input_dim(), other.input_dim()) {
            check_dim(a, b)?;
        }
        Ok(())
    }

    /// `self + s·other`; coefficients of shared support points are combined
    /// before any kernel evaluation, so nearly equal elements do not cancel
    /// through the Gram quadratic form.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let m = self.output_dim();
        let mut index: HashMap<Vec<(u64, i16, i8)>, usize> = HashMap::new();
        let mut support = Vec::with_capacity(self.support.len() + other.support.len());
        let mut rows: Vec<Vec<T>> = Vec::with_capacity(support.capacity());
        let sources = self.support.iter().zip(self.coeffs.to_rows()).chain(
            other.support.iter().zip(other.coeffs.to_rows().into_iter().map(|r| r.into_iter().map(|c| c * s).collect())),
        );
        for (x, c) in sources {
            match index.entry(point_key(x)) {
                Entry::Occupied(e) => {
                    for (a, b) in rows[*e.get()].iter_mut().zip(c) {
                        *a += b;
                    }
                }
                Entry::Vacant(e) => {
                    e.insert(support.len());
                    support.push(x.clone());
                    rows.push(c);
                }
            }
        }
        let coeffs = if rows.is_empty() { Matrix::zeros(0, m) } else { Matrix::from_rows(&rows)? };
        Ok(Self { support, coeffs, kernel: self.kernel })
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { support: self.support.clone(), coeffs: self.coeffs.scale(s), kernel: self.kernel }
    }

    /// `‖f − g‖_H` via the joint-support expansion.
    pub fn diff_norm(&self, other: &Self) -> Result<T> {
        Ok(self.axpy(-T::one(), other)?.norm())
    }
}

/// Free-function forms of the element operations.
pub fn rkhs_eval<T: Real>(f: &RkhsVector<T>, x: &[T]) -> Result<Vec<T>> {
    f.eval(x)
}

pub fn rkhs_norm<T: Real>(f: &RkhsVector<T>) -> T {
    f.norm()
}

pub fn rkhs_diff_norm<T: Real>(f: &RkhsVector<T>, g: &RkhsVector<T>) -> Result<T> {
    f.diff_norm(g)
}

/// Smallest tolerated quadratic form before clipping, used by PSD checks.
pub fn psd_tolerance<T: Real>() -> T {
    tol(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1() -> KernelSpec<f64> {
        KernelSpec::gaussian(1.0).unwrap()
    }

    #[test]
    fn gram_examples() {
        let g = gram(&g1(), &[vec![0.0]], &[vec![0.0]]).unwrap();
        assert_eq!(g.as_slice(), &[1.0]);

        let xs = vec![vec![0.0], vec![1.0]];
        let g = gram_sym(&g1(), &xs).unwrap();
        assert_eq!(g[(0, 0)], 1.0);
        assert!((g[(0, 1)] - 0.6065306597126334).abs() < 1e-15);
        assert!(g.is_symmetric());

        let lap = KernelSpec::laplace(1.0).unwrap();
        let g = gram(&lap, &[vec![0.0], vec![2.0]], &[vec![0.0], vec![2.0]]).unwrap();
        assert!((g[(0, 1)] - 0.1353352832366127_f64).abs() < 1e-15);

        assert!(gram(&g1(), &[vec![0.0]], &[vec![0.0, 1.0]]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::laplace(-1.0).is_err());
    }

    #[test]
    fn evaluation_examples() {
        let f = RkhsVector::section(g1(), vec![0.3]);
        assert_eq!(f.eval_scalar(&[0.3]).unwrap(), 1.0);

        let zero = RkhsVector::scalar(g1(), vec![vec![0.0], vec![1.0]], &[0.0, 0.0]).unwrap();
        assert_eq!(zero.eval_scalar(&[0.7]).unwrap(), 0.0);
        assert_eq!(zero.norm(), 0.0);

        let f = RkhsVector::scalar(g1(), vec![vec![0.0], vec![1.0]], &[1.0, -1.0]).unwrap();
        assert!((f.eval_scalar(&[0.0]).unwrap() - 0.3934693402873666).abs() < 1e-15);
        assert!(f.eval(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn norm_examples() {
        assert!((RkhsVector::section(g1(), vec![2.0]).norm() - 1.0).abs() < 1e-15);
        let doubled = RkhsVector::scalar(g1(), vec![vec![0.0], vec![0.0]], &[1.0, 1.0]).unwrap();
        assert!((doubled.norm() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn diff_norm_examples() {
        let a = RkhsVector::section(g1(), vec![0.0]);
        let b = RkhsVector::section(g1(), vec![1.0]);
        assert_eq!(a.diff_norm(&a).unwrap(), 0.0);
        assert!((a.diff_norm(&b).unwrap() - 0.887095643419994).abs() < 1e-12);
        let z = RkhsVector::zero(g1(), 1);
        assert!((z.diff_norm(&a).unwrap() - 1.0).abs() < 1e-15);

        let other = RkhsVector::section(KernelSpec::gaussian(2.0).unwrap(), vec![0.0]);
        assert!(matches!(a.diff_norm(&other), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn vector_valued_norm_is_sum_over_columns() {
        let coeffs = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let f = RkhsVector::new(g1(), vec![vec![0.0], vec![1.0]], coeffs).unwrap();
        let c0 = RkhsVector::scalar(g1(), f.support.clone(), &[1.0, 0.5]).unwrap();
        let c1 = RkhsVector::scalar(g1(), f.support.clone(), &[2.0, -1.0]).unwrap();
        let expected = c0.norm_squared() + c1.norm_squared();
        assert!((f.norm_squared() - expected).abs() < 1e-14);
        let y = f.eval(&[0.5]).unwrap();
        assert!((y[0] - c0.eval_scalar(&[0.5]).unwrap()).abs() < 1e-15);
        assert!((y[1] - c1.eval_scalar(&[0.5]).unwrap()).abs() < 1e-15);
    }
}
