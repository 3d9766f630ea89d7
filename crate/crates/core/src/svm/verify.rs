//! Checks of the optimality conditions a regularized solution must satisfy.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_lambda, fit, objective, zero_risk, PairSet, SolverOptions, SvmSolution};
use crate::error::{check_dim, Result};
use crate::kernels::{KernelSpec, RkhsVector};
use crate::linalg::Matrix;
use crate::losses::Loss;
use crate::scalar::{lit, norm, point_key, Real};

/// `Σ w·c(x, y)·k(·, x)` over the atoms of `data`.
fn weighted_expansion<T: Real>(
    data: &PairSet<T>,
    kernel: KernelSpec<T>,
    c: impl Fn(&[T], &[T]) -> Vec<T>,
) -> Result<RkhsVector<T>> {
    let rows: Vec<Vec<T>> = data.iter().map(|(w, x, y)| c(x, y).into_iter().map(|v| v * w).collect()).collect();
    if rows.is_empty() {
        return Ok(RkhsVector::zero(kernel, data.output_dim()));
    }
    RkhsVector::new(kernel, data.inputs().to_vec(), Matrix::from_rows(&rows)?)
}

/// `‖f − g‖_H / max(‖f‖_H, 1e−12)` where `g = −(1/2λ) Σ w·∇L(x, y, f(x))·k(·, x)`.
pub fn representer_residual<T: Real>(sol: &SvmSolution<T>, data: &PairSet<T>, loss: &Loss<T>) -> Result<T> {
    check_dim(data.output_dim(), sol.f.output_dim())?;
    let scale = -T::one() / (lit::<T>(2.0) * sol.lambda);
    let g = weighted_expansion(data, sol.f.kernel, |x, y| {
        loss.grad_unchecked(y, &sol.f.eval_unchecked(x)).into_iter().map(|v| v * scale).collect()
    })?;
    Ok(sol.f.diff_norm(&g)? / sol.f.norm().max(lit(1e-12)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepresenterBound<T> {
    /// `max ‖∇L(x, y, f(x))‖` over the atoms.
    pub lhs: T,
    /// `|L|_{B_λ,1}` with `B_λ = √(R(0)/λ)`.
    pub rhs: T,
    pub holds: bool,
}

pub fn representer_bound_check<T: Real>(
    sol: &SvmSolution<T>,
    data: &PairSet<T>,
    loss: &Loss<T>,
) -> Result<RepresenterBound<T>> {
    check_dim(data.output_dim(), sol.f.output_dim())?;
    let lhs = data
        .iter()
        .map(|(_, x, y)| norm(&loss.grad_unchecked(y, &sol.f.eval_unchecked(x))))
        .fold(T::zero(), T::max);
    let radius = (zero_risk(data, loss) / sol.lambda).sqrt() * sol.f.kernel.sup_bound();
    let rhs = loss.modulus_unchecked(radius.max(T::min_positive_value()));
    Ok(RepresenterBound { lhs, rhs, holds: lhs <= rhs + lit(1e-9) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityGap<T> {
    /// `‖f_J − f_I‖_H`
    pub lhs: T,
    /// `(1/λ)‖J(Φh_J) − I(Φh_J)‖_H`
    pub rhs: T,
}

/// Both sides of the stability inequality for two training measures.
pub fn stability_gap<T: Real>(
    j: &PairSet<T>,
    i: &PairSet<T>,
    kernel: &KernelSpec<T>,
    loss: &Loss<T>,
    lambda: T,
    opts: &SolverOptions<T>,
) -> Result<StabilityGap<T>> {
    check_lambda(lambda)?;
    check_dim(j.input_dim(), i.input_dim())?;
    check_dim(j.output_dim(), i.output_dim())?;
    let fj = fit(j, kernel, loss, lambda, opts)?;
    let fi = fit(i, kernel, loss, lambda, opts)?;
    let lhs = fj.f.diff_norm(&fi.f)?;
    let h = |x: &[T], y: &[T]| loss.grad_unchecked(y, &fj.f.eval_unchecked(x));
    let a = weighted_expansion(j, *kernel, h)?;
    let b = weighted_expansion(i, *kernel, h)?;
    let rhs = a.diff_norm(&b)? / lambda;
    Ok(StabilityGap { lhs, rhs })
}

/// `max |(G + λW⁻¹)B − Ȳ|` over the distinct inputs of a square-loss
/// solution; for `n` distinct uniform samples this is `‖(G + nλI)α − y‖∞`.
pub fn normal_equation_residual<T: Real>(sol: &SvmSolution<T>, data: &PairSet<T>) -> Result<T> {
    check_dim(data.output_dim(), sol.f.output_dim())?;
    let m = data.output_dim();
    let mut coeff_at: HashMap<_, Vec<T>> = HashMap::new();
    for (x, c) in sol.f.support.iter().zip(sol.f.coeffs.to_rows()) {
        let e = coeff_at.entry(point_key(x)).or_insert_with(|| vec![T::zero(); m]);
        for (a, b) in e.iter_mut().zip(c) {
            *a += b;
        }
    }
    let groups = data.groups();
    let mut mean = vec![vec![T::zero(); m]; groups.points.len()];
    for (j, (w, _, y)) in data.iter().enumerate() {
        let u = groups.member_of[j];
        for c in 0..m {
            mean[u][c] += w * y[c] / groups.weight[u];
        }
    }
    let zero = vec![T::zero(); m];
    let mut worst = T::zero();
    for (u, x) in groups.points.iter().enumerate() {
        let fx = sol.f.eval_unchecked(x);
        let b = coeff_at.get(&point_key(x)).unwrap_or(&zero);
        for c in 0..m {
            let r = fx[c] + sol.lambda * b[c] / groups.weight[u] - mean[u][c];
            worst = worst.max(r.abs());
        }
    }
    Ok(worst)
}

/// Largest decrease of the objective under single-coefficient perturbations
/// `±δ`; a value `≤ 0` (up to round-off) certifies local minimality.
pub fn optimality_probe<T: Real>(sol: &SvmSolution<T>, data: &PairSet<T>, loss: &Loss<T>, delta: T) -> Result<T> {
    let base = objective(&sol.f, data, loss, sol.lambda)?;
    let mut worst = T::neg_infinity();
    for r in 0..sol.f.coeffs.rows() {
        for c in 0..sol.f.coeffs.cols() {
            for s in [delta, -delta] {
                let mut g = sol.f.clone();
                g.coeffs.row_mut(r)[c] += s;
                worst = worst.max(base - objective(&g, data, loss, sol.lambda)?);
            }
        }
    }
    Ok(worst)
}
