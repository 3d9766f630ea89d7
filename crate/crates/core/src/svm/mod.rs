//! Regularized kernel risk minimization
//! `f_{J,λ} = argmin_f R_{L,J}(f) + λ‖f‖²_H` over finite-support measures `J`.
//!
//! Training sets enter as their empirical measure: identical `(x, y)` pairs
//! are merged, and the solution is expanded over the distinct inputs. For
//! samples without repeated inputs this is the usual `n`-term expansion; for
//! processes on a finite state set it keeps the linear systems at the size of
//! the state set no matter how long the trajectory is.

mod battery;
mod consistency;
mod solve;
mod verify;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use battery::{run_battery, BatteryConfig, BatteryFailure, BatteryReport, CheckSummary};
pub use consistency::{
    consistency_experiment, seed_averages, ConsistencySetup, Estimator, RiskCurveRecord, Schedule,
    SeedAverage,
};
pub use solve::{fit, solve_general, solve_square, SolverOptions};
pub use verify::{
    normal_equation_residual, optimality_probe, representer_bound_check, representer_residual,
    stability_gap, RepresenterBound, StabilityGap,
};

use crate::error::{check_dim, Error, Result};
use crate::kernels::RkhsVector;
use crate::losses::{Loss, LossFamily};
use crate::measures::{DiscreteMeasure, FiniteMeasure};
use crate::processes::Trajectory;
use crate::scalar::{point_key, tol, Real};

/// Weighted input–output atoms: a finite measure on `X × Y` with `Y ⊂ ℝ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet<T> {
    inputs: Vec<Vec<T>>,
    outputs: Vec<Vec<T>>,
    weights: Vec<T>,
}

/// Atoms grouped by bitwise-identical input.
#[derive(Debug, Clone)]
pub(crate) struct InputGroups<T> {
    pub points: Vec<Vec<T>>,
    /// Group index of every atom.
    pub member_of: Vec<usize>,
    pub weight: Vec<T>,
}

impl<T: Real> PairSet<T> {
    /// Empirical measure of a training sample.
    pub fn from_samples(inputs: &[Vec<T>], outputs: &[Vec<T>]) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InsufficientData("training set is empty".into()));
        }
        check_dim(inputs.len(), outputs.len())?;
        let joint: Vec<Vec<T>> =
            inputs.iter().zip(outputs).map(|(x, y)| [x.as_slice(), y.as_slice()].concat()).collect();
        let d = inputs[0].len();
        for (x, y) in inputs.iter().zip(outputs) {
            check_dim(d, x.len())?;
            check_dim(outputs[0].len(), y.len())?;
        }
        let m = crate::measures::empirical_of_points(&joint);
        Self::from_measure(&m, d)
    }

    /// Splits each point of a product-space trajectory after `input_dim`
    /// coordinates and takes the empirical measure.
    pub fn from_trajectory(t: &Trajectory<T>, input_dim: usize) -> Result<Self> {
        Self::from_measure(&crate::measures::empirical(t, t.len())?, input_dim)
    }

    /// Splits a measure on the product space after `input_dim` coordinates.
    pub fn from_measure<M: FiniteMeasure<T> + ?Sized>(m: &M, input_dim: usize) -> Result<Self> {
        let atoms = m.atoms();
        if input_dim == 0 || input_dim >= atoms.dim() {
            return Err(Error::InvalidArgument(format!(
                "cannot split {}-dimensional atoms after {input_dim} coordinates",
                atoms.dim()
            )));
        }
        let mut set = Self { inputs: Vec::new(), outputs: Vec::new(), weights: Vec::new() };
        for (w, p) in atoms.iter() {
            if w > T::zero() {
                set.inputs.push(p[..input_dim].to_vec());
                set.outputs.push(p[input_dim..].to_vec());
                set.weights.push(w);
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn output_dim(&self) -> usize {
        self.outputs.first().map_or(0, Vec::len)
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<T>] {
        &self.outputs
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// `(w, x, y)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (T, &[T], &[T])> + '_ {
        self.weights
            .iter()
            .zip(&self.inputs)
            .zip(&self.outputs)
            .map(|((&w, x), y)| (w, x.as_slice(), y.as_slice()))
    }

    /// The same atoms as one measure on the product space.
    pub fn to_measure(&self) -> Result<DiscreteMeasure<T>> {
        let support = self.inputs.iter().zip(&self.outputs).map(|(x, y)| [x.as_slice(), y.as_slice()].concat()).collect();
        DiscreteMeasure::new(support, self.weights.clone())
    }

    /// Projects every output onto the closed ball of radius `bound`.
    pub fn clip_outputs(&self, bound: T) -> Self {
        let outputs = self
            .outputs
            .iter()
            .map(|y| {
                let r = crate::scalar::norm(y);
                if r > bound {
                    y.iter().map(|&v| v * bound / r).collect()
                } else {
                    y.clone()
                }
            })
            .collect();
        Self { inputs: self.inputs.clone(), outputs, weights: self.weights.clone() }
    }

    pub fn max_output_norm(&self) -> T {
        self.outputs.iter().map(|y| crate::scalar::norm(y)).fold(T::zero(), T::max)
    }

    pub(crate) fn groups(&self) -> InputGroups<T> {
        let mut index: HashMap<Vec<(u64, i16, i8)>, usize> = HashMap::new();
        let mut points = Vec::new();
        let mut weight = Vec::new();
        let mut member_of = Vec::with_capacity(self.len());
        for (w, x, _) in self.iter() {
            let g = *index.entry(point_key(x)).or_insert_with(|| {
                points.push(x.to_vec());
                weight.push(T::zero());
                points.len() - 1
            });
            weight[g] += w;
            member_of.push(g);
        }
        InputGroups { points, member_of, weight }
    }
}

/// How a solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolverInfo<T> {
    /// Linear solve of the square-loss normal equations.
    ClosedForm { jitter: T },
    /// Functional gradient descent with backtracking.
    FirstOrder { iterations: usize, grad_norm: T, converged: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution<T> {
    pub f: RkhsVector<T>,
    pub lambda: T,
    /// `R_{L,J}(f) + λ‖f‖²_H` at the returned `f`.
    pub objective: T,
    pub solver: SolverInfo<T>,
}

/// `R_{L,J}(f) = Σ w·L(x, y, f(x))`.
pub fn risk<T: Real>(f: &RkhsVector<T>, data: &PairSet<T>, loss: &Loss<T>) -> Result<T> {
    check_dim(data.output_dim(), f.output_dim())?;
    if let Some(d) = f.input_dim() {
        check_dim(data.input_dim(), d)?;
    }
    Ok(risk_with(|x| f.eval_unchecked(x), data, loss))
}

/// Risk of an arbitrary predictor.
pub fn risk_with<T: Real>(predict: impl Fn(&[T]) -> Vec<T>, data: &PairSet<T>, loss: &Loss<T>) -> T {
    data.iter().map(|(w, x, y)| w * loss.value_unchecked(y, &predict(x))).sum()
}

/// `R_{L,J}(0)`.
pub fn zero_risk<T: Real>(data: &PairSet<T>, loss: &Loss<T>) -> T {
    let zero = vec![T::zero(); data.output_dim()];
    data.iter().map(|(w, _, y)| w * loss.value_unchecked(y, &zero)).sum()
}

/// Regularized objective `R_{L,J}(f) + λ‖f‖²_H`.
pub fn objective<T: Real>(f: &RkhsVector<T>, data: &PairSet<T>, loss: &Loss<T>, lambda: T) -> Result<T> {
    Ok(risk(f, data, loss)? + lambda * f.norm_squared())
}

/// Bayes risk `Σ_x J_X(x)·min_t E[L(x, Y, t) | X = x]` of a finite measure.
pub fn bayes_risk<T: Real>(data: &PairSet<T>, loss: &Loss<T>) -> Result<T> {
    loss.validate()?;
    let groups = data.groups();
    let m = data.output_dim();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups.points.len()];
    for (j, &g) in groups.member_of.iter().enumerate() {
        members[g].push(j);
    }
    let mut total = T::zero();
    for (g, idx) in members.iter().enumerate() {
        let wg = groups.weight[g];
        if wg == T::zero() {
            continue;
        }
        let best: Vec<T> = match loss.family {
            LossFamily::Square => (0..m)
                .map(|c| idx.iter().map(|&j| data.weights[j] * data.outputs[j][c]).sum::<T>() / wg)
                .collect(),
            LossFamily::LogCosh => (0..m)
                .map(|c| {
                    let ys: Vec<(T, T)> = idx.iter().map(|&j| (data.weights[j], data.outputs[j][c])).collect();
                    minimize_log_cosh(&ys)
                })
                .collect(),
        };
        total += idx.iter().map(|&j| data.weights[j] * loss.value_unchecked(&data.outputs[j], &best)).sum::<T>();
    }
    Ok(total)
}

/// Minimizer of `t ↦ Σ w·log cosh(y − t)` by golden-section search on the
/// hull of the `y` values.
fn minimize_log_cosh<T: Real>(atoms: &[(T, T)]) -> T {
    let obj = |t: T| atoms.iter().map(|&(w, y)| w * crate::losses::log_cosh(y - t)).sum::<T>();
    let mut lo = atoms.iter().map(|a| a.1).fold(T::infinity(), T::min);
    let mut hi = atoms.iter().map(|a| a.1).fold(T::neg_infinity(), T::max);
    let phi = (T::one() + crate::scalar::lit::<T>(5.0).sqrt()) / crate::scalar::lit(2.0);
    let inv = T::one() / phi;
    let eps = tol::<T>(1e-10);
    let mut a = hi - (hi - lo) * inv;
    let mut b = lo + (hi - lo) * inv;
    let (mut fa, mut fb) = (obj(a), obj(b));
    while hi - lo > eps {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - (hi - lo) * inv;
            fa = obj(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + (hi - lo) * inv;
            fb = obj(b);
        }
    }
    (lo + hi) / crate::scalar::lit(2.0)
}

pub(crate) fn check_lambda<T: Real>(lambda: T) -> Result<()> {
    if lambda > T::zero() && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("regularization must be positive, got {lambda}")))
    }
}
