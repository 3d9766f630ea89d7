//! Excess risk of annealed-regularization estimators along one trajectory
//! per seed, measured against the realized limit measure.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bayes_risk, fit, risk, PairSet, SolverOptions};
use crate::ckme::{ckme_bayes_risk, fit_ckme};
use crate::embeddings::mmd;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::Loss;
use crate::measures::{empirical, joint_from_kernel, DiscreteMeasure};
use crate::processes::{generate, realized_limit_measure, stationary_distribution, transition_pairs, ProcessSpec};
use crate::rng::Seed;
use crate::scalar::{from_usize, Real};

/// Regularization schedule `λ_n = c·n^{−α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule<T> {
    pub c: T,
    pub alpha: T,
}

impl<T: Real> Default for Schedule<T> {
    fn default() -> Self {
        Self { c: T::one(), alpha: crate::scalar::lit(0.5) }
    }
}

impl<T: Real> Schedule<T> {
    pub fn new(c: T, alpha: T) -> Result<Self> {
        let s = Self { c, alpha };
        s.validate()?;
        Ok(s)
    }

    /// Requires `c > 0` and `0 < α < 1`, so that `λ_n → 0` while `nλ_n → ∞`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > T::zero() && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("schedule constant must be positive, got {}", self.c)));
        }
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(Error::InvalidArgument(format!("schedule exponent must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn lambda(&self, n: usize) -> T {
        self.c * from_usize::<T>(n).powf(-self.alpha)
    }
}

/// What is fitted at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Estimator<T> {
    /// Scalar or vector outputs with the configured loss.
    Svm,
    /// Conditional mean embedding with the given output kernel; risks are
    /// feature-space square losses.
    Ckme { output_kernel: KernelSpec<T> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySetup<T> {
    /// A finite Markov chain (fitted on its transition pairs) or a noisy
    /// function of an EWC process.
    pub process: ProcessSpec<T>,
    pub kernel: KernelSpec<T>,
    pub loss: Loss<T>,
    pub estimator: Estimator<T>,
    pub schedule: Schedule<T>,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<Seed>,
    pub solver: SolverOptions<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskCurveRecord<T> {
    pub seed: u64,
    pub n: usize,
    pub lambda: T,
    pub empirical_risk: T,
    pub limit_risk: T,
    pub bayes_risk: T,
    /// `limit_risk − bayes_risk`
    pub excess: T,
    /// MMD between the training pairs and the limit measure.
    pub mmd_to_limit: T,
}

impl<T> RiskCurveRecord<T> {
    pub const HEADER: [&'static str; 8] =
        ["seed", "n", "lambda", "empirical_risk", "limit_risk", "bayes_risk", "excess", "mmd_to_limit"];
}

/// Pairs drawn from one path, and the limit measure they converge to.
struct PathData<T> {
    pairs: crate::processes::Trajectory<T>,
    input_dim: usize,
    limit: PairSet<T>,
}

fn path_data<T: Real>(process: &ProcessSpec<T>, n_max: usize, seed: Seed) -> Result<PathData<T>> {
    match process {
        ProcessSpec::FiniteMarkovChain { states, transition, .. } => {
            let pi = stationary_distribution(transition)?;
            let marginal = DiscreteMeasure::new(states.clone(), pi)?;
            let joint = joint_from_kernel(&marginal, transition)?;
            let pairs = transition_pairs(&generate(process, n_max + 1, seed)?)?;
            let d = process.dim();
            Ok(PathData { pairs, input_dim: d, limit: PairSet::from_measure(&joint, d)? })
        }
        ProcessSpec::NoisyFunction { inner, .. } => {
            let limit = realized_limit_measure(process, seed)?.known()?;
            let d = inner.dim();
            Ok(PathData { pairs: generate(process, n_max, seed)?, input_dim: d, limit: PairSet::from_measure(&limit, d)? })
        }
        // A process without a limit has no target risk, whatever its shape.
        ProcessSpec::LogSwitch => Err(Error::UndefinedTarget("log-switch paths have no limit measure".into())),
        other => Err(Error::InvalidArgument(format!(
            "consistency runs need a Markov chain or a noisy function, got {}",
            other.id()
        ))),
    }
}

fn check_setup<T: Real>(setup: &ConsistencySetup<T>) -> Result<()> {
    setup.schedule.validate()?;
    setup.kernel.validate()?;
    setup.loss.validate()?;
    if let Estimator::Ckme { output_kernel } = &setup.estimator {
        output_kernel.validate()?;
    }
    setup.process.validate()?;
    if setup.seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if setup.n_grid.is_empty() || setup.n_grid[0] == 0 || setup.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n grid must be non-empty, positive and strictly increasing".into()));
    }
    Ok(())
}

fn record<T: Real>(setup: &ConsistencySetup<T>, path: &PathData<T>, seed: Seed, n: usize) -> Result<RiskCurveRecord<T>> {
    let lambda = setup.schedule.lambda(n);
    let sample = empirical(&path.pairs, n)?;
    let data = PairSet::from_measure(&sample, path.input_dim)?;
    let limit_joint = path.limit.to_measure()?;
    let mmd_to_limit = mmd(&sample, &limit_joint, &setup.kernel)?;
    let (empirical_risk, limit_risk, bayes) = match &setup.estimator {
        Estimator::Svm => {
            let data = data.clip_outputs(setup.loss.output_bound);
            let sol = fit(&data, &setup.kernel, &setup.loss, lambda, &setup.solver)?;
            (
                risk(&sol.f, &data, &setup.loss)?,
                risk(&sol.f, &path.limit, &setup.loss)?,
                bayes_risk(&path.limit, &setup.loss)?,
            )
        }
        Estimator::Ckme { output_kernel } => {
            let model = fit_ckme(&data, &setup.kernel, output_kernel, lambda)?;
            (
                model.feature_risk(&data)?,
                model.feature_risk(&path.limit)?,
                ckme_bayes_risk(&path.limit, output_kernel),
            )
        }
    };
    Ok(RiskCurveRecord {
        seed: seed.0,
        n,
        lambda,
        empirical_risk,
        limit_risk,
        bayes_risk: bayes,
        excess: limit_risk - bayes,
        mmd_to_limit,
    })
}

/// One record per `(seed, n)`, sorted by seed then `n`. Each seed uses a
/// single path whose prefixes give the training sets of the grid.
pub fn consistency_experiment<T: Real>(setup: &ConsistencySetup<T>) -> Result<Vec<RiskCurveRecord<T>>> {
    check_setup(setup)?;
    let n_max = *setup.n_grid.last().expect("checked non-empty");
    let per_seed: Vec<Vec<RiskCurveRecord<T>>> = setup
        .seeds
        .par_iter()
        .map(|&seed| {
            let path = path_data(&setup.process, n_max, seed)?;
            setup.n_grid.iter().map(|&n| record(setup, &path, seed, n)).collect()
        })
        .collect::<Result<_>>()?;
    let mut records: Vec<_> = per_seed.into_iter().flatten().collect();
    records.sort_by_key(|r| (r.seed, r.n));
    Ok(records)
}

/// Means over seeds at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedAverage<T> {
    pub n: usize,
    pub lambda: T,
    pub seeds: usize,
    pub empirical_risk: T,
    pub limit_risk: T,
    pub bayes_risk: T,
    pub excess: T,
    pub mmd_to_limit: T,
}

/// Seed-averaged records in increasing `n`, summed in record order.
pub fn seed_averages<T: Real>(records: &[RiskCurveRecord<T>]) -> Vec<SeedAverage<T>> {
    let mut by_n: BTreeMap<usize, Vec<&RiskCurveRecord<T>>> = BTreeMap::new();
    for r in records {
        by_n.entry(r.n).or_default().push(r);
    }
    by_n.into_iter()
        .map(|(n, rs)| {
            let k = from_usize::<T>(rs.len());
            let mean = |g: fn(&RiskCurveRecord<T>) -> T| rs.iter().map(|r| g(r)).sum::<T>() / k;
            SeedAverage {
                n,
                lambda: mean(|r| r.lambda),
                seeds: rs.len(),
                empirical_risk: mean(|r| r.empirical_risk),
                limit_risk: mean(|r| r.limit_risk),
                bayes_risk: mean(|r| r.bayes_risk),
                excess: mean(|r| r.excess),
                mmd_to_limit: mean(|r| r.mmd_to_limit),
            }
        })
        .collect()
}
