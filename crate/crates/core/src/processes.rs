//! Seeded generators for the EWC and non-EWC example processes, together with
//! the limit measure each realization converges to when one is known.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{PointMap, TestFunction};
use crate::linalg::{lu_solve, Matrix};
use crate::measures::{AnalyticMeasure, DiscreteMeasure};
use crate::rng::{categorical, rademacher, stream, Seed, Stream};
use crate::scalar::{from_usize, lit, tol, Real};

/// Number of series terms summed for the Cantor limit point; later terms are
/// below machine precision.
pub const CANTOR_TERMS: usize = 64;

/// Which process to draw from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum ProcessSpec<T> {
    /// `X_k = (1 − 1/k)·Y` with a single Rademacher `Y` per path.
    Hill,
    /// `X_1 = 1/2 + Y_1/3`, `X_{k+1} = X_k + Y_{k+1}/3^{k+1}`.
    Cantor,
    /// `X_k = (−1)^k`.
    Alternating,
    /// `X_1 ~ Bernoulli(1/2)`; `X_k = X_1` when `⌊log₁₀ k⌋` is even, else `1 − X_1`.
    LogSwitch,
    /// I.i.d. draws from a finite base measure.
    IidSampler { base: DiscreteMeasure<T> },
    FiniteMarkovChain { states: Vec<Vec<T>>, transition: Matrix<T>, initial: Vec<T> },
    /// Points `(x, g(x) + σ·ε)` with `x` from `inner` and Rademacher `ε`.
    NoisyFunction { inner: Box<ProcessSpec<T>>, target: TestFunction<T>, noise_std: T },
}

impl<T: Real> ProcessSpec<T> {
    pub fn id(&self) -> String {
        match self {
            Self::Hill => "hill".into(),
            Self::Cantor => "cantor".into(),
            Self::Alternating => "alternating".into(),
            Self::LogSwitch => "log_switch".into(),
            Self::IidSampler { .. } => "iid".into(),
            Self::FiniteMarkovChain { states, .. } => format!("chain{}", states.len()),
            Self::NoisyFunction { inner, target, noise_std } => {
                format!("noisy({};{target};{noise_std})", inner.id())
            }
        }
    }

    /// Dimension of the generated points.
    pub fn dim(&self) -> usize {
        match self {
            Self::Hill | Self::Cantor | Self::Alternating | Self::LogSwitch => 1,
            Self::IidSampler { base } => base.dim(),
            Self::FiniteMarkovChain { states, .. } => states.first().map_or(0, Vec::len),
            Self::NoisyFunction { inner, .. } => inner.dim() + 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Hill | Self::Cantor | Self::Alternating | Self::LogSwitch => Ok(()),
            Self::IidSampler { base } => base.validate(),
            Self::FiniteMarkovChain { states, transition, initial } => {
                let k = states.len();
                if k == 0 {
                    return Err(Error::InvalidSpec("chain needs at least one state".into()));
                }
                let d = states[0].len();
                if d == 0 || states.iter().any(|s| s.len() != d) {
                    return Err(Error::InvalidSpec("chain states must share a positive dimension".into()));
                }
                if transition.rows() != k || transition.cols() != k {
                    return Err(Error::InvalidSpec(format!(
                        "transition matrix is {}x{}, expected {k}x{k}",
                        transition.rows(),
                        transition.cols()
                    )));
                }
                transition.check_row_stochastic(tol(1e-12))?;
                if initial.len() != k {
                    return Err(Error::InvalidSpec("initial distribution length != state count".into()));
                }
                let s: T = initial.iter().copied().sum();
                if initial.iter().any(|&p| !(p >= T::zero())) || (s - T::one()).abs() > tol(1e-12) {
                    return Err(Error::InvalidSpec("initial distribution is not a probability vector".into()));
                }
                Ok(())
            }
            Self::NoisyFunction { inner, target, noise_std } => {
                if matches!(**inner, Self::NoisyFunction { .. }) {
                    return Err(Error::InvalidSpec("noisy functions cannot be nested".into()));
                }
                if !(*noise_std >= T::zero()) {
                    return Err(Error::InvalidSpec("noise std must be ≥ 0".into()));
                }
                inner.validate()?;
                target.check_dim(inner.dim()).map_err(|e| Error::InvalidSpec(e.to_string()))
            }
        }
    }
}

/// Finite realization `X_1, …, X_n` of a process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub points: Vec<Vec<T>>,
    pub dim: usize,
    pub seed: Seed,
    /// Process id, followed by `|map` for each transform applied.
    pub spec_id: String,
}

impl<T: Real> Trajectory<T> {
    pub fn new(points: Vec<Vec<T>>, seed: Seed, spec_id: impl Into<String>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.is_empty() || dim == 0 {
            return Err(Error::InvalidArgument("trajectory needs at least one point".into()));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
        }
        Ok(Self { points, dim, seed, spec_id: spec_id.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Scalar view for one-dimensional trajectories.
    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p[0]).collect()
    }
}

fn rademacher_t<T: Real, R: Rng>(rng: &mut R) -> T {
    lit(rademacher(rng))
}

/// First `n` values of the process for `seed`.
pub fn generate<T: Real>(spec: &ProcessSpec<T>, n: usize, seed: Seed) -> Result<Trajectory<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("trajectory length must be ≥ 1".into()));
    }
    spec.validate()?;
    let points: Vec<Vec<T>> = match spec {
        ProcessSpec::Hill => {
            let y: T = rademacher_t(&mut stream(seed, Stream::Hill));
            (1..=n).map(|k| vec![(T::one() - T::one() / from_usize(k)) * y]).collect()
        }
        ProcessSpec::Cantor => {
            let mut rng = stream(seed, Stream::Cantor);
            let three = lit::<T>(3.0);
            let mut scale = T::one() / three;
            let mut x = lit::<T>(0.5) + scale * rademacher_t(&mut rng);
            let mut out = Vec::with_capacity(n);
            out.push(vec![x]);
            for _ in 1..n {
                scale /= three;
                x += scale * rademacher_t(&mut rng);
                out.push(vec![x]);
            }
            out
        }
        ProcessSpec::Alternating => (1..=n)
            .map(|k| vec![if k % 2 == 0 { T::one() } else { -T::one() }])
            .collect(),
        ProcessSpec::LogSwitch => {
            let first = if stream(seed, Stream::LogSwitch).gen::<bool>() { T::one() } else { T::zero() };
            (1..=n)
                .map(|k| vec![if k.ilog10() % 2 == 0 { first } else { T::one() - first }])
                .collect()
        }
        ProcessSpec::IidSampler { base } => {
            let mut rng = stream(seed, Stream::Iid);
            let probs = to_f64(&base.weights);
            (0..n).map(|_| base.support[categorical(&mut rng, &probs)].clone()).collect()
        }
        ProcessSpec::FiniteMarkovChain { states, transition, initial } => {
            chain_path(transition, initial, n, seed).into_iter().map(|i| states[i].clone()).collect()
        }
        ProcessSpec::NoisyFunction { inner, target, noise_std } => {
            let base = generate(inner, n, seed)?;
            let mut rng = stream(seed, Stream::Noise);
            base.points
                .into_iter()
                .map(|mut x| {
                    let eps: T = rademacher_t(&mut rng);
                    let y = target.eval(&x) + *noise_std * eps;
                    x.push(y);
                    x
                })
                .collect()
        }
    };
    Trajectory::new(points, seed, spec.id())
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(0.0)).collect()
}

/// State indices of a chain path.
fn chain_path<T: Real>(transition: &Matrix<T>, initial: &[T], n: usize, seed: Seed) -> Vec<usize> {
    let rows: Vec<Vec<f64>> = (0..transition.rows()).map(|i| to_f64(transition.row(i))).collect();
    let mut init_rng = stream(seed, Stream::ChainInitial);
    let mut rng = stream(seed, Stream::ChainTransition);
    let mut state = categorical(&mut init_rng, &to_f64(initial));
    let mut out = Vec::with_capacity(n);
    out.push(state);
    for _ in 1..n {
        state = categorical(&mut rng, &rows[state]);
        out.push(state);
    }
    out
}

/// Result of asking for the limit measure of a realization.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitMeasure<T> {
    Known(AnalyticMeasure<T>),
    /// The process is not EWC; no limit exists to report.
    Unknown,
}

impl<T: Real> LimitMeasure<T> {
    pub fn known(self) -> Result<AnalyticMeasure<T>> {
        match self {
            Self::Known(m) => Ok(m),
            Self::Unknown => Err(Error::UndefinedTarget("process has no limit measure".into())),
        }
    }
}

/// The limit point of the Cantor path, `1/2 + Σ_{k≥1} Y_k / 3^k` truncated at
/// [`CANTOR_TERMS`] terms.
pub fn cantor_limit<T: Real>(seed: Seed) -> T {
    let mut rng = stream(seed, Stream::Cantor);
    let three = lit::<T>(3.0);
    let mut scale = T::one();
    let mut z = lit::<T>(0.5);
    for _ in 0..CANTOR_TERMS {
        scale /= three;
        z += scale * rademacher_t(&mut rng);
    }
    z
}

/// The limit measure of the realization drawn with `seed`, when the process
/// is EWC with an analytically known limit.
pub fn realized_limit_measure<T: Real>(spec: &ProcessSpec<T>, seed: Seed) -> Result<LimitMeasure<T>> {
    spec.validate()?;
    let m = match spec {
        ProcessSpec::Hill => {
            let y: T = rademacher_t(&mut stream(seed, Stream::Hill));
            AnalyticMeasure::Dirac(vec![y])
        }
        ProcessSpec::Cantor => AnalyticMeasure::Dirac(vec![cantor_limit(seed)]),
        ProcessSpec::Alternating => {
            AnalyticMeasure::TwoPoint { w: lit(0.5), a: vec![-T::one()], b: vec![T::one()] }
        }
        ProcessSpec::LogSwitch => return Ok(LimitMeasure::Unknown),
        ProcessSpec::IidSampler { base } => AnalyticMeasure::FiniteMixture(
            base.weights.iter().copied().zip(base.support.iter().cloned()).collect(),
        ),
        ProcessSpec::FiniteMarkovChain { states, transition, .. } => {
            let pi = stationary_distribution(transition)?;
            AnalyticMeasure::FiniteMixture(pi.into_iter().zip(states.iter().cloned()).collect())
        }
        ProcessSpec::NoisyFunction { inner, target, noise_std } => {
            let inner = match realized_limit_measure(inner, seed)? {
                LimitMeasure::Known(m) => m,
                LimitMeasure::Unknown => return Ok(LimitMeasure::Unknown),
            };
            let half = lit::<T>(0.5);
            let mut atoms = Vec::new();
            for (w, x) in inner.atoms().iter() {
                let g = target.eval(x);
                if *noise_std == T::zero() {
                    atoms.push((w, [x.as_slice(), &[g]].concat()));
                } else {
                    atoms.push((w * half, [x.as_slice(), &[g + *noise_std]].concat()));
                    atoms.push((w * half, [x.as_slice(), &[g - *noise_std]].concat()));
                }
            }
            AnalyticMeasure::FiniteMixture(atoms)
        }
    };
    Ok(LimitMeasure::Known(m))
}

/// True when every state reaches every other through nonzero transitions.
pub fn is_irreducible<T: Real>(transition: &Matrix<T>) -> bool {
    let k = transition.rows();
    (0..k).all(|start| {
        let mut seen = vec![false; k];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for j in 0..k {
                if !seen[j] && transition[(i, j)] > T::zero() {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.iter().all(|&s| s)
    })
}

/// Stationary distribution `π P = π`, `Σ π = 1` of an irreducible chain.
pub fn stationary_distribution<T: Real>(transition: &Matrix<T>) -> Result<Vec<T>> {
    let k = transition.rows();
    transition.check_row_stochastic(tol(1e-12))?;
    if !is_irreducible(transition) {
        return Err(Error::NoUniqueLimit("chain is reducible".into()));
    }
    // (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1
    let mut a = Matrix::from_fn(k, k, |i, j| {
        transition[(j, i)] - if i == j { T::one() } else { T::zero() }
    });
    for j in 0..k {
        a[(k - 1, j)] = T::one();
    }
    let mut b = vec![T::zero(); k];
    b[k - 1] = T::one();
    let pi = lu_solve(&a, &b)?;
    let residual = (0..k)
        .map(|j| ((0..k).map(|i| pi[i] * transition[(i, j)]).sum::<T>() - pi[j]).abs())
        .fold(T::zero(), T::max);
    if residual > tol(1e-10) || pi.iter().any(|&p| p < -tol::<T>(1e-10)) {
        return Err(Error::NumericalFailure(format!("stationary residual {residual}")));
    }
    Ok(pi.into_iter().map(|p| p.max(T::zero())).collect())
}

/// Pointwise image `g(X_k)` of a trajectory.
pub fn transform<T: Real>(t: &Trajectory<T>, map: &PointMap<T>) -> Trajectory<T> {
    Trajectory {
        points: t.points.iter().map(|p| map.apply(p)).collect(),
        dim: t.dim,
        seed: t.seed,
        spec_id: format!("{}|{map}", t.spec_id),
    }
}

/// `((X_1, X_2), …, (X_{n−1}, X_n))` as points of dimension `2d`.
pub fn transition_pairs<T: Real>(t: &Trajectory<T>) -> Result<Trajectory<T>> {
    if t.len() < 2 {
        return Err(Error::InsufficientData("transition pairs need at least two points".into()));
    }
    let points = t.points.windows(2).map(|w| [w[0].as_slice(), w[1].as_slice()].concat()).collect();
    Ok(Trajectory { points, dim: 2 * t.dim, seed: t.seed, spec_id: format!("{}|pairs", t.spec_id) })
}
