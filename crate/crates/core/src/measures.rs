//! Finite discrete measures, the analytic limit families, and integration of
//! catalog test functions.

use std::borrow::Cow;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{PointMap, TestFunction};
use crate::linalg::Matrix;
use crate::processes::Trajectory;
use crate::scalar::{from_usize, point_key, tol, Real};

/// Weighted finite support on ℝ^d.
///
/// Empirical measures also remember atom multiplicities so that merging
/// atoms (e.g. under a pushforward) recomputes weights exactly as
/// `count / n` instead of summing rounded fractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscrete<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct DiscreteMeasure<T> {
    pub support: Vec<Vec<T>>,
    pub weights: Vec<T>,
    #[serde(skip)]
    counts: Option<(Vec<u64>, u64)>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiscrete<T> {
    support: Vec<Vec<T>>,
    weights: Vec<T>,
}

impl<T: Real> TryFrom<RawDiscrete<T>> for DiscreteMeasure<T> {
    type Error = Error;
    fn try_from(raw: RawDiscrete<T>) -> Result<Self> {
        DiscreteMeasure::new(raw.support, raw.weights)
    }
}

impl<T: Real> DiscreteMeasure<T> {
    pub fn new(support: Vec<Vec<T>>, weights: Vec<T>) -> Result<Self> {
        let m = Self { support, weights, counts: None };
        m.validate()?;
        Ok(m)
    }

    pub fn dirac(point: Vec<T>) -> Self {
        Self { support: vec![point], weights: vec![T::one()], counts: None }
    }

    /// Uniform weights over `support`.
    pub fn uniform(support: Vec<Vec<T>>) -> Result<Self> {
        let n = support.len();
        Self::new(support, vec![T::one() / from_usize(n.max(1)); n])
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "support has {} points but {} weights",
                self.support.len(),
                self.weights.len()
            )));
        }
        let d = self.dim();
        if let Some(p) = self.support.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        if self.weights.iter().any(|&w| !(w >= T::zero())) {
            return Err(Error::InvalidArgument("weights must be non-negative".into()));
        }
        let total: T = self.weights.iter().copied().sum();
        if (total - T::one()).abs() > tol(1e-12) {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.support.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Atom multiplicities and sample size, for empirical measures.
    pub fn multiplicities(&self) -> Option<(&[u64], u64)> {
        self.counts.as_ref().map(|(c, n)| (c.as_slice(), *n))
    }

    pub fn iter(&self) -> impl Iterator<Item = (T, &Vec<T>)> + '_ {
        self.weights.iter().copied().zip(&self.support)
    }

    pub fn integrate(&self, f: &TestFunction<T>) -> Result<T> {
        f.check_dim(self.dim())?;
        Ok(self.integrate_with(|x| f.eval(x)))
    }

    pub fn integrate_with(&self, f: impl Fn(&[T]) -> T) -> T {
        self.iter().map(|(w, x)| w * f(x)).sum()
    }

    /// Mass of the closed box `[lower, upper]`.
    pub fn mass_in_box(&self, lower: &[T], upper: &[T]) -> T {
        self.iter()
            .filter(|(_, x)| x.iter().zip(lower).zip(upper).all(|((&v, &lo), &hi)| v >= lo && v <= hi))
            .map(|(w, _)| w)
            .sum()
    }

    /// Image measure `m ∘ g⁻¹`, merging atoms that collide bitwise.
    pub fn pushforward(&self, map: &PointMap<T>) -> Self {
        self.merge_mapped(|x| map.apply(x))
    }

    /// Projection onto the first `k` coordinates.
    pub fn marginal(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim() {
            return Err(Error::InvalidArgument(format!("cannot project dimension {} onto {k}", self.dim())));
        }
        Ok(self.merge_mapped(|x| x[..k].to_vec()))
    }

    fn merge_mapped(&self, g: impl Fn(&[T]) -> Vec<T>) -> Self {
        let mut index: HashMap<Vec<(u64, i16, i8)>, usize> = HashMap::new();
        let mut support: Vec<Vec<T>> = Vec::new();
        let mut weights: Vec<T> = Vec::new();
        let mut counts: Vec<u64> = Vec::new();
        for (i, x) in self.support.iter().enumerate() {
            let y = g(x);
            let slot = *index.entry(point_key(&y)).or_insert_with(|| {
                support.push(y);
                weights.push(T::zero());
                counts.push(0);
                support.len() - 1
            });
            weights[slot] += self.weights[i];
            if let Some((c, _)) = &self.counts {
                counts[slot] += c[i];
            }
        }
        match &self.counts {
            Some((_, n)) => {
                let total = from_usize::<T>(*n as usize);
                let weights = counts.iter().map(|&c| from_usize::<T>(c as usize) / total).collect();
                Self { support, weights, counts: Some((counts, *n)) }
            }
            None => Self { support, weights, counts: None },
        }
    }

    /// Convex combination `θ·self + (1 − θ)·other` on the merged support.
    pub fn mixture(&self, theta: T, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        if !(theta >= T::zero() && theta <= T::one()) {
            return Err(Error::InvalidArgument("mixture weight must lie in [0, 1]".into()));
        }
        let mut support = self.support.clone();
        support.extend(other.support.iter().cloned());
        let mut weights: Vec<T> = self.weights.iter().map(|&w| theta * w).collect();
        weights.extend(other.weights.iter().map(|&w| (T::one() - theta) * w));
        Ok(Self { support, weights, counts: None }.merge_mapped(|x| x.to_vec()))
    }
}

/// Empirical measure `n⁻¹ Σ_{i≤n} δ_{X_i}` of a trajectory prefix, with
/// bitwise-identical points merged.
pub fn empirical<T: Real>(t: &Trajectory<T>, n: usize) -> Result<DiscreteMeasure<T>> {
    if n == 0 || n > t.len() {
        return Err(Error::InvalidArgument(format!("prefix {n} outside 1..={}", t.len())));
    }
    Ok(empirical_of_points(&t.points[..n]))
}

pub(crate) fn empirical_of_points<T: Real>(points: &[Vec<T>]) -> DiscreteMeasure<T> {
    let mut index: HashMap<Vec<(u64, i16, i8)>, usize> = HashMap::new();
    let mut support: Vec<Vec<T>> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    for p in points {
        let slot = *index.entry(point_key(p)).or_insert_with(|| {
            support.push(p.clone());
            counts.push(0);
            support.len() - 1
        });
        counts[slot] += 1;
    }
    let n = points.len() as u64;
    let total = from_usize::<T>(points.len());
    let weights = counts.iter().map(|&c| from_usize::<T>(c as usize) / total).collect();
    DiscreteMeasure { support, weights, counts: Some((counts, n)) }
}

/// Closed-form measure families realizing known limit measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum AnalyticMeasure<T> {
    Dirac(Vec<T>),
    /// `w·δ_a + (1 − w)·δ_b`.
    TwoPoint { w: T, a: Vec<T>, b: Vec<T> },
    FiniteMixture(Vec<(T, Vec<T>)>),
    /// Joint law of `(X, X')` with `X ~ marginal` and `X' ~ kernel(X, ·)`;
    /// the marginal's support doubles as the state set indexing the kernel.
    FiniteChainJoint { marginal: DiscreteMeasure<T>, kernel: Matrix<T> },
}

impl<T: Real> AnalyticMeasure<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Dirac(p) if p.is_empty() => Err(Error::InvalidArgument("empty Dirac point".into())),
            Self::Dirac(_) => Ok(()),
            Self::TwoPoint { w, a, b } => {
                if !(*w >= T::zero() && *w <= T::one()) {
                    return Err(Error::InvalidArgument("two-point weight outside [0,1]".into()));
                }
                if a.len() != b.len() {
                    return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
                }
                Ok(())
            }
            Self::FiniteMixture(atoms) => {
                let (w, x): (Vec<T>, Vec<Vec<T>>) = atoms.iter().cloned().unzip();
                DiscreteMeasure::new(x, w).map(|_| ())
            }
            Self::FiniteChainJoint { marginal, kernel } => {
                marginal.validate()?;
                if kernel.rows() != marginal.len() || kernel.cols() != marginal.len() {
                    return Err(Error::InvalidArgument("kernel shape does not match marginal support".into()));
                }
                kernel.check_row_stochastic(tol(1e-12))
            }
        }
    }

    /// Weighted atoms of the measure; zero-weight atoms are dropped.
    pub fn atoms(&self) -> Cow<'_, DiscreteMeasure<T>> {
        let raw = |support: Vec<Vec<T>>, weights: Vec<T>| {
            let (support, weights) = support
                .into_iter()
                .zip(weights)
                .filter(|(_, w)| *w > T::zero())
                .unzip();
            DiscreteMeasure { support, weights, counts: None }
        };
        Cow::Owned(match self {
            Self::Dirac(p) => DiscreteMeasure::dirac(p.clone()),
            Self::TwoPoint { w, a, b } => raw(vec![a.clone(), b.clone()], vec![*w, T::one() - *w]),
            Self::FiniteMixture(atoms) => {
                let (w, x) = atoms.iter().cloned().unzip();
                raw(x, w)
            }
            Self::FiniteChainJoint { marginal, kernel } => {
                let mut support = Vec::new();
                let mut weights = Vec::new();
                for (i, (p, x)) in marginal.iter().enumerate() {
                    for (j, next) in marginal.support.iter().enumerate() {
                        support.push([x.as_slice(), next.as_slice()].concat());
                        weights.push(p * kernel[(i, j)]);
                    }
                }
                raw(support, weights)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Dirac(p) => p.len(),
            Self::TwoPoint { a, .. } => a.len(),
            Self::FiniteMixture(atoms) => atoms.first().map_or(0, |(_, x)| x.len()),
            Self::FiniteChainJoint { marginal, .. } => 2 * marginal.dim(),
        }
    }

    pub fn integrate(&self, f: &TestFunction<T>) -> Result<T> {
        self.atoms().integrate(f)
    }
}

/// Anything with a finite weighted support.
pub trait FiniteMeasure<T: Real> {
    fn atoms(&self) -> Cow<'_, DiscreteMeasure<T>>;
}

impl<T: Real> FiniteMeasure<T> for DiscreteMeasure<T> {
    fn atoms(&self) -> Cow<'_, DiscreteMeasure<T>> {
        Cow::Borrowed(self)
    }
}

impl<T: Real> FiniteMeasure<T> for AnalyticMeasure<T> {
    fn atoms(&self) -> Cow<'_, DiscreteMeasure<T>> {
        AnalyticMeasure::atoms(self)
    }
}

/// `∫ f dm` for a catalog test function.
pub fn integrate<T: Real, M: FiniteMeasure<T> + ?Sized>(m: &M, f: &TestFunction<T>) -> Result<T> {
    m.atoms().integrate(f)
}

/// Joint measure `J(A×B) = Σ_{x∈A} P(x)·p(B, x)` of a marginal and a Markov kernel.
pub fn joint_from_kernel<T: Real>(marginal: &DiscreteMeasure<T>, kernel: &Matrix<T>) -> Result<AnalyticMeasure<T>> {
    let joint = AnalyticMeasure::FiniteChainJoint { marginal: marginal.clone(), kernel: kernel.clone() };
    joint.validate()?;
    Ok(joint)
}
