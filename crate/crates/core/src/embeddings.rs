//! Kernel mean embeddings, MMD, and diagnostics of empirical weak
//! convergence along a single trajectory.

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::TestFunction;
use crate::kernels::{KernelSpec, RkhsVector};
use crate::linalg::Matrix;
use crate::measures::{empirical, FiniteMeasure};
use crate::processes::Trajectory;
use crate::scalar::{from_usize, lit, point_key, Decoded, Real};

/// `μ_m = Σ w·k(·, x)` over the atoms of `m`.
pub fn kme<T: Real, M: FiniteMeasure<T> + ?Sized>(m: &M, k: &KernelSpec<T>) -> RkhsVector<T> {
    let atoms = m.atoms();
    RkhsVector {
        support: atoms.support.clone(),
        coeffs: Matrix::column(&atoms.weights),
        kernel: *k,
    }
}

/// `‖μ_p − μ_q‖_H`, exact for finite supports.
pub fn mmd<T: Real, P, Q>(p: &P, q: &Q, k: &KernelSpec<T>) -> Result<T>
where
    P: FiniteMeasure<T> + ?Sized,
    Q: FiniteMeasure<T> + ?Sized,
{
    k.validate()?;
    let (a, b) = (kme(p, k), kme(q, k));
    // a fixed argument order makes the floating-point result exactly symmetric
    if canonical_key(&b) < canonical_key(&a) {
        b.diff_norm(&a)
    } else {
        a.diff_norm(&b)
    }
}

fn canonical_key<T: Real>(f: &RkhsVector<T>) -> Vec<(Vec<Decoded>, Vec<Decoded>)> {
    f.support.iter().enumerate().map(|(i, x)| (point_key(x), point_key(f.coeffs.row(i)))).collect()
}

/// Values of some statistic along an increasing grid of prefix lengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries<T> {
    pub n_values: Vec<usize>,
    pub values: Vec<T>,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converging,
    NotConverging,
}

/// Trend summary of a distance series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesVerdict<T> {
    pub verdict: Verdict,
    pub first: T,
    pub last: T,
    pub threshold: T,
}

impl<T: Real> ConvergenceSeries<T> {
    pub fn new(n_values: Vec<usize>, values: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if n_values.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: n_values.len(), got: values.len() });
        }
        check_grid(&n_values)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("series contains a non-finite value".into()));
        }
        Ok(Self { n_values, values, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Converging when the last value is at most half the first and at most
    /// `threshold`.
    pub fn verdict(&self, threshold: T) -> SeriesVerdict<T> {
        let first = self.values.first().copied().unwrap_or_else(T::zero);
        let last = self.values.last().copied().unwrap_or_else(T::zero);
        let ok = !self.is_empty() && last <= first * lit(0.5) && last <= threshold;
        SeriesVerdict { verdict: if ok { Verdict::Converging } else { Verdict::NotConverging }, first, last, threshold }
    }

    /// True when each value is at most the previous one plus `slack`.
    pub fn is_non_increasing(&self, slack: T) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0] + slack)
    }

    /// Pointwise mean of series sharing one grid.
    pub fn average(series: &[Self], label: impl Into<String>) -> Result<Self> {
        let first = series.first().ok_or_else(|| Error::InsufficientData("no series to average".into()))?;
        if series.iter().any(|s| s.n_values != first.n_values) {
            return Err(Error::InvalidArgument("series use different grids".into()));
        }
        let count = from_usize::<T>(series.len());
        let values = (0..first.len()).map(|i| series.iter().map(|s| s.values[i]).sum::<T>() / count).collect();
        Self::new(first.n_values.clone(), values, label)
    }
}

fn check_grid(n_grid: &[usize]) -> Result<()> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
    }
    if n_grid.first() == Some(&0) {
        return Err(Error::InvalidArgument("grid values must be positive".into()));
    }
    Ok(())
}

fn check_within<T: Real>(t: &Trajectory<T>, n_grid: &[usize]) -> Result<()> {
    check_grid(n_grid)?;
    match n_grid.last() {
        Some(&n) if n > t.len() => {
            Err(Error::InvalidArgument(format!("grid reaches {n} but trajectory has {} points", t.len())))
        }
        _ => Ok(()),
    }
}

/// `MMD(η_n, limit)` along the grid.
pub fn ewc_diagnostic<T: Real, M: FiniteMeasure<T> + ?Sized>(
    t: &Trajectory<T>,
    limit: &M,
    k: &KernelSpec<T>,
    n_grid: &[usize],
) -> Result<ConvergenceSeries<T>> {
    check_within(t, n_grid)?;
    let limit = limit.atoms();
    let values = n_grid
        .iter()
        .map(|&n| mmd(&empirical(t, n)?, limit.as_ref(), k))
        .collect::<Result<Vec<_>>>()?;
    ConvergenceSeries::new(n_grid.to_vec(), values, format!("mmd:{}", t.spec_id))
}

/// Empirical averages `η_n f` along the grid; values may be negative.
pub fn cb_average_series<T: Real>(t: &Trajectory<T>, f: &TestFunction<T>, n_grid: &[usize]) -> Result<ConvergenceSeries<T>> {
    check_within(t, n_grid)?;
    f.check_dim(t.dim)?;
    let mut values = Vec::with_capacity(n_grid.len());
    let mut sum = T::zero();
    let mut done = 0;
    for &n in n_grid {
        for p in &t.points[done..n] {
            sum += f.eval(p);
        }
        done = n;
        values.push(sum / from_usize(n));
    }
    ConvergenceSeries::new(n_grid.to_vec(), values, format!("avg:{f}"))
}

/// One checkpoint `n_p = 10^p − 1` of the oscillation probe.
#[derive(Debug, Clone, PartialEq)]
pub struct OscillationRow {
    pub p: u32,
    /// Cesàro average `u_{n_p}`.
    pub u: BigRational,
    /// `v_p = u_{n_{p+1}} − u_{n_p}`.
    pub v: BigRational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationReport {
    pub rows: Vec<OscillationRow>,
    /// `0.8 · 0.9 · |f(X_1) − f(1 − X_1)|`
    pub threshold: BigRational,
    /// `|v_p|` reaches the threshold at the two largest `p`.
    pub non_convergent: bool,
}

fn exact<T: Real>(x: T) -> Result<BigRational> {
    x.to_f64()
        .and_then(BigRational::from_float)
        .ok_or_else(|| Error::NumericalFailure(format!("{x} has no exact rational value")))
}

/// Exact Cesàro averages of `f` along a log-switching path at the checkpoints
/// `n_p = 10^p − 1`, `p = 1..=p_max`, and their increments.
pub fn oscillation_probe<T: Real>(t: &Trajectory<T>, f: &TestFunction<T>, p_max: u32) -> Result<OscillationReport> {
    if p_max == 0 {
        return Err(Error::InvalidArgument("p_max must be ≥ 1".into()));
    }
    f.check_dim(t.dim)?;
    let checkpoint = |p: u32| -> Option<usize> { 10usize.checked_pow(p).map(|v| v - 1) };
    let needed = checkpoint(p_max + 1).ok_or_else(|| Error::InvalidArgument(format!("p_max {p_max} too large")))?;
    if t.len() < needed {
        return Err(Error::InvalidArgument(format!(
            "probe up to p = {p_max} needs {needed} points, trajectory has {}",
            t.len()
        )));
    }
    let mut averages = Vec::with_capacity(p_max as usize + 1);
    let mut sum = BigRational::zero();
    let mut done = 0;
    for p in 1..=p_max + 1 {
        let n = checkpoint(p).expect("checked above");
        for x in &t.points[done..n] {
            sum += exact(f.eval(x))?;
        }
        done = n;
        averages.push(&sum / BigRational::from_integer(n.into()));
    }
    let rows: Vec<OscillationRow> = (0..p_max as usize)
        .map(|i| OscillationRow { p: i as u32 + 1, u: averages[i].clone(), v: &averages[i + 1] - &averages[i] })
        .collect();

    let x1 = &t.points[0];
    let flipped: Vec<T> = x1.iter().map(|&v| T::one() - v).collect();
    let gap = (exact(f.eval(x1))? - exact(f.eval(&flipped))?).abs();
    let threshold = gap * BigRational::new(72.into(), 100.into());
    let tail = &rows[rows.len().saturating_sub(2)..];
    let non_convergent = !threshold.is_zero() && tail.iter().all(|r| r.v.abs() >= threshold);
    Ok(OscillationReport { rows, threshold, non_convergent })
}

impl OscillationRow {
    pub fn u_f64(&self) -> f64 {
        self.u.to_f64().unwrap_or(f64::NAN)
    }

    pub fn v_f64(&self) -> f64 {
        self.v.to_f64().unwrap_or(f64::NAN)
    }
}

/// Axis-aligned box with the empirical masses it receives at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub checkpoints: Vec<usize>,
    pub masses: Vec<T>,
}

impl<T: Real> TightBox<T> {
    pub fn contains(&self, x: &[T]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((&v, &a), &b)| a <= v && v <= b)
    }
}

/// Checkpoints `2^k ≤ len`.
pub fn power_of_two_checkpoints(len: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |&n| n.checked_mul(2)).take_while(|&n| n <= len).collect()
}

/// A box receiving empirical mass `≥ 1 − eps` at every checkpoint `2^k`.
///
/// Candidates trim `j` order statistics from each end of every coordinate;
/// the largest feasible `j` (smallest box) is found by bisection, since
/// masses only grow as `j` shrinks and `j = 0` always qualifies.
pub fn tightness_set<T: Real>(t: &Trajectory<T>, eps: T) -> Result<TightBox<T>> {
    if !(eps > T::zero() && eps < T::one()) {
        return Err(Error::InvalidArgument(format!("eps must lie in (0, 1), got {eps}")));
    }
    let n = t.len();
    let d = t.dim;
    let sorted: Vec<Vec<T>> = (0..d)
        .map(|c| {
            let mut v: Vec<T> = t.points.iter().map(|p| p[c]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).expect("finite trajectory values"));
            v
        })
        .collect();
    let checkpoints = power_of_two_checkpoints(n);
    let target = T::one() - eps;
    let candidate = |j: usize| -> TightBox<T> {
        let lower = sorted.iter().map(|v| v[j]).collect();
        let upper = sorted.iter().map(|v| v[n - 1 - j]).collect();
        let mut b = TightBox { lower, upper, checkpoints: checkpoints.clone(), masses: Vec::new() };
        let mut inside = 0usize;
        let mut done = 0;
        for &c in &checkpoints {
            inside += t.points[done..c].iter().filter(|p| b.contains(p)).count();
            done = c;
            b.masses.push(from_usize::<T>(inside) / from_usize(c));
        }
        b
    };
    let feasible = |b: &TightBox<T>| b.masses.iter().all(|&m| m >= target);

    let start = (eps.to_f64().unwrap_or(0.0) * n as f64 / (2.0 * d as f64)).floor() as usize;
    let (mut lo, mut hi) = (0usize, start.min((n - 1) / 2));
    let mut best = candidate(0);
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        let b = candidate(mid);
        if feasible(&b) {
            best = b;
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;
    use crate::processes::{generate, ProcessSpec};
    use crate::rng::Seed;

    fn g1() -> KernelSpec<f64> {
        KernelSpec::gaussian(1.0).unwrap()
    }

    #[test]
    fn kme_examples() {
        let e = kme(&DiscreteMeasure::dirac(vec![0.5]), &g1());
        assert_eq!(e.support, vec![vec![0.5]]);
        assert_eq!(e.coeffs.as_slice(), &[1.0]);

        let alt = generate(&ProcessSpec::<f64>::Alternating, 4, Seed(0)).unwrap();
        let e = kme(&empirical(&alt, 4).unwrap(), &g1());
        assert_eq!(e.coeffs.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn mmd_examples() {
        let a = DiscreteMeasure::dirac(vec![0.0]);
        let b = DiscreteMeasure::dirac(vec![1.0]);
        assert_eq!(mmd(&a, &a, &g1()).unwrap(), 0.0);
        let expected = (2.0 - 2.0 * (-0.5f64).exp()).sqrt();
        assert!((mmd(&a, &b, &g1()).unwrap() - expected).abs() < 1e-14);
        assert_eq!(mmd(&a, &b, &g1()).unwrap(), mmd(&b, &a, &g1()).unwrap());
    }

    #[test]
    fn alternating_series_is_exact_at_even_n() {
        let alt = generate(&ProcessSpec::<f64>::Alternating, 100, Seed(0)).unwrap();
        let half = DiscreteMeasure::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        let s = ewc_diagnostic(&alt, &half, &g1(), &[10, 11, 100]).unwrap();
        assert_eq!(s.values[0], 0.0);
        assert!(s.values[1] > 0.0 && s.values[1] <= 1.0 / 11.0 * 2.0);
        assert_eq!(s.values[2], 0.0);
    }

    #[test]
    fn wrong_limit_stays_away() {
        let alt = generate(&ProcessSpec::<f64>::Alternating, 1000, Seed(0)).unwrap();
        let s = ewc_diagnostic(&alt, &DiscreteMeasure::dirac(vec![1.0]), &g1(), &[10, 100, 1000]).unwrap();
        assert!(s.values.iter().all(|&v| v >= 0.3));
        assert_eq!(s.verdict(0.05).verdict, Verdict::NotConverging);
    }

    #[test]
    fn grid_validation() {
        let alt = generate(&ProcessSpec::<f64>::Alternating, 10, Seed(0)).unwrap();
        let half = DiscreteMeasure::uniform(vec![vec![-1.0], vec![1.0]]).unwrap();
        assert!(ewc_diagnostic(&alt, &half, &g1(), &[5, 5]).is_err());
        assert!(ewc_diagnostic(&alt, &half, &g1(), &[5, 11]).is_err());
        assert!(ConvergenceSeries::new(vec![1, 2], vec![0.0], "x").is_err());
    }

    #[test]
    fn cb_averages() {
        let alt = generate(&ProcessSpec::<f64>::Alternating, 101, Seed(0)).unwrap();
        let s = cb_average_series(&alt, &TestFunction::Coordinate { index: 0 }, &[1, 2, 3, 100, 101]).unwrap();
        for (&n, &v) in s.n_values.iter().zip(&s.values) {
            assert!(v.abs() <= 1.0 / n as f64);
        }
        let s = cb_average_series(&alt, &TestFunction::Constant { value: 1.0 }, &[1, 7, 50]).unwrap();
        assert_eq!(s.values, vec![1.0; 3]);
    }

    #[test]
    fn tightness_of_bounded_path() {
        let t = generate(&ProcessSpec::<f64>::Cantor, 300, Seed(3)).unwrap();
        let b = tightness_set(&t, 0.1).unwrap();
        assert!(b.masses.iter().all(|&m| m >= 0.9));
        assert_eq!(b.checkpoints, power_of_two_checkpoints(300));
        assert!(tightness_set(&t, 0.0).is_err());
        assert!(tightness_set(&t, 1.0).is_err());
    }
}
