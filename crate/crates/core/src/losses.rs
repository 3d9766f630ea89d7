//! Convex, continuously differentiable losses `L(x, y, t)` on `ℝ^m` outputs.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::{lit, norm, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    /// `‖y − t‖²`
    Square,
    /// `Σ_c log cosh(y_c − t_c)`
    LogCosh,
}

/// A loss together with the output bound `M ≥ ‖y‖` its Lipschitz modulus
/// depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loss<T> {
    pub family: LossFamily,
    pub output_bound: T,
}

/// `log cosh z` without overflow.
#[inline]
pub(crate) fn log_cosh<T: Real>(z: T) -> T {
    let a = z.abs();
    a + (lit::<T>(-2.0) * a).exp().ln_1p() - lit::<T>(2.0).ln()
}

impl<T: Real> Loss<T> {
    pub fn new(family: LossFamily, output_bound: T) -> Result<Self> {
        let l = Self { family, output_bound };
        l.validate()?;
        Ok(l)
    }

    pub fn square(output_bound: T) -> Self {
        Self { family: LossFamily::Square, output_bound }
    }

    pub fn log_cosh(output_bound: T) -> Self {
        Self { family: LossFamily::LogCosh, output_bound }
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_bound > T::zero() && self.output_bound.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument("output bound must be positive".into()))
        }
    }

    pub fn value(&self, _x: &[T], y: &[T], t: &[T]) -> Result<T> {
        check_dim(y.len(), t.len())?;
        Ok(self.value_unchecked(y, t))
    }

    pub(crate) fn value_unchecked(&self, y: &[T], t: &[T]) -> T {
        let diffs = y.iter().zip(t).map(|(&a, &b)| a - b);
        match self.family {
            LossFamily::Square => diffs.map(|d| d * d).sum(),
            LossFamily::LogCosh => diffs.map(log_cosh).sum(),
        }
    }

    /// `∇_t L(x, y, t)`.
    pub fn grad(&self, _x: &[T], y: &[T], t: &[T]) -> Result<Vec<T>> {
        check_dim(y.len(), t.len())?;
        Ok(self.grad_unchecked(y, t))
    }

    pub(crate) fn grad_unchecked(&self, y: &[T], t: &[T]) -> Vec<T> {
        let diffs = t.iter().zip(y).map(|(&a, &b)| a - b);
        match self.family {
            LossFamily::Square => diffs.map(|d| lit::<T>(2.0) * d).collect(),
            LossFamily::LogCosh => diffs.map(T::tanh).collect(),
        }
    }

    /// Upper bound on the second derivative along any direction of unit norm.
    pub fn curvature_bound(&self) -> T {
        match self.family {
            LossFamily::Square => lit(2.0),
            LossFamily::LogCosh => T::one(),
        }
    }

    /// Local Lipschitz modulus `|L|_{a,1}` over `‖t‖ ≤ a`, `‖y‖ ≤ M`.
    pub fn lipschitz_modulus(&self, a: T) -> Result<T> {
        if !(a > T::zero()) {
            return Err(Error::InvalidArgument(format!("modulus radius must be positive, got {a}")));
        }
        Ok(self.modulus_unchecked(a))
    }

    pub(crate) fn modulus_unchecked(&self, a: T) -> T {
        match self.family {
            LossFamily::Square => lit::<T>(2.0) * (self.output_bound + a),
            LossFamily::LogCosh => T::one(),
        }
    }

    pub fn nemitski_witness(&self) -> NemitskiWitness<T> {
        match self.family {
            LossFamily::Square => NemitskiWitness {
                b: NemitskiBase::SquaredNorm { c: lit(2.0) },
                h: NemitskiGrowth::Power { c: lit(2.0), p: 2 },
                order: 2,
            },
            LossFamily::LogCosh => NemitskiWitness {
                b: NemitskiBase::Norm { c: T::one() },
                h: NemitskiGrowth::Power { c: T::one(), p: 1 },
                order: 1,
            },
        }
    }
}

/// The `b(x, y)` part of a Nemitski bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NemitskiBase<T> {
    /// `c·‖y‖²`
    SquaredNorm { c: T },
    /// `c·‖y‖`
    Norm { c: T },
}

/// The `h(s)` part of a Nemitski bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NemitskiGrowth<T> {
    /// `c·s^p`
    Power { c: T, p: i32 },
}

/// Certificate `L(x, y, t) ≤ b(x, y) + h(‖t‖)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NemitskiWitness<T> {
    pub b: NemitskiBase<T>,
    pub h: NemitskiGrowth<T>,
    pub order: u32,
}

impl<T: Real> NemitskiWitness<T> {
    pub fn bound(&self, _x: &[T], y: &[T], t: &[T]) -> T {
        let b = match self.b {
            NemitskiBase::SquaredNorm { c } => c * y.iter().map(|&v| v * v).sum::<T>(),
            NemitskiBase::Norm { c } => c * norm(y),
        };
        let h = match self.h {
            NemitskiGrowth::Power { c, p } => c * norm(t).powi(p),
        };
        b + h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_examples() {
        let sq = Loss::square(1.0);
        assert_eq!(sq.value(&[], &[1.0], &[0.0]).unwrap(), 1.0);
        assert_eq!(sq.value(&[], &[0.3], &[0.3]).unwrap(), 0.0);
        let lc = Loss::log_cosh(1.0);
        assert!((lc.value(&[], &[1.0], &[0.0]).unwrap() - 0.4337808304830271_f64).abs() < 1e-15);
        assert!(sq.value(&[], &[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn log_cosh_is_stable_for_large_arguments() {
        let v = log_cosh(1000.0_f64);
        assert!((v - (1000.0 - 2.0_f64.ln())).abs() < 1e-12);
        assert_eq!(log_cosh(0.0_f64), 0.0);
    }

    #[test]
    fn grad_examples() {
        let sq = Loss::square(1.0);
        assert_eq!(sq.grad(&[], &[1.0], &[0.0]).unwrap(), vec![-2.0]);
        let lc = Loss::log_cosh(1.0);
        assert_eq!(lc.grad(&[], &[0.4], &[0.4]).unwrap(), vec![0.0]);
        assert!((lc.grad(&[], &[0.0], &[1.0]).unwrap()[0] - 0.7615941559557649_f64).abs() < 1e-15);
    }

    #[test]
    fn modulus_examples() {
        let sq = Loss::square(1.0);
        assert_eq!(sq.lipschitz_modulus(1.0).unwrap(), 4.0);
        assert!((sq.lipschitz_modulus(1e-12).unwrap() - 2.0_f64).abs() < 1e-11);
        assert_eq!(Loss::log_cosh(1.0).lipschitz_modulus(37.0).unwrap(), 1.0);
        assert!(sq.lipschitz_modulus(0.0).is_err());
        assert!(sq.lipschitz_modulus(-1.0).is_err());
    }

    #[test]
    fn nemitski_examples() {
        let sq = Loss::square(1.0);
        let w = sq.nemitski_witness();
        assert_eq!(w.order, 2);
        assert_eq!(sq.value(&[], &[1.0], &[3.0]).unwrap(), 4.0);
        assert_eq!(w.bound(&[], &[1.0], &[3.0]), 20.0);
        assert_eq!(w.bound(&[], &[0.0], &[0.0]), 0.0);

        let lc = Loss::log_cosh(1.0);
        let w = lc.nemitski_witness();
        let v = lc.value(&[], &[0.0], &[2.0]).unwrap();
        assert!((v - 1.3250027473578645_f64).abs() < 1e-14);
        assert_eq!(w.bound(&[], &[0.0], &[2.0]), 2.0);
    }

    #[test]
    fn config_form() {
        let l: Loss<f64> = serde_json::from_str(r#"{"family": "logcosh", "output_bound": 2.0}"#).unwrap();
        assert_eq!(l, Loss::log_cosh(2.0));
        assert!(serde_json::from_str::<Loss<f64>>(r#"{"family": "hinge", "output_bound": 1.0}"#).is_err());
        assert!(Loss::new(LossFamily::Square, 0.0).is_err());
    }
}
