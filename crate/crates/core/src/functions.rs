//! Fixed catalogs of test functions and continuous point maps.
//!
//! Both are plain data so configuration files can name them, either as JSON
//! objects (`{"kind": "coordinate", "index": 0}`) or as compact string ids
//! (`coordinate(0)`, `affine(2,1)`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, sq_dist, Real};

/// Scalar test function on ℝ^d.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction<T> {
    Constant { value: T },
    Coordinate { index: usize },
    Square { index: usize },
    Abs { index: usize },
    Tanh { index: usize },
    /// `cos(ω·x)`.
    Cos { omega: Vec<T> },
    /// `exp(-‖x − c‖² / (2σ²))`.
    GaussianBump { center: Vec<T>, sigma: T },
}

impl<T: Real> TestFunction<T> {
    /// Smallest ambient dimension on which the function is defined.
    pub fn min_dim(&self) -> usize {
        match self {
            Self::Constant { .. } => 0,
            Self::Coordinate { index }
            | Self::Square { index }
            | Self::Abs { index }
            | Self::Tanh { index } => index + 1,
            Self::Cos { omega } => omega.len(),
            Self::GaussianBump { center, .. } => center.len(),
        }
    }

    /// Errors unless the function is defined on points of dimension `dim`.
    pub fn check_dim(&self, dim: usize) -> Result<()> {
        let exact = matches!(self, Self::Cos { .. } | Self::GaussianBump { .. });
        let ok = if exact { self.min_dim() == dim } else { self.min_dim() <= dim };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("test function {self} undefined in dimension {dim}")))
        }
    }

    pub fn eval(&self, x: &[T]) -> T {
        match self {
            Self::Constant { value } => *value,
            Self::Coordinate { index } => x[*index],
            Self::Square { index } => x[*index] * x[*index],
            Self::Abs { index } => x[*index].abs(),
            Self::Tanh { index } => x[*index].tanh(),
            Self::Cos { omega } => omega.iter().zip(x).map(|(&w, &v)| w * v).sum::<T>().cos(),
            Self::GaussianBump { center, sigma } => {
                (-sq_dist(x, center) / (lit::<T>(2.0) * *sigma * *sigma)).exp()
            }
        }
    }
}

impl<T: Real> fmt::Display for TestFunction<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[T]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        match self {
            Self::Constant { value } => write!(f, "const({value})"),
            Self::Coordinate { index } => write!(f, "coordinate({index})"),
            Self::Square { index } => write!(f, "square({index})"),
            Self::Abs { index } => write!(f, "abs({index})"),
            Self::Tanh { index } => write!(f, "tanh({index})"),
            Self::Cos { omega } => write!(f, "cos({})", join(omega)),
            Self::GaussianBump { center, sigma } => write!(f, "bump({};{sigma})", join(center)),
        }
    }
}

/// Splits `name(a,b,...)` into the name and its comma-separated arguments.
fn parse_call(s: &str) -> Option<(&str, Vec<&str>)> {
    let s = s.trim();
    match s.find('(') {
        None => Some((s, Vec::new())),
        Some(open) => {
            let inner = s[open + 1..].strip_suffix(')')?;
            let args = if inner.trim().is_empty() {
                Vec::new()
            } else {
                inner.split(',').map(str::trim).collect()
            };
            Some((s[..open].trim(), args))
        }
    }
}

fn parse_num<T: Real>(s: &str) -> Result<T> {
    s.parse::<f64>()
        .map(lit)
        .map_err(|_| Error::InvalidArgument(format!("not a number: {s:?}")))
}

fn parse_index(args: &[&str]) -> Result<usize> {
    match args {
        [] => Ok(0),
        [i] => i.parse().map_err(|_| Error::InvalidArgument(format!("bad index {i:?}"))),
        _ => Err(Error::InvalidArgument("expected a single index".into())),
    }
}

impl<T: Real> FromStr for TestFunction<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::InvalidArgument(format!("unknown test function id {s:?}"));
        let (name, args) = parse_call(s).ok_or_else(unknown)?;
        match name {
            "const" | "constant" => match args.as_slice() {
                [v] => Ok(Self::Constant { value: parse_num(v)? }),
                _ => Err(unknown()),
            },
            "coordinate" => Ok(Self::Coordinate { index: parse_index(&args)? }),
            "square" => Ok(Self::Square { index: parse_index(&args)? }),
            "abs" => Ok(Self::Abs { index: parse_index(&args)? }),
            "tanh" => Ok(Self::Tanh { index: parse_index(&args)? }),
            "cos" => {
                let omega = args.iter().map(|a| parse_num(a)).collect::<Result<Vec<T>>>()?;
                if omega.is_empty() {
                    return Err(unknown());
                }
                Ok(Self::Cos { omega })
            }
            "bump" => {
                // bump(c0,c1,...;sigma)
                let inner = s.trim().strip_prefix("bump(").and_then(|r| r.strip_suffix(')'));
                let (c, sigma) = inner.and_then(|r| r.split_once(';')).ok_or_else(unknown)?;
                let center =
                    c.split(',').map(|a| parse_num(a.trim())).collect::<Result<Vec<T>>>()?;
                let sigma = parse_num(sigma.trim())?;
                if !(sigma > T::zero()) {
                    return Err(Error::InvalidArgument("bump width must be positive".into()));
                }
                Ok(Self::GaussianBump { center, sigma })
            }
            _ => Err(unknown()),
        }
    }
}

/// Continuous coordinatewise map used for pushforward checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointMap<T> {
    /// `x ↦ a·x + b`.
    Affine { a: T, b: T },
    Tanh,
    Square,
}

impl<T: Real> PointMap<T> {
    #[inline]
    pub fn apply_scalar(&self, v: T) -> T {
        match *self {
            Self::Affine { a, b } => a * v + b,
            Self::Tanh => v.tanh(),
            Self::Square => v * v,
        }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&v| self.apply_scalar(v)).collect()
    }
}

impl<T: Real> fmt::Display for PointMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Affine { a, b } => write!(f, "affine({a},{b})"),
            Self::Tanh => write!(f, "tanh"),
            Self::Square => write!(f, "square"),
        }
    }
}

impl<T: Real> FromStr for PointMap<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::InvalidArgument(format!("unknown map id {s:?}"));
        let (name, args) = parse_call(s).ok_or_else(unknown)?;
        match (name, args.as_slice()) {
            ("affine", [a, b]) => Ok(Self::Affine { a: parse_num(a)?, b: parse_num(b)? }),
            ("tanh", []) => Ok(Self::Tanh),
            ("square", []) => Ok(Self::Square),
            _ => Err(unknown()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_catalog_ids() {
        let f: TestFunction<f64> = "coordinate(1)".parse().unwrap();
        assert_eq!(f, TestFunction::Coordinate { index: 1 });
        let g: TestFunction<f64> = "bump(0,1;0.5)".parse().unwrap();
        assert_eq!(g, TestFunction::GaussianBump { center: vec![0.0, 1.0], sigma: 0.5 });
        assert_eq!(g.to_string().parse::<TestFunction<f64>>().unwrap(), g);
        assert!("sin(0)".parse::<TestFunction<f64>>().is_err());

        let m: PointMap<f64> = "affine(2,1)".parse().unwrap();
        assert_eq!(m, PointMap::Affine { a: 2.0, b: 1.0 });
        assert!("rotate(1)".parse::<PointMap<f64>>().is_err());
        assert!("affine(1)".parse::<PointMap<f64>>().is_err());
    }

    #[test]
    fn evaluates_dictionary() {
        let x = [0.5, -2.0];
        assert_eq!(TestFunction::Coordinate { index: 1 }.eval(&x), -2.0);
        assert_eq!(TestFunction::Square { index: 1 }.eval(&x), 4.0);
        assert_eq!(TestFunction::Abs { index: 1 }.eval(&x), 2.0);
        assert_eq!(TestFunction::Constant { value: 1.0 }.eval(&x), 1.0);
        let bump = TestFunction::GaussianBump { center: vec![0.5, -2.0], sigma: 1.0 };
        assert_eq!(bump.eval(&x), 1.0);
        assert!(TestFunction::<f64>::Coordinate { index: 2 }.check_dim(2).is_err());
        assert!(TestFunction::Cos { omega: vec![1.0] }.check_dim(2).is_err());
    }
}
