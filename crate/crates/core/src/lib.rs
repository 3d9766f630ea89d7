//! Kernel methods on dependent data streams.
//!
//! The crate covers generators for processes whose empirical measures
//! converge (possibly to a path-dependent limit) and for processes whose
//! empirical measures oscillate forever; kernel mean embeddings and MMD;
//! regularized kernel risk minimization with square and log-cosh losses;
//! conditional kernel mean embeddings; and the checks and experiments that
//! tie those estimators to the limit measure of a single trajectory.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the bottom of this file fix the scalar for the common cases.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ckme;
pub mod embeddings;
pub mod error;
pub mod functions;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod losses;
pub mod measures;
pub mod processes;
pub mod rng;
pub mod scalar;
pub mod svm;

pub use ckme::{ckme_bayes_risk, fit_ckme, CkmeModel};
pub use embeddings::{
    cb_average_series, ewc_diagnostic, kme, mmd, oscillation_probe, tightness_set, ConvergenceSeries,
    OscillationReport, OscillationRow, SeriesVerdict, TightBox, Verdict,
};
pub use error::{Error, Result};
pub use functions::{PointMap, TestFunction};
pub use kernels::{gram, gram_sym, Kernel, KernelSpec, LinearKernel, RkhsVector};
pub use linalg::Matrix;
pub use losses::{Loss, LossFamily};
pub use measures::{empirical, joint_from_kernel, AnalyticMeasure, DiscreteMeasure, FiniteMeasure};
pub use processes::{generate, realized_limit_measure, LimitMeasure, ProcessSpec, Trajectory};
pub use rng::Seed;
pub use scalar::Real;
pub use svm::{PairSet, SolverInfo, SvmSolution};

pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type ProcessSpec64 = ProcessSpec<f64>;
pub type DiscreteMeasure64 = DiscreteMeasure<f64>;
pub type DiscreteMeasure32 = DiscreteMeasure<f32>;
pub type AnalyticMeasure64 = AnalyticMeasure<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type KernelSpec32 = KernelSpec<f32>;
pub type RkhsVector64 = RkhsVector<f64>;
pub type RkhsVector32 = RkhsVector<f32>;
pub type Loss64 = Loss<f64>;
pub type PairSet64 = PairSet<f64>;
pub type SvmSolution64 = SvmSolution<f64>;
pub type CkmeModel64 = CkmeModel<f64>;
pub type Matrix64 = Matrix<f64>;
