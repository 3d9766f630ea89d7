//! Randomized property battery for the regularized solvers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{
    fit, representer_bound_check, representer_residual, solve_general, solve_square, stability_gap, zero_risk,
    PairSet, SolverOptions, SvmSolution,
};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::losses::{Loss, LossFamily};
use crate::rng::Seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BatteryConfig {
    pub seed: Seed,
    /// Random instances for the norm, representer and stability checks.
    pub instances: usize,
    /// Square-loss instances solved by both solvers.
    pub cross_checks: usize,
    /// Random points at which loss gradients meet finite differences.
    pub gradient_checks: usize,
    pub max_n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Added to every solution coefficient before checking, to exercise the
    /// failure path.
    pub perturbation: Option<f64>,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: Seed(0),
            instances: 100,
            cross_checks: 50,
            gradient_checks: 100,
            max_n: 50,
            lambda_min: 0.01,
            lambda_max: 1.0,
            perturbation: None,
        }
    }
}

/// Tally of one property over the battery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub name: String,
    pub count: usize,
    pub violations: usize,
    /// Smallest `allowed − observed` seen; negative means a violation.
    pub worst_margin: f64,
}

/// A reproducible failing case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryFailure {
    pub check: String,
    pub instance: usize,
    pub observed: f64,
    pub allowed: f64,
    pub inputs: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub kernel: KernelSpec<f64>,
    pub loss: Loss<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatteryReport {
    pub config: BatteryConfig,
    pub checks: Vec<CheckSummary>,
    pub failures: Vec<BatteryFailure>,
}

impl BatteryReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

const NORM_BOUND: &str = "norm_bound";
const REPRESENTER: &str = "representer_residual";
const SUP_BOUND: &str = "representer_sup_bound";
const STABILITY: &str = "stability";
const CROSS_CHECK: &str = "solver_agreement";
const GRADIENT: &str = "loss_gradient";

struct Tally {
    checks: Vec<CheckSummary>,
    failures: Vec<BatteryFailure>,
}

struct Instance {
    data: PairSet<f64>,
    kernel: KernelSpec<f64>,
    loss: Loss<f64>,
    lambda: f64,
}

impl Tally {
    fn new() -> Self {
        let checks = [NORM_BOUND, REPRESENTER, SUP_BOUND, STABILITY, CROSS_CHECK, GRADIENT]
            .iter()
            .map(|n| CheckSummary { name: n.to_string(), count: 0, violations: 0, worst_margin: f64::INFINITY })
            .collect();
        Self { checks, failures: Vec::new() }
    }

    fn record(&mut self, check: &str, index: usize, observed: f64, allowed: f64, inst: Option<&Instance>) {
        let summary = self.checks.iter_mut().find(|c| c.name == check).expect("known check");
        summary.count += 1;
        let margin = allowed - observed;
        summary.worst_margin = summary.worst_margin.min(margin);
        if !(margin >= 0.0) {
            summary.violations += 1;
            let (inputs, outputs, weights, kernel, loss, lambda) = match inst {
                Some(i) => (
                    i.data.inputs().to_vec(),
                    i.data.outputs().to_vec(),
                    i.data.weights().to_vec(),
                    i.kernel,
                    i.loss,
                    i.lambda,
                ),
                None => (Vec::new(), Vec::new(), Vec::new(), KernelSpec::Gaussian { sigma: 1.0 }, Loss::square(1.0), 0.0),
            };
            self.failures.push(BatteryFailure {
                check: check.to_string(),
                instance: index,
                observed,
                allowed,
                inputs,
                outputs,
                weights,
                kernel,
                loss,
                lambda,
            });
        }
    }
}

fn random_instance(rng: &mut ChaCha8Rng, cfg: &BatteryConfig, family: LossFamily) -> Result<Instance> {
    let n = rng.gen_range(2..=cfg.max_n.max(2));
    let d = rng.gen_range(1..=2);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let outputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
    let kernel = if rng.gen_bool(0.5) {
        KernelSpec::gaussian(rng.gen_range(0.3..2.0))?
    } else {
        KernelSpec::laplace(rng.gen_range(0.3..2.0))?
    };
    let lambda = (rng.gen_range(cfg.lambda_min.ln()..=cfg.lambda_max.ln())).exp();
    Ok(Instance { data: PairSet::from_samples(&inputs, &outputs)?, kernel, loss: Loss::new(family, 1.0)?, lambda })
}

/// A second training set on the same space: some atoms dropped, some
/// outputs redrawn, some new atoms added.
fn neighbour(rng: &mut ChaCha8Rng, data: &PairSet<f64>) -> Result<PairSet<f64>> {
    let d = data.input_dim();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    for (_, x, y) in data.iter() {
        match rng.gen_range(0..4) {
            0 => {}
            1 => {
                inputs.push(x.to_vec());
                outputs.push(vec![rng.gen_range(-1.0..1.0)]);
            }
            _ => {
                inputs.push(x.to_vec());
                outputs.push(y.to_vec());
            }
        }
    }
    for _ in 0..rng.gen_range(1..=3) {
        inputs.push((0..d).map(|_| rng.gen_range(-2.0..2.0)).collect());
        outputs.push(vec![rng.gen_range(-1.0..1.0)]);
    }
    PairSet::from_samples(&inputs, &outputs)
}

fn tight() -> SolverOptions<f64> {
    SolverOptions { grad_tol: 1e-11, max_iters: 200_000, ..SolverOptions::default() }
}

fn perturb(sol: &mut SvmSolution<f64>, delta: Option<f64>) {
    if let Some(delta) = delta {
        for v in sol.f.coeffs.as_mut_slice() {
            *v += delta;
        }
    }
}

/// Central-difference check of `∇_t L` at a random point.
fn gradient_error(rng: &mut ChaCha8Rng, loss: &Loss<f64>) -> f64 {
    let m = rng.gen_range(1..=3);
    let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let t: Vec<f64> = (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let g = loss.grad_unchecked(&y, &t);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for c in 0..m {
        let (mut up, mut down) = (t.clone(), t.clone());
        up[c] += h;
        down[c] -= h;
        let fd = (loss.value_unchecked(&y, &up) - loss.value_unchecked(&y, &down)) / (2.0 * h);
        worst = worst.max((fd - g[c]).abs() / g[c].abs().max(1.0));
    }
    worst
}

/// Runs every check and returns counts, worst margins and failing cases.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryReport> {
    if cfg.instances == 0 && cfg.cross_checks == 0 && cfg.gradient_checks == 0 {
        return Err(Error::InvalidSpec("battery has no instances".into()));
    }
    if !(cfg.lambda_min > 0.0 && cfg.lambda_min <= cfg.lambda_max) || cfg.max_n == 0 {
        return Err(Error::InvalidSpec("battery needs 0 < lambda_min ≤ lambda_max and max_n ≥ 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.0);
    let mut tally = Tally::new();

    for i in 0..cfg.instances {
        let family = if i % 2 == 0 { LossFamily::Square } else { LossFamily::LogCosh };
        let inst = random_instance(&mut rng, cfg, family)?;
        let mut sol = fit(&inst.data, &inst.kernel, &inst.loss, inst.lambda, &tight())?;
        perturb(&mut sol, cfg.perturbation);

        let bound = (zero_risk(&inst.data, &inst.loss) / inst.lambda).sqrt() + 1e-9;
        tally.record(NORM_BOUND, i, sol.f.norm(), bound, Some(&inst));
        tally.record(REPRESENTER, i, representer_residual(&sol, &inst.data, &inst.loss)?, 1e-6, Some(&inst));
        let sup = representer_bound_check(&sol, &inst.data, &inst.loss)?;
        tally.record(SUP_BOUND, i, sup.lhs, sup.rhs + 1e-9, Some(&inst));

        let other = neighbour(&mut rng, &inst.data)?;
        let gap = stability_gap(&inst.data, &other, &inst.kernel, &inst.loss, inst.lambda, &tight())?;
        tally.record(STABILITY, i, gap.lhs, gap.rhs + 1e-9, Some(&inst));
    }

    for i in 0..cfg.cross_checks {
        let inst = random_instance(&mut rng, cfg, LossFamily::Square)?;
        let closed = solve_square(&inst.data, &inst.kernel, inst.lambda)?;
        let mut iterative = solve_general(&inst.data, &inst.kernel, &inst.loss, inst.lambda, &SolverOptions::default())?;
        perturb(&mut iterative, cfg.perturbation);
        tally.record(CROSS_CHECK, i, closed.f.diff_norm(&iterative.f)?, 1e-6, Some(&inst));
    }

    for i in 0..cfg.gradient_checks {
        let loss = if i % 2 == 0 { Loss::square(1.0) } else { Loss::log_cosh(1.0) };
        tally.record(GRADIENT, i, gradient_error(&mut rng, &loss), 1e-6, None);
    }

    for c in &mut tally.checks {
        if c.count == 0 {
            c.worst_margin = 0.0;
        }
    }
    Ok(BatteryReport { config: *cfg, checks: tally.checks, failures: tally.failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_battery_passes() {
        let cfg = BatteryConfig { instances: 10, cross_checks: 5, gradient_checks: 10, max_n: 12, ..Default::default() };
        let report = run_battery(&cfg).unwrap();
        assert!(report.passed(), "{:#?}", report.failures);
        assert_eq!(report.checks.iter().find(|c| c.name == REPRESENTER).unwrap().count, 10);
    }

    #[test]
    fn perturbation_is_caught() {
        let cfg = BatteryConfig {
            instances: 4,
            cross_checks: 0,
            gradient_checks: 0,
            max_n: 8,
            perturbation: Some(0.1),
            ..Default::default()
        };
        let report = run_battery(&cfg).unwrap();
        assert!(!report.passed());
        assert!(report.failures.iter().any(|f| f.check == REPRESENTER));
    }

    #[test]
    fn empty_battery_is_rejected() {
        let cfg = BatteryConfig { instances: 0, cross_checks: 0, gradient_checks: 0, ..Default::default() };
        assert!(matches!(run_battery(&cfg), Err(Error::InvalidSpec(_))));
    }
}
