use std::path::Path;

use anyhow::{Context, Result};
use depkernel::embeddings::{ewc_diagnostic, ConvergenceSeries, Verdict};
use depkernel::io::{write_json, write_risk_records, write_series, write_trajectory};
use depkernel::rng::Seed;
use depkernel::svm::{consistency_experiment, run_battery, seed_averages, ConsistencySetup};
use depkernel::{generate, realized_limit_measure};
use serde::Serialize;

use crate::config::{check_grid, check_seeds, check_threshold, GenerateConfig, KmeConfig, SvmConfig, VerifyConfig};
use crate::svg::{line_chart, Line};

/// Whether the run's property held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Violation,
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn generate_cmd(cfg: &GenerateConfig, out: &Path) -> Result<Status> {
    check_seeds(&cfg.seeds)?;
    cfg.process.validate()?;
    for &seed in &cfg.seeds {
        let t = generate(&cfg.process, cfg.n, seed)?;
        write_trajectory(&out.join(format!("trajectory_seed{}.csv", seed.0)), &t, &cfg.process)?;
    }
    Ok(Status::Pass)
}

fn series_lines(series: &[ConvergenceSeries<f64>]) -> Vec<Line<'_>> {
    series
        .iter()
        .map(|s| Line {
            label: &s.label,
            points: s.n_values.iter().zip(&s.values).map(|(&n, &v)| (n as f64, v)).collect(),
        })
        .collect()
}

pub fn kme_cmd(cfg: &KmeConfig, out: &Path) -> Result<Status> {
    check_seeds(&cfg.seeds)?;
    check_grid(&cfg.n_grid)?;
    check_threshold(cfg.threshold)?;
    cfg.kernel.validate()?;
    cfg.process.validate()?;
    let n_max = *cfg.n_grid.last().expect("checked non-empty");
    let mut series = Vec::with_capacity(cfg.seeds.len() + 1);
    for &seed in &cfg.seeds {
        let limit = realized_limit_measure(&cfg.process, seed)?.known()?;
        let t = generate(&cfg.process, n_max, seed)?;
        let mut s = ewc_diagnostic(&t, &limit, &cfg.kernel, &cfg.n_grid)?;
        s.label = format!("seed{}", seed.0);
        series.push(s);
    }
    let mean = ConvergenceSeries::average(&series, "mean")?;
    let verdict = mean.verdict(cfg.threshold);
    series.push(mean);

    write_series(&out.join("series.csv"), &series)?;
    write_json(&out.join("verdict.json"), &verdict)?;
    let title = format!("MMD to the realized limit: {}", cfg.process.id());
    write_text(&out.join("series.svg"), &line_chart(&title, "MMD", &series_lines(&series)))?;
    Ok(if verdict.verdict == Verdict::Converging { Status::Pass } else { Status::Violation })
}

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum PassFail {
    Pass,
    Fail,
}

#[derive(Serialize)]
struct RiskVerdict {
    verdict: PassFail,
    first: f64,
    last: f64,
    threshold: f64,
}

pub fn svm_cmd(cfg: &SvmConfig, out: &Path) -> Result<Status> {
    check_seeds(&cfg.seeds)?;
    check_grid(&cfg.n_grid)?;
    check_threshold(cfg.threshold)?;
    let setup = ConsistencySetup {
        process: cfg.process.clone(),
        kernel: cfg.kernel,
        loss: cfg.loss,
        estimator: cfg.estimator,
        schedule: cfg.schedule,
        n_grid: cfg.n_grid.clone(),
        seeds: cfg.seeds.clone(),
        solver: cfg.solver,
    };
    let records = consistency_experiment(&setup)?;
    let averages = seed_averages(&records);
    let n_values: Vec<usize> = averages.iter().map(|a| a.n).collect();
    let excess = ConvergenceSeries::new(n_values.clone(), averages.iter().map(|a| a.excess).collect(), "excess")?;
    let mmd = ConvergenceSeries::new(n_values, averages.iter().map(|a| a.mmd_to_limit).collect(), "mmd_to_limit")?;
    let first = excess.values[0];
    let last = *excess.values.last().expect("non-empty grid");
    let pass = last <= cfg.threshold;

    write_risk_records(&out.join("risk.csv"), &records)?;
    let means = [excess, mmd];
    write_series(&out.join("risk_mean.csv"), &means)?;
    write_json(
        &out.join("verdict.json"),
        &RiskVerdict { verdict: if pass { PassFail::Pass } else { PassFail::Fail }, first, last, threshold: cfg.threshold },
    )?;
    let title = format!("Seed-averaged excess risk: {}", cfg.process.id());
    write_text(&out.join("risk.svg"), &line_chart(&title, "risk", &series_lines(&means)))?;
    Ok(if pass { Status::Pass } else { Status::Violation })
}

pub fn verify_cmd(cfg: &VerifyConfig, out: &Path) -> Result<Status> {
    let report = run_battery(&cfg.battery)?;
    write_json(&out.join("report.json"), &report)?;
    if report.passed() {
        Ok(Status::Pass)
    } else {
        write_json(&out.join("failures.json"), &report.failures)?;
        Ok(Status::Violation)
    }
}

/// Replaces the configured seeds when `--seeds` is given.
pub fn override_seeds(seeds: &mut Vec<Seed>, cli: &Option<Vec<u64>>) {
    if let Some(list) = cli {
        *seeds = list.iter().copied().map(Seed).collect();
    }
}
