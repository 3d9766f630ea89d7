//! CSV and JSON file formats for trajectories, measures, RKHS elements,
//! convergence series and risk curves.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write followed by a read reproduces every value bit for bit and reruns
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::embeddings::{ConvergenceSeries, SeriesVerdict};
use crate::error::{Error, Result};
use crate::kernels::{KernelSpec, RkhsVector};
use crate::linalg::Matrix;
use crate::measures::DiscreteMeasure;
use crate::processes::{ProcessSpec, Trajectory};
use crate::rng::Seed;
use crate::scalar::Real;
use crate::svm::RiskCurveRecord;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::Reader::from_path(path).map_err(csv_err)
}

fn parse<T: Real>(s: &str) -> Result<T> {
    s.trim()
        .parse::<f64>()
        .ok()
        .and_then(T::from_f64)
        .ok_or_else(|| Error::Io(format!("cannot parse number {s:?}")))
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (0..count).map(move |i| format!("{prefix}{i}"))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<S: Serialize + ?Sized>(path: &Path, value: &S) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<D: DeserializeOwned>(path: &Path) -> Result<D> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// JSON sidecar of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct TrajectorySidecar<T> {
    pub spec: ProcessSpec<T>,
    pub seed: Seed,
    pub dim: usize,
    pub n: usize,
}

/// Sidecar path `<stem>.json` next to `csv_path`.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Writes `index,x0,…` rows (index starting at 1) and the JSON sidecar.
pub fn write_trajectory<T: Real + Serialize>(path: &Path, t: &Trajectory<T>, spec: &ProcessSpec<T>) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("index".to_string()).chain(numbered("x", t.dim)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, p) in t.points.iter().enumerate() {
        let row: Vec<String> = std::iter::once((i + 1).to_string()).chain(p.iter().map(|v| v.to_string())).collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), &TrajectorySidecar { spec: spec.clone(), seed: t.seed, dim: t.dim, n: t.len() })
}

/// Reads a trajectory written by [`write_trajectory`].
pub fn read_trajectory<T: Real + DeserializeOwned>(path: &Path) -> Result<(Trajectory<T>, ProcessSpec<T>)> {
    let side: TrajectorySidecar<T> = read_json(&sidecar_path(path))?;
    let mut r = reader(path)?;
    let mut points = Vec::with_capacity(side.n);
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != side.dim + 1 {
            return Err(Error::Io(format!("row has {} fields, expected {}", rec.len(), side.dim + 1)));
        }
        points.push(rec.iter().skip(1).map(parse).collect::<Result<Vec<T>>>()?);
    }
    if points.len() != side.n {
        return Err(Error::Io(format!("sidecar says {} rows, file has {}", side.n, points.len())));
    }
    Ok((Trajectory::new(points, side.seed, side.spec.id())?, side.spec))
}

/// `weight,x0,…` rows.
pub fn write_measure<T: Real>(path: &Path, m: &DiscreteMeasure<T>) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("weight".to_string()).chain(numbered("x", m.dim())).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (wt, p) in m.iter() {
        let row: Vec<String> = std::iter::once(wt.to_string()).chain(p.iter().map(|v| v.to_string())).collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    Ok(w.flush()?)
}

pub fn read_measure<T: Real>(path: &Path) -> Result<DiscreteMeasure<T>> {
    let mut r = reader(path)?;
    let (mut support, mut weights) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let vals = rec.iter().map(parse).collect::<Result<Vec<T>>>()?;
        let (w, p) = vals.split_first().ok_or_else(|| Error::Io("empty measure row".into()))?;
        weights.push(*w);
        support.push(p.to_vec());
    }
    DiscreteMeasure::new(support, weights)
}

/// `c0,…,x0,…` rows plus the kernel in a JSON sidecar.
pub fn write_rkhs_vector<T: Real + Serialize>(path: &Path, f: &RkhsVector<T>) -> Result<()> {
    let mut w = writer(path)?;
    let d = f.input_dim().unwrap_or(0);
    let header: Vec<String> = numbered("c", f.output_dim()).chain(numbered("x", d)).collect();
    w.write_record(&header).map_err(csv_err)?;
    for (i, x) in f.support.iter().enumerate() {
        let row: Vec<String> = f.coeffs.row(i).iter().chain(x.iter()).map(|v| v.to_string()).collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&sidecar_path(path), &f.kernel)
}

pub fn read_rkhs_vector<T: Real + DeserializeOwned>(path: &Path) -> Result<RkhsVector<T>> {
    let kernel: KernelSpec<T> = read_json(&sidecar_path(path))?;
    let mut r = reader(path)?;
    let m = r.headers().map_err(csv_err)?.iter().filter(|h| h.starts_with('c')).count();
    let (mut support, mut rows) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let vals = rec.map_err(csv_err)?.iter().map(parse).collect::<Result<Vec<T>>>()?;
        rows.push(vals[..m].to_vec());
        support.push(vals[m..].to_vec());
    }
    let coeffs = if rows.is_empty() { Matrix::zeros(0, m) } else { Matrix::from_rows(&rows)? };
    RkhsVector::new(kernel, support, coeffs)
}

/// `n,value,label` rows for one or more series.
pub fn write_series<T: Real>(path: &Path, series: &[ConvergenceSeries<T>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "value", "label"]).map_err(csv_err)?;
    for s in series {
        for (n, v) in s.n_values.iter().zip(&s.values) {
            w.write_record([n.to_string(), v.to_string(), s.label.clone()]).map_err(csv_err)?;
        }
    }
    Ok(w.flush()?)
}

/// Reads series back, grouped by label in order of first appearance.
pub fn read_series<T: Real>(path: &Path) -> Result<Vec<ConvergenceSeries<T>>> {
    let mut r = reader(path)?;
    let mut out: Vec<(String, Vec<usize>, Vec<T>)> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(Error::Io("series rows need n,value,label".into()));
        }
        let n: usize = rec[0].parse().map_err(|_| Error::Io(format!("bad n {:?}", &rec[0])))?;
        let v = parse(&rec[1])?;
        match out.iter_mut().find(|s| s.0 == rec[2]) {
            Some(s) => {
                s.1.push(n);
                s.2.push(v);
            }
            None => out.push((rec[2].to_string(), vec![n], vec![v])),
        }
    }
    out.into_iter().map(|(label, n, v)| ConvergenceSeries::new(n, v, label)).collect()
}

pub fn write_verdict<T: Real + Serialize>(path: &Path, verdict: &SeriesVerdict<T>) -> Result<()> {
    write_json(path, verdict)
}

pub fn write_risk_records<T: Real + Serialize>(path: &Path, records: &[RiskCurveRecord<T>]) -> Result<()> {
    let mut w = writer(path)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    if records.is_empty() {
        w.write_record(RiskCurveRecord::<T>::HEADER).map_err(csv_err)?;
    }
    Ok(w.flush()?)
}

pub fn read_risk_records<T: Real + DeserializeOwned>(path: &Path) -> Result<Vec<RiskCurveRecord<T>>> {
    let mut r = reader(path)?;
    r.deserialize().map(|rec| rec.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processes::generate;

    #[test]
    fn trajectory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let spec = ProcessSpec::<f64>::Cantor;
        let t = generate(&spec, 40, Seed(5)).unwrap();
        write_trajectory(&path, &t, &spec).unwrap();
        let (back, spec_back) = read_trajectory::<f64>(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(spec_back, spec);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("index,x0\n1,"));
    }

    #[test]
    fn measure_and_vector_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DiscreteMeasure::new(vec![vec![0.1, 2.0], vec![-3.5, 1e-300]], vec![0.25, 0.75]).unwrap();
        let p = dir.path().join("m.csv");
        write_measure(&p, &m).unwrap();
        assert_eq!(read_measure::<f64>(&p).unwrap(), m);

        let f = RkhsVector::scalar(KernelSpec::laplace(0.7).unwrap(), vec![vec![0.0], vec![1.0 / 3.0]], &[1.5, -0.1])
            .unwrap();
        let p = dir.path().join("f.csv");
        write_rkhs_vector(&p, &f).unwrap();
        assert_eq!(read_rkhs_vector::<f64>(&p).unwrap(), f);
    }

    #[test]
    fn series_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = ConvergenceSeries::new(vec![10, 100], vec![0.5, 0.05], "a").unwrap();
        let b = ConvergenceSeries::new(vec![10, 100], vec![-0.1, 0.0], "b").unwrap();
        let p = dir.path().join("s.csv");
        write_series(&p, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_series::<f64>(&p).unwrap(), vec![a, b]);
    }
}
