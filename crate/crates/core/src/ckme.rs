//! Conditional kernel mean embeddings: the square-loss regularized problem
//! with outputs `k_Y(·, y)` in an output RKHS, handled through Gram matrices
//! only.
//!
//! Like the scalar solver, the model works over the distinct training inputs
//! `U` with total weights `W`. The stored weight matrix is
//! `(G_U + λ·diag(1/W))⁻¹`, and the weight of atom `j` at a query `x` is
//! `β_j(x) = (w_j / W_{u(j)})·γ_{u(j)}(x)` with `γ(x) = M·k_U(x)`. For `n`
//! distinct uniform samples this is `β(x) = (G + nλI)⁻¹ k(x)`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::functions::TestFunction;
use crate::io::{read_json, read_measure, write_json, write_measure};
use crate::kernels::{gram_sym, Kernel, KernelSpec};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::{lit, Real};
use crate::svm::{check_lambda, InputGroups, PairSet};

#[derive(Debug, Clone)]
pub struct CkmeModel<T, K = KernelSpec<T>> {
    data: PairSet<T>,
    groups: InputGroups<T>,
    pub input_kernel: KernelSpec<T>,
    pub output_kernel: K,
    pub lambda: T,
    weight_matrix: Matrix<T>,
    output_gram: Matrix<T>,
}

/// Fits the conditional embedding of the outputs given the inputs.
pub fn fit_ckme<T: Real, K: Kernel<T> + Clone>(
    data: &PairSet<T>,
    input_kernel: &KernelSpec<T>,
    output_kernel: &K,
    lambda: T,
) -> Result<CkmeModel<T, K>> {
    check_lambda(lambda)?;
    input_kernel.validate()?;
    if data.is_empty() {
        return Err(Error::InsufficientData("training set is empty".into()));
    }
    let groups = data.groups();
    let mut a = gram_sym(input_kernel, &groups.points)?;
    for (u, &w) in groups.weight.iter().enumerate() {
        a[(u, u)] += lambda / w;
    }
    let weight_matrix = Cholesky::with_jitter(&a)?.inverse();
    let output_gram = gram_sym(output_kernel, data.outputs())?;
    Ok(CkmeModel {
        data: data.clone(),
        groups,
        input_kernel: *input_kernel,
        output_kernel: output_kernel.clone(),
        lambda,
        weight_matrix,
        output_gram,
    })
}

impl<T: Real, K: Kernel<T>> CkmeModel<T, K> {
    /// Training atoms `(w_j, x_j, y_j)`.
    pub fn data(&self) -> &PairSet<T> {
        &self.data
    }

    /// `(G_U + λ·diag(1/W))⁻¹` over the distinct inputs.
    pub fn weight_matrix(&self) -> &Matrix<T> {
        &self.weight_matrix
    }

    /// Distinct training inputs, in the row order of the weight matrix.
    pub fn distinct_inputs(&self) -> &[Vec<T>] {
        &self.groups.points
    }

    /// The regularized system the weight matrix inverts.
    pub fn system_matrix(&self) -> Result<Matrix<T>> {
        let mut a = gram_sym(&self.input_kernel, &self.groups.points)?;
        for (u, &w) in self.groups.weight.iter().enumerate() {
            a[(u, u)] += self.lambda / w;
        }
        Ok(a)
    }

    fn gamma(&self, x: &[T]) -> Vec<T> {
        let kx: Vec<T> = self.groups.points.iter().map(|u| self.input_kernel.eval(x, u)).collect();
        self.weight_matrix.mat_vec(&kx).expect("square weight matrix")
    }

    fn spread(&self, gamma: &[T]) -> Vec<T> {
        self.data
            .iter()
            .enumerate()
            .map(|(j, (w, _, _))| {
                let u = self.groups.member_of[j];
                w / self.groups.weight[u] * gamma[u]
            })
            .collect()
    }

    /// Weights `β(x)` of the training outputs in the embedding at `x`.
    pub fn beta(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim(self.data.input_dim(), x.len())?;
        Ok(self.spread(&self.gamma(x)))
    }

    fn quad(&self, beta: &[T]) -> T {
        let gb = self.output_gram.mat_vec(beta).expect("square output gram");
        beta.iter().zip(&gb).map(|(&a, &b)| a * b).sum()
    }

    /// `‖f(x) − k_Y(·, y)‖²` expanded through the output Gram matrix.
    pub fn embed_norm_gap(&self, x: &[T], y: &[T]) -> Result<T> {
        check_dim(self.data.output_dim(), y.len())?;
        let beta = self.beta(x)?;
        let cross: T = beta.iter().zip(self.data.outputs()).map(|(&b, yj)| b * self.output_kernel.eval(yj, y)).sum();
        Ok((self.output_kernel.eval(y, y) - lit::<T>(2.0) * cross + self.quad(&beta)).max(T::zero()))
    }

    /// `Σ_j β_j(x)·g(y_j)`; the weights are not normalized.
    pub fn conditional_expectation(&self, x: &[T], g: &TestFunction<T>) -> Result<T> {
        g.check_dim(self.data.output_dim())?;
        let beta = self.beta(x)?;
        Ok(beta.iter().zip(self.data.outputs()).map(|(&b, y)| b * g.eval(y)).sum())
    }

    /// Feature-space risk `Σ w·‖f(x) − k_Y(·, y)‖²` against a finite measure.
    pub fn feature_risk(&self, m: &PairSet<T>) -> Result<T> {
        check_dim(self.data.input_dim(), m.input_dim())?;
        check_dim(self.data.output_dim(), m.output_dim())?;
        let groups = m.groups();
        let betas: Vec<Vec<T>> = groups.points.iter().map(|x| self.spread(&self.gamma(x))).collect();
        let quads: Vec<T> = betas.iter().map(|b| self.quad(b)).collect();
        let mut total = T::zero();
        for (j, (w, _, y)) in m.iter().enumerate() {
            let u = groups.member_of[j];
            let cross: T =
                betas[u].iter().zip(self.data.outputs()).map(|(&b, yj)| b * self.output_kernel.eval(yj, y)).sum();
            total += w * (self.output_kernel.eval(y, y) - lit::<T>(2.0) * cross + quads[u]).max(T::zero());
        }
        Ok(total)
    }

    /// Norm of the fitted operator-valued element,
    /// `trace(Aᵀ G_Y A G_U)` with `A` mapping distinct inputs to atom weights.
    pub fn norm(&self) -> T {
        let nu = self.groups.points.len();
        let n = self.data.len();
        let a = Matrix::from_fn(n, nu, |j, v| {
            let u = self.groups.member_of[j];
            self.data.weights()[j] / self.groups.weight[u] * self.weight_matrix[(u, v)]
        });
        let gu = gram_sym(&self.input_kernel, &self.groups.points).expect("consistent input dimension");
        let gy_a = self.output_gram.matmul(&a).expect("conformable");
        let at_gy_a = a.transpose().matmul(&gy_a).expect("conformable");
        let s: T = at_gy_a.as_slice().iter().zip(gu.as_slice()).map(|(&p, &q)| p * q).sum();
        s.max(T::zero()).sqrt()
    }

    /// Feature-space risk of the zero function, `Σ w·k_Y(y, y)`.
    pub fn zero_risk(&self) -> T {
        self.data.iter().map(|(w, _, y)| w * self.output_kernel.eval(y, y)).sum()
    }
}

/// Bayes feature-space risk `Σ_x P(x)·(E[k(Y, Y) | x] − ‖μ_{Y|x}‖²)` of a
/// finite joint measure.
pub fn ckme_bayes_risk<T: Real, K: Kernel<T>>(m: &PairSet<T>, output_kernel: &K) -> T {
    let groups = m.groups();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups.points.len()];
    for (j, &u) in groups.member_of.iter().enumerate() {
        members[u].push(j);
    }
    let (w, y) = (m.weights(), m.outputs());
    let mut total = T::zero();
    for (u, idx) in members.iter().enumerate() {
        let diag: T = idx.iter().map(|&j| w[j] * output_kernel.eval(&y[j], &y[j])).sum();
        let mut cross = T::zero();
        for &j in idx {
            for &l in idx {
                cross += w[j] * w[l] * output_kernel.eval(&y[j], &y[l]);
            }
        }
        total += (diag - cross / groups.weight[u]).max(T::zero());
    }
    total
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Kernels<T, K> {
    input: KernelSpec<T>,
    output: K,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header<T, K> {
    n: usize,
    lambda: T,
    kernels: Kernels<T, K>,
}

const INPUTS: &str = "inputs.csv";
const OUTPUTS: &str = "outputs.csv";
const WEIGHTS: &str = "weights.bin";
const HEADER: &str = "header.json";

impl<T, K> CkmeModel<T, K>
where
    T: Real + Serialize + DeserializeOwned,
    K: Kernel<T> + Clone + Serialize + DeserializeOwned,
{
    /// Writes `inputs.csv` (`weight,x0,…`), `outputs.csv` (`weight,y0,…`),
    /// `weights.bin` (the weight matrix, row-major little-endian `f64`) and
    /// `header.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let inputs = crate::measures::DiscreteMeasure::new(self.data.inputs().to_vec(), self.data.weights().to_vec())?;
        let outputs = crate::measures::DiscreteMeasure::new(self.data.outputs().to_vec(), self.data.weights().to_vec())?;
        write_measure(&dir.join(INPUTS), &inputs)?;
        write_measure(&dir.join(OUTPUTS), &outputs)?;
        let mut w = BufWriter::new(File::create(dir.join(WEIGHTS))?);
        for v in self.weight_matrix.as_slice() {
            w.write_all(&v.to_f64().unwrap_or(f64::NAN).to_le_bytes())?;
        }
        w.flush()?;
        let header = Header {
            n: self.data.len(),
            lambda: self.lambda,
            kernels: Kernels { input: self.input_kernel, output: self.output_kernel.clone() },
        };
        write_json(&dir.join(HEADER), &header)
    }

    /// Loads a model written by [`CkmeModel::save`].
    pub fn load(dir: &Path) -> Result<Self> {
        let header: Header<T, K> = read_json(&dir.join(HEADER))?;
        let inputs = read_measure::<T>(&dir.join(INPUTS))?;
        let outputs = read_measure::<T>(&dir.join(OUTPUTS))?;
        if inputs.len() != header.n || outputs.len() != header.n || inputs.weights != outputs.weights {
            return Err(Error::Io("inputs and outputs disagree with the header".into()));
        }
        let support: Vec<Vec<T>> =
            inputs.support.iter().zip(&outputs.support).map(|(x, y)| [x.as_slice(), y.as_slice()].concat()).collect();
        let joint = crate::measures::DiscreteMeasure::new(support, inputs.weights.clone())?;
        let data = PairSet::from_measure(&joint, inputs.dim())?;
        let groups = data.groups();
        let k = groups.points.len();
        let mut bytes = Vec::new();
        BufReader::new(File::open(dir.join(WEIGHTS))?).read_to_end(&mut bytes)?;
        if bytes.len() != 8 * k * k {
            return Err(Error::Io(format!("weight block has {} bytes, expected {}", bytes.len(), 8 * k * k)));
        }
        let values: Vec<T> = bytes
            .chunks_exact(8)
            .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).unwrap_or_else(T::nan))
            .collect();
        let weight_matrix = Matrix::from_row_major(k, k, values)?;
        let output_gram = gram_sym(&header.kernels.output, data.outputs())?;
        Ok(Self {
            data,
            groups,
            input_kernel: header.kernels.input,
            output_kernel: header.kernels.output,
            lambda: header.lambda,
            weight_matrix,
            output_gram,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::LinearKernel;
    use crate::svm::solve_square;

    fn g1() -> KernelSpec<f64> {
        KernelSpec::gaussian(1.0).unwrap()
    }

    #[test]
    fn single_point_weight() {
        let data = PairSet::from_samples(&[vec![0.3]], &[vec![1.0]]).unwrap();
        let lambda = 0.2;
        let m = fit_ckme(&data, &g1(), &g1(), lambda).unwrap();
        let x = [1.1];
        let expected = g1().eval(&x, &[0.3]) / (1.0 + lambda);
        assert!((m.beta(&x).unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn heavy_regularization_vanishes() {
        let data = PairSet::from_samples(&[vec![0.0], vec![1.0]], &[vec![0.0], vec![1.0]]).unwrap();
        let m = fit_ckme(&data, &g1(), &g1(), 1e9).unwrap();
        assert!(m.beta(&[0.5]).unwrap().iter().all(|b| b.abs() < 1e-8));
        assert!((m.embed_norm_gap(&[0.5], &[3.0]).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn near_interpolation() {
        let data = PairSet::from_samples(&[vec![0.0], vec![1.0]], &[vec![0.0], vec![1.0]]).unwrap();
        let m = fit_ckme(&data, &g1(), &g1(), 1e-6).unwrap();
        let b = m.beta(&[0.0]).unwrap();
        assert!((b[0] - 1.0).abs() < 1e-3 && b[1].abs() < 1e-3);
        assert!(m.embed_norm_gap(&[0.0], &[0.0]).unwrap() <= 1e-3);
        let sym = (m.embed_norm_gap(&[0.5], &[0.0]).unwrap() - m.embed_norm_gap(&[0.5], &[1.0]).unwrap()).abs();
        assert!(sym < 1e-12);
    }

    #[test]
    fn weight_matrix_inverts_system() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.4]).collect();
        let ys: Vec<Vec<f64>> = (0..6).map(|i| vec![(i as f64).cos()]).collect();
        let m = fit_ckme(&PairSet::from_samples(&xs, &ys).unwrap(), &g1(), &g1(), 0.01).unwrap();
        let prod = m.weight_matrix().matmul(&m.system_matrix().unwrap()).unwrap();
        let id = Matrix::identity(6);
        assert!(prod.sub(&id).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn linear_output_kernel_matches_scalar_solver() {
        let xs: Vec<Vec<f64>> = [-0.7, 0.0, 0.2, 1.3].iter().map(|&x| vec![x]).collect();
        let ys: Vec<Vec<f64>> = [0.5, -1.0, 0.25, 2.0].iter().map(|&y| vec![y]).collect();
        let data = PairSet::from_samples(&xs, &ys).unwrap();
        let lambda = 0.05;
        let m = fit_ckme(&data, &g1(), &LinearKernel, lambda).unwrap();
        let f = solve_square(&data, &g1(), lambda).unwrap().f;
        let id = TestFunction::Coordinate { index: 0 };
        for x in [-1.0, 0.1, 0.9] {
            let pred = f.eval_scalar(&[x]).unwrap();
            assert!((m.conditional_expectation(&[x], &id).unwrap() - pred).abs() < 1e-8);
            assert!((m.embed_norm_gap(&[x], &[0.4]).unwrap() - (0.4 - pred).powi(2)).abs() < 1e-8);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let data = PairSet::from_samples(&[vec![0.0], vec![1.0], vec![0.0]], &[vec![0.0], vec![1.0], vec![1.0]]).unwrap();
        let m = fit_ckme(&data, &g1(), &KernelSpec::laplace(2.0).unwrap(), 0.1).unwrap();
        m.save(dir.path()).unwrap();
        let back = CkmeModel::<f64>::load(dir.path()).unwrap();
        assert_eq!(back.weight_matrix(), m.weight_matrix());
        assert_eq!(back.beta(&[0.4]).unwrap(), m.beta(&[0.4]).unwrap());
        assert_eq!(back.lambda, 0.1);
    }
}
