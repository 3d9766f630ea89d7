use depkernel::processes::transition_pairs;
use depkernel::rng::Seed;
use depkernel::{fit_ckme, generate, KernelSpec, Matrix, PairSet, ProcessSpec, TestFunction};

fn gaussian() -> KernelSpec<f64> {
    KernelSpec::gaussian(1.0).unwrap()
}

fn chain() -> ProcessSpec<f64> {
    ProcessSpec::FiniteMarkovChain {
        states: vec![vec![0.0], vec![1.0]],
        transition: Matrix::from_rows(&[vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap(),
        initial: vec![1.0, 0.0],
    }
}

#[test]
fn chain_conditional_mean_matches_transition_rows() {
    let n = 5000;
    let lambda = (n as f64).powf(-0.5);
    let coord = TestFunction::Coordinate { index: 0 };
    // E[Y | x] is the probability of moving to state 1 from x.
    let truth = [(0.0, 0.1), (1.0, 0.8)];
    let seeds: Vec<Seed> = (0..4).map(Seed).collect();
    let mut mean = [0.0; 2];
    for &seed in &seeds {
        let pairs = transition_pairs(&generate(&chain(), n + 1, seed).unwrap()).unwrap();
        let data = PairSet::from_trajectory(&pairs, 1).unwrap();
        let model = fit_ckme(&data, &gaussian(), &gaussian(), lambda).unwrap();
        for (slot, &(x, _)) in mean.iter_mut().zip(&truth) {
            *slot += model.conditional_expectation(&[x], &coord).unwrap() / seeds.len() as f64;
        }
    }
    for (got, (x, want)) in mean.iter().zip(truth) {
        assert!((got - want).abs() <= 0.05, "E[Y | {x}] = {got}, expected {want}");
    }
}

#[test]
fn deterministic_map_is_recovered_at_training_points() {
    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![-1.0 + 0.25 * i as f64]).collect();
    let ys: Vec<Vec<f64>> = xs.iter().map(|x| vec![x[0].tanh()]).collect();
    let data = PairSet::from_samples(&xs, &ys).unwrap();
    let model = fit_ckme(&data, &gaussian(), &gaussian(), 1e-8).unwrap();
    let g = TestFunction::Square { index: 0 };
    for (x, y) in xs.iter().zip(&ys) {
        let got = model.conditional_expectation(x, &g).unwrap();
        assert!((got - y[0] * y[0]).abs() <= 1e-2, "{got} vs {}", y[0] * y[0]);
    }
}

#[test]
fn constant_test_function_reports_weight_sum() {
    let xs = vec![vec![0.0], vec![0.5], vec![1.0]];
    let ys = vec![vec![1.0], vec![0.0], vec![1.0]];
    let data = PairSet::from_samples(&xs, &ys).unwrap();
    let model = fit_ckme(&data, &gaussian(), &gaussian(), 0.1).unwrap();
    let x = [0.25];
    let sum: f64 = model.beta(&x).unwrap().iter().sum();
    let got = model.conditional_expectation(&x, &TestFunction::Constant { value: 1.0 }).unwrap();
    assert!((got - sum).abs() < 1e-14);
    assert!(sum < 1.0, "regularization shrinks the weights: {sum}");
}

#[test]
fn gap_examples() {
    let xs = vec![vec![-1.0], vec![1.0]];
    let ys = vec![vec![0.0], vec![2.0]];
    let data = PairSet::from_samples(&xs, &ys).unwrap();

    let sharp = fit_ckme(&data, &gaussian(), &gaussian(), 1e-9).unwrap();
    assert!(sharp.embed_norm_gap(&xs[0], &ys[0]).unwrap() <= 1e-3);
    assert!(sharp.embed_norm_gap(&xs[1], &ys[1]).unwrap() <= 1e-3);
    let left = sharp.embed_norm_gap(&[0.0], &ys[0]).unwrap();
    let right = sharp.embed_norm_gap(&[0.0], &ys[1]).unwrap();
    assert!((left - right).abs() < 1e-12, "{left} vs {right}");

    let flat = fit_ckme(&data, &gaussian(), &gaussian(), 1e12).unwrap();
    assert!((flat.embed_norm_gap(&[0.3], &[5.0]).unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn gap_matches_explicit_feature_oracle() {
    // One-point model: β(x) = k(x, x₁)/(1 + λ), so the gap is
    // 1 − 2β·k_Y(y₁, y) + β².
    let data = PairSet::from_samples(&[vec![0.0]], &[vec![1.0]]).unwrap();
    let lambda = 0.5;
    let model = fit_ckme(&data, &gaussian(), &gaussian(), lambda).unwrap();
    let (x, y) = (0.7_f64, -0.4_f64);
    let beta = (-x * x / 2.0).exp() / (1.0 + lambda);
    let ky = (-(1.0 - y) * (1.0 - y) / 2.0).exp();
    let oracle = 1.0 - 2.0 * beta * ky + beta * beta;
    assert!((model.embed_norm_gap(&[x], &[y]).unwrap() - oracle).abs() < 1e-14);
}

#[test]
fn norm_respects_zero_risk_bound() {
    let pairs = transition_pairs(&generate(&chain(), 401, Seed(11)).unwrap()).unwrap();
    let data = PairSet::from_trajectory(&pairs, 1).unwrap();
    for lambda in [1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let model = fit_ckme(&data, &gaussian(), &gaussian(), lambda).unwrap();
        // Gaussian outputs have unit features, so the zero operator has risk 1.
        assert!((model.zero_risk() - 1.0).abs() < 1e-12);
        let bound = (model.zero_risk() / lambda).sqrt() + 1e-9;
        assert!(model.norm() <= bound, "λ = {lambda}: {} > {bound}", model.norm());
    }
}
