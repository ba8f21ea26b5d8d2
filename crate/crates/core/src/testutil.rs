use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::learners::linear::sigmoid;
use crate::learners::LearnerSpec;
use crate::matrix::Matrix;
use crate::rng::stream;
use crate::treatments::{fit_propensity, overlap_subset, ContrastDataset, OverlapDataset};

/// Three standard-normal features, confounded assignment through `x0`,
/// outcome `1 + x0 - 0.5 x1 + T tau(x) + noise`. Returns the overlap set and
/// the true effect of each retained row.
pub(crate) fn synthetic_with_truth(
    n: usize,
    seed: u64,
    noise_sd: f64,
    tau: impl Fn(&[f64]) -> f64,
) -> (OverlapDataset, Vec<f64>) {
    let mut rng = stream(seed, 0);
    let mut rows = Vec::with_capacity(n);
    let mut treated = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| rng.sample(StandardNormal)).collect();
        let g = sigmoid(0.6 * x[0]);
        let t = rng.random::<f64>() < g;
        let noise: f64 = rng.sample(StandardNormal);
        let y = 1.0 + x[0] - 0.5 * x[1] + if t { tau(&x) } else { 0.0 } + noise_sd * noise;
        rows.push(x);
        treated.push(t);
        outcomes.push(y);
    }
    let data = ContrastDataset {
        level: 1,
        ids: (0..n as u64).collect(),
        features: Matrix::from_rows(&rows).unwrap(),
        treated,
        outcomes,
    };
    let gate = fit_propensity(&data, &LearnerSpec::logistic(1.0), 0.05).unwrap();
    let ov = overlap_subset(&data, &gate).unwrap();
    let truth = ov.features().rows().map(&tau).collect();
    (ov, truth)
}

pub(crate) fn synthetic(n: usize, seed: u64, tau: impl Fn(&[f64]) -> f64) -> OverlapDataset {
    synthetic_with_truth(n, seed, 0.5, tau).0
}
