//! Maximum-likelihood fitting of the four-coefficient logistic model by
//! iteratively reweighted least squares (Newton's method on the
//! log-likelihood) with step halving.
//!
//! Every sum over rows uses Neumaier compensated summation in row order,
//! which keeps the fitted coefficients stable to well below 1e-9 when the
//! rows of a dataset are permuted.

use serde::{Deserialize, Serialize};

use super::linalg::solve4;
use super::{sigmoid, softplus, Coefficients, LineModel, TrainMeta, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::ingest::LabeledDataset;

/// Coefficient L2 norm beyond which the fit is treated as diverging.
/// On max-abs normalized features |z| > 1e3 is fully saturated.
pub const SEPARATION_NORM_BOUND: f64 = 1e3;

const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop once the penalized log-likelihood changes by less than this.
    pub tolerance: f64,
    /// L2 penalty on b1..b3. The intercept is only penalized if the
    /// coefficients diverge despite the ridge.
    pub ridge: f64,
    pub step_halving_limit: usize,
    pub threshold: f64,
    /// Weight on positive rows; 1 means unweighted.
    pub positive_weight: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            tolerance: 1e-8,
            ridge: 0.0,
            step_halving_limit: 30,
            threshold: DEFAULT_THRESHOLD,
            positive_weight: 1.0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.ridge.is_finite() && self.ridge >= 0.0) {
            return bad("ridge must be non-negative");
        }
        if self.step_halving_limit == 0 {
            return bad("step_halving_limit must be at least 1");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return bad("threshold must lie in (0, 1)");
        }
        if !(self.positive_weight.is_finite() && self.positive_weight > 0.0) {
            return bad("positive_weight must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.comp
    }
}

/// Penalized Bernoulli log-likelihood over a set of normalized rows.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    rows: &'a [[f64; 3]],
    labels: &'a [u8],
    ridge: f64,
    positive_weight: f64,
    penalize_intercept: bool,
}

impl<'a> Objective<'a> {
    pub fn new(rows: &'a [[f64; 3]], labels: &'a [u8], ridge: f64, positive_weight: f64) -> Self {
        Self {
            rows,
            labels,
            ridge,
            positive_weight,
            penalize_intercept: false,
        }
    }

    fn weight(&self, label: u8) -> f64 {
        if label == 1 {
            self.positive_weight
        } else {
            1.0
        }
    }

    fn penalty_mask(&self) -> [f64; 4] {
        [1.0, 1.0, 1.0, if self.penalize_intercept { 1.0 } else { 0.0 }]
    }

    /// Weighted log-likelihood without the penalty term.
    pub fn log_likelihood(&self, b: [f64; 4]) -> f64 {
        let c = Coefficients::from_array(b);
        let mut acc = Neumaier::default();
        for (x, &y) in self.rows.iter().zip(self.labels) {
            let z = c.z(*x);
            acc.add(self.weight(y) * (f64::from(y) * z - softplus(z)));
        }
        acc.value()
    }

    pub fn penalized(&self, b: [f64; 4]) -> f64 {
        let mask = self.penalty_mask();
        let pen: f64 = (0..4).map(|j| mask[j] * b[j] * b[j]).sum();
        self.log_likelihood(b) - 0.5 * self.ridge * pen
    }

    /// Gradient of [`Self::penalized`].
    pub fn gradient(&self, b: [f64; 4]) -> [f64; 4] {
        self.newton_system(b).0
    }

    /// Gradient and negated Hessian of the penalized log-likelihood.
    #[allow(clippy::needless_range_loop)]
    fn newton_system(&self, b: [f64; 4]) -> ([f64; 4], [[f64; 4]; 4]) {
        let c = Coefficients::from_array(b);
        let mut g = [Neumaier::default(); 4];
        // Upper triangle, row-major.
        let mut h = [Neumaier::default(); 10];
        for (x, &y) in self.rows.iter().zip(self.labels) {
            let xr = [x[0], x[1], x[2], 1.0];
            let z = c.z(*x);
            let w = self.weight(y);
            let resid = w * (f64::from(y) - sigmoid(z));
            let curv = w * sigmoid(z) * sigmoid(-z);
            let mut k = 0;
            for i in 0..4 {
                g[i].add(resid * xr[i]);
                for j in i..4 {
                    h[k].add(curv * xr[i] * xr[j]);
                    k += 1;
                }
            }
        }
        let mask = self.penalty_mask();
        let mut grad = [0.0; 4];
        let mut hess = [[0.0; 4]; 4];
        let mut k = 0;
        for i in 0..4 {
            grad[i] = g[i].value() - self.ridge * mask[i] * b[i];
            for j in i..4 {
                hess[i][j] = h[k].value();
                hess[j][i] = hess[i][j];
                k += 1;
            }
            hess[i][i] += self.ridge * mask[i];
        }
        (grad, hess)
    }
}

/// A fitted model plus the optimisation path that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub model: LineModel,
    /// Penalized log-likelihood at the start and after every accepted step.
    pub history: Vec<f64>,
    /// Halvings needed for each accepted step.
    pub halvings: Vec<usize>,
    /// True when divergence forced a penalty on the intercept.
    pub intercept_penalized: bool,
}

pub fn fit(dataset: &LabeledDataset, config: &FitConfig, line_id: &str) -> Result<LineModel> {
    fit_with_trace(dataset, config, line_id).map(|t| t.model)
}

pub fn fit_with_trace(dataset: &LabeledDataset, config: &FitConfig, line_id: &str) -> Result<FitTrace> {
    config.validate()?;
    dataset.validate()?;
    let n = dataset.len();
    if n < MIN_ROWS {
        return Err(Error::InsufficientData { n, min: MIN_ROWS });
    }
    let n_positive = dataset.n_positive();
    if n_positive == 0 || n_positive == n {
        return Err(Error::DegenerateLabels);
    }

    let mut objective = Objective::new(
        &dataset.features,
        &dataset.labels,
        config.ridge,
        config.positive_weight,
    );
    let mut run = newton(&objective, config)?;
    if run.diverged {
        if config.ridge == 0.0 {
            return Err(Error::SeparationDetected { norm: norm(run.beta) });
        }
        objective.penalize_intercept = true;
        run = newton(&objective, config)?;
        if run.diverged {
            return Err(Error::NumericalFailure(format!(
                "coefficients diverged (norm {:.3e}) with ridge {}",
                norm(run.beta),
                config.ridge
            )));
        }
    }
    if config.ridge == 0.0 && separates(&dataset.features, &dataset.labels, run.beta) {
        return Err(Error::SeparationDetected { norm: norm(run.beta) });
    }

    let mut model = LineModel::new(line_id, Coefficients::from_array(run.beta), dataset.norm)
        .with_feature_set(dataset.feature_set)
        .with_threshold(config.threshold);
    model.mean_subtract = dataset.config.mean_subtract;
    model.train_meta = Some(TrainMeta {
        n_samples: n,
        n_positive,
        final_log_likelihood: objective.log_likelihood(run.beta),
        iterations: run.history.len() - 1,
        converged: run.converged,
    });
    Ok(FitTrace {
        model,
        history: run.history,
        halvings: run.halvings,
        intercept_penalized: objective.penalize_intercept,
    })
}

struct NewtonRun {
    beta: [f64; 4],
    history: Vec<f64>,
    halvings: Vec<usize>,
    converged: bool,
    diverged: bool,
}

fn newton(objective: &Objective<'_>, config: &FitConfig) -> Result<NewtonRun> {
    let mut beta = [0.0; 4];
    let mut current = objective.penalized(beta);
    let mut run = NewtonRun {
        beta,
        history: vec![current],
        halvings: Vec::new(),
        converged: false,
        diverged: false,
    };

    for _ in 0..config.max_iterations {
        let (grad, hess) = objective.newton_system(beta);
        let delta = solve4(hess, grad).ok_or_else(|| {
            Error::NumericalFailure("singular 4x4 Newton system; try a positive ridge".into())
        })?;
        let decrement: f64 = (0..4).map(|j| grad[j] * delta[j]).sum();

        let mut step = 1.0;
        let mut accepted = None;
        for halvings in 0..=config.step_halving_limit {
            let candidate: [f64; 4] = std::array::from_fn(|j| beta[j] + step * delta[j]);
            let value = objective.penalized(candidate);
            if value.is_finite() && value >= current {
                accepted = Some((candidate, value, halvings));
                break;
            }
            step *= 0.5;
        }

        let Some((candidate, value, halvings)) = accepted else {
            // No ascent left at working precision.
            run.converged = 0.5 * decrement.abs() < config.tolerance;
            break;
        };
        let change = value - current;
        beta = candidate;
        current = value;
        run.beta = beta;
        run.history.push(value);
        run.halvings.push(halvings);

        if norm(beta) > SEPARATION_NORM_BOUND {
            run.diverged = true;
            break;
        }
        if change.abs() < config.tolerance {
            run.converged = true;
            break;
        }
    }
    Ok(run)
}

fn norm(b: [f64; 4]) -> f64 {
    b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// True when the hyperplane `z = 0` puts every positive row strictly on the
/// positive side and every negative row strictly on the other. A finite
/// unpenalized maximum cannot exist for such data.
fn separates(rows: &[[f64; 3]], labels: &[u8], b: [f64; 4]) -> bool {
    let c = Coefficients::from_array(b);
    rows.iter().zip(labels).all(|(x, &y)| {
        let z = c.z(*x);
        if y == 1 {
            z > 0.0
        } else {
            z < 0.0
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{DatasetConfig, LabeledDataset};
    use crate::signal::{FeatureSet, NormalizationParams};
    use crate::synth::CounterRng;
    use proptest::prelude::*;

    fn dataset(features: Vec<[f64; 3]>, labels: Vec<u8>) -> LabeledDataset {
        LabeledDataset {
            features,
            labels,
            feature_set: FeatureSet::Acceleration,
            norm: NormalizationParams::UNIT,
            rate_hz: 50.0,
            config: DatasetConfig::default(),
            segments: Vec::new(),
        }
    }

    /// Uniform features in [-1, 1]³ with Bernoulli(sigmoid(z)) labels.
    fn simulated(truth: [f64; 4], n: usize, seed: u64) -> LabeledDataset {
        let rng = CounterRng::new(seed);
        let c = Coefficients::from_array(truth);
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for k in 0..n as u64 {
            let x = [
                2.0 * rng.uniform(1, k) - 1.0,
                2.0 * rng.uniform(2, k) - 1.0,
                2.0 * rng.uniform(3, k) - 1.0,
            ];
            labels.push(u8::from(rng.uniform(4, k) < sigmoid(c.z(x))));
            features.push(x);
        }
        dataset(features, labels)
    }

    /// Inverse Fisher information at `b`, through nalgebra's Cholesky so the
    /// tolerance does not lean on the fitter's own solver.
    fn inverse_fisher_sd(ds: &LabeledDataset, b: [f64; 4]) -> [f64; 4] {
        let c = Coefficients::from_array(b);
        let mut info = nalgebra::Matrix4::<f64>::zeros();
        for x in &ds.features {
            let p = 1.0 / (1.0 + (-c.z(*x)).exp());
            let v = nalgebra::Vector4::new(x[0], x[1], x[2], 1.0);
            info += v * v.transpose() * (p * (1.0 - p));
        }
        let cov = info.cholesky().expect("positive definite").inverse();
        std::array::from_fn(|j| cov[(j, j)].sqrt())
    }

    #[test]
    fn recovers_known_coefficients() {
        let truth = [0.5, 2.0, -1.0, -2.0];
        let ds = simulated(truth, 20_000, 11);
        let t = fit_with_trace(&ds, &FitConfig::default(), "sim").unwrap();
        let b = t.model.coefficients.as_array();
        let sd = inverse_fisher_sd(&ds, truth);
        for j in 0..4 {
            assert!((b[j] - truth[j]).abs() <= 3.0 * sd[j], "b{} = {}", j + 1, b[j]);
            assert!((b[j] - truth[j]).abs() <= 0.1, "b{} = {}", j + 1, b[j]);
        }
        let meta = t.model.train_meta.unwrap();
        assert!(meta.converged);
        assert_eq!(meta.n_samples, 20_000);
        assert!(meta.iterations <= 25);
    }

    #[test]
    fn gradient_vanishes_at_optimum() {
        let ds = simulated([1.0, -0.5, 0.25, 0.3], 2_000, 3);
        let m = fit(&ds, &FitConfig::default(), "g").unwrap();
        let obj = Objective::new(&ds.features, &ds.labels, 0.0, 1.0);
        let g = obj.gradient(m.coefficients.as_array());
        for gj in g {
            assert!(gj.abs() < 1e-6 * ds.len() as f64);
        }
    }

    #[test]
    fn antisymmetric_data_has_zero_intercept() {
        let base = simulated([1.0, -2.0, 0.5, 0.0], 500, 5);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for x in &base.features {
            features.push(*x);
            labels.push(1);
            features.push([-x[0], -x[1], -x[2]]);
            labels.push(0);
        }
        // Flip a few pairs so the data is not separable.
        for k in (0..features.len()).step_by(14) {
            labels.swap(k, k + 1);
        }
        let m = fit(&dataset(features, labels), &FitConfig::default(), "sym").unwrap();
        assert!(m.coefficients.b4.abs() < 1e-9);
    }

    #[test]
    fn degenerate_labels() {
        let ds = dataset(vec![[0.1, 0.2, 0.3]; 20], vec![1; 20]);
        assert_eq!(fit(&ds, &FitConfig::default(), "x"), Err(Error::DegenerateLabels));
        let ds = dataset(vec![[0.1, 0.2, 0.3]; 20], vec![0; 20]);
        assert_eq!(fit(&ds, &FitConfig::default(), "x"), Err(Error::DegenerateLabels));
    }

    #[test]
    fn too_few_rows() {
        let ds = dataset(vec![[0.1, 0.2, 0.3]; 4], vec![0, 1, 0, 1]);
        assert!(matches!(
            fit(&ds, &FitConfig::default(), "x"),
            Err(Error::InsufficientData { n: 4, .. })
        ));
    }

    fn separable() -> LabeledDataset {
        let rng = CounterRng::new(9);
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for k in 0..200u64 {
            let x = [rng.uniform(1, k) * 2.0 - 1.0, rng.uniform(2, k) * 2.0 - 1.0, rng.uniform(3, k) * 2.0 - 1.0];
            if x[1].abs() < 0.05 {
                continue;
            }
            labels.push(u8::from(x[1] > 0.0));
            features.push(x);
        }
        dataset(features, labels)
    }

    #[test]
    fn complete_separation_detected() {
        let err = fit(&separable(), &FitConfig::default(), "sep").unwrap_err();
        assert!(matches!(err, Error::SeparationDetected { .. }), "{err:?}");
    }

    #[test]
    fn ridge_handles_separation() {
        let cfg = FitConfig {
            ridge: 1.0,
            ..Default::default()
        };
        let t = fit_with_trace(&separable(), &cfg, "sep").unwrap();
        assert!(t.model.train_meta.unwrap().converged);
        assert!(t.model.coefficients.b2 > 1.0);
        assert!(t.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn singular_system_fails() {
        // Identical feature rows: slopes are not identifiable.
        let ds = dataset(vec![[0.5, 0.5, 0.5]; 20], (0..20).map(|k| (k % 2) as u8).collect());
        assert!(matches!(
            fit(&ds, &FitConfig::default(), "x"),
            Err(Error::NumericalFailure(_))
        ));
    }

    #[test]
    fn invalid_configs() {
        let ds = simulated([0.0, 1.0, 0.0, 0.0], 50, 1);
        for cfg in [
            FitConfig { max_iterations: 0, ..Default::default() },
            FitConfig { tolerance: 0.0, ..Default::default() },
            FitConfig { ridge: -1.0, ..Default::default() },
            FitConfig { threshold: 1.0, ..Default::default() },
            FitConfig { positive_weight: 0.0, ..Default::default() },
        ] {
            assert!(matches!(fit(&ds, &cfg, "x"), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn positive_weight_raises_intercept() {
        let ds = simulated([0.5, 1.0, 0.0, -2.0], 3_000, 8);
        let plain = fit(&ds, &FitConfig::default(), "w").unwrap();
        let weighted = fit(
            &ds,
            &FitConfig {
                positive_weight: 5.0,
                ..Default::default()
            },
            "w",
        )
        .unwrap();
        assert!(weighted.coefficients.b4 > plain.coefficients.b4 + 1.0);
    }

    #[test]
    fn model_inherits_dataset_metadata() {
        let mut ds = simulated([0.5, 1.0, 0.0, -1.0], 500, 2);
        ds.feature_set = FeatureSet::Jerk;
        ds.norm = NormalizationParams::new(2.0, 3.0, 4.0).unwrap();
        let m = fit(&ds, &FitConfig::default(), "meta").unwrap();
        assert_eq!(m.feature_set, FeatureSet::Jerk);
        assert_eq!(m.normalization, ds.norm);
        assert_eq!(m.threshold, 0.5);
        assert_eq!(m.line_id, "meta");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn likelihood_never_decreases(seed in any::<u64>(), ridge in 0.0f64..2.0) {
            let ds = simulated([1.5, -1.0, 0.5, -0.5], 400, seed);
            let cfg = FitConfig { ridge, ..Default::default() };
            let t = fit_with_trace(&ds, &cfg, "m").unwrap();
            prop_assert!(t.history.windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(t.history.len() - 1 <= 25);
        }

        #[test]
        fn row_order_does_not_matter(seed in any::<u64>(), rot in 1usize..399) {
            let ds = simulated([1.0, 0.5, -0.5, -1.0], 400, seed);
            let mut shuffled = ds.clone();
            // Deterministic permutation: rotate then reverse.
            shuffled.features.rotate_left(rot);
            shuffled.labels.rotate_left(rot);
            shuffled.features.reverse();
            shuffled.labels.reverse();
            let a = fit(&ds, &FitConfig::default(), "a").unwrap().coefficients.as_array();
            let b = fit(&shuffled, &FitConfig::default(), "b").unwrap().coefficients.as_array();
            for j in 0..4 {
                prop_assert!((a[j] - b[j]).abs() <= 1e-9);
            }
        }

        #[test]
        fn column_scaling_is_absorbed(seed in any::<u64>(), col in 0usize..3, scale in 0.1f64..10.0) {
            let ds = simulated([1.0, -0.7, 0.4, -0.8], 400, seed);
            let mut scaled = ds.clone();
            for x in &mut scaled.features {
                x[col] *= scale;
            }
            let a = fit(&ds, &FitConfig::default(), "a").unwrap();
            let b = fit(&scaled, &FitConfig::default(), "b").unwrap();
            let (ca, cb) = (a.coefficients.as_array(), b.coefficients.as_array());
            prop_assert!((cb[col] * scale - ca[col]).abs() <= 1e-7 * (1.0 + ca[col].abs()));
            for (xa, xb) in ds.features.iter().zip(&scaled.features) {
                let pa = sigmoid(a.coefficients.z(*xa));
                let pb = sigmoid(b.coefficients.z(*xb));
                prop_assert!((pa - pb).abs() <= 1e-8);
            }
        }
    }
}
