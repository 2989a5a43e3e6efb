//! Seeded synthetic classification problems and a two-layer ReLU network
//! trained on them, exported as artifact bundles.
//!
//! ID class `c` is an isotropic Gaussian blob centred at a random unit
//! direction scaled by [`CLASS_SEPARATION`]. In the separable layout OOD
//! blobs sit at radius `CLASS_SEPARATION + ood_radius` on random directions
//! orthogonal to the span of the ID means, so they carry content the network
//! never saw and every OOD mean is at least `ood_radius` from every ID mean.
//! The hard
//! layout centres OOD blobs midway between pairs of ID means.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::logsumexp;
use crate::bundle::{linear_layer, ArtifactBundle, SplitTag, OOD_LABEL};
use crate::linalg::{euclidean, Matrix};
use crate::{Error, Result};

/// Norm of every ID class mean.
pub const CLASS_SEPARATION: f64 = 5.0;

/// Training stops with [`Error::DivergedLoss`] once the loss exceeds the
/// initial loss by this factor (or stops being finite).
pub const DIVERGENCE_FACTOR: f64 = 1e6;

pub const DEFAULT_HIDDEN_BIAS: f64 = 0.75;
pub const DEFAULT_INIT_SCALE: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum OodLayout {
    /// OOD blobs outside the ID shell.
    #[default]
    Separable,
    /// OOD blobs between pairs of ID blobs.
    Hard,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioSpec {
    pub seed: u64,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub classes: usize,
    pub samples_per_class: usize,
    pub ood_samples: usize,
    pub ood_blobs: usize,
    pub ood_radius: f64,
    pub blob_std: f64,
    /// Fraction of each ID class assigned to the training split.
    pub train_fraction: f64,
    pub layout: OodLayout,
}

impl Default for ScenarioSpec {
    /// 600 train / 300 test-ID / 300 OOD samples with `p = 20`, `d = 32`, `C = 3`.
    fn default() -> Self {
        Self {
            seed: 7,
            input_dim: 20,
            hidden_dim: 32,
            classes: 3,
            samples_per_class: 300,
            ood_samples: 300,
            ood_blobs: 3,
            ood_radius: 4.0,
            blob_std: 1.0,
            train_fraction: 2.0 / 3.0,
            layout: OodLayout::Separable,
        }
    }
}

impl ScenarioSpec {
    pub fn hard() -> Self {
        Self {
            layout: OodLayout::Hard,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("samples_per_class", self.samples_per_class),
            ("ood_samples", self.ood_samples),
            ("ood_blobs", self.ood_blobs),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if self.classes < 2 {
            return Err(Error::invalid("classes", "must be at least 2"));
        }
        if !(self.ood_radius > 0.0) || !self.ood_radius.is_finite() {
            return Err(Error::invalid("ood_radius", "must be positive"));
        }
        if !(self.blob_std > 0.0) || !self.blob_std.is_finite() {
            return Err(Error::invalid("blob_std", "must be positive"));
        }
        let train = self.train_per_class();
        if train < 1 || train >= self.samples_per_class {
            return Err(Error::invalid(
                "train_fraction",
                "must leave at least one train and one test sample per class",
            ));
        }
        Ok(())
    }

    pub fn train_per_class(&self) -> usize {
        libm::round(self.train_fraction * self.samples_per_class as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub spec: ScenarioSpec,
    pub train_inputs: Matrix,
    pub train_labels: Vec<usize>,
    pub test_inputs: Matrix,
    pub test_labels: Vec<usize>,
    pub ood_inputs: Matrix,
    pub id_means: Vec<Vec<f64>>,
    pub ood_means: Vec<Vec<f64>>,
}

fn unit_direction(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let n = crate::linalg::norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Orthonormal basis of the span of `vectors` (Gram-Schmidt, dependent
/// vectors dropped).
fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut r = v.clone();
        for b in &basis {
            let proj = crate::linalg::dot(&r, b);
            for (x, y) in r.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let n = crate::linalg::norm2(&r);
        if n > 1e-9 {
            basis.push(r.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

/// Random unit vector orthogonal to `basis`; a plain random direction when
/// `basis` already spans the whole space.
fn orthogonal_direction(rng: &mut ChaCha8Rng, basis: &[Vec<f64>], p: usize) -> Vec<f64> {
    if basis.len() >= p {
        return unit_direction(rng, p);
    }
    loop {
        let mut v = unit_direction(rng, p);
        for b in basis {
            let proj = crate::linalg::dot(&v, b);
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let n = crate::linalg::norm2(&v);
        if n > 1e-6 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn blob_sample(rng: &mut ChaCha8Rng, mean: &[f64], std: f64) -> Vec<f64> {
    mean.iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            m + std * z
        })
        .collect()
}

/// Draws a dataset; identical specs give bit-identical datasets.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    spec.validate()?;
    let p = spec.input_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let id_means: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            unit_direction(&mut rng, p)
                .into_iter()
                .map(|x| x * CLASS_SEPARATION)
                .collect()
        })
        .collect();
    let id_basis = orthonormalize(&id_means);
    let ood_means: Vec<Vec<f64>> = (0..spec.ood_blobs)
        .map(|b| match spec.layout {
            OodLayout::Separable => orthogonal_direction(&mut rng, &id_basis, p)
                .into_iter()
                .map(|x| x * (CLASS_SEPARATION + spec.ood_radius))
                .collect(),
            OodLayout::Hard => {
                let c0 = b % spec.classes;
                let c1 = (b + 1) % spec.classes;
                id_means[c0]
                    .iter()
                    .zip(&id_means[c1])
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect()
            }
        })
        .collect();

    let n_train = spec.train_per_class();
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    for (c, mean) in id_means.iter().enumerate() {
        for i in 0..spec.samples_per_class {
            let x = blob_sample(&mut rng, mean, spec.blob_std);
            if i < n_train {
                train_rows.push(x);
                train_labels.push(c);
            } else {
                test_rows.push(x);
                test_labels.push(c);
            }
        }
    }
    let ood_rows: Vec<Vec<f64>> = (0..spec.ood_samples)
        .map(|i| blob_sample(&mut rng, &ood_means[i % spec.ood_blobs], spec.blob_std))
        .collect();

    Ok(Dataset {
        spec: spec.clone(),
        train_inputs: Matrix::from_rows(&train_rows)?,
        train_labels,
        test_inputs: Matrix::from_rows(&test_rows)?,
        test_labels,
        ood_inputs: Matrix::from_rows(&ood_rows)?,
        id_means,
        ood_means,
    })
}

impl Dataset {
    /// Smallest distance from each OOD blob mean to any ID mean.
    pub fn ood_mean_clearance(&self) -> Vec<f64> {
        self.ood_means
            .iter()
            .map(|o| {
                self.id_means
                    .iter()
                    .map(|m| euclidean(o, m))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Mean of the initial hidden biases.
    pub hidden_bias: f64,
    /// Multiplier on the He-normal scale of the initial hidden weights.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.05,
            seed: 7,
            hidden_bias: DEFAULT_HIDDEN_BIAS,
            init_scale: DEFAULT_INIT_SCALE,
        }
    }
}

/// Input -> ReLU hidden layer -> linear logits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToyModel {
    /// `p x d`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `d x C`; exported as the bundle's final layer.
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Gradients with the same shapes as [`ToyModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyGrads {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl ToyModel {
    /// He-normal hidden weights, scaled normal output weights, and small
    /// random biases. The output bias sum is invariant under cross-entropy
    /// gradient steps, so it is drawn non-zero here.
    pub fn init(input_dim: usize, hidden_dim: usize, classes: usize, config: &TrainConfig) -> Self {
        let (hidden_bias, seed) = (config.hidden_bias, config.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut normal = |scale: f64| -> f64 {
            let z: f64 = rng.sample(StandardNormal);
            z * scale
        };
        let s1 = config.init_scale * libm::sqrt(2.0 / input_dim as f64);
        let w1: Vec<f64> = (0..input_dim * hidden_dim).map(|_| normal(s1)).collect();
        let b1: Vec<f64> = (0..hidden_dim).map(|_| hidden_bias + normal(0.1)).collect();
        let s2 = libm::sqrt(1.0 / hidden_dim as f64);
        let w2: Vec<f64> = (0..hidden_dim * classes).map(|_| normal(s2)).collect();
        let b2: Vec<f64> = (0..classes).map(|_| normal(0.5)).collect();
        Self {
            w1: Matrix::new(input_dim, hidden_dim, w1).expect("w1 shape"),
            b1,
            w2: Matrix::new(hidden_dim, classes, w2).expect("w2 shape"),
            b2,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn classes(&self) -> usize {
        self.w2.cols()
    }

    /// Pre-activation of the hidden layer.
    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        linear_layer(x, &self.w1, &self.b1)
    }

    /// Penultimate (post-ReLU) features.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.pre_activation(x).into_iter().map(|v| v.max(0.0)).collect()
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        linear_layer(&self.features(x), &self.w2, &self.b2)
    }

    pub fn accuracy(&self, inputs: &Matrix, labels: &[usize]) -> f64 {
        let correct = inputs
            .row_iter()
            .zip(labels)
            .filter(|(x, &y)| {
                let l = self.logits(x);
                let mut best = 0;
                for c in 1..l.len() {
                    if l[c] > l[best] {
                        best = c;
                    }
                }
                best == y
            })
            .count();
        correct as f64 / labels.len().max(1) as f64
    }

    /// Mean softmax cross-entropy.
    pub fn loss(&self, inputs: &Matrix, labels: &[usize]) -> f64 {
        let total: f64 = inputs
            .row_iter()
            .zip(labels)
            .map(|(x, &y)| {
                let l = self.logits(x);
                logsumexp(&l) - l[y]
            })
            .sum();
        total / labels.len() as f64
    }

    /// Mean cross-entropy and its analytic gradient.
    pub fn loss_and_grad(&self, inputs: &Matrix, labels: &[usize]) -> (f64, ToyGrads) {
        let (p, d, c) = (self.input_dim(), self.hidden_dim(), self.classes());
        let n = labels.len() as f64;
        let mut g = ToyGrads {
            w1: Matrix::zeros(p, d),
            b1: vec![0.0; d],
            w2: Matrix::zeros(d, c),
            b2: vec![0.0; c],
        };
        let mut loss = 0.0;
        let mut dh = vec![0.0; d];
        for (x, &y) in inputs.row_iter().zip(labels) {
            let pre = self.pre_activation(x);
            let h: Vec<f64> = pre.iter().map(|v| v.max(0.0)).collect();
            let logits = linear_layer(&h, &self.w2, &self.b2);
            let lse = logsumexp(&logits);
            loss += lse - logits[y];
            let dlogits: Vec<f64> = logits
                .iter()
                .enumerate()
                .map(|(k, l)| (libm::exp(l - lse) - if k == y { 1.0 } else { 0.0 }) / n)
                .collect();
            for (gb, dl) in g.b2.iter_mut().zip(&dlogits) {
                *gb += dl;
            }
            for j in 0..d {
                let row = g.w2.row_mut(j);
                for k in 0..c {
                    row[k] += h[j] * dlogits[k];
                }
                let active = pre[j] > 0.0;
                dh[j] = if active {
                    crate::linalg::dot(self.w2.row(j), &dlogits)
                } else {
                    0.0
                };
                g.b1[j] += dh[j];
            }
            for (i, &xi) in x.iter().enumerate() {
                let row = g.w1.row_mut(i);
                for j in 0..d {
                    row[j] += xi * dh[j];
                }
            }
        }
        (loss / n, g)
    }

    fn apply(&mut self, g: &ToyGrads, lr: f64) {
        fn step(params: &mut [f64], grads: &[f64], lr: f64) {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * g;
            }
        }
        let (p, d, c) = (self.input_dim(), self.hidden_dim(), self.classes());
        for i in 0..p {
            step(self.w1.row_mut(i), g.w1.row(i), lr);
        }
        step(&mut self.b1, &g.b1, lr);
        for j in 0..d {
            step(self.w2.row_mut(j), g.w2.row(j), lr);
        }
        step(&mut self.b2[..c], &g.b2, lr);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub model: ToyModel,
    /// Loss before each update, followed by the final loss.
    pub loss_trace: Vec<f64>,
}

/// Full-batch gradient descent on mean softmax cross-entropy.
///
/// Fails with [`Error::DivergedLoss`] when the loss stops being finite or
/// grows past [`DIVERGENCE_FACTOR`] times its initial value.
pub fn train_toy(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    if config.epochs < 1 {
        return Err(Error::invalid("epochs", "must be at least 1"));
    }
    if !(config.learning_rate > 0.0) || !config.learning_rate.is_finite() {
        return Err(Error::invalid("learning_rate", "must be positive"));
    }
    let spec = &dataset.spec;
    let mut model = ToyModel::init(spec.input_dim, spec.hidden_dim, spec.classes, config);
    let mut loss_trace = Vec::with_capacity(config.epochs + 1);
    let mut ceiling = f64::INFINITY;
    let diverged = |loss: f64, ceiling: f64| !loss.is_finite() || loss > ceiling;
    for epoch in 0..config.epochs {
        let (loss, grads) = model.loss_and_grad(&dataset.train_inputs, &dataset.train_labels);
        if diverged(loss, ceiling) {
            return Err(Error::DivergedLoss { epoch });
        }
        if epoch == 0 {
            ceiling = DIVERGENCE_FACTOR * loss.max(f64::MIN_POSITIVE);
        }
        loss_trace.push(loss);
        model.apply(&grads, config.learning_rate);
    }
    let final_loss = model.loss(&dataset.train_inputs, &dataset.train_labels);
    if diverged(final_loss, ceiling) {
        return Err(Error::DivergedLoss { epoch: config.epochs });
    }
    loss_trace.push(final_loss);
    Ok(TrainOutcome { model, loss_trace })
}

fn export_split(model: &ToyModel, inputs: &Matrix, labels: Vec<i64>, split: SplitTag) -> Result<ArtifactBundle> {
    let n = inputs.rows();
    let (d, c) = (model.hidden_dim(), model.classes());
    let mut features = Matrix::zeros(n, d);
    let mut logits = Matrix::zeros(n, c);
    for (i, x) in inputs.row_iter().enumerate() {
        let h = model.features(x);
        let l = linear_layer(&h, &model.w2, &model.b2);
        features.row_mut(i).copy_from_slice(&h);
        logits.row_mut(i).copy_from_slice(&l);
    }
    let class_names: Vec<String> = (0..c).map(|k| format!("class_{k}")).collect();
    let mut b = ArtifactBundle::new(
        features,
        logits,
        labels,
        model.w2.clone(),
        model.b2.clone(),
        class_names,
        split,
    )?;
    let mut meta = BTreeMap::new();
    meta.insert("producer".into(), "synthetic-lab".into());
    meta.insert("feature_layer".into(), "hidden_relu".into());
    meta.insert("precision".into(), "float64".into());
    b.metadata = meta;
    Ok(b)
}

/// The three bundles of a toy run.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleSet {
    pub train: ArtifactBundle,
    pub test_id: ArtifactBundle,
    pub test_ood: ArtifactBundle,
}

/// Exports penultimate features and logits of every split.
pub fn export_bundles(model: &ToyModel, dataset: &Dataset) -> Result<BundleSet> {
    let to_i64 = |ls: &[usize]| ls.iter().map(|&l| l as i64).collect::<Vec<_>>();
    Ok(BundleSet {
        train: export_split(
            model,
            &dataset.train_inputs,
            to_i64(&dataset.train_labels),
            SplitTag::Train,
        )?,
        test_id: export_split(
            model,
            &dataset.test_inputs,
            to_i64(&dataset.test_labels),
            SplitTag::TestId,
        )?,
        test_ood: export_split(
            model,
            &dataset.ood_inputs,
            vec![OOD_LABEL; dataset.ood_inputs.rows()],
            SplitTag::TestOod,
        )?,
    })
}
