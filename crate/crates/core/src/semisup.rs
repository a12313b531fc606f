//! Semi-supervised evaluator: an autoencoder pretrained on unlabeled
//! feature vectors, weight transfer into a softmax classifier, grid-searched
//! fine-tuning, and AUROC scoring.
//!
//! The autoencoder is 45 -> 100 -> 50 -> 100 -> 45 with tanh hidden layers
//! and a linear output trained on squared reconstruction error. Its three
//! hidden layers seed the classifier verbatim; only the 2-way output layer
//! is drawn fresh. For the maxout grid point the transferred matrices keep
//! their shapes: maxout halves each hidden activation and the halved vector
//! is expanded back by duplicating each entry into its consecutive pair
//! before the next affine, so every copied weight stays in use.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{contract_err, shape_err, Result};
use crate::features::{FeatureVector, FEATURE_COUNT};
use crate::fmath;
use crate::label::DrivingClass;
use crate::numerics::{
    adam_update, softmax, Activation, AdamState, Matrix, ParamPacker, ParamUnpacker, ParamVector,
};
use crate::preprocess::{apply_minmax, fit_minmax, ScalerParams};
use crate::rng::uniform_sym;
use crate::rnn::INIT_SCALE;

/// One affine layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub w: Matrix,
    pub b: Vec<f64>,
}

impl DenseLayer {
    fn init<R: RngCore>(out_dim: usize, in_dim: usize, rng: &mut R) -> DenseLayer {
        let mut w = Matrix::zeros(out_dim, in_dim);
        for v in w.data_mut() {
            *v = uniform_sym(rng, INIT_SCALE);
        }
        let b = (0..out_dim).map(|_| uniform_sym(rng, INIT_SCALE)).collect();
        DenseLayer { w, b }
    }

    fn zeros_like(&self) -> DenseLayer {
        DenseLayer {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: vec![0.0; self.b.len()],
        }
    }

    fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        self.w.matvec_acc(x, &mut z);
        z
    }
}

/// Layer widths of the autoencoder; the classifier reuses the same hidden
/// stack. The default follows the reference configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AeShape {
    pub input: usize,
    pub hidden: [usize; 3],
}

impl Default for AeShape {
    fn default() -> AeShape {
        AeShape {
            input: FEATURE_COUNT,
            hidden: [100, 50, 100],
        }
    }
}

/// Autoencoder parameters: three tanh hidden layers and a linear output
/// back to the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    pub layers: Vec<DenseLayer>,
}

impl AutoencoderParams {
    pub fn init<R: RngCore>(shape: &AeShape, rng: &mut R) -> AutoencoderParams {
        let dims = [
            shape.input,
            shape.hidden[0],
            shape.hidden[1],
            shape.hidden[2],
            shape.input,
        ];
        let layers = (0..4)
            .map(|i| DenseLayer::init(dims[i + 1], dims[i], rng))
            .collect();
        AutoencoderParams { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.cols()
    }

    /// Reconstruction of one input (tanh hiddens, linear output).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape_err!(
                "autoencoder takes {} inputs, got {}",
                self.input_dim(),
                x.len()
            ));
        }
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.forward(&a);
            if i + 1 < self.layers.len() {
                for v in z.iter_mut() {
                    *v = fmath::tanh(*v);
                }
            }
            a = z;
        }
        Ok(a)
    }

    /// Bottleneck code: the activations after the second hidden layer.
    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(shape_err!(
                "autoencoder takes {} inputs, got {}",
                self.input_dim(),
                x.len()
            ));
        }
        let mut a = x.to_vec();
        for layer in &self.layers[..2] {
            let mut z = layer.forward(&a);
            for v in z.iter_mut() {
                *v = fmath::tanh(*v);
            }
            a = z;
        }
        Ok(a)
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        for (i, layer) in self.layers.iter().enumerate() {
            p.push_matrix(&alloc::format!("w{i}"), &layer.w);
            p.push_vector(&alloc::format!("b{i}"), &layer.b);
        }
        p.finish()
    }

    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<AutoencoderParams> {
        let mut u = ParamUnpacker::new(pv);
        let mut layers = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            layers.push(DenseLayer {
                w: u.take_matrix(layer.w.rows(), layer.w.cols())?,
                b: u.take_vector(layer.b.len())?,
            });
        }
        u.finish()?;
        Ok(AutoencoderParams { layers })
    }
}

/// Mean squared reconstruction error `(1/n) sum ||x - x'||^2` over the batch
/// with its full analytic gradient.
pub fn ae_loss_and_grad(
    ae: &AutoencoderParams,
    data: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    if data.is_empty() {
        return Err(contract_err!("autoencoder loss on an empty batch"));
    }
    let n = data.len() as f64;
    let mut grads: Vec<DenseLayer> = ae.layers.iter().map(DenseLayer::zeros_like).collect();
    let mut loss = 0.0;
    for x in data {
        if x.len() != ae.input_dim() {
            return Err(shape_err!(
                "autoencoder takes {} inputs, got {}",
                ae.input_dim(),
                x.len()
            ));
        }
        // forward, caching activations per layer
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(ae.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in ae.layers.iter().enumerate() {
            let mut z = layer.forward(acts.last().expect("nonempty"));
            if i + 1 < ae.layers.len() {
                for v in z.iter_mut() {
                    *v = fmath::tanh(*v);
                }
            }
            acts.push(z);
        }
        let recon = acts.last().expect("nonempty");
        let mut delta: Vec<f64> = recon
            .iter()
            .zip(x)
            .map(|(r, t)| {
                let d = r - t;
                loss += d * d / n;
                2.0 * d / n
            })
            .collect();
        // backward: output layer is linear, hidden layers tanh
        for i in (0..ae.layers.len()).rev() {
            if i + 1 < ae.layers.len() {
                for (d, a) in delta.iter_mut().zip(&acts[i + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            grads[i].w.add_outer(&delta, &acts[i]);
            for (gb, d) in grads[i].b.iter_mut().zip(&delta) {
                *gb += d;
            }
            if i > 0 {
                let mut prev = vec![0.0; acts[i].len()];
                ae.layers[i].w.matvec_t_acc(&delta, &mut prev);
                delta = prev;
            }
        }
    }
    let mut p = ParamPacker::new();
    for (i, layer) in grads.iter().enumerate() {
        p.push_matrix(&alloc::format!("w{i}"), &layer.w);
        p.push_vector(&alloc::format!("b{i}"), &layer.b);
    }
    Ok((loss, p.finish()))
}

/// Full-batch ADAM on the reconstruction error; returns the trained
/// parameters and the per-epoch loss curve.
pub fn train_autoencoder<R: RngCore>(
    data: &[Vec<f64>],
    shape: &AeShape,
    epochs: usize,
    lr: f64,
    rng: &mut R,
) -> Result<(AutoencoderParams, Vec<f64>)> {
    if data.is_empty() {
        return Err(contract_err!("train_autoencoder: empty training set"));
    }
    let mut ae = AutoencoderParams::init(shape, rng);
    let mut adam = AdamState::new(ae.flatten().len());
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let (loss, grads) = ae_loss_and_grad(&ae, data)?;
        if !loss.is_finite() {
            return Err(crate::error::nonfinite_err!(
                "autoencoder loss at epoch {epoch}"
            ));
        }
        history.push(loss);
        let (theta, next) = adam_update(&ae.flatten(), &grads, &adam, lr)?;
        adam = next;
        ae = ae.unflatten_like(&theta)?;
    }
    Ok((ae, history))
}

/// Classifier: the transferred hidden stack plus a fresh softmax output
/// layer. `activation` is applied after every hidden affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub hidden: Vec<DenseLayer>,
    pub output: DenseLayer,
    pub activation: Activation,
}

impl ClassifierParams {
    pub fn input_dim(&self) -> usize {
        self.hidden[0].w.cols()
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        for (i, layer) in self.hidden.iter().enumerate() {
            p.push_matrix(&alloc::format!("h{i}_w"), &layer.w);
            p.push_vector(&alloc::format!("h{i}_b"), &layer.b);
        }
        p.push_matrix("out_w", &self.output.w);
        p.push_vector("out_b", &self.output.b);
        p.finish()
    }

    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<ClassifierParams> {
        let mut u = ParamUnpacker::new(pv);
        let mut hidden = Vec::with_capacity(self.hidden.len());
        for layer in &self.hidden {
            hidden.push(DenseLayer {
                w: u.take_matrix(layer.w.rows(), layer.w.cols())?,
                b: u.take_vector(layer.b.len())?,
            });
        }
        let output = DenseLayer {
            w: u.take_matrix(self.output.w.rows(), self.output.w.cols())?,
            b: u.take_vector(self.output.b.len())?,
        };
        u.finish()?;
        Ok(ClassifierParams {
            hidden,
            output,
            activation: self.activation,
        })
    }
}

/// Duplicates each entry into a consecutive pair, undoing maxout's halving
/// so the next transferred affine keeps its full input width.
fn expand_pairs(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * 2);
    for v in a {
        out.push(*v);
        out.push(*v);
    }
    out
}

/// Matches an activation vector to a layer's expected input width,
/// pair-expanding after maxout halving when needed.
fn fit_input(a: Vec<f64>, expected: usize, activation: Activation) -> Result<Vec<f64>> {
    if a.len() == expected {
        Ok(a)
    } else if activation == Activation::Maxout && a.len() * 2 == expected {
        Ok(expand_pairs(&a))
    } else {
        Err(shape_err!(
            "classifier layer takes {expected} inputs, got {}",
            a.len()
        ))
    }
}

/// Hidden weights and biases copied verbatim from the autoencoder's three
/// hidden layers; the 2-way output layer is drawn fresh from the rng.
pub fn transfer_weights<R: RngCore>(
    ae: &AutoencoderParams,
    activation: Activation,
    rng: &mut R,
) -> ClassifierParams {
    let hidden: Vec<DenseLayer> = ae.layers[..3].to_vec();
    let out_in = hidden[2].w.rows();
    ClassifierParams {
        hidden,
        output: DenseLayer::init(2, out_in, rng),
        activation,
    }
}

struct ClassifierForward {
    /// Input to each affine (after any pair expansion).
    affine_inputs: Vec<Vec<f64>>,
    /// Pre-activation of each hidden layer.
    preacts: Vec<Vec<f64>>,
    /// Post-activation of each hidden layer.
    acts: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

fn classifier_forward(params: &ClassifierParams, x: &[f64]) -> Result<ClassifierForward> {
    if x.len() != params.input_dim() {
        return Err(shape_err!(
            "classifier takes {} inputs, got {}",
            params.input_dim(),
            x.len()
        ));
    }
    let mut affine_inputs = Vec::with_capacity(params.hidden.len() + 1);
    let mut preacts = Vec::with_capacity(params.hidden.len());
    let mut acts = Vec::with_capacity(params.hidden.len());
    let mut a = x.to_vec();
    for layer in &params.hidden {
        let input = fit_input(a, layer.w.cols(), params.activation)?;
        let z = layer.forward(&input);
        let act = crate::numerics::activation(params.activation, &z)?;
        affine_inputs.push(input);
        preacts.push(z);
        acts.push(act.clone());
        a = act;
    }
    let out_in = fit_input(a, params.output.w.cols(), params.activation)?;
    let logits = params.output.forward(&out_in);
    affine_inputs.push(out_in);
    Ok(ClassifierForward {
        affine_inputs,
        preacts,
        acts,
        probs: softmax(&logits),
    })
}

/// Class probabilities `[p(normal), p(aggressive)]`.
pub fn class_probabilities(params: &ClassifierParams, x: &[f64]) -> Result<Vec<f64>> {
    Ok(classifier_forward(params, x)?.probs)
}

/// Probability of the aggressive class.
pub fn predict(params: &ClassifierParams, features: &FeatureVector) -> Result<f64> {
    let probs = class_probabilities(params, features.values())?;
    Ok(probs[DrivingClass::Aggressive.index()])
}

/// Backward step through the activation (and any pair expansion) of hidden
/// layer `i`, turning `dL/d act` into `dL/d preact`.
fn activation_backward(
    activation: Activation,
    preact: &[f64],
    act: &[f64],
    d_act: &[f64],
) -> Vec<f64> {
    match activation {
        Activation::Tanh => d_act
            .iter()
            .zip(act)
            .map(|(d, a)| d * (1.0 - a * a))
            .collect(),
        Activation::Sigmoid => d_act
            .iter()
            .zip(act)
            .map(|(d, a)| d * a * (1.0 - a))
            .collect(),
        Activation::Rectifier => d_act
            .iter()
            .zip(preact)
            .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
            .collect(),
        Activation::Maxout => {
            // route the gradient to the winner of each pair; ties go to the
            // first element so the subgradient choice is deterministic
            let mut dz = vec![0.0; preact.len()];
            for (j, d) in d_act.iter().enumerate() {
                let (a, b) = (preact[2 * j], preact[2 * j + 1]);
                let win = if b > a { 2 * j + 1 } else { 2 * j };
                dz[win] = *d;
            }
            dz
        }
    }
}

/// Collapses the gradient of a pair-expanded vector back to the halved one.
fn collapse_pairs(d_expanded: &[f64]) -> Vec<f64> {
    d_expanded
        .chunks_exact(2)
        .map(|p| p[0] + p[1])
        .collect()
}

/// Mean cross-entropy of the softmax outputs over a labeled batch, with the
/// full analytic gradient.
pub fn classifier_loss_and_grad(
    params: &ClassifierParams,
    xs: &[Vec<f64>],
    ys: &[DrivingClass],
) -> Result<(f64, ParamVector)> {
    if xs.is_empty() || xs.len() != ys.len() {
        return Err(contract_err!(
            "classifier loss: {} inputs vs {} labels",
            xs.len(),
            ys.len()
        ));
    }
    let n = xs.len() as f64;
    let mut hidden_grads: Vec<DenseLayer> =
        params.hidden.iter().map(DenseLayer::zeros_like).collect();
    let mut out_grad = params.output.zeros_like();
    let mut loss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fwd = classifier_forward(params, x)?;
        let target = y.index();
        loss += -fmath::ln(fwd.probs[target].max(1e-300)) / n;
        // softmax + CE
        let mut delta: Vec<f64> = fwd.probs.clone();
        delta[target] -= 1.0;
        for d in delta.iter_mut() {
            *d /= n;
        }
        // output layer
        out_grad.w.add_outer(&delta, &fwd.affine_inputs[params.hidden.len()]);
        for (gb, d) in out_grad.b.iter_mut().zip(&delta) {
            *gb += d;
        }
        let mut d_input = vec![0.0; params.output.w.cols()];
        params.output.w.matvec_t_acc(&delta, &mut d_input);
        // hidden stack
        for i in (0..params.hidden.len()).rev() {
            let d_act = if d_input.len() == fwd.acts[i].len() {
                d_input
            } else {
                collapse_pairs(&d_input)
            };
            let dz = activation_backward(params.activation, &fwd.preacts[i], &fwd.acts[i], &d_act);
            hidden_grads[i].w.add_outer(&dz, &fwd.affine_inputs[i]);
            for (gb, d) in hidden_grads[i].b.iter_mut().zip(&dz) {
                *gb += d;
            }
            d_input = vec![0.0; params.hidden[i].w.cols()];
            params.hidden[i].w.matvec_t_acc(&dz, &mut d_input);
        }
    }
    let mut p = ParamPacker::new();
    for (i, layer) in hidden_grads.iter().enumerate() {
        p.push_matrix(&alloc::format!("h{i}_w"), &layer.w);
        p.push_vector(&alloc::format!("h{i}_b"), &layer.b);
    }
    p.push_matrix("out_w", &out_grad.w);
    p.push_vector("out_b", &out_grad.b);
    Ok((loss, p.finish()))
}

/// Full-batch ADAM fine-tuning; deterministic given the initialization.
pub fn train_classifier(
    init: &ClassifierParams,
    train: &[(FeatureVector, DrivingClass)],
    epochs: usize,
    lr: f64,
) -> Result<ClassifierParams> {
    if train.is_empty() {
        return Err(contract_err!("train_classifier: empty training set"));
    }
    let classes: [usize; 2] = train.iter().fold([0, 0], |mut acc, (_, y)| {
        acc[y.index()] += 1;
        acc
    });
    if classes[0] == 0 || classes[1] == 0 {
        return Err(contract_err!(
            "train_classifier: training set must contain both classes"
        ));
    }
    let xs: Vec<Vec<f64>> = train.iter().map(|(f, _)| f.values().to_vec()).collect();
    let ys: Vec<DrivingClass> = train.iter().map(|(_, y)| *y).collect();
    let mut params = init.clone();
    let mut adam = AdamState::new(params.flatten().len());
    for epoch in 0..epochs {
        let (loss, grads) = classifier_loss_and_grad(&params, &xs, &ys)?;
        if !loss.is_finite() {
            return Err(crate::error::nonfinite_err!(
                "classifier loss at epoch {epoch}"
            ));
        }
        let (theta, next) = adam_update(&params.flatten(), &grads, &adam, lr)?;
        adam = next;
        params = params.unflatten_like(&theta)?;
    }
    Ok(params)
}

/// The hyperparameter grid for fine-tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub epochs: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl Default for GridSpec {
    fn default() -> GridSpec {
        GridSpec {
            learning_rates: vec![0.001, 0.01, 0.1],
            epochs: vec![100, 200, 500],
            activations: vec![Activation::Tanh, Activation::Maxout, Activation::Rectifier],
        }
    }
}

impl GridSpec {
    pub fn len(&self) -> usize {
        self.learning_rates.len() * self.epochs.len() * self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub activation: Activation,
}

/// Validation score of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: GridConfig,
    pub val_auroc: f64,
}

/// Result of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: ClassifierParams,
    pub best_config: GridConfig,
    pub table: Vec<GridEntry>,
}

/// Trains every grid configuration from the same transferred hidden stack
/// (fresh output layer per configuration, seeded by configuration index) and
/// keeps the best validation AUROC. Iteration order is learning rate, then
/// epochs, then activation, and the comparison is strict, which makes the
/// tie-break "smaller lr, then fewer epochs, then activation order" exact.
pub fn grid_search(
    ae: &AutoencoderParams,
    train: &[(FeatureVector, DrivingClass)],
    val: &[(FeatureVector, DrivingClass)],
    grid: &GridSpec,
    seed: u64,
) -> Result<GridOutcome> {
    if grid.is_empty() {
        return Err(contract_err!("grid_search: empty grid"));
    }
    if train.is_empty() || val.is_empty() {
        return Err(contract_err!("grid_search: empty train or validation set"));
    }
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, ClassifierParams, GridConfig)> = None;
    let mut idx = 0u64;
    for &lr in &grid.learning_rates {
        for &epochs in &grid.epochs {
            for &activation in &grid.activations {
                let mut rng = crate::rng::stream_rng(seed, idx);
                idx += 1;
                let init = transfer_weights(ae, activation, &mut rng);
                let trained = train_classifier(&init, train, epochs, lr)?;
                let scores: Vec<f64> = val
                    .iter()
                    .map(|(f, _)| predict(&trained, f))
                    .collect::<Result<_>>()?;
                let labels: Vec<bool> = val
                    .iter()
                    .map(|(_, y)| *y == DrivingClass::Aggressive)
                    .collect();
                let score = auroc(&scores, &labels)?;
                let config = GridConfig {
                    learning_rate: lr,
                    epochs,
                    activation,
                };
                table.push(GridEntry {
                    config,
                    val_auroc: score,
                });
                let better = match &best {
                    Some((best_score, _, _)) => score > *best_score,
                    None => true,
                };
                if better {
                    best = Some((score, trained, config));
                }
            }
        }
    }
    let (_, params, config) = best.expect("grid is nonempty");
    Ok(GridOutcome {
        best: params,
        best_config: config,
        table,
    })
}

/// One point of an ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC curve with its area. The area is the Mann-Whitney statistic:
/// the fraction of (positive, negative) pairs ranked correctly, ties
/// counting one half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

/// AUROC by average ranks, exactly equal to pair counting with half-credit
/// ties.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(shape_err!(
            "auroc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        ));
    }
    let positives = labels.iter().filter(|l| **l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(contract_err!(
            "auroc: need both classes, got {positives} positives and {negatives} negatives"
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| f64::total_cmp(&scores[*a], &scores[*b]));
    // average ranks within tie groups (1-based ranks)
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = positives as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Full ROC sweep over the distinct score thresholds, highest first,
/// starting from the all-negative corner.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let area = auroc(scores, labels)?;
    let positives = labels.iter().filter(|l| **l).count() as f64;
    let negatives = labels.len() as f64 - positives;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| f64::total_cmp(&scores[*b], &scores[*a]));
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / negatives,
            tpr: tp as f64 / positives,
        });
    }
    Ok(RocCurve {
        points,
        auroc: area,
    })
}

/// Fits a per-dimension MinMax scaler on feature vectors (reuses the signal
/// scaler machinery; features are just 45-channel rows).
pub fn fit_feature_scaler(fit_on: &[FeatureVector]) -> Result<ScalerParams> {
    if fit_on.is_empty() {
        return Err(contract_err!("fit_feature_scaler: empty fit set"));
    }
    let mut m = Matrix::zeros(fit_on.len(), FEATURE_COUNT);
    for (r, f) in fit_on.iter().enumerate() {
        m.row_mut(r).copy_from_slice(f.values());
    }
    fit_minmax(&[&m])
}

/// Applies a fitted feature scaler to one vector.
pub fn scale_features(scaler: &ScalerParams, f: &FeatureVector) -> Result<FeatureVector> {
    let mut m = Matrix::zeros(1, FEATURE_COUNT);
    m.row_mut(0).copy_from_slice(f.values());
    let scaled = apply_minmax(scaler, &m)?;
    FeatureVector::new(scaled.row(0).to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_rel_err, numeric_gradient};
    use crate::rng::{standard_normal, stream_rng, Rng64};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn small_shape() -> AeShape {
        AeShape {
            input: 6,
            hidden: [4, 2, 4],
        }
    }

    fn random_batch(rng: &mut Rng64, n: usize, dim: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..dim).map(|_| standard_normal(rng) * 0.5).collect())
            .collect()
    }

    fn feature_from_slope(slope: f64, noise: f64, rng: &mut Rng64) -> FeatureVector {
        let mut m = Matrix::zeros(60, crate::preprocess::CHANNELS);
        for r in 0..60 {
            for c in 0..crate::preprocess::CHANNELS {
                m.set(
                    r,
                    c,
                    slope * r as f64 / 60.0 + noise * standard_normal(rng),
                );
            }
        }
        crate::features::extract_features(&m).unwrap()
    }

    #[test]
    fn ae_zero_epochs_leaves_parameters() {
        let mut rng = stream_rng(1, 0);
        let data = random_batch(&mut rng, 5, 6);
        let mut rng_train = stream_rng(2, 0);
        let (ae, history) =
            train_autoencoder(&data, &small_shape(), 0, 0.001, &mut rng_train).unwrap();
        let mut rng_check = stream_rng(2, 0);
        let fresh = AutoencoderParams::init(&small_shape(), &mut rng_check);
        assert_eq!(ae, fresh);
        assert!(history.is_empty());
    }

    #[test]
    fn ae_gradient_matches_numeric() {
        let mut rng = stream_rng(3, 0);
        let data = random_batch(&mut rng, 4, 6);
        let ae = AutoencoderParams::init(&small_shape(), &mut rng);
        let (_, grads) = ae_loss_and_grad(&ae, &data).unwrap();
        let numeric = numeric_gradient(
            |pv| {
                let model = ae.unflatten_like(pv)?;
                Ok(ae_loss_and_grad(&model, &data)?.0)
            },
            &ae.flatten(),
            1e-5,
        )
        .unwrap();
        let err = max_rel_err(grads.values(), numeric.values());
        assert!(err <= 1e-4, "autoencoder gradient mismatch: {err}");
    }

    #[test]
    fn ae_loss_decreases_across_seeds() {
        for seed in [11, 22, 33] {
            let mut rng = stream_rng(seed, 0);
            let data = random_batch(&mut rng, 12, 6);
            let (_, history) =
                train_autoencoder(&data, &small_shape(), 60, 0.01, &mut rng).unwrap();
            assert!(
                history.last().unwrap() < history.first().unwrap(),
                "loss did not decrease for seed {seed}: {:?} -> {:?}",
                history.first(),
                history.last()
            );
        }
    }

    #[test]
    fn transfer_copies_hidden_layers_verbatim() {
        let mut rng = stream_rng(5, 0);
        let ae = AutoencoderParams::init(&AeShape::default(), &mut rng);
        let clf = transfer_weights(&ae, Activation::Tanh, &mut rng);
        for (a, b) in clf.hidden.iter().zip(&ae.layers) {
            assert_eq!(a, b);
        }
        assert_eq!(clf.output.w.rows(), 2);
        assert_eq!(clf.output.w.cols(), 100);
        assert_eq!(clf.output.b.len(), 2);

        // different rng: identical hidden stack, different output layer
        let mut rng_a = stream_rng(6, 0);
        let mut rng_b = stream_rng(7, 0);
        let ca = transfer_weights(&ae, Activation::Tanh, &mut rng_a);
        let cb = transfer_weights(&ae, Activation::Tanh, &mut rng_b);
        assert_eq!(ca.hidden, cb.hidden);
        assert_ne!(ca.output, cb.output);
    }

    #[test]
    fn transfer_reconstructs_encoder_activations_bitwise() {
        let mut rng = stream_rng(8, 0);
        let ae = AutoencoderParams::init(&AeShape::default(), &mut rng);
        let clf = transfer_weights(&ae, Activation::Tanh, &mut rng);
        let x: Vec<f64> = (0..FEATURE_COUNT).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let code = ae.encode(&x).unwrap();
        let fwd = classifier_forward(&clf, &x).unwrap();
        assert_eq!(code, fwd.acts[1]);
    }

    #[test]
    fn classifier_forward_shapes_for_all_activations() {
        let mut rng = stream_rng(9, 0);
        let ae = AutoencoderParams::init(&AeShape::default(), &mut rng);
        let x: Vec<f64> = (0..FEATURE_COUNT).map(|i| (i as f64).sin() * 0.3).collect();
        for act in [Activation::Tanh, Activation::Maxout, Activation::Rectifier] {
            let clf = transfer_weights(&ae, act, &mut rng);
            let probs = class_probabilities(&clf, &x).unwrap();
            assert_eq!(probs.len(), 2);
            assert!(close(probs[0] + probs[1], 1.0, 1e-12));
            if act == Activation::Maxout {
                let fwd = classifier_forward(&clf, &x).unwrap();
                assert_eq!(
                    fwd.acts.iter().map(Vec::len).collect::<Vec<_>>(),
                    vec![50, 25, 50]
                );
            }
        }
    }

    #[test]
    fn zero_weight_classifier_predicts_half() {
        let hidden = vec![
            DenseLayer {
                w: Matrix::zeros(4, FEATURE_COUNT),
                b: vec![0.0; 4],
            },
            DenseLayer {
                w: Matrix::zeros(4, 4),
                b: vec![0.0; 4],
            },
            DenseLayer {
                w: Matrix::zeros(4, 4),
                b: vec![0.0; 4],
            },
        ];
        let clf = ClassifierParams {
            hidden,
            output: DenseLayer {
                w: Matrix::zeros(2, 4),
                b: vec![0.0; 2],
            },
            activation: Activation::Tanh,
        };
        let f = FeatureVector::new(vec![0.25; FEATURE_COUNT]).unwrap();
        assert_eq!(predict(&clf, &f).unwrap(), 0.5);
        let again = predict(&clf, &f).unwrap();
        assert_eq!(again, 0.5);
    }

    #[test]
    fn classifier_gradient_matches_numeric_for_all_activations() {
        let shape = AeShape {
            input: 6,
            hidden: [8, 4, 8],
        };
        let mut rng = stream_rng(10, 0);
        let ae = AutoencoderParams::init(&shape, &mut rng);
        let xs = random_batch(&mut rng, 6, 6);
        let ys: Vec<DrivingClass> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    DrivingClass::Normal
                } else {
                    DrivingClass::Aggressive
                }
            })
            .collect();
        for act in [Activation::Tanh, Activation::Maxout, Activation::Rectifier] {
            let clf = transfer_weights(&ae, act, &mut rng);
            let (_, grads) = classifier_loss_and_grad(&clf, &xs, &ys).unwrap();
            let numeric = numeric_gradient(
                |pv| {
                    let model = clf.unflatten_like(pv)?;
                    Ok(classifier_loss_and_grad(&model, &xs, &ys)?.0)
                },
                &clf.flatten(),
                1e-5,
            )
            .unwrap();
            let err = max_rel_err(grads.values(), numeric.values());
            assert!(err <= 1e-4, "classifier gradient mismatch for {act:?}: {err}");
        }
    }

    #[test]
    fn classifier_zero_epochs_and_single_class_error() {
        let mut rng = stream_rng(12, 0);
        let ae = AutoencoderParams::init(&AeShape::default(), &mut rng);
        let clf = transfer_weights(&ae, Activation::Tanh, &mut rng);
        let f = FeatureVector::new(vec![0.5; FEATURE_COUNT]).unwrap();
        let train = vec![
            (f.clone(), DrivingClass::Normal),
            (f.clone(), DrivingClass::Aggressive),
        ];
        let same = train_classifier(&clf, &train, 0, 0.01).unwrap();
        assert_eq!(same, clf);
        let single = vec![(f, DrivingClass::Normal)];
        assert!(train_classifier(&clf, &single, 10, 0.01).is_err());
    }

    #[test]
    fn separable_toy_set_reaches_perfect_training_auroc() {
        let mut rng = stream_rng(13, 0);
        let shape = AeShape::default();
        let mut train: Vec<(FeatureVector, DrivingClass)> = Vec::new();
        for i in 0..20 {
            let class = if i % 2 == 0 {
                DrivingClass::Normal
            } else {
                DrivingClass::Aggressive
            };
            let slope = match class {
                DrivingClass::Normal => 0.5,
                DrivingClass::Aggressive => 2.0,
            };
            train.push((feature_from_slope(slope, 0.02, &mut rng), class));
        }
        let fit_feats: Vec<FeatureVector> = train.iter().map(|(f, _)| f.clone()).collect();
        let scaler = fit_feature_scaler(&fit_feats).unwrap();
        let scaled: Vec<(FeatureVector, DrivingClass)> = train
            .iter()
            .map(|(f, y)| (scale_features(&scaler, f).unwrap(), *y))
            .collect();
        let data: Vec<Vec<f64>> = scaled.iter().map(|(f, _)| f.values().to_vec()).collect();
        let (ae, _) = train_autoencoder(&data, &shape, 30, 0.01, &mut rng).unwrap();
        let clf0 = transfer_weights(&ae, Activation::Tanh, &mut rng);
        let trained = train_classifier(&clf0, &scaled, 500, 0.01).unwrap();
        let scores: Vec<f64> = scaled
            .iter()
            .map(|(f, _)| predict(&trained, f).unwrap())
            .collect();
        let labels: Vec<bool> = scaled
            .iter()
            .map(|(_, y)| *y == DrivingClass::Aggressive)
            .collect();
        let score = auroc(&scores, &labels).unwrap();
        assert!(close(score, 1.0, 1e-9), "training AUROC {score}");
    }

    #[test]
    fn grid_search_table_and_determinism() {
        let mut rng = stream_rng(14, 0);
        let shape = AeShape::default();
        let mut items: Vec<(FeatureVector, DrivingClass)> = Vec::new();
        for i in 0..12 {
            let class = if i % 2 == 0 {
                DrivingClass::Normal
            } else {
                DrivingClass::Aggressive
            };
            let slope = match class {
                DrivingClass::Normal => 0.5,
                DrivingClass::Aggressive => 1.5,
            };
            items.push((feature_from_slope(slope, 0.05, &mut rng), class));
        }
        let data: Vec<Vec<f64>> = items.iter().map(|(f, _)| f.values().to_vec()).collect();
        let (ae, _) = train_autoencoder(&data, &shape, 10, 0.01, &mut rng).unwrap();
        let grid = GridSpec {
            learning_rates: vec![0.01, 0.1],
            epochs: vec![5, 10],
            activations: vec![Activation::Tanh, Activation::Rectifier],
        };
        let (train, val) = items.split_at(6);
        let a = grid_search(&ae, train, val, &grid, 99).unwrap();
        assert_eq!(a.table.len(), 8);
        let max = a
            .table
            .iter()
            .map(|e| e.val_auroc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_config, a.table.iter().find(|e| e.val_auroc == max).unwrap().config);
        let b = grid_search(&ae, train, val, &grid, 99).unwrap();
        assert_eq!(a.best_config, b.best_config);
        assert_eq!(a.table, b.table);
        assert_eq!(a.best, b.best);
    }

    #[test]
    fn default_grid_is_twenty_seven() {
        assert_eq!(GridSpec::default().len(), 27);
    }

    #[test]
    fn auroc_fixed_cases() {
        // perfectly separated
        let s = [0.1, 0.2, 0.8, 0.9];
        let l = [false, false, true, true];
        assert_eq!(auroc(&s, &l).unwrap(), 1.0);
        // all equal scores: every pair ties
        assert_eq!(auroc(&[0.5; 4], &l).unwrap(), 0.5);
        // 3 wins out of 4 pairs
        let s = [0.1, 0.4, 0.35, 0.8];
        let l = [false, false, true, true];
        assert_eq!(auroc(&s, &l).unwrap(), 0.75);
        // single-class rejection
        assert!(auroc(&s, &[true; 4]).is_err());
    }

    #[test]
    fn auroc_matches_pairwise_oracle() {
        let mut rng = stream_rng(15, 0);
        for case in 0..1000 {
            let n = 2 + (case % 19);
            let mut scores: Vec<f64> = Vec::with_capacity(n);
            let mut labels: Vec<bool> = Vec::with_capacity(n);
            for i in 0..n {
                // coarse grid of score values forces plenty of ties
                let s = ((standard_normal(&mut rng) * 2.0) as i64) as f64 / 4.0;
                scores.push(s);
                labels.push(if i < 2 { i == 0 } else { standard_normal(&mut rng) > 0.0 });
            }
            let fast = auroc(&scores, &labels).unwrap();
            // brute force over all (positive, negative) pairs
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for (i, &li) in labels.iter().enumerate() {
                if !li {
                    continue;
                }
                for (j, &lj) in labels.iter().enumerate() {
                    if lj {
                        continue;
                    }
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
            let brute = wins / pairs;
            assert!(
                close(fast, brute, 1e-12),
                "case {case}: {fast} vs {brute}"
            );
        }
    }

    #[test]
    fn auroc_monotone_invariance_and_complement() {
        let mut rng = stream_rng(16, 0);
        let scores: Vec<f64> = (0..15).map(|_| standard_normal(&mut rng)).collect();
        let labels: Vec<bool> = (0..15).map(|i| i % 3 == 0).collect();
        let base = auroc(&scores, &labels).unwrap();
        let exp: Vec<f64> = scores.iter().map(|s| fmath::exp(*s)).collect();
        assert_eq!(base, auroc(&exp, &labels).unwrap());
        let affine: Vec<f64> = scores.iter().map(|s| 3.0 * s + 11.0).collect();
        assert_eq!(base, auroc(&affine, &labels).unwrap());
        // tie-free scores: auroc(-s) complements auroc(s) up to division rounding
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        assert!(close(auroc(&neg, &labels).unwrap(), 1.0 - base, 1e-12));
    }

    #[test]
    fn roc_curve_shape() {
        let s = [0.9, 0.4, 0.4, 0.2];
        let l = [true, true, false, false];
        let roc = roc_curve(&s, &l).unwrap();
        assert_eq!(roc.points.first().unwrap().fpr, 0.0);
        assert_eq!(roc.points.first().unwrap().tpr, 0.0);
        assert_eq!(roc.points.last().unwrap().fpr, 1.0);
        assert_eq!(roc.points.last().unwrap().tpr, 1.0);
        for w in roc.points.windows(2) {
            assert!(w[1].fpr >= w[0].fpr);
            assert!(w[1].tpr >= w[0].tpr);
            assert!(w[1].threshold <= w[0].threshold);
        }
        assert!((0.0..=1.0).contains(&roc.auroc));
        assert!(close(roc.auroc, 0.875, 1e-12));
    }

    #[test]
    fn feature_scaler_round_trip() {
        let mut rng = stream_rng(18, 0);
        let feats: Vec<FeatureVector> = (0..8)
            .map(|_| feature_from_slope(1.0, 0.3, &mut rng))
            .collect();
        let scaler = fit_feature_scaler(&feats).unwrap();
        for f in &feats {
            let scaled = scale_features(&scaler, f).unwrap();
            for v in scaled.values() {
                assert!((-1e-12..=1.0 + 1e-12).contains(v));
            }
        }
    }
}
