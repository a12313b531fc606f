//! Recurrent conditional GAN: an LSTM generator and an LSTM discriminator,
//! both fed the driving-style condition at every time step.
//!
//! The generator maps a noise sequence plus the one-hot condition to a trip
//! in `(0,1)^{60x5}` through a per-step sigmoid head. The discriminator
//! scores each step of a (trip, condition) pair with its own sigmoid head;
//! losses are binary cross-entropies averaged over the 60 steps, with
//! one-sided label smoothing on the real target. The discriminator trains by
//! plain gradient descent and the generator by ADAM, batch size 1, matching
//! the reference configuration in [`RcganConfig::default`].

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{contract_err, nonfinite_err, shape_err, Result};
use crate::fmath;
use crate::label::DrivingClass;
use crate::numerics::{
    adam_update, dot, sgd_update, AdamState, Matrix, ParamPacker, ParamUnpacker, ParamVector,
};
use crate::preprocess::Trip;
use crate::rng::standard_normal;
use crate::rnn::{lstm_backward, lstm_forward_trace, LstmGrads, LstmParams, LstmTrace};

/// The class label used as conditional input.
pub type Condition = DrivingClass;

/// Width of the one-hot condition encoding.
pub const CONDITION_DIM: usize = 2;
/// Synthetic trips get ids from this base so they can never collide with
/// real trip ids.
pub const FAKE_ID_BASE: u32 = 1_000_000;

/// Scores are clamped to `[1e-12, 1 - 1e-12]` before logs so losses stay
/// finite even for a saturated discriminator.
pub const SCORE_CLAMP: f64 = 1e-12;

/// Training hyperparameters; defaults are the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RcganConfig {
    pub g_learning_rate: f64,
    pub d_learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub g_rounds: usize,
    pub d_rounds: usize,
    pub hidden: usize,
    pub latent: usize,
    pub smooth: f64,
    pub seq_len: usize,
    pub data_dim: usize,
    /// Use the literal minimax generator loss `mean log(1 - D)` instead of
    /// the default non-saturating `-mean log D`.
    pub saturating_generator_loss: bool,
    pub seed: u64,
}

impl Default for RcganConfig {
    fn default() -> RcganConfig {
        RcganConfig {
            g_learning_rate: 0.001,
            d_learning_rate: 0.001,
            batch_size: 1,
            epochs: 5000,
            g_rounds: 1,
            d_rounds: 1,
            hidden: 100,
            latent: 25,
            smooth: 0.1,
            seq_len: 60,
            data_dim: 5,
            saturating_generator_loss: false,
            seed: 0,
        }
    }
}

impl RcganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size != 1 {
            return Err(contract_err!("only batch size 1 is supported"));
        }
        if self.hidden == 0
            || self.latent == 0
            || self.seq_len == 0
            || self.data_dim == 0
            || self.g_rounds == 0
            || self.d_rounds == 0
        {
            return Err(contract_err!("network dimensions and rounds must be positive"));
        }
        if self.g_learning_rate <= 0.0 || self.d_learning_rate <= 0.0 {
            return Err(contract_err!("learning rates must be positive"));
        }
        if !(0.0..0.5).contains(&self.smooth) {
            return Err(contract_err!("smooth rate {} outside [0, 0.5)", self.smooth));
        }
        Ok(())
    }
}

/// An `L x m` matrix of i.i.d. standard-normal noise driving the generator.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSequence {
    pub values: Matrix,
}

/// Draws a fresh noise sequence from the seeded generator.
pub fn sample_noise<R: RngCore>(rng: &mut R, len: usize, dim: usize) -> NoiseSequence {
    let mut values = Matrix::zeros(len, dim);
    for v in values.data_mut() {
        *v = standard_normal(rng);
    }
    NoiseSequence { values }
}

/// LSTM generator with a sigmoid output head of width `data_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorNet {
    pub lstm: LstmParams,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl GeneratorNet {
    pub fn init<R: RngCore>(cfg: &RcganConfig, rng: &mut R) -> GeneratorNet {
        let d_in = cfg.latent + CONDITION_DIM;
        GeneratorNet {
            lstm: LstmParams::init_uniform(cfg.hidden, d_in, rng),
            head_w: init_matrix(cfg.data_dim, cfg.hidden, rng),
            head_b: init_vec(cfg.data_dim, rng),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.lstm.input_size() - CONDITION_DIM
    }

    pub fn data_dim(&self) -> usize {
        self.head_w.rows()
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        self.lstm.pack_into(&mut p);
        p.push_matrix("head_w", &self.head_w);
        p.push_vector("head_b", &self.head_b);
        p.finish()
    }

    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<GeneratorNet> {
        let mut u = ParamUnpacker::new(pv);
        let lstm = self.lstm.unpack_from(&mut u)?;
        let head_w = u.take_matrix(self.head_w.rows(), self.head_w.cols())?;
        let head_b = u.take_vector(self.head_b.len())?;
        u.finish()?;
        Ok(GeneratorNet {
            lstm,
            head_w,
            head_b,
        })
    }
}

/// LSTM discriminator with a scalar sigmoid head per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscriminatorNet {
    pub lstm: LstmParams,
    pub head_w: Matrix,
    pub head_b: Vec<f64>,
}

impl DiscriminatorNet {
    pub fn init<R: RngCore>(cfg: &RcganConfig, rng: &mut R) -> DiscriminatorNet {
        let d_in = cfg.data_dim + CONDITION_DIM;
        DiscriminatorNet {
            lstm: LstmParams::init_uniform(cfg.hidden, d_in, rng),
            head_w: init_matrix(1, cfg.hidden, rng),
            head_b: init_vec(1, rng),
        }
    }

    pub fn data_dim(&self) -> usize {
        self.lstm.input_size() - CONDITION_DIM
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        self.lstm.pack_into(&mut p);
        p.push_matrix("head_w", &self.head_w);
        p.push_vector("head_b", &self.head_b);
        p.finish()
    }

    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<DiscriminatorNet> {
        let mut u = ParamUnpacker::new(pv);
        let lstm = self.lstm.unpack_from(&mut u)?;
        let head_w = u.take_matrix(self.head_w.rows(), self.head_w.cols())?;
        let head_b = u.take_vector(self.head_b.len())?;
        u.finish()?;
        Ok(DiscriminatorNet {
            lstm,
            head_w,
            head_b,
        })
    }
}

fn init_matrix<R: RngCore>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = crate::rng::uniform_sym(rng, crate::rnn::INIT_SCALE);
    }
    m
}

fn init_vec<R: RngCore>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len)
        .map(|_| crate::rng::uniform_sym(rng, crate::rnn::INIT_SCALE))
        .collect()
}

fn concat_condition(row: &[f64], y: Condition) -> Vec<f64> {
    let mut x = Vec::with_capacity(row.len() + CONDITION_DIM);
    x.extend_from_slice(row);
    x.extend_from_slice(&y.one_hot());
    x
}

fn matrix_rows_with_condition(values: &Matrix, y: Condition) -> Vec<Vec<f64>> {
    (0..values.rows())
        .map(|t| concat_condition(values.row(t), y))
        .collect()
}

/// Runs the generator on a noise sequence under a condition; the returned
/// trip carries the condition as both visible label and ground truth, and
/// every value lies in `(0, 1)`.
pub fn generate(gen: &GeneratorNet, z: &NoiseSequence, y: Condition) -> Result<Trip> {
    let (values, _) = generate_with_trace(gen, z, y)?;
    Ok(Trip {
        id: FAKE_ID_BASE,
        values,
        label: Some(y),
        truth: Some(y),
    })
}

fn generate_with_trace(
    gen: &GeneratorNet,
    z: &NoiseSequence,
    y: Condition,
) -> Result<(Matrix, (Vec<Vec<f64>>, LstmTrace))> {
    if z.values.cols() != gen.latent_dim() {
        return Err(shape_err!(
            "generate: noise has {} dims, generator takes {}",
            z.values.cols(),
            gen.latent_dim()
        ));
    }
    let inputs = matrix_rows_with_condition(&z.values, y);
    let trace = lstm_forward_trace(&gen.lstm, &inputs)?;
    let k = gen.data_dim();
    let mut values = Matrix::zeros(inputs.len(), k);
    for t in 0..inputs.len() {
        let h = trace.hidden(t);
        for j in 0..k {
            let zj = dot(gen.head_w.row(j), h) + gen.head_b[j];
            values.set(t, j, fmath::sigmoid(zj));
        }
    }
    Ok((values, (inputs, trace)))
}

/// Per-step scores of a (trip, condition) pair plus their mean.
pub fn discriminate(
    disc: &DiscriminatorNet,
    values: &Matrix,
    y: Condition,
) -> Result<(Vec<f64>, f64)> {
    let (_, _, scores) = disc_forward(disc, values, y)?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((scores, mean))
}

fn disc_forward(
    disc: &DiscriminatorNet,
    values: &Matrix,
    y: Condition,
) -> Result<(Vec<Vec<f64>>, LstmTrace, Vec<f64>)> {
    if values.cols() != disc.data_dim() {
        return Err(shape_err!(
            "discriminate: trip has {} channels, discriminator takes {}",
            values.cols(),
            disc.data_dim()
        ));
    }
    if !values.is_finite() {
        return Err(nonfinite_err!("discriminator input"));
    }
    let inputs = matrix_rows_with_condition(values, y);
    let trace = lstm_forward_trace(&disc.lstm, &inputs)?;
    let scores: Vec<f64> = (0..inputs.len())
        .map(|t| fmath::sigmoid(dot(disc.head_w.row(0), trace.hidden(t)) + disc.head_b[0]))
        .collect();
    Ok((inputs, trace, scores))
}

fn clamp_score(s: f64) -> f64 {
    s.max(SCORE_CLAMP).min(1.0 - SCORE_CLAMP)
}

/// Mean binary cross-entropy of `scores` against a constant target.
pub fn bce(scores: &[f64], target: f64) -> f64 {
    let n = scores.len() as f64;
    scores
        .iter()
        .map(|&s| {
            let s = clamp_score(s);
            -(target * fmath::ln(s) + (1.0 - target) * fmath::ln(1.0 - s))
        })
        .sum::<f64>()
        / n
}

fn bce_grad(scores: &[f64], target: f64) -> Vec<f64> {
    let n = scores.len() as f64;
    scores
        .iter()
        .map(|&s| {
            let s = clamp_score(s);
            (-target / s + (1.0 - target) / (1.0 - s)) / n
        })
        .collect()
}

/// Discriminator and generator objective values from per-step scores:
/// `d_loss = BCE(real, 1 - smooth) + BCE(fake, 0)` and the non-saturating
/// `g_loss = BCE(fake, 1)`, both averaged over time steps.
pub fn gan_losses(d_real_scores: &[f64], d_fake_scores: &[f64], smooth: f64) -> (f64, f64) {
    let d_loss = bce(d_real_scores, 1.0 - smooth) + bce(d_fake_scores, 0.0);
    let g_loss = bce(d_fake_scores, 1.0);
    (d_loss, g_loss)
}

/// BCE of the discriminator's scores on one (trip, condition) pair against a
/// constant target, with the full parameter gradient and the gradient with
/// respect to the trip values.
pub fn disc_loss_and_grad(
    disc: &DiscriminatorNet,
    values: &Matrix,
    y: Condition,
    target: f64,
) -> Result<(f64, ParamVector, Matrix)> {
    let (inputs, trace, scores) = disc_forward(disc, values, y)?;
    let loss = bce(&scores, target);
    let dscores = bce_grad(&scores, target);
    let hidden = disc.lstm.hidden_size();
    let mut head_w_grad = Matrix::zeros(1, hidden);
    let mut head_b_grad = alloc::vec![0.0; 1];
    let mut dh_inject = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let s = scores[t];
        let dz = dscores[t] * s * (1.0 - s);
        let h = trace.hidden(t);
        crate::numerics::axpy(dz, h, head_w_grad.row_mut(0));
        head_b_grad[0] += dz;
        let mut dh = alloc::vec![0.0; hidden];
        crate::numerics::axpy(dz, disc.head_w.row(0), &mut dh);
        dh_inject.push(dh);
    }
    let (lstm_grads, dxs) = lstm_backward(&disc.lstm, &inputs, &trace, &dh_inject)?;
    let grads = pack_net_grads(&lstm_grads, &head_w_grad, &head_b_grad);
    // input gradient, condition columns dropped
    let k = disc.data_dim();
    let mut dvalues = Matrix::zeros(values.rows(), k);
    for (t, dx) in dxs.iter().enumerate() {
        dvalues.row_mut(t).copy_from_slice(&dx[..k]);
    }
    Ok((loss, grads, dvalues))
}

fn pack_net_grads(lstm: &LstmGrads, head_w: &Matrix, head_b: &[f64]) -> ParamVector {
    let mut p = ParamPacker::new();
    lstm.pack_into(&mut p);
    p.push_matrix("head_w", head_w);
    p.push_vector("head_b", head_b);
    p.finish()
}

/// Generator objective on one noise draw, with gradients for every generator
/// parameter obtained by passing discriminator input-gradients through the
/// sigmoid head and the generator's own BPTT. The discriminator is frozen.
pub fn gen_loss_and_grad(
    gen: &GeneratorNet,
    disc: &DiscriminatorNet,
    z: &NoiseSequence,
    y: Condition,
    saturating: bool,
) -> Result<(f64, ParamVector)> {
    let (fake, (gen_inputs, gen_trace)) = generate_with_trace(gen, z, y)?;
    // non-saturating: minimize BCE(D(fake), 1); saturating: minimize
    // mean log(1 - D(fake)) = -BCE(D(fake), 0)
    let (loss, dvalues) = if saturating {
        let (loss0, _, dv0) = disc_loss_and_grad(disc, &fake, y, 0.0)?;
        let mut dv = dv0;
        for v in dv.data_mut() {
            *v = -*v;
        }
        (-loss0, dv)
    } else {
        let (loss1, _, dv1) = disc_loss_and_grad(disc, &fake, y, 1.0)?;
        (loss1, dv1)
    };
    let hidden = gen.lstm.hidden_size();
    let k = gen.data_dim();
    let mut head_w_grad = Matrix::zeros(k, hidden);
    let mut head_b_grad = alloc::vec![0.0; k];
    let mut dh_inject = Vec::with_capacity(gen_inputs.len());
    for t in 0..gen_inputs.len() {
        let h = gen_trace.hidden(t);
        let mut dh = alloc::vec![0.0; hidden];
        for j in 0..k {
            let s = fake.get(t, j);
            let dz = dvalues.get(t, j) * s * (1.0 - s);
            crate::numerics::axpy(dz, h, head_w_grad.row_mut(j));
            head_b_grad[j] += dz;
            crate::numerics::axpy(dz, gen.head_w.row(j), &mut dh);
        }
        dh_inject.push(dh);
    }
    let (lstm_grads, _) = lstm_backward(&gen.lstm, &gen_inputs, &gen_trace, &dh_inject)?;
    Ok((loss, pack_net_grads(&lstm_grads, &head_w_grad, &head_b_grad)))
}

/// Losses averaged over one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
}

/// A trained generator/discriminator pair with the full loss curves.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedRcgan {
    pub generator: GeneratorNet,
    pub discriminator: DiscriminatorNet,
    pub history: Vec<EpochLoss>,
}

/// Trains the GAN on preprocessed, class-balanced trips.
///
/// Per epoch the trips are visited in a freshly shuffled order; each item
/// gets `d_rounds` discriminator SGD steps followed by `g_rounds` generator
/// ADAM steps, every round drawing fresh noise under the item's label.
pub fn train_rcgan<R: RngCore>(
    trips: &[Trip],
    cfg: &RcganConfig,
    rng: &mut R,
) -> Result<TrainedRcgan> {
    cfg.validate()?;
    if trips.is_empty() {
        return Err(contract_err!("train_rcgan: empty training set"));
    }
    let mut per_class = [0usize; 2];
    for trip in trips {
        let label = trip
            .label
            .ok_or_else(|| contract_err!("train_rcgan: trip {} has no label", trip.id))?;
        per_class[label.index()] += 1;
        if trip.values.rows() != cfg.seq_len || trip.values.cols() != cfg.data_dim {
            return Err(shape_err!(
                "train_rcgan: trip {} is {}x{}, expected {}x{}",
                trip.id,
                trip.values.rows(),
                trip.values.cols(),
                cfg.seq_len,
                cfg.data_dim
            ));
        }
        if !trip.values.data().iter().all(|v| (0.0..=1.0).contains(v)) {
            return Err(contract_err!(
                "train_rcgan: trip {} has values outside [0, 1]; run the scaler first",
                trip.id
            ));
        }
    }
    if per_class[0] != per_class[1] {
        return Err(contract_err!(
            "train_rcgan: classes unbalanced ({} normal vs {} aggressive)",
            per_class[0],
            per_class[1]
        ));
    }

    let mut gen = GeneratorNet::init(cfg, rng);
    let mut disc = DiscriminatorNet::init(cfg, rng);
    let mut adam = AdamState::new(gen.flatten().len());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..trips.len()).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut d_sum = 0.0;
        let mut g_sum = 0.0;
        for &idx in &order {
            let trip = &trips[idx];
            let y = trip.label.expect("validated above");
            let mut d_last = 0.0;
            for _ in 0..cfg.d_rounds {
                let z = sample_noise(rng, cfg.seq_len, cfg.latent);
                let fake = generate(&gen, &z, y)?;
                let (loss_real, grads_real, _) =
                    disc_loss_and_grad(&disc, &trip.values, y, 1.0 - cfg.smooth)?;
                let (loss_fake, grads_fake, _) =
                    disc_loss_and_grad(&disc, &fake.values, y, 0.0)?;
                d_last = loss_real + loss_fake;
                if !d_last.is_finite() {
                    return Err(nonfinite_err!(
                        "discriminator loss at epoch {epoch}, trip {}",
                        trip.id
                    ));
                }
                let mut grads = grads_real;
                for (g, f) in grads.values_mut().iter_mut().zip(grads_fake.values()) {
                    *g += f;
                }
                let theta = sgd_update(&disc.flatten(), &grads, cfg.d_learning_rate)?;
                disc = disc.unflatten_like(&theta)?;
            }
            let mut g_last = 0.0;
            for _ in 0..cfg.g_rounds {
                let z = sample_noise(rng, cfg.seq_len, cfg.latent);
                let (g_loss, g_grads) =
                    gen_loss_and_grad(&gen, &disc, &z, y, cfg.saturating_generator_loss)?;
                g_last = g_loss;
                if !g_last.is_finite() {
                    return Err(nonfinite_err!(
                        "generator loss at epoch {epoch}, trip {}",
                        trip.id
                    ));
                }
                let (theta, next_state) =
                    adam_update(&gen.flatten(), &g_grads, &adam, cfg.g_learning_rate)?;
                adam = next_state;
                gen = gen.unflatten_like(&theta)?;
            }
            d_sum += d_last;
            g_sum += g_last;
        }
        history.push(EpochLoss {
            epoch,
            d_loss: d_sum / trips.len() as f64,
            g_loss: g_sum / trips.len() as f64,
        });
    }
    Ok(TrainedRcgan {
        generator: gen,
        discriminator: disc,
        history,
    })
}

/// Synthesizes `ratio * base_count` labeled trips, balanced across the two
/// classes: all normal trips first, then all aggressive ones, ids starting
/// at [`FAKE_ID_BASE`].
pub fn synthesize<R: RngCore>(
    gen: &GeneratorNet,
    ratio: f64,
    base_count: usize,
    rng: &mut R,
) -> Result<Vec<Trip>> {
    let exact = ratio * base_count as f64;
    let count = fmath::round(exact);
    if (exact - count).abs() > 1e-9 || count < 0.0 {
        return Err(contract_err!(
            "synthesize: ratio {ratio} of {base_count} trips is not a whole number"
        ));
    }
    let count = count as usize;
    if count % 2 != 0 {
        return Err(contract_err!(
            "synthesize: {count} trips cannot be balanced across two classes"
        ));
    }
    let half = count / 2;
    let mut out = Vec::with_capacity(count);
    for (block, class) in DrivingClass::ALL.iter().enumerate() {
        for i in 0..half {
            let z = sample_noise(rng, 60, gen.latent_dim());
            let mut trip = generate(gen, &z, *class)?;
            trip.id = FAKE_ID_BASE + (block * half + i) as u32;
            out.push(trip);
        }
    }
    Ok(out)
}

/// Renders the loss history as `epoch,d_loss,g_loss` CSV text.
pub fn render_loss_history(history: &[EpochLoss], provenance: &str) -> alloc::string::String {
    let mut out = alloc::string::String::new();
    if !provenance.is_empty() {
        out.push_str("# ");
        out.push_str(provenance);
        out.push('\n');
    }
    out.push_str("epoch,d_loss,g_loss\n");
    for e in history {
        out.push_str(&alloc::format!("{},{},{}\n", e.epoch, e.d_loss, e.g_loss));
    }
    out
}

/// Parses the output of [`render_loss_history`]; comment lines are skipped.
pub fn parse_loss_history(text: &str) -> Result<Vec<EpochLoss>> {
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("epoch,") {
            continue;
        }
        let mut parts = line.split(',');
        let (epoch, d_loss, g_loss) = (|| {
            let epoch = parts.next()?.parse().ok()?;
            let d_loss = parts.next()?.parse().ok()?;
            let g_loss = parts.next()?.parse().ok()?;
            Some((epoch, d_loss, g_loss))
        })()
        .ok_or_else(|| crate::error::Error::Parse(alloc::format!("bad loss row: {line}")))?;
        out.push(EpochLoss {
            epoch,
            d_loss,
            g_loss,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_rel_err, numeric_gradient};
    use crate::rng::stream_rng;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn small_config() -> RcganConfig {
        RcganConfig {
            hidden: 6,
            latent: 3,
            seq_len: 8,
            data_dim: 2,
            ..RcganConfig::default()
        }
    }

    fn toy_trips(cfg: &RcganConfig, count: usize, seed: u64) -> Vec<Trip> {
        // class-dependent level plus noise, clipped into [0, 1]
        let mut rng = stream_rng(seed, 100);
        let mut out = Vec::new();
        for i in 0..count {
            let class = if i % 2 == 0 {
                DrivingClass::Normal
            } else {
                DrivingClass::Aggressive
            };
            let level = match class {
                DrivingClass::Normal => 0.3,
                DrivingClass::Aggressive => 0.7,
            };
            let mut values = Matrix::zeros(cfg.seq_len, cfg.data_dim);
            for v in values.data_mut() {
                *v = (level + 0.2 * crate::rng::standard_normal(&mut rng)).clamp(0.0, 1.0);
            }
            out.push(Trip {
                id: i as u32,
                values,
                label: Some(class),
                truth: Some(class),
            });
        }
        out
    }

    #[test]
    fn default_config_matches_reference_values() {
        let cfg = RcganConfig::default();
        assert_eq!(cfg.g_learning_rate, 0.001);
        assert_eq!(cfg.d_learning_rate, 0.001);
        assert_eq!(cfg.batch_size, 1);
        assert_eq!(cfg.epochs, 5000);
        assert_eq!(cfg.g_rounds, 1);
        assert_eq!(cfg.d_rounds, 1);
        assert_eq!(cfg.hidden, 100);
        assert_eq!(cfg.latent, 25);
        assert_eq!(cfg.smooth, 0.1);
        assert_eq!(cfg.seq_len, 60);
        assert_eq!(cfg.data_dim, 5);
        assert!(!cfg.saturating_generator_loss);
        cfg.validate().unwrap();
    }

    #[test]
    fn sample_noise_shape_determinism_and_moments() {
        let mut rng = stream_rng(7, 0);
        let z = sample_noise(&mut rng, 60, 25);
        assert_eq!(z.values.rows(), 60);
        assert_eq!(z.values.cols(), 25);

        let mut rng_a = stream_rng(7, 0);
        let mut rng_b = stream_rng(7, 0);
        assert_eq!(
            sample_noise(&mut rng_a, 10, 5),
            sample_noise(&mut rng_b, 10, 5)
        );

        let mut rng = stream_rng(3, 0);
        let big = sample_noise(&mut rng, 1000, 100);
        let n = big.values.data().len() as f64;
        let mean = big.values.data().iter().sum::<f64>() / n;
        let var = big
            .values
            .data()
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((0.97..1.03).contains(&var), "var {var}");
    }

    #[test]
    fn zero_weight_generator_outputs_half() {
        let cfg = small_config();
        let gen = GeneratorNet {
            lstm: crate::rnn::LstmParams::zeros(cfg.hidden, cfg.latent + CONDITION_DIM),
            head_w: Matrix::zeros(cfg.data_dim, cfg.hidden),
            head_b: vec![0.0; cfg.data_dim],
        };
        let mut rng = stream_rng(1, 0);
        let z = sample_noise(&mut rng, cfg.seq_len, cfg.latent);
        let trip = generate(&gen, &z, DrivingClass::Normal).unwrap();
        assert!(trip.values.data().iter().all(|v| *v == 0.5));
        assert_eq!(trip.label, Some(DrivingClass::Normal));
    }

    #[test]
    fn generator_is_pure_and_condition_sensitive() {
        let cfg = small_config();
        let mut rng = stream_rng(2, 0);
        let gen = GeneratorNet::init(&cfg, &mut rng);
        let z = sample_noise(&mut rng, cfg.seq_len, cfg.latent);
        let a = generate(&gen, &z, DrivingClass::Aggressive).unwrap();
        let b = generate(&gen, &z, DrivingClass::Aggressive).unwrap();
        assert_eq!(a.values, b.values);
        let c = generate(&gen, &z, DrivingClass::Normal).unwrap();
        let max_diff = a
            .values
            .data()
            .iter()
            .zip(c.values.data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff > 1e-9, "flipping the condition changed nothing");
        // sigmoid head keeps everything in (0, 1)
        assert!(a.values.data().iter().all(|v| *v > 0.0 && *v < 1.0));
    }

    #[test]
    fn zero_weight_discriminator_scores_half() {
        let cfg = small_config();
        let disc = DiscriminatorNet {
            lstm: crate::rnn::LstmParams::zeros(cfg.hidden, cfg.data_dim + CONDITION_DIM),
            head_w: Matrix::zeros(1, cfg.hidden),
            head_b: vec![0.0],
        };
        let trips = toy_trips(&cfg, 2, 5);
        let (scores, mean) = discriminate(&disc, &trips[0].values, DrivingClass::Normal).unwrap();
        assert!(scores.iter().all(|s| *s == 0.5));
        assert_eq!(mean, 0.5);
    }

    #[test]
    fn discriminator_scores_in_range_and_pure() {
        let cfg = small_config();
        let mut rng = stream_rng(4, 0);
        let disc = DiscriminatorNet::init(&cfg, &mut rng);
        let trips = toy_trips(&cfg, 2, 6);
        let (s1, _) = discriminate(&disc, &trips[0].values, DrivingClass::Aggressive).unwrap();
        let (s2, _) = discriminate(&disc, &trips[0].values, DrivingClass::Aggressive).unwrap();
        assert_eq!(s1, s2);
        assert!(s1.iter().all(|s| *s > 0.0 && *s < 1.0));
    }

    #[test]
    fn gan_loss_fixed_points() {
        let half = vec![0.5; 60];
        let (d, g) = gan_losses(&half, &half, 0.0);
        let ln2 = fmath::ln(2.0);
        assert!(close(d, 2.0 * ln2, 1e-12), "{d}");
        assert!(close(g, ln2, 1e-12), "{g}");
        // at score 0.5 the BCE is ln 2 for any smoothing target
        for smooth in [0.0, 0.1, 0.3] {
            let (d_s, _) = gan_losses(&half, &half, smooth);
            assert!(close(d_s, 2.0 * ln2, 1e-12));
        }
        // direct evaluation at d_real = 0.9, d_fake = 0.1, smooth = 0.1
        let real = vec![0.9; 60];
        let fake = vec![0.1; 60];
        let (d, _) = gan_losses(&real, &fake, 0.1);
        let expect = -(0.9 * fmath::ln(0.9) + 0.1 * fmath::ln(0.1)) - fmath::ln(0.9);
        assert!(close(d, expect, 1e-12), "{d} vs {expect}");
    }

    #[test]
    fn extreme_scores_stay_finite() {
        let zeros = vec![0.0; 8];
        let ones = vec![1.0; 8];
        let (d, g) = gan_losses(&ones, &zeros, 0.1);
        assert!(d.is_finite() && g.is_finite());
        let (d2, g2) = gan_losses(&zeros, &ones, 0.1);
        assert!(d2.is_finite() && g2.is_finite());
    }

    #[test]
    fn disc_gradient_matches_numeric() {
        let cfg = small_config();
        let mut rng = stream_rng(11, 0);
        let disc = DiscriminatorNet::init(&cfg, &mut rng);
        let trips = toy_trips(&cfg, 2, 7);
        let y = DrivingClass::Normal;
        let target = 0.9;
        let (_, grads, _) = disc_loss_and_grad(&disc, &trips[0].values, y, target).unwrap();
        let theta = disc.flatten();
        let numeric = numeric_gradient(
            |pv| {
                let d = disc.unflatten_like(pv)?;
                Ok(disc_loss_and_grad(&d, &trips[0].values, y, target)?.0)
            },
            &theta,
            1e-5,
        )
        .unwrap();
        let err = max_rel_err(grads.values(), numeric.values());
        assert!(err <= 1e-4, "discriminator gradient mismatch: {err}");
    }

    #[test]
    fn gen_gradient_matches_numeric_both_forms() {
        let cfg = small_config();
        let mut rng = stream_rng(12, 0);
        let gen = GeneratorNet::init(&cfg, &mut rng);
        let disc = DiscriminatorNet::init(&cfg, &mut rng);
        let z = sample_noise(&mut rng, cfg.seq_len, cfg.latent);
        for saturating in [false, true] {
            let (_, grads) =
                gen_loss_and_grad(&gen, &disc, &z, DrivingClass::Aggressive, saturating).unwrap();
            let theta = gen.flatten();
            let numeric = numeric_gradient(
                |pv| {
                    let g = gen.unflatten_like(pv)?;
                    Ok(
                        gen_loss_and_grad(&g, &disc, &z, DrivingClass::Aggressive, saturating)?
                            .0,
                    )
                },
                &theta,
                1e-5,
            )
            .unwrap();
            let err = max_rel_err(grads.values(), numeric.values());
            assert!(err <= 1e-4, "generator gradient mismatch (saturating={saturating}): {err}");
        }
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let cfg = RcganConfig {
            epochs: 0,
            ..small_config()
        };
        let trips = toy_trips(&cfg, 4, 8);
        let mut rng = stream_rng(cfg.seed, 1);
        let trained = train_rcgan(&trips, &cfg, &mut rng).unwrap();
        let mut rng2 = stream_rng(cfg.seed, 1);
        let gen0 = GeneratorNet::init(&cfg, &mut rng2);
        let disc0 = DiscriminatorNet::init(&cfg, &mut rng2);
        assert_eq!(trained.generator, gen0);
        assert_eq!(trained.discriminator, disc0);
        assert!(trained.history.is_empty());
    }

    #[test]
    fn training_is_deterministic_and_losses_finite() {
        let cfg = RcganConfig {
            epochs: 3,
            ..small_config()
        };
        let trips = toy_trips(&cfg, 4, 9);
        let mut rng_a = stream_rng(42, 0);
        let a = train_rcgan(&trips, &cfg, &mut rng_a).unwrap();
        let mut rng_b = stream_rng(42, 0);
        let b = train_rcgan(&trips, &cfg, &mut rng_b).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.history.len(), 3);
        for e in &a.history {
            assert!(e.d_loss.is_finite() && e.g_loss.is_finite());
        }
    }

    #[test]
    fn training_rejects_bad_input() {
        let cfg = small_config();
        let mut rng = stream_rng(1, 0);
        assert!(train_rcgan(&[], &cfg, &mut rng).is_err());
        // unbalanced
        let mut trips = toy_trips(&cfg, 4, 2);
        trips.pop();
        let mut rng = stream_rng(1, 0);
        assert!(train_rcgan(&trips, &cfg, &mut rng).is_err());
        // out-of-range values
        let mut bad = toy_trips(&cfg, 2, 3);
        bad[0].values.set(0, 0, 1.5);
        let mut rng = stream_rng(1, 0);
        assert!(train_rcgan(&bad, &cfg, &mut rng).is_err());
    }

    #[test]
    fn discriminator_improves_on_real_data() {
        // majority vote over 3 seeds: real-data BCE after a short run is
        // below the value at initialization
        let cfg = RcganConfig {
            epochs: 200,
            hidden: 8,
            latent: 4,
            seq_len: 8,
            data_dim: 2,
            ..RcganConfig::default()
        };
        let trips = toy_trips(&cfg, 6, 13);
        let mut wins = 0;
        for seed in [101, 202, 303] {
            let mut rng = stream_rng(seed, 0);
            let gen0 = GeneratorNet::init(&cfg, &mut rng);
            let disc0 = DiscriminatorNet::init(&cfg, &mut rng);
            let _ = gen0;
            let real_loss = |disc: &DiscriminatorNet| -> f64 {
                trips
                    .iter()
                    .map(|t| {
                        let (scores, _) =
                            discriminate(disc, &t.values, t.label.unwrap()).unwrap();
                        bce(&scores, 1.0 - cfg.smooth)
                    })
                    .sum::<f64>()
                        / trips.len() as f64
            };
            let before = real_loss(&disc0);
            let mut rng = stream_rng(seed, 0);
            let trained = train_rcgan(&trips, &cfg, &mut rng).unwrap();
            let after = real_loss(&trained.discriminator);
            if after < before {
                wins += 1;
            }
        }
        assert!(wins >= 2, "discriminator improved in only {wins}/3 seeds");
    }

    #[test]
    fn synthesize_counts_labels_and_errors() {
        let cfg = small_config();
        let mut rng = stream_rng(5, 0);
        let gen = GeneratorNet::init(&cfg, &mut rng);

        let fakes = synthesize(&gen, 0.5, 60, &mut rng).unwrap();
        assert_eq!(fakes.len(), 30);
        let normal = fakes
            .iter()
            .filter(|t| t.label == Some(DrivingClass::Normal))
            .count();
        assert_eq!(normal, 15);

        let fakes = synthesize(&gen, 1.0, 60, &mut rng).unwrap();
        assert_eq!(fakes.len(), 60);
        let fakes = synthesize(&gen, 1.5, 60, &mut rng).unwrap();
        assert_eq!(fakes.len(), 90);

        for t in &fakes {
            assert_eq!(t.label, t.truth);
            assert!(t.id >= FAKE_ID_BASE);
            assert!(t.values.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
        assert!(synthesize(&gen, 0.7, 58, &mut rng).is_err());
    }

    #[test]
    fn loss_history_round_trips() {
        let history = vec![
            EpochLoss {
                epoch: 0,
                d_loss: 1.25,
                g_loss: 0.5,
            },
            EpochLoss {
                epoch: 1,
                d_loss: 1.0 / 3.0,
                g_loss: 2.0f64.sqrt(),
            },
        ];
        let text = render_loss_history(&history, "drivegen test seed=1");
        let back = parse_loss_history(&text).unwrap();
        assert_eq!(history, back);
    }
}
