//! Vanilla-RNN and peephole-LSTM cells, sequence unrolling, and exact
//! backpropagation through time.
//!
//! The LSTM follows the peephole formulation in which all three gates see the
//! *previous* cell state: for g in {i, f, o},
//!
//! ```text
//! g_t = sigmoid(W_g x_t + U_g h_{t-1} + V_g . c_{t-1} + b_g)
//! c_t = f_t . c_{t-1} + i_t . tanh(W_c x_t + U_c h_{t-1} + b_c)
//! h_t = o_t . tanh(c_t)
//! ```
//!
//! with `.` the element-wise product and the peepholes `V_g` diagonal
//! (stored as length-H vectors). Sequences start from `h_0 = c_0 = 0` and
//! BPTT is never truncated.

use alloc::vec;
use alloc::vec::Vec;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{contract_err, nonfinite_err, shape_err, Result};
use crate::fmath;
use crate::numerics::{softmax, Matrix, ParamPacker, ParamUnpacker, ParamVector};
use crate::rng::uniform_sym;

/// Scale of the uniform parameter initialization.
pub const INIT_SCALE: f64 = 0.08;

fn uniform_matrix<R: RngCore>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for v in m.data_mut() {
        *v = uniform_sym(rng, INIT_SCALE);
    }
    m
}

fn uniform_vec<R: RngCore>(len: usize, rng: &mut R) -> Vec<f64> {
    (0..len).map(|_| uniform_sym(rng, INIT_SCALE)).collect()
}

// ---------------------------------------------------------------------------
// Vanilla RNN
// ---------------------------------------------------------------------------

/// Parameters of the vanilla recurrent cell plus its softmax output head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl RnnParams {
    pub fn zeros(hidden: usize, d_in: usize, d_out: usize) -> RnnParams {
        RnnParams {
            w: Matrix::zeros(hidden, d_in),
            u: Matrix::zeros(hidden, hidden),
            b: vec![0.0; hidden],
            w_out: Matrix::zeros(d_out, hidden),
            b_out: vec![0.0; d_out],
        }
    }

    pub fn init_uniform<R: RngCore>(
        hidden: usize,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> RnnParams {
        RnnParams {
            w: uniform_matrix(hidden, d_in, rng),
            u: uniform_matrix(hidden, hidden, rng),
            b: uniform_vec(hidden, rng),
            w_out: uniform_matrix(d_out, hidden, rng),
            b_out: uniform_vec(d_out, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.w.rows()
    }

    pub fn input_size(&self) -> usize {
        self.w.cols()
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        p.push_matrix("w", &self.w);
        p.push_matrix("u", &self.u);
        p.push_vector("b", &self.b);
        p.push_matrix("w_out", &self.w_out);
        p.push_vector("b_out", &self.b_out);
        p.finish()
    }

    /// Rebuilds parameters with this network's shapes from a flat vector.
    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<RnnParams> {
        let mut u = ParamUnpacker::new(pv);
        let out = RnnParams {
            w: u.take_matrix(self.w.rows(), self.w.cols())?,
            u: u.take_matrix(self.u.rows(), self.u.cols())?,
            b: u.take_vector(self.b.len())?,
            w_out: u.take_matrix(self.w_out.rows(), self.w_out.cols())?,
            b_out: u.take_vector(self.b_out.len())?,
        };
        u.finish()?;
        Ok(out)
    }
}

/// One recurrence step: `h_t = tanh(W x_t + U h_prev + b)`.
pub fn rnn_step(params: &RnnParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    let h = params.hidden_size();
    if x.len() != params.input_size() || h_prev.len() != h {
        return Err(shape_err!(
            "rnn_step: cell takes {} inputs and {} hidden, got {} and {}",
            params.input_size(),
            h,
            x.len(),
            h_prev.len()
        ));
    }
    let mut z = params.b.clone();
    params.w.matvec_acc(x, &mut z);
    params.u.matvec_acc(h_prev, &mut z);
    for v in z.iter_mut() {
        *v = fmath::tanh(*v);
    }
    Ok(z)
}

/// Classification head `softmax(W_out h_t + b_out)`.
pub fn rnn_output(params: &RnnParams, h: &[f64]) -> Result<Vec<f64>> {
    if h.len() != params.w_out.cols() {
        return Err(shape_err!(
            "rnn_output: head takes {} hidden units, got {}",
            params.w_out.cols(),
            h.len()
        ));
    }
    let mut z = params.b_out.clone();
    params.w_out.matvec_acc(h, &mut z);
    Ok(softmax(&z))
}

/// Runs the vanilla cell over a sequence from the zero state.
pub fn unroll_rnn(params: &RnnParams, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if inputs.is_empty() {
        return Err(contract_err!("unroll: empty input sequence"));
    }
    let mut h = vec![0.0; params.hidden_size()];
    let mut out = Vec::with_capacity(inputs.len());
    for (t, x) in inputs.iter().enumerate() {
        h = rnn_step(params, x, &h)?;
        if !h.iter().all(|v| v.is_finite()) {
            return Err(nonfinite_err!("rnn hidden state at step {t}"));
        }
        out.push(h.clone());
    }
    Ok(out)
}

/// Gradients for [`RnnParams`], same shapes and flat layout.
#[derive(Debug, Clone)]
pub struct RnnGrads {
    pub w: Matrix,
    pub u: Matrix,
    pub b: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

impl RnnGrads {
    fn zeros_like(p: &RnnParams) -> RnnGrads {
        RnnGrads {
            w: Matrix::zeros(p.w.rows(), p.w.cols()),
            u: Matrix::zeros(p.u.rows(), p.u.cols()),
            b: vec![0.0; p.b.len()],
            w_out: Matrix::zeros(p.w_out.rows(), p.w_out.cols()),
            b_out: vec![0.0; p.b_out.len()],
        }
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        p.push_matrix("w", &self.w);
        p.push_matrix("u", &self.u);
        p.push_vector("b", &self.b);
        p.push_matrix("w_out", &self.w_out);
        p.push_vector("b_out", &self.b_out);
        p.finish()
    }
}

/// Mean per-step softmax cross-entropy over a label sequence, with the exact
/// BPTT gradient for every parameter including the output head.
pub fn rnn_seq_loss_and_grad(
    params: &RnnParams,
    inputs: &[Vec<f64>],
    targets: &[usize],
) -> Result<(f64, RnnGrads)> {
    if targets.len() != inputs.len() {
        return Err(shape_err!(
            "rnn loss: {} inputs vs {} targets",
            inputs.len(),
            targets.len()
        ));
    }
    let hiddens = unroll_rnn(params, inputs)?;
    let steps = inputs.len() as f64;
    let mut grads = RnnGrads::zeros_like(params);
    let mut loss = 0.0;
    // per-step head loss and the dL/dh it injects
    let mut dh_inject: Vec<Vec<f64>> = Vec::with_capacity(hiddens.len());
    for (t, h) in hiddens.iter().enumerate() {
        let p = rnn_output(params, h)?;
        let target = targets[t];
        if target >= p.len() {
            return Err(contract_err!("rnn loss: target {target} out of range at step {t}"));
        }
        loss += -fmath::ln(p[target].max(1e-300)) / steps;
        // dL/dz for softmax + CE, averaged over steps
        let mut dz = p;
        dz[target] -= 1.0;
        for v in dz.iter_mut() {
            *v /= steps;
        }
        grads.w_out.add_outer(&dz, h);
        for (bi, di) in grads.b_out.iter_mut().zip(&dz) {
            *bi += di;
        }
        let mut dh = vec![0.0; h.len()];
        params.w_out.matvec_t_acc(&dz, &mut dh);
        dh_inject.push(dh);
    }
    // backward through time
    let mut dh_carry = vec![0.0; params.hidden_size()];
    let zero_h = vec![0.0; params.hidden_size()];
    for t in (0..inputs.len()).rev() {
        let mut dh = dh_inject[t].clone();
        for (a, b) in dh.iter_mut().zip(&dh_carry) {
            *a += b;
        }
        let h_t = &hiddens[t];
        let h_prev = if t == 0 { &zero_h } else { &hiddens[t - 1] };
        // through tanh: dz = dh * (1 - h^2)
        let dz: Vec<f64> = dh
            .iter()
            .zip(h_t)
            .map(|(d, h)| d * (1.0 - h * h))
            .collect();
        grads.w.add_outer(&dz, &inputs[t]);
        grads.u.add_outer(&dz, h_prev);
        for (bi, di) in grads.b.iter_mut().zip(&dz) {
            *bi += di;
        }
        let mut dh_prev = vec![0.0; params.hidden_size()];
        params.u.matvec_t_acc(&dz, &mut dh_prev);
        dh_carry = dh_prev;
    }
    Ok((loss, grads))
}

// ---------------------------------------------------------------------------
// Peephole LSTM
// ---------------------------------------------------------------------------

/// Weights of one gate: input, recurrent, diagonal peephole, and bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub w: Matrix,
    pub u: Matrix,
    pub v: Vec<f64>,
    pub b: Vec<f64>,
}

impl GateParams {
    fn zeros(hidden: usize, d_in: usize) -> GateParams {
        GateParams {
            w: Matrix::zeros(hidden, d_in),
            u: Matrix::zeros(hidden, hidden),
            v: vec![0.0; hidden],
            b: vec![0.0; hidden],
        }
    }

    fn init_uniform<R: RngCore>(hidden: usize, d_in: usize, rng: &mut R) -> GateParams {
        GateParams {
            w: uniform_matrix(hidden, d_in, rng),
            u: uniform_matrix(hidden, hidden, rng),
            v: uniform_vec(hidden, rng),
            b: uniform_vec(hidden, rng),
        }
    }

    /// Pre-activation `W x + U h_prev + V . c_prev + b`.
    fn preact(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> Vec<f64> {
        let mut z = self.b.clone();
        self.w.matvec_acc(x, &mut z);
        self.u.matvec_acc(h_prev, &mut z);
        for ((zi, vi), ci) in z.iter_mut().zip(&self.v).zip(c_prev) {
            *zi += vi * ci;
        }
        z
    }
}

/// Full peephole-LSTM cell parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub input_gate: GateParams,
    pub forget_gate: GateParams,
    pub cell_w: Matrix,
    pub cell_u: Matrix,
    pub cell_b: Vec<f64>,
    pub output_gate: GateParams,
}

impl LstmParams {
    pub fn zeros(hidden: usize, d_in: usize) -> LstmParams {
        LstmParams {
            input_gate: GateParams::zeros(hidden, d_in),
            forget_gate: GateParams::zeros(hidden, d_in),
            cell_w: Matrix::zeros(hidden, d_in),
            cell_u: Matrix::zeros(hidden, hidden),
            cell_b: vec![0.0; hidden],
            output_gate: GateParams::zeros(hidden, d_in),
        }
    }

    pub fn init_uniform<R: RngCore>(hidden: usize, d_in: usize, rng: &mut R) -> LstmParams {
        LstmParams {
            input_gate: GateParams::init_uniform(hidden, d_in, rng),
            forget_gate: GateParams::init_uniform(hidden, d_in, rng),
            cell_w: uniform_matrix(hidden, d_in, rng),
            cell_u: uniform_matrix(hidden, hidden, rng),
            cell_b: uniform_vec(hidden, rng),
            output_gate: GateParams::init_uniform(hidden, d_in, rng),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.cell_w.rows()
    }

    pub fn input_size(&self) -> usize {
        self.cell_w.cols()
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        self.pack_into(&mut p);
        p.finish()
    }

    pub fn unflatten_like(&self, pv: &ParamVector) -> Result<LstmParams> {
        let mut u = ParamUnpacker::new(pv);
        let out = self.unpack_from(&mut u)?;
        u.finish()?;
        Ok(out)
    }

    /// Appends every parameter to a packer; networks that wrap the cell use
    /// this to build their combined flat layout.
    pub fn pack_into(&self, p: &mut ParamPacker) {
        pack_gate(p, "i", &self.input_gate);
        pack_gate(p, "f", &self.forget_gate);
        p.push_matrix("w_c", &self.cell_w);
        p.push_matrix("u_c", &self.cell_u);
        p.push_vector("b_c", &self.cell_b);
        pack_gate(p, "o", &self.output_gate);
    }

    /// Reads parameters with this cell's shapes back out of an unpacker.
    pub fn unpack_from(&self, u: &mut ParamUnpacker<'_>) -> Result<LstmParams> {
        Ok(LstmParams {
            input_gate: unpack_gate(u, &self.input_gate)?,
            forget_gate: unpack_gate(u, &self.forget_gate)?,
            cell_w: u.take_matrix(self.cell_w.rows(), self.cell_w.cols())?,
            cell_u: u.take_matrix(self.cell_u.rows(), self.cell_u.cols())?,
            cell_b: u.take_vector(self.cell_b.len())?,
            output_gate: unpack_gate(u, &self.output_gate)?,
        })
    }
}

fn pack_gate(p: &mut ParamPacker, tag: &str, g: &GateParams) {
    p.push_matrix(&alloc::format!("w_{tag}"), &g.w);
    p.push_matrix(&alloc::format!("u_{tag}"), &g.u);
    p.push_vector(&alloc::format!("v_{tag}"), &g.v);
    p.push_vector(&alloc::format!("b_{tag}"), &g.b);
}

fn unpack_gate(u: &mut ParamUnpacker<'_>, like: &GateParams) -> Result<GateParams> {
    Ok(GateParams {
        w: u.take_matrix(like.w.rows(), like.w.cols())?,
        u: u.take_matrix(like.u.rows(), like.u.cols())?,
        v: u.take_vector(like.v.len())?,
        b: u.take_vector(like.b.len())?,
    })
}

/// Hidden and memory-cell state; sequences start from all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl LstmState {
    pub fn zero(hidden: usize) -> LstmState {
        LstmState {
            h: vec![0.0; hidden],
            c: vec![0.0; hidden],
        }
    }
}

struct StepVals {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

fn step_full(params: &LstmParams, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepVals {
    let mut i = params.input_gate.preact(x, h_prev, c_prev);
    for v in i.iter_mut() {
        *v = fmath::sigmoid(*v);
    }
    let mut f = params.forget_gate.preact(x, h_prev, c_prev);
    for v in f.iter_mut() {
        *v = fmath::sigmoid(*v);
    }
    let mut g = params.cell_b.clone();
    params.cell_w.matvec_acc(x, &mut g);
    params.cell_u.matvec_acc(h_prev, &mut g);
    for v in g.iter_mut() {
        *v = fmath::tanh(*v);
    }
    let c: Vec<f64> = f
        .iter()
        .zip(c_prev)
        .zip(i.iter().zip(&g))
        .map(|((ft, ct), (it, gt))| ft * ct + it * gt)
        .collect();
    let mut o = params.output_gate.preact(x, h_prev, c_prev);
    for v in o.iter_mut() {
        *v = fmath::sigmoid(*v);
    }
    let tanh_c: Vec<f64> = c.iter().map(|&v| fmath::tanh(v)).collect();
    let h: Vec<f64> = o.iter().zip(&tanh_c).map(|(ot, tc)| ot * tc).collect();
    StepVals {
        i,
        f,
        g,
        o,
        c,
        tanh_c,
        h,
    }
}

/// One LSTM step.
pub fn lstm_step(params: &LstmParams, x: &[f64], prev: &LstmState) -> Result<LstmState> {
    let hidden = params.hidden_size();
    if x.len() != params.input_size() || prev.h.len() != hidden || prev.c.len() != hidden {
        return Err(shape_err!(
            "lstm_step: cell takes {} inputs and {} hidden, got {} and {}/{}",
            params.input_size(),
            hidden,
            x.len(),
            prev.h.len(),
            prev.c.len()
        ));
    }
    let vals = step_full(params, x, &prev.h, &prev.c);
    Ok(LstmState {
        h: vals.h,
        c: vals.c,
    })
}

/// Runs the LSTM over a sequence from the zero state, returning every state.
pub fn unroll_lstm(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<Vec<LstmState>> {
    let trace = lstm_forward_trace(params, inputs)?;
    Ok(trace
        .steps
        .into_iter()
        .map(|s| LstmState { h: s.h, c: s.c })
        .collect())
}

/// Everything the backward pass needs from a forward run.
pub struct LstmTrace {
    steps: Vec<StepVals>,
}

impl LstmTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn hidden(&self, t: usize) -> &[f64] {
        &self.steps[t].h
    }

    pub fn cell(&self, t: usize) -> &[f64] {
        &self.steps[t].c
    }
}

/// Forward pass over a whole sequence, keeping gate activations for BPTT.
pub fn lstm_forward_trace(params: &LstmParams, inputs: &[Vec<f64>]) -> Result<LstmTrace> {
    if inputs.is_empty() {
        return Err(contract_err!("unroll: empty input sequence"));
    }
    let hidden = params.hidden_size();
    let mut steps: Vec<StepVals> = Vec::with_capacity(inputs.len());
    let zero = LstmState::zero(hidden);
    for (t, x) in inputs.iter().enumerate() {
        if x.len() != params.input_size() {
            return Err(shape_err!(
                "lstm unroll: step {t} input has {} entries, cell takes {}",
                x.len(),
                params.input_size()
            ));
        }
        let (h_prev, c_prev) = match steps.last() {
            Some(prev) => (&prev.h, &prev.c),
            None => (&zero.h, &zero.c),
        };
        let vals = step_full(params, x, h_prev, c_prev);
        if !vals.h.iter().all(|v| v.is_finite()) || !vals.c.iter().all(|v| v.is_finite()) {
            return Err(nonfinite_err!("lstm state at step {t}"));
        }
        steps.push(vals);
    }
    Ok(LstmTrace { steps })
}

/// Gradients for [`LstmParams`], same shapes and flat layout.
#[derive(Debug, Clone)]
pub struct LstmGrads {
    pub input_gate: GateParams,
    pub forget_gate: GateParams,
    pub cell_w: Matrix,
    pub cell_u: Matrix,
    pub cell_b: Vec<f64>,
    pub output_gate: GateParams,
}

impl LstmGrads {
    pub fn zeros_like(p: &LstmParams) -> LstmGrads {
        LstmGrads {
            input_gate: GateParams::zeros(p.hidden_size(), p.input_size()),
            forget_gate: GateParams::zeros(p.hidden_size(), p.input_size()),
            cell_w: Matrix::zeros(p.cell_w.rows(), p.cell_w.cols()),
            cell_u: Matrix::zeros(p.cell_u.rows(), p.cell_u.cols()),
            cell_b: vec![0.0; p.cell_b.len()],
            output_gate: GateParams::zeros(p.hidden_size(), p.input_size()),
        }
    }

    pub fn flatten(&self) -> ParamVector {
        let mut p = ParamPacker::new();
        self.pack_into(&mut p);
        p.finish()
    }

    /// Same segment order as [`LstmParams::pack_into`].
    pub fn pack_into(&self, p: &mut ParamPacker) {
        pack_gate(p, "i", &self.input_gate);
        pack_gate(p, "f", &self.forget_gate);
        p.push_matrix("w_c", &self.cell_w);
        p.push_matrix("u_c", &self.cell_u);
        p.push_vector("b_c", &self.cell_b);
        pack_gate(p, "o", &self.output_gate);
    }
}

fn gate_backward(
    grads: &mut GateParams,
    params: &GateParams,
    da: &[f64],
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    dh_prev: &mut [f64],
    dc_prev: &mut [f64],
    dx: &mut [f64],
) {
    grads.w.add_outer(da, x);
    grads.u.add_outer(da, h_prev);
    for ((gv, dai), ci) in grads.v.iter_mut().zip(da).zip(c_prev) {
        *gv += dai * ci;
    }
    for (gb, dai) in grads.b.iter_mut().zip(da) {
        *gb += dai;
    }
    params.u.matvec_t_acc(da, dh_prev);
    for ((dci, vi), dai) in dc_prev.iter_mut().zip(&params.v).zip(da) {
        *dci += vi * dai;
    }
    params.w.matvec_t_acc(da, dx);
}

/// Exact gradients of a loss whose hidden-state gradients are `dh_inject[t]`,
/// propagated back through the full unrolled sequence. Also returns the
/// gradient with respect to each input vector, which is what lets a
/// discriminator pass gradients into the generator that fed it.
pub fn lstm_backward(
    params: &LstmParams,
    inputs: &[Vec<f64>],
    trace: &LstmTrace,
    dh_inject: &[Vec<f64>],
) -> Result<(LstmGrads, Vec<Vec<f64>>)> {
    let steps = inputs.len();
    if trace.len() != steps || dh_inject.len() != steps {
        return Err(shape_err!(
            "lstm_backward: {} inputs, {} trace steps, {} injections",
            steps,
            trace.len(),
            dh_inject.len()
        ));
    }
    let hidden = params.hidden_size();
    let mut grads = LstmGrads::zeros_like(params);
    let mut dxs = vec![vec![0.0; params.input_size()]; steps];
    let zero = vec![0.0; hidden];
    let mut dh_carry = vec![0.0; hidden];
    let mut dc_carry = vec![0.0; hidden];
    for t in (0..steps).rev() {
        let vals = &trace.steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zero, &zero)
        } else {
            (&trace.steps[t - 1].h, &trace.steps[t - 1].c)
        };
        let x = &inputs[t];
        // dL/dh_t: injected plus recurrent carry
        let dh: Vec<f64> = dh_inject[t]
            .iter()
            .zip(&dh_carry)
            .map(|(a, b)| a + b)
            .collect();
        // h_t = o_t . tanh(c_t)
        let d_o: Vec<f64> = dh.iter().zip(&vals.tanh_c).map(|(d, tc)| d * tc).collect();
        let mut dc: Vec<f64> = dh
            .iter()
            .zip(&vals.o)
            .zip(&vals.tanh_c)
            .map(|((d, o), tc)| d * o * (1.0 - tc * tc))
            .collect();
        for (a, b) in dc.iter_mut().zip(&dc_carry) {
            *a += b;
        }
        let mut dh_prev = vec![0.0; hidden];
        let mut dc_prev = vec![0.0; hidden];
        // output gate (peephole reads c_{t-1})
        let da_o: Vec<f64> = d_o
            .iter()
            .zip(&vals.o)
            .map(|(d, o)| d * o * (1.0 - o))
            .collect();
        gate_backward(
            &mut grads.output_gate,
            &params.output_gate,
            &da_o,
            x,
            h_prev,
            c_prev,
            &mut dh_prev,
            &mut dc_prev,
            &mut dxs[t],
        );
        // c_t = f . c_{t-1} + i . g
        let d_f: Vec<f64> = dc.iter().zip(c_prev).map(|(d, c)| d * c).collect();
        let d_i: Vec<f64> = dc.iter().zip(&vals.g).map(|(d, g)| d * g).collect();
        let d_g: Vec<f64> = dc.iter().zip(&vals.i).map(|(d, i)| d * i).collect();
        for ((dcp, d), f) in dc_prev.iter_mut().zip(&dc).zip(&vals.f) {
            *dcp += d * f;
        }
        // candidate tanh
        let da_g: Vec<f64> = d_g
            .iter()
            .zip(&vals.g)
            .map(|(d, g)| d * (1.0 - g * g))
            .collect();
        grads.cell_w.add_outer(&da_g, x);
        grads.cell_u.add_outer(&da_g, h_prev);
        for (gb, d) in grads.cell_b.iter_mut().zip(&da_g) {
            *gb += d;
        }
        params.cell_u.matvec_t_acc(&da_g, &mut dh_prev);
        params.cell_w.matvec_t_acc(&da_g, &mut dxs[t]);
        // input gate
        let da_i: Vec<f64> = d_i
            .iter()
            .zip(&vals.i)
            .map(|(d, i)| d * i * (1.0 - i))
            .collect();
        gate_backward(
            &mut grads.input_gate,
            &params.input_gate,
            &da_i,
            x,
            h_prev,
            c_prev,
            &mut dh_prev,
            &mut dc_prev,
            &mut dxs[t],
        );
        // forget gate
        let da_f: Vec<f64> = d_f
            .iter()
            .zip(&vals.f)
            .map(|(d, f)| d * f * (1.0 - f))
            .collect();
        gate_backward(
            &mut grads.forget_gate,
            &params.forget_gate,
            &da_f,
            x,
            h_prev,
            c_prev,
            &mut dh_prev,
            &mut dc_prev,
            &mut dxs[t],
        );
        dh_carry = dh_prev;
        dc_carry = dc_prev;
    }
    Ok((grads, dxs))
}

/// Backpropagation through time for an arbitrary per-step loss on the hidden
/// states. The closure returns, for step `t`, the loss contribution and its
/// gradient `dL/dh_t`; the total loss is the sum over steps.
pub fn lstm_bptt<F>(
    params: &LstmParams,
    inputs: &[Vec<f64>],
    mut step_loss: F,
) -> Result<(f64, LstmGrads)>
where
    F: FnMut(usize, &[f64]) -> Result<(f64, Vec<f64>)>,
{
    let trace = lstm_forward_trace(params, inputs)?;
    let mut loss = 0.0;
    let mut dh_inject = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let (l, dh) = step_loss(t, trace.hidden(t))?;
        if !l.is_finite() {
            return Err(nonfinite_err!("step loss at step {t}"));
        }
        loss += l;
        dh_inject.push(dh);
    }
    let (grads, _) = lstm_backward(params, inputs, &trace, &dh_inject)?;
    Ok((loss, grads))
}
