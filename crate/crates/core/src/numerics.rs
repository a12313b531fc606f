//! Dense numerical core: row-major matrices, activations, optimizers, and a
//! central-difference gradient oracle.
//!
//! The matvec / rank-1-update kernels below are the hot path of GAN training;
//! they work on contiguous slices with fixed evaluation order so results are
//! bitwise reproducible on a platform.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{contract_err, nonfinite_err, shape_err, Result};
use crate::fmath;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Matrix {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Matrix> {
        if data.len() != rows * cols {
            return Err(shape_err!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            ));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(shape_err!("row {i} has {} entries, expected {c}", row.len()));
            }
            data.extend_from_slice(row);
        }
        Matrix::from_vec(r, c, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `y += self * x` (no allocation; shapes must agree).
    pub fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (yi, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yi += dot(row, x);
        }
    }

    /// `y += self^T * x`; row-major friendly (scaled-row accumulation).
    pub fn matvec_t_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (xi, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            if *xi != 0.0 {
                axpy(*xi, row, y);
            }
        }
    }

    /// Rank-1 update `self += a * b^T`, the gradient accumulation kernel.
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            axpy(*ai, b, row);
        }
    }
}

/// Dot product with four-way accumulation; fixed order, autovectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += s * x` over slices.
pub fn axpy(s: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

/// `W x + b` with explicit dimension checking.
pub fn affine(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.cols() || b.len() != w.rows() {
        return Err(shape_err!(
            "affine: W is {}x{}, x has {}, b has {}",
            w.rows(),
            w.cols(),
            x.len(),
            b.len()
        ));
    }
    let mut y = b.to_vec();
    w.matvec_acc(x, &mut y);
    Ok(y)
}

/// Element-wise activations plus pairwise maxout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Rectifier,
    /// Max over consecutive pairs of pre-activations (two linear pieces);
    /// output length is half the input length.
    Maxout,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Rectifier => "rectifier",
            Activation::Maxout => "maxout",
        }
    }

    pub fn parse(s: &str) -> Option<Activation> {
        match s {
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            "rectifier" => Some(Activation::Rectifier),
            "maxout" => Some(Activation::Maxout),
            _ => None,
        }
    }
}

/// Applies an activation to a pre-activation vector.
pub fn activation(kind: Activation, z: &[f64]) -> Result<Vec<f64>> {
    match kind {
        Activation::Sigmoid => Ok(z.iter().map(|&v| fmath::sigmoid(v)).collect()),
        Activation::Tanh => Ok(z.iter().map(|&v| fmath::tanh(v)).collect()),
        Activation::Rectifier => Ok(z.iter().map(|&v| v.max(0.0)).collect()),
        Activation::Maxout => {
            if z.len() % 2 != 0 {
                return Err(contract_err!(
                    "maxout needs an even input length, got {}",
                    z.len()
                ));
            }
            Ok(z.chunks_exact(2).map(|p| p[0].max(p[1])).collect())
        }
    }
}

/// Softmax with max-subtraction; output sums to 1 and is shift-invariant.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| fmath::exp(v - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// One named segment of a flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

/// Order and shapes of the segments in a [`ParamVector`].
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    segments: Vec<Segment>,
}

impl ParamLayout {
    pub fn new() -> ParamLayout {
        ParamLayout::default()
    }

    pub fn push(&mut self, name: &str, rows: usize, cols: usize) {
        self.segments.push(Segment {
            name: String::from(name),
            rows,
            cols,
        });
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(|s| s.rows * s.cols).sum()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Byte offset (in elements) of a named segment.
    pub fn offset_of(&self, name: &str) -> Option<(usize, usize)> {
        let mut offset = 0;
        for s in &self.segments {
            let len = s.rows * s.cols;
            if s.name == name {
                return Some((offset, len));
            }
            offset += len;
        }
        None
    }
}

/// Flat view of a parameter collection, with the layout map back to the
/// named matrices it came from. Round-tripping through the named form is an
/// exact identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn new(layout: ParamLayout, values: Vec<f64>) -> Result<ParamVector> {
        if values.len() != layout.total_len() {
            return Err(shape_err!(
                "param vector has {} values, layout wants {}",
                values.len(),
                layout.total_len()
            ));
        }
        Ok(ParamVector { layout, values })
    }

    pub fn zeros_like(&self) -> ParamVector {
        ParamVector {
            layout: self.layout.clone(),
            values: vec![0.0; self.values.len()],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn segment(&self, name: &str) -> Option<&[f64]> {
        let (offset, len) = self.layout.offset_of(name)?;
        Some(&self.values[offset..offset + len])
    }
}

/// Builder used by the networks to assemble their flat views.
pub struct ParamPacker {
    layout: ParamLayout,
    values: Vec<f64>,
}

impl ParamPacker {
    pub fn new() -> ParamPacker {
        ParamPacker {
            layout: ParamLayout::new(),
            values: Vec::new(),
        }
    }

    pub fn push_matrix(&mut self, name: &str, m: &Matrix) {
        self.layout.push(name, m.rows(), m.cols());
        self.values.extend_from_slice(m.data());
    }

    pub fn push_vector(&mut self, name: &str, v: &[f64]) {
        self.layout.push(name, v.len(), 1);
        self.values.extend_from_slice(v);
    }

    pub fn finish(self) -> ParamVector {
        ParamVector {
            layout: self.layout,
            values: self.values,
        }
    }
}

impl Default for ParamPacker {
    fn default() -> Self {
        ParamPacker::new()
    }
}

/// Cursor for the inverse direction: reading segments back out of a flat
/// vector in layout order.
pub struct ParamUnpacker<'a> {
    values: &'a [f64],
    offset: usize,
}

impl<'a> ParamUnpacker<'a> {
    pub fn new(pv: &'a ParamVector) -> ParamUnpacker<'a> {
        ParamUnpacker {
            values: &pv.values,
            offset: 0,
        }
    }

    pub fn take_matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let len = rows * cols;
        if self.offset + len > self.values.len() {
            return Err(shape_err!("param vector too short while unpacking"));
        }
        let data = self.values[self.offset..self.offset + len].to_vec();
        self.offset += len;
        Matrix::from_vec(rows, cols, data)
    }

    pub fn take_vector(&mut self, len: usize) -> Result<Vec<f64>> {
        if self.offset + len > self.values.len() {
            return Err(shape_err!("param vector too short while unpacking"));
        }
        let v = self.values[self.offset..self.offset + len].to_vec();
        self.offset += len;
        Ok(v)
    }

    pub fn finish(self) -> Result<()> {
        if self.offset != self.values.len() {
            return Err(shape_err!(
                "param vector has {} leftover values after unpacking",
                self.values.len() - self.offset
            ));
        }
        Ok(())
    }
}

/// ADAM moment estimates for one parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Fresh state with the conventional constants.
    pub fn new(param_len: usize) -> AdamState {
        AdamState {
            step: 0,
            m: vec![0.0; param_len],
            v: vec![0.0; param_len],
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Plain gradient-descent step `theta - lr * grad`.
pub fn sgd_update(theta: &ParamVector, grad: &ParamVector, lr: f64) -> Result<ParamVector> {
    if theta.layout != grad.layout {
        return Err(shape_err!("sgd_update: parameter and gradient layouts differ"));
    }
    let values = theta
        .values
        .iter()
        .zip(&grad.values)
        .map(|(t, g)| t - lr * g)
        .collect();
    Ok(ParamVector {
        layout: theta.layout.clone(),
        values,
    })
}

/// Bias-corrected ADAM step; returns the new parameters and advanced state.
pub fn adam_update(
    theta: &ParamVector,
    grad: &ParamVector,
    state: &AdamState,
    lr: f64,
) -> Result<(ParamVector, AdamState)> {
    if theta.layout != grad.layout {
        return Err(shape_err!("adam_update: parameter and gradient layouts differ"));
    }
    if state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(shape_err!(
            "adam_update: state holds {} moments for {} parameters",
            state.m.len(),
            theta.len()
        ));
    }
    let mut next = state.clone();
    next.step = state.step + 1;
    let t = next.step as i32;
    let bc1 = 1.0 - powi(state.beta1, t);
    let bc2 = 1.0 - powi(state.beta2, t);
    let mut values = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let g = grad.values[i];
        let m = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        let v = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        next.m[i] = m;
        next.v[i] = v;
        let m_hat = m / bc1;
        let v_hat = v / bc2;
        values.push(theta.values[i] - lr * m_hat / (fmath::sqrt(v_hat) + state.epsilon));
    }
    Ok((
        ParamVector {
            layout: theta.layout.clone(),
            values,
        },
        next,
    ))
}

fn powi(base: f64, exp: i32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// Central-difference gradient `(f(x + h e_i) - f(x - h e_i)) / 2h`.
///
/// The oracle every analytic gradient in this workspace is checked against.
pub fn numeric_gradient<F>(mut f: F, theta: &ParamVector, h: f64) -> Result<ParamVector>
where
    F: FnMut(&ParamVector) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(contract_err!("numeric_gradient: step must be positive"));
    }
    let mut probe = theta.clone();
    let mut grad = theta.zeros_like();
    for i in 0..theta.len() {
        let orig = theta.values[i];
        probe.values[i] = orig + h;
        let plus = f(&probe)?;
        probe.values[i] = orig - h;
        let minus = f(&probe)?;
        probe.values[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(nonfinite_err!(
                "numeric_gradient: objective not finite at coordinate {i}"
            ));
        }
        grad.values[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Largest per-coordinate discrepancy between two gradients, relative to the
/// largest entry magnitude. The workspace-wide gradient checks bound this by
/// 1e-4.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |acc, v| acc.max(fmath::abs(*v)))
        .max(1e-12);
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max(fmath::abs(x - y)))
        / scale
}
