//! The five layer kinds of the recommender: dense, ReLU, inverted dropout,
//! embedding lookup, residual addition and column concatenation.
//!
//! Forward functions are pure. Whatever a backward pass needs (the dense input,
//! the ReLU output, the dropout mask) is returned to the caller, who keeps it in
//! a trace until the backward pass runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix, Operand};
use super::param::Parameter;

use crate::error::{Error, Result};

/// `out[b, o] = Σ_i input[b, i]·W[i, o] + bias[o]`.
pub fn dense_forward(input: &Matrix, weight: &Parameter, bias: &Parameter) -> Result<Matrix> {
    let (i_dim, o_dim) = weight.shape();
    if input.cols() != i_dim {
        return Err(Error::Dimension(format!(
            "dense input has {} columns, weight expects {i_dim}",
            input.cols()
        )));
    }
    if bias.shape() != (1, o_dim) {
        return Err(Error::Dimension(format!(
            "bias is {:?}, expected (1, {o_dim})",
            bias.shape()
        )));
    }
    let mut out = Matrix::zeros(input.rows(), o_dim);
    let b = bias.value.data();
    for r in 0..input.rows() {
        out.row_mut(r).copy_from_slice(b);
    }
    gemm(Operand::plain(input), Operand::plain(&weight.value), 1.0, &mut out);
    Ok(out)
}

/// Accumulates `dW += inputᵀ·grad_out` and `db += Σ_b grad_out` (skipped when
/// frozen) and returns `grad_out·Wᵀ`.
pub fn dense_backward(input: &Matrix, grad_out: &Matrix, weight: &mut Parameter, bias: &mut Parameter) -> Matrix {
    if !weight.is_frozen() {
        gemm(
            Operand::transposed(input),
            Operand::plain(grad_out),
            1.0,
            &mut weight.grad,
        );
    }
    if !bias.is_frozen() {
        let db = bias.grad.data_mut();
        for r in 0..grad_out.rows() {
            for (acc, g) in db.iter_mut().zip(grad_out.row(r)) {
                *acc += g;
            }
        }
    }
    dense_input_grad(grad_out, weight)
}

pub fn dense_input_grad(grad_out: &Matrix, weight: &Parameter) -> Matrix {
    let mut grad_in = Matrix::zeros(grad_out.rows(), weight.shape().0);
    gemm(
        Operand::plain(grad_out),
        Operand::transposed(&weight.value),
        0.0,
        &mut grad_in,
    );
    grad_in
}

/// A dense layer with Glorot-uniform weights and zero bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            weight: Parameter::new(Matrix::from_vec(fan_in, fan_out, data).expect("sized")),
            bias: Parameter::zeros(1, fan_out),
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Parameter::zeros(fan_in, fan_out),
            bias: Parameter::zeros(1, fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.shape().0
    }

    pub fn fan_out(&self) -> usize {
        self.weight.shape().1
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        dense_forward(input, &self.weight, &self.bias)
    }

    pub fn backward(&mut self, input: &Matrix, grad_out: &Matrix) -> Matrix {
        dense_backward(input, grad_out, &mut self.weight, &mut self.bias)
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        f(&self.weight);
        f(&self.bias);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

pub fn relu(input: &Matrix) -> Matrix {
    let mut out = input.clone();
    relu_in_place(&mut out);
    out
}

pub(crate) fn relu_in_place(m: &mut Matrix) {
    for x in m.data_mut() {
        if *x <= 0.0 {
            *x = 0.0;
        }
    }
}

/// Upstream gradient masked by `x > 0`. Either the pre-activation or the ReLU
/// output can be passed as `activation`; both have the same sign pattern.
pub fn relu_backward(activation: &Matrix, grad_out: &Matrix) -> Matrix {
    let mut g = grad_out.clone();
    relu_backward_in_place(activation, &mut g);
    g
}

pub(crate) fn relu_backward_in_place(activation: &Matrix, grad: &mut Matrix) {
    for (g, &a) in grad.data_mut().iter_mut().zip(activation.data()) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutState {
    pub rate: f64,
    pub rng_seed: u64,
    pub training_mode: bool,
}

impl DropoutState {
    pub fn validate(&self) -> Result<()> {
        validate_rate(self.rate)
    }
}

pub(crate) fn validate_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::Config(format!("dropout rate {rate} is outside [0, 1)")))
    }
}

/// Per-entry multipliers of an inverted-dropout pass: `0` or `1/(1-rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(Vec<f64>);

impl DropoutMask {
    pub fn multipliers(&self) -> &[f64] {
        &self.0
    }

    pub fn backward(&self, grad_out: &Matrix) -> Matrix {
        let mut g = grad_out.clone();
        self.apply_in_place(&mut g);
        g
    }

    pub(crate) fn apply_in_place(&self, m: &mut Matrix) {
        for (x, k) in m.data_mut().iter_mut().zip(&self.0) {
            *x *= k;
        }
    }
}

/// Inverted dropout. Returns the mask in training mode; inference is the identity.
pub fn dropout_forward(input: &Matrix, state: &DropoutState) -> Result<(Matrix, Option<DropoutMask>)> {
    state.validate()?;
    if !state.training_mode {
        return Ok((input.clone(), None));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
    let mut out = input.clone();
    let mask = dropout_apply(&mut out, state.rate, &mut rng);
    Ok((out, Some(mask)))
}

pub(crate) fn dropout_apply<R: Rng + ?Sized>(m: &mut Matrix, rate: f64, rng: &mut R) -> DropoutMask {
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..m.data().len())
        .map(|_| {
            if rate > 0.0 && rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect();
    let mask = DropoutMask(mask);
    mask.apply_in_place(m);
    mask
}

/// Row gather from an embedding table.
pub fn embedding_lookup(table: &Parameter, ids: &[usize]) -> Result<Matrix> {
    let (vocab, dim) = table.shape();
    let mut out = Matrix::zeros(ids.len(), dim);
    for (r, &id) in ids.iter().enumerate() {
        if id >= vocab {
            return Err(Error::OutOfVocabulary { id, size: vocab });
        }
        out.row_mut(r).copy_from_slice(table.value.row(id));
    }
    Ok(out)
}

/// Scatter-adds upstream rows into `table.grad`. Duplicate ids accumulate.
pub fn embedding_backward(table: &mut Parameter, ids: &[usize], grad_out: &Matrix) {
    if table.is_frozen() {
        return;
    }
    for (r, &id) in ids.iter().enumerate() {
        for (acc, g) in table.grad.row_mut(id).iter_mut().zip(grad_out.row(r)) {
            *acc += g;
        }
    }
}

pub fn residual_add(x: &Matrix, y: &Matrix) -> Result<Matrix> {
    x.check_same_shape(y, "residual add")?;
    let mut out = x.clone();
    for (o, b) in out.data_mut().iter_mut().zip(y.data()) {
        *o += b;
    }
    Ok(out)
}

/// Both parents of a residual addition receive the upstream gradient unchanged.
pub fn residual_backward(grad_out: &Matrix) -> (Matrix, Matrix) {
    (grad_out.clone(), grad_out.clone())
}

pub fn concat_cols(parts: &[&Matrix]) -> Result<Matrix> {
    let rows = parts.first().map_or(0, |m| m.rows());
    if let Some(bad) = parts.iter().find(|m| m.rows() != rows) {
        return Err(Error::Dimension(format!(
            "concatenating parts with {} and {rows} rows",
            bad.rows()
        )));
    }
    let cols: usize = parts.iter().map(|m| m.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let mut offset = 0;
        let dst = out.row_mut(r);
        for p in parts {
            dst[offset..offset + p.cols()].copy_from_slice(p.row(r));
            offset += p.cols();
        }
    }
    Ok(out)
}

/// Splits a gradient by column ranges, inverse of [`concat_cols`].
pub fn split_cols(grad: &Matrix, widths: &[usize]) -> Result<Vec<Matrix>> {
    if widths.iter().sum::<usize>() != grad.cols() {
        return Err(Error::Dimension(format!(
            "widths {widths:?} do not add up to {} columns",
            grad.cols()
        )));
    }
    let mut parts: Vec<Matrix> = widths.iter().map(|&w| Matrix::zeros(grad.rows(), w)).collect();
    for r in 0..grad.rows() {
        let src = grad.row(r);
        let mut offset = 0;
        for p in parts.iter_mut() {
            let w = p.cols();
            p.row_mut(r).copy_from_slice(&src[offset..offset + w]);
            offset += w;
        }
    }
    Ok(parts)
}

/// Mean squared error over a `B×1` column.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<f64> {
    pred.check_same_shape(target, "mse")?;
    if pred.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = pred.data().len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

/// `∂mse/∂pred = 2(pred − target)/B`.
pub fn mse_grad(pred: &Matrix, target: &Matrix) -> Result<Matrix> {
    pred.check_same_shape(target, "mse")?;
    if pred.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = pred.data().len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    Matrix::from_vec(pred.rows(), pred.cols(), data)
}

/// Huber loss scaled to agree with [`mse_loss`] inside `±delta`:
/// `e²` for `|e| ≤ δ`, `δ(2|e| − δ)` beyond, averaged over the batch.
pub fn huber_loss(pred: &Matrix, target: &Matrix, delta: f64) -> Result<f64> {
    pred.check_same_shape(target, "huber")?;
    if pred.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = pred.data().len() as f64;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let e = (p - t).abs();
            if e <= delta {
                e * e
            } else {
                delta * (2.0 * e - delta)
            }
        })
        .sum();
    Ok(total / n)
}

/// Gradient of [`huber_loss`]: `2e/B` inside `±delta`, `2δ·sign(e)/B` outside.
pub fn huber_grad(pred: &Matrix, target: &Matrix, delta: f64) -> Result<Matrix> {
    pred.check_same_shape(target, "huber")?;
    if pred.rows() == 0 {
        return Err(Error::EmptyBatch);
    }
    let n = pred.data().len() as f64;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| 2.0 * (p - t).clamp(-delta, delta) / n)
        .collect();
    Matrix::from_vec(pred.rows(), pred.cols(), data)
}

/// Training objective on scaled targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Loss {
    Mse,
    Huber { delta: f64 },
}

impl Loss {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Loss::Mse => Ok(()),
            Loss::Huber { delta } if delta > 0.0 && delta.is_finite() => Ok(()),
            Loss::Huber { delta } => Err(Error::Config(format!("Huber delta {delta} must be positive"))),
        }
    }

    pub fn value(&self, pred: &Matrix, target: &Matrix) -> Result<f64> {
        match *self {
            Loss::Mse => mse_loss(pred, target),
            Loss::Huber { delta } => huber_loss(pred, target, delta),
        }
    }

    pub fn grad(&self, pred: &Matrix, target: &Matrix) -> Result<Matrix> {
        match *self {
            Loss::Mse => mse_grad(pred, target),
            Loss::Huber { delta } => huber_grad(pred, target, delta),
        }
    }
}
