//! Building blocks shared by the pre-training and fine-tuning networks.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{
    dropout_apply, relu_backward_in_place, relu_in_place, residual_add, Dense, DropoutMask, Matrix, Parameter,
};

/// `dropout(relu(dense(x)))`, with the mask when training.
fn hidden_forward(
    layer: &Dense,
    x: &Matrix,
    rate: f64,
    rng: Option<&mut ChaCha8Rng>,
) -> Result<(Matrix, Option<DropoutMask>)> {
    let mut h = layer.forward(x)?;
    relu_in_place(&mut h);
    let mask = rng.map(|r| dropout_apply(&mut h, rate, r));
    Ok((h, mask))
}

/// Backward of [`hidden_forward`]; `out` is the post-dropout activation, whose
/// sign pattern doubles as the ReLU mask once the dropout mask is applied.
fn hidden_backward(
    layer: &mut Dense,
    x: &Matrix,
    out: &Matrix,
    mask: Option<&DropoutMask>,
    grad_out: &Matrix,
) -> Matrix {
    let mut g = grad_out.clone();
    if let Some(m) = mask {
        m.apply_in_place(&mut g);
    }
    relu_backward_in_place(out, &mut g);
    layer.backward(x, &g)
}

/// Per-ion stack: a projection to the branch width, then residual blocks
/// `x + dropout(relu(dense(x)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub projection: Dense,
    pub blocks: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub(crate) struct BranchTrace {
    /// `states[0]` is the branch input, `states[i + 1]` the output of layer `i`.
    states: Vec<Matrix>,
    /// Post-dropout activation of each layer (for blocks, before the skip).
    acts: Vec<Matrix>,
    masks: Vec<Option<DropoutMask>>,
}

impl BranchTrace {
    pub(crate) fn output(&self) -> &Matrix {
        self.states.last().expect("non-empty trace")
    }
}

impl Branch {
    pub fn new<R: Rng + ?Sized>(input_width: usize, width: usize, blocks: usize, rng: &mut R) -> Self {
        let projection = Dense::new(input_width, width, rng);
        let blocks = (0..blocks).map(|_| Dense::new(width, width, rng)).collect();
        Self { projection, blocks }
    }

    pub fn width(&self) -> usize {
        self.projection.fan_out()
    }

    pub(crate) fn forward(&self, x: Matrix, rate: f64, mut rng: Option<&mut ChaCha8Rng>) -> Result<BranchTrace> {
        let (h, mask) = hidden_forward(&self.projection, &x, rate, rng.as_deref_mut())?;
        let mut trace = BranchTrace {
            states: vec![x, h.clone()],
            acts: vec![h],
            masks: vec![mask],
        };
        for block in &self.blocks {
            let input = trace.output();
            let (d, mask) = hidden_forward(block, input, rate, rng.as_deref_mut())?;
            let out = residual_add(input, &d)?;
            trace.states.push(out);
            trace.acts.push(d);
            trace.masks.push(mask);
        }
        Ok(trace)
    }

    pub fn infer(&self, x: Matrix) -> Result<Matrix> {
        let mut trace = self.forward(x, 0.0, None)?;
        Ok(trace.states.pop().expect("non-empty trace"))
    }

    /// Returns the gradient with respect to the branch input.
    pub(crate) fn backward(&mut self, trace: &BranchTrace, grad_out: &Matrix) -> Matrix {
        let mut g = grad_out.clone();
        for (i, block) in self.blocks.iter_mut().enumerate().rev() {
            let layer = i + 1;
            let through = hidden_backward(
                block,
                &trace.states[layer],
                &trace.acts[layer],
                trace.masks[layer].as_ref(),
                &g,
            );
            for (a, b) in g.data_mut().iter_mut().zip(through.data()) {
                *a += b;
            }
        }
        hidden_backward(
            &mut self.projection,
            &trace.states[0],
            &trace.acts[0],
            trace.masks[0].as_ref(),
            &g,
        )
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.projection.visit(f);
        self.blocks.iter().for_each(|b| b.visit(f));
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.projection.visit_mut(f);
        self.blocks.iter_mut().for_each(|b| b.visit_mut(f));
    }
}

/// Regression head: `dense(width)+ReLU+dropout → dense(width/2)+ReLU+dropout → dense(1)`.
/// The output layer is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub hidden1: Dense,
    pub hidden2: Dense,
    pub output: Dense,
}

#[derive(Debug, Clone)]
pub(crate) struct HeadTrace {
    input: Matrix,
    a1: Matrix,
    m1: Option<DropoutMask>,
    a2: Matrix,
    m2: Option<DropoutMask>,
}

impl Head {
    pub fn new<R: Rng + ?Sized>(input_width: usize, width: usize, rng: &mut R) -> Result<Self> {
        check_head_width(width)?;
        Ok(Self {
            hidden1: Dense::new(input_width, width, rng),
            hidden2: Dense::new(width, width / 2, rng),
            output: Dense::new(width / 2, 1, rng),
        })
    }

    pub fn input_width(&self) -> usize {
        self.hidden1.fan_in()
    }

    pub(crate) fn forward(
        &self,
        x: Matrix,
        rate: f64,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Matrix, HeadTrace)> {
        let (a1, m1) = hidden_forward(&self.hidden1, &x, rate, rng.as_deref_mut())?;
        let (a2, m2) = hidden_forward(&self.hidden2, &a1, rate, rng)?;
        let y = self.output.forward(&a2)?;
        Ok((
            y,
            HeadTrace {
                input: x,
                a1,
                m1,
                a2,
                m2,
            },
        ))
    }

    pub fn infer(&self, x: Matrix) -> Result<Matrix> {
        Ok(self.forward(x, 0.0, None)?.0)
    }

    /// Returns the gradient with respect to the head input.
    pub(crate) fn backward(&mut self, trace: &HeadTrace, grad_out: &Matrix) -> Matrix {
        let g2 = self.output.backward(&trace.a2, grad_out);
        let g1 = hidden_backward(&mut self.hidden2, &trace.a1, &trace.a2, trace.m2.as_ref(), &g2);
        hidden_backward(&mut self.hidden1, &trace.input, &trace.a1, trace.m1.as_ref(), &g1)
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Parameter)) {
        self.hidden1.visit(f);
        self.hidden2.visit(f);
        self.output.visit(f);
    }

    pub fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        self.hidden1.visit_mut(f);
        self.hidden2.visit_mut(f);
        self.output.visit_mut(f);
    }
}

pub(crate) fn check_head_width(width: usize) -> Result<()> {
    if width < 2 || !width.is_multiple_of(2) {
        return Err(Error::Config(format!("head width {width} must be even and at least 2")));
    }
    Ok(())
}
