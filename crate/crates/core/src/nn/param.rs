use super::matrix::Matrix;

/// A trainable tensor together with its gradient and Adam moment estimates.
///
/// A frozen parameter is never touched by the optimizer, whatever its gradient holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Matrix,
    pub grad: Matrix,
    adam_m: Matrix,
    adam_v: Matrix,
    step_count: u64,
    frozen: bool,
}

impl Parameter {
    pub fn new(value: Matrix) -> Self {
        let (r, c) = value.shape();
        Self {
            value,
            grad: Matrix::zeros(r, c),
            adam_m: Matrix::zeros(r, c),
            adam_v: Matrix::zeros(r, c),
            step_count: 0,
            frozen: false,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(Matrix::zeros(rows, cols))
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.shape()
    }

    pub fn len(&self) -> usize {
        self.value.data().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub(crate) fn moments_mut(&mut self) -> (&mut Matrix, &mut Matrix, &mut Matrix, &Matrix) {
        (&mut self.value, &mut self.adam_m, &mut self.adam_v, &self.grad)
    }

    pub(crate) fn bump_step(&mut self) -> u64 {
        self.step_count += 1;
        self.step_count
    }
}

/// Anything that owns parameters. The visiting order must be stable.
pub trait Parameterized {
    fn visit_params(&self, f: &mut dyn FnMut(&Parameter));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.len());
        n
    }

    fn trainable_param_count(&self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| {
            if !p.is_frozen() {
                n += p.len()
            }
        });
        n
    }

    fn zero_grads(&mut self) {
        self.visit_params_mut(&mut |p| p.zero_grad());
    }

    fn freeze_all(&mut self) {
        self.visit_params_mut(&mut |p| p.freeze());
    }
}
