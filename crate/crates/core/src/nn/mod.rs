//! A small deterministic dense-network engine in 64-bit floating point.

mod adam;
mod gradcheck;
mod layers;
mod matrix;
mod param;

pub use adam::{adam_step, AdamConfig};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use layers::{
    concat_cols, dense_backward, dense_forward, dense_input_grad, dropout_forward, embedding_backward,
    embedding_lookup, huber_grad, huber_loss, mse_grad, mse_loss, relu, relu_backward, residual_add, residual_backward,
    split_cols, Dense, DropoutMask, DropoutState, Loss,
};
pub(crate) use layers::{dropout_apply, relu_backward_in_place, relu_in_place, validate_rate};
pub use matrix::Matrix;
pub use param::{Parameter, Parameterized};
