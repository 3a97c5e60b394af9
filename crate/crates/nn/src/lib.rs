//! Minimal dense-tensor toolkit with reverse-mode gradients.
//!
//! Everything is `f64` and row-major. Networks register their weights in a
//! [`ParamStore`], record a forward pass on a [`Tape`], and call
//! [`Tape::backward`] to accumulate gradients before an [`Adam`] step.

pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod layers;
pub mod optim;
pub mod param;
pub mod tape;
pub mod tensor;

pub use checkpoint::{Checkpoint, Section};
pub use error::{NnError, Result};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use layers::{LayerNorm, Linear, Mlp, MultiHeadAttention, TransformerBlock};
pub use optim::Adam;
pub use param::{ParamId, ParamStore, Parameter};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{log_sum_exp, softmax_in_place, Tensor};

/// Mean cross-entropy of raw `logits[b, C]` against class `targets`, without a tape.
pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<f64> {
    let (rows, classes) = logits.dims2();
    if rows != targets.len() {
        return Err(NnError::ShapeMismatch {
            op: "cross_entropy",
            left: logits.shape().to_vec(),
            right: vec![targets.len()],
        });
    }
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        if t >= classes {
            return Err(NnError::TargetOutOfRange { index: t, classes });
        }
        let row = logits.row(r);
        total += log_sum_exp(row) - row[t];
    }
    Ok(total / rows as f64)
}
