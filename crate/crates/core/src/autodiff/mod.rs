//! Reverse-mode autodiff over dense f64 tensors, sized for the small MLPs
//! this project trains. No external math backend; the same kernels serve the
//! taped and no-grad paths.

pub mod checkpoint;
mod mlp;
mod optim;
mod tape;
mod tensor;

pub use mlp::{
    check_finite, finite_diff_input_grad, finite_diff_param_grad, grad_rel_err, mlp_forward,
    Activation, MlpSpec, NamedGrads, ParamStore, Session,
};
pub use optim::{OptKind, Optimizer};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::{
    add_row, layer_norm_rows, matmul, matmul_nt, matmul_tn, mish, mul_row, softplus, Tensor,
};
