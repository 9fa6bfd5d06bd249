//! Dense linear algebra and reverse-mode differentiation.

mod autograd;
mod matrix;
mod ops;

pub use autograd::{Gradients, Graph, ParamId, Params, Var};
pub use matrix::{dot, norm, Matrix};
pub use ops::{
    cosine_similarity, l2_normalize, l2_normalize_rows, log_sum_exp, mean_pool_rows, softmax_rows,
    ZERO_NORM,
};

#[allow(unused_imports)]
pub(crate) use autograd::diag_cross_entropy_value;
