//! Dense/LSTM layers, weighted pooling, losses and Adam over packed
//! variable-length sequences.

pub mod adam;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod loss;
pub mod lstm;
pub mod params;
pub mod pooling;
pub mod sequence;
pub mod tensor;

pub use adam::{Adam, AdamConfig};
pub use dense::{Activation, Dense, DenseCache};
pub use dropout::Dropout;
pub use gradcheck::{check_gradients, relative_error, GradReport, REL_FLOOR};
pub use loss::{argmax_rows, cross_entropy, renormalize, sigmoid_ce_grad, sigmoid_head, softmax, softmax_ce_grad};
pub use lstm::{lstm_param_count, Lstm, LstmCache};
pub use params::{Grads, Param, ParamId, ParamStore};
pub use pooling::{pool, AttentionMode, PoolCache, Pooling, PoolingScheme};
pub use sequence::Packed;
pub use tensor::{gemm, sigmoid, Scalar, Tensor2};
