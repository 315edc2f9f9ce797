//! Dense tensors with reverse-mode gradients for the primitives the staging
//! network uses: dilated 1-D convolution, pairwise max-pooling, dense
//! layers, ReLU, sums, reshapes, and masked softmax cross-entropy.
//!
//! Sequences are stored channel-major, `[batch, channels, length]`.

pub mod init;
pub mod ops;
pub mod optim;
pub mod tape;
pub mod tensor;

pub use ops::{Activation, Padding};
pub use optim::{AdamConfig, GradMap, Param, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::{Real, Tensor};
