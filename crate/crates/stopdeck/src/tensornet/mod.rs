//! Minimal neural-network engine: tensors, valid 1-D convolution, dense
//! layers, Adam and momentum updates, a hand-written reverse pass, and a
//! finite-difference gradient checker.

mod checkpoint;
mod gradcheck;
mod net;
mod optim;
mod tensor;

pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, Checkpoint};
pub use gradcheck::{central_difference_grads, grad_check, max_rel_error, GradCheckReport};
pub use net::{Activation, ForwardCache, LayerSpec, Network};
pub use optim::{AdamState, MomentumState, Optimizer};
pub use tensor::Tensor;
