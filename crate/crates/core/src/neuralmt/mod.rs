//! Attention encoder-decoder translation model with its own reverse-mode
//! autodiff, training loops and beam search.

mod autodiff;
mod decode;
mod model;
mod optim;
pub(crate) mod tensor;

pub use autodiff::{Graph, NodeId};
pub use decode::{decode, decode_best, DecodeOptions, Hypothesis};
pub use model::{Arch, NmtModel, ARCH_KIND, INIT_RANGE};
pub use optim::{sgd_step, train_batch, Adam, IdPair, OptimizerKind, TrainOptions, CLIP_NORM};
pub use tensor::{Gradients, ParamSet, Real, Tensor};
