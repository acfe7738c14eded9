//! Feed-forward and radial-basis networks with exact Jacobians, plus the
//! Adam optimiser used to train them.

mod adam;
mod mlp;
mod rbf;

pub use adam::{adam_update, AdamState, TrainConfig};
pub use mlp::{Activation, Layer, Mlp, MlpGrad, MlpTrace};
pub use rbf::{bandwidth_from_centers, RbfNet};
