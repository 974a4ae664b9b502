//! Minimal tensor network: layer primitives, the assembled ×4
//! super-resolution architecture, ADAM training, gradient verification and
//! weight serialization.

mod adam;
mod gradcheck;
mod layers;
mod network;
mod weights;

pub use adam::{train_step, AdamParams, AdamState};
pub use gradcheck::{finite_difference_check, GradCheckConfig, GradCheckReport};
pub use layers::{
    concat_channels, pixel_shuffle, pixel_unshuffle, relu, relu_backward, split_channels, Conv2d,
    ConvGrads, Padding,
};
pub use network::{BlockKind, ForwardCache, Gradients, Network, NetworkConfig, NetworkOf};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights};
