//! AlexNet-style convolutional network: layers, loss, optimizer, checkpoints.

pub mod checkpoint;
pub mod layers;
pub mod loss;
pub mod network;
pub mod optim;
pub mod spec;

pub use checkpoint::{checkpoint_load, checkpoint_save, Checkpoint};
pub use layers::Mode;
pub use loss::{softmax_cross_entropy, softmax_rows};
pub use network::{build_network, ForwardTrace, Gradients, NetworkState};
pub use optim::{sgd_momentum_step, HyperParams};
pub use spec::{Activation, Architecture, ConvSpec, DenseSpec, LayerSpec, LrnSpec, PoolSpec, Scale};
