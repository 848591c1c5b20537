//! Dense feed-forward networks: forward pass, backpropagation, Adam, MSE
//! training and a portable model file.

mod io;
mod layer;
mod loss;
mod network;
mod optim;
mod train;

pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use layer::{Activation, Initializer, LayerConfig, LayerKind};
pub use loss::mse_loss;
pub use network::{init_network, init_network_with, DenseGrad, Gradients, Layer, Network};
pub use optim::{AdamState, OptimizerConfig, OptimizerState, SgdState};
pub use train::{evaluate_mse, predict_frame, train, TrainConfig};

/// Row-major batch of flattened windows (`batch × features`).
pub type Matrix = ndarray::Array2<f64>;
