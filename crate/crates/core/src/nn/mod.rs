//! The stacked bidirectional LSTM classifier.
//!
//! Token ids are embedded, passed through `L` bidirectional layers (each
//! layer's input is the per-position concatenation `[→h; ←h]` of the layer
//! below), and the classifier reads `[→h at the last position; ←h at the
//! first position]` of the top layer through one softmax.

mod cell;
mod model;

pub use cell::{
    lstm_cell_forward, run_direction, CellStep, DirectionTrace, LstmCellParams, TENSOR_NAMES,
};
pub use model::{
    backward, backward_into, bilstm_forward, dropout_mask, init_params, BiLayer, ForwardTrace,
    Gradients, LayerTrace, ModelConfig, ModelParams, NUM_CLASSES,
};
