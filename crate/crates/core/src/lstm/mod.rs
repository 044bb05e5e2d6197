//! Single-hidden-layer LSTM regressor written from scratch: recurrence, BPTT,
//! Adam and the chunked training loop.

mod adam;
mod cell;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use cell::{
    backward, cell_forward, forward_sequence, readout, sequence_loss, CellState, Gradients,
    SequenceOutput, StepCache,
};
pub use model::{gate_init_bound, readout_init_bound, Gate, LstmModel};
pub use train::{predict, train, train_holdout, Holdout, TrainConfig, TrainedModel};
