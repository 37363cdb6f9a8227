//! A small dense toolkit: a flat parameter store, LSTM/biLSTM layers with
//! exact backpropagation through time, activations and losses, Adam, and a
//! finite-difference gradient checker. Everything is `f64`.

mod adam;
mod gradcheck;
mod lstm;
mod ops;
mod params;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{grad_check, grad_check_params, GradCheckReport, ParamError, FD_STEP};
pub use lstm::{BiLstm, BiLstmCache, Dense, Lstm, LstmCache};
pub use ops::{
    bce, bce_with_logit, dropout, mse, sigmoid, softmax, softmax_backward, squared_error,
    DropoutMask,
};
pub use params::{Init, ParamId, ParamStore};
