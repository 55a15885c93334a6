//! Training laboratory for feedforward networks comparing reinforced SGD
//! against plain SGD, momentum, Nesterov momentum and Adam.

pub mod cli;
pub mod data;
pub mod error;
pub mod experiment;
pub mod matrix;
pub mod network;
pub mod optim;
pub mod rng;
pub mod surface;

pub use error::{Error, IdxError, Result};
pub use matrix::Matrix;
