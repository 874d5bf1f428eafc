#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod checkpoint;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod gradcheck;
pub mod manipulate;
pub mod model;
pub mod optim;
pub mod pgm;
pub mod runconfig;
pub mod seed;
pub mod tensor;
pub mod trainer;

pub use autodiff::{Gradients, Graph, Var};
pub use error::{Error, Result};
pub use optim::{adam_step, AdamConfig, AdamState, Param};
pub use tensor::Tensor;
