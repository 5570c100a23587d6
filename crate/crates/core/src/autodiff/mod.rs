//! Minimal dense reverse-mode differentiation engine.

mod gradcheck;
mod matrix;
mod optim;
mod tape;

pub use gradcheck::{grad_check, max_relative_error, relative_error, GradCheck, DEFAULT_EPS, RELATIVE_FLOOR};
pub use matrix::Matrix;
pub use optim::{sgd_step, Adam, AdamConfig, Bound, ParamSet};
pub use tape::{Activation, ElementwiseKind, Reduce, Tape, Var, L2_EPS};


#[cfg(test)]
mod tests;
