//! Neural Power Units and the arithmetic layers they are usually compared
//! against (NAU, NMU, NALU, dense nets), built on a small tape-based
//! reverse-mode autodiff engine.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense matrices and the differentiation tape.
//! - [`units`]: arithmetic layers, chains of layers, initialization and checkpoints.
//! - [`training`]: Adam, L1 schedules, the training loop and summary statistics.
//! - [`data`]: Sobol sampling and the dataset generators for every task family.
//! - [`ode`]: fractional SIR simulation, neural ODE training and equation readout.
//! - [`analysis`]: gradient-norm surfaces, extrapolation heatmaps and Pareto fronts.
//! - [`cli`]: experiment drivers behind the `npu` binary.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod analysis;
pub mod cli;
pub mod data;
mod error;
pub mod ode;
pub mod tensor;
pub mod training;
pub mod units;

pub use error::{Error, Result};
pub use tensor::{Graph, Tensor, TensorError, Var};
