//! Fractional-order backpropagation networks.
//!
//! A small multilayer perceptron trained either by classic gradient descent
//! or by fractional-order steepest descent, where every first-order partial
//! is replaced by a truncated Grünwald–Letnikov series in the distance from
//! the parameter to a lower bound.

// `!(x > y)` comparisons deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod frac;
pub mod harness;
pub mod network;
pub mod params;
pub mod sensitivity;
pub mod trainer;

pub use error::{Error, Result};
pub use frac::{frac_binomial, gamma, gl_derivative_numeric, power_term, FractionalOrder, GlGrid};
pub use network::{
    activation_eval, mean_squared_error, squared_error, Activation, Dataset, ForwardTrace, Layer,
    Mlp, ParamId, Sample,
};
pub use params::ParamSet;
pub use sensitivity::{
    backprop_sensitivities, output_sensitivities, sensitivities, SensitivityStack,
};
pub use trainer::{
    adaptive_order, classic_gradient, convergence_check, fractional_partial, order_bounds, train,
    BatchMode, BoundScope, BoundTerm, ConvergenceStatus, OrderBounds, OrderPolicy, ResidualSign,
    RunStatus, TrainMode, TrainOutcome, TrainTrace, Trainable, Trainer, TrainerConfig,
};
