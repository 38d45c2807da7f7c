//! Training of mildly overparameterized two-layer ReLU classifiers with
//! scheduled regularizer coefficients, sign-preserving inner descent on the
//! neuron magnitudes, and inactive-neuron perturbation.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeff;
pub mod data;
pub mod driver;
pub mod error;
pub mod gd;
pub mod loss;
pub mod network;
pub mod oracle;
pub mod par;
pub mod perturb;
pub mod rng;

pub use error::{Error, Result};
