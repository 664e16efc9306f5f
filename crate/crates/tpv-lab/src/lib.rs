//! Numerical laboratory for test prediction variance (TPV) diagnostics.
//!
//! TPV is the expected squared change of a trained model's outputs under
//! zero-mean parameter perturbations around a fixed solution; to first
//! order it is Tr(H_eff·C), where H_eff = (1/n)JᵀJ is the second moment of
//! the output-parameter Jacobian and C the perturbation covariance. This
//! crate computes both sides — closed forms from the Jacobian spectrum and
//! empirical perturb-and-retrain Monte Carlo — for four noise mechanisms
//! (label noise, SGD stationary noise, quantization, pruning masks) on
//! small fully-connected ReLU networks, and ships a CLI that reproduces
//! the synthetic stability and correlation experiments at desk scale.

pub mod datagen;
pub mod empirical;
pub mod experiments;
pub mod linalg;
pub mod nn;
pub mod pruning;
pub mod rng;
pub mod sgd_noise;
pub mod theory;
pub mod train;

pub use linalg::{Matrix, PerturbationCovariance};
pub use nn::{MlpConfig, Network, ParamVector};
