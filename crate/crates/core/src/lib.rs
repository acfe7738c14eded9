//! Learning Riemannian skill manifolds from demonstrations and generating
//! robot motion as geodesics on them.
//!
//! A variational autoencoder is fitted to demonstrated poses (task space,
//! `R^n x S^(D-1)`) or joint configurations (joint space, through a
//! forward-kinematics layer). Its decoder induces a pullback metric on the
//! latent space; geodesics under that metric stay close to the
//! demonstrations. Obstacles reshape the metric through an ambient scaling
//! without retraining.

pub mod cli;
pub mod datasets;
pub mod distributions;
pub mod error;
pub mod geodesic;
pub mod kinematics;
pub mod metric;
pub mod nets;
pub mod numerics;
pub mod vae;

pub use error::{Error, Result};
