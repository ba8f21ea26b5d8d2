//! Risk-aware multitreatment recommendation engine.
//!
//! A continuous dosage (here, a credit-limit increase factor) is discretised
//! into levels. Each level is contrasted with control on the rows where a
//! propensity model says both arms are observed, a CATE estimator is chosen
//! per level by cross-validated, bias-corrected PEHE, and per-customer
//! recommendations are gated by the bootstrap CVaR of the effect estimate and
//! a forward-looking profit check.

pub mod backtest;
pub mod datagen;
pub mod error;
pub mod finance;
pub mod learners;
pub mod matrix;
pub mod metalearners;
pub mod pipeline;
pub mod policy;
pub mod risk;
pub mod rng;
pub mod selection;
#[cfg(test)]
mod testutil;
pub mod treatments;

pub use error::{Error, Result};
pub use matrix::Matrix;
