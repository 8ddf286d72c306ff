//! Inequality analysis of clinical-trial participation relative to disease burden.
//!
//! The crate works on country × disease × year panels of trial participants and
//! DALYs and provides:
//!
//! - [`panel`]: ingestion, validation and aggregation of panels and predictor tables
//! - [`metrics`]: participation-to-burden ratios, specialization, Gini, Lorenz, CIS
//! - [`decomposition`]: Theil decompositions, fixed-effects variance partitioning, trends
//! - [`attribution`]: OLS, hierarchical partitioning and Shapley R² attribution
//! - [`classify`]: residual classification and limiting-factor diagnosis
//! - [`counterfactual`]: national PBR and alignment scenarios
//! - [`network`]: country-factor graphs, Louvain, metric evolution
//! - [`stats`]: bootstrap, permutation and rank tests, contingency tables

pub mod attribution;
pub mod classify;
pub mod counterfactual;
pub mod decomposition;
pub mod error;
pub mod metrics;
pub mod network;
pub mod panel;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
