//! Regression-based two-sample tests for dependent labeled sequences.
//!
//! Given a series of covariates `s_t` and binary labels `y_t`, the test asks
//! whether the distribution of `s` differs between `y = 1` and `y = 0` by
//! comparing an estimate of `P(Y = 1 | S = s)` against `P(Y = 1)`. Label
//! dependence is handled by calibrating the statistic against replicates
//! whose labels are drawn from a Markov chain fitted on a holdout label
//! series.
//!
//! Modules:
//! - [`series`]: labeled series, index splits and CSV forms
//! - [`synthgen`]: the logistic generative model with AR(1) dependence
//! - [`regressors`]: class prior and Nadaraya–Watson posterior
//! - [`labelmodel`]: order-k binary Markov chains
//! - [`dtest`]: the global and ball-restricted tests
//! - [`eventlabel`]: rapid intensity change labels and label interpolation
//! - [`experiments`]: Monte Carlo validity, power and diagnostic studies

pub mod dtest;
pub mod error;
pub mod eventlabel;
pub mod experiments;
pub mod labelmodel;
pub mod regressors;
pub mod rng;
pub mod series;
pub mod synthgen;

pub use dtest::{
    local_test, monte_carlo_pvalue, run_test, run_test_with, test_statistic, LocalReport, NullModel, PriorMode,
    RegressorSpec, TestConfig, TestReport,
};
pub use error::{Error, Result};
pub use labelmodel::{fit_markov, sample_labels, InitMode, MarkovLabelModel};
pub use regressors::{estimate_prior, fit_nw, nw_bandwidth, KernelRegressor, NadarayaWatson, PriorEstimate};
pub use rng::RngStream;
pub use series::{split_series, LabeledSeries, SplitMode, SplitSpec};
pub use synthgen::{generate, hard_threshold, simulate_ar1, Setting, SyntheticConfig};
