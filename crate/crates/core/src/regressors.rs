//! Class prior and class posterior estimators.
//!
//! The test only ever regresses labels on one fixed set of training
//! covariates and evaluates the fit at one fixed set of query points, while
//! the labels change from replicate to replicate. [`Regressor::plan`] binds
//! the covariates and query points once; [`FitPlan::fit_predict`] then refits
//! for any label vector with the hyperparameters frozen.

use crate::error::{Error, Result};

/// Estimated `P(Y = 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorEstimate {
    pub value: f64,
    pub n: usize,
}

/// Class proportion of `labels`.
pub fn estimate_prior(labels: &[u8]) -> Result<PriorEstimate> {
    if labels.is_empty() {
        return Err(Error::EmptySet("prior needs at least one label"));
    }
    let ones: u64 = labels.iter().map(|&y| y as u64).sum();
    Ok(PriorEstimate { value: ones as f64 / labels.len() as f64, n: labels.len() })
}

pub(crate) fn label_mean(labels: &[u8]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    labels.iter().map(|&y| y as u64).sum::<u64>() as f64 / labels.len() as f64
}

/// `0.75 (1 - u^2)` on `|u| <= 1`, zero elsewhere.
pub fn epanechnikov(u: f64) -> f64 {
    if u.abs() <= 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

/// Rule-of-thumb bandwidth `sd(s) / n^(1/5)` with the `n - 1` standard deviation.
pub fn nw_bandwidth(train_s: &[f64]) -> Result<f64> {
    let n = train_s.len();
    if n < 2 {
        return Err(Error::Bandwidth(format!("need at least 2 covariates, got {n}")));
    }
    let mean = train_s.iter().sum::<f64>() / n as f64;
    let var = train_s.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Bandwidth(format!("covariate standard deviation is {sd}")));
    }
    Ok(sd / (n as f64).powf(0.2))
}

/// A fitted Nadaraya–Watson estimator with an Epanechnikov kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelRegressor {
    train_s: Vec<f64>,
    train_y: Vec<u8>,
    bandwidth: f64,
    fallback: f64,
}

/// Fit on `(train_s, train_y)`. When `bandwidth` is `None` the rule of
/// [`nw_bandwidth`] applies. The fallback prediction is the label mean.
pub fn fit_nw(train_s: &[f64], train_y: &[u8], bandwidth: Option<f64>) -> Result<KernelRegressor> {
    if train_s.len() != train_y.len() {
        return Err(Error::InvalidInput(format!(
            "{} covariates but {} labels",
            train_s.len(),
            train_y.len()
        )));
    }
    if train_s.is_empty() {
        return Err(Error::EmptySet("regressor needs at least one training point"));
    }
    if let Some(i) = train_y.iter().position(|&y| y > 1) {
        return Err(Error::NonBinaryLabel { row: i, value: train_y[i].to_string() });
    }
    let h = match bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Bandwidth(format!("bandwidth must be positive, got {h}"))),
        None => nw_bandwidth(train_s)?,
    };
    Ok(KernelRegressor {
        train_s: train_s.to_vec(),
        train_y: train_y.to_vec(),
        bandwidth: h,
        fallback: label_mean(train_y),
    })
}

impl KernelRegressor {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    /// Prediction at `s`, and whether the fallback was used because no
    /// training point lies within one bandwidth of `s`.
    pub fn predict_checked(&self, s: f64) -> (f64, bool) {
        let (mut num, mut den) = (0.0, 0.0);
        for (&x, &y) in self.train_s.iter().zip(&self.train_y) {
            let k = epanechnikov((s - x) / self.bandwidth);
            if k > 0.0 {
                den += k;
                if y == 1 {
                    num += k;
                }
            }
        }
        if den > 0.0 {
            (num / den, false)
        } else {
            (self.fallback, true)
        }
    }

    pub fn predict(&self, s: f64) -> f64 {
        self.predict_checked(s).0
    }
}

/// Which training points a prediction may depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Locality {
    /// Predictions may use every training point.
    Global,
    /// A prediction at `s` only uses training points within this distance of `s`.
    Radius(f64),
}

/// Predictions of one refit at the planned query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Posteriors {
    pub values: Vec<f64>,
    /// Query points where the estimator had no data and returned its fallback.
    pub fallback_count: usize,
}

/// A posterior estimator `P(Y = 1 | S = s)`.
pub trait Regressor: Sync {
    type Plan: FitPlan;

    /// Bind training covariates and query points, fixing hyperparameters
    /// from the covariates alone.
    fn plan(&self, train_s: &[f64], eval_s: &[f64]) -> Result<Self::Plan>;
}

/// A regressor bound to fixed covariates and query points.
pub trait FitPlan: Sync + Send {
    fn locality(&self) -> Locality;

    /// Fit to `labels` (aligned with the training covariates) and predict at
    /// every query point.
    fn fit_predict(&self, labels: &[u8]) -> Posteriors;
}

/// Nadaraya–Watson with an Epanechnikov kernel.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NadarayaWatson {
    /// Fixed bandwidth; the rule of [`nw_bandwidth`] when `None`.
    pub bandwidth: Option<f64>,
}

/// Kernel weights of each query point against the training covariates.
#[derive(Debug, Clone)]
pub struct NwPlan {
    bandwidth: f64,
    n_train: usize,
    rows: Vec<KernelRow>,
}

#[derive(Debug, Clone)]
struct KernelRow {
    index: Vec<u32>,
    weight: Vec<f64>,
    total: f64,
}

impl NwPlan {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }
}

impl Regressor for NadarayaWatson {
    type Plan = NwPlan;

    fn plan(&self, train_s: &[f64], eval_s: &[f64]) -> Result<NwPlan> {
        if train_s.is_empty() {
            return Err(Error::EmptySet("regressor needs at least one training point"));
        }
        let h = match self.bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => h,
            Some(h) => return Err(Error::Bandwidth(format!("bandwidth must be positive, got {h}"))),
            None => nw_bandwidth(train_s)?,
        };
        let rows = eval_s
            .iter()
            .map(|&s| {
                let mut row = KernelRow { index: Vec::new(), weight: Vec::new(), total: 0.0 };
                for (i, &x) in train_s.iter().enumerate() {
                    let k = epanechnikov((s - x) / h);
                    if k > 0.0 {
                        row.index.push(i as u32);
                        row.weight.push(k);
                        row.total += k;
                    }
                }
                row
            })
            .collect();
        Ok(NwPlan { bandwidth: h, n_train: train_s.len(), rows })
    }
}

impl FitPlan for NwPlan {
    fn locality(&self) -> Locality {
        Locality::Radius(self.bandwidth)
    }

    fn fit_predict(&self, labels: &[u8]) -> Posteriors {
        assert_eq!(labels.len(), self.n_train, "label vector does not match training covariates");
        let fallback = label_mean(labels);
        let mut fallback_count = 0;
        let values = self
            .rows
            .iter()
            .map(|row| {
                if row.total > 0.0 {
                    let mut num = 0.0;
                    for (&i, &w) in row.index.iter().zip(&row.weight) {
                        if labels[i as usize] == 1 {
                            num += w;
                        }
                    }
                    num / row.total
                } else {
                    fallback_count += 1;
                    fallback
                }
            })
            .collect();
        Posteriors { values, fallback_count }
    }
}
