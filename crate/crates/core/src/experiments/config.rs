//! Plain-text `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored; list values are comma
//! separated. Unknown keys are rejected.

use std::collections::BTreeMap;

use crate::dtest::{NullModel, TestConfig};
use crate::error::{Error, Result};
use crate::synthgen::Setting;

use super::{Cell, ExperimentSweep, LpdStudy};

const KEYS: &[&str] = &[
    "setting", "phi", "phi_prime", "gamma", "n_train", "n_holdout", "n_eval", "delta", "trials", "seed",
    "replicates", "order", "smoothing", "null", "alpha", "sims", "level", "s_min", "s_max", "s_points",
];

/// Parsed configuration with per-study defaults applied on demand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { row: i + 1, msg: format!("expected key = value, got {line:?}") })?;
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse { row: i + 1, msg: format!("unknown key {key:?}") });
        }
        values.insert(key, value.trim().to_string());
    }
    Ok(ExperimentConfig { values })
}

fn parse_one<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::InvalidInput(format!("bad value {v:?} for {key}")))
}

impl ExperimentConfig {
    /// Set or replace a value, as a command-line override would.
    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let key = key.replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!("unknown key {key:?}")));
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            Some(v) => parse_one(key, v),
            None => Ok(default),
        }
    }

    pub fn list<T: std::str::FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>> {
        match self.values.get(key) {
            Some(v) => {
                let items: Vec<T> = v.split(',').map(|x| parse_one(key, x)).collect::<Result<_>>()?;
                if items.is_empty() {
                    return Err(Error::InvalidInput(format!("{key} list is empty")));
                }
                Ok(items)
            }
            None => Ok(default.to_vec()),
        }
    }

    pub fn null_models(&self, default: &[NullModel]) -> Result<Vec<NullModel>> {
        match self.values.get("null") {
            Some(v) => v.split(',').map(|x| x.parse()).collect(),
            None => Ok(default.to_vec()),
        }
    }

    /// `(phi, phi_prime)` pairs: from `setting` if given, else the product of
    /// the `phi` and `phi_prime` lists, else the default settings.
    pub fn dependence_pairs(&self, default: &[Setting]) -> Result<Vec<(f64, f64)>> {
        let explicit = self.values.contains_key("phi") || self.values.contains_key("phi_prime");
        if self.values.contains_key("setting") && explicit {
            return Err(Error::InvalidInput("give either setting or phi/phi_prime, not both".into()));
        }
        if explicit {
            let phis = self.list("phi", &[0.0])?;
            let primes = self.list("phi_prime", &[0.0])?;
            return Ok(phis.iter().flat_map(|&a| primes.iter().map(move |&b| (a, b))).collect());
        }
        let settings: Vec<Setting> = self.list("setting", default)?;
        Ok(settings.iter().map(|s| s.autocorrelations()).collect())
    }

    /// Base test configuration with `replicates`, `order`, `smoothing`.
    pub fn test_config(&self, null_model: NullModel) -> Result<TestConfig> {
        let d = TestConfig::default();
        Ok(TestConfig {
            null_model,
            replicates: self.get("replicates", d.replicates)?,
            markov_order: self.get("order", d.markov_order)?,
            smoothing: self.get("smoothing", d.smoothing)?,
            ..d
        })
    }

    /// Sweep over dependence pairs × gamma × n_train for one null model.
    pub fn sweep(
        &self,
        null_model: NullModel,
        default_settings: &[Setting],
        default_gamma: &[f64],
        default_trials: usize,
    ) -> Result<ExperimentSweep> {
        let pairs = self.dependence_pairs(default_settings)?;
        let gammas = self.list("gamma", default_gamma)?;
        let sizes = self.list("n_train", &[250usize])?;
        let mut cells = Vec::new();
        for &(phi, phi_prime) in &pairs {
            for &gamma in &gammas {
                for &n_train in &sizes {
                    cells.push(Cell { gamma, phi, phi_prime, n_train });
                }
            }
        }
        let sweep = ExperimentSweep {
            cells,
            n_holdout: self.get("n_holdout", 250)?,
            n_eval: self.get("n_eval", 250)?,
            delta: self.get("delta", 0.25)?,
            trials: self.get("trials", default_trials)?,
            base_seed: self.get("seed", 0)?,
            test: self.test_config(null_model)?,
        };
        sweep.validate()?;
        Ok(sweep)
    }

    /// LPD study; the first dependence pair is used.
    pub fn lpd_study(&self) -> Result<LpdStudy> {
        let (phi, phi_prime) = self.dependence_pairs(&[Setting::C])?[0];
        let s_min = self.get("s_min", -2.0)?;
        let s_max = self.get("s_max", 2.0)?;
        let points: usize = self.get("s_points", 41)?;
        if points < 2 || s_max <= s_min {
            return Err(Error::InvalidInput("need s_points >= 2 and s_max > s_min".into()));
        }
        Ok(LpdStudy {
            gamma: self.get("gamma", 0.5)?,
            delta: self.get("delta", 0.25)?,
            phi,
            phi_prime,
            n_train: self.list("n_train", &[250, 1000, 4000])?,
            s_grid: (0..points).map(|i| s_min + (s_max - s_min) * i as f64 / (points - 1) as f64).collect(),
            trials: self.get("trials", 200)?,
            base_seed: self.get("seed", 0)?,
        })
    }
}
