//! Logistic generative model for dependent labeled series.
//!
//! ```text
//! S_t = U'_t,            U'  ~ AR(1) with coefficient phi_prime
//! p_t = logistic(gamma * H_delta(S_t) + U_t),   U ~ AR(1) with coefficient phi
//! Y_t ~ Bernoulli(p_t)
//! ```
//!
//! Both AR(1) processes have unit marginal variance and start from their
//! stationary law. `phi = phi_prime = 0` gives IID pairs (setting A),
//! `phi = 0 < phi_prime` autocorrelated covariates with conditionally
//! independent labels (setting B), and both positive gives setting C.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::series::LabeledSeries;

/// Parameters of the generative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub n: usize,
    pub gamma: f64,
    pub delta: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub seed: u64,
}

/// The three dependence settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Setting {
    A,
    B,
    C,
}

impl Setting {
    /// `(phi, phi_prime)` at the default strength of 0.8.
    pub fn autocorrelations(self) -> (f64, f64) {
        match self {
            Setting::A => (0.0, 0.0),
            Setting::B => (0.0, 0.8),
            Setting::C => (0.8, 0.8),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::A => "A",
            Setting::B => "B",
            Setting::C => "C",
        }
    }
}

impl std::str::FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Setting::A),
            "B" => Ok(Setting::B),
            "C" => Ok(Setting::C),
            _ => Err(Error::InvalidInput(format!("unknown setting {s:?}"))),
        }
    }
}

impl SyntheticConfig {
    pub const DEFAULT_DELTA: f64 = 0.25;

    pub fn for_setting(setting: Setting, n: usize, gamma: f64, seed: u64) -> Self {
        let (phi, phi_prime) = setting.autocorrelations();
        Self { n, gamma, delta: Self::DEFAULT_DELTA, phi, phi_prime, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidInput(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidInput(format!("delta must be >= 0, got {}", self.delta)));
        }
        for (name, v) in [("phi", self.phi), ("phi_prime", self.phi_prime)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidInput(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `H_delta(s)`: zero inside the open band `(-delta, delta)`, identity outside.
pub fn hard_threshold(s: f64, delta: f64) -> f64 {
    if s.abs() < delta {
        0.0
    } else {
        s
    }
}

/// Stationary AR(1): `u_t = phi u_{t-1} + sqrt(1 - phi^2) e_t`, `u_0 ~ N(0, 1)`.
pub fn simulate_ar1<R: Rng + ?Sized>(n: usize, phi: f64, rng: &mut R) -> Vec<f64> {
    let innov = (1.0 - phi * phi).max(0.0).sqrt();
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    let mut u: f64 = rng.sample(StandardNormal);
    out.push(u);
    for _ in 1..n {
        let e: f64 = rng.sample(StandardNormal);
        u = phi * u + innov * e;
        out.push(u);
    }
    out
}

/// Draw a labeled series from the model. Times run `0..n`.
pub fn generate(config: &SyntheticConfig) -> Result<LabeledSeries> {
    config.validate()?;
    let mut rng = RngStream::new(config.seed, 0).generator();
    let s = simulate_ar1(config.n, config.phi_prime, &mut rng);
    let u = simulate_ar1(config.n, config.phi, &mut rng);
    let labels = s
        .iter()
        .zip(&u)
        .map(|(&st, &ut)| {
            let p = logistic(config.gamma * hard_threshold(st, config.delta) + ut);
            u8::from(rng.random::<f64>() < p)
        })
        .collect();
    LabeledSeries::from_pairs(s, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
    }

    fn lag1(x: &[f64]) -> f64 {
        let m = mean(x);
        let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
        let den: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        num / den
    }

    #[test]
    fn threshold_cases() {
        assert_eq!(hard_threshold(0.1, 0.25), 0.0);
        assert_eq!(hard_threshold(0.5, 0.25), 0.5);
        assert_eq!(hard_threshold(-0.3, 0.25), -0.3);
        assert_eq!(hard_threshold(0.25, 0.25), 0.25);
        for x in [-3.0, -1e-9, 0.0, 1e-9, 2.5] {
            assert_eq!(hard_threshold(x, 0.0), x);
        }
    }

    #[test]
    fn white_noise_at_zero_phi() {
        let x = simulate_ar1(100_000, 0.0, &mut RngStream::new(1, 0).generator());
        let v = var(&x);
        assert!((0.97..=1.03).contains(&v), "variance {v}");
        assert!(lag1(&x).abs() < 0.01);
    }

    #[test]
    fn constant_at_unit_phi() {
        let x = simulate_ar1(50, 1.0, &mut RngStream::new(2, 0).generator());
        assert!(x.iter().all(|&v| v == x[0]));
    }

    #[test]
    fn lag_one_autocorrelation() {
        let x = simulate_ar1(100_000, 0.8, &mut RngStream::new(3, 0).generator());
        let r = lag1(&x);
        assert!((0.78..=0.82).contains(&r), "lag-1 {r}");
        let v = var(&x);
        // effective sample size n(1-phi^2)/(1+phi^2) ~ 2.2e4 -> se ~ 0.0095
        assert!((v - 1.0).abs() < 3.0 * 0.0095 * 2.0_f64.sqrt(), "variance {v}");
    }

    #[test]
    fn balanced_labels_without_signal() {
        let cfg = SyntheticConfig { n: 100_000, gamma: 0.0, delta: 0.25, phi: 0.0, phi_prime: 0.0, seed: 11 };
        let d = generate(&cfg).unwrap();
        let p = d.labels().iter().map(|&y| y as f64).sum::<f64>() / cfg.n as f64;
        assert!((0.48..=0.52).contains(&p), "P(Y=1) = {p}");
    }

    #[test]
    fn no_correlation_under_null() {
        for (phi, phi_prime) in [(0.0, 0.0), (0.0, 0.8), (0.8, 0.8), (0.4, 0.0)] {
            let cfg = SyntheticConfig { n: 100_000, gamma: 0.0, delta: 0.25, phi, phi_prime, seed: 5 };
            let d = generate(&cfg).unwrap();
            let y: Vec<f64> = d.labels().iter().map(|&v| v as f64).collect();
            let s = d.covariates();
            let (ms, my) = (mean(s), mean(&y));
            let cov: f64 = s.iter().zip(&y).map(|(a, b)| (a - ms) * (b - my)).sum::<f64>();
            let r = cov / (var(s) * var(&y)).sqrt() / (cfg.n - 1) as f64;
            // independent AR(1) components: var(r) ~ (1 + phi phi')/((1 - phi phi') n)
            let bound = 3.0 * ((1.0 + phi * phi_prime) / (1.0 - phi * phi_prime) / cfg.n as f64).sqrt();
            assert!(r.abs() < bound, "phi={phi} phi'={phi_prime} r={r} bound={bound}");
        }
    }

    #[test]
    fn conditional_frequency_matches_marginal_under_null() {
        let cfg = SyntheticConfig { n: 100_000, gamma: 0.0, delta: 0.25, phi: 0.0, phi_prime: 0.0, seed: 8 };
        let d = generate(&cfg).unwrap();
        let total = d.labels().iter().map(|&y| y as f64).sum::<f64>() / cfg.n as f64;
        for (lo, hi) in [(-10.0, -1.0), (-1.0, 0.0), (0.0, 0.5), (0.5, 10.0)] {
            let ys: Vec<f64> = d
                .covariates()
                .iter()
                .zip(d.labels())
                .filter(|(s, _)| **s >= lo && **s < hi)
                .map(|(_, &y)| y as f64)
                .collect();
            let p = mean(&ys);
            let se = (total * (1.0 - total) / ys.len() as f64).sqrt();
            assert!((p - total).abs() <= 3.0 * se, "bin [{lo},{hi}) p={p} total={total}");
        }
    }

    #[test]
    fn unit_variance_covariate_for_all_settings() {
        for setting in [Setting::A, Setting::B, Setting::C] {
            let d = generate(&SyntheticConfig::for_setting(setting, 100_000, 1.0, 21)).unwrap();
            let (_, phi_p) = setting.autocorrelations();
            let v = var(d.covariates());
            let neff = 100_000.0 * (1.0 - phi_p * phi_p) / (1.0 + phi_p * phi_p);
            assert!((v - 1.0).abs() < 3.0 * (2.0 / neff).sqrt(), "{setting:?} variance {v}");
        }
    }

    #[test]
    fn setting_a_shuffle_invariance() {
        // IID pairs: statistics of the first and second half agree
        let d = generate(&SyntheticConfig::for_setting(Setting::A, 100_000, 0.5, 4)).unwrap();
        let (a, b) = d.covariates().split_at(50_000);
        assert!((mean(a) - mean(b)).abs() < 3.0 * (2.0 / 50_000.0_f64).sqrt());
        assert!(lag1(d.covariates()).abs() < 0.01);
    }

    #[test]
    fn deterministic_csv_round_trip() {
        let cfg = SyntheticConfig { n: 500, gamma: 0.5, delta: 0.25, phi: 0.8, phi_prime: 0.8, seed: 99 };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(LabeledSeries::read_csv(&buf[..]).unwrap(), a);
    }

    #[test]
    fn rejects_invalid_config() {
        let mut cfg = SyntheticConfig::for_setting(Setting::C, 10, 0.5, 1);
        cfg.phi = 1.2;
        assert!(generate(&cfg).is_err());
        cfg.phi = 0.5;
        cfg.n = 0;
        assert!(generate(&cfg).is_err());
    }
}
