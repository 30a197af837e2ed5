//! Monte Carlo studies of validity, power and local diagnostics on
//! synthetic data.
//!
//! Every trial derives its data seed and its test seed from
//! `(base_seed, trial)` only, so cells that differ in the null model or the
//! signal strength see common random numbers, and results never depend on
//! thread count.

mod config;
mod quadrature;
pub mod stats;
pub mod svg;

use rand::Rng;
use rayon::prelude::*;

pub use config::{parse_config, ExperimentConfig};
pub use quadrature::{gauss_hermite, normal_expectation, true_lpd, true_posterior, true_prior};

use crate::dtest::{local_test, run_test, TestConfig};
use crate::error::{Error, Result};
use crate::regressors::{fit_nw, label_mean};
use crate::rng::RngStream;
use crate::series::SplitSpec;
use crate::synthgen::{generate, SyntheticConfig};
use stats::{mean_sd, quantile_sorted, wilson_interval};

/// One cell of a sweep: the generative parameters and the training size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub gamma: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub n_train: usize,
}

impl Cell {
    pub fn label(&self) -> String {
        format!("gamma={} phi={} phi_prime={} n_train={}", self.gamma, self.phi, self.phi_prime, self.n_train)
    }
}

/// A grid of cells sharing holdout/evaluation sizes, trial count and test
/// configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSweep {
    pub cells: Vec<Cell>,
    pub n_holdout: usize,
    pub n_eval: usize,
    pub delta: f64,
    pub trials: usize,
    pub base_seed: u64,
    pub test: TestConfig,
}

impl ExperimentSweep {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidInput("sweep grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidInput("trials must be at least 1".into()));
        }
        if self.n_eval == 0 || self.cells.iter().any(|c| c.n_train < 2) {
            return Err(Error::InvalidInput("training and evaluation sets must be nonempty".into()));
        }
        self.test.validate()
    }
}

/// Seeds for one trial, independent of the cell.
fn trial_seeds(base_seed: u64, trial: usize) -> (u64, u64) {
    let root = RngStream::new(base_seed, trial as u64);
    (root.substream(0).seed, root.substream(1).seed)
}

/// Generate one trial's data as blocks `t1 | t2 | v` and run the test.
pub fn run_trial(sweep: &ExperimentSweep, cell: &Cell, trial: usize) -> Result<f64> {
    let (data_seed, test_seed) = trial_seeds(sweep.base_seed, trial);
    let n = cell.n_train + sweep.n_holdout + sweep.n_eval;
    let data = generate(&SyntheticConfig {
        n,
        gamma: cell.gamma,
        delta: sweep.delta,
        phi: cell.phi,
        phi_prime: cell.phi_prime,
        seed: data_seed,
    })?;
    let splits = SplitSpec::blocks(cell.n_train, sweep.n_holdout, sweep.n_eval);
    let config = TestConfig { seed: test_seed, ..sweep.test };
    Ok(run_test(&data, &splits, &config)?.p_value)
}

/// p-values of all trials in one cell, in trial order.
pub fn cell_pvalues(sweep: &ExperimentSweep, cell: &Cell) -> Result<Vec<f64>> {
    (0..sweep.trials).into_par_iter().map(|t| run_trial(sweep, cell, t)).collect()
}

/// Empirical-minus-uniform quantiles of a p-value sample.
#[derive(Debug, Clone, PartialEq)]
pub struct QqDeviation {
    pub sorted: Vec<f64>,
    /// `i / (n + 1)` for `i = 1..=n`.
    pub theoretical: Vec<f64>,
    pub deviation: Vec<f64>,
}

pub fn qq_deviation(pvalues: &[f64]) -> QqDeviation {
    let mut sorted = pvalues.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let theoretical: Vec<f64> = (1..=sorted.len()).map(|i| i as f64 / (n + 1.0)).collect();
    let deviation = sorted.iter().zip(&theoretical).map(|(p, q)| p - q).collect();
    QqDeviation { sorted, theoretical, deviation }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityCell {
    pub cell: Cell,
    pub pvalues: Vec<f64>,
    pub qq: QqDeviation,
    /// Fraction of p-values at or below 0.05.
    pub rejection_rate: f64,
}

/// Null-hypothesis study: every cell must have `gamma = 0`.
pub fn run_validity(sweep: &ExperimentSweep) -> Result<Vec<ValidityCell>> {
    sweep.validate()?;
    if let Some(c) = sweep.cells.iter().find(|c| c.gamma != 0.0) {
        return Err(Error::InvalidInput(format!("validity study needs gamma = 0, got {}", c.gamma)));
    }
    sweep
        .cells
        .iter()
        .map(|cell| {
            let pvalues = cell_pvalues(sweep, cell)?;
            let rejection_rate = pvalues.iter().filter(|&&p| p <= 0.05).count() as f64 / pvalues.len() as f64;
            Ok(ValidityCell { cell: *cell, qq: qq_deviation(&pvalues), pvalues, rejection_rate })
        })
        .collect()
}

/// Envelope of QQ deviations of uniform samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub theoretical: Vec<f64>,
    /// Pointwise `level` envelope.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Mean simulated deviation per quantile.
    pub center: Vec<f64>,
    /// Envelope holding an entire simulated curve with probability `level`,
    /// made of pointwise quantiles at a common, smaller tail probability.
    pub simultaneous_lower: Vec<f64>,
    pub simultaneous_upper: Vec<f64>,
}

impl ConfidenceBand {
    pub fn contains_pointwise(&self, deviation: &[f64]) -> bool {
        deviation.iter().zip(self.lower.iter().zip(&self.upper)).all(|(d, (lo, hi))| lo <= d && d <= hi)
    }

    pub fn contains_simultaneous(&self, deviation: &[f64]) -> bool {
        deviation
            .iter()
            .zip(self.simultaneous_lower.iter().zip(&self.simultaneous_upper))
            .all(|(d, (lo, hi))| lo <= d && d <= hi)
    }

    /// Fraction of points outside the pointwise band.
    pub fn outside_fraction(&self, deviation: &[f64]) -> f64 {
        let out = deviation
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(d, (lo, hi))| d < lo || d > hi)
            .count();
        out as f64 / deviation.len() as f64
    }

    pub fn max_half_width(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (u - l)).fold(0.0, f64::max)
    }
}

/// Simulate `sims` samples of `trials` uniforms and summarize the QQ
/// deviations per quantile.
pub fn mc_confidence_band(trials: usize, sims: usize, level: f64, rng: RngStream) -> Result<ConfidenceBand> {
    simulated_band(trials, sims, level, rng, None)
}

/// Like [`mc_confidence_band`], for Monte Carlo p-values from `replicates`
/// replicates. Under the null such p-values are uniform on
/// `{1, ..., B + 1} / (B + 1)` rather than on `(0, 1)`, which matters at the
/// smallest quantiles.
pub fn mc_pvalue_band(
    trials: usize,
    sims: usize,
    level: f64,
    replicates: usize,
    rng: RngStream,
) -> Result<ConfidenceBand> {
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be at least 1".into()));
    }
    simulated_band(trials, sims, level, rng, Some(replicates + 1))
}

fn simulated_band(
    trials: usize,
    sims: usize,
    level: f64,
    rng: RngStream,
    lattice: Option<usize>,
) -> Result<ConfidenceBand> {
    if trials == 0 || sims < 2 || !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "band needs trials >= 1, sims >= 2 and level in (0, 1); got {trials}, {sims}, {level}"
        )));
    }
    let theoretical: Vec<f64> = (1..=trials).map(|i| i as f64 / (trials as f64 + 1.0)).collect();
    // rows: simulations; one stream per simulation keeps it order-free
    let curves: Vec<Vec<f64>> = (0..sims as u64)
        .into_par_iter()
        .map(|s| {
            let mut g = rng.substream(s).generator();
            let mut u: Vec<f64> = match lattice {
                None => (0..trials).map(|_| g.random::<f64>()).collect(),
                Some(m) => (0..trials).map(|_| g.random_range(1..=m) as f64 / m as f64).collect(),
            };
            u.sort_by(f64::total_cmp);
            u.iter().zip(&theoretical).map(|(a, b)| a - b).collect()
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|j| {
            let mut col: Vec<f64> = curves.iter().map(|c| c[j]).collect();
            col.sort_by(f64::total_cmp);
            col
        })
        .collect();
    let tail = (1.0 - level) / 2.0;
    let envelope = |t: f64| -> (Vec<f64>, Vec<f64>) {
        columns.iter().map(|c| (quantile_sorted(c, t), quantile_sorted(c, 1.0 - t))).unzip()
    };
    let (lower, upper) = envelope(tail);
    let center = columns.iter().map(|c| c.iter().sum::<f64>() / sims as f64).collect();

    // largest common tail probability whose envelope covers `level` of the curves
    let coverage = |lo: &[f64], hi: &[f64]| -> f64 {
        let inside = curves
            .par_iter()
            .filter(|c| c.iter().zip(lo.iter().zip(hi)).all(|(d, (l, h))| l <= d && d <= h))
            .count();
        inside as f64 / sims as f64
    };
    let (mut a, mut b) = (0.0, tail);
    for _ in 0..30 {
        let mid = 0.5 * (a + b);
        let (lo, hi) = envelope(mid);
        if coverage(&lo, &hi) >= level {
            a = mid;
        } else {
            b = mid;
        }
    }
    let (simultaneous_lower, simultaneous_upper) = envelope(a);
    Ok(ConfidenceBand { theoretical, lower, upper, center, simultaneous_lower, simultaneous_upper })
}

/// Rejection fraction of one cell with its 95% Wilson interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRow {
    pub cell: Cell,
    pub trials: usize,
    pub rejections: usize,
    pub power: f64,
    pub ci: (f64, f64),
}

pub fn run_power(sweep: &ExperimentSweep, alpha: f64) -> Result<Vec<PowerRow>> {
    sweep.validate()?;
    sweep
        .cells
        .iter()
        .map(|cell| {
            let p = cell_pvalues(sweep, cell)?;
            let rejections = p.iter().filter(|&&v| v <= alpha).count();
            Ok(PowerRow {
                cell: *cell,
                trials: p.len(),
                rejections,
                power: rejections as f64 / p.len() as f64,
                ci: wilson_interval(rejections, p.len()),
            })
        })
        .collect()
}

/// Local-diagnostic study configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdStudy {
    pub gamma: f64,
    pub delta: f64,
    pub phi: f64,
    pub phi_prime: f64,
    pub n_train: Vec<usize>,
    pub s_grid: Vec<f64>,
    pub trials: usize,
    pub base_seed: u64,
}

impl LpdStudy {
    pub fn default_grid() -> Vec<f64> {
        (0..41).map(|i| -2.0 + 0.1 * i as f64).collect()
    }
}

/// Mean and standard deviation of the estimated LPD curve at one training size.
#[derive(Debug, Clone, PartialEq)]
pub struct LpdCurve {
    pub n_train: usize,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpdRecovery {
    pub s_grid: Vec<f64>,
    pub true_lpd: Vec<f64>,
    pub curves: Vec<LpdCurve>,
}

/// Fit the NW posterior on a fresh series per trial and summarize
/// `m_post(s) - m_prior` across trials at each grid point.
pub fn run_lpd_recovery(study: &LpdStudy) -> Result<LpdRecovery> {
    if !(study.gamma > 0.0 && study.delta > 0.0) {
        return Err(Error::InvalidInput("LPD study needs gamma > 0 and delta > 0".into()));
    }
    if study.trials < 2 || study.n_train.is_empty() || study.s_grid.is_empty() {
        return Err(Error::InvalidInput("LPD study needs >= 2 trials, sizes and a grid".into()));
    }
    let true_prior = true_prior(study.gamma, study.delta);
    let true_lpd = study
        .s_grid
        .iter()
        .map(|&s| true_posterior(s, study.gamma, study.delta) - true_prior)
        .collect();
    let curves = study
        .n_train
        .iter()
        .map(|&n| {
            let runs: Vec<Vec<f64>> = (0..study.trials)
                .into_par_iter()
                .map(|t| {
                    let (seed, _) = trial_seeds(study.base_seed, t);
                    let d = generate(&SyntheticConfig {
                        n,
                        gamma: study.gamma,
                        delta: study.delta,
                        phi: study.phi,
                        phi_prime: study.phi_prime,
                        seed,
                    })?;
                    let fit = fit_nw(d.covariates(), d.labels(), None)?;
                    let prior = label_mean(d.labels());
                    Ok(study.s_grid.iter().map(|&s| fit.predict(s) - prior).collect())
                })
                .collect::<Result<_>>()?;
            let (mean, sd) = (0..study.s_grid.len())
                .map(|j| mean_sd(&runs.iter().map(|r| r[j]).collect::<Vec<_>>()))
                .unzip();
            Ok(LpdCurve { n_train: n, mean, sd })
        })
        .collect::<Result<_>>()?;
    Ok(LpdRecovery { s_grid: study.s_grid.clone(), true_lpd, curves })
}

/// Exact posterior difference at support point `s` of a discrete covariate,
/// computed by Bayes' rule and as a scaled density difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorDifference {
    pub bayes: f64,
    pub scaled: f64,
}

/// `P(Y=1 | s) - pi` two ways: directly, and as
/// `(p(s|1) - p(s|0)) / w(s)` with `w(s) = p(s|1)/(1 - pi) + p(s|0)/pi`.
pub fn oracle_posterior_difference(
    density_one: &[f64],
    density_zero: &[f64],
    prior: f64,
    s: usize,
) -> Result<PosteriorDifference> {
    if density_one.len() != density_zero.len() || s >= density_one.len() {
        return Err(Error::InvalidInput("densities must share a support containing s".into()));
    }
    if !(0.0 < prior && prior < 1.0) {
        return Err(Error::InvalidInput(format!("prior must lie in (0, 1), got {prior}")));
    }
    for d in [density_one, density_zero] {
        if d.iter().any(|&v| v < 0.0) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("densities must be nonnegative and sum to one".into()));
        }
    }
    let (p1, p0) = (density_one[s], density_zero[s]);
    let joint_one = prior * p1;
    let marginal = joint_one + (1.0 - prior) * p0;
    if marginal <= 0.0 {
        return Err(Error::InvalidInput(format!("zero total density at support point {s}")));
    }
    let bayes = joint_one / marginal - prior;
    let w = p1 / (1.0 - prior) + p0 / prior;
    let scaled = (p1 - p0) / w;
    Ok(PosteriorDifference { bayes, scaled })
}

/// Local-test p-values over independent trials of one generative setting.
pub fn local_pvalues(
    sweep: &ExperimentSweep,
    cell: &Cell,
    center: f64,
    epsilon: f64,
) -> Result<Vec<f64>> {
    (0..sweep.trials)
        .into_par_iter()
        .map(|t| {
            let (data_seed, test_seed) = trial_seeds(sweep.base_seed, t);
            let n = cell.n_train + sweep.n_holdout + sweep.n_eval;
            let data = generate(&SyntheticConfig {
                n,
                gamma: cell.gamma,
                delta: sweep.delta,
                phi: cell.phi,
                phi_prime: cell.phi_prime,
                seed: data_seed,
            })?;
            let splits = SplitSpec::blocks(cell.n_train, sweep.n_holdout, sweep.n_eval);
            let config = TestConfig { seed: test_seed, ..sweep.test };
            Ok(local_test(&data, &splits, center, epsilon, &config)?.p_value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_density(g: &mut impl Rng, m: usize) -> Vec<f64> {
        let w: Vec<f64> = (0..m).map(|_| g.random::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|v| v / total).collect()
    }

    #[test]
    fn posterior_difference_identity() {
        let mut g = RngStream::new(3, 0).generator();
        for _ in 0..100 {
            let m = g.random_range(2..12);
            let (p1, p0) = (random_density(&mut g, m), random_density(&mut g, m));
            let prior = g.random_range(0.05..0.95);
            for s in 0..m {
                let d = oracle_posterior_difference(&p1, &p0, prior, s).unwrap();
                assert!((d.bayes - d.scaled).abs() < 1e-12, "{d:?}");
            }
        }
    }

    #[test]
    fn posterior_difference_examples() {
        let d = oracle_posterior_difference(&[0.2, 0.8], &[0.1, 0.9], 0.5, 0).unwrap();
        assert!((d.bayes - 1.0 / 6.0).abs() < 1e-12);
        assert!((d.scaled - 1.0 / 6.0).abs() < 1e-12);
        let d = oracle_posterior_difference(&[0.3, 0.7], &[0.3, 0.7], 0.4, 1).unwrap();
        assert!(d.bayes.abs() < 1e-12);
        let d = oracle_posterior_difference(&[0.5, 0.5], &[1e-12, 1.0 - 1e-12], 0.5, 0).unwrap();
        assert!((d.bayes - 0.5).abs() < 1e-9);
        assert!(oracle_posterior_difference(&[0.0, 1.0], &[0.0, 1.0], 0.5, 0).is_err());
        assert!(oracle_posterior_difference(&[0.5, 0.5], &[0.5, 0.5], 1.0, 0).is_err());
    }

    #[test]
    fn band_is_centered_and_shrinks() {
        let small = mc_confidence_band(500, 2000, 0.95, RngStream::new(1, 0)).unwrap();
        let large = mc_confidence_band(2000, 2000, 0.95, RngStream::new(1, 0)).unwrap();
        let mean_center = small.center.iter().sum::<f64>() / small.center.len() as f64;
        assert!(mean_center.abs() < 0.005, "{mean_center}");
        assert!(large.max_half_width() < small.max_half_width());
        for i in 0..small.lower.len() {
            assert!(small.simultaneous_lower[i] <= small.lower[i]);
            assert!(small.simultaneous_upper[i] >= small.upper[i]);
        }
    }

    #[test]
    fn band_is_deterministic() {
        let a = mc_confidence_band(100, 300, 0.9, RngStream::new(5, 2)).unwrap();
        let b = mc_confidence_band(100, 300, 0.9, RngStream::new(5, 2)).unwrap();
        assert_eq!(a, b);
        assert!(mc_confidence_band(0, 300, 0.9, RngStream::new(5, 2)).is_err());
    }

    #[test]
    fn pvalue_band_respects_the_lattice() {
        let b = 19;
        let band = mc_pvalue_band(200, 2000, 0.95, b, RngStream::new(2, 0)).unwrap();
        // the smallest p-value is at least 1 / (B + 1)
        assert!(band.lower[0] >= 1.0 / 20.0 - 1.0 / 201.0 - 1e-12);
        let cont = mc_confidence_band(200, 2000, 0.95, RngStream::new(2, 0)).unwrap();
        assert!(cont.upper[0] < band.lower[0]);
        assert!(mc_pvalue_band(200, 100, 0.95, 0, RngStream::new(2, 0)).is_err());
    }

    #[test]
    fn uniform_samples_mostly_inside_simultaneous_band() {
        let band = mc_confidence_band(200, 2000, 0.95, RngStream::new(9, 0)).unwrap();
        let inside = (0..200u64)
            .filter(|&i| {
                let mut g = RngStream::new(10, i).generator();
                let u: Vec<f64> = (0..200).map(|_| g.random::<f64>()).collect();
                band.contains_simultaneous(&qq_deviation(&u).deviation)
            })
            .count();
        // binomial(200, 0.95) rarely falls below 180
        assert!(inside >= 180, "{inside}");
    }

    #[test]
    fn qq_deviation_of_perfect_sample_is_zero() {
        let p: Vec<f64> = (1..=9).rev().map(|i| i as f64 / 10.0).collect();
        let q = qq_deviation(&p);
        assert!(q.deviation.iter().all(|d| d.abs() < 1e-12));
    }

    fn small_sweep(gamma: f64, trials: usize) -> ExperimentSweep {
        ExperimentSweep {
            cells: vec![Cell { gamma, phi: 0.0, phi_prime: 0.0, n_train: 100 }],
            n_holdout: 100,
            n_eval: 100,
            delta: 0.25,
            trials,
            base_seed: 42,
            test: TestConfig { replicates: 49, ..Default::default() },
        }
    }

    #[test]
    fn sweeps_are_reproducible() {
        let s = small_sweep(0.0, 12);
        assert_eq!(run_validity(&s).unwrap(), run_validity(&s).unwrap());
        assert!(run_validity(&small_sweep(0.5, 3)).is_err());
        let rows = run_power(&small_sweep(1.0, 12), 0.05).unwrap();
        assert_eq!(rows[0].trials, 12);
        assert!(rows[0].ci.0 <= rows[0].power && rows[0].power <= rows[0].ci.1);
    }

    #[test]
    fn trial_seeds_ignore_cell() {
        let a = small_sweep(0.0, 4);
        let mut b = a.clone();
        b.cells[0].phi = 0.4;
        b.test.null_model = crate::dtest::NullModel::Permutation;
        assert_eq!(trial_seeds(a.base_seed, 3), trial_seeds(b.base_seed, 3));
        assert_ne!(trial_seeds(1, 0), trial_seeds(1, 1));
    }

    #[test]
    fn lpd_recovery_shapes() {
        let study = LpdStudy {
            gamma: 0.5,
            delta: 0.25,
            phi: 0.0,
            phi_prime: 0.0,
            n_train: vec![200, 800],
            s_grid: LpdStudy::default_grid(),
            trials: 10,
            base_seed: 1,
        };
        let r = run_lpd_recovery(&study).unwrap();
        assert_eq!(r.curves.len(), 2);
        assert_eq!(r.true_lpd.len(), 41);
        assert!(r.true_lpd[20].abs() < 1e-8);
        assert!(run_lpd_recovery(&LpdStudy { gamma: 0.0, ..study }).is_err());
    }
}
