//! Bootstrap and permutation regression tests for distributional differences.
//!
//! The test compares the estimated class posterior `m_post(s)` with the class
//! prior at a set of evaluation points:
//!
//! ```text
//! lpd(s) = m_post(s) - m_prior,        lambda = sum over s in V of lpd(s)^2
//! ```
//!
//! and calibrates `lambda` against replicates in which the training labels
//! are redrawn under the null, either from an order-k Markov chain fitted on
//! a holdout label series or by permuting the training labels.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::labelmodel::{fit_markov, sample_runs, InitMode, MarkovLabelModel};
use crate::regressors::{estimate_prior, label_mean, FitPlan, Locality, NadarayaWatson, Regressor};
use crate::rng::RngStream;
use crate::series::{LabeledSeries, SplitSpec};

/// How replicate labels are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullModel {
    /// Sample from an order-k Markov chain fitted on the holdout labels.
    MarkovBootstrap,
    /// Shuffle the training labels uniformly.
    Permutation,
}

impl std::str::FromStr for NullModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bootstrap" | "mc_bootstrap" | "mc-bootstrap" => Ok(NullModel::MarkovBootstrap),
            "permutation" => Ok(NullModel::Permutation),
            _ => Err(Error::InvalidInput(format!("unknown null model {s:?}"))),
        }
    }
}

impl NullModel {
    pub fn name(self) -> &'static str {
        match self {
            NullModel::MarkovBootstrap => "bootstrap",
            NullModel::Permutation => "permutation",
        }
    }
}

/// Which class prior the replicate statistics are centered on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PriorMode {
    /// Recompute the class proportion from each replicate's labels, so the
    /// replicate statistic is the same function of the data as the observed one.
    #[default]
    PerReplicate,
    /// Keep the prior estimated from the observed training labels.
    Observed,
}

/// Built-in posterior estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressorSpec {
    NadarayaWatson { bandwidth: Option<f64> },
}

impl Default for RegressorSpec {
    fn default() -> Self {
        RegressorSpec::NadarayaWatson { bandwidth: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestConfig {
    pub null_model: NullModel,
    /// Number of replicates.
    pub replicates: usize,
    pub markov_order: usize,
    pub smoothing: f64,
    pub init: InitMode,
    pub prior_mode: PriorMode,
    pub regressor: RegressorSpec,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            null_model: NullModel::MarkovBootstrap,
            replicates: 200,
            markov_order: 4,
            smoothing: 0.5,
            init: InitMode::EmpiricalKgrams,
            prior_mode: PriorMode::PerReplicate,
            regressor: RegressorSpec::default(),
            seed: 0,
        }
    }
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidInput("replicate count must be at least 1".into()));
        }
        if !(self.smoothing >= 0.0 && self.smoothing.is_finite()) {
            return Err(Error::InvalidInput(format!("smoothing must be >= 0, got {}", self.smoothing)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub lambda: f64,
    pub p_value: f64,
    /// Local posterior differences, aligned with `eval_index`.
    pub lpds: Vec<f64>,
    pub eval_index: Vec<usize>,
    pub eval_s: Vec<f64>,
    pub prior: f64,
    pub replicate_lambdas: Vec<f64>,
    /// Evaluation points with no kernel mass in the observed fit.
    pub fallback_count: usize,
}

impl TestReport {
    /// Header row `lambda,p_value,fallback_count` with its values, then
    /// `v_index,s,lpd` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "lambda,p_value,fallback_count")?;
        writeln!(w, "{},{},{}", self.lambda, self.p_value, self.fallback_count)?;
        writeln!(w, "v_index,s,lpd")?;
        for ((i, s), l) in self.eval_index.iter().zip(&self.eval_s).zip(&self.lpds) {
            writeln!(w, "{i},{s},{l}")?;
        }
        Ok(())
    }
}

/// `lpd(s) = posterior(s) - prior` and `lambda = sum lpd(s)^2`.
pub fn test_statistic(posteriors: &[f64], prior: f64) -> (f64, Vec<f64>) {
    let lpds: Vec<f64> = posteriors.iter().map(|p| p - prior).collect();
    (lpds.iter().map(|l| l * l).sum(), lpds)
}

/// `(1 + #{replicates strictly above lambda}) / (B + 1)`.
pub fn monte_carlo_pvalue(lambda: f64, replicate_lambdas: &[f64]) -> f64 {
    let above = replicate_lambdas.iter().filter(|&&r| r > lambda).count();
    (1 + above) as f64 / (replicate_lambdas.len() + 1) as f64
}

fn check_labels(series: &LabeledSeries) -> Result<()> {
    // LabeledSeries already guarantees binary labels; keep the contract explicit
    if let Some(row) = series.labels().iter().position(|&y| y > 1) {
        return Err(Error::NonBinaryLabel { row, value: series.labels()[row].to_string() });
    }
    Ok(())
}

/// Draws replicate training labels under the null.
enum NullSampler {
    Markov { model: MarkovLabelModel, run_lengths: Vec<usize> },
    Permutation { labels: Vec<u8> },
    Bernoulli { p: f64, n: usize },
}

impl NullSampler {
    fn draw(&self, rng: RngStream) -> Vec<u8> {
        match self {
            NullSampler::Markov { model, run_lengths } => sample_runs(model, run_lengths, rng),
            NullSampler::Permutation { labels } => {
                let mut y = labels.clone();
                y.shuffle(&mut rng.generator());
                y
            }
            NullSampler::Bernoulli { p, n } => {
                use rand::Rng;
                let mut g = rng.generator();
                (0..*n).map(|_| u8::from(g.random::<f64>() < *p)).collect()
            }
        }
    }
}

struct Calibration {
    lambda: f64,
    lpds: Vec<f64>,
    prior: f64,
    fallback_count: usize,
    replicate_lambdas: Vec<f64>,
}

/// Observed statistic and its replicates under `sampler`. Replicate `b`
/// draws from stream `(seed, b)`.
fn calibrate<P: FitPlan>(plan: &P, train_labels: &[u8], sampler: &NullSampler, config: &TestConfig) -> Calibration {
    let prior = label_mean(train_labels);
    let observed = plan.fit_predict(train_labels);
    let (lambda, lpds) = test_statistic(&observed.values, prior);
    let replicate_lambdas = (1..=config.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let labels = sampler.draw(RngStream::new(config.seed, b));
            let centre = match config.prior_mode {
                PriorMode::PerReplicate => label_mean(&labels),
                PriorMode::Observed => prior,
            };
            let post = plan.fit_predict(&labels);
            post.values.iter().map(|p| (p - centre).powi(2)).sum()
        })
        .collect();
    Calibration { lambda, lpds, prior, fallback_count: observed.fallback_count, replicate_lambdas }
}

fn holdout_runs(data: &LabeledSeries, idx: &[usize]) -> Vec<Vec<u8>> {
    data.runs(idx).iter().map(|run| data.labels_at(run)).collect()
}

/// Run the global test with the configured built-in regressor.
pub fn run_test(data: &LabeledSeries, splits: &SplitSpec, config: &TestConfig) -> Result<TestReport> {
    match config.regressor {
        RegressorSpec::NadarayaWatson { bandwidth } => {
            run_test_with(data, splits, config, &NadarayaWatson { bandwidth })
        }
    }
}

/// Run the global test with any regressor.
pub fn run_test_with<R: Regressor>(
    data: &LabeledSeries,
    splits: &SplitSpec,
    config: &TestConfig,
    regressor: &R,
) -> Result<TestReport> {
    config.validate()?;
    check_labels(data)?;
    splits.validate(data.len())?;
    if splits.t1.is_empty() {
        return Err(Error::EmptySet("training set"));
    }
    if splits.v.is_empty() {
        return Err(Error::EmptySet("evaluation set"));
    }
    let train_s = data.covariates_at(&splits.t1);
    let train_y = data.labels_at(&splits.t1);
    let eval_s = data.covariates_at(&splits.v);
    estimate_prior(&train_y)?;

    let sampler = match config.null_model {
        NullModel::MarkovBootstrap => {
            if splits.t2.is_empty() {
                return Err(Error::EmptySet("label holdout set"));
            }
            let runs = holdout_runs(data, &splits.t2);
            let model = fit_markov(&runs, config.markov_order, config.smoothing)?.with_init(config.init);
            let run_lengths = data.runs(&splits.t1).iter().map(Vec::len).collect();
            NullSampler::Markov { model, run_lengths }
        }
        NullModel::Permutation => NullSampler::Permutation { labels: train_y.clone() },
    };

    let plan = regressor.plan(&train_s, &eval_s)?;
    let cal = calibrate(&plan, &train_y, &sampler, config);
    Ok(TestReport {
        lambda: cal.lambda,
        p_value: monte_carlo_pvalue(cal.lambda, &cal.replicate_lambdas),
        lpds: cal.lpds,
        eval_index: splits.v.clone(),
        eval_s,
        prior: cal.prior,
        replicate_lambdas: cal.replicate_lambdas,
        fallback_count: cal.fallback_count,
    })
}

/// Result of the ball-restricted test.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalReport {
    pub lambda: f64,
    pub p_value: f64,
    /// Evaluation points inside the ball.
    pub eval_index: Vec<usize>,
    pub lpds: Vec<f64>,
    /// Training points inside the ball, the only ones the local fit uses.
    pub train_in_ball: usize,
    /// Bernoulli parameter of the null labels, estimated on the holdout.
    pub null_rate: f64,
    pub replicate_lambdas: Vec<f64>,
}

/// Test `P(Y = 1 | S = s') = P(Y = 1)` for all `s'` within `epsilon` of `center`.
///
/// The statistic sums squared LPDs over evaluation points inside the ball.
/// The posterior is fitted only on training points inside the ball, so it
/// depends on labels there alone; null labels for those points are IID
/// Bernoulli with the holdout label mean. The conditional independence of
/// labels given covariates that makes this calibration valid cannot be
/// checked from data and is the caller's responsibility.
pub fn local_test(
    data: &LabeledSeries,
    splits: &SplitSpec,
    center: f64,
    epsilon: f64,
    config: &TestConfig,
) -> Result<LocalReport> {
    config.validate()?;
    check_labels(data)?;
    splits.validate(data.len())?;
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("ball radius must be positive, got {epsilon}")));
    }
    if splits.t1.is_empty() {
        return Err(Error::EmptySet("training set"));
    }
    if splits.t2.is_empty() {
        return Err(Error::EmptySet("label holdout set"));
    }
    let in_ball = |i: &&usize| (data.covariates()[**i] - center).abs() <= epsilon;
    let eval_index: Vec<usize> = splits.v.iter().filter(in_ball).copied().collect();
    if eval_index.is_empty() {
        return Err(Error::EmptyBall { center, epsilon });
    }
    let local_train: Vec<usize> = splits.t1.iter().filter(in_ball).copied().collect();
    if local_train.is_empty() {
        return Err(Error::EmptySet("training points inside the ball"));
    }
    let RegressorSpec::NadarayaWatson { bandwidth } = config.regressor;
    // bandwidth from all training covariates; it does not depend on labels
    let h = match bandwidth {
        Some(h) => h,
        None => crate::regressors::nw_bandwidth(&data.covariates_at(&splits.t1))?,
    };
    let regressor = NadarayaWatson { bandwidth: Some(h) };
    let plan = regressor.plan(&data.covariates_at(&local_train), &data.covariates_at(&eval_index))?;
    debug_assert!(matches!(plan.locality(), Locality::Radius(_)));

    let holdout = fit_markov(&[data.labels_at(&splits.t2)], 0, 0.0)?;
    let null_rate = holdout.prob_one(0);
    let sampler = NullSampler::Bernoulli { p: null_rate, n: local_train.len() };
    let train_y = data.labels_at(&local_train);

    // the prior is part of the statistic: for the observed data it is the
    // training class proportion
    let prior = label_mean(&data.labels_at(&splits.t1));
    let observed = plan.fit_predict(&train_y);
    let (lambda, lpds) = test_statistic(&observed.values, prior);
    let outside_ones: u64 = splits
        .t1
        .iter()
        .filter(|i| (data.covariates()[**i] - center).abs() > epsilon)
        .map(|&i| data.labels()[i] as u64)
        .sum();
    let n1 = splits.t1.len() as f64;
    let replicate_lambdas: Vec<f64> = (1..=config.replicates as u64)
        .into_par_iter()
        .map(|b| {
            let labels = sampler.draw(RngStream::new(config.seed, b));
            let centre = match config.prior_mode {
                PriorMode::PerReplicate => {
                    let inside: u64 = labels.iter().map(|&y| y as u64).sum();
                    // labels outside the ball are not part of the local null;
                    // they keep their observed values
                    (inside + outside_ones) as f64 / n1
                }
                PriorMode::Observed => prior,
            };
            let post = plan.fit_predict(&labels);
            post.values.iter().map(|p| (p - centre).powi(2)).sum()
        })
        .collect();
    let p_value = monte_carlo_pvalue(lambda, &replicate_lambdas);
    Ok(LocalReport {
        lambda,
        p_value,
        eval_index,
        lpds,
        train_in_ball: local_train.len(),
        null_rate,
        replicate_lambdas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, Setting, SyntheticConfig};

    fn data(gamma: f64, setting: Setting, n: usize, seed: u64) -> LabeledSeries {
        generate(&SyntheticConfig::for_setting(setting, n, gamma, seed)).unwrap()
    }

    fn quick(null_model: NullModel, seed: u64) -> TestConfig {
        TestConfig { null_model, replicates: 99, seed, ..Default::default() }
    }

    #[test]
    fn statistic_examples() {
        let (lambda, lpds) = test_statistic(&[0.6, 0.3], 0.5);
        assert!((lambda - 0.05).abs() < 1e-12);
        assert!((lpds[0] - 0.1).abs() < 1e-12 && (lpds[1] + 0.2).abs() < 1e-12);
        let (lambda, _) = test_statistic(&[1.0; 4], 0.5);
        assert!((lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pvalue_examples() {
        let reps: Vec<f64> = (0..99).map(|i| i as f64 / 100.0).collect();
        assert!((monte_carlo_pvalue(5.0, &reps) - 0.01).abs() < 1e-12);
        assert!((monte_carlo_pvalue(-1.0, &reps) - 1.0).abs() < 1e-12);
        // ties do not count as exceedances
        assert!((monte_carlo_pvalue(0.3, &[0.3; 99]) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn pvalue_ignores_replicate_order() {
        let mut reps: Vec<f64> = (0..50).map(|i| ((i * 37) % 50) as f64).collect();
        let p = monte_carlo_pvalue(20.5, &reps);
        reps.reverse();
        assert_eq!(p, monte_carlo_pvalue(20.5, &reps));
        reps.sort_by(f64::total_cmp);
        assert_eq!(p, monte_carlo_pvalue(20.5, &reps));
    }

    #[test]
    fn report_invariants_and_determinism() {
        let d = data(0.5, Setting::C, 600, 4);
        let splits = SplitSpec::blocks(200, 200, 200);
        for null in [NullModel::MarkovBootstrap, NullModel::Permutation] {
            let cfg = quick(null, 11);
            let a = run_test(&d, &splits, &cfg).unwrap();
            let b = run_test(&d, &splits, &cfg).unwrap();
            assert_eq!(a, b);
            assert!(a.lambda >= 0.0);
            assert!(a.replicate_lambdas.iter().all(|&l| l >= 0.0));
            assert!(a.p_value >= 1.0 / 100.0 && a.p_value <= 1.0);
            assert_eq!(a.replicate_lambdas.len(), 99);
            assert_eq!(a.lpds.len(), 200);
            let direct: f64 = a.lpds.iter().map(|l| l * l).sum();
            assert!((direct - a.lambda).abs() < 1e-9);
        }
    }

    #[test]
    fn observed_statistic_does_not_depend_on_null() {
        let d = data(0.5, Setting::B, 450, 5);
        let splits = SplitSpec::blocks(150, 150, 150);
        let a = run_test(&d, &splits, &quick(NullModel::MarkovBootstrap, 1)).unwrap();
        let b = run_test(&d, &splits, &quick(NullModel::Permutation, 2)).unwrap();
        assert_eq!(a.lambda, b.lambda);
        assert_eq!(a.lpds, b.lpds);
    }

    #[test]
    fn strong_signal_is_detected() {
        let d = data(2.0, Setting::A, 1500, 6);
        let splits = SplitSpec::blocks(500, 500, 500);
        let r = run_test(&d, &splits, &quick(NullModel::MarkovBootstrap, 3)).unwrap();
        assert_eq!(r.p_value, 0.01);
    }

    #[test]
    fn error_paths() {
        let d = data(0.0, Setting::A, 90, 1);
        let cfg = quick(NullModel::MarkovBootstrap, 0);
        let no_train = SplitSpec { t1: vec![], t2: (0..45).collect(), v: (45..90).collect() };
        assert!(matches!(run_test(&d, &no_train, &cfg), Err(Error::EmptySet(_))));
        let no_eval = SplitSpec { t1: (0..45).collect(), t2: (45..90).collect(), v: vec![] };
        assert!(matches!(run_test(&d, &no_eval, &cfg), Err(Error::EmptySet(_))));
        let no_holdout = SplitSpec { t1: (0..45).collect(), t2: vec![], v: (45..90).collect() };
        assert!(matches!(run_test(&d, &no_holdout, &cfg), Err(Error::EmptySet(_))));
        // the permutation null needs no holdout
        assert!(run_test(&d, &no_holdout, &quick(NullModel::Permutation, 0)).is_ok());

        let flat = LabeledSeries::new((0..9).collect(), vec![1.0; 9], vec![0, 1, 0, 1, 1, 0, 1, 0, 1]).unwrap();
        let splits = SplitSpec::blocks(3, 3, 3);
        let perm = quick(NullModel::Permutation, 0);
        assert!(matches!(run_test(&flat, &splits, &perm), Err(Error::Bandwidth(_))));
        assert!(matches!(run_test(&flat, &splits, &cfg), Err(Error::TooShort { .. })));

        let bad = TestConfig { replicates: 0, ..cfg };
        assert!(run_test(&d, &SplitSpec::blocks(30, 30, 30), &bad).is_err());
    }

    #[test]
    fn local_test_empty_ball() {
        let d = data(0.5, Setting::A, 300, 2);
        let splits = SplitSpec::blocks(100, 100, 100);
        let cfg = quick(NullModel::MarkovBootstrap, 0);
        let err = local_test(&d, &splits, 50.0, 0.1, &cfg).unwrap_err();
        assert!(matches!(err, Error::EmptyBall { .. }));
        assert!(local_test(&d, &splits, 0.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn local_test_uses_only_ball_points() {
        let d = data(1.0, Setting::A, 600, 8);
        let splits = SplitSpec::blocks(200, 200, 200);
        let cfg = quick(NullModel::MarkovBootstrap, 4);
        let r = local_test(&d, &splits, 0.0, 0.25, &cfg).unwrap();
        assert!(r.eval_index.iter().all(|&i| d.covariates()[i].abs() <= 0.25));
        let inside = splits.t1.iter().filter(|&&i| d.covariates()[i].abs() <= 0.25).count();
        assert_eq!(r.train_in_ball, inside);
        assert_eq!(r.lpds.len(), r.eval_index.len());
    }

    #[test]
    fn local_test_size_and_power() {
        // gamma = 1: no signal for |s| < delta, strong signal beyond it
        let trials = 200;
        let reject = |center: f64, eps: f64| {
            (0..trials)
                .filter(|&t| {
                    let d = data(1.0, Setting::A, 600, 1000 + t as u64);
                    let splits = SplitSpec::blocks(200, 200, 200);
                    let r = local_test(&d, &splits, center, eps, &quick(NullModel::MarkovBootstrap, t as u64)).unwrap();
                    r.p_value <= 0.05
                })
                .count() as f64
                / trials as f64
        };
        let null_rate = reject(0.0, 0.2);
        assert!(null_rate <= 0.05 + 3.0 * (0.05f64 * 0.95 / trials as f64).sqrt(), "{null_rate}");
        let alt_rate = reject(1.0, 0.5);
        assert!(alt_rate > 0.5, "{alt_rate}");
    }
}
