//! Command-line front end: simulate data, run tests, label events and run
//! Monte Carlo studies.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use seqdiff::dtest::{local_test, run_test, NullModel, PriorMode, RegressorSpec, TestConfig};
use seqdiff::eventlabel::{interpolate_labels, label_rapid_events, Direction, IntensitySeries};
use seqdiff::experiments::{
    self, mc_pvalue_band, parse_config, run_lpd_recovery, run_power, run_validity, stats, svg, ExperimentConfig,
};
use seqdiff::labelmodel::InitMode;
use seqdiff::series::{split_series, LabeledSeries, SplitMode, SplitSpec};
use seqdiff::synthgen::{generate, Setting, SyntheticConfig};
use seqdiff::RngStream;

#[derive(Parser, Debug)]
#[command(name = "seqdiff", version, about = "Two-sample tests for dependent labeled sequences")]
struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a labeled series from the logistic AR(1) model.
    Simulate(SimulateArgs),
    /// Test for a difference between the covariate distributions of the two label classes.
    Test(TestArgs),
    /// Label rapid intensification or weakening in an intensity series.
    LabelEvents(LabelArgs),
    /// Run a validity, power or LPD study.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    #[arg(long, default_value_t = SyntheticConfig::DEFAULT_DELTA)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    #[arg(long = "phi-prime", default_value_t = 0.0)]
    phi_prime: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NullArg {
    Bootstrap,
    Permutation,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PriorArg {
    Replicate,
    Observed,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum InitArg {
    Empirical,
    Stationary,
}

#[derive(Args, Debug)]
struct TestArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `index,set` CSV with sets t1, t2, v; contiguous thirds in random order when omitted.
    #[arg(long)]
    splits: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NullArg::Bootstrap)]
    null: NullArg,
    /// Number of replicates.
    #[arg(long = "B", default_value_t = 200)]
    replicates: usize,
    /// Markov chain order.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Laplace smoothing of the transition table.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value_t = InitArg::Empirical)]
    init: InitArg,
    /// Prior the replicate statistics are centered on.
    #[arg(long = "prior", value_enum, default_value_t = PriorArg::Replicate)]
    prior: PriorArg,
    /// Fixed kernel bandwidth; rule of thumb when omitted.
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict to a ball around this covariate value (requires --ball-radius).
    #[arg(long = "ball-center", requires = "ball_radius", allow_negative_numbers = true)]
    ball_center: Option<f64>,
    #[arg(long = "ball-radius", requires = "ball_center")]
    ball_radius: Option<f64>,
    /// Report CSV; standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum DirectionArg {
    Ri,
    Rw,
}

#[derive(Args, Debug)]
struct LabelArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Intensity change per 24 hours.
    #[arg(long, default_value_t = 25.0)]
    threshold: f64,
    #[arg(long, value_enum, default_value_t = DirectionArg::Ri)]
    direction: DirectionArg,
    /// Sub-steps per observation interval in the output (12 for 30 minutes).
    #[arg(long = "fine-steps", default_value_t = 1)]
    fine_steps: usize,
    /// Keep only the stretch between the first observation above and the last
    /// at or above this intensity.
    #[arg(long = "genesis-lysis")]
    genesis_lysis: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Study {
    Validity,
    Power,
    Lpd,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    #[arg(value_enum)]
    study: Study,
    /// Plain-text key = value configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "B")]
    replicates: Option<usize>,
    /// Also write SVG charts.
    #[arg(long)]
    svg: bool,
}

/// Failure with the exit code it maps to.
enum Failure {
    Usage(String),
    Data(String),
}

impl From<seqdiff::Error> for Failure {
    fn from(e: seqdiff::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Test(a) => test(a),
        Command::LabelEvents(a) => label_events(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let config = SyntheticConfig {
        n: a.n,
        gamma: a.gamma,
        delta: a.delta,
        phi: a.phi,
        phi_prime: a.phi_prime,
        seed: a.seed,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let data = generate(&config)?;
    let mut w = output(a.out.as_deref())?;
    data.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn test(a: TestArgs) -> Result<(), Failure> {
    let data = LabeledSeries::read_csv(open(&a.input)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", a.input.display())))?;
    let splits = match &a.splits {
        Some(p) => SplitSpec::read_csv(open(p)?).map_err(|e| Failure::Data(format!("{}: {e}", p.display())))?,
        None => split_series(&data, [1.0 / 3.0; 3], SplitMode::Blocks, RngStream::new(a.seed, u64::MAX))?,
    };
    let config = TestConfig {
        null_model: match a.null {
            NullArg::Bootstrap => NullModel::MarkovBootstrap,
            NullArg::Permutation => NullModel::Permutation,
        },
        replicates: a.replicates,
        markov_order: a.k,
        smoothing: a.alpha,
        init: match a.init {
            InitArg::Empirical => InitMode::EmpiricalKgrams,
            InitArg::Stationary => InitMode::Stationary,
        },
        prior_mode: match a.prior {
            PriorArg::Replicate => PriorMode::PerReplicate,
            PriorArg::Observed => PriorMode::Observed,
        },
        regressor: RegressorSpec::NadarayaWatson { bandwidth: a.bandwidth },
        seed: a.seed,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut w = output(a.report.as_deref())?;
    if let (Some(center), Some(radius)) = (a.ball_center, a.ball_radius) {
        let r = local_test(&data, &splits, center, radius, &config)?;
        writeln!(w, "lambda,p_value,train_in_ball,null_rate")?;
        writeln!(w, "{},{},{},{}", r.lambda, r.p_value, r.train_in_ball, r.null_rate)?;
        writeln!(w, "v_index,s,lpd")?;
        for (i, l) in r.eval_index.iter().zip(&r.lpds) {
            writeln!(w, "{i},{},{l}", data.covariates()[*i])?;
        }
        eprintln!("local test: lambda = {:.6}, p = {:.4}", r.lambda, r.p_value);
    } else {
        let r = run_test(&data, &splits, &config)?;
        r.write_csv(&mut w)?;
        if r.fallback_count > 0 {
            eprintln!("warning: {} evaluation points had no kernel mass; their LPD is 0", r.fallback_count);
        }
        eprintln!("lambda = {:.6}, p = {:.4}", r.lambda, r.p_value);
    }
    w.flush()?;
    Ok(())
}

fn label_events(a: LabelArgs) -> Result<(), Failure> {
    let mut series = IntensitySeries::read_csv(open(&a.input)?)
        .map_err(|e| Failure::Data(format!("{}: {e}", a.input.display())))?;
    if let Some(level) = a.genesis_lysis {
        series = series
            .trim_genesis_lysis(level)
            .ok_or_else(|| Failure::Data(format!("no observation exceeds {level}")))?;
    }
    if a.fine_steps == 0 {
        return Err(Failure::Usage("--fine-steps must be at least 1".into()));
    }
    let direction = match a.direction {
        DirectionArg::Ri => Direction::Ri,
        DirectionArg::Rw => Direction::Rw,
    };
    let labels = label_rapid_events(&series, a.threshold, direction);
    let labels = interpolate_labels(&labels, a.fine_steps)?;
    let mut w = output(a.out.as_deref())?;
    labels.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<(), Failure> {
    let mut config = match &a.config {
        Some(p) => parse_config(&fs::read_to_string(p)?).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => ExperimentConfig::default(),
    };
    let usage = |e: seqdiff::Error| Failure::Usage(e.to_string());
    if let Some(t) = a.trials {
        config.set("trials", t).map_err(usage)?;
    }
    if let Some(s) = a.seed {
        config.set("seed", s).map_err(usage)?;
    }
    if let Some(b) = a.replicates {
        config.set("replicates", b).map_err(usage)?;
    }
    fs::create_dir_all(&a.out)?;
    match a.study {
        Study::Validity => validity_study(&config, &a.out, a.svg),
        Study::Power => power_study(&config, &a.out, a.svg),
        Study::Lpd => lpd_study(&config, &a.out, a.svg),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn validity_study(config: &ExperimentConfig, out: &Path, charts: bool) -> Result<(), Failure> {
    let usage = |e: seqdiff::Error| Failure::Usage(e.to_string());
    let nulls = config
        .null_models(&[NullModel::Permutation, NullModel::MarkovBootstrap])
        .map_err(usage)?;
    let sims: usize = config.get("sims", 10_000).map_err(usage)?;
    let level: f64 = config.get("level", 0.95).map_err(usage)?;
    let seed: u64 = config.get("seed", 0).map_err(usage)?;

    let mut pv = create(out, "validity_pvalues.csv")?;
    let mut qq = create(out, "validity_qq.csv")?;
    let mut summary = create(out, "validity_summary.csv")?;
    writeln!(pv, "null,phi,phi_prime,trial,p_value")?;
    writeln!(qq, "null,phi,phi_prime,rank,theoretical,empirical,deviation,band_lower,band_upper")?;
    writeln!(
        summary,
        "null,phi,phi_prime,trials,rejection_rate,band_low,band_high,ks_d,ks_p,within_pointwise,within_simultaneous"
    )?;
    let mut band = None;
    for null in nulls {
        let sweep = config
            .sweep(null, &[Setting::A, Setting::B, Setting::C], &[0.0], 500)
            .map_err(usage)?;
        let band = match &band {
            Some(b) => b,
            None => {
                let b = mc_pvalue_band(sweep.trials, sims, level, sweep.test.replicates, RngStream::new(seed, 0xba4d))?;
                let mut f = create(out, "validity_band.csv")?;
                writeln!(f, "rank,theoretical,lower,upper,simultaneous_lower,simultaneous_upper")?;
                for i in 0..b.theoretical.len() {
                    writeln!(
                        f,
                        "{},{},{},{},{},{}",
                        i + 1,
                        b.theoretical[i],
                        b.lower[i],
                        b.upper[i],
                        b.simultaneous_lower[i],
                        b.simultaneous_upper[i]
                    )?;
                }
                band.insert(b)
            }
        };
        let cells = run_validity(&sweep)?;
        let (lo, hi) = stats::rejection_band(0.05, sweep.trials);
        let mut curves = Vec::new();
        for c in &cells {
            let (phi, pp) = (c.cell.phi, c.cell.phi_prime);
            for (t, p) in c.pvalues.iter().enumerate() {
                writeln!(pv, "{},{phi},{pp},{t},{p}", null.name())?;
            }
            for i in 0..c.qq.sorted.len() {
                writeln!(
                    qq,
                    "{},{phi},{pp},{},{},{},{},{},{}",
                    null.name(),
                    i + 1,
                    c.qq.theoretical[i],
                    c.qq.sorted[i],
                    c.qq.deviation[i],
                    band.lower[i],
                    band.upper[i]
                )?;
            }
            let (d, ks_p) = stats::ks_uniform_lattice(&c.pvalues, sweep.test.replicates + 1);
            writeln!(
                summary,
                "{},{phi},{pp},{},{},{lo},{hi},{d},{ks_p},{},{}",
                null.name(),
                c.pvalues.len(),
                c.rejection_rate,
                band.contains_pointwise(&c.qq.deviation),
                band.contains_simultaneous(&c.qq.deviation)
            )?;
            eprintln!("{} phi={phi} phi'={pp}: rejection rate {:.3}", null.name(), c.rejection_rate);
            curves.push((format!("phi={phi} phi'={pp}"), c.qq.theoretical.clone(), c.qq.deviation.clone()));
        }
        if charts {
            let mut series: Vec<svg::Series> = vec![
                svg::Series { name: "band low", x: &band.theoretical, y: &band.lower, scatter: false },
                svg::Series { name: "band high", x: &band.theoretical, y: &band.upper, scatter: false },
            ];
            series.extend(curves.iter().map(|(n, x, y)| svg::Series { name: n, x, y, scatter: false }));
            let doc = svg::render(&format!("QQ deviation, {} null", null.name()), "uniform quantile", "deviation", &series);
            fs::write(out.join(format!("validity_{}.svg", null.name())), doc)?;
        }
    }
    pv.flush()?;
    qq.flush()?;
    summary.flush()?;
    Ok(())
}

fn power_study(config: &ExperimentConfig, out: &Path, charts: bool) -> Result<(), Failure> {
    let usage = |e: seqdiff::Error| Failure::Usage(e.to_string());
    let nulls = config.null_models(&[NullModel::MarkovBootstrap]).map_err(usage)?;
    let alpha: f64 = config.get("alpha", 0.05).map_err(usage)?;
    let mut f = create(out, "power.csv")?;
    writeln!(f, "null,gamma,phi,phi_prime,n_train,trials,rejections,power,ci_low,ci_high")?;
    let mut lines = Vec::new();
    for null in nulls {
        let sweep = config
            .sweep(null, &[Setting::C], &[0.0, 0.25, 0.5, 0.75, 1.0], 1000)
            .map_err(usage)?;
        let rows = run_power(&sweep, alpha)?;
        for r in &rows {
            let c = r.cell;
            writeln!(
                f,
                "{},{},{},{},{},{},{},{},{},{}",
                null.name(),
                c.gamma,
                c.phi,
                c.phi_prime,
                c.n_train,
                r.trials,
                r.rejections,
                r.power,
                r.ci.0,
                r.ci.1
            )?;
            eprintln!("{} {}: power {:.3}", null.name(), c.label(), r.power);
        }
        let x: Vec<f64> = rows.iter().map(|r| r.cell.gamma).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.power).collect();
        lines.push((null.name().to_string(), x, y));
    }
    f.flush()?;
    if charts {
        let series: Vec<svg::Series> =
            lines.iter().map(|(n, x, y)| svg::Series { name: n, x, y, scatter: true }).collect();
        fs::write(out.join("power.svg"), svg::render("Power", "gamma", "rejection rate", &series))?;
    }
    Ok(())
}

fn lpd_study(config: &ExperimentConfig, out: &Path, charts: bool) -> Result<(), Failure> {
    let study = config.lpd_study().map_err(|e| Failure::Usage(e.to_string()))?;
    let rec = run_lpd_recovery(&study)?;
    let mut f = create(out, "lpd.csv")?;
    writeln!(f, "n_train,s,true_lpd,mean,sd")?;
    for c in &rec.curves {
        for (j, s) in rec.s_grid.iter().enumerate() {
            writeln!(f, "{},{s},{},{},{}", c.n_train, rec.true_lpd[j], c.mean[j], c.sd[j])?;
        }
    }
    f.flush()?;
    if charts {
        let names: Vec<String> = rec.curves.iter().map(|c| format!("mean, n={}", c.n_train)).collect();
        let mut series = vec![svg::Series { name: "true", x: &rec.s_grid, y: &rec.true_lpd, scatter: false }];
        series.extend(
            rec.curves
                .iter()
                .zip(&names)
                .map(|(c, n)| svg::Series { name: n, x: &rec.s_grid, y: &c.mean, scatter: false }),
        );
        fs::write(out.join("lpd.svg"), svg::render("Local posterior difference", "s", "lpd", &series))?;
    }
    let _ = experiments::true_lpd;
    Ok(())
}
