//! Order-k binary Markov chains for the marginal law of a label process.
//!
//! Histories are encoded as integers whose bits list the last `k` labels,
//! oldest in the most significant position. A history written as the string
//! `"0110"` means `Y_{t-4} = 0, Y_{t-3} = 1, Y_{t-2} = 1, Y_{t-1} = 0`.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Largest supported order.
pub const MAX_ORDER: usize = 20;

/// How the first `k` labels of a sample are drawn before burn-in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitMode {
    /// From the k-grams observed in the fitting data.
    #[default]
    EmpiricalKgrams,
    /// From the stationary distribution of the fitted chain over histories.
    Stationary,
}

/// Fitted transition table `P(Y_t = 1 | history)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovLabelModel {
    order: usize,
    alpha: f64,
    prob_one: Vec<f64>,
    kgram_counts: Vec<u64>,
    init: InitMode,
}

/// Fit from one or more contiguous label runs. Transitions are counted only
/// within a run.
///
/// `P(1 | h) = (count(h -> 1) + alpha) / (count(h -> .) + 2 alpha)`. A history
/// that was never followed by a label gets probability 1/2 when `alpha > 0`;
/// with `alpha = 0` it is also set to 1/2 so that sampling stays defined.
pub fn fit_markov<R: AsRef<[u8]>>(runs: &[R], order: usize, alpha: f64) -> Result<MarkovLabelModel> {
    if order > MAX_ORDER {
        return Err(Error::InvalidInput(format!("order {order} exceeds {MAX_ORDER}")));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("smoothing must be >= 0, got {alpha}")));
    }
    let total: usize = runs.iter().map(|r| r.as_ref().len()).sum();
    if total <= order {
        return Err(Error::TooShort { len: total, reason: format!("order-{order} chain needs more than {order} labels") });
    }
    let states = 1usize << order;
    let mask = states - 1;
    let mut to_one = vec![0u64; states];
    let mut to_any = vec![0u64; states];
    let mut kgram_counts = vec![0u64; states];
    for run in runs {
        let run = run.as_ref();
        if let Some(i) = run.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel { row: i, value: run[i].to_string() });
        }
        if run.len() < order {
            continue;
        }
        let mut h = 0usize;
        for &y in &run[..order] {
            h = ((h << 1) | y as usize) & mask;
        }
        kgram_counts[h] += 1;
        for &y in &run[order..] {
            to_any[h] += 1;
            to_one[h] += y as u64;
            h = ((h << 1) | y as usize) & mask;
            kgram_counts[h] += 1;
        }
    }
    if to_any.iter().all(|&c| c == 0) {
        return Err(Error::TooShort {
            len: total,
            reason: format!("no run is longer than the order {order}"),
        });
    }
    let prob_one = to_one
        .iter()
        .zip(&to_any)
        .map(|(&one, &any)| {
            let den = any as f64 + 2.0 * alpha;
            if den > 0.0 {
                (one as f64 + alpha) / den
            } else {
                0.5
            }
        })
        .collect();
    Ok(MarkovLabelModel { order, alpha, prob_one, kgram_counts, init: InitMode::default() })
}

impl MarkovLabelModel {
    /// A chain with an explicit transition table and uniform k-gram counts.
    pub fn from_table(order: usize, prob_one: Vec<f64>) -> Result<Self> {
        if order > MAX_ORDER || prob_one.len() != 1 << order {
            return Err(Error::InvalidInput(format!(
                "order {order} needs {} probabilities, got {}",
                1usize << order.min(MAX_ORDER),
                prob_one.len()
            )));
        }
        if prob_one.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidInput("transition probabilities must lie in [0, 1]".into()));
        }
        Ok(Self { order, alpha: 0.0, prob_one, kgram_counts: vec![1; 1 << order], init: InitMode::default() })
    }

    pub fn with_init(mut self, init: InitMode) -> Self {
        self.init = init;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn init(&self) -> InitMode {
        self.init
    }

    /// `P(Y_t = 1 | history)` for every encoded history.
    pub fn table(&self) -> &[f64] {
        &self.prob_one
    }

    pub fn prob_one(&self, history: usize) -> f64 {
        self.prob_one[history]
    }

    pub fn kgram_counts(&self) -> &[u64] {
        &self.kgram_counts
    }

    /// Stationary distribution over histories, by power iteration.
    pub fn stationary(&self) -> Vec<f64> {
        let states = self.prob_one.len();
        let mask = states - 1;
        let mut pi = vec![1.0 / states as f64; states];
        if self.order == 0 {
            return pi;
        }
        let mut next = vec![0.0; states];
        for _ in 0..10_000 {
            next.iter_mut().for_each(|v| *v = 0.0);
            for (h, &mass) in pi.iter().enumerate() {
                let p = self.prob_one[h];
                next[(h << 1) & mask] += mass * (1.0 - p);
                next[((h << 1) | 1) & mask] += mass * p;
            }
            // averaging keeps periodic chains from oscillating
            let mut diff = 0.0;
            for (a, b) in pi.iter_mut().zip(&next) {
                let v = 0.5 * (*a + b);
                diff += (v - *a).abs();
                *a = v;
            }
            if diff < 1e-14 {
                break;
            }
        }
        pi
    }

    fn initial_history<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.order == 0 {
            return 0;
        }
        let weights: Vec<f64> = match self.init {
            InitMode::EmpiricalKgrams => self.kgram_counts.iter().map(|&c| c as f64).collect(),
            InitMode::Stationary => self.stationary(),
        };
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return rng.random_range(0..weights.len());
        }
        let mut u = rng.random::<f64>() * total;
        for (h, &w) in weights.iter().enumerate() {
            if u < w {
                return h;
            }
            u -= w;
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Draw `n` labels after an initial k-gram and `100 k` burn-in steps.
    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<u8> {
        let mask = (1usize << self.order) - 1;
        let mut h = self.initial_history(rng);
        let step = |h: &mut usize, rng: &mut R| {
            let y = u8::from(rng.random::<f64>() < self.prob_one[*h]);
            *h = ((*h << 1) | y as usize) & mask;
            y
        };
        for _ in 0..100 * self.order {
            step(&mut h, rng);
        }
        (0..n).map(|_| step(&mut h, rng)).collect()
    }

    /// Serialize as `history_bits,prob_one` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "history_bits,prob_one")?;
        for (h, p) in self.prob_one.iter().enumerate() {
            writeln!(w, "{},{}", history_bits(h, self.order), p)?;
        }
        Ok(())
    }

    /// Read a table written by [`write_csv`](Self::write_csv). The order is
    /// the bit-string length; k-gram counts are set uniform.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut rows: Vec<(String, f64)> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let bits = rec.get(0).unwrap_or("").to_string();
            if !bits.chars().all(|c| c == '0' || c == '1') {
                return Err(Error::Parse { row, msg: format!("bad history {bits:?}") });
            }
            let p = rec
                .get(1)
                .unwrap_or("")
                .parse::<f64>()
                .map_err(|e| Error::Parse { row, msg: format!("prob_one: {e}") })?;
            rows.push((bits, p));
        }
        let order = rows.first().map(|r| r.0.len()).unwrap_or(0);
        if order > MAX_ORDER {
            return Err(Error::Parse { row: 2, msg: format!("order {order} exceeds {MAX_ORDER}") });
        }
        let mut table = vec![f64::NAN; 1 << order];
        for (i, (bits, p)) in rows.iter().enumerate() {
            if bits.len() != order {
                return Err(Error::Parse { row: i + 2, msg: "inconsistent history length".into() });
            }
            let h = if order == 0 { 0 } else { usize::from_str_radix(bits, 2).unwrap() };
            table[h] = *p;
        }
        if table.iter().any(|p| p.is_nan()) {
            return Err(Error::Parse { row: 0, msg: "missing histories".into() });
        }
        Self::from_table(order, table)
    }
}

/// Draw one independent label series per run length, each with its own
/// initialization and burn-in, concatenated in order.
pub fn sample_runs(model: &MarkovLabelModel, run_lengths: &[usize], rng: RngStream) -> Vec<u8> {
    let mut g = rng.generator();
    let mut out = Vec::with_capacity(run_lengths.iter().sum());
    for &len in run_lengths {
        out.extend(model.sample_with(len, &mut g));
    }
    out
}

/// Draw `n` labels from `model` with a fresh generator for `rng`.
pub fn sample_labels(model: &MarkovLabelModel, n: usize, rng: RngStream) -> Vec<u8> {
    model.sample_with(n, &mut rng.generator())
}

pub fn history_bits(h: usize, order: usize) -> String {
    (0..order).rev().map(|b| if (h >> b) & 1 == 1 { '1' } else { '0' }).collect()
}
