//! Labeled series, index splits and their CSV forms.

use std::io::{Read, Write};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Time-indexed pairs `(s_t, y_t)` with a scalar covariate and a binary label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSeries {
    times: Vec<i64>,
    covariates: Vec<f64>,
    labels: Vec<u8>,
}

impl LabeledSeries {
    pub fn new(times: Vec<i64>, covariates: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if times.len() != covariates.len() || times.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "length mismatch: {} times, {} covariates, {} labels",
                times.len(),
                covariates.len(),
                labels.len()
            )));
        }
        if let Some(row) = labels.iter().position(|&y| y > 1) {
            return Err(Error::NonBinaryLabel { row, value: labels[row].to_string() });
        }
        if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(format!(
                "times not strictly increasing at position {}",
                i + 1
            )));
        }
        Ok(Self { times, covariates, labels })
    }

    /// Series indexed `0..n`.
    pub fn from_pairs(covariates: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        let times = (0..covariates.len() as i64).collect();
        Self::new(times, covariates, labels)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariates
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn covariates_at(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.covariates[i]).collect()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Vec<u8> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }

    /// Split a set of positions into maximal runs of consecutive observations.
    ///
    /// Two members belong to the same run when they are adjacent positions and
    /// their times differ by exactly one unit. `idx` must be sorted.
    pub fn runs(&self, idx: &[usize]) -> Vec<Vec<usize>> {
        let mut runs: Vec<Vec<usize>> = Vec::new();
        for &i in idx {
            match runs.last_mut() {
                Some(run)
                    if *run.last().unwrap() + 1 == i
                        && self.times[i] - self.times[i - 1] == 1 =>
                {
                    run.push(i)
                }
                _ => runs.push(vec![i]),
            }
        }
        runs
    }

    /// Read the `t,s,y` CSV form. Row numbers in errors count the header as row 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "s", "y"] {
            return Err(Error::Parse { row: 1, msg: format!("expected header t,s,y, found {:?}", headers) });
        }
        let (mut times, mut covs, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Parse { row, msg: format!("expected 3 fields, found {}", rec.len()) });
            }
            let t = rec[0]
                .parse::<i64>()
                .map_err(|e| Error::Parse { row, msg: format!("t: {e}") })?;
            let s = rec[1]
                .parse::<f64>()
                .map_err(|e| Error::Parse { row, msg: format!("s: {e}") })?;
            if !s.is_finite() {
                return Err(Error::Parse { row, msg: "s is not finite".into() });
            }
            let y = match &rec[2] {
                "0" => 0,
                "1" => 1,
                other => return Err(Error::NonBinaryLabel { row, value: other.to_string() }),
            };
            times.push(t);
            covs.push(s);
            labels.push(y);
        }
        Self::new(times, covs, labels).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::Parse { row: 0, msg },
            e => e,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,s,y")?;
        for i in 0..self.len() {
            writeln!(w, "{},{},{}", self.times[i], self.covariates[i], self.labels[i])?;
        }
        Ok(())
    }
}

/// Disjoint training (`t1`), label-holdout (`t2`) and evaluation (`v`) positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SplitSpec {
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
    pub v: Vec<usize>,
}

/// How [`split_series`] assigns positions to sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    /// Contiguous blocks in random order.
    #[default]
    Blocks,
    /// Points scattered at random. Only sensible for IID data.
    Interleaved,
}

impl SplitSpec {
    /// Consecutive blocks `t1 | t2 | v` starting at position 0.
    pub fn blocks(n1: usize, n2: usize, nv: usize) -> Self {
        Self {
            t1: (0..n1).collect(),
            t2: (n1..n1 + n2).collect(),
            v: (n1 + n2..n1 + n2 + nv).collect(),
        }
    }

    /// Check range and pairwise disjointness against a series of length `len`.
    pub fn validate(&self, len: usize) -> Result<()> {
        let mut owner = vec![0u8; len];
        for (tag, set) in [(1u8, &self.t1), (2, &self.t2), (3, &self.v)] {
            for &i in set {
                if i >= len {
                    return Err(Error::InvalidInput(format!("split index {i} out of range for length {len}")));
                }
                if owner[i] != 0 {
                    return Err(Error::InvalidInput(format!("split index {i} assigned to two sets")));
                }
                owner[i] = tag;
            }
        }
        Ok(())
    }

    /// Read the `index,set` CSV form where `set` is one of `t1`, `t2`, `v`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut spec = SplitSpec::default();
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let idx = rec
                .get(0)
                .unwrap_or("")
                .parse::<usize>()
                .map_err(|e| Error::Parse { row, msg: format!("index: {e}") })?;
            match rec.get(1) {
                Some("t1") => spec.t1.push(idx),
                Some("t2") => spec.t2.push(idx),
                Some("v") => spec.v.push(idx),
                other => {
                    return Err(Error::Parse { row, msg: format!("unknown set {:?}", other.unwrap_or("")) })
                }
            }
        }
        for set in [&mut spec.t1, &mut spec.t2, &mut spec.v] {
            set.sort_unstable();
        }
        Ok(spec)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "index,set")?;
        for (name, set) in [("t1", &self.t1), ("t2", &self.t2), ("v", &self.v)] {
            for i in set {
                writeln!(w, "{i},{name}")?;
            }
        }
        Ok(())
    }
}

/// Split a series into three disjoint sets with the given size fractions.
///
/// Block sizes are `floor(fraction * n)`; the three blocks are laid out
/// contiguously in an order drawn from `rng`, so the union may leave a tail
/// of unused positions.
pub fn split_series(
    series: &LabeledSeries,
    fractions: [f64; 3],
    mode: SplitMode,
    rng: RngStream,
) -> Result<SplitSpec> {
    let n = series.len();
    if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::InvalidInput(format!("fractions must lie in [0, 1], got {fractions:?}")));
    }
    if fractions.iter().sum::<f64>() > 1.0 + 1e-12 {
        return Err(Error::InvalidInput(format!("fractions sum above 1: {fractions:?}")));
    }
    if n < 3 {
        return Err(Error::TooShort { len: n, reason: "need three nonempty sets".into() });
    }
    // tolerate fractions like 1/3 whose product lands just below an integer
    let sizes: Vec<usize> = fractions.iter().map(|f| (f * n as f64 + 1e-9).floor() as usize).collect();
    if sizes.contains(&0) {
        return Err(Error::TooShort {
            len: n,
            reason: format!("fractions {fractions:?} leave an empty set"),
        });
    }
    let mut g = rng.generator();
    match mode {
        SplitMode::Blocks => {
            let mut order = [0usize, 1, 2];
            order.shuffle(&mut g);
            let mut sets: [Vec<usize>; 3] = Default::default();
            let mut start = 0;
            for &k in &order {
                sets[k] = (start..start + sizes[k]).collect();
                start += sizes[k];
            }
            let [t1, t2, v] = sets;
            Ok(SplitSpec { t1, t2, v })
        }
        SplitMode::Interleaved => {
            let mut pos: Vec<usize> = (0..n).collect();
            pos.shuffle(&mut g);
            let take = |k: usize, off: usize| {
                let mut s = pos[off..off + sizes[k]].to_vec();
                s.sort_unstable();
                s
            };
            let t1 = take(0, 0);
            let t2 = take(1, sizes[0]);
            let v = take(2, sizes[0] + sizes[1]);
            Ok(SplitSpec { t1, t2, v })
        }
    }
}
