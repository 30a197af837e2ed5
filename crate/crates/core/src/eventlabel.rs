//! Rapid intensification / weakening labels from 6-hourly intensity series,
//! and interpolation of synoptic labels to a finer time grid.
//!
//! A point is labeled when it falls inside some 24-hour window (five
//! consecutive observations) whose peak exceeds the window's first value by
//! at least the threshold, after the window has been trimmed so that it both
//! starts and ends with a strictly intensifying 6-hour step. Weakening is
//! labeled by running the same procedure on the time-reversed series.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::labelmodel::MarkovLabelModel;
use crate::rng::RngStream;

/// Observations per 24-hour window at synoptic resolution.
const WINDOW: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySeries {
    times: Vec<f64>,
    intensities: Vec<f64>,
}

impl IntensitySeries {
    /// Times must be strictly increasing with a constant step.
    pub fn new(times: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        if times.len() != intensities.len() {
            return Err(Error::InvalidInput(format!(
                "{} times but {} intensities",
                times.len(),
                intensities.len()
            )));
        }
        if times.is_empty() {
            return Err(Error::EmptySet("intensity series"));
        }
        if times.len() >= 2 {
            let step = times[1] - times[0];
            if !(step > 0.0) {
                return Err(Error::IrregularSpacing { row: 1, expected: f64::NAN, found: step });
            }
            for (i, w) in times.windows(2).enumerate() {
                let d = w[1] - w[0];
                if (d - step).abs() > 1e-9 * step.max(1.0) {
                    return Err(Error::IrregularSpacing { row: i + 1, expected: step, found: d });
                }
            }
        }
        Ok(Self { times, intensities })
    }

    /// Series at times `0, 6, 12, ...` hours.
    pub fn synoptic(intensities: Vec<f64>) -> Self {
        let times = (0..intensities.len()).map(|i| 6.0 * i as f64).collect();
        Self { times, intensities }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    /// Spacing between observations; zero for a single observation.
    pub fn step(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// The stretch from the first observation above `threshold` to the last
    /// one at or above it, or `None` when no observation exceeds it.
    pub fn trim_genesis_lysis(&self, threshold: f64) -> Option<Self> {
        let first = self.intensities.iter().position(|&w| w > threshold)?;
        let last = self.intensities.iter().rposition(|&w| w >= threshold)?;
        Some(Self {
            times: self.times[first..=last].to_vec(),
            intensities: self.intensities[first..=last].to_vec(),
        })
    }

    /// Read the `t,w` CSV form.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let (mut times, mut ws) = (Vec::new(), Vec::new());
        for (i, rec) in rdr.records().enumerate() {
            let row = i + 2;
            let rec = rec?;
            let field = |k: usize, name: &str| -> Result<f64> {
                let v: f64 = rec
                    .get(k)
                    .unwrap_or("")
                    .parse()
                    .map_err(|e| Error::Parse { row, msg: format!("{name}: {e}") })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse { row, msg: format!("{name} is not finite") })
                }
            };
            times.push(field(0, "t")?);
            ws.push(field(1, "w")?);
        }
        Self::new(times, ws)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Rapid intensification.
    Ri,
    /// Rapid weakening.
    Rw,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ri" => Ok(Direction::Ri),
            "rw" => Ok(Direction::Rw),
            _ => Err(Error::InvalidInput(format!("unknown direction {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventLabels {
    pub times: Vec<f64>,
    pub labels: Vec<u8>,
    pub direction: Direction,
    /// Intensity change per 24 hours.
    pub threshold: f64,
}

impl EventLabels {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y")?;
        for (t, y) in self.times.iter().zip(&self.labels) {
            writeln!(w, "{t},{y}")?;
        }
        Ok(())
    }
}

/// Intensification labels of `w` (forward time).
fn label_intensification(w: &[f64], threshold: f64) -> Vec<u8> {
    let n = w.len();
    let mut y = vec![0u8; n];
    if n <= WINDOW {
        return y;
    }
    let intensifying: Vec<bool> = w.windows(2).map(|p| p[1] - p[0] > 0.0).collect();
    for t in 0..n - WINDOW {
        let peak = w[t..=t + WINDOW].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if peak - w[t] < threshold {
            continue;
        }
        let mut keep = [true; WINDOW + 1];
        // drop trailing points reached by a non-intensifying step
        let mut h = WINDOW;
        while h >= 1 && !intensifying[t + h - 1] {
            keep[h] = false;
            h -= 1;
        }
        // drop leading points that start a non-intensifying step
        let mut h = 0;
        while h < WINDOW && !intensifying[t + h] {
            keep[h] = false;
            h += 1;
        }
        for (offset, &k) in keep.iter().enumerate() {
            if k {
                y[t + offset] = 1;
            }
        }
    }
    y
}

/// Label every observation inside a trimmed rapid-change window.
pub fn label_rapid_events(series: &IntensitySeries, threshold: f64, direction: Direction) -> EventLabels {
    let labels = match direction {
        Direction::Ri => label_intensification(series.intensities(), threshold),
        Direction::Rw => {
            let reversed: Vec<f64> = series.intensities().iter().rev().copied().collect();
            let mut y = label_intensification(&reversed, threshold);
            y.reverse();
            y
        }
    };
    EventLabels { times: series.times().to_vec(), labels, direction, threshold }
}

/// Refine synoptic labels to `steps_per_interval` sub-steps. A fine point is
/// 1 when it coincides with a synoptic 1 or lies strictly between two
/// adjacent synoptic 1s.
pub fn interpolate_labels(synoptic: &EventLabels, steps_per_interval: usize) -> Result<EventLabels> {
    if steps_per_interval == 0 {
        return Err(Error::InvalidInput("steps per interval must be at least 1".into()));
    }
    let labels = fill_labels(&synoptic.labels, steps_per_interval);
    let mut times = Vec::with_capacity(labels.len());
    for (i, &t) in synoptic.times.iter().enumerate() {
        times.push(t);
        if let Some(&next) = synoptic.times.get(i + 1) {
            for j in 1..steps_per_interval {
                times.push(t + (next - t) * j as f64 / steps_per_interval as f64);
            }
        }
    }
    Ok(EventLabels { times, labels, direction: synoptic.direction, threshold: synoptic.threshold })
}

fn fill_labels(synoptic: &[u8], steps: usize) -> Vec<u8> {
    let mut fine = Vec::with_capacity(synoptic.len().saturating_sub(1) * steps + 1);
    for (i, &y) in synoptic.iter().enumerate() {
        fine.push(y);
        if let Some(&next) = synoptic.get(i + 1) {
            let between = u8::from(y == 1 && next == 1);
            fine.extend(std::iter::repeat_n(between, steps - 1));
        }
    }
    fine
}

/// Every `every`-th label starting at the first, e.g. synoptic labels from
/// a fine-resolution series.
pub fn decimate_labels(labels: &[u8], every: usize) -> Vec<u8> {
    labels.iter().step_by(every.max(1)).copied().collect()
}

/// Draw `n_synoptic` labels from a synoptic-resolution chain and fill them to
/// the fine grid.
pub fn sample_fine_labels(
    model: &MarkovLabelModel,
    n_synoptic: usize,
    steps_per_interval: usize,
    rng: RngStream,
) -> Vec<u8> {
    let synoptic = crate::labelmodel::sample_labels(model, n_synoptic, rng);
    fill_labels(&synoptic, steps_per_interval.max(1))
}
