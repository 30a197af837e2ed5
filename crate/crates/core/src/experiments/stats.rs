//! Small statistical helpers for summarizing Monte Carlo studies.

/// Two-sided normal quantile for 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes / trials` at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Normal-approximation band `level ± 1.96 sqrt(level (1 - level) / trials)`
/// for the rejection rate of a valid test.
pub fn rejection_band(level: f64, trials: usize) -> (f64, f64) {
    let half = Z95 * (level * (1.0 - level) / trials as f64).sqrt();
    (level - half, level + half)
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1).
/// Returns the statistic `D` and its asymptotic p-value.
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let v = v.clamp(0.0, 1.0);
        d = d.max((i as f64 + 1.0) / n - v).max(v - i as f64 / n);
    }
    let en = n.sqrt();
    (d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d))
}

/// Kolmogorov–Smirnov test of Monte Carlo p-values against the uniform
/// distribution on `{1, ..., m} / m`, where `m` is the replicate count plus
/// one. Both distribution functions are steps on that lattice, so `D` is
/// taken over lattice points only; the continuous Kolmogorov p-value is
/// then conservative.
pub fn ks_uniform_lattice(sample: &[f64], m: usize) -> (f64, f64) {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    let mut below = 0;
    for k in 1..=m {
        let q = k as f64 / m as f64;
        while below < x.len() && x[below] <= q + 1e-12 {
            below += 1;
        }
        d = d.max((below as f64 / n - q).abs());
    }
    let en = n.sqrt();
    (d, kolmogorov_survival((en + 0.12 + 0.11 / en) * d))
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        // small-t form converges fast here
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * t * t)).exp();
        let s: f64 = (1..=20).map(|k| y.powi((2 * k - 1) * (2 * k - 1))).sum();
        return (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (m, 0.0);
    }
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

/// Empirical quantile by linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand::Rng;

    #[test]
    fn band_matches_hand_numbers() {
        let (lo, hi) = rejection_band(0.05, 500);
        assert!((lo - 0.031).abs() < 5e-4 && (hi - 0.069).abs() < 5e-4);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // classic critical values: P(K > 1.3581) = 0.05, P(K > 1.2239) = 0.10
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2239) - 0.10).abs() < 1e-4);
        assert!((kolmogorov_survival(0.8) - 0.5441).abs() < 1e-3);
        // both branches agree at the switch
        let a = kolmogorov_survival(1.18 - 1e-9);
        let b = kolmogorov_survival(1.18 + 1e-9);
        assert!((a - b).abs() < 1e-6);
    }

    #[test]
    fn lattice_ks_accepts_exact_lattice_uniform() {
        let m = 201;
        let mut g = RngStream::new(6, 0).generator();
        let p: Vec<f64> = (0..4000).map(|_| g.random_range(1..=m) as f64 / m as f64).collect();
        let (d_lattice, p_lattice) = ks_uniform_lattice(&p, m);
        let (d_cont, _) = ks_uniform(&p);
        assert!(d_cont > d_lattice);
        assert!(p_lattice > 0.05, "{p_lattice}");
        let shifted: Vec<f64> = p.iter().map(|v| v * 0.9).collect();
        assert!(ks_uniform_lattice(&shifted, m).1 < 1e-6);
    }

    #[test]
    fn ks_detects_shift() {
        let even: Vec<f64> = (0..500).map(|i| (i as f64 + 0.5) / 500.0).collect();
        assert!(ks_uniform(&even).1 > 0.99);
        let squeezed: Vec<f64> = even.iter().map(|v| v * 0.8).collect();
        assert!(ks_uniform(&squeezed).1 < 1e-6);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(50, 1000);
        assert!(lo < 0.05 && hi > 0.05);
        assert!((hi - lo) < 0.03);
    }
}
