//! Gauss–Hermite quadrature and the exact posterior curves of the
//! generative model.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::synthgen::{hard_threshold, logistic};

/// Nodes and weights for `∫ f(x) exp(-x^2) dx`, by Newton iteration on the
/// Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 3e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule64() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(64))
}

/// `E[f(Z)]` for standard normal `Z` with the 64-node rule.
pub fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = rule64();
    let scale = 2.0f64.sqrt();
    x.iter().zip(w).map(|(&xi, &wi)| wi * f(scale * xi)).sum::<f64>() / PI.sqrt()
}

/// `P(Y = 1 | S = s) = E_U[logistic(gamma H_delta(s) + U)]`, `U ~ N(0, 1)`.
pub fn true_posterior(s: f64, gamma: f64, delta: f64) -> f64 {
    let shift = gamma * hard_threshold(s, delta);
    normal_expectation(|u| logistic(shift + u))
}

/// `P(Y = 1)` with `S ~ N(0, 1)` integrated out.
///
/// The integrand jumps at `|s| = delta`, so the outer integral runs over
/// the two tails with the normal tail density and adds the flat middle.
pub fn true_prior(gamma: f64, delta: f64) -> f64 {
    let base = normal_expectation(logistic);
    if delta <= 0.0 {
        return normal_expectation(|s| true_posterior(s, gamma, 0.0));
    }
    let middle_mass = erf(delta / 2.0f64.sqrt());
    // tails by Gauss–Legendre on t in (0,1) with s = delta + t/(1-t)
    let tail = |sign: f64| -> f64 {
        let (nodes, weights) = gauss_legendre(96);
        nodes
            .iter()
            .zip(&weights)
            .map(|(&t, &w)| {
                let s = delta + t / (1.0 - t);
                let jac = 1.0 / ((1.0 - t) * (1.0 - t));
                let dens = (-0.5 * s * s).exp() / (2.0 * PI).sqrt();
                w * jac * dens * true_posterior(sign * s, gamma, delta)
            })
            .sum()
    };
    middle_mass * base + tail(1.0) + tail(-1.0)
}

/// Exact local posterior difference of the generative model.
pub fn true_lpd(s: f64, gamma: f64, delta: f64) -> f64 {
    true_posterior(s, gamma, delta) - true_prior(gamma, delta)
}

/// Gauss–Legendre nodes and weights on `(0, 1)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp;
        loop {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * pp * pp);
        // map [-1, 1] onto (0, 1)
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

/// Error function, Abramowitz–Stegun 7.1.26 refined by series/continued
/// fraction to double precision.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        // Maclaurin series
        let mut sum = x;
        let mut term = x;
        let x2 = x * x;
        let mut n = 0.0;
        loop {
            n += 1.0;
            term *= -x2 / n;
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // continued fraction for erfc
        let mut f = 0.0;
        for k in (1..60).rev() {
            f = k as f64 / 2.0 / (x + f);
        }
        1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
    }
}
