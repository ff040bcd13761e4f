//! Maximum-likelihood estimate of the Cauchy scale with the location fixed at 0.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard added inside the log of the likelihood.
pub const DEFAULT_EPSILON: f64 = 1e-12;

/// Smallest scale ever reported.
pub const GAMMA_FLOOR: f64 = 1e-8;

const GRID_POINTS: usize = 1000;
const GOLDEN_MAX_ITERS: usize = 200;
const LOG_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaEstimate {
    pub gamma: f64,
    pub neg_log_likelihood: f64,
    pub sample_count: usize,
    /// Every sample was zero; `gamma` is [`GAMMA_FLOOR`].
    pub degenerate: bool,
}

/// `-sum log(gamma / (pi (gamma^2 + x^2)) + epsilon)`
pub fn neg_log_likelihood(samples: &[f64], gamma: f64, epsilon: f64) -> f64 {
    let g2 = gamma * gamma;
    -samples
        .iter()
        .map(|x| (gamma / (PI * (g2 + x * x)) + epsilon).ln())
        .sum::<f64>()
}

/// Fits `gamma` by minimizing [`neg_log_likelihood`].
///
/// The search runs on `log gamma` over `[1e-6 s, 10 s]`, `s` being the median
/// absolute sample (the mean absolute sample when more than half are zero):
/// a 1000-point log-spaced scan picks the best cell and golden-section search
/// refines inside its two neighbours.
pub fn estimate_gamma(samples: &[f64], epsilon: f64) -> Result<GammaEstimate> {
    if samples.len() < 2 {
        return Err(Error::invalid(format!(
            "gamma estimation needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }

    let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    if abs[abs.len() - 1] == 0.0 {
        return Ok(GammaEstimate {
            gamma: GAMMA_FLOOR,
            neg_log_likelihood: neg_log_likelihood(samples, GAMMA_FLOOR, epsilon),
            sample_count: samples.len(),
            degenerate: true,
        });
    }
    let mut s = median_sorted(&abs);
    if s == 0.0 {
        s = abs.iter().sum::<f64>() / abs.len() as f64;
    }

    let nll = |log_g: f64| neg_log_likelihood(samples, log_g.exp(), epsilon);
    let lo = (1e-6 * s).ln();
    let hi = (10.0 * s).ln();
    let step = (hi - lo) / (GRID_POINTS - 1) as f64;
    let (best_i, best_v) = (0..GRID_POINTS)
        .map(|i| (i, nll(lo + step * i as f64)))
        .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });

    let a = lo + step * best_i.saturating_sub(1) as f64;
    let b = lo + step * (best_i + 1).min(GRID_POINTS - 1) as f64;
    let (log_g, v) = golden_section(nll, a, b);
    let (log_g, v) = if v <= best_v {
        (log_g, v)
    } else {
        (lo + step * best_i as f64, best_v)
    };

    let gamma = log_g.exp().max(GAMMA_FLOOR);
    Ok(GammaEstimate {
        gamma,
        neg_log_likelihood: if gamma == log_g.exp() {
            v
        } else {
            neg_log_likelihood(samples, gamma, epsilon)
        },
        sample_count: samples.len(),
        degenerate: false,
    })
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Minimizes a unimodal `f` on `[a, b]`, returning `(argmin, min)`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_MAX_ITERS {
        if (b - a).abs() <= LOG_TOL {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}
