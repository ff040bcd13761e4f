//! Independent reference computations used across the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ccsc::csc::{FeatureMaps, FilterBank};
use ccsc::io::load_image;
use ccsc::tensor::{Grid2, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_grid(rng: &mut impl Rng, rows: usize, cols: usize) -> Grid2 {
    Grid2::from_fn(Shape::new(rows, cols), |_, _| rng.random_range(-1.0..1.0))
}

/// Quadruple-loop full convolution straight from the definition.
pub fn naive_conv_full(a: &Grid2, b: &Grid2) -> Grid2 {
    let (ar, ac, br, bc) = (a.rows(), a.cols(), b.rows(), b.cols());
    let mut out = vec![0.0; (ar + br - 1) * (ac + bc - 1)];
    let w = ac + bc - 1;
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i + k) * w + (j + l)] += a.get(i, j) * b.get(k, l);
                }
            }
        }
    }
    Grid2::new(ar + br - 1, w, out).unwrap()
}

pub fn naive_corr_valid(a: &Grid2, b: &Grid2) -> Grid2 {
    let (h, w) = (a.rows() - b.rows() + 1, a.cols() - b.cols() + 1);
    Grid2::from_fn(Shape::new(h, w), |i, j| {
        let mut s = 0.0;
        for k in 0..b.rows() {
            for l in 0..b.cols() {
                s += a.get(i + k, j + l) * b.get(k, l);
            }
        }
        s
    })
}

pub fn naive_forward(filters: &[Grid2], maps: &[Grid2]) -> Grid2 {
    let mut acc: Option<Grid2> = None;
    for (f, z) in filters.iter().zip(maps) {
        let c = naive_conv_full(f, z);
        acc = Some(match acc {
            None => c,
            Some(a) => Grid2::from_fn(a.shape(), |i, j| a.get(i, j) + c.get(i, j)),
        });
    }
    acc.unwrap()
}

pub fn naive_fidelity(y: &Grid2, filters: &[Grid2], maps: &[Grid2]) -> f64 {
    let yh = naive_forward(filters, maps);
    y.values().iter().zip(yh.values()).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn naive_dot(a: &Grid2, b: &Grid2) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

/// Central differences of the fidelity with respect to every map entry and
/// then every filter entry.
pub fn finite_difference_gradients(y: &Grid2, filters: &[Grid2], maps: &[Grid2], h: f64) -> (Vec<Grid2>, Vec<Grid2>) {
    let bump = |grids: &[Grid2], k: usize, idx: usize, d: f64| {
        let mut g = grids.to_vec();
        let mut v = g[k].values().to_vec();
        v[idx] += d;
        g[k] = Grid2::new(g[k].rows(), g[k].cols(), v).unwrap();
        g
    };
    let map_grads = (0..maps.len())
        .map(|k| {
            let vals = (0..maps[k].len())
                .map(|i| {
                    let plus = naive_fidelity(y, filters, &bump(maps, k, i, h));
                    let minus = naive_fidelity(y, filters, &bump(maps, k, i, -h));
                    (plus - minus) / (2.0 * h)
                })
                .collect();
            Grid2::new(maps[k].rows(), maps[k].cols(), vals).unwrap()
        })
        .collect();
    let filter_grads = (0..filters.len())
        .map(|k| {
            let vals = (0..filters[k].len())
                .map(|i| {
                    let plus = naive_fidelity(y, &bump(filters, k, i, h), maps);
                    let minus = naive_fidelity(y, &bump(filters, k, i, -h), maps);
                    (plus - minus) / (2.0 * h)
                })
                .collect();
            Grid2::new(filters[k].rows(), filters[k].cols(), vals).unwrap()
        })
        .collect();
    (map_grads, filter_grads)
}

/// `(z - x)^2 - lambda * ln(gamma / (pi (gamma^2 + z^2)))`, written out
/// from the definition.
pub fn cauchy_prox_objective(z: f64, x: f64, gamma: f64, lambda: f64) -> f64 {
    (z - x).powi(2) - lambda * (gamma / (std::f64::consts::PI * (gamma * gamma + z * z))).ln()
}

/// `objective(a) - objective(b)` without the cancellation of subtracting two
/// nearly equal totals.
fn objective_difference(a: f64, b: f64, x: f64, gamma: f64, lambda: f64) -> f64 {
    (a - b) * (a + b - 2.0 * x) + lambda * ((a - b) * (a + b) / (gamma * gamma + b * b)).ln_1p()
}

/// Global minimizer of the prox objective: a uniform grid over
/// `[-2|x| - 1, 2|x| + 1]` picks the basin, ternary search polishes it.
pub fn prox_cauchy_oracle(x: f64, gamma: f64, lambda: f64) -> f64 {
    let half = 2.0 * x.abs() + 1.0;
    let n = 4000;
    let h = 2.0 * half / n as f64;
    let mut best = -half;
    let mut best_val = f64::INFINITY;
    for i in 0..=n {
        let z = -half + i as f64 * h;
        let v = cauchy_prox_objective(z, x, gamma, lambda);
        if v < best_val {
            best_val = v;
            best = z;
        }
    }
    ternary_min(best - h, best + h, |a, b| objective_difference(a, b, x, gamma, lambda))
}

/// Ternary search on a unimodal function given only signed differences.
pub fn ternary_min(mut lo: f64, mut hi: f64, diff: impl Fn(f64, f64) -> f64) -> f64 {
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if diff(m1, m2) > 0.0 {
            lo = m1;
        } else {
            hi = m2;
        }
        if hi - lo < 1e-15 * (1.0 + lo.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn cubic_residual(z: f64, x: f64, gamma: f64, lambda: f64) -> f64 {
    z * z * z - x * z * z + (gamma * gamma + lambda) * z - gamma * gamma * x
}

/// Seeded standard-Cauchy draws through `tan(pi (u - 1/2))`, scaled by gamma.
pub fn cauchy_draws(gamma: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let u: f64 = r.random_range(f64::EPSILON..1.0);
            gamma * (std::f64::consts::PI * (u - 0.5)).tan()
        })
        .collect()
}

/// Composite Simpson rule.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A known unit-norm 3x3 filter, a 14x14 map with three spikes, and the
/// 16x16 image they produce.
pub struct Synthetic {
    pub filter: Grid2,
    pub map: Grid2,
    pub image: Grid2,
}

pub fn synthetic_instance() -> Synthetic {
    let mut filter = Grid2::from_rows(&[[1.0, 2.0, 1.0], [2.0, 4.0, 2.0], [1.0, 2.0, 1.0]]).unwrap();
    filter.scale(1.0 / filter.norm());
    let mut map = Grid2::zeros(Shape::new(14, 14));
    map.set(2, 3, 5.0);
    map.set(7, 9, -3.0);
    map.set(11, 4, 4.0);
    let image = naive_conv_full(&filter, &map);
    Synthetic { filter, map, image }
}

impl Synthetic {
    pub fn bank(&self) -> FilterBank {
        FilterBank::new(vec![self.filter.clone()]).unwrap()
    }

    pub fn maps(&self) -> FeatureMaps {
        FeatureMaps::new(vec![self.map.clone()]).unwrap()
    }

    /// Cauchy scale fitted on the nonzero pixels.
    pub fn support_gamma(&self) -> f64 {
        let support: Vec<f64> = self.image.values().iter().copied().filter(|v| *v != 0.0).collect();
        ccsc::estimate_gamma(&support, 1e-12).unwrap().gamma
    }
}

pub fn lena_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/lena.png")
}

pub fn lena_crop(size: usize) -> Grid2 {
    load_image(lena_path())
        .unwrap()
        .grid
        .center_crop(Shape::new(size, size))
        .unwrap()
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} (|diff| {} > {tol})",
        (a - b).abs()
    );
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
