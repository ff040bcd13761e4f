//! Reconstruction quality and sparsity statistics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::csc::FeatureMaps;
use crate::error::{Error, Result};
use crate::tensor::Grid2;

/// PSNR reported for a perfect reconstruction.
pub const PSNR_CAP: f64 = 99.0;

/// Default `|z|` below which a coefficient counts as near zero.
pub const NEAR_ZERO_TOLERANCE: f64 = 1e-3;

/// `10 log10(peak^2 / mse)`, capped at [`PSNR_CAP`].
pub fn psnr_from_mse(mse: f64, peak: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (peak * peak / mse).log10()).min(PSNR_CAP)
}

pub fn psnr(reference: &Grid2, estimate: &Grid2, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::invalid(format!("psnr peak must be > 0, got {peak}")));
    }
    reference.expect_shape(estimate.shape(), "psnr")?;
    let sse: f64 = reference
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(psnr_from_mse(sse / reference.len() as f64, peak))
}

/// Fractions of coefficients that are exactly nonzero and within `tolerance` of zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    pub nonzero_fraction: f64,
    pub near_zero_fraction: f64,
}

impl Sparsity {
    /// Exact-zero fraction, the complement of `nonzero_fraction`.
    pub fn zero_fraction(&self) -> f64 {
        1.0 - self.nonzero_fraction
    }
}

pub fn sparsity_fractions(maps: &FeatureMaps, tolerance: f64) -> Result<Sparsity> {
    sparsity_of(maps.coefficients(), tolerance)
}

/// [`sparsity_fractions`] pooled over any coefficient stream.
pub fn sparsity_of(values: impl IntoIterator<Item = f64>, tolerance: f64) -> Result<Sparsity> {
    if !(tolerance >= 0.0) {
        return Err(Error::invalid(format!("tolerance must be >= 0, got {tolerance}")));
    }
    let (mut total, mut nonzero, mut near) = (0usize, 0usize, 0usize);
    for v in values {
        total += 1;
        nonzero += usize::from(v != 0.0);
        near += usize::from(v.abs() <= tolerance);
    }
    if total == 0 {
        return Err(Error::invalid("no coefficients"));
    }
    Ok(Sparsity {
        nonzero_fraction: nonzero as f64 / total as f64,
        near_zero_fraction: near as f64 / total as f64,
    })
}

/// Equal-width histogram over `[lo, hi]`; values outside land in the edge bins.
pub fn coefficient_histogram(maps: &FeatureMaps, bins: usize, range: (f64, f64)) -> Result<Vec<(f64, u64)>> {
    histogram_of(maps.coefficients(), bins, range)
}

pub fn histogram_of(
    values: impl IntoIterator<Item = f64>,
    bins: usize,
    (lo, hi): (f64, f64),
) -> Result<Vec<(f64, u64)>> {
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("histogram range [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for v in values {
        let pos = ((v - lo) / width).floor();
        let i = if pos < 0.0 { 0 } else { (pos as usize).min(bins - 1) };
        counts[i] += 1;
    }
    Ok(counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
        .collect())
}

/// Writes `bin_center,count` CSV.
pub fn write_histogram_csv<W: Write>(mut w: W, hist: &[(f64, u64)]) -> std::io::Result<()> {
    writeln!(w, "bin_center,count")?;
    for (c, n) in hist {
        writeln!(w, "{c},{n}")?;
    }
    Ok(())
}

/// Quality and sparsity of one encoded image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub psnr: f64,
    pub sparsity: Sparsity,
    pub tolerance: f64,
    pub histogram: Vec<(f64, u64)>,
}

pub fn evaluate(
    reference: &Grid2,
    reconstruction: &Grid2,
    peak: f64,
    maps: &FeatureMaps,
    tolerance: f64,
    bins: usize,
) -> Result<EvalResult> {
    let lim = maps.coefficients().fold(0.0f64, |m, v| m.max(v.abs()));
    let lim = if lim > 0.0 { lim } else { 1.0 };
    Ok(EvalResult {
        psnr: psnr(reference, reconstruction, peak)?,
        sparsity: sparsity_fractions(maps, tolerance)?,
        tolerance,
        histogram: coefficient_histogram(maps, bins, (-lim, lim))?,
    })
}

/// One `image,psnr,nonzero_frac,near_zero_frac,zero_frac` row per result.
pub fn write_eval_csv<W: Write>(mut w: W, rows: &[(String, EvalResult)]) -> std::io::Result<()> {
    writeln!(w, "image,psnr,nonzero_frac,near_zero_frac,zero_frac")?;
    for (name, r) in rows {
        writeln!(
            w,
            "{name},{},{},{},{}",
            r.psnr,
            r.sparsity.nonzero_fraction,
            r.sparsity.near_zero_fraction,
            r.sparsity.zero_fraction()
        )?;
    }
    Ok(())
}
