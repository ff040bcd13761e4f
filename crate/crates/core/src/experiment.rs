//! Seeded multi-run experiments: sampling, training, and the CSV/image
//! artifacts each run leaves behind.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::csc::{reconstruct, train, FeatureMaps, FilterBank, PenaltySpec, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::io::{encode_pgm, load_images, save_checkpoint, stretch, write_atomic, Checkpoint, LoadedImage};
use crate::metrics::{
    evaluate, histogram_of, psnr, sparsity_of, write_eval_csv, write_histogram_csv, NEAR_ZERO_TOLERANCE,
};
use crate::penalty::{prox_curve, write_prox_curve_csv, CauchyParams, PenaltyKind};
use crate::tensor::{Grid2, Shape};

/// Soft-threshold weight used by benchmarks unless overridden.
pub const DEFAULT_IST_LAMBDA: f64 = 2.0;
/// Hard-threshold weight used by benchmarks unless overridden.
pub const DEFAULT_IHT_LAMBDA: f64 = 2.0;

/// Subtracts the mean intensity. No variance normalization.
pub fn preprocess_zero_mean(image: &Grid2) -> (Grid2, f64) {
    let mean = image.sum() / image.len() as f64;
    (image.map(|v| v - mean), mean)
}

/// How many images each run trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleCount {
    All,
    Count(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    /// Label written to the `dataset` column.
    pub name: String,
    /// A single image file, an IDX container or a directory of images.
    pub dataset_path: PathBuf,
    pub sample_count: SampleCount,
    pub runs: usize,
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    pub base_seed: u64,
    /// Optional centered crop applied to every image before centering.
    pub crop: Option<Shape>,
    pub histogram_bins: usize,
}

impl ExperimentSpec {
    pub fn new(name: impl Into<String>, dataset_path: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            name: name.into(),
            dataset_path: dataset_path.into(),
            sample_count: SampleCount::All,
            runs: 1,
            train: TrainConfig::default(),
            output_dir: output_dir.into(),
            base_seed: 0,
            crop: None,
            histogram_bins: 101,
        }
    }
}

/// A centered training image with what is needed to undo the centering.
#[derive(Clone, Debug)]
pub struct PreparedImage {
    pub id: String,
    pub data: Grid2,
    pub mean: f64,
    pub peak: f64,
    pub native_shape: Shape,
}

/// Crops (optionally) and centers loaded images.
pub fn prepare(images: Vec<(String, LoadedImage)>, crop: Option<Shape>) -> Result<Vec<PreparedImage>> {
    images
        .into_iter()
        .map(|(id, img)| {
            let native_shape = img.grid.shape();
            let grid = match crop {
                Some(s) => img.grid.center_crop(s)?,
                None => img.grid,
            };
            let (data, mean) = preprocess_zero_mean(&grid);
            Ok(PreparedImage {
                id,
                data,
                mean,
                peak: img.peak,
                native_shape,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seed: u64,
    /// Mean final PSNR over the run's images.
    pub psnr: f64,
    pub nonzero_fraction: f64,
    pub near_zero_fraction: f64,
    pub gamma_used: Option<f64>,
}

/// Median and quartiles by linear interpolation between order statistics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Quartiles {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            q1: at(0.25),
            median: at(0.5),
            q3: at(0.75),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub dataset: String,
    pub penalty: String,
    pub runs: Vec<RunResult>,
    pub failures: Vec<(usize, String)>,
    pub psnr: Option<Quartiles>,
    pub nonzero_fraction: Option<Quartiles>,
}

impl ExperimentSummary {
    /// `dataset,penalty,run,psnr,nonzero_frac`
    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("dataset,penalty,run,psnr,nonzero_frac\n");
        self.append_aggregate_rows(&mut s);
        s
    }

    pub fn append_aggregate_rows(&self, s: &mut String) {
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                self.dataset, self.penalty, r.run, r.psnr, r.nonzero_fraction
            );
        }
    }

    pub fn summary_header() -> &'static str {
        "dataset,penalty,runs,failed,psnr_mean,psnr_q1,psnr_median,psnr_q3,nonzero_mean,nonzero_q1,nonzero_median,nonzero_q3\n"
    }

    pub fn summary_row(&self) -> String {
        let q = |x: Option<Quartiles>| match x {
            Some(q) => format!("{},{},{},{}", q.mean, q.q1, q.median, q.q3),
            None => "NaN,NaN,NaN,NaN".to_string(),
        };
        format!(
            "{},{},{},{},{},{}\n",
            self.dataset,
            self.penalty,
            self.runs.len(),
            self.failures.len(),
            q(self.psnr),
            q(self.nonzero_fraction)
        )
    }
}

/// Loads `spec.dataset_path` and runs [`run_experiment_on`].
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    let images = prepare(load_images(&spec.dataset_path)?, spec.crop)?;
    run_experiment_on(spec, &images)
}

/// Runs `spec.runs` seeded trainings on `images` and writes every artifact.
///
/// Run `r` uses seed `base_seed + r` both to sample its images and to
/// initialize its filters. A run that fails is recorded in `failures.csv`
/// and skipped.
pub fn run_experiment_on(spec: &ExperimentSpec, images: &[PreparedImage]) -> Result<ExperimentSummary> {
    if spec.runs == 0 {
        return Err(Error::invalid("runs must be >= 1"));
    }
    if images.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    if let SampleCount::Count(t) = spec.sample_count {
        if t == 0 || t > images.len() {
            return Err(Error::invalid(format!(
                "sample count {t} outside 1..={} available images",
                images.len()
            )));
        }
    }
    spec.train.validate()?;
    let m = spec.train.filter_shape;
    if let Some(img) = images.iter().find(|p| p.data.rows() < m.rows || p.data.cols() < m.cols) {
        return Err(Error::invalid(format!(
            "filter shape {m} does not fit image {} of shape {}",
            img.id,
            img.data.shape()
        )));
    }
    fs::create_dir_all(&spec.output_dir)?;

    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for r in 0..spec.runs {
        let seed = spec.base_seed.wrapping_add(r as u64);
        match single_run(spec, images, r, seed) {
            Ok(res) => runs.push(res),
            Err(e) => failures.push((r, e.to_string())),
        }
    }

    let summary = ExperimentSummary {
        dataset: spec.name.clone(),
        penalty: spec.train.penalty.name().to_string(),
        psnr: Quartiles::of(&runs.iter().map(|r| r.psnr).collect::<Vec<_>>()),
        nonzero_fraction: Quartiles::of(&runs.iter().map(|r| r.nonzero_fraction).collect::<Vec<_>>()),
        runs,
        failures,
    };
    let out = &spec.output_dir;
    write_atomic(&out.join("aggregate.csv"), summary.aggregate_csv().as_bytes())?;
    let summary_csv = format!("{}{}", ExperimentSummary::summary_header(), summary.summary_row());
    write_atomic(&out.join("summary.csv"), summary_csv.as_bytes())?;
    if !summary.failures.is_empty() {
        let mut s = String::from("run,error\n");
        for (r, e) in &summary.failures {
            let _ = writeln!(s, "{r},\"{}\"", e.replace('"', "'"));
        }
        write_atomic(&out.join("failures.csv"), s.as_bytes())?;
    }
    Ok(summary)
}

/// Runs the same experiment once per penalty, each under
/// `output_dir/<penalty name>`, and writes combined `aggregate.csv` and
/// `summary.csv` at the top of `output_dir`.
pub fn run_benchmark(spec: &ExperimentSpec, penalties: &[PenaltySpec]) -> Result<Vec<ExperimentSummary>> {
    let images = prepare(load_images(&spec.dataset_path)?, spec.crop)?;
    run_benchmark_on(spec, penalties, &images)
}

pub fn run_benchmark_on(
    spec: &ExperimentSpec,
    penalties: &[PenaltySpec],
    images: &[PreparedImage],
) -> Result<Vec<ExperimentSummary>> {
    if penalties.is_empty() {
        return Err(Error::invalid("no penalties to benchmark"));
    }
    let mut summaries = Vec::with_capacity(penalties.len());
    for p in penalties {
        let mut sub = spec.clone();
        sub.train.penalty = *p;
        sub.output_dir = spec.output_dir.join(p.name());
        summaries.push(run_experiment_on(&sub, images)?);
    }
    let mut aggregate = String::from("dataset,penalty,run,psnr,nonzero_frac\n");
    let mut summary = String::from(ExperimentSummary::summary_header());
    for s in &summaries {
        s.append_aggregate_rows(&mut aggregate);
        summary.push_str(&s.summary_row());
    }
    write_atomic(&spec.output_dir.join("aggregate.csv"), aggregate.as_bytes())?;
    write_atomic(&spec.output_dir.join("summary.csv"), summary.as_bytes())?;
    Ok(summaries)
}

fn sample_indices(n: usize, count: SampleCount, seed: u64) -> Vec<usize> {
    match count {
        SampleCount::Count(t) if t < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            let mut idx = rand::seq::index::sample(&mut rng, n, t).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..n).collect(),
    }
}

fn single_run(spec: &ExperimentSpec, images: &[PreparedImage], run: usize, seed: u64) -> Result<RunResult> {
    let picked: Vec<&PreparedImage> = sample_indices(images.len(), spec.sample_count, seed)
        .into_iter()
        .map(|i| &images[i])
        .collect();
    let data: Vec<Grid2> = picked.iter().map(|p| p.data.clone()).collect();
    let peak = picked.iter().map(|p| p.peak).fold(0.0, f64::max);
    let config = TrainConfig {
        seed,
        peak,
        ..spec.train.clone()
    };
    let report = train(&data, &config)?;

    let dir = spec.output_dir.join(format!("run_{run:03}"));
    fs::create_dir_all(&dir)?;
    write_run_artifacts(&dir, spec, &config, &report, &picked)?;

    let mut psnrs = Vec::with_capacity(picked.len());
    for (img, maps) in picked.iter().zip(&report.final_maps) {
        let recon = reconstruct(&report.final_filters, maps)?;
        psnrs.push(psnr(&img.data, &recon, img.peak)?);
    }
    let sparsity = sparsity_of(
        report.final_maps.iter().flat_map(FeatureMaps::coefficients),
        NEAR_ZERO_TOLERANCE,
    )?;
    Ok(RunResult {
        run,
        seed,
        psnr: psnrs.iter().sum::<f64>() / psnrs.len() as f64,
        nonzero_fraction: sparsity.nonzero_fraction,
        near_zero_fraction: sparsity.near_zero_fraction,
        gamma_used: report.gamma_used,
    })
}

/// Report, checkpoint, reconstructions, filter mosaic, histogram, prox curve
/// and per-image evaluation for one finished run.
pub fn write_run_artifacts(
    dir: &Path,
    spec: &ExperimentSpec,
    config: &TrainConfig,
    report: &TrainReport,
    images: &[&PreparedImage],
) -> Result<()> {
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_atomic(&dir.join("report.csv"), &buf)?;

    let mut ckpt = Checkpoint::new(
        config.clone(),
        report.gamma_used,
        report.final_filters.clone(),
        images
            .iter()
            .zip(&report.final_maps)
            .map(|(img, m)| (img.id.clone(), m.clone()))
            .collect(),
    );
    ckpt.metadata = run_metadata(spec, images, report);
    save_checkpoint(&ckpt, dir.join("checkpoint"))?;

    let mut evals = Vec::with_capacity(images.len());
    for (img, maps) in images.iter().zip(&report.final_maps) {
        let recon = reconstruct(&report.final_filters, maps)?;
        let shown = recon.map(|v| v + img.mean);
        write_atomic(
            &dir.join(format!("recon_{}.pgm", img.id)),
            &encode_pgm(&shown, img.peak),
        )?;
        evals.push((
            img.id.clone(),
            evaluate(
                &img.data,
                &recon,
                img.peak,
                maps,
                NEAR_ZERO_TOLERANCE,
                spec.histogram_bins,
            )?,
        ));
    }
    let mut buf = Vec::new();
    write_eval_csv(&mut buf, &evals)?;
    write_atomic(&dir.join("eval.csv"), &buf)?;

    write_atomic(
        &dir.join("filters.pgm"),
        &encode_pgm(&filter_mosaic(&report.final_filters, 8), 255.0),
    )?;

    let coeffs = || report.final_maps.iter().flat_map(FeatureMaps::coefficients);
    let lim = coeffs().fold(0.0f64, |m, v| m.max(v.abs()));
    let lim = if lim > 0.0 { lim } else { 1.0 };
    let hist = histogram_of(coeffs(), spec.histogram_bins, (-lim, lim))?;
    let mut buf = Vec::new();
    write_histogram_csv(&mut buf, &hist)?;
    write_atomic(&dir.join("histogram.csv"), &buf)?;

    let op = step_penalty(report);
    let span = images
        .iter()
        .flat_map(|p| p.data.values().iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let span = if span > 0.0 { span } else { 1.0 };
    let curve = prox_curve(&op, -span, span, 401)?;
    let mut buf = Vec::new();
    write_prox_curve_csv(&mut buf, &curve)?;
    write_atomic(&dir.join("prox_curve.csv"), &buf)
}

/// The thresholding operator in force at the end of training.
fn step_penalty(report: &TrainReport) -> PenaltyKind {
    match report.penalty {
        PenaltyKind::Cauchy(p) => {
            let eta = report.last().eta_z;
            CauchyParams::new_unchecked(p.gamma(), eta * p.lambda())
                .map(PenaltyKind::Cauchy)
                .unwrap_or(report.penalty)
        }
        other => other,
    }
}

fn run_metadata(spec: &ExperimentSpec, images: &[&PreparedImage], report: &TrainReport) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("dataset".into(), spec.name.clone());
    m.insert("dataset_path".into(), spec.dataset_path.display().to_string());
    m.insert(
        "preprocessing".into(),
        "per-image zero mean, no variance normalization".into(),
    );
    if let Some(s) = spec.crop {
        m.insert("crop".into(), format!("center {s}"));
    }
    let native: Vec<String> = images.iter().map(|p| p.native_shape.to_string()).collect();
    m.insert("native_shapes".into(), native.join(";"));
    m.insert("trained_shape".into(), images[0].data.shape().to_string());
    m.insert(
        "image_means".into(),
        images.iter().map(|p| p.mean.to_string()).collect::<Vec<_>>().join(";"),
    );
    if report.gamma_used.is_some() {
        let src = match spec.train.penalty {
            PenaltySpec::Cauchy { gamma: Some(_), .. } => "configured",
            _ => "estimated once from the pooled centered pixels of the sampled images",
        };
        m.insert("gamma_source".into(), src.into());
    }
    m
}

/// Tiles the filters (each stretched to `[0, 255]`, upscaled by `zoom`)
/// into a near-square mosaic with 1-cell gaps.
pub fn filter_mosaic(filters: &FilterBank, zoom: usize) -> Grid2 {
    let k = filters.len();
    let cols = (k as f64).sqrt().ceil() as usize;
    let rows = k.div_ceil(cols);
    let fs = filters.shape();
    let (ch, cw) = (fs.rows * zoom + zoom, fs.cols * zoom + zoom);
    let mut out = Grid2::zeros(Shape::new(rows * ch + zoom, cols * cw + zoom));
    for (i, f) in filters.iter().enumerate() {
        let s = stretch(f, 255.0);
        let (r0, c0) = (zoom + (i / cols) * ch, zoom + (i % cols) * cw);
        for r in 0..fs.rows * zoom {
            for c in 0..fs.cols * zoom {
                out.set(r0 + r, c0 + c, s.get(r / zoom, c / zoom));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean() {
        let (g, m) = preprocess_zero_mean(&Grid2::from_rows(&[[1.0, 3.0]]).unwrap());
        assert_eq!(g.values(), &[-1.0, 1.0]);
        assert_eq!(m, 2.0);
        let (g2, m2) = preprocess_zero_mean(&g);
        assert_eq!(g2, g);
        assert_eq!(m2, 0.0);
    }

    #[test]
    fn quartiles() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.mean, q.q1, q.median, q.q3), (3.0, 2.0, 3.0, 4.0));
        let q = Quartiles::of(&[1.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.25, 1.5, 1.75));
        assert!(Quartiles::of(&[]).is_none());
    }

    #[test]
    fn sampling_is_seeded_and_sorted() {
        let a = sample_indices(100, SampleCount::Count(10), 3);
        assert_eq!(a, sample_indices(100, SampleCount::Count(10), 3));
        assert_ne!(a, sample_indices(100, SampleCount::Count(10), 4));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(sample_indices(3, SampleCount::All, 0), vec![0, 1, 2]);
    }

    #[test]
    fn mosaic_shape() {
        let f = FilterBank::new(vec![Grid2::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap(); 5]).unwrap();
        let m = filter_mosaic(&f, 2);
        // 3 columns x 2 rows of (2*2 + 2)-cell tiles plus a leading gap
        assert_eq!(m.shape(), Shape::new(2 * 6 + 2, 3 * 6 + 2));
    }
}
