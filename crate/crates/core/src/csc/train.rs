//! Alternating minimization: thresholded gradient steps on the feature maps
//! and projected gradient steps on the filters, each with a commit-or-halve
//! step-size rule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bank::{normalize, FeatureMaps, FilterBank};
use super::config::{PenaltySpec, TrainConfig};
use crate::error::{Error, Result};
use crate::estimate::estimate_gamma;
use crate::metrics::{psnr_from_mse, sparsity_of};
use crate::penalty::{CauchyParams, PenaltyKind};
use crate::tensor::{self, corr_valid_acc, Grid2, Shape};

/// Value of the regularized objective split into its two terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub cost: f64,
    pub fidelity: f64,
    pub penalty: f64,
}

/// Result of one z- or f-step: the updated variable, the (possibly halved)
/// step size and the objective after every inner iteration.
#[derive(Clone, Debug)]
pub struct StepOutcome<T> {
    pub value: T,
    pub eta: f64,
    pub trace: Vec<f64>,
}

pub fn penalty_value(maps: &FeatureMaps, penalty: &PenaltyKind) -> f64 {
    maps.coefficients().map(|z| penalty.penalty(z)).sum()
}

/// `||y - yhat||^2 + sum_k sum_q penalty(z_kq)`
pub fn total_cost(y: &Grid2, filters: &FilterBank, maps: &FeatureMaps, penalty: &PenaltyKind) -> Result<Cost> {
    total_cost_batch(std::slice::from_ref(y), filters, std::slice::from_ref(maps), penalty)
}

/// [`total_cost`] summed over images that share `filters`.
pub fn total_cost_batch(
    images: &[Grid2],
    filters: &FilterBank,
    maps: &[FeatureMaps],
    penalty: &PenaltyKind,
) -> Result<Cost> {
    check_batch(images, filters, maps)?;
    let mut fidelity = 0.0;
    let mut pen = 0.0;
    for (y, z) in images.iter().zip(maps) {
        fidelity += tensor::residual(y, filters, z)?.sum_squares();
        pen += penalty_value(z, penalty);
    }
    Ok(Cost {
        cost: fidelity + pen,
        fidelity,
        penalty: pen,
    })
}

fn check_batch(images: &[Grid2], filters: &FilterBank, maps: &[FeatureMaps]) -> Result<()> {
    if images.is_empty() {
        return Err(Error::invalid("no images"));
    }
    if images.len() != maps.len() {
        return Err(Error::shape(format!(
            "{} images but {} map sets",
            images.len(),
            maps.len()
        )));
    }
    for (i, (y, z)) in images.iter().zip(maps).enumerate() {
        let shape = tensor::image_shape(filters, z)?;
        if y.shape() != shape {
            return Err(Error::shape(format!("image {i} is {}, model gives {shape}", y.shape())));
        }
    }
    Ok(())
}

/// Operator applied after the gradient step. For the Cauchy penalty the prox
/// weight is `eta * lambda` and has to satisfy the convexity bound.
fn step_operator(penalty: &PenaltyKind, eta: f64) -> Result<PenaltyKind> {
    match penalty {
        PenaltyKind::Cauchy(p) => Ok(PenaltyKind::Cauchy(CauchyParams::new(p.gamma(), eta * p.lambda())?)),
        other => Ok(*other),
    }
}

/// Committed state of a batch: residuals are cached so each inner iteration
/// costs one correlation and one forward pass.
struct Batch<'a> {
    images: &'a [Grid2],
    residuals: Vec<Grid2>,
    fidelity: f64,
    penalty: f64,
}

impl<'a> Batch<'a> {
    fn new(images: &'a [Grid2], filters: &FilterBank, maps: &[FeatureMaps], penalty: &PenaltyKind) -> Result<Self> {
        check_batch(images, filters, maps)?;
        let residuals = images
            .iter()
            .zip(maps)
            .map(|(y, z)| tensor::residual(y, filters, z))
            .collect::<Result<Vec<_>>>()?;
        let fidelity = residuals.iter().map(Grid2::sum_squares).sum();
        let penalty = maps.iter().map(|z| penalty_value(z, penalty)).sum();
        Ok(Batch {
            images,
            residuals,
            fidelity,
            penalty,
        })
    }

    fn cost(&self) -> f64 {
        self.fidelity + self.penalty
    }

    fn mean_psnr(&self, peak: f64) -> f64 {
        let n = self.residuals.len() as f64;
        self.residuals
            .iter()
            .map(|r| psnr_from_mse(r.sum_squares() / r.len() as f64, peak))
            .sum::<f64>()
            / n
    }
}

fn z_iterations(
    batch: &mut Batch<'_>,
    filters: &FilterBank,
    maps: &mut [FeatureMaps],
    penalty: &PenaltyKind,
    mut eta: f64,
    iterations: usize,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    let map_shape = maps[0].shape();
    for _ in 0..iterations {
        let op = step_operator(penalty, eta)?;
        let mut cand_maps = Vec::with_capacity(maps.len());
        let mut cand_res = Vec::with_capacity(maps.len());
        let (mut fid, mut pen) = (0.0, 0.0);
        for ((y, r), z) in batch.images.iter().zip(&batch.residuals).zip(maps.iter()) {
            let mut next = Vec::with_capacity(z.len());
            for (f, zk) in filters.iter().zip(z.iter()) {
                // z - eta * grad = z + 2 eta corr_valid(r, f)
                let mut buf = vec![0.0; map_shape.len()];
                corr_valid_acc(&mut buf, map_shape, r, f);
                for (b, &zv) in buf.iter_mut().zip(zk.values()) {
                    *b = op.prox(zv + 2.0 * eta * *b);
                }
                next.push(Grid2::from_raw(map_shape, buf));
            }
            let next = FeatureMaps::new(next)?;
            let res = tensor::residual(y, filters, &next)?;
            fid += res.sum_squares();
            pen += penalty_value(&next, penalty);
            cand_maps.push(next);
            cand_res.push(res);
        }
        let c_new = fid + pen;
        if !c_new.is_finite() {
            return Err(Error::NumericDivergence { trace: trace.clone() });
        }
        if c_new > batch.cost() {
            eta /= 2.0;
        } else {
            maps.iter_mut().zip(cand_maps).for_each(|(m, c)| *m = c);
            batch.residuals = cand_res;
            batch.fidelity = fid;
            batch.penalty = pen;
        }
        trace.push(batch.cost());
    }
    Ok(eta)
}

fn f_iterations(
    batch: &mut Batch<'_>,
    filters: &mut FilterBank,
    maps: &[FeatureMaps],
    mut eta: f64,
    iterations: usize,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    let fshape = filters.shape();
    for _ in 0..iterations {
        let mut grads = vec![Grid2::zeros(fshape); filters.len()];
        for (r, z) in batch.residuals.iter().zip(maps) {
            for (g, zk) in grads.iter_mut().zip(z.iter()) {
                corr_valid_acc(g.values_mut(), fshape, r, zk);
            }
        }
        // grad_f = -2 corr_valid(r, z), so f - eta * grad = f + 2 eta corr
        let mut cand = filters.clone();
        for (k, (f, g)) in cand.grids_mut().iter_mut().zip(&grads).enumerate() {
            f.axpy(2.0 * eta, g)?;
            normalize(f, k)?;
        }
        let res = batch
            .images
            .iter()
            .zip(maps)
            .map(|(y, z)| tensor::residual(y, &cand, z))
            .collect::<Result<Vec<_>>>()?;
        let fid: f64 = res.iter().map(Grid2::sum_squares).sum();
        let c_new = fid + batch.penalty;
        if !c_new.is_finite() {
            return Err(Error::NumericDivergence { trace: trace.clone() });
        }
        if c_new > batch.cost() {
            eta /= 2.0;
        } else {
            *filters = cand;
            batch.residuals = res;
            batch.fidelity = fid;
        }
        trace.push(batch.cost());
    }
    Ok(eta)
}

/// Up to `iterations` thresholded gradient steps on the maps with filters
/// fixed. A step that raises the objective is discarded and halves `eta_z`.
pub fn z_step(
    y: &Grid2,
    filters: &FilterBank,
    maps: &FeatureMaps,
    penalty: &PenaltyKind,
    eta_z: f64,
    iterations: usize,
) -> Result<StepOutcome<FeatureMaps>> {
    let out = z_step_batch(
        std::slice::from_ref(y),
        filters,
        vec![maps.clone()],
        penalty,
        eta_z,
        iterations,
    )?;
    Ok(StepOutcome {
        value: out.value.into_iter().next().expect("one image"),
        eta: out.eta,
        trace: out.trace,
    })
}

/// [`z_step`] over several images with one shared step size.
pub fn z_step_batch(
    images: &[Grid2],
    filters: &FilterBank,
    mut maps: Vec<FeatureMaps>,
    penalty: &PenaltyKind,
    eta_z: f64,
    iterations: usize,
) -> Result<StepOutcome<Vec<FeatureMaps>>> {
    if !(eta_z > 0.0) {
        return Err(Error::invalid(format!("eta_z must be > 0, got {eta_z}")));
    }
    step_operator(penalty, eta_z)?;
    let mut batch = Batch::new(images, filters, &maps, penalty)?;
    let mut trace = Vec::with_capacity(iterations);
    let eta = z_iterations(&mut batch, filters, &mut maps, penalty, eta_z, iterations, &mut trace)?;
    Ok(StepOutcome {
        value: maps,
        eta,
        trace,
    })
}

/// Up to `iterations` projected gradient steps on the filters (each renormalized
/// to unit norm) with maps fixed. The penalty does not depend on the filters,
/// so the trace holds the data-fidelity term.
pub fn f_step(
    y: &Grid2,
    filters: &FilterBank,
    maps: &FeatureMaps,
    eta_f: f64,
    iterations: usize,
) -> Result<StepOutcome<FilterBank>> {
    f_step_batch(
        std::slice::from_ref(y),
        filters,
        std::slice::from_ref(maps),
        eta_f,
        iterations,
    )
}

pub fn f_step_batch(
    images: &[Grid2],
    filters: &FilterBank,
    maps: &[FeatureMaps],
    eta_f: f64,
    iterations: usize,
) -> Result<StepOutcome<FilterBank>> {
    if !(eta_f > 0.0) {
        return Err(Error::invalid(format!("eta_f must be > 0, got {eta_f}")));
    }
    let zero = PenaltyKind::Hard { lambda: 0.0 };
    let mut batch = Batch::new(images, filters, maps, &zero)?;
    let mut filters = filters.clone();
    let mut trace = Vec::with_capacity(iterations);
    let eta = f_iterations(&mut batch, &mut filters, maps, eta_f, iterations, &mut trace)?;
    Ok(StepOutcome {
        value: filters,
        eta,
        trace,
    })
}

/// One row of the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub fidelity: f64,
    pub penalty: f64,
    /// Mean PSNR over the dataset.
    pub psnr: f64,
    pub nonzero_fraction: f64,
    pub eta_z: f64,
    pub eta_f: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Row 0 is the initial state, row `i` follows outer iteration `i`.
    pub per_iteration: Vec<IterationRecord>,
    /// Objective after every inner z- and f-iteration, in order.
    pub inner_costs: Vec<f64>,
    pub final_filters: FilterBank,
    pub final_maps: Vec<FeatureMaps>,
    pub gamma_used: Option<f64>,
    /// The penalty the run actually used, scale resolved.
    pub penalty: PenaltyKind,
    pub seed: u64,
}

impl TrainReport {
    pub fn last(&self) -> &IterationRecord {
        self.per_iteration.last().expect("report has the initial row")
    }

    /// Writes `iter,cost,fidelity,penalty,psnr,nonzero_frac,eta_z,eta_f`.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iter,cost,fidelity,penalty,psnr,nonzero_frac,eta_z,eta_f")?;
        for r in &self.per_iteration {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.iteration, r.cost, r.fidelity, r.penalty, r.psnr, r.nonzero_fraction, r.eta_z, r.eta_f
            )?;
        }
        Ok(())
    }
}

fn common_shape(dataset: &[Grid2]) -> Result<Shape> {
    let shape = dataset
        .first()
        .map(Grid2::shape)
        .ok_or_else(|| Error::invalid("empty dataset"))?;
    if let Some(i) = dataset.iter().position(|g| g.shape() != shape) {
        return Err(Error::invalid(format!(
            "image {i} is {}, expected {shape}",
            dataset[i].shape()
        )));
    }
    Ok(shape)
}

/// Resolves the configured penalty against `data` (scale estimated from the
/// pooled pixels unless given) and returns it with the map step size.
pub fn resolve_penalty(config: &TrainConfig, data: &[Grid2]) -> Result<(PenaltyKind, f64, Option<f64>)> {
    match config.penalty {
        PenaltySpec::Cauchy { lambda, gamma } => {
            let gamma = match gamma {
                Some(g) => g,
                None => {
                    let pixels: Vec<f64> = data.iter().flat_map(|g| g.values().iter().copied()).collect();
                    estimate_gamma(&pixels, config.epsilon)?.gamma
                }
            };
            let eta = config.resolve_eta_z(Some(gamma))?;
            // the cost uses lambda as is; only the prox weight eta * lambda is bounded
            let kind = PenaltyKind::Cauchy(CauchyParams::new_unchecked(gamma, lambda)?);
            Ok((kind, eta, Some(gamma)))
        }
        PenaltySpec::Soft { lambda } => Ok((PenaltyKind::soft(lambda)?, config.resolve_eta_z(None)?, None)),
        PenaltySpec::Hard { lambda } => Ok((PenaltyKind::hard(lambda)?, config.resolve_eta_z(None)?, None)),
    }
}

/// Learns a filter bank and per-image feature maps.
///
/// Filters start from seeded standard-normal draws scaled to unit norm, maps
/// from zero. Each outer iteration runs a z-step over all images and then an
/// f-step on the shared filters. The data are used as given (no centering).
pub fn train(dataset: &[Grid2], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    let image_shape = common_shape(dataset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut filters = FilterBank::random(config.filters, config.filter_shape, &mut rng)?;
    let zero = FeatureMaps::zeros_for(image_shape, &filters)?;
    let mut maps = vec![zero; dataset.len()];

    let (penalty, mut eta_z, gamma_used) = resolve_penalty(config, dataset)?;
    let mut eta_f = config.eta_f;

    let mut batch = Batch::new(dataset, &filters, &maps, &penalty)?;
    let record = |iteration, batch: &Batch<'_>, maps: &[FeatureMaps], eta_z, eta_f| -> Result<IterationRecord> {
        Ok(IterationRecord {
            iteration,
            cost: batch.cost(),
            fidelity: batch.fidelity,
            penalty: batch.penalty,
            psnr: batch.mean_psnr(config.peak),
            nonzero_fraction: sparsity_of(maps.iter().flat_map(FeatureMaps::coefficients), 0.0)?.nonzero_fraction,
            eta_z,
            eta_f,
        })
    };

    let mut per_iteration = Vec::with_capacity(config.max_outer_iterations + 1);
    per_iteration.push(record(0, &batch, &maps, eta_z, eta_f)?);
    let mut inner_costs = Vec::new();
    for it in 1..=config.max_outer_iterations {
        eta_z = z_iterations(
            &mut batch,
            &filters,
            &mut maps,
            &penalty,
            eta_z,
            config.z_inner_iterations,
            &mut inner_costs,
        )?;
        eta_f = f_iterations(
            &mut batch,
            &mut filters,
            &maps,
            eta_f,
            config.f_inner_iterations,
            &mut inner_costs,
        )?;
        per_iteration.push(record(it, &batch, &maps, eta_z, eta_f)?);
    }

    Ok(TrainReport {
        per_iteration,
        inner_costs,
        final_filters: filters,
        final_maps: maps,
        gamma_used,
        penalty,
        seed: config.seed,
    })
}

/// Codes `y` against frozen `filters`: `max_outer_iterations *
/// z_inner_iterations` z-iterations from zero maps.
pub fn encode(y: &Grid2, filters: &FilterBank, config: &TrainConfig) -> Result<FeatureMaps> {
    config.validate()?;
    let (penalty, eta_z, _) = resolve_penalty(config, std::slice::from_ref(y))?;
    let maps = FeatureMaps::zeros_for(y.shape(), filters)?;
    let iterations = config.max_outer_iterations * config.z_inner_iterations;
    Ok(z_step(y, filters, &maps, &penalty, eta_z, iterations)?.value)
}

/// `sum_k f_k * z_k`
pub fn reconstruct(filters: &FilterBank, maps: &FeatureMaps) -> Result<Grid2> {
    tensor::forward(filters, maps)
}
