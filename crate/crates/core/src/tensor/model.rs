use super::conv::{conv_full_acc, corr_valid_acc};
use super::grid::{Grid2, Shape};
use crate::csc::{FeatureMaps, FilterBank};
use crate::error::{Error, Result};

/// Checks `filters`/`maps` against each other and returns the image extent.
pub(crate) fn image_shape(filters: &FilterBank, maps: &FeatureMaps) -> Result<Shape> {
    if filters.len() != maps.len() {
        return Err(Error::shape(format!(
            "{} filters but {} feature maps",
            filters.len(),
            maps.len()
        )));
    }
    Ok(filters.shape().full_with(maps.shape()))
}

/// `sum_k conv_full(f_k, z_k)`
pub fn forward(filters: &FilterBank, maps: &FeatureMaps) -> Result<Grid2> {
    let shape = image_shape(filters, maps)?;
    let mut out = vec![0.0; shape.len()];
    for (f, z) in filters.iter().zip(maps.iter()) {
        conv_full_acc(&mut out, shape, f, z);
    }
    Ok(Grid2::from_raw(shape, out))
}

/// `y - forward(filters, maps)`
pub(crate) fn residual(y: &Grid2, filters: &FilterBank, maps: &FeatureMaps) -> Result<Grid2> {
    let shape = image_shape(filters, maps)?;
    y.expect_shape(shape, "image vs model")?;
    let mut out: Vec<f64> = y.values().iter().map(|v| -v).collect();
    for (f, z) in filters.iter().zip(maps.iter()) {
        conv_full_acc(&mut out, shape, f, z);
    }
    out.iter_mut().for_each(|v| *v = -*v);
    Ok(Grid2::from_raw(shape, out))
}

/// Gradient of `||y - yhat||^2` w.r.t. every map: `-2 corr_valid(r, f_k)`.
pub(crate) fn map_gradients(residual: &Grid2, filters: &FilterBank) -> Vec<Grid2> {
    let shape = residual.shape().map_for(filters.shape()).expect("checked shape");
    filters
        .iter()
        .map(|f| {
            let mut out = vec![0.0; shape.len()];
            corr_valid_acc(&mut out, shape, residual, f);
            out.iter_mut().for_each(|v| *v *= -2.0);
            Grid2::from_raw(shape, out)
        })
        .collect()
}

/// Gradient of `||y - yhat||^2` w.r.t. every filter: `-2 corr_valid(r, z_k)`.
pub(crate) fn filter_gradients(residual: &Grid2, maps: &FeatureMaps) -> Vec<Grid2> {
    let shape = residual.shape().map_for(maps.shape()).expect("checked shape");
    maps.iter()
        .map(|z| {
            let mut out = vec![0.0; shape.len()];
            corr_valid_acc(&mut out, shape, residual, z);
            out.iter_mut().for_each(|v| *v *= -2.0);
            Grid2::from_raw(shape, out)
        })
        .collect()
}

/// Data-fidelity value and its gradients.
#[derive(Clone, Debug)]
pub struct FidelityGradients {
    /// `sum (y - yhat)^2`
    pub cost: f64,
    pub maps: FeatureMaps,
    pub filters: FilterBank,
}

pub fn fidelity_and_gradients(y: &Grid2, filters: &FilterBank, maps: &FeatureMaps) -> Result<FidelityGradients> {
    let r = residual(y, filters, maps)?;
    Ok(FidelityGradients {
        cost: r.sum_squares(),
        maps: FeatureMaps::new(map_gradients(&r, filters))?,
        filters: FilterBank::new(filter_gradients(&r, maps))?,
    })
}
