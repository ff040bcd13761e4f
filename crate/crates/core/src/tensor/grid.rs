use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(rows, cols)` extent of a 2D array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub const fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub const fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    /// Extent of a full convolution of `self` with `other`.
    pub const fn full_with(&self, other: Shape) -> Shape {
        Shape::new(self.rows + other.rows - 1, self.cols + other.cols - 1)
    }

    /// Feature-map extent that reproduces `self` (an image) under full
    /// convolution with a `filter`-sized kernel, if the filter fits.
    pub fn map_for(&self, filter: Shape) -> Option<Shape> {
        if filter.is_empty() || filter.rows > self.rows || filter.cols > self.cols {
            return None;
        }
        Some(Shape::new(self.rows - filter.rows + 1, self.cols - filter.cols + 1))
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.rows, self.cols)
    }
}

/// Dense row-major 2D grid of `f64`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid2 {
    shape: Shape,
    values: Vec<f64>,
}

impl Grid2 {
    /// Builds a grid from row-major values. Rejects empty extents, length
    /// mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(rows, cols);
        if shape.is_empty() {
            return Err(Error::invalid(format!("empty grid {shape}")));
        }
        if values.len() != shape.len() {
            return Err(Error::shape(format!("{} values for a {shape} grid", values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite entry {} at index {i}", values[i])));
        }
        Ok(Grid2 { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        Grid2 {
            shape,
            values: vec![0.0; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(shape.len());
        for r in 0..shape.rows {
            for c in 0..shape.cols {
                values.push(f(r, c));
            }
        }
        Grid2 { shape, values }
    }

    /// Builds a grid from nested rows; handy in tests and examples.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        if rows.iter().any(|r| r.as_ref().len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Grid2::new(rows.len(), cols, values)
    }

    pub(crate) fn from_raw(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), shape.len());
        Grid2 { shape, values }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.shape.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.shape.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.shape.cols;
        &self.values[r * c..(r + 1) * c]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid2 {
        Grid2::from_raw(self.shape, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn sum_squares(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.sum_squares().sqrt()
    }

    pub fn dot(&self, other: &Grid2) -> Result<f64> {
        self.expect_shape(other.shape, "dot")?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Grid2) -> Result<()> {
        self.expect_shape(other.shape, "axpy")?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Grid2) -> Result<Grid2> {
        self.expect_shape(other.shape, "sub")?;
        Ok(Grid2::from_raw(
            self.shape,
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        ))
    }

    /// Rectangular sub-grid starting at `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, shape: Shape) -> Result<Grid2> {
        if shape.is_empty() || r0 + shape.rows > self.rows() || c0 + shape.cols > self.cols() {
            return Err(Error::shape(format!(
                "crop {shape} at ({r0}, {c0}) exceeds {}",
                self.shape
            )));
        }
        Ok(Grid2::from_fn(shape, |r, c| self.get(r0 + r, c0 + c)))
    }

    /// Centered crop of the requested extent.
    pub fn center_crop(&self, shape: Shape) -> Result<Grid2> {
        if shape.rows > self.rows() || shape.cols > self.cols() {
            return Err(Error::shape(format!("center crop {shape} exceeds {}", self.shape)));
        }
        self.crop((self.rows() - shape.rows) / 2, (self.cols() - shape.cols) / 2, shape)
    }

    pub(crate) fn expect_shape(&self, shape: Shape, what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(format!("{what}: expected {shape}, got {}", self.shape)));
        }
        Ok(())
    }
}

impl fmt::Debug for Grid2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Grid2({}) [", self.shape)?;
        for r in 0..self.rows().min(8) {
            write!(f, "{:?}", &self.row(r)[..self.cols().min(8)])?;
        }
        write!(f, "]")
    }
}
