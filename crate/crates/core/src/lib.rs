//! Convolutional sparse coding with a Cauchy prior on the feature maps.
//!
//! An image is modelled as `sum_k f_k * z_k`: `K` small unit-norm filters
//! convolved with coefficient maps. Learning alternates thresholded gradient
//! steps on the maps (the Cauchy proximal operator, or soft/hard thresholding
//! for comparison) with projected gradient steps on the filters.
//!
//! ```
//! use ccsc::penalty::{prox_cauchy, CauchyParams};
//!
//! let params = CauchyParams::new(0.5, 1.5).unwrap();
//! let z = prox_cauchy(3.0, &params);
//! assert!(z > 0.0 && z < 3.0);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod csc;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod io;
pub mod metrics;
pub mod penalty;
pub mod tensor;

pub use csc::{encode, reconstruct, train, FeatureMaps, FilterBank, PenaltySpec, TrainConfig, TrainReport};
pub use error::{Error, Result};
pub use estimate::{estimate_gamma, GammaEstimate};
pub use penalty::{CauchyParams, PenaltyKind};
pub use tensor::{Grid2, Shape};
