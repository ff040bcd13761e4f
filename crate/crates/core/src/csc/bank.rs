use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Grid2, Shape};

macro_rules! grid_stack {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
        pub struct $name {
            shape: Shape,
            grids: Vec<Grid2>,
        }

        impl $name {
            pub fn new(grids: Vec<Grid2>) -> Result<Self> {
                let shape = grids
                    .first()
                    .map(Grid2::shape)
                    .ok_or_else(|| Error::invalid(concat!("a ", $what, " stack needs at least one grid")))?;
                if let Some(k) = grids.iter().position(|g| g.shape() != shape) {
                    return Err(Error::shape(format!(
                        concat!($what, " {} is {}, expected {}"),
                        k,
                        grids[k].shape(),
                        shape
                    )));
                }
                Ok($name { shape, grids })
            }

            pub fn zeros(count: usize, shape: Shape) -> Self {
                $name {
                    shape,
                    grids: vec![Grid2::zeros(shape); count],
                }
            }

            /// Number of grids, `K`.
            pub fn len(&self) -> usize {
                self.grids.len()
            }

            pub fn is_empty(&self) -> bool {
                self.grids.is_empty()
            }

            /// Shape shared by every grid.
            pub fn shape(&self) -> Shape {
                self.shape
            }

            pub fn get(&self, k: usize) -> &Grid2 {
                &self.grids[k]
            }

            pub fn iter(&self) -> std::slice::Iter<'_, Grid2> {
                self.grids.iter()
            }

            pub fn as_slice(&self) -> &[Grid2] {
                &self.grids
            }

            pub fn into_grids(self) -> Vec<Grid2> {
                self.grids
            }

            /// Every entry of every grid, grid by grid.
            pub fn coefficients(&self) -> impl Iterator<Item = f64> + '_ {
                self.grids.iter().flat_map(|g| g.values().iter().copied())
            }

            pub fn coefficient_count(&self) -> usize {
                self.grids.len() * self.shape.len()
            }
        }
    };
}

grid_stack!(
    /// `K` same-shaped filters. Training keeps each at unit Euclidean norm.
    FilterBank,
    "filter"
);

grid_stack!(
    /// `K` same-shaped coefficient maps paired with a [`FilterBank`].
    FeatureMaps,
    "map"
);

impl FilterBank {
    pub(crate) fn grids_mut(&mut self) -> &mut [Grid2] {
        &mut self.grids
    }

    /// Standard-normal entries, each filter scaled to unit norm.
    pub fn random<R: Rng + ?Sized>(count: usize, shape: Shape, rng: &mut R) -> Result<Self> {
        if count == 0 || shape.is_empty() {
            return Err(Error::invalid("filter bank needs K >= 1 and a non-empty filter shape"));
        }
        let mut grids = Vec::with_capacity(count);
        for k in 0..count {
            let values = (0..shape.len()).map(|_| rng.sample(StandardNormal)).collect();
            let mut g = Grid2::from_raw(shape, values);
            normalize(&mut g, k)?;
            grids.push(g);
        }
        Ok(FilterBank { shape, grids })
    }

    /// Scales every filter to unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        for (k, g) in self.grids.iter_mut().enumerate() {
            normalize(g, k)?;
        }
        Ok(self)
    }

    /// Largest deviation of any filter norm from 1.
    pub fn max_norm_error(&self) -> f64 {
        self.grids.iter().map(|g| (g.norm() - 1.0).abs()).fold(0.0, f64::max)
    }
}

impl FeatureMaps {
    /// Zero maps matched to `filters` for an image of extent `image`.
    pub fn zeros_for(image: Shape, filters: &FilterBank) -> Result<Self> {
        let shape = image
            .map_for(filters.shape())
            .ok_or_else(|| Error::shape(format!("filter {} does not fit image {image}", filters.shape())))?;
        Ok(FeatureMaps::zeros(filters.len(), shape))
    }
}

pub(crate) fn normalize(g: &mut Grid2, k: usize) -> Result<()> {
    let n = g.norm();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::FilterDegenerate { k });
    }
    g.scale(1.0 / n);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_filters_are_unit_norm_and_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = FilterBank::random(25, Shape::new(5, 5), &mut rng).unwrap();
        assert!(a.max_norm_error() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = FilterBank::random(25, Shape::new(5, 5), &mut rng).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mixed_shapes_rejected() {
        let r = FeatureMaps::new(vec![Grid2::zeros(Shape::new(2, 2)), Grid2::zeros(Shape::new(2, 3))]);
        assert!(matches!(r, Err(Error::Shape(_))));
        assert!(FilterBank::new(vec![]).is_err());
    }

    #[test]
    fn zero_filter_is_degenerate() {
        let bank = FilterBank::new(vec![
            Grid2::from_rows(&[[1.0, 1.0]]).unwrap(),
            Grid2::zeros(Shape::new(1, 2)),
        ])
        .unwrap();
        assert!(matches!(bank.normalized(), Err(Error::FilterDegenerate { k: 1 })));
    }
}
