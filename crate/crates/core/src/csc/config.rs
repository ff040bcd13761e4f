use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Shape;

/// Default step size for the thresholding baselines and the filter update.
pub const DEFAULT_BASELINE_ETA: f64 = 1e-2;

/// Penalty as configured, before the Cauchy scale is known.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltySpec {
    /// `gamma: None` estimates the scale from the training pixels.
    Cauchy {
        lambda: f64,
        gamma: Option<f64>,
    },
    Soft {
        lambda: f64,
    },
    Hard {
        lambda: f64,
    },
}

impl PenaltySpec {
    pub fn name(&self) -> &'static str {
        match self {
            PenaltySpec::Cauchy { .. } => "ict",
            PenaltySpec::Soft { .. } => "ist",
            PenaltySpec::Hard { .. } => "iht",
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            PenaltySpec::Cauchy { lambda, .. } | PenaltySpec::Soft { lambda } | PenaltySpec::Hard { lambda } => lambda,
        }
    }
}

impl Default for PenaltySpec {
    fn default() -> Self {
        PenaltySpec::Cauchy {
            lambda: 1.0,
            gamma: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of filters `K`.
    pub filters: usize,
    pub filter_shape: Shape,
    pub max_outer_iterations: usize,
    pub z_inner_iterations: usize,
    pub f_inner_iterations: usize,
    pub penalty: PenaltySpec,
    /// Map step size. `None` picks `8 gamma^2 / lambda` for the Cauchy
    /// penalty and [`DEFAULT_BASELINE_ETA`] otherwise.
    pub eta_z: Option<f64>,
    pub eta_f: f64,
    pub seed: u64,
    /// Intensity peak used for PSNR.
    pub peak: f64,
    /// Likelihood guard for the scale estimate.
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            filters: 25,
            filter_shape: Shape::new(5, 5),
            max_outer_iterations: 100,
            z_inner_iterations: 10,
            f_inner_iterations: 10,
            penalty: PenaltySpec::default(),
            eta_z: None,
            eta_f: DEFAULT_BASELINE_ETA,
            seed: 0,
            peak: 255.0,
            epsilon: crate::estimate::DEFAULT_EPSILON,
        }
    }
}

impl TrainConfig {
    pub fn builder() -> TrainConfigBuilder {
        TrainConfigBuilder(TrainConfig::default())
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.filters, "filters"),
            (self.max_outer_iterations, "max_outer_iterations"),
            (self.z_inner_iterations, "z_inner_iterations"),
            (self.f_inner_iterations, "f_inner_iterations"),
        ];
        for (v, name) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.filter_shape.is_empty() {
            return Err(Error::invalid("empty filter shape"));
        }
        check_positive(self.eta_f, "eta_f")?;
        check_positive(self.peak, "peak")?;
        if !(self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        if let Some(eta) = self.eta_z {
            check_positive(eta, "eta_z")?;
        }
        let lambda = self.penalty.lambda();
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if let PenaltySpec::Cauchy { gamma: Some(gamma), .. } = self.penalty {
            check_positive(gamma, "gamma")?;
            if let Some(eta) = self.eta_z {
                check_cauchy_step(eta, lambda, gamma)?;
            }
        }
        Ok(())
    }

    /// Map step size once the Cauchy scale (if any) is known.
    pub(crate) fn resolve_eta_z(&self, gamma: Option<f64>) -> Result<f64> {
        let lambda = self.penalty.lambda();
        match (self.penalty, gamma) {
            (PenaltySpec::Cauchy { .. }, Some(gamma)) => match self.eta_z {
                Some(eta) => check_cauchy_step(eta, lambda, gamma).map(|_| eta),
                None if lambda > 0.0 => Ok(8.0 * gamma * gamma / lambda),
                None => Ok(8.0 * gamma * gamma),
            },
            _ => Ok(self.eta_z.unwrap_or(DEFAULT_BASELINE_ETA)),
        }
    }
}

/// The prox runs with weight `eta * lambda`, which must stay `<= 8 gamma^2`.
fn check_cauchy_step(eta: f64, lambda: f64, gamma: f64) -> Result<()> {
    let bound = 8.0 * gamma * gamma;
    if eta * lambda > bound {
        return Err(Error::ConvergenceCondition {
            lambda: eta * lambda,
            gamma,
            bound,
        });
    }
    Ok(())
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be > 0, got {v}")))
    }
}

/// Validating builder for [`TrainConfig`].
#[derive(Clone, Debug)]
pub struct TrainConfigBuilder(TrainConfig);

impl TrainConfigBuilder {
    pub fn filters(mut self, k: usize) -> Self {
        self.0.filters = k;
        self
    }

    pub fn filter_shape(mut self, rows: usize, cols: usize) -> Self {
        self.0.filter_shape = Shape::new(rows, cols);
        self
    }

    pub fn max_outer_iterations(mut self, n: usize) -> Self {
        self.0.max_outer_iterations = n;
        self
    }

    pub fn z_inner_iterations(mut self, n: usize) -> Self {
        self.0.z_inner_iterations = n;
        self
    }

    pub fn f_inner_iterations(mut self, n: usize) -> Self {
        self.0.f_inner_iterations = n;
        self
    }

    pub fn penalty(mut self, penalty: PenaltySpec) -> Self {
        self.0.penalty = penalty;
        self
    }

    pub fn cauchy(self, lambda: f64, gamma: Option<f64>) -> Self {
        self.penalty(PenaltySpec::Cauchy { lambda, gamma })
    }

    pub fn soft(self, lambda: f64) -> Self {
        self.penalty(PenaltySpec::Soft { lambda })
    }

    pub fn hard(self, lambda: f64) -> Self {
        self.penalty(PenaltySpec::Hard { lambda })
    }

    pub fn eta_z(mut self, eta: f64) -> Self {
        self.0.eta_z = Some(eta);
        self
    }

    pub fn eta_f(mut self, eta: f64) -> Self {
        self.0.eta_f = eta;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.0.seed = seed;
        self
    }

    pub fn peak(mut self, peak: f64) -> Self {
        self.0.peak = peak;
        self
    }

    pub fn epsilon(mut self, epsilon: f64) -> Self {
        self.0.epsilon = epsilon;
        self
    }

    pub fn build(self) -> Result<TrainConfig> {
        self.0.validate()?;
        Ok(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.filters, 25);
        assert_eq!(c.filter_shape, Shape::new(5, 5));
        assert_eq!(c.max_outer_iterations, 100);
        assert_eq!(
            c.penalty,
            PenaltySpec::Cauchy {
                lambda: 1.0,
                gamma: None
            }
        );
        c.validate().unwrap();
    }

    #[test]
    fn cauchy_step_bound() {
        let gamma = 0.5;
        let ok = TrainConfig::builder()
            .cauchy(1.0, Some(gamma))
            .eta_z(8.0 * gamma * gamma)
            .build();
        assert!(ok.is_ok());
        let bad = TrainConfig::builder()
            .cauchy(1.0, Some(gamma))
            .eta_z(2.0 + 1e-9)
            .build();
        assert!(matches!(bad, Err(Error::ConvergenceCondition { .. })));
        // baselines are not bound by the Cauchy condition
        assert!(TrainConfig::builder().soft(1.0).eta_z(100.0).build().is_ok());
    }

    #[test]
    fn resolved_steps() {
        let c = TrainConfig::builder().cauchy(1.0, None).build().unwrap();
        assert_eq!(c.resolve_eta_z(Some(3.0)).unwrap(), 72.0);
        let c = TrainConfig::builder().cauchy(1.0, None).eta_z(80.0).build().unwrap();
        assert!(c.resolve_eta_z(Some(3.0)).is_err());
        let c = TrainConfig::builder().hard(2.0).build().unwrap();
        assert_eq!(c.resolve_eta_z(None).unwrap(), DEFAULT_BASELINE_ETA);
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(TrainConfig::builder().filters(0).build().is_err());
        assert!(TrainConfig::builder().z_inner_iterations(0).build().is_err());
        assert!(TrainConfig::builder().eta_f(0.0).build().is_err());
        assert!(TrainConfig::builder().soft(-1.0).build().is_err());
    }
}
