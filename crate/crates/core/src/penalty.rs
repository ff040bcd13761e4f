//! Sparsity penalties and their elementwise proximal operators.
//!
//! Every operator here minimizes `(z - x)^2 + lambda * phi(z)` for its own
//! `phi`. The Cauchy operator solves the cubic stationarity condition
//! `z^3 - x z^2 + (gamma^2 + lambda) z - gamma^2 x = 0` in closed form.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Grid2;

/// Scale and weight of the Cauchy penalty.
///
/// `lambda <= 8 gamma^2` keeps the prox objective convex; [`CauchyParams::new`]
/// enforces it and [`CauchyParams::new_unchecked`] only records it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyParams {
    gamma: f64,
    lambda: f64,
}

impl CauchyParams {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        let params = Self::new_unchecked(gamma, lambda)?;
        if !params.is_convergent() {
            return Err(Error::ConvergenceCondition {
                lambda,
                gamma,
                bound: params.lambda_bound(),
            });
        }
        Ok(params)
    }

    /// Accepts any `gamma > 0`, `lambda >= 0`; see [`Self::is_convergent`].
    pub fn new_unchecked(gamma: f64, lambda: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!("cauchy gamma must be > 0, got {gamma}")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!("cauchy lambda must be >= 0, got {lambda}")));
        }
        Ok(CauchyParams { gamma, lambda })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `8 gamma^2`
    pub fn lambda_bound(&self) -> f64 {
        8.0 * self.gamma * self.gamma
    }

    pub fn is_convergent(&self) -> bool {
        self.lambda <= self.lambda_bound()
    }
}

/// The three thresholding families.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PenaltyKind {
    Cauchy(CauchyParams),
    /// l1 penalty, soft thresholding at `lambda / 2`.
    Soft {
        lambda: f64,
    },
    /// l0 penalty, hard thresholding at `lambda`.
    Hard {
        lambda: f64,
    },
}

impl PenaltyKind {
    pub fn cauchy(gamma: f64, lambda: f64) -> Result<Self> {
        CauchyParams::new(gamma, lambda).map(PenaltyKind::Cauchy)
    }

    pub fn soft(lambda: f64) -> Result<Self> {
        check_threshold(lambda)?;
        Ok(PenaltyKind::Soft { lambda })
    }

    pub fn hard(lambda: f64) -> Result<Self> {
        check_threshold(lambda)?;
        Ok(PenaltyKind::Hard { lambda })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::Cauchy(_) => "ict",
            PenaltyKind::Soft { .. } => "ist",
            PenaltyKind::Hard { .. } => "iht",
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            PenaltyKind::Cauchy(p) => p.lambda,
            PenaltyKind::Soft { lambda } | PenaltyKind::Hard { lambda } => lambda,
        }
    }

    #[inline]
    pub fn prox(&self, x: f64) -> f64 {
        match self {
            PenaltyKind::Cauchy(p) => prox_cauchy(x, p),
            PenaltyKind::Soft { lambda } => soft(x, *lambda),
            PenaltyKind::Hard { lambda } => hard(x, *lambda),
        }
    }

    /// Weighted penalty of one coefficient, `lambda * phi(z)`.
    #[inline]
    pub fn penalty(&self, z: f64) -> f64 {
        match *self {
            PenaltyKind::Cauchy(ref p) => cauchy_penalty(z, p),
            PenaltyKind::Soft { lambda } => lambda * z.abs(),
            PenaltyKind::Hard { lambda } => {
                if z != 0.0 {
                    lambda
                } else {
                    0.0
                }
            }
        }
    }
}

fn check_threshold(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("threshold lambda must be >= 0, got {lambda}")))
    }
}

/// Cauchy density `gamma / (pi (gamma^2 + (x - delta)^2))`.
pub fn cauchy_pdf(x: f64, gamma: f64, delta: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(Error::invalid(format!("cauchy gamma must be > 0, got {gamma}")));
    }
    let d = x - delta;
    Ok(gamma / (PI * (gamma * gamma + d * d)))
}

/// Negative log-prior `-lambda log(gamma / (pi (gamma^2 + z^2)))`.
#[inline]
pub fn cauchy_penalty(z: f64, params: &CauchyParams) -> f64 {
    let g = params.gamma;
    -params.lambda * (g / (PI * (g * g + z * z))).ln()
}

/// Closed-form Cauchy proximal operator.
///
/// Writes the real root of the stationarity cubic as `z = x/3 + t` with
/// Cardano's `p`, `q` and discriminant `delta = q^2/4 + p^3/27`. With
/// `delta >= 0` there is one real root. `delta < 0` only happens outside the
/// convex regime; the three Viete roots are then compared on the prox
/// objective and the smallest wins.
pub fn prox_cauchy(x: f64, params: &CauchyParams) -> f64 {
    if x == 0.0 || params.lambda == 0.0 {
        return x;
    }
    // solve for |x| and restore the sign so the operator is exactly odd
    let a = x.abs();
    let z = cauchy_root(a, params).clamp(0.0, a);
    z.copysign(x)
}

fn cauchy_root(x: f64, params: &CauchyParams) -> f64 {
    let g2 = params.gamma * params.gamma;
    let lam = params.lambda;
    let p = lam + g2 - x * x / 3.0;
    let q = -2.0 / 27.0 * x * x * x + (lam - 2.0 * g2) * x / 3.0;
    let mut delta = q * q / 4.0 + p * p * p / 27.0;

    let scale = 1f64.max(q * q).max(p.abs().powi(3));
    if delta < 0.0 && delta >= -1e-14 * scale {
        delta = 0.0;
    }

    if delta >= 0.0 {
        let s = delta.sqrt();
        // u is the larger-magnitude cube root, v = -p / (3u) the other one
        let u = (-q / 2.0 - s.copysign(q)).cbrt();
        if u == 0.0 {
            return x / 3.0;
        }
        let v = -p / (3.0 * u);
        // u + v cancels when p > 0; u^3 + v^3 = -q gives a stable quotient
        let t = if p > 0.0 { -q / (u * u + p / 3.0 + v * v) } else { u + v };
        x / 3.0 + t
    } else {
        // p < 0 here
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3)
            .map(|k| x / 3.0 + m * (theta - 2.0 * PI * k as f64 / 3.0).cos())
            .map(|z| (prox_objective(z, x, params), z))
            .fold(
                (f64::INFINITY, 0.0),
                |best, cand| if cand.0 < best.0 { cand } else { best },
            )
            .1
    }
}

/// `(z - x)^2 + lambda log(gamma^2 + z^2)`, the Cauchy prox objective without
/// its z-independent constant.
fn prox_objective(z: f64, x: f64, params: &CauchyParams) -> f64 {
    let d = z - x;
    d * d + params.lambda * (params.gamma * params.gamma + z * z).ln()
}

#[inline]
fn soft(x: f64, lambda: f64) -> f64 {
    let h = lambda / 2.0;
    if x > h {
        x - h
    } else if x < -h {
        x + h
    } else {
        0.0
    }
}

#[inline]
fn hard(x: f64, lambda: f64) -> f64 {
    if x.abs() > lambda {
        x
    } else {
        0.0
    }
}

/// Soft thresholding: shifts by `lambda / 2` toward zero, zeroing `|x| <= lambda / 2`.
pub fn prox_soft(x: f64, lambda: f64) -> Result<f64> {
    check_threshold(lambda)?;
    Ok(soft(x, lambda))
}

/// Hard thresholding: keeps `x` when `|x| > lambda`, otherwise 0.
pub fn prox_hard(x: f64, lambda: f64) -> Result<f64> {
    check_threshold(lambda)?;
    Ok(hard(x, lambda))
}

pub fn apply_prox(values: &Grid2, kind: &PenaltyKind) -> Grid2 {
    values.map(|v| kind.prox(v))
}

/// `steps` evenly spaced `(x, prox(x))` samples over `[x_min, x_max]`.
pub fn prox_curve(kind: &PenaltyKind, x_min: f64, x_max: f64, steps: usize) -> Result<Vec<(f64, f64)>> {
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::invalid(format!("prox curve range [{x_min}, {x_max}]")));
    }
    if steps < 2 {
        return Err(Error::invalid("prox curve needs at least 2 steps"));
    }
    let n = (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| {
            // symmetric in i and steps-1-i, so mirrored ranges give mirrored points
            let x = (x_min * (steps - 1 - i) as f64 + x_max * i as f64) / n;
            (x, kind.prox(x))
        })
        .collect())
}

/// Writes `x,prox` CSV.
pub fn write_prox_curve_csv<W: Write>(mut w: W, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "x,prox")?;
    for (x, z) in curve {
        writeln!(w, "{x},{z}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pdf_values() {
        assert!((cauchy_pdf(0.0, 1.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        let (g, d) = (0.7, -1.3);
        let half = cauchy_pdf(d + g, g, d).unwrap();
        assert!((half - 1.0 / (2.0 * PI * g)).abs() < 1e-15);
        assert!(cauchy_pdf(0.0, 0.0, 0.0).is_err());
        assert!(cauchy_pdf(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn penalty_at_zero_is_log_pi() {
        let p = CauchyParams::new(1.0, 1.0).unwrap();
        assert!((cauchy_penalty(0.0, &p) - PI.ln()).abs() < 1e-15);
        assert_eq!(cauchy_penalty(1.7, &p), cauchy_penalty(-1.7, &p));
    }

    #[test]
    fn checked_and_unchecked_params() {
        assert!(CauchyParams::new(0.5, 2.0).is_ok());
        assert!(matches!(
            CauchyParams::new(0.5, 2.0000001),
            Err(Error::ConvergenceCondition { .. })
        ));
        let p = CauchyParams::new_unchecked(0.5, 3.0).unwrap();
        assert!(!p.is_convergent());
        assert!(CauchyParams::new_unchecked(0.0, 1.0).is_err());
        assert!(CauchyParams::new_unchecked(1.0, -1.0).is_err());
    }

    #[test]
    fn prox_cauchy_fixed_points() {
        let p = CauchyParams::new(0.3, 0.5).unwrap();
        assert_eq!(prox_cauchy(0.0, &p), 0.0);
        let id = CauchyParams::new(0.3, 0.0).unwrap();
        for x in [-3.0, -0.1, 0.2, 5.0] {
            assert_eq!(prox_cauchy(x, &id), x);
        }
    }

    #[test]
    fn prox_cauchy_solves_the_cubic() {
        let p = CauchyParams::new(0.5, 1.5).unwrap();
        for x in [-7.0, -3.0, -0.4, 0.01, 1.0, 3.0, 12.0] {
            let z = prox_cauchy(x, &p);
            let g2 = 0.25;
            let r = z * z * z - x * z * z + (g2 + 1.5) * z - g2 * x;
            assert!(r.abs() <= 1e-9 * (1.0 + x.abs().powi(3)), "x={x} z={z} r={r}");
        }
    }

    #[test]
    fn table_rows() {
        assert_eq!(prox_soft(1.0, 1.0).unwrap(), 0.5);
        assert_eq!(prox_soft(0.4, 1.0).unwrap(), 0.0);
        assert_eq!(prox_soft(-2.0, 1.0).unwrap(), -1.5);
        assert_eq!(prox_hard(2.0, 1.0).unwrap(), 2.0);
        assert_eq!(prox_hard(0.5, 1.0).unwrap(), 0.0);
        assert_eq!(prox_hard(-1.0, 1.0).unwrap(), 0.0);
        assert!(prox_soft(1.0, -0.1).is_err());
        assert!(prox_hard(1.0, -0.1).is_err());
    }

    #[test]
    fn apply_prox_elementwise() {
        let g = Grid2::from_rows(&[[2.0, 0.5]]).unwrap();
        let out = apply_prox(&g, &PenaltyKind::hard(1.0).unwrap());
        assert_eq!(out.values(), &[2.0, 0.0]);

        let zero = Grid2::zeros(crate::tensor::Shape::new(3, 3));
        for kind in [
            PenaltyKind::cauchy(0.2, 0.1).unwrap(),
            PenaltyKind::soft(1.0).unwrap(),
            PenaltyKind::hard(1.0).unwrap(),
        ] {
            assert_eq!(apply_prox(&zero, &kind), zero);
        }
    }

    #[test]
    fn soft_curve() {
        let c = prox_curve(&PenaltyKind::soft(1.0).unwrap(), -2.0, 2.0, 5).unwrap();
        assert_eq!(c, vec![(-2.0, -1.5), (-1.0, -0.5), (0.0, 0.0), (1.0, 0.5), (2.0, 1.5)]);
        let mut buf = Vec::new();
        write_prox_curve_csv(&mut buf, &c[..2]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,prox\n-2,-1.5\n-1,-0.5\n");
        let k = PenaltyKind::soft(1.0).unwrap();
        assert!(prox_curve(&k, 1.0, 1.0, 5).is_err());
        assert!(prox_curve(&k, -1.0, 1.0, 1).is_err());
    }
}
