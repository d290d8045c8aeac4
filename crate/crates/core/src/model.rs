//! Model parameters, the mean-square stability conditions, and the closed-form
//! solution used as the exact oracle.
//!
//! The SPDE has constant coefficients and a Dirac initial datum, so its
//! solution at time `T` is a product of two Gaussians whose means are shifted
//! by the terminal Brownian values. The quadrant functional therefore
//! factorises into two normal CDFs.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Coefficients of the 2-d Zakai-type SPDE.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub mu_x: f64,
    pub mu_y: f64,
    pub rho_x: f64,
    pub rho_y: f64,
    pub rho_xy: f64,
    /// Horizon.
    pub t: f64,
    pub x0: f64,
    pub y0: f64,
}

impl ModelParams {
    /// Validates ranges. A parameter set that violates the stability
    /// conditions is still constructed (with a logged warning) so that the
    /// finite-difference scheme can be explored; estimators refuse it.
    pub fn new(
        mu_x: f64,
        mu_y: f64,
        rho_x: f64,
        rho_y: f64,
        rho_xy: f64,
        t: f64,
        x0: f64,
        y0: f64,
    ) -> Result<Self> {
        let params = ModelParams {
            mu_x,
            mu_y,
            rho_x,
            rho_y,
            rho_xy,
            t,
            x0,
            y0,
        };
        params.validate()?;
        if !check_stability(&params) {
            log::warn!(
                "rho_x={rho_x}, rho_y={rho_y}, rho_xy={rho_xy} violate the mean-square stability conditions"
            );
        }
        Ok(params)
    }

    /// Parameters of the numerical experiments: `x0 = y0 = 2`, `mu = 0.0809`,
    /// `rho_x = rho_y = 0.2`, `rho_xy = 0.45`, `T = 1`.
    pub fn reference() -> Self {
        ModelParams {
            mu_x: 0.0809,
            mu_y: 0.0809,
            rho_x: 0.2,
            rho_y: 0.2,
            rho_xy: 0.45,
            t: 1.0,
            x0: 2.0,
            y0: 2.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.mu_x, self.mu_y, self.rho_x, self.rho_y, self.rho_xy, self.t, self.x0, self.y0,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("all model parameters must be finite".into()));
        }
        if !(0.0..1.0).contains(&self.rho_x) || !(0.0..1.0).contains(&self.rho_y) {
            return Err(Error::InvalidParams(format!(
                "rho_x and rho_y must lie in [0, 1), got {} and {}",
                self.rho_x, self.rho_y
            )));
        }
        if !(-1.0..=1.0).contains(&self.rho_xy) {
            return Err(Error::InvalidParams(format!(
                "rho_xy must lie in [-1, 1], got {}",
                self.rho_xy
            )));
        }
        if self.t <= 0.0 {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {}", self.t)));
        }
        Ok(())
    }

    pub fn is_stable(&self) -> bool {
        check_stability(self)
    }

    /// Estimators call this before sampling.
    pub fn require_stable(&self) -> Result<()> {
        self.validate()?;
        if self.is_stable() {
            Ok(())
        } else {
            Err(Error::StabilityViolated {
                rho_x: self.rho_x,
                rho_y: self.rho_y,
                rho_xy: self.rho_xy,
            })
        }
    }

    /// Same parameters with the noise switched off.
    pub fn deterministic(&self) -> Self {
        ModelParams {
            rho_x: 0.0,
            rho_y: 0.0,
            ..*self
        }
    }

    /// Same parameters with zero drift.
    pub fn driftless(&self) -> Self {
        ModelParams {
            mu_x: 0.0,
            mu_y: 0.0,
            ..*self
        }
    }
}

/// One step's worth of independent standard normals.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NormalPair {
    pub z_x: f64,
    pub z_y: f64,
}

impl NormalPair {
    pub fn new(z_x: f64, z_y: f64) -> Self {
        NormalPair { z_x, z_y }
    }
}

/// Rounding slack on the non-strict inequalities, so that boundary cases such
/// as `rho = 1/sqrt(2)` (whose square is not representable) stay admissible.
const STABILITY_SLACK: f64 = 4.0 * f64::EPSILON;

/// The three mean-square stability inequalities (non-strict).
pub fn check_stability(params: &ModelParams) -> bool {
    let ModelParams {
        rho_x,
        rho_y,
        rho_xy,
        ..
    } = *params;
    let a = rho_xy.abs();
    let bound = 1.0 + STABILITY_SLACK;
    2.0 * rho_x * rho_x * (1.0 + 2.0 * a) <= bound
        && 2.0 * rho_y * rho_y * (1.0 + 2.0 * a) <= bound
        && 2.0 * rho_x * rho_y * (3.0 * rho_xy * rho_xy + 2.0 * a + 1.0) <= bound
}

/// Correlated second normal `rho_xy z_x + sqrt(1 - rho_xy^2) z_y`.
#[inline]
pub fn correlate(pair: NormalPair, rho_xy: f64) -> f64 {
    rho_xy * pair.z_x + (1.0 - rho_xy * rho_xy).sqrt() * pair.z_y
}

/// Standard normal CDF through the complementary error function, which keeps
/// full relative accuracy in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Centres and standard deviations of the terminal Gaussian density.
fn terminal_moments(params: &ModelParams, w_x: f64, w_y: f64) -> ([f64; 2], [f64; 2]) {
    let t = params.t;
    let m_x = params.x0 + params.mu_x * t + params.rho_x.sqrt() * w_x;
    let m_y = params.y0 + params.mu_y * t + params.rho_y.sqrt() * w_y;
    let s_x = ((1.0 - params.rho_x) * t).sqrt();
    let s_y = ((1.0 - params.rho_y) * t).sqrt();
    ([m_x, m_y], [s_x, s_y])
}

/// Solution density at `(x, y)` and time `T` given the terminal Brownian
/// values `W_T^x`, `W_T^y`.
pub fn exact_density(params: &ModelParams, w_x: f64, w_y: f64, x: f64, y: f64) -> f64 {
    let ([m_x, m_y], [s_x, s_y]) = terminal_moments(params, w_x, w_y);
    let q = ((x - m_x) / s_x).powi(2) + ((y - m_y) / s_y).powi(2);
    (-0.5 * q).exp() / (2.0 * PI * s_x * s_y)
}

/// Mass of the solution in the positive quadrant.
pub fn exact_functional(params: &ModelParams, w_x: f64, w_y: f64) -> f64 {
    let ([m_x, m_y], [s_x, s_y]) = terminal_moments(params, w_x, w_y);
    norm_cdf(m_x / s_x) * norm_cdf(m_y / s_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stability_examples() {
        let mut p = ModelParams::reference();
        assert!(check_stability(&p));

        // all three left-hand sides equal 1
        p.rho_x = std::f64::consts::FRAC_1_SQRT_2;
        p.rho_y = std::f64::consts::FRAC_1_SQRT_2;
        p.rho_xy = 0.0;
        assert!(check_stability(&p));

        p.rho_x = 0.9;
        p.rho_y = 0.9;
        p.rho_xy = 1.0;
        assert!(!check_stability(&p));
    }

    #[test]
    fn stability_left_sides_for_reference() {
        let p = ModelParams::reference();
        let a = p.rho_xy.abs();
        let l1 = 2.0 * p.rho_x.powi(2) * (1.0 + 2.0 * a);
        let l3 = 2.0 * p.rho_x * p.rho_y * (3.0 * p.rho_xy.powi(2) + 2.0 * a + 1.0);
        assert!((l1 - 0.152).abs() < 1e-12);
        assert!((l3 - 0.2006).abs() < 1e-12);
    }

    #[test]
    fn stability_flips_at_analytic_root() {
        // With rho_y = 0.2, rho_xy = 0.45 the binding constraint is
        // 2 rho_x^2 (1 + 0.9) <= 1.
        let root = (1.0f64 / 3.8).sqrt();
        let below = ModelParams {
            rho_x: root * (1.0 - 1e-12),
            ..ModelParams::reference()
        };
        let above = ModelParams {
            rho_x: root * (1.0 + 1e-12),
            ..ModelParams::reference()
        };
        assert!(check_stability(&below));
        assert!(!check_stability(&above));
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(ModelParams::new(0.0, 0.0, 1.0, 0.2, 0.0, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 0.2, 0.2, 1.5, 1.0, 0.0, 0.0).is_err());
        assert!(ModelParams::new(0.0, 0.0, 0.2, 0.2, 0.0, 0.0, 0.0, 0.0).is_err());
        // unstable but valid: constructed, refused by estimators
        let p = ModelParams::new(0.0, 0.0, 0.9, 0.9, 1.0, 1.0, 0.0, 0.0).unwrap();
        assert!(matches!(p.require_stable(), Err(Error::StabilityViolated { .. })));
    }

    #[test]
    fn correlate_examples() {
        let pair = NormalPair::new(0.3, -1.7);
        assert_eq!(correlate(pair, 0.0), -1.7);
        assert_eq!(correlate(pair, 1.0), 0.3);
        let v = correlate(NormalPair::new(1.0, 1.0), 0.45);
        assert!((v - (0.45 + (1.0f64 - 0.2025).sqrt())).abs() < 1e-15);
        assert!((v - 1.3430).abs() < 1e-4);
    }

    #[test]
    fn density_peak_values() {
        let p = ModelParams::reference();
        let (w_x, w_y) = (0.4, -1.1);
        let mx = p.x0 + p.mu_x * p.t + p.rho_x.sqrt() * w_x;
        let my = p.y0 + p.mu_y * p.t + p.rho_y.sqrt() * w_y;
        let peak = 1.0 / (2.0 * PI * ((1.0 - p.rho_x) * (1.0 - p.rho_y)).sqrt() * p.t);
        assert!((exact_density(&p, w_x, w_y, mx, my) - peak).abs() < 1e-15);

        let std = ModelParams {
            mu_x: 0.0,
            mu_y: 0.0,
            rho_x: 0.0,
            rho_y: 0.0,
            rho_xy: 0.0,
            t: 1.0,
            x0: 0.0,
            y0: 0.0,
        };
        let v = exact_density(&std, 3.0, -2.0, 0.0, 0.0);
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-16);

        // reflection about the mode in x
        let d = 0.731;
        let a = exact_density(&p, w_x, w_y, mx + d, 1.3);
        let b = exact_density(&p, w_x, w_y, mx - d, 1.3);
        assert!((a - b).abs() <= 1e-16 * a.abs().max(1e-300));
    }

    #[test]
    fn functional_examples() {
        let zero = ModelParams {
            mu_x: 0.0,
            mu_y: 0.0,
            rho_x: 0.2,
            rho_y: 0.2,
            rho_xy: 0.45,
            t: 1.0,
            x0: 0.0,
            y0: 0.0,
        };
        assert!((exact_functional(&zero, 0.0, 0.0) - 0.25).abs() < 1e-16);
        let far = ModelParams {
            x0: 60.0,
            y0: 60.0,
            ..zero
        };
        assert_eq!(exact_functional(&far, 0.0, 0.0), 1.0);
    }

    #[test]
    fn norm_cdf_tails() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-16);
        // Phi(-10) = 7.619853024160527e-24
        assert!((norm_cdf(-10.0) / 7.619853024160527e-24 - 1.0).abs() < 1e-13);
        // Phi(1) = 0.8413447460685429
        assert!((norm_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn functional_monotone(
            x0 in -3.0f64..3.0, y0 in -3.0f64..3.0,
            wx in -2.0f64..2.0, wy in -2.0f64..2.0,
            d in 0.0f64..0.5,
        ) {
            let p = ModelParams { x0, y0, ..ModelParams::reference() };
            let base = exact_functional(&p, wx, wy);
            prop_assert!(base >= 0.0 && base <= 1.0);
            let px = ModelParams { x0: x0 + d, ..p };
            let py = ModelParams { y0: y0 + d, ..p };
            prop_assert!(exact_functional(&px, wx, wy) >= base);
            prop_assert!(exact_functional(&py, wx, wy) >= base);
            prop_assert!(exact_functional(&p, wx + d, wy) >= base);
            prop_assert!(exact_functional(&p, wx, wy + d) >= base);
        }
    }
}
