//! Voronoi-cell geometry under the maximal-inscribed-disk approximation.
//!
//! The typical user associates with its nearest MBS, so it lives inside
//! that MBS's Voronoi cell. The cell itself has no tractable shape law;
//! the model replaces it by B_max, the largest disk centered at the MBS
//! that fits inside the cell. Two classical facts drive everything here:
//!
//! - the user–MBS distance Y is Rayleigh, f_Y(y) = 2λ_mπy·e^(−λ_mπy²);
//! - the inscribed-disk radius X (half the distance to the nearest other
//!   MBS) has f_X(x) = 8λ_mπx·e^(−4λ_mπx²).
//!
//! Treating X and Y as independent gives the density-free constant
//! p_in = P[X ≥ Y] = 1/5 (the user falls inside B_max one time in five)
//! and, conditioned on being inside, the probability p_N^(i) that B_max
//! holds at least i helpers — both exposed here. The [`distance`]
//! submodule builds the conditional distance distribution to the i-th
//! nearest in-cell helper on top of these pieces, and [`lens`] supplies
//! the circle–circle intersection geometry its integrals need.

pub mod distance;
pub mod lens;

pub use distance::{distance_pdf, distance_pdf_parts, unconstrained_pdf, DistanceDistribution};
pub use lens::{lens_area, lens_area_derivative};

use crate::error::{Error, Result};
use crate::math::quad::{integrate, integrate_to_inf, QuadratureSpec, TailBound};
use crate::math::special::erfc_fn;

use std::f64::consts::PI;

/// Spatial densities of the MBS and helper processes.
#[derive(Debug, Clone, Copy)]
pub struct GeometryParams {
    /// MBS density λ_m, nodes per square meter.
    pub lambda_m: f64,
    /// D2D helper density λ_d, nodes per square meter.
    pub lambda_d: f64,
}

impl GeometryParams {
    pub fn new(lambda_m: f64, lambda_d: f64) -> Result<Self> {
        for (name, v) in [("lambda_m", lambda_m), ("lambda_d", lambda_d)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(GeometryParams { lambda_m, lambda_d })
    }

    /// Helper-to-MBS density ratio η_d = λ_d/λ_m.
    pub fn eta_d(&self) -> f64 {
        self.lambda_d / self.lambda_m
    }
}

/// Density of the maximal-inscribed-disk radius,
/// f_X(x) = 8λ_mπx·e^(−4λ_mπx²): half the nearest-neighbor distance of
/// the MBS process.
pub fn max_disk_radius_pdf(x: f64, g: &GeometryParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    8.0 * g.lambda_m * PI * x * (-4.0 * g.lambda_m * PI * x * x).exp()
}

/// Density of the user–MBS distance, f_Y(y) = 2λ_mπy·e^(−λ_mπy²).
pub fn user_mbs_distance_pdf(y: f64, g: &GeometryParams) -> f64 {
    if y < 0.0 {
        return 0.0;
    }
    2.0 * g.lambda_m * PI * y * (-g.lambda_m * PI * y * y).exp()
}

/// CDF of the user–MBS distance, F_Y(y) = 1 − e^(−λ_mπy²).
pub fn user_mbs_distance_cdf(y: f64, g: &GeometryParams) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    1.0 - (-g.lambda_m * PI * y * y).exp()
}

/// P[the typical user lies inside B_max] = P[X ≥ Y] = 1/5, independent of
/// densities: both X² and Y² are exponential, with rates 4λ_mπ and λ_mπ.
pub fn p_user_inside(_g: &GeometryParams) -> f64 {
    0.2
}

/// The defining integral ∫ (1 − F_X(y)) f_Y(y) dy of [`p_user_inside`],
/// kept as a numerical cross-check of the closed constant.
pub fn p_user_inside_integral(g: &GeometryParams, spec: &QuadratureSpec) -> Result<f64> {
    let lm = g.lambda_m;
    let coef = 2.0 * lm * PI;
    let tail = TailBound::Gauss {
        coef,
        rate: 5.0 * lm * PI,
    };
    integrate_to_inf(
        |y| Ok(coef * y * (-5.0 * lm * PI * y * y).exp()),
        0.0,
        tail,
        spec,
    )
}

/// p_N^(i): probability that B_max contains at least i helpers, given the
/// user is inside B_max (normalized by p_in):
///
/// ```text
/// p_N^(i) = 5(1+4/η)^(−i) + (10/3)(1+6/η)^(−i) − 8(1+5/η)^(−i)
/// ```
///
/// Tends to 1/3 for every fixed i as η → ∞ (a dense cell almost surely
/// holds i helpers, and the residual 1/3 is the chance they land inside
/// B_max rather than the remainder of the cell).
pub fn p_at_least_i_inside(i: u32, eta_d: f64) -> Result<f64> {
    if i < 1 {
        return Err(Error::Domain("neighbor order i must be >= 1".into()));
    }
    if !(eta_d > 0.0) || !eta_d.is_finite() {
        return Err(Error::Domain(format!(
            "eta_d must be positive and finite, got {eta_d}"
        )));
    }
    let i = i as i32;
    Ok(5.0 * (1.0 + 4.0 / eta_d).powi(-i) + (10.0 / 3.0) * (1.0 + 6.0 / eta_d).powi(-i)
        - 8.0 * (1.0 + 5.0 / eta_d).powi(-i))
}

/// Geometric weight κ of the full-containment term of the distance
/// density, as a function of b = λ_mπr²:
///
/// ```text
/// κ(b) = e^(−4b)/5 − (2/15)e^(−5b)
///      + √(πb)·[ (√6/9)·e^(−5b/6)·erfc(5√(6b)/6)
///              − (4√5/25)·e^(−4b/5)·erfc(4√(5b)/5) ]
/// ```
///
/// κ(0) = 1/5 − 2/15 = 1/15 exactly, and κ ≥ 0 with Gaussian-type decay.
/// This is the closed form of the defining double integral
/// ∫ f_Y(y) ∫_{y+r}^∞ f_X(x) F_Y(x) dx dy (see [`kappa_integral`]), i.e.
/// the probability weight of configurations where the disk b(o, r) around
/// the user fits entirely inside B_max.
pub fn kappa(b: f64) -> Result<f64> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::Domain(format!(
            "kappa argument must be >= 0 and finite, got {b}"
        )));
    }
    let root6 = 6.0_f64.sqrt();
    let root5 = 5.0_f64.sqrt();
    Ok((-4.0 * b).exp() / 5.0 - (2.0 / 15.0) * (-5.0 * b).exp()
        + (PI * b).sqrt()
            * (root6 / 9.0 * (-5.0 * b / 6.0).exp() * erfc_fn(5.0 * (6.0 * b).sqrt() / 6.0)
                - 4.0 * root5 / 25.0
                    * (-4.0 * b / 5.0).exp()
                    * erfc_fn(4.0 * (5.0 * b).sqrt() / 5.0)))
}

/// Defining double integral of κ at radius r (so b = λ_mπr²), evaluated by
/// quadrature. Used to validate the closed form, not on the hot path.
pub fn kappa_integral(r: f64, g: &GeometryParams, spec: &QuadratureSpec) -> Result<f64> {
    let lm = g.lambda_m;
    let y_max = (37.0 / (lm * PI)).sqrt();
    integrate(
        |y| {
            let inner = integrate(
                |x| Ok(max_disk_radius_pdf(x, g) * user_mbs_distance_cdf(x, g)),
                y + r,
                // f_X's Gaussian envelope makes anything past this radius
                // negligible at any tolerance of interest.
                (y + r).max((37.0 / (4.0 * lm * PI)).sqrt()) + 1.0,
                spec,
            )?;
            Ok(user_mbs_distance_pdf(y, g) * inner)
        },
        0.0,
        y_max,
        spec,
    )
}
