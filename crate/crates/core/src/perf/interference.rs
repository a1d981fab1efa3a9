//! Interference factor for D2D links under the thinned-interferer model.
//!
//! Active D2D interferers are approximated by an independent Poisson
//! process of intensity λ̃_m = p_int·λ_m (one active helper per nonempty
//! cell). The Laplace-functional exponent of that field involves
//!
//! δ_d(s) = E_Q[ q^{−(α−2)} · ₂F₁(1, 1−2/α; 2−2/α; −s·q^{−α}) ],
//!
//! with Q the Rayleigh-distributed distance to the nearest interferer.
//! Rate integrals evaluate δ_d at millions of `s` values, so the
//! quadrature result is tabulated once on a logarithmic grid and read
//! back through a local cubic interpolant.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::{gamma_fn, hyp2f1, integrate, QuadratureSpec};

/// Log-range of the tabulated `s` values: e^(−30) ≈ 9e-14 covers any
/// threshold/distance combination of interest from below, and for
/// s ≥ e^(30) the asymptotic branch takes over.
const LN_S_LO: f64 = -30.0;
const LN_S_HI: f64 = 30.0;
const TABLE_POINTS: usize = 481;

/// Above this argument the hypergeometric kernel is replaced by its
/// leading power-law asymptote; the relative error is O(z^(−2/α)), and
/// the region contributes O(1e-6) of the expectation's mass.
const Z_ASYMPTOTIC: f64 = 1e12;

/// ₂F₁(1, b; c; −t) for t ≥ 0, mapped onto the [0, 1) domain of
/// [`hyp2f1`] by the Pfaff transformation
/// ₂F₁(1, b; c; z) = (1−z)^(−1)·₂F₁(1, c−b; c; z/(z−1)).
pub(super) fn hyp2f1_one_neg(b: f64, c: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "hyp2f1_one_neg expects a nonnegative magnitude, got {t}"
        )));
    }
    Ok(hyp2f1(1.0, c - b, c, t / (1.0 + t))? / (1.0 + t))
}

/// δ_d(s) by direct quadrature against the Rayleigh density of Q.
pub(super) fn delta_d_exact(
    s: f64,
    alpha: f64,
    lambda_tilde: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!(
            "delta_d is tabulated for finite s > 0, got {s}"
        )));
    }
    let b = 1.0 - 2.0 / alpha;
    let c = 2.0 - 2.0 / alpha;
    // Leading z → ∞ coefficient of ₂F₁(1, b; c; −z): Γ(c)Γ(1−b)·z^(b−1)
    // here Γ(2−2/α)Γ(2/α)·z^(−(1−2/α)); combined with q^(−(α−2)) the
    // q-powers cancel exactly, which keeps the integrand finite as q → 0.
    let k_asym = gamma_fn(c)? * gamma_fn(1.0 - b)?;
    let q_hi = (37.0 / (lambda_tilde * PI)).sqrt();
    integrate(
        |q| {
            if q <= 0.0 {
                return Ok(0.0);
            }
            let z = s * q.powf(-alpha);
            let weighted = if !z.is_finite() || z > Z_ASYMPTOTIC {
                k_asym * s.powf(2.0 / alpha - 1.0)
            } else {
                q.powf(2.0 - alpha) * hyp2f1_one_neg(b, c, z)?
            };
            Ok(2.0 * PI * lambda_tilde * q * (-lambda_tilde * PI * q * q).exp() * weighted)
        },
        0.0,
        q_hi,
        spec,
    )
}

/// δ_d(s) tabulated on a uniform ln‑s grid with a Catmull–Rom readout.
#[derive(Debug, Clone)]
pub(super) struct DeltaDTable {
    pub(super) alpha: f64,
    pub(super) k_asym: f64,
    step: f64,
    vals: Vec<f64>,
}

impl DeltaDTable {
    pub(super) fn build(alpha: f64, lambda_tilde: f64, spec: &QuadratureSpec) -> Result<Self> {
        let b = 1.0 - 2.0 / alpha;
        let k_asym = gamma_fn(2.0 - 2.0 / alpha)? * gamma_fn(1.0 - b)?;
        let step = (LN_S_HI - LN_S_LO) / (TABLE_POINTS - 1) as f64;
        let mut vals = Vec::with_capacity(TABLE_POINTS);
        for j in 0..TABLE_POINTS {
            let s = (LN_S_LO + step * j as f64).exp();
            vals.push(delta_d_exact(s, alpha, lambda_tilde, spec)?);
        }
        Ok(DeltaDTable {
            alpha,
            k_asym,
            step,
            vals,
        })
    }

    /// δ_d(s) for any s > 0: the interpolant inside the tabulated range,
    /// the power-law asymptote K·s^(2/α−1) beyond its right edge.
    pub(super) fn value(&self, s: f64) -> f64 {
        if s.ln() >= LN_S_HI {
            self.k_asym * s.powf(2.0 / self.alpha - 1.0)
        } else {
            self.eval(s)
        }
    }

    /// Interpolated δ_d(s). Arguments beyond the grid clamp to the edge
    /// values; [`Self::value`] dispatches s ≥ e^30 to the asymptote instead.
    pub(super) fn eval(&self, s: f64) -> f64 {
        let x = (s.ln() - LN_S_LO) / self.step;
        let n = self.vals.len();
        if !(x > 0.0) {
            return self.vals[0];
        }
        if x >= (n - 1) as f64 {
            return self.vals[n - 1];
        }
        let j = x as usize;
        let t = x - j as f64;
        let p1 = self.vals[j];
        let p2 = self.vals[j + 1];
        let p0 = if j == 0 { 2.0 * p1 - p2 } else { self.vals[j - 1] };
        let p3 = if j + 2 >= n {
            2.0 * p2 - p1
        } else {
            self.vals[j + 2]
        };
        0.5 * (2.0 * p1
            + (p2 - p0) * t
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t * t
            + (3.0 * p1 - p0 - 3.0 * p2 + p3) * t * t * t)
    }
}
