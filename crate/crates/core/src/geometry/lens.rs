//! Circle–circle intersection ("lens") geometry.
//!
//! The conditional distance analysis needs the area of overlap between
//! b(o, r) — the disk of radius r around the user — and B_max, the disk
//! of radius x around the MBS, with the centers y apart. Three regimes
//! tile the parameter space:
//!
//! - r ≥ x + y: b(o, r) swallows B_max entirely → area πx², derivative 0;
//! - x ≥ y + r: B_max swallows b(o, r) → area πr², derivative 2πr;
//! - otherwise (partial overlap): the lens formula
//!
//! ```text
//! ∇(r, y, x) = r²·arccos(ω₁/(2yr)) + x²·arccos(ω₂/(2yx)) − ½√(4y²x² − ω₂²)
//! ω₁ = r² + y² − x²,   ω₂ = x² + y² − r²
//! ```
//!
//! whose radial derivative collapses, after the chain-rule terms through
//! ω₁ and ω₂ cancel, to ∂∇/∂r = 2r·arccos(ω₁/(2yr)). Both ω's are
//! quadratic in the lengths; a dimensionally inconsistent variant of ω₂
//! (a stray first power of y) is a known transcription hazard that the
//! validation suite deliberately re-introduces to prove the distance
//! checks would catch it.
//!
//! The public [`lens_area`] / [`lens_area_derivative`] enforce the
//! partial-overlap preconditions; the crate-internal `_total` variants
//! dispatch across all three regimes and are what the distance integrals
//! consume (they are continuous at both regime boundaries).

use std::f64::consts::PI;

use crate::error::{Error, Result};

fn check_partial_overlap(r: f64, y: f64, x: f64) -> Result<()> {
    if r > x + y || x > y + r || y > x + r {
        return Err(Error::Domain(format!(
            "partial-overlap regime requires |x - y| <= r <= x + y, got r = {r}, y = {y}, x = {x}"
        )));
    }
    Ok(())
}

fn check_lengths(r: f64, y: f64, x: f64) -> Result<()> {
    for (name, v) in [("r", r), ("y", y), ("x", x)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!(
                "lens geometry requires positive finite lengths, got {name} = {v}"
            )));
        }
    }
    Ok(())
}

/// Area of overlap in the partial-overlap regime |x − y| ≤ r ≤ x + y
/// (the disks intersect but neither swallows the other). Arguments
/// outside the regime are a geometry error.
pub fn lens_area(r: f64, y: f64, x: f64) -> Result<f64> {
    check_lengths(r, y, x)?;
    check_partial_overlap(r, y, x)?;
    Ok(lens_area_total(r, y, x))
}

/// ∂∇/∂r = 2r·arccos(ω₁/(2yr)) in the interior of the partial-overlap
/// regime.
pub fn lens_area_derivative(r: f64, y: f64, x: f64) -> Result<f64> {
    check_lengths(r, y, x)?;
    check_partial_overlap(r, y, x)?;
    Ok(lens_area_derivative_total(r, y, x))
}

/// Overlap area across all regimes; continuous everywhere, clamps the
/// arccos arguments against roundoff at the regime boundaries.
pub(crate) fn lens_area_total(r: f64, y: f64, x: f64) -> f64 {
    if r >= x + y {
        return PI * x * x;
    }
    if x >= y + r {
        return PI * r * r;
    }
    let w1 = r * r + y * y - x * x;
    let w2 = x * x + y * y - r * r;
    let a1 = (w1 / (2.0 * y * r)).clamp(-1.0, 1.0);
    let a2 = (w2 / (2.0 * y * x)).clamp(-1.0, 1.0);
    let s = (4.0 * y * y * x * x - w2 * w2).max(0.0);
    r * r * a1.acos() + x * x * a2.acos() - 0.5 * s.sqrt()
}

/// Radial derivative of [`lens_area_total`]: 0 once B_max is swallowed,
/// 2πr while b(o, r) is inside B_max, 2r·arccos(ω₁/(2yr)) in between.
pub(crate) fn lens_area_derivative_total(r: f64, y: f64, x: f64) -> f64 {
    if r >= x + y {
        return 0.0;
    }
    if x >= y + r {
        return 2.0 * PI * r;
    }
    let w1 = r * r + y * y - x * x;
    let a1 = (w1 / (2.0 * y * r)).clamp(-1.0, 1.0);
    2.0 * r * a1.acos()
}
