//! Distance distribution of the i-th nearest in-cell helper.
//!
//! Conditioned on the typical user sitting inside the maximal inscribed
//! disk of its cell and on that disk holding at least i helpers, the
//! distance R_i to the i-th nearest helper has a density with two
//! contributions:
//!
//! * a *clipped* component, where the search disk of radius r around the
//!   user pokes out of the inscribed disk and only the overlap lens
//!   counts, and
//! * an *interior* component, where the search disk fits entirely inside
//!   the inscribed disk and the i-th nearest helper behaves exactly as in
//!   an unconstrained Poisson process; its weight is [`kappa`].
//!
//! Both components are divided by the probability of the conditioning
//! event, `p_user_inside · p_at_least_i_inside`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::math::quad::{integrate, QuadratureSpec};
use crate::math::special::{ln_gamma, regularized_upper_gamma};

use super::lens::{lens_area_derivative_total, lens_area_total};
use super::{
    kappa, max_disk_radius_pdf, p_at_least_i_inside, p_user_inside, user_mbs_distance_cdf,
    user_mbs_distance_pdf, GeometryParams,
};

/// Grid length used by [`DistanceDistribution::build`].
const DEFAULT_GRID_POINTS: usize = 400;

/// Upper-tail mass of the unconstrained distance distribution left beyond
/// the last grid point.
const GRID_TAIL_MASS: f64 = 1e-6;

/// Ratio of the first grid point to the last one.
const GRID_SPAN_RATIO: f64 = 1e-3;

fn check_rank(i: u32) -> Result<()> {
    if i == 0 {
        return Err(Error::Domain("helper rank i must be at least 1".into()));
    }
    Ok(())
}

fn check_radius(r: f64) -> Result<()> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::Domain(format!(
            "distance must be finite and nonnegative, got {r}"
        )));
    }
    Ok(())
}

/// Density of the distance to the i-th nearest point of an unconstrained
/// Poisson process of intensity `lambda_d`:
/// 2(λ_dπ)^i r^(2i−1) e^(−λ_dπr²) / Γ(i), the generalized-gamma law.
pub fn unconstrained_pdf(i: u32, r: f64, lambda_d: f64) -> Result<f64> {
    check_rank(i)?;
    check_radius(r)?;
    if !(lambda_d > 0.0) || !lambda_d.is_finite() {
        return Err(Error::Domain(format!(
            "lambda_d must be positive and finite, got {lambda_d}"
        )));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let i_f = f64::from(i);
    let lam_pi = lambda_d * PI;
    let ln = core::f64::consts::LN_2 + i_f * lam_pi.ln() + (2.0 * i_f - 1.0) * r.ln()
        - lam_pi * r * r
        - ln_gamma(i_f);
    Ok(ln.exp())
}

/// Density (in r) of the i-th nearest helper when only the lens-shaped
/// overlap between the search disk b(u, r) and the inscribed disk counts:
/// λ_d^i/Γ(i) · ∇^(i−1) · (∂∇/∂r) · e^(−λ_d∇) with ∇ the overlap area.
fn clipped_search_density(i: u32, lambda_d: f64, r: f64, y: f64, x: f64) -> f64 {
    let darea = lens_area_derivative_total(r, y, x);
    if darea <= 0.0 {
        return 0.0;
    }
    let lam_area = lambda_d * lens_area_total(r, y, x);
    if i == 1 {
        return lambda_d * darea * (-lam_area).exp();
    }
    if lam_area <= 0.0 {
        return 0.0;
    }
    let i_f = f64::from(i);
    let ln = (i_f - 1.0) * lam_area.ln() - lam_area - ln_gamma(i_f);
    lambda_d * darea * ln.exp()
}

/// Clipped component of the (unnormalized) density: the expectation of
/// [`clipped_search_density`] over the inscribed-disk radius x and the
/// user offset y, restricted to geometries where the search disk actually
/// crosses the inscribed-disk boundary (x between max(y, r−y) and r+y).
fn clipped_component(i: u32, r: f64, g: &GeometryParams, spec: &QuadratureSpec) -> Result<f64> {
    // Beyond this offset both f_Y(y) and F_Y(x ≥ y) are < 1e-16, so the
    // outer integrand is zero to machine precision.
    let y_max = (37.0 / (g.lambda_m * PI)).sqrt();
    integrate(
        |y| {
            let lo = y.max(r - y);
            let hi = r + y;
            if hi <= lo {
                return Ok(0.0);
            }
            let inner = integrate(
                |x| {
                    Ok(clipped_search_density(i, g.lambda_d, r, y, x)
                        * max_disk_radius_pdf(x, g)
                        * user_mbs_distance_cdf(x, g))
                },
                lo,
                hi,
                spec,
            )?;
            Ok(user_mbs_distance_pdf(y, g) * inner)
        },
        0.0,
        y_max,
        spec,
    )
}

/// Conditional density of R_i split into its parts, returned as
/// `(density, clipped, interior)` where
/// `density = (clipped + interior) / (p_user_inside · p_at_least_i_inside)`.
pub fn distance_pdf_parts(
    i: u32,
    r: f64,
    g: &GeometryParams,
    spec: &QuadratureSpec,
) -> Result<(f64, f64, f64)> {
    check_rank(i)?;
    check_radius(r)?;
    if r == 0.0 {
        return Ok((0.0, 0.0, 0.0));
    }
    let clipped = clipped_component(i, r, g, spec)?;
    let interior = unconstrained_pdf(i, r, g.lambda_d)? * kappa(g.lambda_m * PI * r * r)?;
    let norm = p_user_inside(g) * p_at_least_i_inside(i, g.eta_d())?;
    Ok(((clipped + interior) / norm, clipped, interior))
}

/// Conditional density of the distance to the i-th nearest in-cell helper.
pub fn distance_pdf(i: u32, r: f64, g: &GeometryParams, spec: &QuadratureSpec) -> Result<f64> {
    distance_pdf_parts(i, r, g, spec).map(|(pdf, _, _)| pdf)
}

/// Smallest x with Q(a, x) ≤ p, i.e. the upper-tail quantile of the
/// regularized upper incomplete gamma function, found by bisection.
fn upper_tail_quantile(a: f64, p: f64) -> Result<f64> {
    let mut hi = a + 1.0;
    while regularized_upper_gamma(a, hi)? > p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NonConvergence {
                what: "upper-tail gamma quantile",
                detail: format!("no bracket below 1e12 for a = {a}, p = {p}"),
            });
        }
    }
    let mut lo = 0.0_f64;
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if regularized_upper_gamma(a, mid)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Tabulated conditional density of R_i on a geometric grid, with the
/// clipped/interior split kept alongside for diagnostics.
///
/// The tabulation necessarily carries a small mass defect (quadrature on
/// a finite grid plus the truncated tail); [`Self::norm_defect`] records
/// it and [`Self::renormalize`] rescales the table to unit mass when the
/// caller asks for that explicitly.
#[derive(Debug, Clone)]
pub struct DistanceDistribution {
    i: u32,
    grid: Vec<f64>,
    density: Vec<f64>,
    clipped: Vec<f64>,
    interior: Vec<f64>,
    norm_defect: f64,
    renormalized: bool,
}

impl DistanceDistribution {
    /// Tabulates the density of R_i on a 400-point geometric grid whose
    /// last point leaves only 1e-6 of the unconstrained distribution's
    /// upper tail uncovered.
    pub fn build(i: u32, g: &GeometryParams, spec: &QuadratureSpec) -> Result<Self> {
        Self::build_with_points(i, g, DEFAULT_GRID_POINTS, spec)
    }

    /// Same as [`Self::build`] with an explicit grid length (≥ 2).
    pub fn build_with_points(
        i: u32,
        g: &GeometryParams,
        n_points: usize,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        check_rank(i)?;
        if n_points < 2 {
            return Err(Error::Domain(format!(
                "distance grid needs at least 2 points, got {n_points}"
            )));
        }
        let r_max =
            (upper_tail_quantile(f64::from(i), GRID_TAIL_MASS)? / (g.lambda_d * PI)).sqrt();
        let ln_max = r_max.ln();
        let ln_min = (r_max * GRID_SPAN_RATIO).ln();
        let step = (ln_max - ln_min) / (n_points - 1) as f64;
        let mut grid = Vec::with_capacity(n_points);
        for j in 0..n_points {
            grid.push((ln_min + step * j as f64).exp());
        }
        grid[n_points - 1] = r_max;

        let mut density = Vec::with_capacity(n_points);
        let mut clipped = Vec::with_capacity(n_points);
        let mut interior = Vec::with_capacity(n_points);
        for &r in &grid {
            let (pdf, c, u) = distance_pdf_parts(i, r, g, spec)?;
            density.push(pdf);
            clipped.push(c);
            interior.push(u);
        }
        let norm_defect = (1.0 - trapezoid(&grid, &density)).abs();
        Ok(DistanceDistribution {
            i,
            grid,
            density,
            clipped,
            interior,
            norm_defect,
            renormalized: false,
        })
    }

    /// Helper rank i this table describes.
    pub fn rank(&self) -> u32 {
        self.i
    }

    /// Strictly increasing distance grid, meters.
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Density values aligned with [`Self::grid`].
    pub fn density(&self) -> &[f64] {
        &self.density
    }

    /// |1 − ∫f| as tabulated at build time, before any renormalization.
    pub fn norm_defect(&self) -> f64 {
        self.norm_defect
    }

    /// Whether [`Self::renormalize`] has been applied.
    pub fn is_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Trapezoidal mass of the tabulated density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }

    /// Rescales the table (density and both components) to unit mass.
    /// [`Self::norm_defect`] keeps reporting the original defect.
    pub fn renormalize(&mut self) {
        let mass = self.mass();
        if self.renormalized || mass <= 0.0 {
            return;
        }
        let scale = 1.0 / mass;
        for v in self
            .density
            .iter_mut()
            .chain(self.clipped.iter_mut())
            .chain(self.interior.iter_mut())
        {
            *v *= scale;
        }
        self.renormalized = true;
    }

    /// Mean serving distance, normalized by the tabulated mass.
    pub fn mean(&self) -> f64 {
        let weighted: f64 = trapezoid(
            &self.grid,
            &self
                .grid
                .iter()
                .zip(&self.density)
                .map(|(r, f)| r * f)
                .collect::<Vec<_>>(),
        );
        weighted / self.mass()
    }

    /// Share of the mass contributed by the clipped component.
    pub fn clipped_mass_fraction(&self) -> f64 {
        let c = trapezoid(&self.grid, &self.clipped);
        let u = trapezoid(&self.grid, &self.interior);
        c / (c + u)
    }

    /// Trapezoidal expectation E[w(R_i)] against the tabulated density.
    pub fn expectation<F>(&self, mut w: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let mut vals = Vec::with_capacity(self.grid.len());
        for (&r, &f) in self.grid.iter().zip(&self.density) {
            vals.push(w(r)? * f);
        }
        Ok(trapezoid(&self.grid, &vals))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::quad::integrate;

    const A_REF: f64 = PI * 500.0 * 500.0;

    fn g_table1() -> GeometryParams {
        GeometryParams::new(10.0 / A_REF, 100.0 / A_REF).unwrap()
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let err = (actual - expected).abs() / expected.abs();
        assert!(
            err <= tol,
            "actual {actual:.17e}, expected {expected:.17e}, rel err {err:.3e}"
        );
    }

    #[test]
    fn unconstrained_rejects_bad_arguments() {
        assert!(unconstrained_pdf(0, 1.0, 1e-4).is_err());
        assert!(unconstrained_pdf(1, -1.0, 1e-4).is_err());
        assert!(unconstrained_pdf(1, f64::INFINITY, 1e-4).is_err());
        assert!(unconstrained_pdf(1, 1.0, 0.0).is_err());
        assert!(unconstrained_pdf(1, 1.0, f64::NAN).is_err());
    }

    #[test]
    fn unconstrained_matches_rayleigh_and_frozen_values() {
        let ld = 100.0 / A_REF;
        for r in [5.0, 30.0, 80.0, 150.0] {
            let direct = 2.0 * ld * PI * r * (-ld * PI * r * r).exp();
            assert_rel(unconstrained_pdf(1, r, ld).unwrap(), direct, 1e-13);
        }
        assert_rel(
            unconstrained_pdf(1, 50.0, ld).unwrap(),
            1.471_517_764_685_769_36e-2,
            1e-12,
        );
        assert_rel(
            unconstrained_pdf(3, 100.0, ld).unwrap(),
            1.172_200_888_878_987_93e-2,
            1e-12,
        );
        assert_rel(
            unconstrained_pdf(6, 150.0, ld).unwrap(),
            7.287_225_521_514_339_13e-3,
            1e-12,
        );
        assert_eq!(unconstrained_pdf(2, 0.0, ld).unwrap(), 0.0);
    }

    #[test]
    fn unconstrained_density_normalizes() {
        let ld = 100.0 / A_REF;
        let spec = QuadratureSpec::with_tols(1e-12, 1e-12);
        for i in [1_u32, 3, 6] {
            let r_hi = (upper_tail_quantile(f64::from(i), 1e-13).unwrap() / (ld * PI)).sqrt();
            let mass =
                integrate(|r| unconstrained_pdf(i, r, ld), 0.0, r_hi, &spec).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "i = {i}: mass = {mass}");
        }
    }

    #[test]
    fn quantile_inverts_upper_gamma() {
        // scipy.special.gammainccinv(i, 1e-6)
        let refs = [
            (1.0, 1.381_551_055_796_427_36e1),
            (2.0, 1.668_842_079_085_991_87e1),
            (4.0, 2.135_045_696_327_213_70e1),
            (7.0, 2.731_765_276_501_940_68e1),
            (10.0, 3.271_034_051_752_391_75e1),
        ];
        for (a, x) in refs {
            assert_rel(upper_tail_quantile(a, 1e-6).unwrap(), x, 1e-10);
            let back = regularized_upper_gamma(a, x).unwrap();
            assert_rel(back, 1e-6, 1e-8);
        }
    }

    #[test]
    fn pdf_parts_match_frozen_references() {
        // Adaptive double integration of the clipped component plus the
        // closed-form interior component, tabulated independently.
        let g = g_table1();
        let spec = QuadratureSpec::default();
        let refs = [
            (1_u32, 30.0, 3.048_117_359_355_139e-4, 6.677_427_047_649_961e-4, 1.512_862_463_311_901e-2),
            (2_u32, 45.0, 2.663_596_551_198_366e-4, 3.728_775_823_094_841e-4, 1.074_174_314_670_467e-2),
            (3_u32, 80.0, 4.453_483_338_520_119e-4, 1.742_919_248_077_379e-4, 1.166_539_116_539_066e-2),
        ];
        for (i, r, c_ref, u_ref, pdf_ref) in refs {
            let (pdf, clipped, interior) = distance_pdf_parts(i, r, &g, &spec).unwrap();
            assert_rel(clipped, c_ref, 2e-6);
            assert_rel(interior, u_ref, 1e-10);
            assert_rel(pdf, pdf_ref, 2e-6);
            assert_rel(distance_pdf(i, r, &g, &spec).unwrap(), pdf, 1e-15);
        }
    }

    #[test]
    fn pdf_is_zero_at_origin_and_rejects_bad_rank() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        assert_eq!(distance_pdf(1, 0.0, &g, &spec).unwrap(), 0.0);
        assert!(distance_pdf(0, 10.0, &g, &spec).is_err());
        assert!(distance_pdf(1, -2.0, &g, &spec).is_err());
    }

    #[test]
    fn build_tabulates_a_nearly_normalized_density() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        let d = DistanceDistribution::build_with_points(1, &g, 120, &spec).unwrap();
        assert_eq!(d.rank(), 1);
        assert_eq!(d.grid().len(), 120);
        assert!(d.grid().windows(2).all(|w| w[0] < w[1]));
        assert!(d.grid()[0] > 0.0);
        assert!(d.density().iter().all(|&f| f.is_finite() && f >= 0.0));
        // Prototype at the same grid: mass 0.999528, mean 49.681,
        // clipped fraction 0.50885.
        assert!(d.norm_defect() < 5e-3, "defect = {}", d.norm_defect());
        assert_rel(d.mean(), 49.681, 2e-3);
        assert_rel(d.clipped_mass_fraction(), 0.508_85, 3e-3);
        assert!(!d.is_renormalized());
    }

    #[test]
    fn renormalize_scales_to_unit_mass_once() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        let mut d = DistanceDistribution::build_with_points(1, &g, 80, &spec).unwrap();
        let defect = d.norm_defect();
        d.renormalize();
        assert!(d.is_renormalized());
        assert!((d.mass() - 1.0).abs() < 1e-12);
        assert_eq!(d.norm_defect(), defect);
        // Component split stays consistent with the rescaled density.
        let frac = d.clipped_mass_fraction();
        d.renormalize();
        assert_eq!(d.clipped_mass_fraction(), frac);
        assert!((d.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mean_distance_grows_with_rank() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        let d1 = DistanceDistribution::build_with_points(1, &g, 80, &spec).unwrap();
        let d2 = DistanceDistribution::build_with_points(2, &g, 80, &spec).unwrap();
        assert!(d1.mean() < d2.mean());
        // Prototype means at this configuration: 49.68 and 76.42.
        assert_rel(d2.mean(), 76.42, 5e-3);
    }

    #[test]
    fn expectation_of_unity_recovers_mass() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        let d = DistanceDistribution::build_with_points(2, &g, 60, &spec).unwrap();
        let one = d.expectation(|_| Ok(1.0)).unwrap();
        assert!((one - d.mass()).abs() < 1e-14);
        let err = d.expectation(|_| Err(Error::Domain("boom".into())));
        assert!(err.is_err());
    }

    #[test]
    fn rejects_degenerate_grid() {
        let g = g_table1();
        let spec = QuadratureSpec::default();
        assert!(DistanceDistribution::build_with_points(1, &g, 1, &spec).is_err());
        assert!(DistanceDistribution::build_with_points(0, &g, 50, &spec).is_err());
    }
}
