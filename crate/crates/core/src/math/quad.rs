//! Adaptive quadrature on finite and semi-infinite intervals.
//!
//! The base rule is Clenshaw–Curtis with 17 points, whose nodes
//! x_k = cos(kπ/16) nest the 9-point rule exactly: the even-indexed nodes
//! of the fine rule are the nodes of the coarse one. A single batch of 17
//! integrand evaluations therefore yields both the fine estimate and an
//! embedded error estimate |I₁₆ − I₈| at no extra cost.
//!
//! The weights of an (N+1)-point rule on [−1, 1] are
//!
//! ```text
//! w_k = (c_k / N) · (1 − Σ_{j=1}^{N/2} b_j cos(2jkπ/N) / (4j² − 1))
//! ```
//!
//! with b_j = 2 except b_{N/2} = 1, and c_k = 2 except c_0 = c_N = 1.
//!
//! Adaptivity is by global worst-panel refinement: the panel with the
//! largest error estimate is split at its midpoint until the summed error
//! meets the tolerance or the panel budget runs out. The worst panel is
//! located by a plain linear scan, which keeps refinement order — and with
//! it every downstream result — fully deterministic.
//!
//! Semi-infinite integrals are truncated with a caller-supplied analytic
//! envelope ([`TailBound`]); the cutoff is chosen so the discarded tail
//! mass is an order of magnitude below the absolute tolerance.

use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Tolerances and budget for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureSpec {
    /// Absolute tolerance on the summed panel error estimates.
    pub abs_tol: f64,
    /// Relative tolerance (scaled by the current integral estimate).
    pub rel_tol: f64,
    /// Maximum number of panels before giving up.
    pub max_subdivisions: usize,
    /// Cutoff policy for semi-infinite integrals: the interval is truncated
    /// where the caller-supplied envelope certifies the remaining mass is
    /// at most `tail_fraction · abs_tol`.
    pub tail_fraction: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            abs_tol: 1e-9,
            rel_tol: 1e-7,
            max_subdivisions: 2_000,
            tail_fraction: 0.1,
        }
    }
}

impl QuadratureSpec {
    /// Spec with the given tolerances and the default panel budget.
    pub fn with_tols(abs_tol: f64, rel_tol: f64) -> Self {
        QuadratureSpec {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

/// Analytic envelope of an integrand on a right tail, used to truncate
/// integrals over [a, ∞) at a point where the remainder is negligible.
#[derive(Debug, Clone, Copy)]
pub enum TailBound {
    /// |f(x)| ≤ coef · e^(−rate·x); tail mass beyond X is coef·e^(−rate·X)/rate.
    Exp { coef: f64, rate: f64 },
    /// |f(x)| ≤ coef · x · e^(−rate·x²); tail mass beyond X is
    /// coef·e^(−rate·X²)/(2·rate). Matches Rayleigh-type densities.
    Gauss { coef: f64, rate: f64 },
}

impl TailBound {
    /// Smallest X such that the envelope's mass beyond X is at most `tail_tol`.
    fn cutoff(&self, tail_tol: f64) -> Result<f64> {
        let (coef, rate) = match *self {
            TailBound::Exp { coef, rate } | TailBound::Gauss { coef, rate } => (coef, rate),
        };
        if !(rate > 0.0) || !(coef >= 0.0) || !coef.is_finite() || !rate.is_finite() {
            return Err(Error::Domain(format!(
                "tail bound requires coef >= 0 and rate > 0, got coef = {coef}, rate = {rate}"
            )));
        }
        if coef == 0.0 {
            return Ok(0.0);
        }
        Ok(match *self {
            TailBound::Exp { coef, rate } => (10.0 * coef / (rate * tail_tol)).ln().max(0.0) / rate,
            TailBound::Gauss { coef, rate } => {
                ((10.0 * coef / (2.0 * rate * tail_tol)).ln().max(0.0) / rate).sqrt()
            }
        })
    }
}

const N_FINE: usize = 16;

struct Tables {
    /// cos(kπ/16), k = 0..=16, descending from 1 to −1.
    nodes: [f64; N_FINE + 1],
    w_fine: [f64; N_FINE + 1],
    /// Coarse weights, applied to the even-indexed fine nodes.
    w_coarse: [f64; N_FINE / 2 + 1],
}

fn cc_weights<const M: usize>(n: usize) -> [f64; M] {
    debug_assert_eq!(M, n + 1);
    let mut w = [0.0; M];
    for (k, wk) in w.iter_mut().enumerate() {
        let c_k = if k == 0 || k == n { 1.0 } else { 2.0 };
        let mut s = 0.0;
        for j in 1..=n / 2 {
            let b_j = if j == n / 2 { 1.0 } else { 2.0 };
            s += b_j * (2.0 * j as f64 * k as f64 * std::f64::consts::PI / n as f64).cos()
                / (4.0 * (j * j) as f64 - 1.0);
        }
        *wk = c_k / n as f64 * (1.0 - s);
    }
    w
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut nodes = [0.0; N_FINE + 1];
        for (k, node) in nodes.iter_mut().enumerate() {
            *node = (k as f64 * std::f64::consts::PI / N_FINE as f64).cos();
        }
        Tables {
            nodes,
            w_fine: cc_weights::<{ N_FINE + 1 }>(N_FINE),
            w_coarse: cc_weights::<{ N_FINE / 2 + 1 }>(N_FINE / 2),
        }
    })
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    err: f64,
}

/// Evaluate the nested pair of rules on a single panel.
fn eval_panel<F>(f: &mut F, lo: f64, hi: f64) -> Result<Panel>
where
    F: FnMut(f64) -> Result<f64>,
{
    let t = tables();
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let mut fine = 0.0;
    let mut coarse = 0.0;
    for k in 0..=N_FINE {
        let x = mid + half * t.nodes[k];
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::Domain(format!(
                "integrand returned non-finite value {v} at x = {x:.17e}"
            )));
        }
        fine += t.w_fine[k] * v;
        if k % 2 == 0 {
            coarse += t.w_coarse[k / 2] * v;
        }
    }
    Ok(Panel {
        lo,
        hi,
        value: half * fine,
        err: (half * (fine - coarse)).abs(),
    })
}

/// Integrate `f` over the finite interval [a, b].
///
/// The integrand may fail (its errors are propagated verbatim) but must be
/// finite at every evaluated point. Returns [`Error::ToleranceNotMet`] if
/// the panel budget is exhausted before the error estimate passes the
/// tolerance `max(abs_tol, rel_tol · |I|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "integration endpoints must be finite, got [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return Err(Error::Domain(format!(
            "integration endpoints out of order: [{a}, {b}]"
        )));
    }
    let mut panels = vec![eval_panel(&mut f, a, b)?];
    loop {
        let mut total = 0.0;
        let mut total_err = 0.0;
        for p in &panels {
            total += p.value;
            total_err += p.err;
        }
        let tol = spec.abs_tol.max(spec.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(total);
        }
        if panels.len() + 1 > spec.max_subdivisions {
            return Err(Error::ToleranceNotMet {
                value: total,
                achieved: total_err,
                requested: tol,
            });
        }
        // Deterministic worst-panel selection: first index attaining the max.
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate().skip(1) {
            if p.err > panels[worst].err {
                worst = i;
            }
        }
        let Panel { lo, hi, .. } = panels[worst];
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // Interval narrower than machine spacing; cannot refine further.
            return Err(Error::ToleranceNotMet {
                value: total,
                achieved: total_err,
                requested: tol,
            });
        }
        panels[worst] = eval_panel(&mut f, lo, mid)?;
        panels.push(eval_panel(&mut f, mid, hi)?);
    }
}

/// Integrate `f` over [a, ∞), truncating where `tail` certifies the
/// remainder is below a tenth of the absolute tolerance.
pub fn integrate_to_inf<F>(f: F, a: f64, tail: TailBound, spec: &QuadratureSpec) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let cutoff = tail.cutoff(spec.abs_tol * spec.tail_fraction)?;
    if cutoff <= a {
        // The envelope certifies everything past `a` is already negligible.
        return Ok(0.0);
    }
    integrate(f, a, cutoff, spec)
}
