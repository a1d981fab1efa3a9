//! Helper-selection schemes and D2D service probabilities.
//!
//! When a user inside the typical cell requests content c, the serving MBS
//! coordinates with up to k candidate helpers — the k nearest D2D helpers
//! inside the cell — and offloads the request if one of them caches c.
//! Two coordination rules are modeled:
//!
//! - **NS** (nearest selection): candidates are checked in distance order;
//!   the request is served by the nearest one holding the content.
//! - **US** (uniform selection): a candidate is picked uniformly at random
//!   among the first min(N_d, k) helpers and serves the request iff it
//!   holds the content.
//!
//! Both rules condition on the random helper count N_d in the user's cell.
//! Its probability mass function is the classical 3.5-shape gamma mixture
//!
//! ```text
//! P[N_d = j] = 3.5^3.5 Γ(j+3.5) η^j / (Γ(3.5) j! (η+3.5)^(j+3.5))
//! ```
//!
//! with η = λ_d/λ_m the helper-to-MBS density ratio. The per-candidate
//! service probabilities are then
//!
//! ```text
//! NS: p(i,c) = P[N_d ≥ i] · (1−h_d(c))^(i−1) · h_d(c)
//! US: p(i,c) = h_d(c) · (P[N_d > k]/k + Σ_{n=i}^{k} P[N_d = n]/n)
//! ```
//!
//! and the US total Σ_i p(i,c) collapses to h_d(c)·P[N_d ≥ 1] — independent
//! of k, which the tests assert exactly.
//!
//! Schemes live behind the [`SelectionScheme`] trait and are registered by
//! name ("ns", "us"), so configuration files and the CLI can select them at
//! runtime; [`scheme_by_name`] is the lookup entry point.

use std::collections::BTreeMap;
use std::sync::{Arc, OnceLock};

use crate::content::CacheParams;
use crate::error::{Error, Result};
use crate::math::special::{hyp2f1, ln_gamma};

/// Truncation threshold for PMF tail summation: stop once the certified
/// residual mass is below this.
const TAIL_RESIDUAL: f64 = 1e-13;

fn check_eta(eta_d: f64) -> Result<()> {
    if !(eta_d > 0.0) || !eta_d.is_finite() {
        return Err(Error::Domain(format!(
            "helper-to-MBS density ratio must be positive and finite, got {eta_d}"
        )));
    }
    Ok(())
}

/// P[N_d = j]: probability that a Voronoi cell of the MBS process contains
/// exactly j helpers, under the 3.5-shape approximation of the cell-area
/// distribution. `eta_d` is the helper-to-MBS density ratio.
pub fn cell_helper_count_pmf(j: u32, eta_d: f64) -> Result<f64> {
    check_eta(eta_d)?;
    let jf = j as f64;
    let log_p = 3.5 * 3.5_f64.ln() + ln_gamma(jf + 3.5) + jf * eta_d.ln()
        - ln_gamma(3.5)
        - ln_gamma(jf + 1.0)
        - (jf + 3.5) * (eta_d + 3.5).ln();
    Ok(log_p.exp())
}

/// P[N_d ≥ i] by direct tail summation of the PMF, truncated when the
/// geometric envelope of the remaining terms certifies the residual is
/// below 1e-13. This is the reference evaluation path; the hypergeometric
/// closed form is [`cell_helper_count_tail_closed`].
pub fn cell_helper_count_tail(i: u32, eta_d: f64) -> Result<f64> {
    check_eta(eta_d)?;
    if i == 0 {
        return Ok(1.0);
    }
    let mut term = cell_helper_count_pmf(i, eta_d)?;
    let mut sum = term;
    let mut j = i as f64;
    loop {
        // Term ratio of the PMF recurrence; decreasing in j with limit
        // η/(η+3.5) < 1, so once below 1 the residual is geometrically
        // bounded by term·ratio/(1−ratio).
        let ratio = (j + 3.5) * eta_d / ((j + 1.0) * (eta_d + 3.5));
        if ratio < 1.0 && term * ratio / (1.0 - ratio) < TAIL_RESIDUAL {
            return Ok(sum.min(1.0));
        }
        term *= ratio;
        sum += term;
        j += 1.0;
    }
}

/// P[N_d ≥ i] via the closed hypergeometric form
/// P[N_d = i] · ₂F₁(1, i+3.5; i+1; η/(η+3.5)), kept as an internal
/// consistency cross-check of the tail summation.
pub fn cell_helper_count_tail_closed(i: u32, eta_d: f64) -> Result<f64> {
    check_eta(eta_d)?;
    if i == 0 {
        return Ok(1.0);
    }
    let z = eta_d / (eta_d + 3.5);
    let f = hyp2f1(1.0, i as f64 + 3.5, i as f64 + 1.0, z)?;
    Ok(cell_helper_count_pmf(i, eta_d)? * f)
}

/// P[N_d ≥ 1] = 1 − (1 + η/3.5)^(−3.5): probability that a cell contains at
/// least one helper. Also the thinning factor of the active-interferer
/// density in the D2D coverage analysis.
pub fn p_nonempty_cell(eta_d: f64) -> Result<f64> {
    check_eta(eta_d)?;
    Ok(1.0 - (1.0 + eta_d / 3.5).powf(-3.5))
}

/// Per-candidate service probabilities for one (scheme, k, c) point,
/// together with the implied D2D/cellular mode split.
#[derive(Debug, Clone)]
pub struct ModeProfile {
    /// Candidate helper count k ≥ 1.
    pub k: u32,
    /// per_helper[i−1] = P[served by the i-th candidate], i = 1..=k.
    pub per_helper: Vec<f64>,
    /// Total probability of being served in D2D mode: Σ per_helper.
    pub d2d_total: f64,
    /// Complement: probability the MBS serves the request itself.
    pub cellular: f64,
}

/// A helper-selection rule. Implementations are pure and stateless; the
/// registry hands them out as shared trait objects chosen by name.
pub trait SelectionScheme: Send + Sync + std::fmt::Debug {
    /// Registry key, lowercase ("ns", "us").
    fn name(&self) -> &'static str;

    /// P[request for content c is served by the i-th nearest candidate],
    /// 1 ≤ i ≤ k.
    fn p_served_by_ith(
        &self,
        i: u32,
        c: u32,
        k: u32,
        eta_d: f64,
        cache: &CacheParams,
    ) -> Result<f64>;

    /// Total D2D-mode probability Σ_{i=1..k} p_served_by_ith.
    fn p_d2d_mode(&self, c: u32, k: u32, eta_d: f64, cache: &CacheParams) -> Result<f64> {
        let mut sum = 0.0;
        for i in 1..=k {
            sum += self.p_served_by_ith(i, c, k, eta_d, cache)?;
        }
        Ok(sum)
    }

    /// Dense-helper (η → ∞) limit of p_served_by_ith, independent of η by
    /// construction. For NS it upper-bounds the exact value at every rank
    /// and every η; for US the per-rank limit can be exceeded at finite η
    /// (the rank-1 term absorbs small-count mass), but the rank-summed
    /// limit still dominates the exact mode probability for both schemes.
    fn p_d2d_bound(&self, i: u32, c: u32, k: u32, cache: &CacheParams) -> Result<f64>;

    /// Full per-candidate profile plus the mode split at one (k, c) point.
    fn mode_profile(&self, c: u32, k: u32, eta_d: f64, cache: &CacheParams) -> Result<ModeProfile> {
        let mut per_helper = Vec::with_capacity(k as usize);
        for i in 1..=k {
            per_helper.push(self.p_served_by_ith(i, c, k, eta_d, cache)?);
        }
        let d2d_total: f64 = per_helper.iter().sum();
        Ok(ModeProfile {
            k,
            per_helper,
            d2d_total,
            cellular: 1.0 - d2d_total,
        })
    }
}

fn check_rank(i: u32, k: u32) -> Result<()> {
    if k < 1 {
        return Err(Error::Domain("candidate count k must be >= 1".into()));
    }
    if i < 1 || i > k {
        return Err(Error::Domain(format!(
            "candidate rank i must satisfy 1 <= i <= k, got i = {i}, k = {k}"
        )));
    }
    Ok(())
}

/// Nearest selection: candidates are probed in distance order and the
/// nearest content holder serves.
#[derive(Debug, Default)]
pub struct NearestSelection;

impl SelectionScheme for NearestSelection {
    fn name(&self) -> &'static str {
        "ns"
    }

    fn p_served_by_ith(
        &self,
        i: u32,
        c: u32,
        k: u32,
        eta_d: f64,
        cache: &CacheParams,
    ) -> Result<f64> {
        check_rank(i, k)?;
        let h = cache.hit_d2d(c)?;
        // The i-th candidate serves iff it exists (N_d ≥ i), the closer
        // i−1 candidates all miss, and candidate i hits.
        Ok(cell_helper_count_tail(i, eta_d)? * (1.0 - h).powi(i as i32 - 1) * h)
    }

    fn p_d2d_bound(&self, i: u32, c: u32, k: u32, cache: &CacheParams) -> Result<f64> {
        check_rank(i, k)?;
        let h = cache.hit_d2d(c)?;
        Ok((1.0 - h).powi(i as i32 - 1) * h)
    }
}

/// Uniform selection: one candidate is drawn uniformly among the first
/// min(N_d, k) helpers, then checked for the content.
#[derive(Debug, Default)]
pub struct UniformSelection;

impl SelectionScheme for UniformSelection {
    fn name(&self) -> &'static str {
        "us"
    }

    fn p_served_by_ith(
        &self,
        i: u32,
        c: u32,
        k: u32,
        eta_d: f64,
        cache: &CacheParams,
    ) -> Result<f64> {
        check_rank(i, k)?;
        let h = cache.hit_d2d(c)?;
        // Condition on N_d: with N_d = n ≤ k the pick is uniform over n
        // candidates, with N_d > k uniform over k. Candidate i is eligible
        // only when n ≥ i.
        let mut sum = cell_helper_count_tail(k + 1, eta_d)? / k as f64;
        for n in i..=k {
            sum += cell_helper_count_pmf(n, eta_d)? / n as f64;
        }
        Ok(h * sum)
    }

    fn p_d2d_mode(&self, c: u32, k: u32, eta_d: f64, cache: &CacheParams) -> Result<f64> {
        check_rank(1, k)?;
        // The i-sum telescopes to h_d(c)·P[N_d ≥ 1], independent of k.
        Ok(cache.hit_d2d(c)? * p_nonempty_cell(eta_d)?)
    }

    fn p_d2d_bound(&self, i: u32, c: u32, k: u32, cache: &CacheParams) -> Result<f64> {
        check_rank(i, k)?;
        Ok(cache.hit_d2d(c)? / k as f64)
    }
}

type Registry = BTreeMap<&'static str, Arc<dyn SelectionScheme>>;

/// All registered selection schemes, keyed by lowercase name. The map is
/// built once and shared; iteration order (and thus every listing derived
/// from it) is deterministic.
pub fn scheme_registry() -> &'static Registry {
    static REGISTRY: OnceLock<Registry> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut m: Registry = BTreeMap::new();
        for scheme in [
            Arc::new(NearestSelection) as Arc<dyn SelectionScheme>,
            Arc::new(UniformSelection) as Arc<dyn SelectionScheme>,
        ] {
            m.insert(scheme.name(), scheme);
        }
        m
    })
}

/// Look up a selection scheme by (case-insensitive) name.
pub fn scheme_by_name(name: &str) -> Result<Arc<dyn SelectionScheme>> {
    let key = name.to_ascii_lowercase();
    scheme_registry()
        .get(key.as_str())
        .cloned()
        .ok_or_else(|| Error::UnknownName {
            kind: "selection scheme",
            name: name.to_string(),
            known: scheme_registry()
                .keys()
                .copied()
                .collect::<Vec<_>>()
                .join(", "),
        })
}
