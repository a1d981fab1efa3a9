//! Coverage probabilities, ergodic rates and load-shared throughputs for
//! the cellular and D2D links.
//!
//! The cellular downlink is analyzed for a typical user attached to its
//! nearest MBS under Rayleigh fading, with every other MBS interfering.
//! A D2D link to the i-th nearest candidate helper conditions on the
//! in-disk distance law ([`DistanceDistribution`]) and sees a thinned
//! field of active helpers — one per nonempty cell — as interference.
//! Both reductions end in one-dimensional integrals whose hypergeometric
//! interference factors live in the `interference` submodule.
//!
//! [`LinkModel`] ties a parameter set to the tabulated distance laws and
//! interference factor and memoizes the per-link integrals; the overall
//! metrics then mix them with the mode weights of a [`SelectionScheme`].
//! Every mixed metric reports its additive decomposition through
//! [`MetricResult`] and carries a [`Method`] tag so that exact mode
//! weights and their dense-helper simplifications stay distinguishable
//! end to end.

mod interference;
mod rate;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use crate::content::CacheParams;
use crate::error::{Error, Result};
use crate::geometry::{DistanceDistribution, GeometryParams};
use crate::math::{integrate_to_inf, QuadratureSpec, TailBound};
use crate::scheme::{p_nonempty_cell, ModeProfile, SelectionScheme};

use interference::DeltaDTable;

/// Densities, radio parameters and bandwidth split of one network
/// configuration, all in linear SI units (points/m², watts, hertz).
#[derive(Debug, Clone, Copy)]
pub struct NetworkParams {
    /// MBS density λ_m.
    pub lambda_m: f64,
    /// Helper density λ_d.
    pub lambda_d: f64,
    /// User density λ_u.
    pub lambda_u: f64,
    /// MBS transmit power P_m (W).
    pub p_m: f64,
    /// Helper transmit power P_d (W).
    pub p_d: f64,
    /// Bandwidth of the cellular band W_m (Hz).
    pub w_m: f64,
    /// Bandwidth of the D2D band W_d (Hz).
    pub w_d: f64,
    /// Path-loss exponent α ∈ (2, 5].
    pub alpha: f64,
    /// Cellular SINR threshold τ_m (linear scale).
    pub tau_m: f64,
    /// D2D SINR threshold τ_d (linear scale).
    pub tau_d: f64,
    /// Noise power σ² (W); 0 selects the interference-limited regime.
    pub sigma2: f64,
    /// Backhaul discount β ∈ (0, 1] on the rate of MBS cache misses.
    pub beta: f64,
}

impl NetworkParams {
    /// Checks every field against its admissible range.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_m", self.lambda_m),
            ("lambda_d", self.lambda_d),
            ("lambda_u", self.lambda_u),
            ("p_m", self.p_m),
            ("p_d", self.p_d),
            ("w_m", self.w_m),
            ("w_d", self.w_d),
            ("tau_m", self.tau_m),
            ("tau_d", self.tau_d),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if !(self.alpha > 2.0 && self.alpha <= 5.0) {
            return Err(Error::Domain(format!(
                "path-loss exponent must lie in (2, 5], got {}",
                self.alpha
            )));
        }
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(Error::Domain(format!(
                "noise power must be finite and >= 0, got {}",
                self.sigma2
            )));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Domain(format!(
                "backhaul discount must lie in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Spatial parameters (λ_m, λ_d) as a [`GeometryParams`].
    pub fn geometry(&self) -> Result<GeometryParams> {
        GeometryParams::new(self.lambda_m, self.lambda_d)
    }

    /// Users per MBS cell, η_u = λ_u/λ_m.
    pub fn eta_u(&self) -> f64 {
        self.lambda_u / self.lambda_m
    }
}

/// Which mode weights produced a mixed metric: the exact finite-density
/// service probabilities or their dense-helper simplification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Exact per-candidate service probabilities.
    Exact,
    /// Dense-helper (η → ∞) weight approximation.
    Bound,
}

impl Method {
    /// Lowercase tag used in reports ("exact" / "bound").
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Bound => "bound",
        }
    }
}

/// A scalar metric together with the additive decomposition that built
/// it; `value` is always the exact sum of the component entries.
#[derive(Debug, Clone)]
pub struct MetricResult {
    /// The metric itself.
    pub value: f64,
    /// Named contributions, in reporting order ("cellular", "d2d_1", …).
    pub components: Vec<(String, f64)>,
    /// Mode-weight construction behind the value.
    pub method: Method,
}

impl MetricResult {
    fn from_components(components: Vec<(String, f64)>, method: Method) -> Self {
        let value = components.iter().map(|(_, v)| v).sum();
        MetricResult {
            value,
            components,
            method,
        }
    }

    /// Contribution of the named component, if present.
    pub fn component(&self, name: &str) -> Option<f64> {
        self.components
            .iter()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }
}

/// Expected fraction of a band left to a tagged user that shares it with
/// a Poisson(a) number of peers: E[1/(1+N)] = (1 − e^(−a))/a, extended
/// continuously to 1 at a = 0.
pub fn bandwidth_share(a: f64) -> Result<f64> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::Domain(format!(
            "load factor must be finite and >= 0, got {a}"
        )));
    }
    if a == 0.0 {
        return Ok(1.0);
    }
    Ok(-(-a).exp_m1() / a)
}

/// Threshold beyond which δ_m switches to its two-term asymptote. The
/// switch error is O(1/τ), already ~1e-10 relative here, while the
/// hypergeometric path degrades with τ (its 1−z argument reconstruction
/// loses a relative 1e-16·τ) and stops making sense entirely once
/// τ/(1+τ) rounds to 1 near τ ≈ 9e15.
const DELTA_M_ASYMPTOTIC: f64 = 1e6;

/// Normalized cellular interference factor
/// δ_m(τ) = τ^(2/α)·∫_{τ^(−2/α)}^∞ du/(1 + u^(α/2)), evaluated through
/// its closed form 2τ/(α−2) · ₂F₁(1, 1−2/α; 2−2/α; −τ). For very large
/// τ the full-range integral (2π/α)/sin(2π/α) minus the first lower-tail
/// correction takes over: δ_m ≈ (2π/α)/sin(2π/α)·τ^(2/α) − 1.
pub fn delta_m(tau: f64, alpha: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    if !(alpha > 2.0) || !alpha.is_finite() {
        return Err(Error::Domain(format!(
            "path-loss exponent must exceed 2, got {alpha}"
        )));
    }
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau > DELTA_M_ASYMPTOTIC {
        let full = (2.0 * PI / alpha) / (2.0 * PI / alpha).sin();
        return Ok(full * tau.powf(2.0 / alpha) - 1.0);
    }
    let b = 1.0 - 2.0 / alpha;
    Ok(2.0 * tau / (alpha - 2.0) * interference::hyp2f1_one_neg(b, 1.0 + b, tau)?)
}

/// Cellular coverage P[SINR > τ] at an arbitrary threshold. The serving
/// distance is integrated out through its squared value v = r²:
/// πλ_m·∫₀^∞ exp(−πλ_m v(1+δ_m) − τσ²v^(α/2)/P_m) dv.
pub fn coverage_cellular_at(tau: f64, n: &NetworkParams, spec: &QuadratureSpec) -> Result<f64> {
    let d = delta_m(tau, n.alpha)?;
    let coef = PI * n.lambda_m;
    let rate = coef * (1.0 + d);
    let noise = tau * n.sigma2 / n.p_m;
    integrate_to_inf(
        |v| Ok(coef * (-rate * v - noise * v.powf(n.alpha / 2.0)).exp()),
        0.0,
        TailBound::Exp { coef, rate },
        spec,
    )
}

/// Cellular coverage at the configured threshold τ_m.
pub fn coverage_cellular(n: &NetworkParams, spec: &QuadratureSpec) -> Result<f64> {
    coverage_cellular_at(n.tau_m, n, spec)
}

/// Interference-limited cellular coverage for α = 4 in closed form:
/// 1 / (1 + √τ·(π/2 − atan(1/√τ))). Valid only against σ² = 0.
pub fn coverage_cellular_closed_form(tau: f64) -> Result<f64> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!(
            "threshold must be finite and >= 0, got {tau}"
        )));
    }
    let st = tau.sqrt();
    Ok(1.0 / (1.0 + st * (PI / 2.0 - (1.0 / st).atan())))
}

/// One fully-parameterized network with its tabulated distance laws and
/// interference factor, plus memoized per-link integrals.
///
/// Construction is the expensive step (k_max distance tables plus the
/// δ_d tabulation); afterwards each coverage or rate integral is
/// evaluated once on first use and shared. The model is immutable and
/// safe to share across threads.
#[derive(Debug)]
pub struct LinkModel {
    n: NetworkParams,
    g: GeometryParams,
    cache: CacheParams,
    spec: QuadratureSpec,
    /// Intensity of the active-interferer field, λ̃_m = p_int·λ_m.
    lambda_tilde: f64,
    /// Renormalized distance tables, index i−1 for candidate rank i.
    tables: Vec<DistanceDistribution>,
    delta_d: DeltaDTable,
    cov_m: OnceLock<f64>,
    cov_d: Vec<OnceLock<f64>>,
    rate_m: OnceLock<f64>,
    rate_d: Vec<OnceLock<f64>>,
    /// Offload fraction keyed by (scheme name, k).
    offload: Mutex<BTreeMap<(&'static str, u32), f64>>,
}

impl LinkModel {
    /// Builds the model with the default 400-point distance grids.
    pub fn new(
        n: NetworkParams,
        cache: CacheParams,
        k_max: u32,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        Self::assemble(n, cache, k_max, None, spec)
    }

    /// Same as [`Self::new`] with an explicit distance-grid length,
    /// mainly to trade accuracy for construction time in sweeps.
    pub fn with_grid_points(
        n: NetworkParams,
        cache: CacheParams,
        k_max: u32,
        grid_points: usize,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        Self::assemble(n, cache, k_max, Some(grid_points), spec)
    }

    fn assemble(
        n: NetworkParams,
        cache: CacheParams,
        k_max: u32,
        grid_points: Option<usize>,
        spec: &QuadratureSpec,
    ) -> Result<Self> {
        n.validate()?;
        if k_max < 1 {
            return Err(Error::Domain(format!(
                "candidate depth k_max must be >= 1, got {k_max}"
            )));
        }
        let g = n.geometry()?;
        let lambda_tilde = p_nonempty_cell(g.eta_d())? * n.lambda_m;
        let mut tables = Vec::with_capacity(k_max as usize);
        for i in 1..=k_max {
            let mut t = match grid_points {
                Some(p) => DistanceDistribution::build_with_points(i, &g, p, spec)?,
                None => DistanceDistribution::build(i, &g, spec)?,
            };
            t.renormalize();
            tables.push(t);
        }
        let delta_d = DeltaDTable::build(n.alpha, lambda_tilde, spec)?;
        Ok(LinkModel {
            n,
            g,
            cache,
            spec: *spec,
            lambda_tilde,
            tables,
            delta_d,
            cov_m: OnceLock::new(),
            cov_d: (0..k_max).map(|_| OnceLock::new()).collect(),
            rate_m: OnceLock::new(),
            rate_d: (0..k_max).map(|_| OnceLock::new()).collect(),
            offload: Mutex::new(BTreeMap::new()),
        })
    }

    /// The network parameters the model was built from.
    pub fn params(&self) -> &NetworkParams {
        &self.n
    }

    /// The content/cache parameters the model was built from.
    pub fn cache_params(&self) -> &CacheParams {
        &self.cache
    }

    /// Spatial parameters (λ_m, λ_d).
    pub fn geometry(&self) -> &GeometryParams {
        &self.g
    }

    /// Deepest tabulated candidate rank.
    pub fn k_max(&self) -> u32 {
        self.tables.len() as u32
    }

    /// Quadrature settings shared by every integral in the model.
    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    fn cached(lock: &OnceLock<f64>, compute: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = lock.get() {
            return Ok(*v);
        }
        let v = compute()?;
        Ok(*lock.get_or_init(|| v))
    }

    fn table(&self, i: u32) -> Result<&DistanceDistribution> {
        if i < 1 || i as usize > self.tables.len() {
            return Err(Error::Domain(format!(
                "candidate rank {i} outside the tabulated range [1, {}]",
                self.tables.len()
            )));
        }
        Ok(&self.tables[i as usize - 1])
    }

    fn check_depth(&self, k: u32) -> Result<()> {
        if k < 1 || k as usize > self.tables.len() {
            return Err(Error::Domain(format!(
                "candidate count k = {k} outside the tabulated range [1, {}]",
                self.tables.len()
            )));
        }
        Ok(())
    }

    fn mode_profile(&self, scheme: &dyn SelectionScheme, c: u32, k: u32) -> Result<ModeProfile> {
        self.check_depth(k)?;
        scheme.mode_profile(c, k, self.g.eta_d(), &self.cache)
    }

    /// Conditional D2D success kernel P[SINR > τ | serving distance r],
    /// exp(−2πλ̃_m·s·δ_d(s)/(α−2) − sσ²/P_d) with s = τ·r^α.
    fn d2d_kernel(&self, r: f64, tau: f64) -> f64 {
        let s = tau * r.powf(self.n.alpha);
        if s <= 0.0 {
            return 1.0;
        }
        let interference = 2.0 * PI * self.lambda_tilde * s * self.delta_d.value(s)
            / (self.n.alpha - 2.0);
        (-interference - s * self.n.sigma2 / self.n.p_d).exp()
    }

    /// Cellular coverage at the configured threshold τ_m (memoized).
    pub fn coverage_cellular(&self) -> Result<f64> {
        Self::cached(&self.cov_m, || {
            coverage_cellular_at(self.n.tau_m, &self.n, &self.spec)
        })
    }

    /// Cellular coverage at an arbitrary threshold.
    pub fn coverage_cellular_at(&self, tau: f64) -> Result<f64> {
        coverage_cellular_at(tau, &self.n, &self.spec)
    }

    /// Coverage of a D2D link served by the i-th nearest candidate at
    /// the configured threshold τ_d (memoized per rank).
    pub fn coverage_d2d_ith(&self, i: u32) -> Result<f64> {
        self.table(i)?;
        Self::cached(&self.cov_d[i as usize - 1], || {
            self.coverage_d2d_ith_at(i, self.n.tau_d)
        })
    }

    /// Rank-i D2D coverage at an arbitrary threshold: the conditional
    /// kernel averaged over the in-disk distance law of rank i.
    pub fn coverage_d2d_ith_at(&self, i: u32, tau: f64) -> Result<f64> {
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::Domain(format!(
                "threshold must be finite and >= 0, got {tau}"
            )));
        }
        self.table(i)?.expectation(|r| Ok(self.d2d_kernel(r, tau)))
    }

    /// Coverage conditioned on being served in D2D mode at all:
    /// Σᵢ pᵢ·Γ_{d,i} / Σᵢ pᵢ. Errors with
    /// [`Error::UndefinedConditional`] when the mode probability is zero.
    pub fn coverage_d2d_mode(&self, scheme: &dyn SelectionScheme, c: u32, k: u32) -> Result<f64> {
        let profile = self.mode_profile(scheme, c, k)?;
        if profile.d2d_total <= 0.0 {
            return Err(Error::UndefinedConditional(format!(
                "D2D mode has probability zero for scheme {}, content {c}, k = {k}",
                scheme.name()
            )));
        }
        let mut acc = 0.0;
        for (idx, p) in profile.per_helper.iter().enumerate() {
            acc += p * self.coverage_d2d_ith(idx as u32 + 1)?;
        }
        Ok(acc / profile.d2d_total)
    }

    /// Overall coverage for content c under the given scheme and depth:
    /// the cellular and per-rank D2D coverages mixed by the exact mode
    /// weights.
    pub fn coverage_overall(
        &self,
        scheme: &dyn SelectionScheme,
        c: u32,
        k: u32,
    ) -> Result<MetricResult> {
        let profile = self.mode_profile(scheme, c, k)?;
        self.mix_coverage(&profile.per_helper, profile.cellular, Method::Exact)
    }

    /// Overall coverage with the dense-helper weight simplification:
    /// per-rank weights from [`SelectionScheme::p_d2d_bound`] and the
    /// complement on the cellular term.
    pub fn coverage_overall_bound(
        &self,
        scheme: &dyn SelectionScheme,
        c: u32,
        k: u32,
    ) -> Result<MetricResult> {
        let (weights, cellular) = self.bound_weights(scheme, c, k)?;
        self.mix_coverage(&weights, cellular, Method::Bound)
    }

    fn bound_weights(
        &self,
        scheme: &dyn SelectionScheme,
        c: u32,
        k: u32,
    ) -> Result<(Vec<f64>, f64)> {
        self.check_depth(k)?;
        let mut weights = Vec::with_capacity(k as usize);
        for i in 1..=k {
            weights.push(scheme.p_d2d_bound(i, c, k, &self.cache)?);
        }
        let cellular = 1.0 - weights.iter().sum::<f64>();
        Ok((weights, cellular))
    }

    fn mix_coverage(
        &self,
        per_helper: &[f64],
        cellular: f64,
        method: Method,
    ) -> Result<MetricResult> {
        let mut components = Vec::with_capacity(per_helper.len() + 1);
        components.push(("cellular".to_string(), cellular * self.coverage_cellular()?));
        for (idx, p) in per_helper.iter().enumerate() {
            let i = idx as u32 + 1;
            components.push((format!("d2d_{i}"), p * self.coverage_d2d_ith(i)?));
        }
        Ok(MetricResult::from_components(components, method))
    }

    /// Smallest candidate depth k ∈ [1, k_max] maximizing the overall
    /// coverage for content c.
    pub fn optimal_k_coverage(&self, scheme: &dyn SelectionScheme, c: u32) -> Result<u32> {
        let mut best_k = 1;
        let mut best = f64::NEG_INFINITY;
        for k in 1..=self.k_max() {
            let v = self.coverage_overall(scheme, c, k)?.value;
            if v > best {
                best = v;
                best_k = k;
            }
        }
        Ok(best_k)
    }

    /// Percent coverage improvement of offloading at the coverage-optimal
    /// depth over the all-cellular baseline,
    /// 100·(Γ^(k*) − Γ_m)/Γ_m.
    pub fn coverage_gain(&self, scheme: &dyn SelectionScheme, c: u32) -> Result<f64> {
        let k = self.optimal_k_coverage(scheme, c)?;
        let base = self.coverage_cellular()?;
        Ok((self.coverage_overall(scheme, c, k)?.value - base) / base * 100.0)
    }
}


#[cfg(test)]
mod tests {
    use super::test_fixture::{model, reference_cache, reference_network};
    use super::*;
    use crate::scheme::scheme_by_name;

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let scale = expected.abs().max(f64::MIN_POSITIVE);
        assert!(
            (actual - expected).abs() <= tol * scale,
            "got {actual:.17e}, want {expected:.17e} (rel err {:.3e}, tol {tol:.1e})",
            (actual - expected).abs() / scale
        );
    }

    #[test]
    fn network_params_validation_rejects_out_of_range_fields() {
        assert!(reference_network().validate().is_ok());
        let mut n = reference_network();
        n.alpha = 2.0;
        assert!(n.validate().is_err());
        n = reference_network();
        n.alpha = 5.5;
        assert!(n.validate().is_err());
        n = reference_network();
        n.beta = 0.0;
        assert!(n.validate().is_err());
        n = reference_network();
        n.sigma2 = -1e-15;
        assert!(n.validate().is_err());
        n = reference_network();
        n.p_d = 0.0;
        assert!(n.validate().is_err());
        n = reference_network();
        n.tau_m = f64::INFINITY;
        assert!(n.validate().is_err());
    }

    #[test]
    fn bandwidth_share_matches_poisson_expectation() {
        assert_eq!(bandwidth_share(0.0).unwrap(), 1.0);
        assert_rel(bandwidth_share(2.0).unwrap(), 4.32332358381693649e-1, 1e-15);
        // E[1/(1+N)] by direct Poisson summation at a moderate mean.
        let a: f64 = 3.7;
        let mut expect = 0.0;
        let mut term = (-a).exp();
        for n in 0..200 {
            expect += term / f64::from(n + 1);
            term *= a / f64::from(n + 1);
        }
        assert_rel(bandwidth_share(a).unwrap(), expect, 1e-14);
        assert!(bandwidth_share(-0.1).is_err());
        assert!(bandwidth_share(f64::NAN).is_err());
    }

    #[test]
    fn delta_m_matches_frozen_references() {
        assert_rel(delta_m(1000.0, 4.0).unwrap(), 48.673274462456585628, 1e-12);
        assert_rel(delta_m(10.0, 4.0).unwrap(), 3.9987600505576613678, 1e-12);
        assert_rel(delta_m(10.0, 3.5).unwrap(), 5.8981415505866926471, 1e-12);
        assert_eq!(delta_m(0.0, 4.0).unwrap(), 0.0);
        assert!(delta_m(-1.0, 4.0).is_err());
        assert!(delta_m(1.0, 2.0).is_err());
    }

    #[test]
    fn delta_m_asymptote_joins_the_hypergeometric_branch() {
        // At α = 4 the closed form collapses to √τ·atan(√τ), which stays
        // well-conditioned across the asymptotic switch.
        let identity = |tau: f64| tau.sqrt() * tau.sqrt().atan();
        for &tau in &[1e4, 1e5, 9.9e5, 1.1e6, 1e9, 1e12, 1e17] {
            assert_rel(delta_m(tau, 4.0).unwrap(), identity(tau), 1e-9);
        }
        // Both branches evaluated at the switch point itself.
        for &alpha in &[3.0, 4.5, 5.0] {
            let tau = DELTA_M_ASYMPTOTIC;
            let b = 1.0 - 2.0 / alpha;
            let hyp =
                2.0 * tau / (alpha - 2.0) * interference::hyp2f1_one_neg(b, 1.0 + b, tau).unwrap();
            let asym = (2.0 * PI / alpha) / (2.0 * PI / alpha).sin() * tau.powf(2.0 / alpha) - 1.0;
            assert_rel(asym, hyp, 1e-9);
        }
    }

    #[test]
    fn delta_m_closed_form_agrees_with_its_defining_integral() {
        // Substituting u = e^w maps the defining integral onto [ln lo, ∞)
        // where e^w/(1 + e^(αw/2)) ≤ e^(−(α/2−1)w) is an exact envelope.
        let spec = QuadratureSpec::with_tols(1e-13, 1e-11);
        for &alpha in &[3.5, 4.0, 4.5] {
            for &tau in &[0.5f64, 10.0, 1000.0] {
                let lo = -(2.0 / alpha) * tau.ln();
                let quad = integrate_to_inf(
                    |w| Ok(w.exp() / (1.0 + (alpha / 2.0 * w).exp())),
                    lo,
                    TailBound::Exp {
                        coef: 1.0,
                        rate: alpha / 2.0 - 1.0,
                    },
                    &spec,
                )
                .unwrap();
                let direct = tau.powf(2.0 / alpha) * quad;
                assert_rel(delta_m(tau, alpha).unwrap(), direct, 1e-8);
            }
        }
    }

    #[test]
    fn cellular_coverage_closed_form_matches_frozen_references() {
        assert_rel(
            coverage_cellular_closed_form(0.1).unwrap(),
            0.91169885829139620026,
            1e-12,
        );
        assert_rel(
            coverage_cellular_closed_form(1.0).unwrap(),
            0.56009915351155737591,
            1e-12,
        );
        assert_rel(
            coverage_cellular_closed_form(10.0).unwrap(),
            0.20004961028054148362,
            1e-12,
        );
        assert_rel(
            coverage_cellular_closed_form(100.0).unwrap(),
            0.063648551060190753996,
            1e-12,
        );
        assert_rel(
            coverage_cellular_closed_form(1000.0).unwrap(),
            0.020131549828787854869,
            1e-12,
        );
        assert_eq!(coverage_cellular_closed_form(0.0).unwrap(), 1.0);
    }

    #[test]
    fn cellular_coverage_quadrature_agrees_with_closed_form_without_noise() {
        let mut n = reference_network();
        n.sigma2 = 0.0;
        let spec = QuadratureSpec::with_tols(1e-13, 1e-11);
        for &tau in &[0.1, 1.0, 10.0, 100.0, 1000.0] {
            assert_rel(
                coverage_cellular_at(tau, &n, &spec).unwrap(),
                coverage_cellular_closed_form(tau).unwrap(),
                1e-9,
            );
        }
    }

    #[test]
    fn cellular_coverage_with_noise_matches_frozen_references() {
        let n = reference_network();
        let spec = QuadratureSpec::default();
        assert_rel(
            coverage_cellular_at(1000.0, &n, &spec).unwrap(),
            2.01314478440828906e-2,
            1e-7,
        );
        assert_rel(
            coverage_cellular_at(0.1, &n, &spec).unwrap(),
            9.11697911045151743e-1,
            1e-7,
        );
        assert_rel(
            coverage_cellular_at(10.0, &n, &spec).unwrap(),
            2.00048609551220863e-1,
            1e-7,
        );
        // The model memoizes the τ_m value and reproduces the free call.
        assert_rel(
            model().coverage_cellular().unwrap(),
            2.01314478440828906e-2,
            1e-7,
        );
    }

    #[test]
    fn d2d_coverage_matches_frozen_references() {
        let m = model();
        assert_rel(m.coverage_d2d_ith(1).unwrap(), 2.36145360345114325e-1, 2e-4);
        assert_rel(m.coverage_d2d_ith(2).unwrap(), 4.71198174127716932e-2, 2e-4);
        assert_rel(m.coverage_d2d_ith(3).unwrap(), 9.00062053083296350e-3, 2e-4);
        assert_rel(m.coverage_d2d_ith(4).unwrap(), 1.70634812546901029e-3, 2e-4);
        assert_rel(
            m.coverage_d2d_ith_at(1, 0.1).unwrap(),
            9.89357616922268535e-1,
            2e-4,
        );
        assert_rel(
            m.coverage_d2d_ith_at(1, 10.0).unwrap(),
            7.82067737123297246e-1,
            2e-4,
        );
    }

    #[test]
    fn d2d_coverage_is_one_at_zero_threshold_and_decreasing_in_rank() {
        let m = model();
        assert_rel(m.coverage_d2d_ith_at(1, 0.0).unwrap(), 1.0, 1e-12);
        for &tau in &[0.1, 1.0, 10.0, 1000.0] {
            for i in 1..=3 {
                let near = m.coverage_d2d_ith_at(i, tau).unwrap();
                let far = m.coverage_d2d_ith_at(i + 1, tau).unwrap();
                assert!(
                    far < near,
                    "rank {} coverage {far} not below rank {i} coverage {near} at tau {tau}",
                    i + 1
                );
            }
        }
        assert!(m.coverage_d2d_ith(0).is_err());
        assert!(m.coverage_d2d_ith(11).is_err());
        assert!(m.coverage_d2d_ith_at(1, -1.0).is_err());
    }

    #[test]
    fn first_rank_d2d_beats_cellular_at_the_shared_threshold() {
        let m = model();
        let d2d = m.coverage_d2d_ith(1).unwrap();
        let cell = m.coverage_cellular().unwrap();
        assert!(
            d2d > cell,
            "nearest-candidate D2D coverage {d2d} should exceed cellular {cell}"
        );
    }

    #[test]
    fn overall_coverage_mixes_modes_and_matches_frozen_curve() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        // Frozen overall-coverage curve for the most popular content.
        let expected = [
            1.332647926836e-1,
            1.397757036022e-1,
            1.385595216149e-1,
            1.376633143033e-1,
        ];
        for (idx, &want) in expected.iter().enumerate() {
            let k = idx as u32 + 1;
            let got = m.coverage_overall(&*ns, 1, k).unwrap();
            assert_rel(got.value, want, 2e-4);
            assert_eq!(got.method, Method::Exact);
            assert_eq!(got.components.len(), k as usize + 1);
            let sum: f64 = got.components.iter().map(|(_, v)| v).sum();
            assert!((got.value - sum).abs() <= 1e-12);
        }
    }

    #[test]
    fn overall_coverage_reduces_to_cellular_when_helpers_cannot_cache() {
        let m = model();
        let no_d2d =
            LinkModel::with_grid_points(reference_network(), no_hit_cache(), 2, 60, m.spec())
                .unwrap();
        let ns = scheme_by_name("ns").unwrap();
        let got = no_d2d.coverage_overall(&*ns, 1, 2).unwrap();
        assert_rel(got.value, no_d2d.coverage_cellular().unwrap(), 1e-12);
        assert_eq!(got.component("d2d_1"), Some(0.0));
    }

    fn no_hit_cache() -> CacheParams {
        CacheParams::new(10_000, 0.8, 500, 0).unwrap()
    }

    #[test]
    fn mode_conditioned_coverage_requires_a_positive_mode_probability() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        // Conditioned on D2D mode, coverage is a convex mixture of the
        // per-rank terms, so it lies between the deepest and nearest ones.
        for scheme in [&ns, &us] {
            let v = m.coverage_d2d_mode(&**scheme, 1, 4).unwrap();
            assert!(v > m.coverage_d2d_ith(4).unwrap() && v < m.coverage_d2d_ith(1).unwrap());
        }
        // k = 1 conditioning collapses to the rank-1 coverage for both.
        assert_rel(
            m.coverage_d2d_mode(&*ns, 1, 1).unwrap(),
            m.coverage_d2d_ith(1).unwrap(),
            1e-12,
        );
        assert_rel(
            m.coverage_d2d_mode(&*us, 1, 1).unwrap(),
            m.coverage_d2d_ith(1).unwrap(),
            1e-12,
        );
        let no_d2d = LinkModel::with_grid_points(
            reference_network(),
            no_hit_cache(),
            2,
            60,
            &QuadratureSpec::default(),
        )
        .unwrap();
        match no_d2d.coverage_d2d_mode(&*ns, 1, 2) {
            Err(Error::UndefinedConditional(_)) => {}
            other => panic!("expected UndefinedConditional, got {other:?}"),
        }
    }

    #[test]
    fn bound_weights_track_the_exact_mixture_within_tolerance() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        let ns_bound = m.coverage_overall_bound(&*ns, 1, 4).unwrap();
        let us_bound = m.coverage_overall_bound(&*us, 1, 4).unwrap();
        assert_eq!(ns_bound.method, Method::Bound);
        assert_eq!(us_bound.method, Method::Bound);
        assert_rel(ns_bound.value, 1.386738083821445e-1, 2e-4);
        assert_rel(us_bound.value, 4.832880102939939e-2, 2e-4);
        let ns_exact = m.coverage_overall(&*ns, 1, 4).unwrap().value;
        let us_exact = m.coverage_overall(&*us, 1, 4).unwrap().value;
        // The NS simplification overweights D2D, so it sits above the
        // exact mixture; both gaps stay small at η_d = 10.
        assert!(ns_bound.value >= ns_exact);
        assert!((ns_bound.value - ns_exact).abs() < 0.03);
        assert!((us_bound.value - us_exact).abs() < 0.03);
    }

    #[test]
    fn optimal_depth_and_gain_match_frozen_references() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        assert_eq!(m.optimal_k_coverage(&*ns, 1).unwrap(), 2);
        assert_eq!(m.optimal_k_coverage(&*us, 1).unwrap(), 1);
        let g_ns = m.coverage_gain(&*ns, 1).unwrap();
        let g_us = m.coverage_gain(&*us, 1).unwrap();
        assert!((g_ns - 594.3152061629).abs() < 0.5, "G_ns = {g_ns}");
        assert!((g_us - 561.9732158152).abs() < 0.5, "G_us = {g_us}");
        assert!(g_ns > g_us && g_us > 0.0);
    }

    #[test]
    fn single_candidate_depth_is_scheme_independent() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        let a = m.coverage_overall(&*ns, 1, 1).unwrap().value;
        let b = m.coverage_overall(&*us, 1, 1).unwrap().value;
        assert_rel(a, b, 1e-13);
    }

    #[test]
    fn metric_result_component_lookup() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let r = m.coverage_overall(&*ns, 1, 2).unwrap();
        assert!(r.component("cellular").is_some());
        assert!(r.component("d2d_2").is_some());
        assert!(r.component("d2d_3").is_none());
        assert_eq!(r.method.as_str(), "exact");
        assert_eq!(Method::Bound.as_str(), "bound");
    }

    #[test]
    fn model_construction_rejects_bad_arguments() {
        let spec = QuadratureSpec::default();
        let mut n = reference_network();
        n.alpha = 1.5;
        assert!(LinkModel::with_grid_points(n, reference_cache(), 2, 50, &spec).is_err());
        assert!(
            LinkModel::with_grid_points(reference_network(), reference_cache(), 0, 50, &spec)
                .is_err()
        );
        assert!(
            LinkModel::with_grid_points(reference_network(), reference_cache(), 2, 1, &spec)
                .is_err()
        );
    }

    #[test]
    fn quadrature_coverage_is_monotone_in_threshold() {
        let n = reference_network();
        let spec = QuadratureSpec::default();
        let taus = [0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
        let mut prev = 1.0;
        for &tau in &taus {
            let v = coverage_cellular_at(tau, &n, &spec).unwrap();
            assert!(v < prev, "coverage must decrease with tau, got {v} after {prev}");
            assert!(v > 0.0 && v <= 1.0);
            prev = v;
        }
    }
}
