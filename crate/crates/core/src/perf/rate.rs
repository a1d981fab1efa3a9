//! Ergodic rates and load-shared throughputs built on the coverage
//! kernels of the parent module.
//!
//! Spectral efficiencies come from the CCDF identity
//! E[ln(1+X)] = ∫₀^∞ P[X > e^v − 1] dv applied to either link's SINR.
//! Throughputs then scale them by the tier bandwidth and by the expected
//! share of that band under a Poisson user load, with the load split
//! between tiers by the traffic fraction each scheme offloads.

use crate::error::{Error, Result};
use crate::math::integrate;
use crate::scheme::SelectionScheme;

use super::{bandwidth_share, LinkModel, Method, MetricResult};

/// Upper limit of the rate integrals in nats; beyond v = 40 both
/// coverage kernels are numerically zero against the e^v − 1 threshold.
const LN_SINR_LIMIT: f64 = 40.0;

impl LinkModel {
    /// Ergodic spectral efficiency of the cellular link, E[log₂(1+SINR)]
    /// in bit/s/Hz (memoized).
    pub fn ergodic_rate_cellular(&self) -> Result<f64> {
        Self::cached(&self.rate_m, || {
            let nats = integrate(
                |v| self.coverage_cellular_at(v.exp_m1()),
                0.0,
                LN_SINR_LIMIT,
                &self.spec,
            )?;
            Ok(nats / std::f64::consts::LN_2)
        })
    }

    /// Ergodic spectral efficiency of a D2D link served by the i-th
    /// nearest candidate, in bit/s/Hz (memoized per rank).
    pub fn ergodic_rate_d2d_ith(&self, i: u32) -> Result<f64> {
        self.table(i)?;
        Self::cached(&self.rate_d[i as usize - 1], || {
            let nats = integrate(
                |v| self.coverage_d2d_ith_at(i, v.exp_m1()),
                0.0,
                LN_SINR_LIMIT,
                &self.spec,
            )?;
            Ok(nats / std::f64::consts::LN_2)
        })
    }

    /// Fraction of all traffic the scheme serves in D2D mode at depth k:
    /// Σ_c pop(c)·p_mode(c), summed over the whole library (memoized per
    /// scheme and depth).
    pub fn offload_fraction(&self, scheme: &dyn SelectionScheme, k: u32) -> Result<f64> {
        self.check_depth(k)?;
        let key = (scheme.name(), k);
        if let Some(v) = self.offload.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let eta_d = self.g.eta_d();
        // Ascending popularity order for a stable, accurate sum.
        let mut frac = 0.0;
        for c in (1..=self.cache.library_size).rev() {
            frac += self.cache.popularity(c)? * scheme.p_d2d_mode(c, k, eta_d, &self.cache)?;
        }
        self.offload.lock().unwrap().insert(key, frac);
        Ok(frac)
    }

    /// Per-cell user loads (η_um, η_ud) of the cellular and D2D tiers:
    /// the total η_u split by the offload fraction.
    pub fn load_factors(&self, scheme: &dyn SelectionScheme, k: u32) -> Result<(f64, f64)> {
        let frac = self.offload_fraction(scheme, k)?;
        let eta_u = self.n.eta_u();
        Ok((eta_u * (1.0 - frac), eta_u * frac))
    }

    /// Average cellular throughput (bit/s) for a request for content c:
    /// the W_m share under the cellular-tier load, discounted by β when
    /// the MBS itself must fetch the content over backhaul.
    pub fn avg_rate_cellular(&self, scheme: &dyn SelectionScheme, c: u32, k: u32) -> Result<f64> {
        let (eta_um, _) = self.load_factors(scheme, k)?;
        let hat = if self.cache.hit_mbs(c)? {
            1.0
        } else {
            self.n.beta
        };
        Ok(self.n.w_m * bandwidth_share(eta_um)? * hat * self.ergodic_rate_cellular()?)
    }

    /// Average D2D throughput (bit/s) for content c conditioned on being
    /// served in D2D mode. Errors with [`Error::UndefinedConditional`]
    /// when that mode has probability zero.
    pub fn avg_rate_d2d(&self, scheme: &dyn SelectionScheme, c: u32, k: u32) -> Result<f64> {
        let profile = self.mode_profile(scheme, c, k)?;
        if profile.d2d_total <= 0.0 {
            return Err(Error::UndefinedConditional(format!(
                "D2D mode has probability zero for scheme {}, content {c}, k = {k}",
                scheme.name()
            )));
        }
        let (_, eta_ud) = self.load_factors(scheme, k)?;
        let mut acc = 0.0;
        for (idx, p) in profile.per_helper.iter().enumerate() {
            acc += p * self.ergodic_rate_d2d_ith(idx as u32 + 1)?;
        }
        Ok(self.n.w_d * bandwidth_share(eta_ud)? * acc / profile.d2d_total)
    }

    /// Mode-weighted average throughput (bit/s) for content c: cellular
    /// and per-rank D2D components under their respective tier loads.
    pub fn avg_rate_overall(
        &self,
        scheme: &dyn SelectionScheme,
        c: u32,
        k: u32,
    ) -> Result<MetricResult> {
        let profile = self.mode_profile(scheme, c, k)?;
        self.mix_rate(
            scheme,
            &profile.per_helper,
            profile.cellular,
            c,
            k,
            Method::Exact,
        )
    }

    /// Average throughput with the dense-helper weight simplification;
    /// the tier loads keep their exact offload split.
    pub fn avg_rate_overall_bound(
        &self,
        scheme: &dyn SelectionScheme,
        c: u32,
        k: u32,
    ) -> Result<MetricResult> {
        let (weights, cellular) = self.bound_weights(scheme, c, k)?;
        self.mix_rate(scheme, &weights, cellular, c, k, Method::Bound)
    }

    fn mix_rate(
        &self,
        scheme: &dyn SelectionScheme,
        per_helper: &[f64],
        cellular: f64,
        c: u32,
        k: u32,
        method: Method,
    ) -> Result<MetricResult> {
        let (eta_um, eta_ud) = self.load_factors(scheme, k)?;
        let hat = if self.cache.hit_mbs(c)? {
            1.0
        } else {
            self.n.beta
        };
        let cell_rate = self.n.w_m * bandwidth_share(eta_um)? * hat * self.ergodic_rate_cellular()?;
        let d2d_band = self.n.w_d * bandwidth_share(eta_ud)?;
        let mut components = Vec::with_capacity(per_helper.len() + 1);
        components.push(("cellular".to_string(), cellular * cell_rate));
        for (idx, p) in per_helper.iter().enumerate() {
            let i = idx as u32 + 1;
            components.push((
                format!("d2d_{i}"),
                p * d2d_band * self.ergodic_rate_d2d_ith(i)?,
            ));
        }
        Ok(MetricResult::from_components(components, method))
    }

    /// Throughput of the no-offloading baseline for MBS-cached contents:
    /// one tier carrying both bands and the full user load.
    pub fn baseline_rate_cached(&self) -> Result<f64> {
        Ok((self.n.w_m + self.n.w_d)
            * bandwidth_share(self.n.eta_u())?
            * self.ergodic_rate_cellular()?)
    }

    /// Baseline throughput when the MBS must fetch the content over
    /// backhaul: β times the cached baseline.
    pub fn baseline_rate_backhaul(&self) -> Result<f64> {
        Ok(self.n.beta * self.baseline_rate_cached()?)
    }

    /// Smallest candidate depth k ∈ [1, k_max] maximizing the overall
    /// average throughput for content c.
    pub fn optimal_k_rate(&self, scheme: &dyn SelectionScheme, c: u32) -> Result<u32> {
        let mut best_k = 1;
        let mut best = f64::NEG_INFINITY;
        for k in 1..=self.k_max() {
            let v = self.avg_rate_overall(scheme, c, k)?.value;
            if v > best {
                best = v;
                best_k = k;
            }
        }
        Ok(best_k)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_fixture::{model, reference_network};
    use super::super::{LinkModel, Method};
    use super::*;
    use crate::content::CacheParams;
    use crate::math::QuadratureSpec;
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
    fn spectral_efficiencies_match_frozen_references() {
        let m = model();
        assert_rel(m.ergodic_rate_cellular().unwrap(), 2.148146592535478, 5e-5);
        assert_rel(m.ergodic_rate_d2d_ith(1).unwrap(), 7.136684662047250, 5e-4);
        assert_rel(m.ergodic_rate_d2d_ith(2).unwrap(), 4.343400293779701, 5e-4);
        assert_rel(m.ergodic_rate_d2d_ith(3).unwrap(), 3.090750113819487, 5e-4);
    }

    #[test]
    fn spectral_efficiency_decreases_with_candidate_rank() {
        let m = model();
        let mut prev = f64::INFINITY;
        for i in 1..=m.k_max() {
            let r = m.ergodic_rate_d2d_ith(i).unwrap();
            assert!(r < prev, "rank {i} rate {r} not below {prev}");
            assert!(r > 0.0);
            prev = r;
        }
        assert!(m.ergodic_rate_d2d_ith(1).unwrap() > m.ergodic_rate_cellular().unwrap());
        assert!(m.ergodic_rate_d2d_ith(0).is_err());
        assert!(m.ergodic_rate_d2d_ith(11).is_err());
    }

    #[test]
    fn offload_fraction_matches_frozen_references() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        assert_rel(
            m.offload_fraction(&*ns, 4).unwrap(),
            1.261830662378171e-1,
            1e-9,
        );
        assert_rel(
            m.offload_fraction(&*ns, 1).unwrap(),
            5.051693937234084e-2,
            1e-9,
        );
        // US offloads the same traffic at every depth, and at k = 1 the
        // schemes coincide.
        let us1 = m.offload_fraction(&*us, 1).unwrap();
        assert_rel(m.offload_fraction(&*us, 7).unwrap(), us1, 1e-13);
        assert_rel(m.offload_fraction(&*ns, 1).unwrap(), us1, 1e-13);
    }

    #[test]
    fn load_factors_split_the_total_user_load() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let (um, ud) = m.load_factors(&*ns, 4).unwrap();
        assert_rel(um, 1.747633867524366e1, 1e-9);
        assert_rel(ud, 2.523661324756341, 1e-9);
        assert_rel(um + ud, m.params().eta_u(), 1e-12);
    }

    #[test]
    fn throughputs_match_frozen_references() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        let t_ns = m.avg_rate_overall(&*ns, 1, 2).unwrap();
        assert_rel(t_ns.value, 7.129353676129984e6, 5e-4);
        assert_eq!(t_ns.method, Method::Exact);
        let sum: f64 = t_ns.components.iter().map(|(_, v)| v).sum();
        assert!((t_ns.value - sum).abs() <= 1e-9 * t_ns.value.abs());
        assert_rel(
            m.avg_rate_overall(&*us, 1, 1).unwrap().value,
            7.434643990962978e6,
            5e-4,
        );
        // Depth 1 makes the schemes indistinguishable.
        assert_rel(
            m.avg_rate_overall(&*ns, 1, 1).unwrap().value,
            m.avg_rate_overall(&*us, 1, 1).unwrap().value,
            1e-12,
        );
    }

    #[test]
    fn throughput_bounds_match_frozen_references() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        let b_ns = m.avg_rate_overall_bound(&*ns, 1, 2).unwrap();
        let b_us = m.avg_rate_overall_bound(&*us, 1, 2).unwrap();
        assert_eq!(b_ns.method, Method::Bound);
        assert_eq!(b_us.method, Method::Bound);
        assert_rel(b_ns.value, 7.217490616072649e6, 5e-4);
        assert_rel(b_us.value, 6.100600787749642e6, 5e-4);
        // The NS simplification overweights the D2D ranks, which carry
        // the higher per-link rate here.
        assert!(b_ns.value >= m.avg_rate_overall(&*ns, 1, 2).unwrap().value);
    }

    #[test]
    fn overall_rate_decomposes_into_conditional_rates() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let (c, k) = (3, 3);
        let profile = m.mode_profile(&*ns, c, k).unwrap();
        let combined = profile.cellular * m.avg_rate_cellular(&*ns, c, k).unwrap()
            + profile.d2d_total * m.avg_rate_d2d(&*ns, c, k).unwrap();
        assert_rel(m.avg_rate_overall(&*ns, c, k).unwrap().value, combined, 1e-12);
    }

    #[test]
    fn backhaul_discount_applies_beyond_the_mbs_cache() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        // C_m = 500: content 500 is cached, 501 is fetched over backhaul.
        let hit = m.avg_rate_cellular(&*ns, 500, 2).unwrap();
        let miss = m.avg_rate_cellular(&*ns, 501, 2).unwrap();
        assert_rel(miss / hit, m.params().beta, 1e-12);
    }

    #[test]
    fn d2d_conditional_rate_requires_a_positive_mode_probability() {
        let no_d2d = LinkModel::with_grid_points(
            reference_network(),
            CacheParams::new(10_000, 0.8, 500, 0).unwrap(),
            2,
            60,
            &QuadratureSpec::default(),
        )
        .unwrap();
        let ns = scheme_by_name("ns").unwrap();
        match no_d2d.avg_rate_d2d(&*ns, 1, 2) {
            Err(Error::UndefinedConditional(_)) => {}
            other => panic!("expected UndefinedConditional, got {other:?}"),
        }
    }

    #[test]
    fn baselines_match_frozen_references() {
        let m = model();
        assert_rel(m.baseline_rate_cached().unwrap(), 1.074073294053909e6, 5e-5);
        assert_rel(
            m.baseline_rate_backhaul().unwrap(),
            8.592586352431274e5,
            5e-5,
        );
        assert_rel(
            m.baseline_rate_backhaul().unwrap() / m.baseline_rate_cached().unwrap(),
            m.params().beta,
            1e-14,
        );
    }

    #[test]
    fn rate_optimal_depth_grows_with_content_rank() {
        let m = model();
        let ns = scheme_by_name("ns").unwrap();
        let us = scheme_by_name("us").unwrap();
        let ks: Vec<u32> = [1, 10, 100, 1000]
            .iter()
            .map(|&c| m.optimal_k_rate(&*ns, c).unwrap())
            .collect();
        assert_eq!(ks, vec![1, 2, 5, 10]);
        assert_eq!(m.optimal_k_rate(&*us, 1).unwrap(), 1);
        // Frozen optima for the swept contents.
        assert_rel(
            m.avg_rate_overall(&*ns, 10, 2).unwrap().value,
            2.3870098040e6,
            5e-4,
        );
        assert_rel(
            m.avg_rate_overall(&*ns, 100, 5).unwrap().value,
            1.1237854642e6,
            5e-4,
        );
        assert_rel(
            m.avg_rate_overall(&*ns, 1000, 10).unwrap().value,
            7.6498528737e5,
            5e-4,
        );
    }
}
