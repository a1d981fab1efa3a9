//! Content popularity and cache hit rates.
//!
//! Requests follow a Zipf law over a finite library of L unit-size files:
//! pop(c) = ρ·c^(−ζ) with ρ = (Σ_{l=1}^{L} l^(−ζ))^(−1). The MBS stores the
//! C_m most popular files deterministically, so its hit indicator is just
//! c ≤ C_m. Each D2D helper fills its C_d cache slots with independent
//! popularity-distributed draws, giving the probabilistic hit rate
//! h_d(c) = 1 − (1 − pop(c))^(C_d).

use crate::error::{Error, Result};

/// Largest library size for which the normalizer is computed by direct
/// summation; beyond this the constructor refuses rather than silently
/// switching to an approximation.
const MAX_LIBRARY_SIZE: u32 = 10_000_000;

/// Content library and cache-size parameters, with the Zipf normalizer
/// precomputed at construction. Immutable afterwards; freely shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct CacheParams {
    /// Library size L (number of distinct files).
    pub library_size: u32,
    /// Zipf skewness ζ ≥ 0 (0 means uniform popularity).
    pub zeta: f64,
    /// MBS cache size C_m, in files; the C_m most popular are stored.
    pub mbs_cache_size: u32,
    /// Helper cache size C_d, in files; slots are filled by independent
    /// popularity-distributed draws.
    pub helper_cache_size: u32,
    /// Normalizer ρ = 1/Σ l^(−ζ), derived from `library_size` and `zeta`.
    rho: f64,
}

impl CacheParams {
    pub fn new(
        library_size: u32,
        zeta: f64,
        mbs_cache_size: u32,
        helper_cache_size: u32,
    ) -> Result<Self> {
        if library_size < 1 {
            return Err(Error::Domain("library_size must be >= 1".into()));
        }
        if library_size > MAX_LIBRARY_SIZE {
            return Err(Error::Domain(format!(
                "library_size {library_size} exceeds the direct-summation guard {MAX_LIBRARY_SIZE}"
            )));
        }
        if !(zeta >= 0.0) || !zeta.is_finite() {
            return Err(Error::Domain(format!("zeta must be >= 0, got {zeta}")));
        }
        if mbs_cache_size < 1 || mbs_cache_size > library_size {
            return Err(Error::Domain(format!(
                "mbs_cache_size must satisfy 1 <= C_m <= L, got C_m = {mbs_cache_size}, L = {library_size}"
            )));
        }
        // Sum ascending in magnitude (l = L down to 1) for accuracy.
        let mut sum = 0.0;
        for l in (1..=library_size).rev() {
            sum += (l as f64).powf(-zeta);
        }
        Ok(CacheParams {
            library_size,
            zeta,
            mbs_cache_size,
            helper_cache_size,
            rho: 1.0 / sum,
        })
    }

    /// Zipf normalizer ρ.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn check_index(&self, c: u32) -> Result<()> {
        if c < 1 || c > self.library_size {
            return Err(Error::Domain(format!(
                "content index {c} outside [1, {}]",
                self.library_size
            )));
        }
        Ok(())
    }

    /// Request probability pop(c) = ρ·c^(−ζ) for content index c ∈ [1, L].
    pub fn popularity(&self, c: u32) -> Result<f64> {
        self.check_index(c)?;
        Ok(self.rho * (c as f64).powf(-self.zeta))
    }

    /// MBS cache hit indicator: true iff c ≤ C_m.
    pub fn hit_mbs(&self, c: u32) -> Result<bool> {
        self.check_index(c)?;
        Ok(c <= self.mbs_cache_size)
    }

    /// Helper cache hit rate h_d(c) = 1 − (1 − pop(c))^(C_d).
    pub fn hit_d2d(&self, c: u32) -> Result<f64> {
        let pop = self.popularity(c)?;
        Ok(1.0 - (1.0 - pop).powi(self.helper_cache_size as i32))
    }
}
