//! Trial protocols and estimator entry points.
//!
//! Two reference frames appear, each matching the probabilistic model of
//! the quantity it validates:
//!
//! - **Typical cell** (an MBS pinned at the origin): helper counts and
//!   mode probabilities. The analytic count distribution and the
//!   selection-scheme formulas describe the typical cell; measuring them
//!   in the cell that happens to contain a fixed user would size-bias the
//!   cell and shift every count-derived probability.
//! - **Origin user** (a user pinned at the origin, served by its nearest
//!   MBS): association distances, conditional helper distances, and link
//!   SINR — quantities defined from the user's point of view.
//!
//! The inscribed-disk membership constant composes a user-frame distance
//! with a typical-cell disk radius under an independence assumption, so
//! its estimator draws the two from independent realizations; sampling
//! both from one realization couples them (the empty disk around the user
//! pushes the serving cell's neighbors outward) and provably raises the
//! fraction — see `p_inside_bmax`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::content::CacheParams;
use crate::error::{Error, Result};
use crate::geometry::GeometryParams;
use crate::perf::NetworkParams;

use super::field::{build_index, Window, P2};
use super::{
    fold_trials, tag, Conditioning, ConditionalHistogram, CoverageCurve, DiscardCounts,
    DiscardReason, DistanceHistograms, Estimate, McSelection, Mergeable, Mode, SimConfig,
    TrialOutcome, MIN_ESTIMATE_TRIALS,
};

fn require_trials(cfg: &SimConfig) -> Result<()> {
    if cfg.trials < MIN_ESTIMATE_TRIALS {
        return Err(Error::InsufficientSamples {
            got: cfg.trials,
            need: MIN_ESTIMATE_TRIALS,
        });
    }
    Ok(())
}

fn check_rank(i: u32) -> Result<()> {
    if i < 1 {
        return Err(Error::Domain(format!(
            "candidate rank must be >= 1, got {i}"
        )));
    }
    Ok(())
}

fn check_taus(taus: &[f64]) -> Result<()> {
    if taus.is_empty() {
        return Err(Error::Domain("threshold grid must not be empty".into()));
    }
    for &t in taus {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!(
                "SINR thresholds must be finite and nonnegative, got {t}"
            )));
        }
    }
    Ok(())
}

/// Fraction of trials in which the typical user lies inside the maximal
/// inscribed disk of its serving cell, under the model's independence
/// assumption.
///
/// The association distance Y (nearest-MBS distance from a random
/// location) and the inscribed-disk radius X (half the nearest-neighbor
/// distance of a cell's MBS) are drawn from two independent realizations,
/// which is exactly the composition the analytic constant integrates.
/// Drawing both from a single realization instead conditions the serving
/// MBS's neighborhood on the MBS-free disk of radius Y around the user,
/// enlarging X: the coupled fraction is 1/4 exactly (the exclusion area
/// shrinks from 4πy² to 3πy²), not the model's 1/5. The coupling is a
/// property of the composition, not of either marginal, so the estimator
/// samples the marginals faithfully and composes them independently.
pub fn p_inside_bmax(g: &GeometryParams, cfg: &SimConfig) -> Result<Estimate> {
    require_trials(cfg)?;
    let window = cfg.window(g.lambda_m)?;
    let lambda_m = g.lambda_m;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::INSIDE,
        HitAcc::default,
        |rng, acc| {
            let user_frame = window.sample(rng, lambda_m);
            let palm_frame = window.sample(rng, lambda_m);
            let (Some(y2), Some(nn2)) = (
                min_origin_d2(&window, &user_frame),
                min_origin_d2(&window, &palm_frame),
            ) else {
                acc.discards.absorb(DiscardReason::EmptyMbsField);
                return;
            };
            acc.retained += 1;
            // y ≤ x with x = nn/2  ⟺  y² ≤ nn²/4.
            if y2 <= 0.25 * nn2 {
                acc.hits += 1;
            }
        },
    );
    Ok(Estimate::from_binomial(acc.hits, acc.retained, cfg.trials))
}

/// Probability that a request for content `c` is served in D2D mode under
/// a selection rule with candidate budget `k`, measured in the typical
/// cell.
///
/// Candidate availabilities are i.i.d. Bernoulli draws independent of the
/// geometry, so only the in-cell helper count matters; candidate ranks
/// are abstract indices here.
pub fn mode_probability(
    g: &GeometryParams,
    cache: &CacheParams,
    scheme: McSelection,
    c: u32,
    k: u32,
    cfg: &SimConfig,
) -> Result<Estimate> {
    require_trials(cfg)?;
    check_rank(k)?;
    let h = cache.hit_d2d(c)?;
    let window = cfg.window(g.lambda_m)?;
    let spacing = g.lambda_m.sqrt().recip();
    let g = *g;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::MODE,
        HitAcc::default,
        |rng, acc| {
            let n = typical_cell_count(rng, &g, &window, spacing);
            acc.retained += 1;
            if select_rank(rng, n, k, h, scheme).is_some() {
                acc.hits += 1;
            }
        },
    );
    Ok(Estimate::from_binomial(acc.hits, acc.retained, cfg.trials))
}

/// Empirical PMF of the typical cell's helper count for j = 0..=j_max.
pub fn helper_count_pmf(g: &GeometryParams, j_max: u32, cfg: &SimConfig) -> Result<Vec<Estimate>> {
    require_trials(cfg)?;
    let window = cfg.window(g.lambda_m)?;
    let spacing = g.lambda_m.sqrt().recip();
    let g = *g;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::COUNT,
        || PmfAcc {
            bins: vec![0; j_max as usize + 1],
        },
        |rng, acc| {
            let n = typical_cell_count(rng, &g, &window, spacing) as usize;
            if n < acc.bins.len() {
                acc.bins[n] += 1;
            }
        },
    );
    Ok(acc
        .bins
        .iter()
        .map(|&hits| Estimate::from_binomial(hits, cfg.trials, cfg.trials))
        .collect())
}

/// Cellular coverage P[SINR > τ] for every threshold on `taus`, from one
/// shared set of trials: the origin user associates with its nearest MBS
/// while every other MBS interferes, all with unit-mean exponential
/// fading over r^{−α} path loss.
pub fn cellular_coverage(
    net: &NetworkParams,
    taus: &[f64],
    cfg: &SimConfig,
) -> Result<CoverageCurve> {
    require_trials(cfg)?;
    net.validate()?;
    check_taus(taus)?;
    let window = cfg.window(net.lambda_m)?;
    let neg_half_alpha = -net.alpha / 2.0;
    let noise = net.sigma2 / net.p_m;
    let lambda_m = net.lambda_m;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::COV_M,
        || CurveAcc::new(taus.len()),
        |rng, acc| {
            let mbs = window.sample(rng, lambda_m);
            let Some((serving, _)) = argmin_origin(&window, &mbs) else {
                acc.discards.absorb(DiscardReason::EmptyMbsField);
                return;
            };
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, &p) in mbs.iter().enumerate() {
                let fade: f64 = Exp1.sample(rng);
                let power = fade * window.origin_d2(p).powf(neg_half_alpha);
                if j == serving {
                    signal = power;
                } else {
                    interference += power;
                }
            }
            acc.record(taus, signal / (interference + noise));
        },
    );
    Ok(acc.into_curve(taus, cfg.trials))
}

/// D2D link coverage for the i-th candidate: the i-th nearest conditioned
/// helper transmits to the origin user, and one uniformly chosen helper
/// in every other nonempty cell interferes — the physical interference
/// model, deliberately not the thinned-process surrogate the closed form
/// uses, so the measured gap is the model's own approximation error.
pub fn d2d_coverage(
    net: &NetworkParams,
    i: u32,
    conditioning: Conditioning,
    taus: &[f64],
    cfg: &SimConfig,
) -> Result<CoverageCurve> {
    require_trials(cfg)?;
    check_rank(i)?;
    net.validate()?;
    check_taus(taus)?;
    let window = cfg.window(net.lambda_m)?;
    let spacing = net.lambda_m.sqrt().recip();
    let neg_half_alpha = -net.alpha / 2.0;
    let noise = net.sigma2 / net.p_d;
    let (lambda_m, lambda_d) = (net.lambda_m, net.lambda_d);
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::COV_D,
        || CurveAcc::new(taus.len()),
        |rng, acc| {
            let Some(geo) = user_origin_geometry(rng, lambda_m, lambda_d, &window, spacing) else {
                acc.discards.absorb(DiscardReason::EmptyMbsField);
                return;
            };
            let candidates = match conditioning {
                Conditioning::TrueCell => in_cell_distances(&geo, &window),
                Conditioning::DiskApprox => {
                    if geo.y2 > geo.x2 {
                        acc.discards.absorb(DiscardReason::OutsideDisk);
                        return;
                    }
                    in_disk_distances(&geo, &window)
                }
            };
            let Some(&r2_serving) = candidates.get(i as usize - 1) else {
                acc.discards.absorb(DiscardReason::InsufficientHelpers);
                return;
            };
            let sinr = d2d_sinr(rng, &geo, &window, r2_serving, neg_half_alpha, noise);
            acc.record(taus, sinr);
        },
    );
    Ok(acc.into_curve(taus, cfg.trials))
}

/// Empirical densities of the distance to the i-th nearest conditioned
/// helper, under both conditioning rules, from one shared set of trials.
/// Histograms span `nbins` uniform bins on [0, r_max]; retained samples
/// beyond r_max count as overflow and every discarded trial is bookkept,
/// so each variant's retained + discarded total equals the trial count.
pub fn conditional_distance_histogram(
    g: &GeometryParams,
    i: u32,
    nbins: usize,
    r_max: f64,
    cfg: &SimConfig,
) -> Result<DistanceHistograms> {
    require_trials(cfg)?;
    check_rank(i)?;
    if nbins < 1 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    if !(r_max > 0.0) || !r_max.is_finite() {
        return Err(Error::Domain(format!(
            "histogram range must be positive and finite, got {r_max}"
        )));
    }
    let window = cfg.window(g.lambda_m)?;
    let spacing = g.lambda_m.sqrt().recip();
    let g = *g;
    let rank = i as usize - 1;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::DIST,
        || HistAcc {
            cell: ConditionalHistogram::new(nbins, r_max, cfg.trials),
            disk: ConditionalHistogram::new(nbins, r_max, cfg.trials),
        },
        |rng, acc| {
            let Some(geo) = user_origin_geometry(rng, g.lambda_m, g.lambda_d, &window, spacing)
            else {
                acc.cell.discarded.absorb(DiscardReason::EmptyMbsField);
                acc.disk.discarded.absorb(DiscardReason::EmptyMbsField);
                return;
            };
            match in_cell_distances(&geo, &window).get(rank) {
                Some(&r2) => acc.cell.record(r2.sqrt()),
                None => acc.cell.discarded.absorb(DiscardReason::InsufficientHelpers),
            }
            if geo.y2 > geo.x2 {
                acc.disk.discarded.absorb(DiscardReason::OutsideDisk);
            } else {
                match in_disk_distances(&geo, &window).get(rank) {
                    Some(&r2) => acc.disk.record(r2.sqrt()),
                    None => acc.disk.discarded.absorb(DiscardReason::InsufficientHelpers),
                }
            }
        },
    );
    Ok(DistanceHistograms {
        true_cell: acc.cell,
        disk: acc.disk,
    })
}

/// Mean bandwidth fraction left for the tagged user once co-scheduled
/// users share its serving tier. The co-user count is Poisson with the
/// tier's load — `loads.0` in cellular mode, `loads.1` in D2D mode — and
/// the tagged user always counts itself, so the share is 1/(1 + N).
pub fn rate_share_mean(
    g: &GeometryParams,
    cache: &CacheParams,
    scheme: McSelection,
    c: u32,
    k: u32,
    loads: (f64, f64),
    cfg: &SimConfig,
) -> Result<Estimate> {
    require_trials(cfg)?;
    check_rank(k)?;
    let h = cache.hit_d2d(c)?;
    for (name, load) in [("cellular", loads.0), ("d2d", loads.1)] {
        if !(load >= 0.0) || !load.is_finite() {
            return Err(Error::Domain(format!(
                "{name} load must be finite and nonnegative, got {load}"
            )));
        }
    }
    let window = cfg.window(g.lambda_m)?;
    let spacing = g.lambda_m.sqrt().recip();
    let g = *g;
    let acc = fold_trials(
        cfg.trials,
        cfg.seed,
        tag::SHARE,
        MomentAcc::default,
        |rng, acc| {
            let n = typical_cell_count(rng, &g, &window, spacing);
            let load = if select_rank(rng, n, k, h, scheme).is_some() {
                loads.1
            } else {
                loads.0
            };
            let share = 1.0 / (1.0 + poisson_count(rng, load) as f64);
            acc.sum += share;
            acc.sum_sq += share * share;
        },
    );
    Ok(Estimate::from_moments(
        acc.sum,
        acc.sum_sq,
        cfg.trials,
        cfg.trials,
    ))
}

/// One full realization of the origin-user protocol: associate the origin
/// user to its nearest MBS, rank the in-cell helpers by distance, draw
/// per-candidate Bernoulli(h_d) availability, select per `scheme` with
/// candidate budget `k`, and measure the selected link's SINR (cellular
/// interference from every other MBS; D2D interference from one uniformly
/// chosen helper per other nonempty cell).
///
/// Degenerate realizations come back marked [`TrialOutcome::discarded`],
/// never silently dropped. `h_d` must already be resolved to a
/// probability in [0, 1].
pub fn run_trial(
    rng: &mut ChaCha8Rng,
    net: &NetworkParams,
    h_d: f64,
    scheme: McSelection,
    k: u32,
    window: &Window,
) -> TrialOutcome {
    let spacing = net.lambda_m.sqrt().recip();
    let Some(geo) = user_origin_geometry(rng, net.lambda_m, net.lambda_d, window, spacing) else {
        return TrialOutcome {
            mode: Mode::Cellular,
            r_serving: f64::NAN,
            sinr: f64::NAN,
            covered_m: false,
            covered_d: false,
            n_helpers_in_cell: 0,
            discarded: Some(DiscardReason::EmptyMbsField),
        };
    };
    let candidates = in_cell_distances(&geo, window);
    let n = candidates.len() as u32;
    let neg_half_alpha = -net.alpha / 2.0;
    match select_rank(rng, n, k, h_d, scheme) {
        Some(rank) => {
            let r2_serving = candidates[rank as usize - 1];
            let noise = net.sigma2 / net.p_d;
            let sinr = d2d_sinr(rng, &geo, window, r2_serving, neg_half_alpha, noise);
            TrialOutcome {
                mode: Mode::D2d(rank),
                r_serving: r2_serving.sqrt(),
                sinr,
                covered_m: false,
                covered_d: sinr > net.tau_d,
                n_helpers_in_cell: n,
                discarded: None,
            }
        }
        None => {
            let noise = net.sigma2 / net.p_m;
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, &p) in geo.mbs.iter().enumerate() {
                let fade: f64 = Exp1.sample(rng);
                let power = fade * window.origin_d2(p).powf(neg_half_alpha);
                if j == geo.serving {
                    signal = power;
                } else {
                    interference += power;
                }
            }
            let sinr = signal / (interference + noise);
            TrialOutcome {
                mode: Mode::Cellular,
                r_serving: geo.y2.sqrt(),
                sinr,
                covered_m: sinr > net.tau_m,
                covered_d: false,
                n_helpers_in_cell: n,
                discarded: None,
            }
        }
    }
}

// ---------------------------------------------------------------------
// Shared trial geometry.

/// User-frame realization: the origin user, its serving MBS, and every
/// helper assigned to its true Voronoi cell.
pub(super) struct UserGeometry {
    pub mbs: Vec<P2>,
    pub helpers: Vec<P2>,
    /// Index of each helper's nearest MBS.
    pub cell_of: Vec<u32>,
    /// Index of the user's serving MBS.
    pub serving: usize,
    /// Squared user-to-serving-MBS distance.
    pub y2: f64,
    /// Squared inscribed-disk radius of the serving cell (quarter of the
    /// serving MBS's squared nearest-neighbor distance).
    pub x2: f64,
}

pub(super) fn user_origin_geometry(
    rng: &mut ChaCha8Rng,
    lambda_m: f64,
    lambda_d: f64,
    window: &Window,
    spacing: f64,
) -> Option<UserGeometry> {
    let mbs = window.sample(rng, lambda_m);
    let helpers = window.sample(rng, lambda_d);
    let (serving, y2) = argmin_origin(window, &mbs)?;
    let index = build_index(window, &mbs, spacing);
    let x2 = index
        .query(mbs[serving], Some(serving as u32))
        .map_or(f64::INFINITY, |(_, nn2)| 0.25 * nn2);
    // The MBS set is nonempty here, so a query never comes back empty.
    let cell_of = helpers
        .iter()
        .map(|&p| index.query(p, None).map_or(serving as u32, |(j, _)| j))
        .collect();
    Some(UserGeometry {
        mbs,
        helpers,
        cell_of,
        serving,
        y2,
        x2,
    })
}

/// Sorted squared distances from the user to the helpers of its serving
/// cell.
pub(super) fn in_cell_distances(geo: &UserGeometry, window: &Window) -> Vec<f64> {
    let mut d2: Vec<f64> = geo
        .helpers
        .iter()
        .zip(&geo.cell_of)
        .filter(|&(_, &cell)| cell as usize == geo.serving)
        .map(|(&p, _)| window.origin_d2(p))
        .collect();
    d2.sort_unstable_by(f64::total_cmp);
    d2
}

/// Sorted squared distances from the user to the helpers inside the
/// serving cell's maximal inscribed disk.
pub(super) fn in_disk_distances(geo: &UserGeometry, window: &Window) -> Vec<f64> {
    let center = geo.mbs[geo.serving];
    let mut d2: Vec<f64> = geo
        .helpers
        .iter()
        .filter(|&&p| window.d2(p, center) <= geo.x2)
        .map(|&p| window.origin_d2(p))
        .collect();
    d2.sort_unstable_by(f64::total_cmp);
    d2
}

/// SINR of a D2D link from a helper at squared distance `r2_serving`,
/// with one uniformly chosen helper per other nonempty cell interfering.
/// The serving cell contributes no interference beyond the server: one
/// active helper per cell is the physical model.
fn d2d_sinr(
    rng: &mut ChaCha8Rng,
    geo: &UserGeometry,
    window: &Window,
    r2_serving: f64,
    neg_half_alpha: f64,
    noise: f64,
) -> f64 {
    // Reservoir pick: a uniform helper per foreign cell in one pass.
    let mut count = vec![0u32; geo.mbs.len()];
    let mut pick = vec![0u32; geo.mbs.len()];
    for (hi, &cell) in geo.cell_of.iter().enumerate() {
        let cell = cell as usize;
        if cell == geo.serving {
            continue;
        }
        count[cell] += 1;
        if rng.gen_range(0..count[cell]) == 0 {
            pick[cell] = hi as u32;
        }
    }
    let fade: f64 = Exp1.sample(rng);
    let signal = fade * r2_serving.powf(neg_half_alpha);
    let mut interference = 0.0;
    for (cell, &occupants) in count.iter().enumerate() {
        if occupants == 0 || cell == geo.serving {
            continue;
        }
        let fade: f64 = Exp1.sample(rng);
        let p = geo.helpers[pick[cell] as usize];
        interference += fade * window.origin_d2(p).powf(neg_half_alpha);
    }
    signal / (interference + noise)
}

/// In-cell helper count of the typical cell: an MBS pinned at the origin,
/// a helper belonging iff the origin is its nearest MBS.
fn typical_cell_count(
    rng: &mut ChaCha8Rng,
    g: &GeometryParams,
    window: &Window,
    spacing: f64,
) -> u32 {
    let others = window.sample(rng, g.lambda_m);
    let helpers = window.sample(rng, g.lambda_d);
    if helpers.is_empty() {
        return 0;
    }
    if others.is_empty() {
        return helpers.len() as u32;
    }
    let index = build_index(window, &others, spacing);
    helpers
        .iter()
        .filter(|&&p| match index.query(p, None) {
            Some((_, nn2)) => window.origin_d2(p) < nn2,
            None => true,
        })
        .count() as u32
}

/// Applies a selection rule to `min(n, k)` candidates with i.i.d.
/// Bernoulli(h) availability; returns the serving candidate's 1-based
/// rank, or `None` for cellular mode.
fn select_rank(rng: &mut ChaCha8Rng, n: u32, k: u32, h: f64, scheme: McSelection) -> Option<u32> {
    let m = n.min(k);
    if m == 0 {
        return None;
    }
    match scheme {
        McSelection::Ns => (1..=m).find(|_| rng.gen::<f64>() < h),
        McSelection::UsSelectThenCheck => {
            let rank = rng.gen_range(0..m) + 1;
            (rng.gen::<f64>() < h).then_some(rank)
        }
        McSelection::UsCheckThenSelect => {
            let holders: Vec<u32> = (1..=m).filter(|_| rng.gen::<f64>() < h).collect();
            if holders.is_empty() {
                None
            } else {
                Some(holders[rng.gen_range(0..holders.len())])
            }
        }
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean > 0.0 {
        Poisson::new(mean)
            .expect("Poisson load must be positive and finite")
            .sample(rng) as u64
    } else {
        0
    }
}

fn min_origin_d2(window: &Window, pts: &[P2]) -> Option<f64> {
    pts.iter()
        .map(|&p| window.origin_d2(p))
        .min_by(f64::total_cmp)
}

fn argmin_origin(window: &Window, pts: &[P2]) -> Option<(usize, f64)> {
    pts.iter()
        .enumerate()
        .map(|(i, &p)| (i, window.origin_d2(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

// ---------------------------------------------------------------------
// Chunk accumulators.

#[derive(Default)]
struct HitAcc {
    hits: u64,
    retained: u64,
    discards: DiscardCounts,
}

impl Mergeable for HitAcc {
    fn merge_from(&mut self, other: Self) {
        self.hits += other.hits;
        self.retained += other.retained;
        self.discards.merge(other.discards);
    }
}

struct CurveAcc {
    hits: Vec<u64>,
    retained: u64,
    discards: DiscardCounts,
}

impl CurveAcc {
    fn new(len: usize) -> Self {
        CurveAcc {
            hits: vec![0; len],
            retained: 0,
            discards: DiscardCounts::default(),
        }
    }

    fn record(&mut self, taus: &[f64], sinr: f64) {
        self.retained += 1;
        for (slot, &tau) in self.hits.iter_mut().zip(taus) {
            if sinr > tau {
                *slot += 1;
            }
        }
    }

    fn into_curve(self, taus: &[f64], trials: u64) -> CoverageCurve {
        CoverageCurve {
            taus: taus.to_vec(),
            estimates: self
                .hits
                .iter()
                .map(|&h| Estimate::from_binomial(h, self.retained, trials))
                .collect(),
            discarded: self.discards,
        }
    }
}

impl Mergeable for CurveAcc {
    fn merge_from(&mut self, other: Self) {
        for (a, b) in self.hits.iter_mut().zip(other.hits) {
            *a += b;
        }
        self.retained += other.retained;
        self.discards.merge(other.discards);
    }
}

struct PmfAcc {
    bins: Vec<u64>,
}

impl Mergeable for PmfAcc {
    fn merge_from(&mut self, other: Self) {
        for (a, b) in self.bins.iter_mut().zip(other.bins) {
            *a += b;
        }
    }
}

#[derive(Default)]
struct MomentAcc {
    sum: f64,
    sum_sq: f64,
}

impl Mergeable for MomentAcc {
    fn merge_from(&mut self, other: Self) {
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

struct HistAcc {
    cell: ConditionalHistogram,
    disk: ConditionalHistogram,
}

impl Mergeable for HistAcc {
    fn merge_from(&mut self, other: Self) {
        self.cell.merge(&other.cell);
        self.disk.merge(&other.disk);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{distance_pdf, DistanceDistribution};
    use crate::math::quad::QuadratureSpec;
    use crate::perf::test_fixture;
    use crate::scheme::{cell_helper_count_pmf, p_nonempty_cell, scheme_by_name};
    use crate::mc::EdgePolicy;
    use rand::SeedableRng;

    fn table1_geometry() -> GeometryParams {
        let net = test_fixture::reference_network();
        GeometryParams::new(net.lambda_m, net.lambda_d).unwrap()
    }

    #[test]
    fn run_trial_respects_degenerate_hit_rates() {
        let net = test_fixture::reference_network();
        let window = SimConfig::new(1000, 1).window(net.lambda_m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in 0..300 {
            rng.set_stream(t);
            let sure = run_trial(&mut rng, &net, 1.0, McSelection::Ns, 3, &window);
            if sure.n_helpers_in_cell > 0 {
                assert_eq!(sure.mode, Mode::D2d(1), "h=1 must serve from rank 1");
            } else {
                assert_eq!(sure.mode, Mode::Cellular);
            }
            let never = run_trial(&mut rng, &net, 0.0, McSelection::UsSelectThenCheck, 3, &window);
            assert_eq!(never.mode, Mode::Cellular, "h=0 can never offload");
        }
    }

    #[test]
    fn run_trial_outcomes_are_internally_consistent() {
        let net = test_fixture::reference_network();
        let window = SimConfig::new(1000, 1).window(net.lambda_m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = 4;
        let mut saw_d2d = false;
        let mut saw_cellular = false;
        for t in 0..2000 {
            rng.set_stream(t);
            let out = run_trial(&mut rng, &net, 0.5, McSelection::Ns, k, &window);
            assert!(out.discarded.is_none(), "dense field should never discard");
            assert!(out.r_serving > 0.0 && out.r_serving.is_finite());
            assert!(out.sinr > 0.0);
            match out.mode {
                Mode::D2d(i) => {
                    saw_d2d = true;
                    assert!((1..=k).contains(&i));
                    assert!(i <= out.n_helpers_in_cell);
                    assert_eq!(out.covered_d, out.sinr > net.tau_d);
                    assert!(!out.covered_m);
                }
                Mode::Cellular => {
                    saw_cellular = true;
                    assert_eq!(out.covered_m, out.sinr > net.tau_m);
                    assert!(!out.covered_d);
                }
            }
        }
        assert!(saw_d2d && saw_cellular);
    }

    #[test]
    fn decoupled_inside_fraction_matches_the_model_constant() {
        let g = table1_geometry();
        let est = p_inside_bmax(&g, &SimConfig::new(20_000, 5)).unwrap();
        assert_eq!(est.retained, 20_000);
        assert!(
            (est.mean - 0.2).abs() < 0.015,
            "inside fraction {} should sit near 1/5",
            est.mean
        );
    }

    #[test]
    fn coupled_inside_fraction_is_biased_up_to_a_quarter() {
        // Measuring Y and X in the same realization couples them through
        // the MBS-free disk around the user; the fraction rises to 1/4
        // exactly, which is why the estimator decouples the draws.
        let g = table1_geometry();
        let cfg = SimConfig::new(20_000, 6);
        let window = cfg.window(g.lambda_m).unwrap();
        let spacing = g.lambda_m.sqrt().recip();
        let mut inside = 0u64;
        for t in 0..cfg.trials {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t);
            let geo = user_origin_geometry(&mut rng, g.lambda_m, 1e-12, &window, spacing).unwrap();
            if geo.y2 <= geo.x2 {
                inside += 1;
            }
        }
        let frac = inside as f64 / cfg.trials as f64;
        assert!(
            (frac - 0.25).abs() < 0.015,
            "coupled fraction {frac} should sit near 1/4"
        );
    }

    #[test]
    fn mode_probabilities_track_the_analytic_split() {
        let g = table1_geometry();
        let cache = test_fixture::reference_cache();
        let eta = g.eta_d();
        let cfg = SimConfig::new(20_000, 7);

        let ns = scheme_by_name("ns").unwrap();
        let analytic = ns.p_d2d_mode(1, 2, eta, &cache).unwrap();
        let mc = mode_probability(&g, &cache, McSelection::Ns, 1, 2, &cfg).unwrap();
        assert!(
            (mc.mean - analytic).abs() < 0.011,
            "NS: mc {} vs analytic {analytic}",
            mc.mean
        );

        let us = scheme_by_name("us").unwrap();
        let analytic = us.p_d2d_mode(1, 4, eta, &cache).unwrap();
        let stc = mode_probability(&g, &cache, McSelection::UsSelectThenCheck, 1, 4, &cfg).unwrap();
        assert!(
            (stc.mean - analytic).abs() < 0.011,
            "US select-then-check: mc {} vs analytic {analytic}",
            stc.mean
        );

        // Checking first and drawing among the holders offloads far more
        // often; the two variants must be clearly distinguishable.
        let cts = mode_probability(&g, &cache, McSelection::UsCheckThenSelect, 1, 4, &cfg).unwrap();
        assert!(
            cts.mean > stc.mean + 0.15,
            "variants should separate: cts {} vs stc {}",
            cts.mean,
            stc.mean
        );
    }

    #[test]
    fn helper_count_pmf_tracks_the_negative_binomial_form() {
        let g = table1_geometry();
        let eta = g.eta_d();
        let pmf = helper_count_pmf(&g, 6, &SimConfig::new(20_000, 8)).unwrap();
        assert_eq!(pmf.len(), 7);
        for (j, est) in pmf.iter().enumerate() {
            let analytic = cell_helper_count_pmf(j as u32, eta).unwrap();
            assert!(
                (est.mean - analytic).abs() < 0.012,
                "pmf({j}): mc {} vs analytic {analytic}",
                est.mean
            );
        }
        // Nonempty-cell fraction consistency: 1 − pmf(0).
        let p_busy = 1.0 - pmf[0].mean;
        assert!((p_busy - p_nonempty_cell(eta).unwrap()).abs() < 0.012);
    }

    #[test]
    fn cellular_coverage_tracks_the_quadrature() {
        let model = test_fixture::model();
        let net = test_fixture::reference_network();
        let taus = [0.5, 1.0, 10.0];
        let curve = cellular_coverage(&net, &taus, &SimConfig::new(30_000, 9)).unwrap();
        assert_eq!(curve.discarded.total(), 0);
        for (est, &tau) in curve.estimates.iter().zip(&taus) {
            let analytic = model.coverage_cellular_at(tau).unwrap();
            assert!(
                (est.mean - analytic).abs() < 0.012,
                "tau {tau}: mc {} vs analytic {analytic}",
                est.mean
            );
        }
    }

    #[test]
    fn d2d_coverage_under_disk_conditioning_tracks_the_analytic_form() {
        let model = test_fixture::model();
        let net = test_fixture::reference_network();
        let cfg = SimConfig::new(20_000, 10);
        let curve = d2d_coverage(&net, 1, Conditioning::DiskApprox, &[10.0], &cfg).unwrap();
        let est = curve.estimates[0];
        assert_eq!(est.retained + curve.discarded.total(), cfg.trials);
        assert!(est.retained > 3_000, "disk conditioning retained {}", est.retained);
        let analytic = model.coverage_d2d_ith_at(1, 10.0).unwrap();
        assert!(
            (est.mean - analytic).abs() < 0.04,
            "mc {} vs analytic {analytic}",
            est.mean
        );
    }

    #[test]
    fn distance_histograms_reproduce_the_analytic_density() {
        let g = table1_geometry();
        let spec = QuadratureSpec::default();
        let dist = DistanceDistribution::build(1, &g, &spec).unwrap();
        let r_max = *dist.grid().last().unwrap();
        let cfg = SimConfig::new(5_000, 11);
        let hists = conditional_distance_histogram(&g, 1, 40, r_max, &cfg).unwrap();

        for h in [&hists.true_cell, &hists.disk] {
            assert_eq!(h.retained + h.discarded.total(), cfg.trials);
            assert_eq!(
                h.counts().iter().sum::<u64>() + h.overflow(),
                h.retained
            );
        }
        // Disk conditioning additionally rejects users outside the disk.
        assert!(hists.disk.retained < hists.true_cell.retained);
        assert!(hists.disk.discarded.outside_disk > 0);

        let l1 = hists
            .true_cell
            .l1_against(|r| distance_pdf(1, r, &g, &spec))
            .unwrap();
        assert!(l1 < 0.2, "true-cell L1 {l1}");
        let l1 = hists
            .disk
            .l1_against(|r| distance_pdf(1, r, &g, &spec))
            .unwrap();
        assert!(l1 < 0.2, "disk L1 {l1}");
    }

    #[test]
    fn rate_share_reduces_to_the_poisson_sharing_factor() {
        // With equal loads on both tiers the mode split cancels and the
        // mean share is E[1/(1+N)], N ~ Poisson(2).
        let g = table1_geometry();
        let cache = test_fixture::reference_cache();
        let est = rate_share_mean(
            &g,
            &cache,
            McSelection::Ns,
            1,
            2,
            (2.0, 2.0),
            &SimConfig::new(10_000, 12),
        )
        .unwrap();
        let analytic = crate::perf::bandwidth_share(2.0).unwrap();
        assert!(
            (est.mean - analytic).abs() < 0.02,
            "mc {} vs analytic {analytic}",
            est.mean
        );
    }

    #[test]
    fn estimators_reject_tiny_trial_counts() {
        let g = table1_geometry();
        let err = p_inside_bmax(&g, &SimConfig::new(50, 1)).unwrap_err();
        assert!(
            matches!(err, Error::InsufficientSamples { got: 50, need: 100 }),
            "got {err:?}"
        );
    }

    #[test]
    fn estimates_are_bit_identical_across_worker_pools() {
        let g = table1_geometry();
        let cache = test_fixture::reference_cache();
        let cfg = SimConfig::new(5_000, 13);
        let run = || mode_probability(&g, &cache, McSelection::Ns, 1, 4, &cfg).unwrap();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(run);
        let several = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(run);
        assert_eq!(single.mean.to_bits(), several.mean.to_bits());
        assert_eq!(
            single.ci_halfwidth.to_bits(),
            several.ci_halfwidth.to_bits()
        );
    }

    #[test]
    fn doubling_the_window_stays_within_the_interval() {
        let net = test_fixture::reference_network();
        let taus = [1.0];
        let base = SimConfig::new(15_000, 14);
        let mut wide = base.clone();
        wide.window_radius = Some(2.0 * base.window(net.lambda_m).unwrap().radius);
        let a = cellular_coverage(&net, &taus, &base).unwrap().estimates[0];
        let b = cellular_coverage(&net, &taus, &wide).unwrap().estimates[0];
        assert!(
            (a.mean - b.mean).abs() < a.ci_halfwidth + b.ci_halfwidth,
            "window doubling moved coverage {} -> {}",
            a.mean,
            b.mean
        );
    }

    #[test]
    fn toroidal_window_reproduces_the_inside_constant() {
        let g = table1_geometry();
        let mut cfg = SimConfig::new(20_000, 15);
        cfg.edge_policy = EdgePolicy::Toroidal;
        let est = p_inside_bmax(&g, &cfg).unwrap();
        assert!(
            (est.mean - 0.2).abs() < 0.02,
            "toroidal inside fraction {}",
            est.mean
        );
    }
}
