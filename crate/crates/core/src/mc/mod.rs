//! Reproducible Monte Carlo simulator, used as an independent oracle for
//! every closed form in the analytic layer.
//!
//! Each trial draws fresh MBS and helper point fields over a finite
//! [`Window`] and measures one observable directly from the realized
//! geometry: whether the typical user falls inside the maximal inscribed
//! disk of its serving cell, which candidate helper serves a request under
//! a selection scheme, the distance to the i-th nearest in-cell helper, or
//! the SINR of the cellular and D2D links under unit-mean exponential
//! fading. No analytic approximation enters the trial path — cell
//! membership is true Voronoi membership, and D2D interference follows the
//! physical model (one active helper per nonempty cell) rather than the
//! thinned-process surrogate the closed forms use — so systematic
//! analytic-vs-simulation gaps measure exactly the model's approximations.
//!
//! Determinism: every trial derives its own ChaCha stream from the master
//! seed by counter ([`trial_rng`]), and aggregation folds fixed-size trial
//! chunks in index order, so results are bit-identical for a given
//! `(seed, config)` regardless of how many worker threads run the trials.

mod field;
mod protocols;

pub use field::Window;
pub use protocols::{
    cellular_coverage, conditional_distance_histogram, d2d_coverage, helper_count_pmf,
    mode_probability, p_inside_bmax, rate_share_mean, run_trial,
};

use crate::error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use serde::Serialize;

use std::str::FromStr;

/// Fewest trials the estimators accept: below this the normal 95% CI is
/// not meaningful.
pub const MIN_ESTIMATE_TRIALS: u64 = 100;

/// Smallest allowed ratio of window radius to mean inter-MBS spacing.
/// Below this the boundary visibly perturbs the cells near the origin.
pub const MIN_OVERSIZE_FACTOR: f64 = 3.0;

/// Default window radius in units of the mean inter-MBS spacing 1/√λ_m:
/// one spacing for the measurement neighborhood around the origin plus a
/// five-spacing guard ring.
const DEFAULT_WINDOW_SPACINGS: f64 = 6.0;

/// Trials per reduction chunk. Chunks are folded in index order, making
/// the floating-point accumulation tree a pure function of the trial
/// count — never of the thread count.
const TRIAL_CHUNK: u64 = 1024;

/// 97.5% standard-normal quantile, for two-sided 95% intervals.
const Z_95: f64 = 1.959_963_984_540_054;

/// How the finite sampling window treats its boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgePolicy {
    /// Sample a disk several mean spacings larger than the measurement
    /// neighborhood; the cells near the origin are then exact. Default.
    OversizedWindow,
    /// Sample a square with wrapped distances. Cheaper, but the Voronoi
    /// tessellation wraps with it; retained for speed comparisons.
    Toroidal,
}

impl EdgePolicy {
    pub fn as_str(&self) -> &'static str {
        match self {
            EdgePolicy::OversizedWindow => "oversized_window",
            EdgePolicy::Toroidal => "toroidal",
        }
    }
}

impl FromStr for EdgePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "oversized_window" | "oversized" => Ok(EdgePolicy::OversizedWindow),
            "toroidal" | "torus" => Ok(EdgePolicy::Toroidal),
            _ => Err(Error::UnknownName {
                kind: "edge policy",
                name: s.to_string(),
                known: "oversized_window, toroidal".into(),
            }),
        }
    }
}

/// Observables a simulation run can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Serving mode (cellular or D2D with candidate rank).
    Mode,
    /// Distance to the serving node.
    ServingDistance,
    /// SINR of the selected link.
    Sinr,
    /// Bandwidth fraction left for the tagged user after Poisson sharing.
    RateShare,
    /// Whether the typical user lies inside the serving cell's maximal
    /// inscribed disk.
    InsideBmax,
    /// Helper count in the typical cell.
    HelperCount,
}

impl Observable {
    pub fn as_str(&self) -> &'static str {
        match self {
            Observable::Mode => "mode",
            Observable::ServingDistance => "serving_distance",
            Observable::Sinr => "sinr",
            Observable::RateShare => "rate_share",
            Observable::InsideBmax => "inside_bmax",
            Observable::HelperCount => "helper_count",
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mode" => Ok(Observable::Mode),
            "serving_distance" | "distance_hist" => Ok(Observable::ServingDistance),
            "sinr" => Ok(Observable::Sinr),
            "rate_share" => Ok(Observable::RateShare),
            "inside_bmax" | "p_in" => Ok(Observable::InsideBmax),
            "helper_count" => Ok(Observable::HelperCount),
            _ => Err(Error::UnknownName {
                kind: "observable",
                name: s.to_string(),
                known: "mode, serving_distance, sinr, rate_share, inside_bmax, helper_count".into(),
            }),
        }
    }
}

/// Candidate-selection rule applied inside a trial.
///
/// The two uniform variants differ in when the content check happens:
/// `UsSelectThenCheck` draws one of the first min(N, k) candidates and
/// then checks it for the content; `UsCheckThenSelect` checks all of them
/// first and draws uniformly among the holders. The variants have
/// different D2D-mode probabilities, and neither is preferred here — the
/// reconciliation suite reports which one the analytic uniform scheme
/// matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum McSelection {
    /// Probe candidates nearest-first; the first holder serves.
    Ns,
    /// Pick a candidate uniformly, then check it for the content.
    UsSelectThenCheck,
    /// Check all candidates, then pick uniformly among the holders.
    UsCheckThenSelect,
}

impl McSelection {
    pub fn as_str(&self) -> &'static str {
        match self {
            McSelection::Ns => "ns",
            McSelection::UsSelectThenCheck => "us_select_then_check",
            McSelection::UsCheckThenSelect => "us_check_then_select",
        }
    }
}

impl FromStr for McSelection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "ns" => Ok(McSelection::Ns),
            "us_select_then_check" | "us_stc" => Ok(McSelection::UsSelectThenCheck),
            "us_check_then_select" | "us_cts" => Ok(McSelection::UsCheckThenSelect),
            _ => Err(Error::UnknownName {
                kind: "simulation selection rule",
                name: s.to_string(),
                known: "ns, us_select_then_check, us_check_then_select".into(),
            }),
        }
    }
}

/// Simulation run parameters.
#[derive(Debug, Clone)]
pub struct SimConfig {
    /// Number of independent trials.
    pub trials: u64,
    /// Master seed; together with the config it fully determines every
    /// output byte.
    pub seed: u64,
    /// Sampling window radius in meters. `None` picks
    /// [`DEFAULT_WINDOW_SPACINGS`] mean inter-MBS spacings.
    pub window_radius: Option<f64>,
    /// Boundary handling.
    pub edge_policy: EdgePolicy,
    /// Observables a raw-record emission should carry; estimator entry
    /// points ignore this and record what they need.
    pub record: Vec<Observable>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            trials: 100_000,
            seed: 0,
            window_radius: None,
            edge_policy: EdgePolicy::OversizedWindow,
            record: Vec::new(),
        }
    }
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimConfig {
            trials,
            seed,
            ..SimConfig::default()
        }
    }

    /// Basic field validation (the per-run window check needs λ_m and
    /// happens in [`SimConfig::window`]).
    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::Domain("trial count must be >= 1".into()));
        }
        if let Some(w) = self.window_radius {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::Domain(format!(
                    "window radius must be positive and finite, got {w}"
                )));
            }
        }
        Ok(())
    }

    /// Resolves the sampling window for an MBS density, enforcing the
    /// minimum oversize factor of [`MIN_OVERSIZE_FACTOR`] mean spacings.
    pub fn window(&self, lambda_m: f64) -> Result<Window> {
        self.validate()?;
        if !(lambda_m > 0.0) || !lambda_m.is_finite() {
            return Err(Error::Domain(format!(
                "lambda_m must be positive and finite, got {lambda_m}"
            )));
        }
        let spacing = lambda_m.sqrt().recip();
        let radius = self
            .window_radius
            .unwrap_or(DEFAULT_WINDOW_SPACINGS * spacing);
        if radius < MIN_OVERSIZE_FACTOR * spacing {
            return Err(Error::Domain(format!(
                "window radius {radius:.1} m is below {MIN_OVERSIZE_FACTOR} mean \
                 inter-MBS spacings ({:.1} m); boundary effects would reach the origin",
                MIN_OVERSIZE_FACTOR * spacing
            )));
        }
        Window::new(radius, self.edge_policy)
    }
}

/// Serving mode of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The MBS serves the request itself.
    Cellular,
    /// The i-th nearest in-cell candidate serves (1-based rank).
    D2d(u32),
}

impl Mode {
    pub fn is_d2d(&self) -> bool {
        matches!(self, Mode::D2d(_))
    }
}

/// Why a trial could not produce its observable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscardReason {
    /// The sampled window held no MBS at all (vanishingly rare at any
    /// sane window size, but bookkept rather than resampled).
    EmptyMbsField,
    /// Fewer in-cell (or in-disk) helpers than the requested rank.
    InsufficientHelpers,
    /// Disk-approximation conditioning: the user fell outside the
    /// serving cell's maximal inscribed disk.
    OutsideDisk,
}

/// Everything one trial of the full origin-user protocol measured.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrialOutcome {
    /// Who served the request.
    pub mode: Mode,
    /// Distance to the serving node in meters (NaN when discarded).
    pub r_serving: f64,
    /// SINR of the selected link (NaN when discarded).
    pub sinr: f64,
    /// Whether a cellular-mode trial cleared τ_m.
    pub covered_m: bool,
    /// Whether a D2D-mode trial cleared τ_d.
    pub covered_d: bool,
    /// Helpers inside the serving Voronoi cell.
    pub n_helpers_in_cell: u32,
    /// Set when the realization was degenerate; never silently dropped.
    pub discarded: Option<DiscardReason>,
}

/// Sample mean with a 95% normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// Sample mean over the retained trials.
    pub mean: f64,
    /// Half-width of the 95% CI; infinite below two retained samples.
    pub ci_halfwidth: f64,
    /// Total trials run.
    pub trials: u64,
    /// Trials that produced a sample (total minus discards).
    pub retained: u64,
}

impl Estimate {
    /// Estimate of a proportion from `hits` successes in `retained`
    /// Bernoulli samples.
    pub(super) fn from_binomial(hits: u64, retained: u64, trials: u64) -> Estimate {
        let p = hits as f64 / retained as f64;
        let var = p * (1.0 - p) * retained as f64 / (retained as f64 - 1.0);
        Estimate {
            mean: p,
            ci_halfwidth: ci_halfwidth(var, retained),
            trials,
            retained,
        }
    }

    /// Estimate of a general sample mean from running moments.
    pub(super) fn from_moments(sum: f64, sum_sq: f64, retained: u64, trials: u64) -> Estimate {
        let n = retained as f64;
        let mean = sum / n;
        let var = ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        Estimate {
            mean,
            ci_halfwidth: ci_halfwidth(var, retained),
            trials,
            retained,
        }
    }
}

fn ci_halfwidth(sample_var: f64, retained: u64) -> f64 {
    if retained < 2 {
        f64::INFINITY
    } else {
        Z_95 * (sample_var / retained as f64).sqrt()
    }
}

/// Discard bookkeeping for conditional protocols. Every trial is counted
/// exactly once: retained plus the sum of these equals the trial count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DiscardCounts {
    pub empty_mbs_field: u64,
    pub insufficient_helpers: u64,
    pub outside_disk: u64,
}

impl DiscardCounts {
    pub fn total(&self) -> u64 {
        self.empty_mbs_field + self.insufficient_helpers + self.outside_disk
    }

    pub(super) fn absorb(&mut self, reason: DiscardReason) {
        match reason {
            DiscardReason::EmptyMbsField => self.empty_mbs_field += 1,
            DiscardReason::InsufficientHelpers => self.insufficient_helpers += 1,
            DiscardReason::OutsideDisk => self.outside_disk += 1,
        }
    }

    pub(super) fn merge(&mut self, other: DiscardCounts) {
        self.empty_mbs_field += other.empty_mbs_field;
        self.insufficient_helpers += other.insufficient_helpers;
        self.outside_disk += other.outside_disk;
    }
}

/// Coverage estimates over a threshold grid, from one shared set of
/// trials (one SINR sample per trial, compared against every threshold).
#[derive(Debug, Clone)]
pub struct CoverageCurve {
    /// Thresholds the curve was evaluated on (linear SINR).
    pub taus: Vec<f64>,
    /// One estimate per threshold; all share the same retained count.
    pub estimates: Vec<Estimate>,
    /// Why trials were discarded, if any.
    pub discarded: DiscardCounts,
}

/// Empirical conditional distance density on a uniform bin grid.
#[derive(Debug, Clone)]
pub struct ConditionalHistogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
    overflow: u64,
    /// Trials that met the conditioning event.
    pub retained: u64,
    /// Trials that did not, by reason.
    pub discarded: DiscardCounts,
    /// Total trials run.
    pub trials: u64,
}

impl ConditionalHistogram {
    fn new(nbins: usize, r_max: f64, trials: u64) -> Self {
        let width = r_max / nbins as f64;
        ConditionalHistogram {
            edges: (0..=nbins).map(|b| b as f64 * width).collect(),
            counts: vec![0; nbins],
            overflow: 0,
            retained: 0,
            discarded: DiscardCounts::default(),
            trials,
        }
    }

    fn record(&mut self, r: f64) {
        self.retained += 1;
        let width = self.edges[1];
        let bin = (r / width) as usize;
        if bin < self.counts.len() {
            self.counts[bin] += 1;
        } else {
            self.overflow += 1;
        }
    }

    fn merge(&mut self, other: &ConditionalHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.retained += other.retained;
        self.discarded.merge(other.discarded);
    }

    /// Bin boundaries (length bins + 1).
    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Raw per-bin counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Retained samples that fell past the last edge (excluded from the
    /// density normalization, mirroring a fixed-range histogram).
    pub fn overflow(&self) -> u64 {
        self.overflow
    }

    /// Per-bin probability density, normalized so the in-range mass
    /// integrates to one.
    pub fn density(&self) -> Vec<f64> {
        let in_range = (self.retained - self.overflow) as f64;
        let width = self.edges[1];
        if in_range == 0.0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts
            .iter()
            .map(|&c| c as f64 / (in_range * width))
            .collect()
    }

    /// L1 distance between the empirical density and a reference density
    /// evaluated at bin midpoints.
    pub fn l1_against<F>(&self, mut pdf: F) -> Result<f64>
    where
        F: FnMut(f64) -> Result<f64>,
    {
        let width = self.edges[1];
        let mut l1 = 0.0;
        for (b, dens) in self.density().iter().enumerate() {
            let mid = (self.edges[b] + self.edges[b + 1]) / 2.0;
            l1 += (dens - pdf(mid)?).abs() * width;
        }
        Ok(l1)
    }
}

/// The two conditioning rules for the i-th helper distance and the D2D
/// link SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Keep a trial when the serving Voronoi cell holds at least i
    /// helpers; the i-th nearest of them (from the user) serves.
    TrueCell,
    /// Additionally require the user inside the cell's maximal inscribed
    /// disk, and rank only helpers inside that disk — the geometry the
    /// closed-form distance density models.
    DiskApprox,
}

/// Both conditional histograms from one set of trials.
#[derive(Debug, Clone)]
pub struct DistanceHistograms {
    pub true_cell: ConditionalHistogram,
    pub disk: ConditionalHistogram,
}

/// Per-trial RNG: the master seed keyed by a protocol tag selects the
/// cipher key, and the trial index selects the stream, so any trial's
/// randomness can be regenerated in isolation and in parallel.
fn trial_rng(seed: u64, tag: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (tag << 56));
    rng.set_stream(trial);
    rng
}

/// Protocol tags keeping different estimators on unrelated streams.
mod tag {
    pub const INSIDE: u64 = 1;
    pub const MODE: u64 = 2;
    pub const COUNT: u64 = 3;
    pub const COV_M: u64 = 4;
    pub const COV_D: u64 = 5;
    pub const DIST: u64 = 6;
    pub const SHARE: u64 = 7;
}

/// Runs `trials` independent trials and folds their aggregates.
///
/// Trials are grouped into [`TRIAL_CHUNK`]-sized chunks; each chunk folds
/// its trials in index order and the chunk partials are folded in chunk
/// order, so the result is bit-identical no matter how rayon schedules
/// the chunks across workers.
fn fold_trials<A, F>(trials: u64, seed: u64, tag: u64, new_acc: impl Fn() -> A + Sync, trial: F) -> A
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, &mut A) + Sync,
    A: Mergeable,
{
    let chunks = trials.div_ceil(TRIAL_CHUNK);
    let partials: Vec<A> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut acc = new_acc();
            let lo = chunk * TRIAL_CHUNK;
            let hi = trials.min(lo + TRIAL_CHUNK);
            for t in lo..hi {
                let mut rng = trial_rng(seed, tag, t);
                trial(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut out = new_acc();
    for p in partials {
        out.merge_from(p);
    }
    out
}

/// Order-respecting combination of chunk partials.
trait Mergeable {
    fn merge_from(&mut self, other: Self);
}
