//! Analytical model and Monte Carlo oracle for a cache-enabled cellular
//! network with coordinated device-to-device (D2D) offloading.
//!
//! The network consists of macro base stations (MBSs) and idle user devices
//! acting as cache-equipped D2D helpers, both modeled as independent
//! homogeneous Poisson point processes on the plane. A user requests a
//! content item drawn from a Zipf popularity law; the serving MBS first
//! tries to offload the request to one of the k nearest helpers inside the
//! user's Voronoi cell (checked in nearest-first or uniformly-random order,
//! depending on the selection scheme), and serves the request itself on the
//! cellular band otherwise.
//!
//! The crate is split into:
//!
//! - [`math`]: special functions (gamma family, erfc, Gauss hypergeometric)
//!   and an adaptive Clenshaw–Curtis quadrature engine;
//! - [`content`]: Zipf popularity and cache hit rates;
//! - [`scheme`]: helper-selection schemes (nearest / uniform) behind a
//!   runtime registry, plus the cell helper-count distribution;
//! - [`geometry`]: the maximal-inscribed-disk approximation of the Voronoi
//!   cell and the distance distribution to the i-th nearest in-cell helper;
//! - [`perf`]: SINR coverage probabilities, ergodic rates, load sharing,
//!   optimal cluster sizes and offloading gains;
//! - [`mc`]: a reproducible, parallel Monte Carlo simulator used as an
//!   independent oracle for every closed form;
//! - [`config`], [`report`]: experiment profiles and tabular output;
//! - [`validate`]: the analytic-vs-simulation reconciliation suite.

pub mod config;
pub mod content;
pub mod error;
pub mod geometry;
pub mod math;
pub mod mc;
pub mod perf;
pub mod report;
pub mod scheme;
pub mod validate;

pub use config::ExperimentConfig;
pub use content::CacheParams;
pub use error::{Error, Result};
pub use geometry::GeometryParams;
pub use math::quad::QuadratureSpec;
pub use perf::{LinkModel, Method, MetricResult, NetworkParams};
pub use scheme::SelectionScheme;
