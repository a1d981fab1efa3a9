//! Point-field sampling and nearest-neighbor queries.
//!
//! A [`Window`] is the finite observation region one trial is sampled on:
//! either a disk (oversized so that the cells near the origin are exact) or
//! a square torus (wrapped distances, retained for speed comparisons). The
//! [`NearestIndex`] answers "which point is closest to q" queries; on the
//! disk it bins points into a uniform grid and scans outward ring by ring,
//! which turns the per-helper cell assignment from O(#MBS) into O(1).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use std::f64::consts::PI;

use super::EdgePolicy;

/// A point in the plane.
pub(super) type P2 = [f64; 2];

/// Finite sampling region for one trial.
#[derive(Debug, Clone, Copy)]
pub struct Window {
    /// Disk radius, or half the torus side length, in meters.
    pub radius: f64,
    /// Boundary handling: oversized disk or wrapped square.
    pub policy: EdgePolicy,
}

impl Window {
    pub fn new(radius: f64, policy: EdgePolicy) -> crate::Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(crate::Error::Domain(format!(
                "window radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Window { radius, policy })
    }

    /// Region area in square meters.
    pub fn area(&self) -> f64 {
        match self.policy {
            EdgePolicy::OversizedWindow => PI * self.radius * self.radius,
            EdgePolicy::Toroidal => 4.0 * self.radius * self.radius,
        }
    }

    /// Samples one homogeneous Poisson point process of intensity `lambda`
    /// (points per square meter) over the window.
    pub(super) fn sample(&self, rng: &mut ChaCha8Rng, lambda: f64) -> Vec<P2> {
        let mean = lambda * self.area();
        let n = Poisson::new(mean)
            .expect("PPP intensity and window area must be positive and finite")
            .sample(rng) as usize;
        let mut pts = Vec::with_capacity(n);
        match self.policy {
            EdgePolicy::OversizedWindow => {
                for _ in 0..n {
                    let r = self.radius * rng.gen::<f64>().sqrt();
                    let th = 2.0 * PI * rng.gen::<f64>();
                    pts.push([r * th.cos(), r * th.sin()]);
                }
            }
            EdgePolicy::Toroidal => {
                for _ in 0..n {
                    let x = self.radius * (2.0 * rng.gen::<f64>() - 1.0);
                    let y = self.radius * (2.0 * rng.gen::<f64>() - 1.0);
                    pts.push([x, y]);
                }
            }
        }
        pts
    }

    /// Squared distance between two points in the window metric (wrapped
    /// per-axis on the torus, Euclidean otherwise).
    pub(super) fn d2(&self, a: P2, b: P2) -> f64 {
        let (dx, dy) = match self.policy {
            EdgePolicy::OversizedWindow => (a[0] - b[0], a[1] - b[1]),
            EdgePolicy::Toroidal => {
                let period = 2.0 * self.radius;
                let wrap = |d: f64| {
                    let d = d.abs();
                    if d > self.radius {
                        period - d
                    } else {
                        d
                    }
                };
                (wrap(a[0] - b[0]), wrap(a[1] - b[1]))
            }
        };
        dx * dx + dy * dy
    }

    /// Squared distance from a point to the origin. Sampled coordinates
    /// never exceed the window half-extent, so no wrapping is needed even
    /// on the torus.
    pub(super) fn origin_d2(&self, p: P2) -> f64 {
        p[0] * p[0] + p[1] * p[1]
    }
}

/// Uniform bucket grid over the window for nearest-point queries.
///
/// Buckets are scanned outward in Chebyshev rings from the query's bucket;
/// once the best squared distance found so far is at most (ring·cell)², no
/// unscanned bucket can hold a closer point and the search stops.
pub(super) struct NearestGrid {
    n: i32,
    cell: f64,
    half: f64,
    buckets: Vec<Vec<u32>>,
    pts: Vec<P2>,
}

impl NearestGrid {
    /// Builds a grid with bucket edge close to `spacing` (typically the
    /// mean point separation, so buckets hold O(1) points each).
    pub fn build(pts: Vec<P2>, half: f64, spacing: f64) -> Self {
        let n = ((2.0 * half / spacing).ceil() as i32).clamp(1, 256);
        let cell = 2.0 * half / n as f64;
        let mut grid = NearestGrid {
            n,
            cell,
            half,
            buckets: vec![Vec::new(); (n * n) as usize],
            pts,
        };
        for (i, p) in grid.pts.iter().enumerate() {
            let bx = axis_bucket(p[0], grid.half, grid.cell, grid.n);
            let by = axis_bucket(p[1], grid.half, grid.cell, grid.n);
            grid.buckets[(by * grid.n + bx) as usize].push(i as u32);
        }
        grid
    }

    /// Index and squared distance of the point nearest to `q`, optionally
    /// ignoring one index (used for "nearest other point" queries).
    pub fn nearest(&self, q: P2, skip: Option<u32>) -> Option<(u32, f64)> {
        let bx = axis_bucket(q[0], self.half, self.cell, self.n);
        let by = axis_bucket(q[1], self.half, self.cell, self.n);
        let mut best: Option<(u32, f64)> = None;
        for ring in 0..=self.n {
            self.scan_ring(bx, by, ring, q, skip, &mut best);
            if let Some((_, bd2)) = best {
                let safe = ring as f64 * self.cell;
                if bd2 <= safe * safe {
                    break;
                }
            }
        }
        best
    }

    fn scan_ring(
        &self,
        bx: i32,
        by: i32,
        ring: i32,
        q: P2,
        skip: Option<u32>,
        best: &mut Option<(u32, f64)>,
    ) {
        let mut visit = |x: i32, y: i32| {
            if x < 0 || x >= self.n || y < 0 || y >= self.n {
                return;
            }
            for &i in &self.buckets[(y * self.n + x) as usize] {
                if skip == Some(i) {
                    continue;
                }
                let p = self.pts[i as usize];
                let (dx, dy) = (p[0] - q[0], p[1] - q[1]);
                let d2 = dx * dx + dy * dy;
                if best.map_or(true, |(_, bd2)| d2 < bd2) {
                    *best = Some((i, d2));
                }
            }
        };
        if ring == 0 {
            visit(bx, by);
            return;
        }
        for x in (bx - ring)..=(bx + ring) {
            visit(x, by - ring);
            visit(x, by + ring);
        }
        for y in (by - ring + 1)..=(by + ring - 1) {
            visit(bx - ring, y);
            visit(bx + ring, y);
        }
    }
}

/// Nearest-point index over a fixed point set: grid-accelerated on the
/// Euclidean disk, linear scan under the wrapped torus metric.
pub(super) enum NearestIndex<'a> {
    Grid(NearestGrid),
    Brute { window: &'a Window, pts: &'a [P2] },
}

impl NearestIndex<'_> {
    pub fn query(&self, q: P2, skip: Option<u32>) -> Option<(u32, f64)> {
        match self {
            NearestIndex::Grid(g) => g.nearest(q, skip),
            NearestIndex::Brute { window, pts } => {
                let mut best: Option<(u32, f64)> = None;
                for (i, &p) in pts.iter().enumerate() {
                    if skip == Some(i as u32) {
                        continue;
                    }
                    let d2 = window.d2(p, q);
                    if best.map_or(true, |(_, bd2)| d2 < bd2) {
                        best = Some((i as u32, d2));
                    }
                }
                best
            }
        }
    }
}

/// Builds the nearest-point index appropriate for the window topology.
/// `spacing` sizes the grid buckets (mean point separation).
pub(super) fn build_index<'a>(window: &'a Window, pts: &'a [P2], spacing: f64) -> NearestIndex<'a> {
    match window.policy {
        EdgePolicy::OversizedWindow => {
            NearestIndex::Grid(NearestGrid::build(pts.to_vec(), window.radius, spacing))
        }
        EdgePolicy::Toroidal => NearestIndex::Brute { window, pts },
    }
}

fn axis_bucket(x: f64, half: f64, cell: f64, n: i32) -> i32 {
    (((x + half) / cell) as i32).clamp(0, n - 1)
}
