//! Free boundary `d(y) = inf{x : v(x,y) ≥ x}` and smooth-fit diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TwoRegime;
use crate::stopping::bounds::{zeta_lower, OneDimBounds};
use crate::stopping::psor::{Region, ValueSurface};

/// Relative slack for the monotonicity check on the raw boundary.
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Serialize)]
pub struct FreeBoundary {
    pub y: Vec<f64>,
    /// Boundary clamped to the one-dimensional sandwich.
    pub d: Vec<f64>,
    /// Boundary as located on the grid, before clamping.
    pub d_raw: Vec<f64>,
    /// Index of the first stopped u-node in each column.
    pub first_stop: Vec<usize>,
    pub zeta: Vec<f64>,
    pub bounds: OneDimBounds,
}

impl FreeBoundary {
    /// Linear interpolation in `y`, clamped to the end nodes.
    pub fn at(&self, y: f64) -> f64 {
        interp(&self.y, &self.d, y)
    }
}

pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let h = (xs[n - 1] - xs[0]) / (n - 1) as f64;
    let k = (((x - xs[0]) / h) as usize).min(n - 2);
    let w = (x - xs[k]) / (xs[k + 1] - xs[k]);
    ys[k] + w * (ys[k + 1] - ys[k])
}

/// Distance `s` from the boundary at which the local one-dimensional layer
/// profile reaches `gap`. Near `u_d` the gap `G = x − v` solves
/// `½σ²G'' − aG' − ρG = φ` in `s = u_d − u` with `G(0) = G'(0) = 0`.
pub fn layer_distance(gap: f64, a: f64, sigma: f64, rho: f64, phi: f64) -> Option<f64> {
    if !(gap > 0.0 && phi > 0.0) {
        return None;
    }
    let s2 = sigma * sigma;
    let disc = (a * a + 2.0 * s2 * rho).sqrt();
    let (m1, m2) = ((a + disc) / s2, (a - disc) / s2);
    let profile = |s: f64| {
        phi / rho * ((m2 * (m1 * s).exp() - m1 * (m2 * s).exp()) / (m2 - m1) - 1.0)
    };
    let (mut lo, mut hi) = (0.0, 1.0 / m1);
    while profile(hi) < gap {
        hi *= 2.0;
        if hi > 1e3 {
            return None;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid) < gap {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.max(1.0) {
            break;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Locates the boundary column by column: the gap at the last continuation
/// node is inverted through the local layer profile and the result is kept
/// inside the bracketing cell.
pub fn extract_boundary(
    two: &TwoRegime,
    surface: &ValueSurface,
    bounds: OneDimBounds,
) -> Result<FreeBoundary> {
    let g = &surface.grid;
    let mut out = FreeBoundary {
        y: g.y.clone(),
        d: Vec::with_capacity(g.ny()),
        d_raw: Vec::with_capacity(g.ny()),
        first_stop: Vec::with_capacity(g.ny()),
        zeta: Vec::with_capacity(g.ny()),
        bounds,
    };
    for j in 0..g.ny() {
        let i_s = (0..g.nx())
            .find(|&i| surface.region_at(i, j) == Region::Stop)
            .ok_or(Error::BoundaryNotFound { y: g.y[j] })?;
        let raw = if i_s == 0 {
            g.x[0]
        } else {
            let c = i_s - 1;
            let y = g.y[j];
            let xs = g.x[i_s];
            let phi = xs * (two.cost.h_prime(xs) - two.stopping_threshold(y));
            let a = two.x_drift(y) - 0.5 * two.sigma * two.sigma;
            let gap = g.x[c] - surface.at(c, j);
            let s = layer_distance(gap, a, two.sigma, two.rho, phi).unwrap_or(g.h_u);
            (g.u[c] + s).min(g.u[i_s]).exp()
        };
        let zeta = zeta_lower(two, g.y[j]);
        let lo = zeta.max(bounds.x_star_lower);
        out.d_raw.push(raw);
        out.d.push(raw.clamp(lo, bounds.x_star_upper.max(lo)));
        out.first_stop.push(i_s);
        out.zeta.push(zeta);
    }
    for j in 1..g.ny() {
        if out.d_raw[j] < out.d_raw[j - 1] * (1.0 - MONOTONE_SLACK) {
            return Err(Error::NonMonotoneBoundary { y: g.y[j] });
        }
    }
    Ok(out)
}

/// One-sided smooth-fit errors at the boundary, approached from the
/// continuation region.
#[derive(Debug, Clone, Serialize)]
pub struct SmoothFitReport {
    pub h_u: f64,
    pub h_y: f64,
    /// `max_y |v_x − 1|` from the backward difference at the last
    /// continuation node.
    pub max_vx_error: f64,
    /// `max_y |v_y|` at the last continuation node.
    pub max_vy: f64,
    pub vx_error: Vec<f64>,
    pub vy: Vec<f64>,
}

pub fn smooth_fit_report(surface: &ValueSurface, boundary: &FreeBoundary) -> SmoothFitReport {
    let g = &surface.grid;
    let ny = g.ny();
    let mut vx_error = vec![0.0; ny];
    let mut vy = vec![0.0; ny];
    for j in 0..ny {
        let i_s = boundary.first_stop[j];
        if i_s < 2 {
            continue;
        }
        let ic = i_s - 1;
        let vx = (surface.at(ic, j) - surface.at(ic - 1, j)) / (g.x[ic] - g.x[ic - 1]);
        vx_error[j] = (vx - 1.0).abs();
        let (jl, jh) = (j.saturating_sub(1), (j + 1).min(ny - 1));
        vy[j] = ((surface.at(ic, jh) - surface.at(ic, jl)) / (g.y[jh] - g.y[jl])).abs();
    }
    SmoothFitReport {
        h_u: g.h_u,
        h_y: g.h_y,
        max_vx_error: vx_error.iter().cloned().fold(0.0, f64::max),
        max_vy: vy.iter().cloned().fold(0.0, f64::max),
        vx_error,
        vy,
    }
}
