use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoRegime;

/// Smallest accepted number of nodes per axis.
pub const MIN_NODES: usize = 100;

/// Grid resolution and truncation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// `x_min = x_min_factor · x_star_lower`.
    pub x_min_factor: f64,
    /// `x_max = x_max_factor · x_star_upper`.
    pub x_max_factor: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 200,
            ny: 200,
            x_min_factor: 1e-3,
            x_max_factor: 4.0,
            y_lo: 1e-3,
            y_hi: 1.0 - 1e-3,
        }
    }
}

/// Uniform grid in `(u, y)` with `u = ln x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub h_u: f64,
    pub h_y: f64,
    /// `x = e^u` at each u-node.
    pub x: Vec<f64>,
}

impl Grid2D {
    pub fn uniform(u_min: f64, u_max: f64, nx: usize, y_lo: f64, y_hi: f64, ny: usize) -> Result<Self> {
        if nx < MIN_NODES || ny < MIN_NODES {
            return Err(Error::ResolutionTooCoarse(nx.min(ny)));
        }
        if !(u_max > u_min) || !(y_hi > y_lo) || !(y_lo > 0.0) || !(y_hi < 1.0) {
            return Err(Error::InvalidParameter("degenerate grid extent".into()));
        }
        let h_u = (u_max - u_min) / (nx - 1) as f64;
        let h_y = (y_hi - y_lo) / (ny - 1) as f64;
        let u: Vec<f64> = (0..nx).map(|i| u_min + i as f64 * h_u).collect();
        let y: Vec<f64> = (0..ny).map(|j| y_lo + j as f64 * h_y).collect();
        let x = u.iter().map(|u| u.exp()).collect();
        Ok(Self { u, y, h_u, h_y, x })
    }

    pub fn nx(&self) -> usize {
        self.u.len()
    }

    pub fn ny(&self) -> usize {
        self.y.len()
    }

    pub fn len(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index: rows are y-nodes, columns u-nodes.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx() + i
    }
}

/// Grid covering `[ln x_min, ln(x_max_factor · x_star_upper)] × [y_lo, y_hi]`.
pub fn build_grid(
    _two: &TwoRegime,
    spec: &GridSpec,
    x_star_lower: f64,
    x_star_upper: f64,
) -> Result<Grid2D> {
    if spec.nx < MIN_NODES || spec.ny < MIN_NODES {
        return Err(Error::ResolutionTooCoarse(spec.nx.min(spec.ny)));
    }
    if spec.y_lo > 1e-3 || spec.y_hi < 1.0 - 1e-3 {
        return Err(Error::InvalidParameter(
            "y-range must reach within 1e-3 of both ends of (0,1)".into(),
        ));
    }
    if spec.x_max_factor < 4.0 {
        return Err(Error::InvalidParameter("x_max_factor must be at least 4".into()));
    }
    let u_min = (spec.x_min_factor * x_star_lower).ln();
    let u_max = (spec.x_max_factor * x_star_upper).ln();
    Grid2D::uniform(u_min, u_max, spec.nx, spec.y_lo, spec.y_hi, spec.ny)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_extent() {
        let g = Grid2D::uniform(-1.0, 8f64.ln(), 200, 1e-3, 1.0 - 1e-3, 200).unwrap();
        assert!((g.h_u - (8f64.ln() + 1.0) / 199.0).abs() < 1e-15);
        assert!((g.h_y - 0.998 / 199.0).abs() < 1e-15);
        assert!((g.x[199] - 8.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_request_rejected() {
        assert!(matches!(
            Grid2D::uniform(0.0, 1.0, 50, 0.1, 0.9, 50),
            Err(Error::ResolutionTooCoarse(50))
        ));
    }
}
