//! Upwind finite-difference form of the two-regime generator in `(u, y)`.

use crate::model::TwoRegime;
use crate::stopping::grid::Grid2D;

/// Off-diagonal weights of `𝕃` at one node; the diagonal is minus their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stencil {
    pub east: f64,
    pub west: f64,
    pub north: f64,
    pub south: f64,
}

impl Stencil {
    pub fn total(&self) -> f64 {
        self.east + self.west + self.north + self.south
    }
}

/// Weights at node `(i, j)`. On the first and last y-rows the degenerate
/// second derivative is dropped and the first derivative is one-sided
/// towards the interior (the belief drift points inward there).
pub fn stencil(two: &TwoRegime, grid: &Grid2D, j: usize) -> Stencil {
    let y = grid.y[j];
    let (hu, hy) = (grid.h_u, grid.h_y);
    let s2 = 0.5 * two.sigma * two.sigma;
    let a_u = two.x_drift(y) - s2;
    let a_y = two.y_drift(y);
    let diff_u = s2 / (hu * hu);
    let mut st = Stencil {
        east: diff_u + a_u.max(0.0) / hu,
        west: diff_u + (-a_u).max(0.0) / hu,
        ..Default::default()
    };
    let last = grid.ny() - 1;
    if j == 0 {
        st.north = a_y.max(0.0) / hy;
    } else if j == last {
        st.south = (-a_y).max(0.0) / hy;
    } else {
        let diff_y = two.y_diffusion(y) / (hy * hy);
        st.north = diff_y + a_y.max(0.0) / hy;
        st.south = diff_y + (-a_y).max(0.0) / hy;
    }
    st
}

/// Discrete `𝕃v` at an interior u-node `i` (any y-row).
pub fn generator_apply(two: &TwoRegime, grid: &Grid2D, v: &[f64], i: usize, j: usize) -> f64 {
    assert!(i > 0 && i + 1 < grid.nx(), "generator_apply needs an interior u-node");
    let st = stencil(two, grid, j);
    let c = v[grid.idx(i, j)];
    let mut acc = st.east * (v[grid.idx(i + 1, j)] - c) + st.west * (v[grid.idx(i - 1, j)] - c);
    if st.north != 0.0 {
        acc += st.north * (v[grid.idx(i, j + 1)] - c);
    }
    if st.south != 0.0 {
        acc += st.south * (v[grid.idx(i, j - 1)] - c);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets::benchmark_spec;
    use crate::model::ModelParams;

    pub(crate) fn benchmark_two() -> TwoRegime {
        ModelParams::validate(&benchmark_spec())
            .unwrap()
            .two_regime
            .unwrap()
    }

    fn grid() -> Grid2D {
        Grid2D::uniform(-2.0, 2.0, 201, 1e-3, 1.0 - 1e-3, 151).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let (two, g) = (benchmark_two(), grid());
        let v = vec![3.7; g.len()];
        for &(i, j) in &[(1, 0), (100, 75), (199, 150)] {
            assert!(generator_apply(&two, &g, &v, i, j).abs() < 1e-11);
        }
    }

    #[test]
    fn linear_in_x_to_first_order() {
        let (two, g) = (benchmark_two(), grid());
        let v: Vec<f64> = (0..g.len()).map(|k| g.x[k % g.nx()]).collect();
        for &(i, j) in &[(50, 20), (100, 75), (150, 140)] {
            let exact = two.x_drift(g.y[j]) * g.x[i];
            let got = generator_apply(&two, &g, &v, i, j);
            assert!((got - exact).abs() < 2.0 * g.h_u * g.x[i], "{got} vs {exact}");
        }
    }

    #[test]
    fn linear_in_y_is_exact_in_the_interior() {
        let (two, g) = (benchmark_two(), grid());
        let v: Vec<f64> = (0..g.len()).map(|k| g.y[k / g.nx()]).collect();
        for &j in &[1, 40, 75, 149] {
            let exact = two.y_drift(g.y[j]);
            assert!((generator_apply(&two, &g, &v, 10, j) - exact).abs() < 1e-10);
        }
    }
}
