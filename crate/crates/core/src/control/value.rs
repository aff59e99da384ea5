//! Control value `V(x,y) = ∫₀ˣ v(z,y)/z dz` and its HJB residual.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TwoRegime;
use crate::stopping::{FreeBoundary, Grid2D, ValueSurface};

/// `V` and its derivatives on the stopping grid (row-major, rows are y).
#[derive(Debug, Clone)]
pub struct ControlValueSurface {
    pub grid: Grid2D,
    pub value: Vec<f64>,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub vxx: Vec<f64>,
    pub vxy: Vec<f64>,
    pub vyy: Vec<f64>,
}

impl ControlValueSurface {
    /// Bilinear interpolation in `(ln x, y)`; linear continuation with unit
    /// slope beyond the last u-node and `V ∝ x²` decay below the first.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        let yc = y.clamp(g.y[0], g.y[ny - 1]);
        let j = (((yc - g.y[0]) / g.h_y) as usize).min(ny - 2);
        let wy = (yc - g.y[j]) / g.h_y;
        let col = |i: usize| {
            (1.0 - wy) * self.value[g.idx(i, j)] + wy * self.value[g.idx(i, j + 1)]
        };
        if x >= g.x[nx - 1] {
            return col(nx - 1) + (x - g.x[nx - 1]);
        }
        if x <= g.x[0] {
            let r = x / g.x[0];
            return col(0) * r * r;
        }
        let u = x.ln();
        let i = (((u - g.u[0]) / g.h_u) as usize).min(nx - 2);
        let wu = (u - g.u[i]) / g.h_u;
        (1.0 - wu) * col(i) + wu * col(i + 1)
    }
}

/// Trapezoid integral in `u` of `f(e^u)` along one column with the
/// Euler-Maclaurin end correction. With `tail` the integral starts from a
/// power law below the first node, otherwise from zero at the first node.
fn integrate_column(f: &[f64], h_u: f64, tail: bool) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    // Below x_min the integrand behaves like x^p; ∫ f du = f(x_min)/p.
    if tail && n > 1 && f[0] > 0.0 && f[1] > f[0] {
        let p = (f[1] / f[0]).ln() / h_u;
        out[0] = f[0] / p;
    }
    for i in 1..n {
        out[i] = out[i - 1] + 0.5 * h_u * (f[i - 1] + f[i]);
    }
    if n > 2 {
        let slope = |i: usize| {
            let (l, h) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (f[h] - f[l]) / ((h - l) as f64 * h_u)
        };
        let s0 = slope(0);
        for (i, o) in out.iter_mut().enumerate().skip(1) {
            *o -= h_u * h_u / 12.0 * (slope(i) - s0);
        }
    }
    out
}

fn diff_y(field: &[f64], g: &Grid2D, i: usize, j: usize) -> f64 {
    let ny = g.ny();
    let (jl, jh) = (j.saturating_sub(1), (j + 1).min(ny - 1));
    (field[g.idx(i, jh)] - field[g.idx(i, jl)]) / (g.y[jh] - g.y[jl])
}

/// `∂ₓ` of a field by central differences in `u` (one-sided at the ends).
fn diff_x(field: &[f64], g: &Grid2D, i: usize, j: usize) -> f64 {
    let nx = g.nx();
    let (il, ih) = (i.saturating_sub(1), (i + 1).min(nx - 1));
    (field[g.idx(ih, j)] - field[g.idx(il, j)]) / (g.x[ih] - g.x[il])
}

/// Builds `V` by quadrature of `v(e^u, y)` in `u`; `V_x = v/x` exactly.
pub fn value_from_stopping(surface: &ValueSurface) -> ControlValueSurface {
    let g = surface.grid.clone();
    let (nx, ny) = (g.nx(), g.ny());
    let mut value = vec![0.0; g.len()];
    for j in 0..ny {
        let col: Vec<f64> = (0..nx).map(|i| surface.at(i, j)).collect();
        let integ = integrate_column(&col, g.h_u, true);
        for i in 0..nx {
            value[g.idx(i, j)] = integ[i];
        }
    }
    let vx: Vec<f64> = (0..g.len())
        .map(|k| surface.v[k] / g.x[k % nx])
        .collect();
    let mut vy = vec![0.0; g.len()];
    let mut vxx = vec![0.0; g.len()];
    let mut vxy = vec![0.0; g.len()];
    let mut vyy = vec![0.0; g.len()];
    for j in 0..ny {
        for i in 0..nx {
            let k = g.idx(i, j);
            vy[k] = diff_y(&value, &g, i, j);
            vxx[k] = diff_x(&vx, &g, i, j);
            vxy[k] = diff_y(&vx, &g, i, j);
            vyy[k] = if j == 0 || j == ny - 1 {
                f64::NAN
            } else {
                (value[g.idx(i, j + 1)] - 2.0 * value[k] + value[g.idx(i, j - 1)]) / (g.h_y * g.h_y)
            };
        }
    }
    ControlValueSurface {
        grid: g,
        value,
        vx,
        vy,
        vxx,
        vxy,
        vyy,
    }
}

/// `V_yy` from the closed expression in terms of `v`, `v_x`, `v_y`, `d(y)`
/// and the column integrals up to `x ∧ d(y)`. Uses the raw grid boundary.
///
/// The drift and discount integrals enter as `(ρ∫v/z − (λ₂−(λ₁+λ₂)y)∫v_y/z)/(θ²y²(1−y)²)`,
/// which is what integrating `v_yy` from the continuation-region equation gives.
pub fn vyy_formula(
    two: &TwoRegime,
    surface: &ValueSurface,
    boundary: &FreeBoundary,
    control: &ControlValueSurface,
) -> Result<Vec<f64>> {
    if !(two.theta_sq > 0.0) {
        return Err(Error::DegenerateTheta);
    }
    let g = &surface.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let s2 = 0.5 * two.sigma * two.sigma;
    // ∫ v_y/z dz along each column, with v_y by central differences of v.
    let mut w = vec![0.0; g.len()];
    for j in 0..ny {
        let col: Vec<f64> = (0..nx).map(|i| diff_y(&surface.v, g, i, j)).collect();
        for (i, val) in integrate_column(&col, g.h_u, false).into_iter().enumerate() {
            w[g.idx(i, j)] = val;
        }
    }
    let mut out = vec![0.0; g.len()];
    for j in 0..ny {
        let y = g.y[j];
        let denom = two.y_diffusion(y);
        let b = two.x_drift(y) - s2;
        let v0 = surface.at(0, j);
        let i_s = boundary.first_stop[j];
        let d = boundary.d_raw[j];
        // Quantities at x ∧ d for nodes in the stopping region.
        let at_d = if i_s == 0 {
            (d, 1.0, control.value[g.idx(0, j)], w[g.idx(0, j)], d)
        } else {
            let c = i_s - 1;
            let du = d.ln() - g.u[c];
            let vc = surface.at(c, j);
            let vyc = diff_y(&surface.v, g, c, j);
            (
                d,
                1.0,
                control.value[g.idx(c, j)] + 0.5 * du * (vc + d),
                w[g.idx(c, j)] + 0.5 * du * vyc,
                d,
            )
        };
        for i in 0..nx {
            let k = g.idx(i, j);
            let (vbar, vxbar, int_v, int_vy, xbar) = if i < i_s {
                (surface.v[k], diff_x(&surface.v, g, i, j), control.value[k], w[k], g.x[i])
            } else {
                at_d
            };
            let bracket = b * (vbar - v0) + two.cost.h(xbar) + s2 * xbar * vxbar;
            out[k] = (-bracket - two.y_drift(y) * int_vy + two.rho * int_v) / denom;
        }
    }
    Ok(out)
}

/// Nodewise HJB residual and its summary.
#[derive(Debug, Clone, Serialize)]
pub struct HjbReport {
    /// `max |min{(𝕃−ρ)V + h, 1 − V_x}| / (1 + x)` over interior nodes.
    pub max_scaled: f64,
    pub max_abs: f64,
    #[serde(skip)]
    pub residual: Vec<f64>,
}

/// Evaluates `min{(𝕃−ρ)V + h(x), 1 − V_x}` at interior nodes, with
/// `x²V_xx = x v_x − v`. The central-difference `V_yy` is used where its
/// stencil stays on one side of the boundary, the closed expression
/// elsewhere.
pub fn hjb_residual(
    two: &TwoRegime,
    surface: &ValueSurface,
    boundary: &FreeBoundary,
    control: &ControlValueSurface,
) -> Result<HjbReport> {
    let g = &control.grid;
    let (nx, ny) = (g.nx(), g.ny());
    let formula = vyy_formula(two, surface, boundary, control)?;
    let s2 = 0.5 * two.sigma * two.sigma;
    let mut residual = vec![f64::NAN; g.len()];
    let (mut max_scaled, mut max_abs) = (0.0f64, 0.0f64);
    for j in 1..ny - 1 {
        let y = g.y[j];
        for i in 1..nx - 1 {
            let k = g.idx(i, j);
            let x = g.x[i];
            let v = surface.v[k];
            let vx_stop = diff_x(&surface.v, g, i, j);
            let side = |jj: usize| i < boundary.first_stop[jj];
            let same_side = side(j - 1) == side(j) && side(j + 1) == side(j);
            let vyy = if same_side { control.vyy[k] } else { formula[k] };
            let lv = two.x_drift(y) * v + s2 * (x * vx_stop - v)
                + two.y_drift(y) * control.vy[k]
                + two.y_diffusion(y) * vyy;
            let r = (lv - two.rho * control.value[k] + two.cost.h(x)).min(1.0 - control.vx[k]);
            residual[k] = r;
            max_abs = max_abs.max(r.abs());
            max_scaled = max_scaled.max(r.abs() / (1.0 + x));
        }
    }
    Ok(HjbReport {
        max_scaled,
        max_abs,
        residual,
    })
}

/// Largest `|V_yy(formula) − V_yy(central difference)|` over nodes with
/// `y ∈ [0.1, 0.9]` whose y-stencil stays at least two cells away from the
/// boundary.
pub fn vyy_discrepancy(
    two: &TwoRegime,
    surface: &ValueSurface,
    boundary: &FreeBoundary,
    control: &ControlValueSurface,
) -> Result<f64> {
    let g = &control.grid;
    let formula = vyy_formula(two, surface, boundary, control)?;
    let mut worst = 0.0f64;
    for j in 1..g.ny() - 1 {
        if !(0.1..=0.9).contains(&g.y[j]) {
            continue;
        }
        let lo = boundary.first_stop[j - 1]
            .min(boundary.first_stop[j])
            .min(boundary.first_stop[j + 1]);
        let hi = boundary.first_stop[j - 1]
            .max(boundary.first_stop[j])
            .max(boundary.first_stop[j + 1]);
        for i in 1..g.nx() - 1 {
            if i + 3 > lo && i < hi + 2 {
                continue;
            }
            let k = g.idx(i, j);
            worst = worst.max((formula[k] - control.vyy[k]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stopping::{Region, SolveStats};

    fn surface_from(v: impl Fn(f64, f64) -> f64) -> ValueSurface {
        let grid = Grid2D::uniform(-3.0, 2.0, 201, 1e-3, 1.0 - 1e-3, 101).unwrap();
        let vals: Vec<f64> = (0..grid.len())
            .map(|k| v(grid.x[k % grid.nx()], grid.y[k / grid.nx()]))
            .collect();
        ValueSurface {
            region: vec![Region::Continue; grid.len()],
            grid,
            v: vals,
            stats: SolveStats {
                sweeps: 0,
                max_update: 0.0,
                max_residual: 0.0,
            },
        }
    }

    #[test]
    fn identity_and_linear_stopping_values() {
        for &c in &[1.0, 0.4] {
            let s = surface_from(|z, _| c * z);
            let ctl = value_from_stopping(&s);
            for &(i, j) in &[(0, 0), (100, 50), (200, 100)] {
                let x = s.grid.x[i];
                let got = ctl.value[s.grid.idx(i, j)];
                assert!((got - c * x).abs() < 1e-4 * c * x, "{got} vs {}", c * x);
                assert!((ctl.vx[s.grid.idx(i, j)] - c).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn quadrature_is_second_order() {
        // v = z² gives V = x²/2.
        let fine = |n: usize| {
            let grid = Grid2D::uniform(-3.0, 1.0, n, 0.1, 0.9, 101).unwrap();
            let col: Vec<f64> = grid.x.iter().map(|x| x * x).collect();
            let integ = integrate_column(&col, grid.h_u, true);
            (integ[n - 1] - 0.5 * grid.x[n - 1].powi(2)).abs()
        };
        let (e1, e2) = (fine(201), fine(401));
        assert!(e2 < 0.3 * e1, "{e1} {e2}");
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let s = surface_from(|z, y| z * (1.0 - 0.5 * y));
        let ctl = value_from_stopping(&s);
        let g = &s.grid;
        let k = g.idx(77, 33);
        assert!((ctl.value_at(g.x[77], g.y[33]) - ctl.value[k]).abs() < 1e-12);
    }
}
