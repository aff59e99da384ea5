//! Projected SOR for `min{(𝕃−ρ)v + x h'(x), x − v} = 0` with red-black
//! ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TwoRegime;
use crate::par::{map_chunks_mut, Execution};
use crate::stopping::grid::Grid2D;
use crate::stopping::operator::{generator_apply, stencil};

/// Nodes per parallel work item within one color.
const SWEEP_CHUNK: usize = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsorConfig {
    pub omega: f64,
    /// Sup-norm of the nodal update that ends the sweeps.
    pub tol_psor: f64,
    /// Complementarity tolerance, scaled by `1 + x` at each node.
    pub tol_comp: f64,
    pub max_iter: usize,
}

impl Default for PsorConfig {
    fn default() -> Self {
        Self {
            omega: 1.5,
            tol_psor: 1e-9,
            tol_comp: 1e-6,
            max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Continue,
    Stop,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub sweeps: usize,
    pub max_update: f64,
    /// `max |min{(𝕃−ρ)v + xh', x − v}| / (1 + x)` over free nodes.
    pub max_residual: f64,
}

/// Stopping value on the grid, rows indexed by y.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub grid: Grid2D,
    pub v: Vec<f64>,
    pub region: Vec<Region>,
    pub stats: SolveStats,
}

impl ValueSurface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.v[self.grid.idx(i, j)]
    }

    pub fn region_at(&self, i: usize, j: usize) -> Region {
        self.region[self.grid.idx(i, j)]
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    global: usize,
    diag: f64,
    f: f64,
    psi: f64,
    nb: [(u32, f64); 4],
    n_nb: u8,
}

/// Linear system split by color; neighbors of a node live in the other color.
struct RedBlack {
    nodes: [Vec<Node>; 2],
    values: [Vec<f64>; 2],
}

fn color(i: usize, j: usize) -> usize {
    (i + j) % 2
}

impl RedBlack {
    fn build(two: &TwoRegime, grid: &Grid2D, init: &[f64], fixed: &[Option<f64>]) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let mut local = vec![u32::MAX; grid.len()];
        let mut counts = [0u32; 2];
        for j in 0..ny {
            for i in 0..nx {
                let g = grid.idx(i, j);
                if fixed[g].is_none() {
                    let c = color(i, j);
                    local[g] = counts[c];
                    counts[c] += 1;
                }
            }
        }
        let mut nodes: [Vec<Node>; 2] = [Vec::new(), Vec::new()];
        let mut values: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for j in 0..ny {
            let st = stencil(two, grid, j);
            for i in 0..nx {
                let g = grid.idx(i, j);
                if fixed[g].is_some() {
                    continue;
                }
                let x = grid.x[i];
                let mut node = Node {
                    global: g,
                    diag: two.rho + st.total(),
                    f: x * two.cost.h_prime(x),
                    psi: x,
                    nb: [(0, 0.0); 4],
                    n_nb: 0,
                };
                let mut link = |ni: usize, nj: usize, w: f64| {
                    if w == 0.0 {
                        return;
                    }
                    let ng = grid.idx(ni, nj);
                    match fixed[ng] {
                        Some(val) => node.f += w * val,
                        None => {
                            node.nb[node.n_nb as usize] = (local[ng], w);
                            node.n_nb += 1;
                        }
                    }
                };
                link(i + 1, j, st.east);
                link(i - 1, j, st.west);
                if st.north != 0.0 {
                    link(i, j + 1, st.north);
                }
                if st.south != 0.0 {
                    link(i, j - 1, st.south);
                }
                let c = color(i, j);
                nodes[c].push(node);
                values[c].push(init[g]);
            }
        }
        Self { nodes, values }
    }

    /// One relaxation pass over color `c`; returns the largest update.
    fn sweep(&mut self, c: usize, omega: f64, exec: Execution) -> f64 {
        let (lo, hi) = self.values.split_at_mut(1);
        let (cur, other) = if c == 0 {
            (&mut lo[0], &hi[0])
        } else {
            (&mut hi[0], &lo[0])
        };
        let nodes = &self.nodes[c];
        map_chunks_mut(exec, cur, SWEEP_CHUNK, |k, chunk| {
            let base = k * SWEEP_CHUNK;
            let mut du: f64 = 0.0;
            for (off, v) in chunk.iter_mut().enumerate() {
                let n = &nodes[base + off];
                let mut acc = n.f;
                for &(idx, w) in &n.nb[..n.n_nb as usize] {
                    acc += w * other[idx as usize];
                }
                let gs = acc / n.diag;
                let new = (*v + omega * (gs - *v)).min(n.psi);
                du = du.max((new - *v).abs());
                *v = new;
            }
            du
        })
        .into_iter()
        .fold(0.0, f64::max)
    }

    fn scatter(&self, out: &mut [f64]) {
        for c in 0..2 {
            for (n, &v) in self.nodes[c].iter().zip(&self.values[c]) {
                out[n.global] = v;
            }
        }
    }
}

/// Fixed values: `v = 0` at the smallest x, `v = x` at the largest.
fn dirichlet(grid: &Grid2D) -> Vec<Option<f64>> {
    let nx = grid.nx();
    (0..grid.len())
        .map(|g| {
            let i = g % nx;
            if i == 0 {
                Some(0.0)
            } else if i == nx - 1 {
                Some(grid.x[i])
            } else {
                None
            }
        })
        .collect()
}

/// Starting surface `min{x, x h'(x)/(ρ − 2b(y) − σ²)}`, the one-dimensional
/// particular solution for quadratic cost.
fn initial_guess(two: &TwoRegime, grid: &Grid2D) -> Vec<f64> {
    let mut v = vec![0.0; grid.len()];
    for j in 0..grid.ny() {
        let denom = two.rho - 2.0 * two.x_drift(grid.y[j]) - two.sigma * two.sigma;
        for i in 0..grid.nx() {
            let x = grid.x[i];
            v[grid.idx(i, j)] = if denom > 0.0 {
                (x * two.cost.h_prime(x) / denom).clamp(0.0, x)
            } else {
                x
            };
        }
    }
    v
}

/// Solves the obstacle problem by projected SOR.
pub fn solve_variational_inequality(
    two: &TwoRegime,
    grid: &Grid2D,
    config: &PsorConfig,
    exec: Execution,
) -> Result<ValueSurface> {
    if !(config.omega > 0.0 && config.omega < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "relaxation factor {} outside (0, 2)",
            config.omega
        )));
    }
    if !(two.rho > two.rho_floor.max(0.0)) {
        return Err(Error::DiscountTooSmall {
            rho: two.rho,
            floor: two.rho_floor.max(0.0),
        });
    }
    let fixed = dirichlet(grid);
    let mut v = initial_guess(two, grid);
    for (val, fx) in v.iter_mut().zip(&fixed) {
        if let Some(f) = fx {
            *val = *f;
        }
    }
    let mut system = RedBlack::build(two, grid, &v, &fixed);
    let mut max_update = f64::INFINITY;
    let mut residual = f64::INFINITY;
    let mut sweeps = 0;
    while sweeps < config.max_iter {
        sweeps += 1;
        let d0 = system.sweep(0, config.omega, exec);
        let d1 = system.sweep(1, config.omega, exec);
        max_update = d0.max(d1);
        if max_update < config.tol_psor {
            system.scatter(&mut v);
            residual = max_complementarity(two, grid, &v);
            if residual <= config.tol_comp {
                break;
            }
        }
    }
    system.scatter(&mut v);
    if residual > config.tol_comp {
        residual = max_complementarity(two, grid, &v);
    }
    if !(max_update < config.tol_psor && residual <= config.tol_comp) {
        return Err(Error::NoConvergence {
            iterations: sweeps,
            residual,
        });
    }
    let region = (0..grid.len())
        .map(|g| {
            if v[g] >= grid.x[g % grid.nx()] {
                Region::Stop
            } else {
                Region::Continue
            }
        })
        .collect();
    log::info!("relaxation converged after {sweeps} sweeps, residual {residual:.3e}");
    Ok(ValueSurface {
        grid: grid.clone(),
        v,
        region,
        stats: SolveStats {
            sweeps,
            max_update,
            max_residual: residual,
        },
    })
}

/// Nodewise `min{(𝕃−ρ)v + x h'(x), x − v}` evaluated through
/// [`generator_apply`]; `NaN` on the fixed x-edges.
pub fn complementarity_field(two: &TwoRegime, grid: &Grid2D, v: &[f64]) -> Vec<f64> {
    let nx = grid.nx();
    (0..grid.len())
        .map(|g| {
            let (i, j) = (g % nx, g / nx);
            if i == 0 || i == nx - 1 {
                return f64::NAN;
            }
            let x = grid.x[i];
            let pde = generator_apply(two, grid, v, i, j) - two.rho * v[g] + x * two.cost.h_prime(x);
            pde.min(x - v[g])
        })
        .collect()
}

fn max_complementarity(two: &TwoRegime, grid: &Grid2D, v: &[f64]) -> f64 {
    complementarity_field(two, grid, v)
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_nan())
        .map(|(g, r)| r.abs() / (1.0 + grid.x[g % grid.nx()]))
        .fold(0.0, f64::max)
}
