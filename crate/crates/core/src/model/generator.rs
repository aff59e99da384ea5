use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums of a generator matrix.
const ROW_SUM_TOL: f64 = 1e-12;

/// Intensity matrix of the hidden regime chain, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct GeneratorMatrix {
    q: usize,
    rates: Vec<f64>,
}

impl GeneratorMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let q = rows.len();
        if q == 0 || rows.iter().any(|r| r.len() != q) {
            return Err(Error::InvalidParameter(
                "generator must be a non-empty square matrix".into(),
            ));
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, &rate) in row.iter().enumerate() {
                if !rate.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "generator entry ({i},{j}) is not finite"
                    )));
                }
                if i != j && rate < 0.0 {
                    return Err(Error::NegativeRate { row: i, col: j, rate });
                }
            }
            let sum: f64 = row.iter().sum();
            let scale = row.iter().map(|v| v.abs()).fold(1.0, f64::max);
            if sum.abs() > ROW_SUM_TOL * scale {
                return Err(Error::NonConservativeGenerator { row: i, sum });
            }
        }
        Ok(Self {
            q,
            rates: rows.into_iter().flatten().collect(),
        })
    }

    /// Two-state chain with `1 -> 2` rate `l1` and `2 -> 1` rate `l2`.
    pub fn two_state(l1: f64, l2: f64) -> Result<Self> {
        Self::new(vec![vec![-l1, l1], vec![l2, -l2]])
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.q + j]
    }

    pub fn exit_rate(&self, i: usize) -> f64 {
        -self.rate(i, i)
    }

    pub fn max_exit_rate(&self) -> f64 {
        (0..self.q).map(|i| self.exit_rate(i)).fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.rates.chunks(self.q).map(|r| r.to_vec()).collect()
    }

    /// `(Λᵀ p)_i = Σ_j λ_ji p_j`, the forward-equation drift.
    pub fn forward(&self, p: &[f64]) -> Vec<f64> {
        (0..self.q)
            .map(|i| (0..self.q).map(|j| self.rate(j, i) * p[j]).sum())
            .collect()
    }

    /// Transition matrix `exp(Λ t)` by uniformization, row-major.
    pub fn transition_matrix(&self, t: f64) -> Vec<f64> {
        let q = self.q;
        let mut out = vec![0.0; q * q];
        let unif = self.max_exit_rate();
        if unif == 0.0 || t == 0.0 {
            for i in 0..q {
                out[i * q + i] = 1.0;
            }
            return out;
        }
        // P = I + Λ/unif is stochastic; exp(Λt) = Σ_k Pois(k; unif t) P^k.
        let mut step = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                step[i * q + j] = f64::from(u8::from(i == j)) + self.rate(i, j) / unif;
            }
        }
        let lam = unif * t;
        let mut power = vec![0.0; q * q];
        for i in 0..q {
            power[i * q + i] = 1.0;
        }
        // Weights computed in log space to stay finite for large unif * t.
        let k_max = (lam + 12.0 * lam.sqrt() + 30.0).ceil() as usize;
        let mut log_w = -lam;
        for k in 0..=k_max {
            if k > 0 {
                log_w += lam.ln() - (k as f64).ln();
                power = matmul(&power, &step, q);
            }
            let w = log_w.exp();
            for (o, p) in out.iter_mut().zip(&power) {
                *o += w * p;
            }
        }
        // Renormalize rows to remove truncation mass.
        for row in out.chunks_mut(q) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        out
    }

    /// Marginal law `exp(Λᵀ t) y0` of the chain started from `y0`.
    pub fn marginal(&self, y0: &[f64], t: f64) -> Vec<f64> {
        let p = self.transition_matrix(t);
        let q = self.q;
        (0..q)
            .map(|j| (0..q).map(|i| y0[i] * p[i * q + j]).sum())
            .collect()
    }

    /// Stationary distribution: solves `Λᵀ p = 0`, `Σ p = 1`.
    pub fn stationary(&self) -> Vec<f64> {
        let q = self.q;
        // Replace the last equation of Λᵀ p = 0 with the normalization.
        let mut a = vec![0.0; q * q];
        let mut b = vec![0.0; q];
        for i in 0..q {
            for j in 0..q {
                a[i * q + j] = if i == q - 1 { 1.0 } else { self.rate(j, i) };
            }
        }
        b[q - 1] = 1.0;
        solve_dense(&mut a, &mut b, q);
        b
    }
}

impl TryFrom<Vec<Vec<f64>>> for GeneratorMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<GeneratorMatrix> for Vec<Vec<f64>> {
    fn from(g: GeneratorMatrix) -> Self {
        g.rows()
    }
}

fn matmul(a: &[f64], b: &[f64], q: usize) -> Vec<f64> {
    let mut c = vec![0.0; q * q];
    for i in 0..q {
        for k in 0..q {
            let aik = a[i * q + k];
            for j in 0..q {
                c[i * q + j] += aik * b[k * q + j];
            }
        }
    }
    c
}

/// Gaussian elimination with partial pivoting; solution left in `b`.
fn solve_dense(a: &mut [f64], b: &mut [f64], n: usize) {
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))
            .unwrap();
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            b[r] -= f * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = b[col];
        for j in col + 1..n {
            s -= a[col * n + j] * b[j];
        }
        b[col] = s / a[col * n + col];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_generator_accepted() {
        let g = GeneratorMatrix::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(g.q(), 2);
        assert_eq!(g.exit_rate(0), 1.0);
    }

    #[test]
    fn row_sum_violation_rejected() {
        let err = GeneratorMatrix::new(vec![vec![-1.0, 1.1], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, Error::NonConservativeGenerator { row: 0, .. }));
    }

    #[test]
    fn negative_rate_rejected() {
        let err = GeneratorMatrix::new(vec![vec![1.0, -1.0], vec![1.0, -1.0]]).unwrap_err();
        assert!(matches!(err, Error::NegativeRate { .. }));
    }

    #[test]
    fn two_state_transition_matches_closed_form() {
        // P(Z_t = 1 | Z_0 = 1) = l2/(l1+l2) + l1/(l1+l2) e^{-(l1+l2)t}.
        let (l1, l2) = (0.7, 0.3);
        let g = GeneratorMatrix::two_state(l1, l2).unwrap();
        for &t in &[0.0, 0.1, 1.0, 5.0, 40.0] {
            let p = g.transition_matrix(t);
            let s = l1 + l2;
            let p11 = l2 / s + l1 / s * (-s * t).exp();
            assert!((p[0] - p11).abs() < 1e-12, "t={t}: {} vs {p11}", p[0]);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn stationary_is_a_fixed_point() {
        let g = GeneratorMatrix::new(vec![
            vec![-1.0, 0.6, 0.4],
            vec![0.2, -0.5, 0.3],
            vec![0.5, 0.5, -1.0],
        ])
        .unwrap();
        let p = g.stationary();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.forward(&p).iter().all(|v| v.abs() < 1e-12));
        let later = g.marginal(&p, 3.0);
        for (a, b) in later.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
