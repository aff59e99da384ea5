//! Bootstrap particle filter used as an independent reference for the
//! Kushner–Stratonovich filter.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::ks::MATCH_TOL;
use crate::model::simulate::sample_index;
use crate::model::{alpha_fn, ModelParams, Observations};
use crate::par::{chunk_partials, for_each_block_mut, for_each_chunk_pair_mut, Execution};
use crate::rng::{stream, Purpose};

/// Minimum number of particles accepted by [`particle_filter_oracle`].
pub const MIN_PARTICLES: usize = 10_000;
/// Particles per RNG block.
const BLOCK: usize = 4096;

/// Empirical conditional law on the observation grid.
#[derive(Debug, Clone)]
pub struct ParticleEstimate {
    pub t: Vec<f64>,
    pub pi: Vec<Vec<f64>>,
    pub resample_steps: usize,
}

fn matches(c: f64, mark: f64) -> bool {
    c != 0.0 && (c - mark).abs() <= MATCH_TOL * c.abs().max(mark.abs())
}

/// Runs a bootstrap filter with `n_particles` regime particles. Streams are
/// keyed by `(seed, path_index)` so repeated calls reproduce bitwise.
pub fn particle_filter_oracle(
    params: &ModelParams,
    obs: &Observations,
    y0: &[f64],
    n_particles: usize,
    seed: u64,
    path_index: u64,
    exec: Execution,
) -> Result<ParticleEstimate> {
    if n_particles < MIN_PARTICLES {
        return Err(Error::InvalidParameter(format!(
            "particle filter needs at least {MIN_PARTICLES} particles, got {n_particles}"
        )));
    }
    let q = params.q();
    if y0.len() != q {
        return Err(Error::InvalidParameter("initial law has wrong length".into()));
    }
    let n_blocks = n_particles.div_ceil(BLOCK);
    let mut rngs: Vec<ChaCha8Rng> = (0..n_blocks)
        .map(|b| stream(seed, Purpose::Particles, (path_index << 24) | b as u64))
        .collect();
    let mut resample_rng = stream(seed, Purpose::Particles, (path_index << 24) | 0xFF_FFFF);

    let dt = obs.dt;
    let n = obs.n_steps();
    let trans = params.generator.transition_matrix(dt);
    let sigma = params.sigma;

    let mut z = vec![0usize; n_particles];
    let mut w = vec![1.0 / n_particles as f64; n_particles];
    {
        let zb: Vec<&mut [usize]> = z.chunks_mut(BLOCK).collect();
        for (chunk, rng) in zb.into_iter().zip(rngs.iter_mut()) {
            for zi in chunk.iter_mut() {
                *zi = sample_index(y0, rng.random::<f64>());
            }
        }
    }

    let mut out = ParticleEstimate {
        t: obs.t.clone(),
        pi: Vec::with_capacity(n + 1),
        resample_steps: 0,
    };
    out.pi.push(estimate(&z, &w, q, exec));

    let mut jcur = 0;
    for k in 0..n {
        let start = jcur;
        while jcur < obs.jumps.len() && obs.jumps[jcur].0 == k + 1 {
            jcur += 1;
        }
        let marks = &obs.jumps[start..jcur];
        let eta = obs.eta[k];
        let y1 = ((obs.x0[k + 1] / obs.x0[k]).ln() + 0.5 * sigma * sigma * dt) / sigma;
        let s1 = params.indicator.sigma1(eta);
        let s2 = params.indicator.sigma2(eta);
        let y2 = (obs.continuous_eta_increment(k, marks) - s1 * y1) / s2;

        // Diffusive likelihood and survival factor, evaluated at the regime
        // held over the step.
        let loglik: Vec<f64> = (0..q)
            .map(|i| {
                let b = params.beta[i] / sigma;
                let a = alpha_fn(params, eta, i).unwrap_or(0.0);
                b * y1 - 0.5 * b * b * dt + a * y2 - 0.5 * a * a * dt
                    - params.visible_jump_rate(eta, i) * dt
            })
            .collect();
        let top = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lik: Vec<f64> = loglik.iter().map(|l| (l - top).exp()).collect();

        let lik_ref = &lik;
        let trans_ref = &trans;
        // Weight by the step likelihood, then move each particle by P(dt).
        for_each_block_mut(exec, &mut z, &mut w, &mut rngs, BLOCK, |_, zc, wc, rng| {
            for (zi, wi) in zc.iter_mut().zip(wc.iter_mut()) {
                *wi *= lik_ref[*zi];
                let row = &trans_ref[*zi * q..(*zi + 1) * q];
                *zi = sample_index(row, rng.random::<f64>());
            }
        });

        // Jump-mark likelihood at the post-move regime.
        let mut eta_pre = obs.eta[k + 1] - marks.iter().map(|m| m.1).sum::<f64>();
        for &(_, mark) in marks {
            let jl: Vec<f64> = (0..q)
                .map(|i| {
                    if matches(params.jumps.size(eta_pre, i), mark) {
                        params.jump_intensity[i]
                    } else {
                        0.0
                    }
                })
                .collect();
            let jl_ref = &jl;
            for_each_chunk_pair_mut(exec, &mut z, &mut w, BLOCK, |_, zc, wc| {
                for (zi, wi) in zc.iter().zip(wc.iter_mut()) {
                    *wi *= jl_ref[*zi];
                }
            });
            eta_pre += mark;
        }

        let total = sum_weights(&w, exec);
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::WeightCollapse { step: k + 1 });
        }
        let inv = 1.0 / total;
        for_each_chunk_pair_mut(exec, &mut z, &mut w, BLOCK, |_, _, wc| {
            for wi in wc.iter_mut() {
                *wi *= inv;
            }
        });
        out.pi.push(estimate(&z, &w, q, exec));

        let sum_sq: f64 = chunk_partials(exec, n_particles, BLOCK, |r| {
            w[r].iter().map(|v| v * v).sum::<f64>()
        })
        .into_iter()
        .sum();
        if 1.0 / sum_sq < 0.5 * n_particles as f64 {
            z = systematic_resample(&z, &w, resample_rng.random::<f64>());
            w.iter_mut().for_each(|v| *v = 1.0 / n_particles as f64);
            out.resample_steps += 1;
        }
    }
    Ok(out)
}

fn sum_weights(w: &[f64], exec: Execution) -> f64 {
    chunk_partials(exec, w.len(), BLOCK, |r| w[r].iter().sum::<f64>())
        .into_iter()
        .sum()
}

fn estimate(z: &[usize], w: &[f64], q: usize, exec: Execution) -> Vec<f64> {
    let partials = chunk_partials(exec, z.len(), BLOCK, |r| {
        let mut acc = vec![0.0; q];
        for k in r {
            acc[z[k]] += w[k];
        }
        acc
    });
    let mut pi = vec![0.0; q];
    for p in partials {
        for i in 0..q {
            pi[i] += p[i];
        }
    }
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= s);
    pi
}

/// Systematic resampling with a single uniform offset `u ∈ [0,1)`.
pub fn systematic_resample(z: &[usize], w: &[f64], u: f64) -> Vec<usize> {
    let n = z.len();
    let step = 1.0 / n as f64;
    let mut out = Vec::with_capacity(n);
    let mut cum = w[0];
    let mut j = 0;
    for k in 0..n {
        let target = (u + k as f64) * step;
        while cum < target && j + 1 < n {
            j += 1;
            cum += w[j];
        }
        out.push(z[j]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn systematic_resampling_counts() {
        let z = vec![0, 1, 2, 3];
        let w = vec![0.5, 0.0, 0.25, 0.25];
        let r = systematic_resample(&z, &w, 0.5);
        assert_eq!(r, vec![0, 0, 2, 3]);
    }

    #[test]
    fn resampled_counts_are_floor_or_ceil() {
        let n = 1000;
        let z: Vec<usize> = (0..n).collect();
        let raw: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64).collect();
        let s: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let r = systematic_resample(&z, &w, 0.37);
        let mut counts = vec![0usize; n];
        r.iter().for_each(|&i| counts[i] += 1);
        for i in 0..n {
            let e = w[i] * n as f64;
            assert!(
                counts[i] as f64 >= e.floor() - 1e-9 && counts[i] as f64 <= e.ceil() + 1e-9,
                "particle {i}: {} vs {e}",
                counts[i]
            );
        }
    }
}
