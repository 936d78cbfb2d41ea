//! Exact t-SNE with perplexity-matched bandwidths, early exaggeration,
//! momentum and per-coordinate adaptive gains.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub max_points: usize,
    /// KL divergence is recorded every this many iterations.
    pub log_every: usize,
}

impl Default for TsneConfig {
    fn default() -> Self {
        TsneConfig {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            max_points: 5000,
            log_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// `(n, 2)`.
    pub embedding: Tensor,
    /// `(iteration, KL(P || Q))`, iteration 1-based.
    pub kl_trace: Vec<(usize, f64)>,
}

impl TsneResult {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_trace
            .iter()
            .find(|(i, _)| *i == iteration)
            .map(|(_, k)| *k)
    }
}

pub fn squared_distances(points: &Tensor) -> Vec<f64> {
    let n = points.rows();
    let mut d = vec![0.0; n * n];
    d.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let a = points.row(i);
        for (j, out) in row.iter_mut().enumerate() {
            if j != i {
                *out = a
                    .iter()
                    .zip(points.row(j))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
            }
        }
    });
    d
}

/// Entropy in nats and normalized row for precision `beta`.
fn row_entropy(dist: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    // Shift by the smallest off-diagonal distance so exp() cannot underflow
    // to an all-zero row.
    let dmin = dist
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    for (j, (&d, o)) in dist.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i {
            0.0
        } else {
            (-(d - dmin) * beta).exp()
        };
        sum += *o;
    }
    let mut h = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o /= sum;
        if j != i && *o > 0.0 {
            h -= *o * o.ln();
        }
    }
    h
}

/// Row-stochastic conditional probabilities `p_{j|i}` with each row's
/// perplexity matched to `perplexity` by bisection on the precision. Returns
/// the `(n, n)` matrix and the per-row perplexities reached.
pub fn conditional_probabilities(dist: &[f64], n: usize, perplexity: f64) -> (Vec<f64>, Vec<f64>) {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut reached = vec![0.0; n];
    p.par_chunks_mut(n)
        .zip(reached.par_iter_mut())
        .enumerate()
        .for_each(|(i, (row, perp))| {
            let d = &dist[i * n..(i + 1) * n];
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0, f64::INFINITY);
            let mut h = row_entropy(d, i, beta, row);
            for _ in 0..200 {
                if (h - target).abs() < 1e-10 {
                    break;
                }
                if h > target {
                    lo = beta;
                    beta = if hi.is_finite() {
                        (beta + hi) / 2.0
                    } else {
                        beta * 2.0
                    };
                } else {
                    hi = beta;
                    beta = (beta + lo) / 2.0;
                }
                h = row_entropy(d, i, beta, row);
            }
            *perp = h.exp();
        });
    (p, reached)
}

/// First two principal components of centered `points`, by power iteration
/// with deflation on the covariance.
fn pca2(points: &Tensor, seed: u64) -> Vec<[f64; 2]> {
    let (n, dim) = (points.rows(), points.cols());
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(points.row(i)) {
            *m += v / n as f64;
        }
    }
    let mut cov = vec![0.0; dim * dim];
    for i in 0..n {
        let x: Vec<f64> = points
            .row(i)
            .iter()
            .zip(&mean)
            .map(|(v, m)| v - m)
            .collect();
        for a in 0..dim {
            for b in 0..dim {
                cov[a * dim + b] += x[a] * x[b];
            }
        }
    }
    let mut r = rng::rng(rng::derive_str(seed, "pca"));
    let mut comps: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2 {
        let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
        for _ in 0..500 {
            let mut w = vec![0.0; dim];
            for a in 0..dim {
                w[a] = (0..dim).map(|b| cov[a * dim + b] * v[b]).sum();
            }
            for c in &comps {
                let dot: f64 = w.iter().zip(c).map(|(x, y)| x * y).sum();
                for (wi, ci) in w.iter_mut().zip(c) {
                    *wi -= dot * ci;
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                break;
            }
            w.iter_mut().for_each(|x| *x /= norm);
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = w;
            if delta < 1e-12 {
                break;
            }
        }
        comps.push(v);
    }
    (0..n)
        .map(|i| {
            let x: Vec<f64> = points
                .row(i)
                .iter()
                .zip(&mean)
                .map(|(v, m)| v - m)
                .collect();
            let proj = |c: &[f64]| x.iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
            [proj(&comps[0]), proj(&comps[1])]
        })
        .collect()
}

fn kl_divergence(p: &[f64], num: &[f64], z: f64) -> f64 {
    p.iter()
        .zip(num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / z).max(1e-300)).ln())
        .sum()
}

pub fn tsne2d(points: &Tensor, config: &TsneConfig, seed: u64) -> Result<TsneResult> {
    let n = points.rows();
    if points.shape().len() != 2 {
        return Err(Error::usage("t-SNE input must be a matrix"));
    }
    if config.perplexity <= 0.0 || (n as f64) < 3.0 * config.perplexity {
        return Err(Error::config(format!(
            "{n} points is too few for perplexity {} (need at least 3x)",
            config.perplexity
        )));
    }
    if n > config.max_points {
        return Err(Error::config(format!(
            "{n} points exceeds the exact t-SNE cap of {}; subsample first",
            config.max_points
        )));
    }
    if !points.is_finite() {
        return Err(Error::data("t-SNE input contains non-finite values"));
    }

    let dist = squared_distances(points);
    let (cond, _) = conditional_probabilities(&dist, n, config.perplexity);
    drop(dist);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
        }
        p[i * n + i] = 0.0;
    }
    drop(cond);

    let init = pca2(points, seed);
    let sd = {
        let m = init.iter().map(|v| v[0]).sum::<f64>() / n as f64;
        (init.iter().map(|v| (v[0] - m).powi(2)).sum::<f64>() / n as f64).sqrt()
    };
    let scale = if sd > 0.0 { 1e-4 / sd } else { 1.0 };
    let mut y: Vec<f64> = init
        .iter()
        .flat_map(|v| [v[0] * scale, v[1] * scale])
        .collect();
    let mut update = vec![0.0; 2 * n];
    let mut gains = vec![1.0; 2 * n];
    let mut num = vec![0.0; n * n];
    let mut grad = vec![0.0; 2 * n];
    let mut kl_trace = Vec::new();

    for iter in 1..=config.iterations {
        let exag = if iter <= config.exaggeration_iters {
            config.exaggeration
        } else {
            1.0
        };
        let momentum = if iter <= config.momentum_switch {
            config.momentum
        } else {
            config.final_momentum
        };
        if iter == config.exaggeration_iters + 1 {
            // the unexaggerated phase starts from rest
            update.fill(0.0);
            gains.fill(1.0);
        }

        num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
            for (j, out) in row.iter_mut().enumerate() {
                *out = if i == j {
                    0.0
                } else {
                    let (d0, d1) = (yi0 - y[2 * j], yi1 - y[2 * j + 1]);
                    1.0 / (1.0 + d0 * d0 + d1 * d1)
                };
            }
        });
        let row_sums: Vec<f64> = num.par_chunks(n).map(|r| r.iter().sum()).collect();
        let z: f64 = row_sums.iter().sum();

        grad.par_chunks_mut(2).enumerate().for_each(|(i, g)| {
            let (mut g0, mut g1) = (0.0, 0.0);
            for j in 0..n {
                let nij = num[i * n + j];
                let m = (exag * p[i * n + j] - nij / z) * nij;
                g0 += m * (y[2 * i] - y[2 * j]);
                g1 += m * (y[2 * i + 1] - y[2 * j + 1]);
            }
            g[0] = 4.0 * g0;
            g[1] = 4.0 * g1;
        });

        for k in 0..2 * n {
            let g: f64 = if (grad[k] > 0.0) != (update[k] > 0.0) {
                gains[k] + 0.2
            } else {
                gains[k] * 0.8
            };
            gains[k] = g.max(0.01);
            update[k] = momentum * update[k] - config.learning_rate * gains[k] * grad[k];
            y[k] += update[k];
        }
        let (m0, m1) = (0..n).fold((0.0, 0.0), |(a, b), i| (a + y[2 * i], b + y[2 * i + 1]));
        for i in 0..n {
            y[2 * i] -= m0 / n as f64;
            y[2 * i + 1] -= m1 / n as f64;
        }

        if (config.log_every > 0 && iter % config.log_every == 0) || iter == config.iterations {
            // KL of the current embedding against the plain P.
            num.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
                for (j, out) in row.iter_mut().enumerate() {
                    *out = if i == j {
                        0.0
                    } else {
                        let (d0, d1) = (y[2 * i] - y[2 * j], y[2 * i + 1] - y[2 * j + 1]);
                        1.0 / (1.0 + d0 * d0 + d1 * d1)
                    };
                }
            });
            let z: f64 = num
                .par_chunks(n)
                .map(|r| r.iter().sum::<f64>())
                .collect::<Vec<_>>()
                .iter()
                .sum();
            let kl = kl_divergence(&p, &num, z);
            log::debug!("t-SNE iteration {iter}: KL {kl:.5}");
            kl_trace.push((iter, kl));
        }
    }
    Ok(TsneResult {
        embedding: Tensor::from_vec(&[n, 2], y)?,
        kl_trace,
    })
}

/// Mean silhouette coefficient of `labels` in the rows of `points`.
pub fn silhouette(points: &Tensor, labels: &[usize]) -> Result<f64> {
    let n = points.rows();
    if labels.len() != n || n < 2 {
        return Err(Error::usage(
            "silhouette needs one label per point and at least two points",
        ));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let dist = |i: usize, j: usize| -> f64 {
        points
            .row(i)
            .iter()
            .zip(points.row(j))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    let scores: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut sums = vec![0.0; k];
            let mut counts = vec![0usize; k];
            for j in 0..n {
                if j != i {
                    sums[labels[j]] += dist(i, j);
                    counts[labels[j]] += 1;
                }
            }
            let own = labels[i];
            if counts[own] == 0 {
                return 0.0;
            }
            let a = sums[own] / counts[own] as f64;
            let b = (0..k)
                .filter(|&c| c != own && counts[c] > 0)
                .map(|c| sums[c] / counts[c] as f64)
                .fold(f64::INFINITY, f64::min);
            if !b.is_finite() {
                return 0.0;
            }
            (b - a) / a.max(b)
        })
        .collect();
    Ok(scores.iter().sum::<f64>() / n as f64)
}
