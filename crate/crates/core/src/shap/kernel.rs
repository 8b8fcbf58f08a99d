//! Kernel SHAP: Shapley values as the solution of a weighted least-squares
//! problem over coalition indicator vectors.
//!
//! Efficiency is imposed exactly by eliminating the last player's coefficient,
//! `phi[M-1] = (v(N) - v(empty)) - sum(phi[..M-1])`, before solving the ridge-regularized
//! normal equations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::game::{binomial, Coalition, Game, MAX_PLAYERS};
use crate::error::{Error, Result};

/// How coalitions are chosen for the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sampling {
    /// Every proper, non-empty coalition, weighted by the Shapley kernel.
    Enumerate,
    /// `samples` coalitions drawn with probability proportional to the kernel,
    /// in complementary pairs.
    Sample { samples: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDiagnostics {
    /// Distinct coalitions entering the regression (excluding empty and full).
    pub distinct_coalitions: usize,
    /// Draws made in sampling mode; zero when enumerating.
    pub samples: usize,
    /// Condition number of the regularized normal matrix.
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelOutput {
    pub values: Vec<f64>,
    pub v_empty: f64,
    pub v_full: f64,
    pub diagnostics: KernelDiagnostics,
}

/// Shapley kernel weight of a coalition of `size` out of `players`.
pub fn kernel_weight(players: usize, size: usize) -> f64 {
    let m = players as f64;
    let s = size as f64;
    (m - 1.0) / (binomial(players, size) as f64 * s * (m - s))
}

fn enumerate(players: usize) -> BTreeMap<u64, f64> {
    (1..(1u64 << players) - 1)
        .map(|s| (s, kernel_weight(players, s.count_ones() as usize)))
        .collect()
}

fn draw(players: usize, samples: usize, seed: u64) -> BTreeMap<u64, f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // P(size = s) ∝ (M-1) / (s (M-s)); within a size, subsets are uniform.
    let size_weights: Vec<f64> = (1..players)
        .map(|s| (players - 1) as f64 / (s * (players - s)) as f64)
        .collect();
    let total: f64 = size_weights.iter().sum();
    let mut counts = BTreeMap::new();
    let full = Coalition::full(players).0;
    let mut drawn = 0;
    while drawn < samples {
        let mut u = rng.gen::<f64>() * total;
        let mut size = players - 1;
        for (k, w) in size_weights.iter().enumerate() {
            if u < *w {
                size = k + 1;
                break;
            }
            u -= w;
        }
        let members = sample(&mut rng, players, size);
        let mask = Coalition::from_members(members.iter()).0;
        *counts.entry(mask).or_insert(0.0) += 1.0;
        drawn += 1;
        if drawn < samples {
            *counts.entry(full ^ mask).or_insert(0.0) += 1.0;
            drawn += 1;
        }
    }
    counts
}

const REFINEMENT_STEPS: usize = 3;

pub fn kernel_shap(game: &dyn Game, sampling: Sampling, ridge: f64) -> Result<KernelOutput> {
    let m = game.players();
    if m < 2 {
        return Err(Error::Degenerate(format!(
            "kernel regression needs at least 2 players, got {m}"
        )));
    }
    if m > MAX_PLAYERS {
        return Err(Error::Capacity {
            players: m,
            limit: MAX_PLAYERS,
        });
    }
    let (rows, samples) = match sampling {
        Sampling::Enumerate => {
            if m > 30 {
                return Err(Error::Capacity { players: m, limit: 30 });
            }
            (enumerate(m), 0)
        }
        Sampling::Sample { samples, seed } => {
            if samples < 2 * m {
                return Err(Error::Config(format!(
                    "{samples} kernel samples is below the minimum of 2M = {}",
                    2 * m
                )));
            }
            (draw(m, samples, seed), samples)
        }
    };

    let v_empty = game.value(Coalition::EMPTY)?;
    let v_full = game.value(Coalition::full(m))?;
    let delta = v_full - v_empty;

    let rows: Vec<(u64, f64)> = rows.into_iter().collect();
    let values: Vec<f64> = rows
        .par_iter()
        .map(|&(mask, _)| game.value(Coalition(mask)))
        .collect::<Result<_>>()?;

    let (phi, condition_number) = regress(m, &rows, &values, v_empty, delta, ridge)?;
    Ok(KernelOutput {
        values: phi,
        v_empty,
        v_full,
        diagnostics: KernelDiagnostics {
            distinct_coalitions: rows.len(),
            samples,
            condition_number,
        },
    })
}

/// Solves the efficiency-constrained weighted ridge regression; returns the
/// attributions and the condition number of the normal matrix.
fn regress(
    players: usize,
    rows: &[(u64, f64)],
    values: &[f64],
    v_empty: f64,
    delta: f64,
    ridge: f64,
) -> Result<(Vec<f64>, f64)> {
    let k = players - 1;
    let last = k;
    let mut normal = DMatrix::<f64>::zeros(k, k);
    let mut rhs = DVector::<f64>::zeros(k);
    let mut x = vec![0.0; k];
    for (&(mask, weight), &v) in rows.iter().zip(values) {
        let z_last = (mask >> last & 1) as f64;
        for (j, xj) in x.iter_mut().enumerate() {
            *xj = (mask >> j & 1) as f64 - z_last;
        }
        let y = v - v_empty - z_last * delta;
        for a in 0..k {
            if x[a] == 0.0 {
                continue;
            }
            rhs[a] += weight * x[a] * y;
            for b in 0..k {
                normal[(a, b)] += weight * x[a] * x[b];
            }
        }
    }
    for a in 0..k {
        normal[(a, a)] += ridge;
    }

    let eigen = normal.clone().symmetric_eigen();
    let max_eig = eigen.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_eig = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_number = if min_eig > 0.0 {
        max_eig / min_eig
    } else {
        f64::INFINITY
    };

    let factor = normal
        .clone()
        .cholesky()
        .filter(|_| condition_number < 1e14)
        .ok_or_else(|| {
            Error::Numerical(format!(
                "{} coalitions, eigenvalues in [{min_eig:e}, {max_eig:e}], condition number {condition_number:e}",
                rows.len()
            ))
        })?;
    // Iterated Tikhonov: each step removes most of the ridge bias along
    // well-determined directions and leaves near-null ones damped.
    let mut solution = factor.solve(&rhs);
    for _ in 0..REFINEMENT_STEPS {
        let residual = &rhs - &normal * &solution + &solution * ridge;
        solution += factor.solve(&residual);
    }

    let mut phi: Vec<f64> = solution.iter().copied().collect();
    phi.push(delta - phi.iter().sum::<f64>());
    Ok((phi, condition_number))
}
