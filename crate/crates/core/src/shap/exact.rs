use rayon::prelude::*;

use super::game::{binomial, Coalition, Game};
use crate::error::{Error, Result};

/// Values of all `2^M` coalitions, indexed by bitmask. Evaluated in parallel.
pub fn value_table(game: &dyn Game) -> Result<Vec<f64>> {
    let m = game.players();
    (0..1u64 << m)
        .into_par_iter()
        .map(|s| game.value(Coalition(s)))
        .collect()
}

/// Shapley values from a complete value table.
pub fn shapley_from_table(players: usize, table: &[f64]) -> Vec<f64> {
    assert_eq!(table.len(), 1 << players);
    let m = players;
    // |S|!(M-|S|-1)!/M! = 1 / (M * C(M-1, |S|))
    let weights: Vec<f64> = (0..m).map(|s| 1.0 / (m as f64 * binomial(m - 1, s) as f64)).collect();
    (0..m)
        .map(|i| {
            let bit = 1usize << i;
            let mut phi = 0.0;
            for s in 0..table.len() {
                if s & bit == 0 {
                    let size = s.count_ones() as usize;
                    phi += weights[size] * (table[s | bit] - table[s]);
                }
            }
            phi
        })
        .collect()
}

/// Exact Shapley values by enumerating every coalition.
pub fn exact_shapley(game: &dyn Game, limit: usize) -> Result<Vec<f64>> {
    let m = game.players();
    if m > limit {
        return Err(Error::Capacity { players: m, limit });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let table = value_table(game)?;
    Ok(shapley_from_table(m, &table))
}
