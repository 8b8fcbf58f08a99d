use std::fmt;

use crate::error::{Error, Result};

/// Most players a [`Coalition`] bitmask can hold.
pub const MAX_PLAYERS: usize = 63;

/// Set of present players; bit `i` set means player `i` is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(pub u64);

impl Coalition {
    pub const EMPTY: Coalition = Coalition(0);

    pub fn full(players: usize) -> Self {
        debug_assert!(players <= MAX_PLAYERS);
        Coalition((1u64 << players) - 1)
    }

    pub fn from_members(members: impl IntoIterator<Item = usize>) -> Self {
        Coalition(members.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    pub fn contains(self, player: usize) -> bool {
        self.0 >> player & 1 == 1
    }

    pub fn with(self, player: usize) -> Self {
        Coalition(self.0 | 1 << player)
    }

    pub fn without(self, player: usize) -> Self {
        Coalition(self.0 & !(1 << player))
    }

    pub fn size(self) -> usize {
        self.0.count_ones() as usize
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for i in 0..64 {
            if self.contains(i) {
                if !first {
                    write!(f, ",")?;
                }
                first = false;
                write!(f, "{i}")?;
            }
        }
        write!(f, "}}")
    }
}

/// A cooperative game: a value for every coalition of `players()` players.
pub trait Game: Sync {
    fn players(&self) -> usize;
    fn value(&self, coalition: Coalition) -> Result<f64>;
}

/// Game defined by an explicit table indexed by coalition bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedGame {
    players: usize,
    values: Vec<f64>,
}

impl TabulatedGame {
    pub fn new(players: usize, values: Vec<f64>) -> Result<Self> {
        if players > 20 || values.len() != 1 << players {
            return Err(Error::Input(format!(
                "a table for {players} players needs {} entries, got {}",
                1u64 << players.min(63),
                values.len()
            )));
        }
        Ok(Self { players, values })
    }

    pub fn from_fn(players: usize, f: impl Fn(Coalition) -> f64) -> Self {
        let values = (0..1u64 << players).map(|s| f(Coalition(s))).collect();
        Self { players, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

impl Game for TabulatedGame {
    fn players(&self) -> usize {
        self.players
    }

    fn value(&self, coalition: Coalition) -> Result<f64> {
        self.values
            .get(coalition.0 as usize)
            .copied()
            .ok_or_else(|| Error::Bounds(format!("coalition {coalition} for {} players", self.players)))
    }
}

/// Binomial coefficient, exact for every `n ≤ 63`.
pub(crate) fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}
