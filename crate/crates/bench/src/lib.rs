//! Fixtures shared by the criterion benches.

use layerlens::shap::TabulatedGame;

/// Deterministic non-additive game: a smooth function of the member bits.
pub fn synthetic_game(players: usize) -> TabulatedGame {
    TabulatedGame::from_fn(players, |s| {
        let mut acc = 0.0;
        for i in 0..players {
            if s.contains(i) {
                acc += ((i + 1) as f64).sqrt().sin();
            }
        }
        acc.tanh() + 0.1 * (s.size() as f64).powi(2).cos()
    })
}
