#![allow(dead_code)]

use layerlens::assets;
use layerlens::model::{loss_and_gradient, mean_loss, Example, Label, Model, ModelConfig};
use layerlens::phrase::Lexicon;
use layerlens::shap::{Coalition, TabulatedGame};
use layerlens::tokenizer::Vocab;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Bundle {
    pub model: Model,
    pub vocab: Vocab,
    pub lexicon: Lexicon,
}

pub fn bundle() -> Bundle {
    Bundle {
        model: assets::model().unwrap(),
        vocab: assets::vocab().unwrap(),
        lexicon: assets::lexicon().unwrap(),
    }
}

/// Game with i.i.d. uniform values in [-1, 1) for every coalition.
pub fn random_game(players: usize, seed: u64) -> TabulatedGame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..1u64 << players).map(|_| rng.gen_range(-1.0..1.0)).collect();
    TabulatedGame::new(players, values).unwrap()
}

/// Shapley values as the mean marginal contribution over all orderings.
pub fn permutation_shapley(game: &TabulatedGame, players: usize) -> Vec<f64> {
    let values = game.values();
    let mut order: Vec<usize> = (0..players).collect();
    let mut phi = vec![0.0; players];
    let mut count = 0usize;
    permute(&mut order, 0, &mut |perm| {
        let mut set = Coalition::EMPTY;
        for &p in perm {
            let next = set.with(p);
            phi[p] += values[next.0 as usize] - values[set.0 as usize];
            set = next;
        }
        count += 1;
    });
    phi.iter().map(|v| v / count as f64).collect()
}

fn permute(items: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Small randomly initialized model for numeric checks.
pub fn tiny_model(d_model: usize, n_heads: usize, seed: u64) -> Model {
    let config = ModelConfig {
        vocab_size: 7,
        d_model,
        n_heads,
        n_layers: 2,
        d_ff: 2 * d_model,
        max_len: 8,
        n_classes: 2,
    };
    Model::init(config, seed).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub struct Oracle {
    pub attention: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub prob_positive: f64,
}

/// Expected values of the hand-set single-block model on ids `[1, 2]`.
pub fn oracle() -> Oracle {
    let text = include_str!("../data/forward_oracle.expected");
    let field = |name: &str| -> Vec<f64> {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        line.split_whitespace().skip(1).map(|v| v.parse().unwrap()).collect()
    };
    Oracle {
        attention: field("attention"),
        hidden: field("hidden"),
        logits: field("logits"),
        prob_positive: field("prob_positive")[0],
    }
}

pub fn gradient_corpus() -> Vec<Example> {
    vec![
        Example {
            ids: vec![2, 4, 5, 3],
            label: Label::Pos,
        },
        Example {
            ids: vec![2, 6, 1, 4, 3],
            label: Label::Neg,
        },
    ]
}

/// Largest `|analytic - numeric| / max(|analytic| + |numeric|, 1e-6)` over
/// every parameter, numeric gradients by central differences with `h = 1e-5`.
pub fn max_gradient_error(model: &Model, corpus: &[Example]) -> (f64, String) {
    let (_, grads) = loss_and_gradient(model, corpus).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .named()
        .into_iter()
        .map(|(n, g)| (n, g.iter().copied().collect()))
        .collect();
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst = (0.0, String::new());
    for (group, (name, grad)) in analytic.iter().enumerate() {
        for (i, &a) in grad.iter().enumerate() {
            let original = {
                let mut params = probe.weights.named_mut();
                let cell = params[group].1.iter_mut().nth(i).unwrap();
                let v = *cell;
                *cell = v + h;
                v
            };
            let plus = mean_loss(&probe, corpus).unwrap();
            *probe.weights.named_mut()[group].1.iter_mut().nth(i).unwrap() = original - h;
            let minus = mean_loss(&probe, corpus).unwrap();
            *probe.weights.named_mut()[group].1.iter_mut().nth(i).unwrap() = original;
            let numeric = (plus - minus) / (2.0 * h);
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-6);
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}
