//! Acceptance gates, one line per criterion. Runs as a plain binary so the
//! verdict lines are printed even when every gate passes.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{bundle, max_abs_diff, random_game, Bundle};
use layerlens::assets::{self, DEMO_SENTENCES, S1, S2};
use layerlens::model::{load_weights, max_attention_row_error, save_weights, tokenize_corpus, train_classifier};
use layerlens::model::{Model, ModelConfig, TrainConfig};
use layerlens::phrase::{extract_phrases, PhraseKind};
use layerlens::report::parse_document;
use layerlens::shap::{
    exact_shapley, kernel_shap, Coalition, Explainer, ExplainerConfig, Game, LayerTarget, MaskingGame, MethodChoice,
    Sampling, SentenceContext, TabulatedGame,
};
use layerlens::tokenizer::tokenize;

type Verdict = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(
        elapsed.as_secs_f64() <= limit_s,
        format!("took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()),
    )
}

fn exact_config(b: &Bundle) -> ExplainerConfig {
    ExplainerConfig {
        method: MethodChoice::Exact,
        layer_targets: Some(LayerTarget::all(b.model.config.n_layers)),
        word_level: false,
        ..ExplainerConfig::default()
    }
}

fn efficiency(b: &Bundle) -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let players = 1 + (i % 10) as usize;
        let game = random_game(players, 1000 + i);
        let phi = exact_shapley(&game, 12).map_err(|e| e.to_string())?;
        let v = game.values();
        worst = worst.max((phi.iter().sum::<f64>() - (v[v.len() - 1] - v[0])).abs());
    }
    let explainer = Explainer::new(&b.model, &b.vocab, &b.lexicon, exact_config(b)).map_err(|e| e.to_string())?;
    let mut layers = 0;
    for (_, sentence) in DEMO_SENTENCES {
        let result = explainer.explain(sentence).map_err(|e| e.to_string())?;
        for layer in &result.layers {
            worst = worst.max(layer.attribution.efficiency_gap().abs());
            layers += 1;
        }
    }
    check(worst <= 1e-9, format!("efficiency gap {worst:e}"))?;
    within(start.elapsed(), 10.0)?;
    Ok(format!(
        "100 games + {layers} sentence layers, max gap {worst:.1e}, {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn kernel_oracle() -> Verdict {
    let start = Instant::now();
    let mut enum_worst: f64 = 0.0;
    for players in 2..=10usize {
        for seed in 0..5u64 {
            let game = random_game(players, 77 * players as u64 + seed);
            let exact = exact_shapley(&game, 12).map_err(|e| e.to_string())?;
            let kernel = kernel_shap(&game, Sampling::Enumerate, 1e-6).map_err(|e| e.to_string())?;
            enum_worst = enum_worst.max(max_abs_diff(&kernel.values, &exact));
        }
    }
    check(
        enum_worst <= 1e-6,
        format!("full-enumeration kernel off by {enum_worst:e}"),
    )?;
    let mut sample_worst: f64 = 0.0;
    for seed in [7u64, 8, 9] {
        let game = random_game(8, seed);
        let exact = exact_shapley(&game, 12).map_err(|e| e.to_string())?;
        let out = kernel_shap(
            &game,
            Sampling::Sample {
                samples: 2048,
                seed: 42,
            },
            1e-6,
        )
        .map_err(|e| e.to_string())?;
        sample_worst = sample_worst.max(max_abs_diff(&out.values, &exact));
    }
    check(sample_worst <= 0.05, format!("sampled kernel off by {sample_worst:e}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!(
        "enumerated max-abs {enum_worst:.1e} (M 2..10), sampled max-abs {sample_worst:.1e} (M 8, 2048 draws)"
    ))
}

fn axioms() -> Verdict {
    let mut dummy_worst: f64 = 0.0;
    let mut sym_worst: f64 = 0.0;
    let mut lin_worst: f64 = 0.0;
    for seed in 0..20u64 {
        let players = 2 + (seed % 7) as usize;
        let base = random_game(players, seed);
        let dummy = (seed as usize) % players;
        let g = TabulatedGame::from_fn(players, |s| base.values()[s.without(dummy).0 as usize]);
        dummy_worst = dummy_worst.max(exact_shapley(&g, 12).unwrap()[dummy].abs());

        // Swapping players 0 and 1 maps the game onto itself.
        let swap = |s: Coalition| {
            let (a, b) = (s.contains(0), s.contains(1));
            let mut t = s.without(0).without(1);
            if a {
                t = t.with(1);
            }
            if b {
                t = t.with(0);
            }
            t
        };
        let g = TabulatedGame::from_fn(players, |s| {
            base.values()[s.0 as usize] + base.values()[swap(s).0 as usize]
        });
        let phi = exact_shapley(&g, 12).unwrap();
        sym_worst = sym_worst.max((phi[0] - phi[1]).abs());

        let other = random_game(players, seed + 500);
        let sum = TabulatedGame::from_fn(players, |s| base.values()[s.0 as usize] + other.values()[s.0 as usize]);
        let lhs = exact_shapley(&sum, 12).unwrap();
        let rhs: Vec<f64> = exact_shapley(&base, 12)
            .unwrap()
            .iter()
            .zip(exact_shapley(&other, 12).unwrap())
            .map(|(x, y)| x + y)
            .collect();
        lin_worst = lin_worst.max(max_abs_diff(&lhs, &rhs));
    }
    check(dummy_worst <= 1e-12, format!("dummy {dummy_worst:e}"))?;
    check(sym_worst <= 1e-9, format!("symmetry {sym_worst:e}"))?;
    check(lin_worst <= 1e-9, format!("linearity {lin_worst:e}"))?;
    Ok(format!(
        "dummy {dummy_worst:.1e}, symmetry {sym_worst:.1e}, linearity {lin_worst:.1e} over 20 games"
    ))
}

fn interventions(b: &Bundle) -> Verdict {
    let config = ExplainerConfig::default();
    let mut worst: f64 = 0.0;
    let mut coalitions = 0usize;
    for (_, sentence) in DEMO_SENTENCES {
        let phrases = extract_phrases(sentence, &b.lexicon).map_err(|e| e.to_string())?;
        let ctx = SentenceContext::new(&b.model, &b.vocab, phrases).map_err(|e| e.to_string())?;
        let vi = ctx
            .value_function(LayerTarget::Input, &ctx.phrase_tokens, &config)
            .unwrap();
        let ve = ctx
            .value_function(LayerTarget::Embedding, &ctx.phrase_tokens, &config)
            .unwrap();
        let gi = MaskingGame::new(&vi, ctx.phrase_tokens.clone()).unwrap();
        let ge = MaskingGame::new(&ve, ctx.phrase_tokens.clone()).unwrap();
        for bits in 0..1u64 << gi.players() {
            let c = Coalition(bits);
            worst = worst.max((gi.value(c).unwrap() - ge.value(c).unwrap()).abs());
            coalitions += 1;
        }
        let trace = b.model.forward(&ctx.tokens.ids()).unwrap();
        let from_emb = b.model.forward_from_embeddings(&trace.embedding_out).unwrap();
        check(from_emb.logits == trace.logits, "embedding identity is not bit-exact")?;
        for (layer, hidden) in trace.hidden.iter().enumerate() {
            let out = b.model.forward_with_hidden_override(layer, hidden).unwrap();
            check(
                out.logits.to_vec() == trace.logits,
                format!("hidden identity at layer {layer} is not bit-exact"),
            )?;
        }
    }
    check(worst <= 1e-9, format!("input/embedding gap {worst:e}"))?;
    Ok(format!(
        "{coalitions} coalitions, input/embedding max gap {worst:.1e}; identities bit-exact"
    ))
}

fn aggregation(b: &Bundle) -> Verdict {
    let config = ExplainerConfig {
        layer_targets: Some(LayerTarget::all(b.model.config.n_layers)),
        ..ExplainerConfig::default()
    };
    let explainer = Explainer::new(&b.model, &b.vocab, &b.lexicon, config).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    let mut phrases = 0;
    for sentence in [S1, S2] {
        let result = explainer.explain(sentence).map_err(|e| e.to_string())?;
        let mut sum = vec![0.0; result.phrases.len()];
        for layer in &result.layers {
            for (s, v) in sum.iter_mut().zip(&layer.attribution.values) {
                *s += v;
            }
        }
        check(
            sum == result.aggregated,
            "aggregated vector differs from the per-layer sum",
        )?;
        for layer in &result.layers {
            for w in &layer.words {
                worst = worst.max((w.phrase_total - (w.attribution.v_full - w.attribution.v_empty)).abs());
                phrases += 1;
            }
        }
    }
    check(worst <= 1e-9, format!("word sub-game gap {worst:e}"))?;
    Ok(format!("sum exact; {phrases} word sub-games, max gap {worst:.1e}"))
}

fn numerics(b: &Bundle) -> Verdict {
    let mut grad_worst: f64 = 0.0;
    for (heads, seed) in [(1, 5), (2, 11), (4, 3)] {
        let model = common::tiny_model(4, heads, seed);
        let (err, at) = common::max_gradient_error(&model, &common::gradient_corpus());
        check(err <= 1e-4, format!("gradient error {err:e} at {at}"))?;
        grad_worst = grad_worst.max(err);
    }
    let oracle_model = load_weights(include_str!("data/forward_oracle.weights")).map_err(|e| e.to_string())?;
    let trace = oracle_model.forward(&[1, 2]).map_err(|e| e.to_string())?;
    let o = common::oracle();
    let fwd = max_abs_diff(&trace.logits, &o.logits)
        .max(max_abs_diff(
            &trace.hidden[0].iter().copied().collect::<Vec<_>>(),
            &o.hidden,
        ))
        .max(max_abs_diff(
            &trace.attention[0][0].iter().copied().collect::<Vec<_>>(),
            &o.attention,
        ))
        .max((trace.prob_positive - o.prob_positive).abs());
    check(fwd <= 1e-12, format!("forward oracle off by {fwd:e}"))?;
    let mut rows: f64 = 0.0;
    for (_, sentence) in DEMO_SENTENCES {
        let ids = tokenize(sentence, &b.vocab).unwrap().ids();
        rows = rows.max(max_attention_row_error(&b.model.forward(&ids).unwrap()));
    }
    check(rows <= 1e-6, format!("attention row sum off by {rows:e}"))?;
    Ok(format!(
        "gradient rel err {grad_worst:.1e}, forward oracle {fwd:.1e}, attention rows {rows:.1e}"
    ))
}

fn training() -> Verdict {
    let vocab = assets::vocab().map_err(|e| e.to_string())?;
    let examples = tokenize_corpus(&assets::corpus().unwrap(), &vocab).map_err(|e| e.to_string())?;
    check(examples.len() == 64, format!("corpus has {} sentences", examples.len()))?;
    let config = TrainConfig::default();
    let start = Instant::now();
    let init = Model::init(ModelConfig::with_vocab(vocab.len()), config.seed).unwrap();
    let first = train_classifier(&init, &examples, &config).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let second = train_classifier(&init, &examples, &config).map_err(|e| e.to_string())?;
    check(
        first.final_accuracy >= 0.90,
        format!("accuracy {}", first.final_accuracy),
    )?;
    within(elapsed, 60.0)?;
    check(
        save_weights(&first.model) == save_weights(&second.model),
        "two runs with one seed disagree",
    )?;
    Ok(format!(
        "accuracy {:.3} in {:.2}s, repeat run identical",
        first.final_accuracy,
        elapsed.as_secs_f64()
    ))
}

fn golden_phrases(b: &Bundle) -> Verdict {
    let s2 = extract_phrases(S2, &b.lexicon).map_err(|e| e.to_string())?;
    check(
        s2.phrases[0].kind == PhraseKind::Sent && s2.phrases[0].word_end + 1 == s2.words.len(),
        "S2 index 0 is not the sentence",
    )?;
    let mut rest: Vec<String> = s2.texts()[1..].iter().map(|t| t.to_lowercase()).collect();
    rest.sort();
    check(
        rest == ["forget the movie", "read the book", "the book", "the movie"],
        format!("S2 sub-phrases {rest:?}"),
    )?;
    let s1 = extract_phrases(S1, &b.lexicon).map_err(|e| e.to_string())?;
    let texts: Vec<String> = s1.texts().iter().map(|t| t.to_lowercase()).collect();
    for want in [
        "neither parker",
        "a typical romantic lead",
        "they",
        "a fresh, quirky charm",
        "to the formula",
        "the formula",
    ] {
        check(texts.iter().any(|t| t == want), format!("S1 lacks {want:?}"))?;
    }
    Ok(format!(
        "S2 exact ({} phrases), S1 has all six named phrases of {}",
        s2.len(),
        s1.len()
    ))
}

fn baseline_contrast(b: &Bundle) -> Verdict {
    let explainer =
        Explainer::new(&b.model, &b.vocab, &b.lexicon, ExplainerConfig::default()).map_err(|e| e.to_string())?;
    let base = explainer.baseline(S1).map_err(|e| e.to_string())?;
    let qui = base.labels.iter().position(|l| l == "qui");
    let rky = base.labels.iter().position(|l| l == "##rky");
    let (qui, rky) = match (qui, rky) {
        (Some(q), Some(r)) if q != r => (q, r),
        _ => return Err(format!("baseline players {:?}", base.labels)),
    };
    check(
        base.attribution.values.len() == base.labels.len(),
        "one value per token",
    )?;
    let result = explainer.explain(S1).map_err(|e| e.to_string())?;
    let charm: Vec<usize> = result
        .phrases
        .phrases
        .iter()
        .enumerate()
        .filter(|(_, p)| p.text == "a fresh, quirky charm")
        .map(|(i, _)| i)
        .collect();
    check(
        charm.len() == 1,
        format!("{} phrase players for the charm NP", charm.len()),
    )?;
    for layer in &result.layers {
        check(
            layer.attribution.values.len() == result.phrases.len(),
            "one value per phrase",
        )?;
    }
    Ok(format!(
        "baseline: qui {:+.4}, ##rky {:+.4} as separate players; phrase path: one value {:+.4}",
        base.attribution.values[qui], base.attribution.values[rky], result.aggregated[charm[0]]
    ))
}

fn determinism(b: &Bundle) -> Verdict {
    let run = || assets::demo_outputs(&b.model, &b.vocab, &b.lexicon, ExplainerConfig::default());
    let first = run().map_err(|e| e.to_string())?;
    let second = run().map_err(|e| e.to_string())?;
    check(first == second, "demo outputs differ between runs")?;
    let mut reports = 0;
    for f in first.iter().filter(|f| f.name.ends_with(".report")) {
        let report = parse_document(&f.contents).map_err(|e| format!("{}: {e}", f.name))?;
        report.validate().map_err(|e| format!("{}: {e}", f.name))?;
        reports += 1;
    }
    check(reports == 3, format!("{reports} reports"))?;
    Ok(format!(
        "{} files byte-identical across two runs, {reports} reports validate",
        first.len()
    ))
}

fn main() -> ExitCode {
    let b = bundle();
    let criteria: [(&str, &dyn Fn() -> Verdict); 10] = [
        ("shapley efficiency", &|| efficiency(&b)),
        ("kernel vs exact oracle", &kernel_oracle),
        ("axiom suite", &axioms),
        ("intervention oracle", &|| interventions(&b)),
        ("aggregation laws", &|| aggregation(&b)),
        ("model numerics", &|| numerics(&b)),
        ("training gate", &training),
        ("golden phrases", &|| golden_phrases(&b)),
        ("baseline contrast", &|| baseline_contrast(&b)),
        ("end-to-end determinism", &|| determinism(&b)),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("acceptance {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failures += 1;
                println!("acceptance {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
