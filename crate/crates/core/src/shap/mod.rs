//! Coalition games over phrases and tokens, and their Shapley values.

mod exact;
mod explain;
mod game;
mod kernel;
mod value;

pub use exact::{exact_shapley, shapley_from_table, value_table};
pub use explain::{
    aggregate_layers, aggregate_phrase, shapley, Attribution, BaselineResult, Explainer, ExplainerConfig,
    LayerAttribution, Method, MethodChoice, SentenceContext, ShapResult, WordAttribution, MAX_EXACT_THRESHOLD,
};
pub use game::{Coalition, Game, TabulatedGame, MAX_PLAYERS};
pub use kernel::{kernel_shap, kernel_weight, KernelDiagnostics, KernelOutput, Sampling};
pub use value::{
    phrase_token_sets, token_mask_of, EncoderBaseline, ExplainedOutput, LayerTarget, MaskingGame, TokenMask,
    ValueFunction,
};
