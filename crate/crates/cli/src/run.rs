use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use layerlens::assets;
use layerlens::attention::{sentence_attention, AttentionAggregationConfig};
use layerlens::model::{self, Model, ModelConfig, TrainConfig};
use layerlens::phrase::{load_external_phrases, Lexicon, PhraseSet};
use layerlens::report::{
    build_report, format_value, render_bars, render_heatmap, render_outputs, slugify, OutputFile, OutputFormats,
};
use layerlens::shap::{Explainer, ExplainerConfig, MethodChoice};
use layerlens::tokenizer::Vocab;
use layerlens::{Error, Result};
use rayon::prelude::*;

use crate::args::*;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Explain(a) => explain(a),
        Command::Baseline(a) => baseline(a),
        Command::Attention(a) => attention(a),
        Command::Train(a) => train(a),
        Command::Demo(a) => demo(a),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary file in the destination directory, then renames.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(tmp.path(), e))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn write_files(dir: &Path, files: &[OutputFile]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for f in files {
        let path = dir.join(&f.name);
        write_atomic(&path, &f.contents)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

struct Loaded {
    model: Model,
    vocab: Vocab,
    lexicon: Lexicon,
}

fn load(args: &ModelArgs) -> Result<Loaded> {
    let vocab = match &args.vocab {
        Some(p) => Vocab::load(&read(p)?)?,
        None => assets::vocab()?,
    };
    let model = match &args.model {
        Some(p) => model::load_weights(&read(p)?)?,
        None => assets::model()?,
    };
    let lexicon = match &args.lexicon {
        Some(p) => Lexicon::load(&read(p)?)?,
        None => assets::lexicon()?,
    };
    Ok(Loaded { model, vocab, lexicon })
}

/// `(slug, sentence, external phrase set)` for every sentence to process.
fn sentences(args: &InputArgs) -> Result<Vec<(String, String, Option<PhraseSet>)>> {
    if let Some(path) = &args.input {
        let text = read(path)?;
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if lines.is_empty() {
            return Err(Error::Input(format!("{} contains no sentences", path.display())));
        }
        return Ok(lines
            .iter()
            .enumerate()
            .map(|(i, l)| (format!("{:03}-{}", i + 1, slugify(l)), l.to_string(), None))
            .collect());
    }
    let external = match &args.phrases {
        Some(p) => Some(load_external_phrases(&read(p)?)?),
        None => None,
    };
    let sentence = match (&args.sentence, &external) {
        (Some(s), Some(set)) if s != &set.sentence => {
            return Err(Error::Input(format!(
                "sentence {s:?} differs from the phrase document's {:?}",
                set.sentence
            )))
        }
        (Some(s), _) => s.clone(),
        (None, Some(set)) => set.sentence.clone(),
        (None, None) => return Err(Error::Input("no sentence given".into())),
    };
    Ok(vec![(slugify(&sentence), sentence, external)])
}

fn explainer_config(shap: &ShapArgs) -> ExplainerConfig {
    ExplainerConfig {
        method: method_choice(shap.method),
        kernel_samples: shap.samples,
        seed: shap.seed,
        output: shap.output,
        exact_threshold: shap.exact_threshold,
        ..ExplainerConfig::default()
    }
}

fn method_choice(m: MethodArg) -> MethodChoice {
    match m {
        MethodArg::Auto => MethodChoice::Auto,
        MethodArg::Exact => MethodChoice::Exact,
        MethodArg::Kernel => MethodChoice::Kernel,
    }
}

fn explain(args: ExplainArgs) -> Result<()> {
    let loaded = load(&args.model)?;
    let mut config = explainer_config(&args.shap);
    if !args.layers.is_empty() {
        config.layer_targets = Some(args.layers.clone());
    }
    config.word_level = !args.no_word_level;
    let explainer = Explainer::new(&loaded.model, &loaded.vocab, &loaded.lexicon, config)?;
    let formats = OutputFormats {
        report: args.formats.contains(&Format::Report),
        svg: args.formats.contains(&Format::Svg),
        html: args.formats.contains(&Format::Html),
    };
    let attention_cfg = AttentionAggregationConfig::default();
    let jobs = sentences(&args.input)?;
    let results: Vec<Result<(Vec<OutputFile>, Vec<String>)>> = jobs
        .into_par_iter()
        .map(|(slug, sentence, external)| {
            let phrases = match external {
                Some(p) => p,
                None => explainer.phrases(&sentence)?,
            };
            let report = build_report(&explainer, phrases, args.with_baseline, Some(&attention_cfg))?;
            let summary = report
                .phrases
                .iter()
                .zip(&report.aggregated)
                .map(|(p, v)| format!("{slug}\t{}\t{}\t{}", p.index, p.text, format_value(*v)))
                .collect();
            Ok((render_outputs(&slug, &report, formats)?, summary))
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    for r in results {
        let (files, summary) = r?;
        write_files(&args.input.out, &files)?;
        for line in summary {
            writeln!(stdout, "{line}").map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn baseline(args: BaselineArgs) -> Result<()> {
    let loaded = load(&args.model)?;
    let explainer = Explainer::new(
        &loaded.model,
        &loaded.vocab,
        &loaded.lexicon,
        explainer_config(&args.shap),
    )?;
    let mut stdout = std::io::stdout().lock();
    for (slug, sentence, _) in sentences(&args.input)? {
        let result = explainer.baseline(&sentence)?;
        let svg = render_bars(&result.labels, &result.attribution.values, "Token-level baseline")?;
        write_files(
            &args.input.out,
            &[OutputFile {
                name: format!("{slug}.baseline.bars.svg"),
                contents: svg,
            }],
        )?;
        for (token, v) in result.labels.iter().zip(&result.attribution.values) {
            writeln!(stdout, "{slug}\t{token}\t{}", format_value(*v)).map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn attention(args: AttentionArgs) -> Result<()> {
    let loaded = load(&args.model)?;
    let cfg = AttentionAggregationConfig {
        layers: args.layers.into(),
        heads: args.heads.into(),
    };
    let mut stdout = std::io::stdout().lock();
    for (slug, sentence, external) in sentences(&args.input)? {
        let phrases = match external {
            Some(p) => p,
            None => layerlens::phrase::extract_phrases(&sentence, &loaded.lexicon)?,
        };
        let matrix = sentence_attention(&loaded.model, &loaded.vocab, &phrases, &cfg)?;
        let svg = render_heatmap(&matrix, "Attention scores by phrases")?;
        write_files(
            &args.input.out,
            &[OutputFile {
                name: format!("{slug}.attention.svg"),
                contents: svg,
            }],
        )?;
        for (p, row) in matrix.scores.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| format_value(*v)).collect();
            writeln!(stdout, "{slug}\t{p}\t{}\t{}", matrix.labels[p], cells.join("\t"))
                .map_err(|e| Error::io("<stdout>", e))?;
        }
    }
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let vocab = match &args.vocab {
        Some(p) => Vocab::load(&read(p)?)?,
        None => assets::vocab()?,
    };
    let corpus = match &args.corpus {
        Some(p) => model::load_corpus(&read(p)?)?,
        None => assets::corpus()?,
    };
    let defaults = TrainConfig::default();
    let config = TrainConfig {
        seed: args.seed,
        epochs: args.epochs.unwrap_or(defaults.epochs),
        learning_rate: args.learning_rate.unwrap_or(defaults.learning_rate),
        batch_size: args.batch_size.unwrap_or(defaults.batch_size),
        ..defaults
    };
    let examples = model::tokenize_corpus(&corpus, &vocab)?;
    let init = Model::init(ModelConfig::with_vocab(vocab.len()), config.seed)?;
    let outcome = model::train_classifier(&init, &examples, &config)?;
    for (epoch, loss) in outcome.epoch_losses.iter().enumerate() {
        eprintln!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    write_atomic(&args.out, &model::save_weights(&outcome.model))?;
    println!("accuracy\t{:.4}", outcome.final_accuracy);
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn demo(args: DemoArgs) -> Result<()> {
    let model = assets::model()?;
    let vocab = assets::vocab()?;
    let lexicon = assets::lexicon()?;
    let config = ExplainerConfig {
        seed: args.seed,
        method: method_choice(args.method),
        kernel_samples: args.samples,
        ..ExplainerConfig::default()
    };
    let files = assets::demo_outputs(&model, &vocab, &lexicon, config)?;
    write_files(&args.out, &files)?;
    let out: PathBuf = args.out;
    println!("{} files in {}", files.len(), out.display());
    Ok(())
}
