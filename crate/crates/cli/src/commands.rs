//! Subcommand implementations. All user-visible output is deterministic
//! for a fixed config and seed: no timestamps, no wall-clock anywhere.

use std::io::{BufRead, Write};

use hqc_core::corpus::{self, Taxonomy};
use hqc_core::preprocess::{self, Vocabulary};
use hqc_core::{eval, gradcheck, pipeline};

use crate::config::RunConfig;
use crate::CliError;

fn load_inputs(config: &RunConfig) -> Result<(Taxonomy, Vec<corpus::QuestionSample>), CliError> {
    let taxonomy = Taxonomy::load(&config.taxonomy)?;
    let samples = corpus::load_corpus(&config.corpus, &taxonomy)?;
    Ok((taxonomy, samples))
}

/// Validate the corpus and print class and vocabulary statistics.
pub fn prepare(config: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let (taxonomy, samples) = load_inputs(config)?;
    let token_lists: Vec<Vec<String>> = samples
        .iter()
        .map(|s| preprocess::mapped_tokens(&s.text))
        .collect();
    let vocabulary = Vocabulary::build(&token_lists, config.pipeline.min_count)?;

    writeln!(out, "corpus: {} ({} questions)", config.corpus.display(), samples.len())?;
    writeln!(
        out,
        "taxonomy: {} coarse classes, {} finer classes",
        taxonomy.coarse_count(),
        taxonomy.finer_classes().len()
    )?;

    let counts = corpus::class_counts(&samples);
    let finer_labeled = samples.iter().filter(|s| s.finer.is_some()).count();
    writeln!(out, "finer labels present: {finer_labeled}/{}", samples.len())?;
    for (coarse, count) in &counts {
        writeln!(out, "  {}\t{count}", taxonomy.coarse_name(*coarse))?;
    }

    writeln!(
        out,
        "vocabulary: {} tokens kept at min_count {} ({} reserved)",
        vocabulary.len(),
        vocabulary.min_count(),
        vocabulary.len() - vocabulary.non_reserved_len()
    )?;
    writeln!(out, "most frequent tokens:")?;
    let reserved = vocabulary.len() - vocabulary.non_reserved_len();
    for id in reserved..vocabulary.len().min(reserved + 10) {
        writeln!(out, "  {}\t{}", vocabulary.token(id), vocabulary.count(id))?;
    }
    Ok(())
}

/// Train the full pipeline on the whole corpus and save the bundle.
pub fn train(config: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let (taxonomy, samples) = load_inputs(config)?;
    let training = pipeline::train_pipeline(&samples, &[], &taxonomy, &config.pipeline)?;
    pipeline::save_pipeline(&training.model, &config.output.model)?;

    writeln!(out, "trained on {} questions", samples.len())?;
    writeln!(out, "synthetic samples added: {}", training.synthetic_added)?;
    if let Some(loss) = training.word2vec_loss.last() {
        writeln!(out, "word2vec final epoch loss: {loss:.6}")?;
    }
    writeln!(
        out,
        "cnn epochs run: {} (kept epoch {})",
        training.cnn_history.train_loss.len(),
        training.cnn_history.best_epoch
    )?;
    writeln!(out, "finer models: {}", training.model.finer.len())?;
    writeln!(out, "model bundle: {}", config.output.model.display())?;
    Ok(())
}

/// Cross-validate, write the machine report, print the human one.
pub fn evaluate(config: &RunConfig, out: &mut impl Write) -> Result<(), CliError> {
    let (taxonomy, samples) = load_inputs(config)?;
    let cv = eval::cross_validate(&samples, &taxonomy, &config.pipeline)?;

    let machine = eval::machine_report(&cv, &taxonomy);
    std::fs::write(&config.output.report, machine).map_err(hqc_core::Error::from)?;

    write!(out, "{}", eval::human_report(&cv, &taxonomy))?;
    writeln!(out, "machine report: {}", config.output.report.display())?;
    Ok(())
}

/// Classify one question per input line with a saved bundle.
pub fn predict(
    config: &RunConfig,
    input: &mut impl BufRead,
    out: &mut impl Write,
) -> Result<(), CliError> {
    let model = pipeline::load_pipeline(&config.output.model)?;
    for line in input.lines() {
        let line = line.map_err(hqc_core::Error::from)?;
        let question = line.trim();
        if question.is_empty() {
            continue;
        }
        let got = pipeline::classify(&model, question)?;
        writeln!(
            out,
            "{question}\t{}\t{}\t{:.6}",
            model.taxonomy.coarse_name(got.coarse),
            model.taxonomy.finer_name(got.finer),
            got.coarse_probs[got.coarse]
        )?;
    }
    Ok(())
}

/// Run every analytic-vs-numeric gradient check; error if any fails.
pub fn gradcheck(seed: u64, out: &mut impl Write) -> Result<(), CliError> {
    let results = gradcheck::run_all_checks(seed);
    for r in &results {
        writeln!(
            out,
            "{}\tmax rel error {:.3e}\t{}",
            r.name,
            r.max_rel_error,
            if r.passed { "ok" } else { "FAIL" }
        )?;
    }
    if gradcheck::all_passed(&results) {
        Ok(())
    } else {
        Err(CliError::Core(hqc_core::Error::NonFinite {
            context: "gradient check exceeded tolerance".into(),
        }))
    }
}
