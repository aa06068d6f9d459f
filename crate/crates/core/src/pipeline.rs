//! Two-stage orchestration: a coarse CNN over word2vec encodings routes
//! each question to one per-coarse-class linear model over bigram TF-IDF
//! features. Routing is a hard argmax, so a stage-one mistake confines
//! stage two to the wrong finer set; that asymmetry is intentional.
//!
//! Every fitted component (vocabulary, embeddings, vectorizers, models)
//! is trained on the training split alone. Validation samples only steer
//! CNN early stopping and are never oversampled.

use std::path::Path;

use crate::balance::{self, FlatSample};
use crate::cnn::{self, CnnModel};
use crate::config::PipelineConfig;
use crate::container::{self, ByteReader, ByteWriter, BUNDLE_MAGIC};
use crate::corpus::{CoarseId, FinerId, QuestionSample, Taxonomy};
use crate::embedding::{self, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::preprocess::{self, Vocabulary, UNK_ID};
use crate::rng;
use crate::sgd_linear::{self, LinearModel, SgdConfig};
use crate::tfidf::{SparseVector, TfidfVectorizer};

/// Stage-two model for one coarse class.
#[derive(Debug, Clone)]
pub struct FinerStage {
    pub vectorizer: TfidfVectorizer,
    pub model: LinearModel,
}

#[derive(Debug, Clone)]
pub struct PipelineModel {
    pub taxonomy: Taxonomy,
    pub vocabulary: Vocabulary,
    pub embeddings: EmbeddingMatrix,
    pub cnn: CnnModel,
    /// One stage per coarse class, indexed by coarse id.
    pub finer: Vec<FinerStage>,
    /// Fingerprint of the producing configuration.
    pub fingerprint: String,
}

/// One classified question.
#[derive(Debug, Clone)]
pub struct Classification {
    pub coarse: CoarseId,
    pub finer: FinerId,
    pub coarse_probs: Vec<f64>,
    /// Decision scores over the routed class's finer set, in
    /// `taxonomy.finer_ids_of(coarse)` order.
    pub finer_scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PipelineTraining {
    pub model: PipelineModel,
    pub word2vec_loss: Vec<f64>,
    pub cnn_history: cnn::TrainHistory,
    pub synthetic_added: usize,
}

/// Vocabulary ids for already-mapped tokens; unknown tokens become UNK.
pub fn token_ids(tokens: &[String], vocab: &Vocabulary) -> Vec<usize> {
    tokens
        .iter()
        .map(|t| vocab.id_of(t).unwrap_or(UNK_ID))
        .collect()
}

/// Stage-one inputs fitted on the training split alone.
#[derive(Debug, Clone)]
pub struct StageOneData {
    pub vocabulary: Vocabulary,
    pub embeddings: EmbeddingMatrix,
    pub word2vec_loss: Vec<f64>,
    /// Real training encodings followed by any synthetic ones.
    pub train: Vec<FlatSample>,
    pub synthetic_added: usize,
}

/// Fit vocabulary and embeddings on `train`, encode it, and balance the
/// encoded set with SMOTE when enabled.
pub fn prepare_stage_one(
    train: &[QuestionSample],
    config: &PipelineConfig,
    seed: u64,
) -> Result<StageOneData> {
    let token_lists: Vec<Vec<String>> = train
        .iter()
        .map(|s| preprocess::mapped_tokens(&s.text))
        .collect();
    let vocabulary = Vocabulary::build(&token_lists, config.min_count)
        .map_err(|e| e.in_stage("vocabulary"))?;
    let ids: Vec<Vec<usize>> = token_lists
        .iter()
        .map(|l| token_ids(l, &vocabulary))
        .collect();
    let w2v = embedding::train_word2vec(&ids, vocabulary.len(), &config.embedding, seed)
        .map_err(|e| e.in_stage("word2vec"))?;

    let mut flat = Vec::with_capacity(train.len());
    for (s, id_list) in train.iter().zip(&ids) {
        let encoded =
            embedding::encode_question(id_list, &w2v.embeddings, config.embedding.max_len);
        flat.push(FlatSample {
            vector: encoded.data,
            label: s.coarse,
            synthetic: false,
        });
    }

    let mut synthetic_added = 0;
    if config.smote.enabled {
        let balanced =
            balance::balance_to_majority(&flat, config.smote.k, seed, config.smote.debug)
                .map_err(|e| e.in_stage("smote"))?;
        synthetic_added = balanced.samples.len() - flat.len();
        flat = balanced.samples;
    }
    Ok(StageOneData {
        vocabulary,
        embeddings: w2v.embeddings,
        word2vec_loss: w2v.epoch_loss,
        train: flat,
        synthetic_added,
    })
}

/// Encode real samples with already-fitted vocabulary and embeddings.
pub fn encode_real(
    samples: &[QuestionSample],
    vocab: &Vocabulary,
    embeddings: &EmbeddingMatrix,
    max_len: usize,
) -> Vec<FlatSample> {
    samples
        .iter()
        .map(|s| {
            let tokens = preprocess::mapped_tokens(&s.text);
            let ids = token_ids(&tokens, vocab);
            let encoded = embedding::encode_question(&ids, embeddings, max_len);
            FlatSample {
                vector: encoded.data,
                label: s.coarse,
                synthetic: false,
            }
        })
        .collect()
}

fn check_labels(samples: &[QuestionSample], taxonomy: &Taxonomy) -> Result<()> {
    for s in samples {
        if s.coarse >= taxonomy.coarse_count() {
            return Err(Error::InvalidArgument(format!(
                "coarse id {} outside the taxonomy",
                s.coarse
            )));
        }
        let f = s.finer.ok_or_else(|| {
            Error::InvalidArgument(format!("sample {:?} has no finer label", s.text))
        })?;
        if f >= taxonomy.finer_classes().len() || taxonomy.finer_parent(f) != s.coarse {
            return Err(Error::InvalidArgument(format!(
                "finer id {f} does not nest under coarse id {}",
                s.coarse
            )));
        }
    }
    Ok(())
}

fn fit_finer_stage(
    members: &[&QuestionSample],
    classes: &[FinerId],
    cfg: &SgdConfig,
    seed: u64,
) -> Result<FinerStage> {
    let docs: Vec<Vec<String>> = members
        .iter()
        .map(|s| preprocess::mapped_tokens(&s.text))
        .collect();
    let vectorizer = TfidfVectorizer::fit(&docs).map_err(|e| e.in_stage("tfidf"))?;
    let x: Vec<SparseVector> = docs.iter().map(|d| vectorizer.transform(d)).collect();
    let y: Vec<usize> = members.iter().map(|s| s.finer.expect("checked")).collect();
    let training =
        sgd_linear::train_sgd(&x, &y, classes, cfg, seed).map_err(|e| e.in_stage("sgd"))?;
    Ok(FinerStage {
        vectorizer,
        model: training.model,
    })
}

/// Train the full two-stage pipeline on `train`; `val` (may be empty)
/// drives CNN early stopping only.
pub fn train_pipeline(
    train: &[QuestionSample],
    val: &[QuestionSample],
    taxonomy: &Taxonomy,
    config: &PipelineConfig,
) -> Result<PipelineTraining> {
    config.validate()?;
    check_labels(train, taxonomy)?;
    check_labels(val, taxonomy)?;
    for c in 0..taxonomy.coarse_count() {
        if !train.iter().any(|s| s.coarse == c) {
            return Err(Error::InvalidArgument(format!(
                "coarse class {} has no training samples",
                taxonomy.coarse_name(c)
            )));
        }
    }

    let seed = config.seed;
    let stage_one = prepare_stage_one(train, config, seed)?;
    let val_flat = encode_real(
        val,
        &stage_one.vocabulary,
        &stage_one.embeddings,
        config.embedding.max_len,
    );
    let cnn_training = cnn::train_cnn(
        &stage_one.train,
        &val_flat,
        &config.cnn.arch,
        &config.cnn.train,
        config.embedding.max_len,
        config.embedding.dim,
        taxonomy.coarse_count(),
        seed,
    )
    .map_err(|e| e.in_stage("cnn"))?;

    let mut finer = Vec::with_capacity(taxonomy.coarse_count());
    for c in 0..taxonomy.coarse_count() {
        let members: Vec<&QuestionSample> = train.iter().filter(|s| s.coarse == c).collect();
        let classes = taxonomy.finer_ids_of(c);
        let sgd_seed = rng::substream_seed(seed, &format!("sgd-model-{c}"));
        finer.push(fit_finer_stage(&members, &classes, &config.sgd, sgd_seed)?);
    }

    Ok(PipelineTraining {
        model: PipelineModel {
            taxonomy: taxonomy.clone(),
            vocabulary: stage_one.vocabulary,
            embeddings: stage_one.embeddings,
            cnn: cnn_training.model,
            finer,
            fingerprint: config.fingerprint(),
        },
        word2vec_loss: stage_one.word2vec_loss,
        cnn_history: cnn_training.history,
        synthetic_added: stage_one.synthetic_added,
    })
}

/// Refit one coarse class's finer stage in place. Stage one and every
/// other stage are untouched.
pub fn retrain_finer_stage(
    model: &mut PipelineModel,
    train: &[QuestionSample],
    coarse: CoarseId,
    cfg: &SgdConfig,
    seed: u64,
) -> Result<()> {
    if coarse >= model.taxonomy.coarse_count() {
        return Err(Error::InvalidArgument(format!(
            "coarse id {coarse} outside the taxonomy"
        )));
    }
    check_labels(train, &model.taxonomy)?;
    let members: Vec<&QuestionSample> = train.iter().filter(|s| s.coarse == coarse).collect();
    if members.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "coarse class {} has no training samples",
            model.taxonomy.coarse_name(coarse)
        )));
    }
    let classes = model.taxonomy.finer_ids_of(coarse);
    model.finer[coarse] = fit_finer_stage(&members, &classes, cfg, seed)?;
    Ok(())
}

/// Classify one raw question: stage one picks the coarse class, stage two
/// picks a finer class inside it. Unknown tokens degrade to UNK and
/// unseen bigrams drop out, so any input is classifiable.
pub fn classify(model: &PipelineModel, question: &str) -> Result<Classification> {
    let tokens = preprocess::mapped_tokens(question);
    let ids = token_ids(&tokens, &model.vocabulary);
    let encoded = embedding::encode_question(&ids, &model.embeddings, model.cnn.input_len());
    let (coarse, coarse_probs) = cnn::predict_coarse(&model.cnn, &encoded)?;
    let stage = &model.finer[coarse];
    let x = stage.vectorizer.transform(&tokens);
    let (finer, finer_scores) = sgd_linear::predict_finer(&stage.model, &x)?;
    Ok(Classification {
        coarse,
        finer,
        coarse_probs,
        finer_scores,
    })
}

fn write_linear(w: &mut ByteWriter, m: &LinearModel) {
    w.put_usize(m.dim);
    w.put_usize(m.classes.len());
    for &c in &m.classes {
        w.put_usize(c);
    }
    for row in &m.weights {
        w.put_f64_slice(row);
    }
    w.put_f64_slice(&m.bias);
}

fn read_linear(r: &mut ByteReader) -> Result<LinearModel> {
    let dim = r.get_usize()?;
    let n = r.get_usize()?;
    let mut classes = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        classes.push(r.get_usize()?);
    }
    let mut weights = Vec::with_capacity(n.min(1024));
    for _ in 0..n {
        let row = r.get_f64_vec()?;
        if row.len() != dim {
            return Err(Error::Container(format!(
                "weight row holds {} values, model dimension is {dim}",
                row.len()
            )));
        }
        weights.push(row);
    }
    let bias = r.get_f64_vec()?;
    if bias.len() != n {
        return Err(Error::Container(format!(
            "bias holds {} values for {n} classes",
            bias.len()
        )));
    }
    if weights
        .iter()
        .flatten()
        .chain(&bias)
        .any(|v| !v.is_finite())
    {
        return Err(Error::Container("non-finite linear parameter".into()));
    }
    Ok(LinearModel {
        weights,
        bias,
        classes,
        dim,
    })
}

/// Serialize a pipeline to bundle payload bytes (no framing).
pub fn pipeline_payload(model: &PipelineModel) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.put_str(&model.fingerprint);
    w.put_str(&model.taxonomy.to_file_string());
    w.put_str(&model.vocabulary.to_file_string());
    w.put_usize(model.embeddings.rows());
    w.put_usize(model.embeddings.dim());
    w.put_f64_slice(model.embeddings.raw());
    w.put_bytes(&container::cnn_payload(&model.cnn));
    w.put_usize(model.finer.len());
    for stage in &model.finer {
        w.put_str(&stage.vectorizer.to_file_string());
        write_linear(&mut w, &stage.model);
    }
    w.into_payload()
}

pub fn pipeline_from_payload(payload: &[u8]) -> Result<PipelineModel> {
    let mut r = ByteReader::new(payload);
    let fingerprint = r.get_str()?;
    let taxonomy = Taxonomy::parse(&r.get_str()?, "bundle")?;
    let vocabulary = Vocabulary::parse(&r.get_str()?, "bundle")?;
    let rows = r.get_usize()?;
    let dim = r.get_usize()?;
    let raw = r.get_f64_vec()?;
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Container("non-finite embedding value".into()));
    }
    let embeddings = EmbeddingMatrix::from_raw(rows, dim, raw)?;
    let cnn = container::cnn_from_payload(&r.get_bytes()?)?;
    let stage_count = r.get_usize()?;
    if stage_count != taxonomy.coarse_count() {
        return Err(Error::Container(format!(
            "bundle holds {stage_count} finer stages for {} coarse classes",
            taxonomy.coarse_count()
        )));
    }
    let mut finer = Vec::with_capacity(stage_count);
    for c in 0..stage_count {
        let vectorizer = TfidfVectorizer::parse(&r.get_str()?, "bundle")?;
        let model = read_linear(&mut r)?;
        if model.classes != taxonomy.finer_ids_of(c) {
            return Err(Error::Container(format!(
                "stage {c} class set does not match the taxonomy"
            )));
        }
        if model.dim != vectorizer.dim() {
            return Err(Error::Container(format!(
                "stage {c} model dimension {} does not match its vectorizer ({})",
                model.dim,
                vectorizer.dim()
            )));
        }
        finer.push(FinerStage { vectorizer, model });
    }
    r.finish()?;
    Ok(PipelineModel {
        taxonomy,
        vocabulary,
        embeddings,
        cnn,
        finer,
        fingerprint,
    })
}

pub fn save_pipeline(model: &PipelineModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(
        path,
        container::seal(BUNDLE_MAGIC, &pipeline_payload(model)),
    )?;
    Ok(())
}

pub fn load_pipeline(path: impl AsRef<Path>) -> Result<PipelineModel> {
    let bytes = std::fs::read(path)?;
    pipeline_from_payload(container::unseal(BUNDLE_MAGIC, &bytes)?)
}
