//! Skip-gram word2vec training over the normalized corpus and encoding of
//! questions as fixed-size `max_len x dim` matrices.
//!
//! The trainer optimizes the negative-sampling objective with plain SGD and
//! a linearly decayed learning rate. It is single-threaded on purpose:
//! identical seeds yield bitwise-identical embeddings.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Vocabulary, PAD_ID};
use crate::rng;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EmbeddingConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_negatives")]
    pub negatives: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_dim() -> usize {
    100
}
fn default_window() -> usize {
    2
}
fn default_epochs() -> usize {
    100
}
fn default_negatives() -> usize {
    5
}
fn default_learning_rate() -> f64 {
    0.025
}
fn default_max_len() -> usize {
    21
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: default_dim(),
            window: default_window(),
            epochs: default_epochs(),
            negatives: default_negatives(),
            learning_rate: default_learning_rate(),
            max_len: default_max_len(),
        }
    }
}

/// One dense vector per vocabulary entry. Row 0 (PAD) is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_raw(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Shape {
                expected: format!("{rows}x{dim}"),
                got: format!("{} values", data.len()),
            });
        }
        Ok(Self { dim, data })
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn raw(&self) -> &[f64] {
        &self.data
    }
}

/// A question encoded as a `max_len x dim` row-major matrix; rows past
/// `length` are zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSample {
    pub data: Vec<f64>,
    pub length: usize,
    pub max_len: usize,
    pub dim: usize,
}

/// Skip-gram (center, context) pairs within one question.
/// PAD ids never participate.
pub fn generate_skipgram_pairs(ids: &[usize], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    if window == 0 {
        return pairs;
    }
    for (i, &center) in ids.iter().enumerate() {
        if center == PAD_ID {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(ids.len().saturating_sub(1));
        for (j, &context) in ids.iter().enumerate().take(hi + 1).skip(lo) {
            if j == i || context == PAD_ID {
                continue;
            }
            pairs.push((center, context));
        }
    }
    pairs
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative-sampling loss of one skip-gram pair:
/// `-ln s(v.u_ctx) - sum_j ln s(-v.u_neg_j)`.
pub fn pair_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -sigmoid(dot(center, context)).max(f64::MIN_POSITIVE).ln();
    for neg in negatives {
        loss -= sigmoid(-dot(center, neg)).max(f64::MIN_POSITIVE).ln();
    }
    loss
}

/// Analytic gradients of [`pair_loss`] with respect to the center vector,
/// the context vector, and each negative vector.
pub fn pair_grads(
    center: &[f64],
    context: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = center.len();
    let mut grad_center = vec![0.0; dim];
    let mut grad_context = vec![0.0; dim];
    let mut grad_negs = Vec::with_capacity(negatives.len());

    let g_pos = sigmoid(dot(center, context)) - 1.0;
    for d in 0..dim {
        grad_center[d] += g_pos * context[d];
        grad_context[d] = g_pos * center[d];
    }
    for neg in negatives {
        let g_neg = sigmoid(dot(center, neg));
        let mut grad_n = vec![0.0; dim];
        for d in 0..dim {
            grad_center[d] += g_neg * neg[d];
            grad_n[d] = g_neg * center[d];
        }
        grad_negs.push(grad_n);
    }
    (grad_center, grad_context, grad_negs)
}

/// Trained embeddings plus the mean pair loss of each epoch.
#[derive(Debug, Clone)]
pub struct Word2VecTraining {
    pub embeddings: EmbeddingMatrix,
    pub epoch_loss: Vec<f64>,
}

/// Cumulative unigram^(3/4) table for negative sampling.
struct NegativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    fn build(id_counts: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(id_counts.len());
        let mut total = 0.0;
        for (id, &c) in id_counts.iter().enumerate() {
            if id != PAD_ID && c > 0 {
                total += (c as f64).powf(0.75);
            }
            cumulative.push(total);
        }
        Self { cumulative, total }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        let r = rng.gen::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= r)
    }
}

/// Train skip-gram embeddings over normalized token-id lists.
///
/// `vocab_size` fixes the row count; id frequencies for the negative
/// sampler are taken from the corpus itself. Returns the input-side
/// vectors. The PAD row stays exactly zero.
pub fn train_word2vec(
    corpus_ids: &[Vec<usize>],
    vocab_size: usize,
    cfg: &EmbeddingConfig,
    seed: u64,
) -> Result<Word2VecTraining> {
    if vocab_size < 2 {
        return Err(Error::InvalidArgument(
            "vocabulary must have at least 2 entries".into(),
        ));
    }
    if corpus_ids.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    let mut id_counts = vec![0u64; vocab_size];
    for ids in corpus_ids {
        for &id in ids {
            if id >= vocab_size {
                return Err(Error::InvalidArgument(format!(
                    "token id {id} outside vocabulary of size {vocab_size}"
                )));
            }
            id_counts[id] += 1;
        }
    }

    let pairs_per_question: Vec<Vec<(usize, usize)>> = corpus_ids
        .iter()
        .map(|ids| generate_skipgram_pairs(ids, cfg.window))
        .collect();
    let total_pairs: usize = pairs_per_question.iter().map(Vec::len).sum();
    if total_pairs == 0 {
        return Err(Error::InvalidArgument(
            "corpus yields no skip-gram pairs".into(),
        ));
    }

    let table = NegativeTable::build(&id_counts);
    let dim = cfg.dim;
    let mut rng = rng::substream(seed, rng::stream::WORD2VEC);

    let bound = 0.5 / dim as f64;
    let mut input = EmbeddingMatrix::zeros(vocab_size, dim);
    let mut output = EmbeddingMatrix::zeros(vocab_size, dim);
    for id in 0..vocab_size {
        if id == PAD_ID {
            continue;
        }
        for v in input.row_mut(id) {
            *v = rng.gen_range(-bound..bound);
        }
        for v in output.row_mut(id) {
            *v = rng.gen_range(-bound..bound);
        }
    }

    let schedule_total = (cfg.epochs * total_pairs) as f64;
    let mut processed = 0usize;
    let mut question_order: Vec<usize> = (0..corpus_ids.len()).collect();
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut grad_center = vec![0.0; dim];

    for _ in 0..cfg.epochs {
        rand::seq::SliceRandom::shuffle(&mut question_order[..], &mut rng);
        let mut loss_sum = 0.0;
        for &q in &question_order {
            for &(center, context) in &pairs_per_question[q] {
                let lr = cfg.learning_rate
                    * (1.0 - processed as f64 / schedule_total).max(1e-4);
                processed += 1;

                // Positive term.
                let s_pos = sigmoid(dot(input.row(center), output.row(context)));
                loss_sum -= s_pos.max(f64::MIN_POSITIVE).ln();
                let g_pos = s_pos - 1.0;
                grad_center.iter_mut().for_each(|g| *g = 0.0);
                {
                    let ctx = output.row(context);
                    for d in 0..dim {
                        grad_center[d] += g_pos * ctx[d];
                    }
                }
                {
                    let c_row = input.row(center).to_vec();
                    let ctx = output.row_mut(context);
                    for d in 0..dim {
                        ctx[d] -= lr * g_pos * c_row[d];
                    }
                }

                // Negative terms; a draw hitting the true context is skipped.
                for _ in 0..cfg.negatives {
                    let neg = table.sample(&mut rng);
                    if neg == context {
                        continue;
                    }
                    let s_neg = sigmoid(dot(input.row(center), output.row(neg)));
                    loss_sum -= (1.0 - s_neg).max(f64::MIN_POSITIVE).ln();
                    let c_row = input.row(center).to_vec();
                    {
                        let n_row = output.row(neg);
                        for d in 0..dim {
                            grad_center[d] += s_neg * n_row[d];
                        }
                    }
                    let n_row = output.row_mut(neg);
                    for d in 0..dim {
                        n_row[d] -= lr * s_neg * c_row[d];
                    }
                }

                let c_row = input.row_mut(center);
                for d in 0..dim {
                    c_row[d] -= lr * grad_center[d];
                }
            }
        }
        epoch_loss.push(loss_sum / total_pairs as f64);
    }

    debug_assert!(input.row(PAD_ID).iter().all(|&v| v == 0.0));
    Ok(Word2VecTraining {
        embeddings: input,
        epoch_loss,
    })
}

/// Encode token ids as a fixed-size matrix: row `t` holds the embedding of
/// `ids[t]`; rows past the question length are zero. Inputs longer than
/// `max_len` are truncated from the tail.
pub fn encode_question(ids: &[usize], emb: &EmbeddingMatrix, max_len: usize) -> EncodedSample {
    let dim = emb.dim();
    let length = ids.len().min(max_len);
    let mut data = vec![0.0; max_len * dim];
    for (t, &id) in ids.iter().take(length).enumerate() {
        data[t * dim..(t + 1) * dim].copy_from_slice(emb.row(id));
    }
    EncodedSample {
        data,
        length,
        max_len,
        dim,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

/// Write the common word-vector text format: a `vocab_size dim` header,
/// then one `token v1 .. vdim` line per vocabulary entry.
pub fn embeddings_to_string(emb: &EmbeddingMatrix, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", emb.rows(), emb.dim());
    for id in 0..emb.rows() {
        let _ = write!(out, "{}", vocab.token(id));
        for v in emb.row(id) {
            let _ = write!(out, " {v}");
        }
        out.push('\n');
    }
    out
}

pub fn save_embeddings(
    path: impl AsRef<Path>,
    emb: &EmbeddingMatrix,
    vocab: &Vocabulary,
) -> Result<()> {
    std::fs::write(path, embeddings_to_string(emb, vocab))?;
    Ok(())
}

/// Parse the word-vector text format back into tokens and vectors.
pub fn parse_embeddings(text: &str, path: &str) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::corpus(path, 1, "missing header"))?;
    let mut parts = header.split_whitespace();
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::corpus(path, 1, "bad vocab_size"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::corpus(path, 1, "bad dim"))?;

    let mut tokens = Vec::with_capacity(rows);
    let mut data = Vec::with_capacity(rows * dim);
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let token = fields
            .next()
            .ok_or_else(|| Error::corpus(path, lineno, "missing token"))?;
        tokens.push(token.to_string());
        let before = data.len();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::corpus(path, lineno, format!("bad value {f:?}")))?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(Error::corpus(
                path,
                lineno,
                format!("expected {dim} values, found {}", data.len() - before),
            ));
        }
    }
    if tokens.len() != rows {
        return Err(Error::corpus(
            path,
            1,
            format!("header claims {rows} rows, found {}", tokens.len()),
        ));
    }
    Ok((tokens, EmbeddingMatrix::from_raw(rows, dim, data)?))
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<(Vec<String>, EmbeddingMatrix)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_embeddings(&text, &path.display().to_string())
}
