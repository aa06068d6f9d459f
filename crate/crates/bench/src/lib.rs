//! Shared fixtures for the benchmark suite: one small synthetic corpus
//! carried through every preprocessing stage, so each benchmark starts
//! from realistic inputs without redoing upstream work.

use hqc_core::balance::FlatSample;
use hqc_core::embedding::{self, EmbeddingConfig, EmbeddingMatrix};
use hqc_core::preprocess::{self, Vocabulary};
use hqc_core::{pipeline, synthetic};

pub struct BenchData {
    pub token_lists: Vec<Vec<String>>,
    pub token_ids: Vec<Vec<usize>>,
    pub vocab_size: usize,
    pub embedding: EmbeddingConfig,
    pub embeddings: EmbeddingMatrix,
    /// Encoded questions with coarse labels, in corpus order.
    pub flat: Vec<FlatSample>,
    pub labels: Vec<usize>,
}

pub fn bench_data() -> BenchData {
    let sc = synthetic::generate_corpus(&[30, 25, 25, 25, 25, 10], 0.0, 3);
    let token_lists: Vec<Vec<String>> = sc
        .samples
        .iter()
        .map(|s| preprocess::mapped_tokens(&s.text))
        .collect();
    let vocab = Vocabulary::build(&token_lists, 2).unwrap();
    let token_ids: Vec<Vec<usize>> = token_lists
        .iter()
        .map(|l| pipeline::token_ids(l, &vocab))
        .collect();

    let cfg = EmbeddingConfig {
        dim: 32,
        epochs: 1,
        negatives: 3,
        max_len: 21,
        ..Default::default()
    };
    let w2v = embedding::train_word2vec(&token_ids, vocab.len(), &cfg, 7).unwrap();

    let flat: Vec<FlatSample> = sc
        .samples
        .iter()
        .zip(&token_ids)
        .map(|(s, ids)| FlatSample {
            vector: embedding::encode_question(ids, &w2v.embeddings, cfg.max_len).data,
            label: s.coarse,
            synthetic: false,
        })
        .collect();
    let labels = sc.samples.iter().map(|s| s.coarse).collect();

    BenchData {
        token_lists,
        token_ids,
        vocab_size: vocab.len(),
        embedding: cfg,
        embeddings: w2v.embeddings,
        flat,
        labels,
    }
}
