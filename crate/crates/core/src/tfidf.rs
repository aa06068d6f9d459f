//! Bigram TF-IDF vectorization for stage two. Each coarse class gets its
//! own vectorizer fitted on that class's training questions only.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Sparse real vector: entries sorted by column index, zero entries absent.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(_, v)| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.dim);
        self.entries.iter().map(|&(j, v)| v * dense[j]).sum()
    }

    /// dense += scale * self
    pub fn add_scaled_to(&self, dense: &mut [f64], scale: f64) {
        debug_assert_eq!(dense.len(), self.dim);
        for &(j, v) in &self.entries {
            dense[j] += scale * v;
        }
    }
}

/// Adjacent token pairs within one question; repeats are kept so term
/// frequency can count them.
pub fn extract_bigrams(tokens: &[String]) -> Vec<(String, String)> {
    tokens
        .windows(2)
        .map(|w| (w[0].clone(), w[1].clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfVectorizer {
    bigram_index: BTreeMap<(String, String), usize>,
    idf: Vec<f64>,
    doc_count: usize,
}

impl TfidfVectorizer {
    /// Fit on the token lists of one coarse class. Columns are assigned in
    /// lexicographic bigram order; idf(t) = ln((1 + N)/(1 + df(t))) + 1.
    pub fn fit(samples: &[Vec<String>]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument(
                "cannot fit a vectorizer on zero samples".into(),
            ));
        }
        let mut df: BTreeMap<(String, String), usize> = BTreeMap::new();
        for tokens in samples {
            let mut seen: Vec<(String, String)> = extract_bigrams(tokens);
            seen.sort();
            seen.dedup();
            for bigram in seen {
                *df.entry(bigram).or_insert(0) += 1;
            }
        }
        let n = samples.len();
        let mut bigram_index = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (column, (bigram, count)) in df.into_iter().enumerate() {
            bigram_index.insert(bigram, column);
            idf.push(((1.0 + n as f64) / (1.0 + count as f64)).ln() + 1.0);
        }
        Ok(Self {
            bigram_index,
            idf,
            doc_count: n,
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    pub fn idf(&self, column: usize) -> f64 {
        self.idf[column]
    }

    pub fn column_of(&self, first: &str, second: &str) -> Option<usize> {
        self.bigram_index
            .get(&(first.to_string(), second.to_string()))
            .copied()
    }

    /// tf x idf per known bigram, then L2 normalization. Unknown bigrams
    /// drop out; an all-unknown sample yields the zero vector.
    pub fn transform(&self, tokens: &[String]) -> SparseVector {
        let mut tf: HashMap<usize, f64> = HashMap::new();
        for bigram in extract_bigrams(tokens) {
            if let Some(&column) = self.bigram_index.get(&bigram) {
                *tf.entry(column).or_insert(0.0) += 1.0;
            }
        }
        let mut entries: Vec<(usize, f64)> = tf
            .into_iter()
            .map(|(column, count)| (column, count * self.idf[column]))
            .collect();
        entries.sort_unstable_by_key(|&(column, _)| column);
        let mut vector = SparseVector {
            dim: self.dim(),
            entries,
        };
        let norm = vector.l2_norm();
        if norm > 0.0 {
            for entry in &mut vector.entries {
                entry.1 /= norm;
            }
        }
        vector
    }

    /// Text form: a `doc_count` header, then one
    /// `token1<US>token2<TAB>column<TAB>idf` line per bigram
    /// (US = U+001F, which cannot occur inside whitespace-split tokens).
    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "doc_count\t{}", self.doc_count);
        for ((first, second), &column) in &self.bigram_index {
            let _ = writeln!(out, "{first}\u{1f}{second}\t{column}\t{}", self.idf[column]);
        }
        out
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::corpus(path, 1, "missing doc_count header"))?;
        let doc_count: usize = header
            .strip_prefix("doc_count\t")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::corpus(path, 1, "bad doc_count header"))?;

        let mut bigram_index = BTreeMap::new();
        let mut columns: Vec<(usize, f64)> = Vec::new();
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let bigram = fields
                .next()
                .ok_or_else(|| Error::corpus(path, lineno, "missing bigram"))?;
            let (first, second) = bigram
                .split_once('\u{1f}')
                .ok_or_else(|| Error::corpus(path, lineno, "bigram lacks separator"))?;
            let column: usize = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::corpus(path, lineno, "bad column"))?;
            let idf: f64 = fields
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::corpus(path, lineno, "bad idf"))?;
            if bigram_index
                .insert((first.to_string(), second.to_string()), column)
                .is_some()
            {
                return Err(Error::corpus(path, lineno, "duplicate bigram"));
            }
            columns.push((column, idf));
        }
        columns.sort_unstable_by_key(|&(column, _)| column);
        for (expect, &(column, _)) in columns.iter().enumerate() {
            if column != expect {
                return Err(Error::corpus(
                    path,
                    1,
                    format!("columns not dense: missing column {expect}"),
                ));
            }
        }
        Ok(Self {
            bigram_index,
            idf: columns.into_iter().map(|(_, idf)| idf).collect(),
            doc_count,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}
