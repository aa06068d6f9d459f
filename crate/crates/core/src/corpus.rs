//! Corpus ingestion, the two-level label taxonomy, and stratified fold planning.
//!
//! Corpus files are UTF-8 text with LF line endings, one record per line:
//! `question<TAB>coarse<TAB>finer`. Taxonomy files list `coarse<TAB>finer`
//! pairs the same way. Lines starting with `#` and blank lines are ignored
//! in both formats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

/// Identifier of a coarse class: index into [`Taxonomy::coarse_classes`].
pub type CoarseId = usize;
/// Identifier of a finer class: index into [`Taxonomy::finer_classes`].
pub type FinerId = usize;

/// Two-level label taxonomy. Finer names may repeat across parents
/// (e.g. OTHER), so a finer class is identified by its index, not its name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    coarse_classes: Vec<String>,
    finer_classes: Vec<(String, CoarseId)>,
}

impl Taxonomy {
    pub fn new(coarse: Vec<String>, finer: Vec<(String, CoarseId)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for name in &coarse {
            if !seen.insert(name.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate coarse class {name:?}"
                )));
            }
        }
        let mut per_parent = std::collections::HashSet::new();
        for (name, parent) in &finer {
            if *parent >= coarse.len() {
                return Err(Error::InvalidArgument(format!(
                    "finer class {name:?} references missing parent index {parent}"
                )));
            }
            if !per_parent.insert((name.clone(), *parent)) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate finer class {name:?} under {:?}",
                    coarse[*parent]
                )));
            }
        }
        Ok(Self {
            coarse_classes: coarse,
            finer_classes: finer,
        })
    }

    /// Parse a taxonomy file: `coarse<TAB>finer` per line. Coarse classes are
    /// numbered in order of first appearance, finer classes in file order.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut coarse: Vec<String> = Vec::new();
        let mut finer: Vec<(String, CoarseId)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (c, f) = match (fields.next(), fields.next(), fields.next()) {
                (Some(c), Some(f), None) if !c.is_empty() && !f.is_empty() => (c, f),
                _ => {
                    return Err(Error::corpus(
                        path,
                        lineno,
                        "expected `coarse<TAB>finer`".to_string(),
                    ))
                }
            };
            let parent = match coarse.iter().position(|x| x == c) {
                Some(i) => i,
                None => {
                    coarse.push(c.to_string());
                    coarse.len() - 1
                }
            };
            if finer.iter().any(|(n, p)| n == f && *p == parent) {
                return Err(Error::corpus(
                    path,
                    lineno,
                    format!("duplicate finer class {f:?} under {c:?}"),
                ));
            }
            finer.push((f.to_string(), parent));
        }
        if coarse.is_empty() {
            return Err(Error::corpus(path, 1, "empty taxonomy".to_string()));
        }
        Self::new(coarse, finer)
    }

    pub fn coarse_classes(&self) -> &[String] {
        &self.coarse_classes
    }

    pub fn finer_classes(&self) -> &[(String, CoarseId)] {
        &self.finer_classes
    }

    pub fn coarse_count(&self) -> usize {
        self.coarse_classes.len()
    }

    pub fn coarse_name(&self, id: CoarseId) -> &str {
        &self.coarse_classes[id]
    }

    pub fn finer_name(&self, id: FinerId) -> &str {
        &self.finer_classes[id].0
    }

    pub fn finer_parent(&self, id: FinerId) -> CoarseId {
        self.finer_classes[id].1
    }

    pub fn coarse_id(&self, name: &str) -> Option<CoarseId> {
        self.coarse_classes.iter().position(|c| c == name)
    }

    /// Finer id by name within one coarse class.
    pub fn finer_id(&self, coarse: CoarseId, name: &str) -> Option<FinerId> {
        self.finer_classes
            .iter()
            .position(|(n, p)| *p == coarse && n == name)
    }

    /// Ids of the finer classes nested under `coarse`.
    pub fn finer_ids_of(&self, coarse: CoarseId) -> Vec<FinerId> {
        (0..self.finer_classes.len())
            .filter(|&i| self.finer_classes[i].1 == coarse)
            .collect()
    }

    pub fn to_file_string(&self) -> String {
        let mut out = String::new();
        for (name, parent) in &self.finer_classes {
            let _ = writeln!(out, "{}\t{}", self.coarse_classes[*parent], name);
        }
        out
    }
}

/// One question of the corpus. `tokens` is empty until preprocessing runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuestionSample {
    pub text: String,
    pub tokens: Vec<String>,
    pub coarse: CoarseId,
    pub finer: Option<FinerId>,
}

/// Load a corpus file, resolving labels against `taxonomy`. Any malformed
/// line fails the whole load with its line number.
pub fn load_corpus(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Vec<QuestionSample>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_corpus(&text, &path.display().to_string(), taxonomy)
}

pub fn parse_corpus(text: &str, path: &str, taxonomy: &Taxonomy) -> Result<Vec<QuestionSample>> {
    let mut samples = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::corpus(
                path,
                lineno,
                format!(
                    "expected `question<TAB>coarse<TAB>finer`, found {} field(s)",
                    fields.len()
                ),
            ));
        }
        let question = fields[0].trim();
        if question.is_empty() {
            return Err(Error::corpus(path, lineno, "empty question text"));
        }
        let coarse = taxonomy.coarse_id(fields[1]).ok_or_else(|| {
            Error::corpus(path, lineno, format!("unknown coarse class {:?}", fields[1]))
        })?;
        let finer = taxonomy.finer_id(coarse, fields[2]).ok_or_else(|| {
            // Distinguish a mismatched parent from a label that exists nowhere.
            let elsewhere = taxonomy
                .finer_classes
                .iter()
                .any(|(n, _)| n == fields[2]);
            let msg = if elsewhere {
                format!(
                    "finer class {:?} does not belong to coarse class {:?}",
                    fields[2], fields[1]
                )
            } else {
                format!("unknown finer class {:?}", fields[2])
            };
            Error::corpus(path, lineno, msg)
        })?;
        samples.push(QuestionSample {
            text: question.to_string(),
            tokens: Vec::new(),
            coarse,
            finer: Some(finer),
        });
    }
    if samples.is_empty() {
        return Err(Error::corpus(path, 1, "empty corpus"));
    }
    Ok(samples)
}

/// Serialize samples back to the corpus file format.
pub fn corpus_to_string(samples: &[QuestionSample], taxonomy: &Taxonomy) -> String {
    let mut out = String::new();
    for s in samples {
        let finer = s
            .finer
            .map(|f| taxonomy.finer_name(f))
            .unwrap_or_default();
        let _ = writeln!(out, "{}\t{}\t{}", s.text, taxonomy.coarse_name(s.coarse), finer);
    }
    out
}

pub fn save_corpus(
    path: impl AsRef<Path>,
    samples: &[QuestionSample],
    taxonomy: &Taxonomy,
) -> Result<()> {
    std::fs::write(path, corpus_to_string(samples, taxonomy))?;
    Ok(())
}

/// Per-coarse-class sample counts, keyed by class id.
pub fn class_counts(samples: &[QuestionSample]) -> BTreeMap<CoarseId, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.coarse).or_insert(0) += 1;
    }
    counts
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub k: usize,
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    /// Sample indices of the given fold.
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f == fold)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sample indices outside the given fold.
    pub fn rest_indices(&self, fold: usize) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| f != fold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment over the coarse labels.
///
/// Per class, fold counts differ by at most one. The folds receiving a
/// class's remainder are the currently least-loaded ones, which also keeps
/// total fold sizes balanced. Deterministic for a fixed seed.
pub fn stratified_kfold(samples: &[QuestionSample], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("fold count {k} < 2")));
    }
    if k > samples.len() {
        return Err(Error::InvalidArgument(format!(
            "fold count {k} exceeds sample count {}",
            samples.len()
        )));
    }

    let mut by_class: BTreeMap<CoarseId, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_class.entry(s.coarse).or_default().push(i);
    }

    let mut rng = rng::substream(seed, rng::stream::FOLDS);
    let mut assignments = vec![0usize; samples.len()];
    let mut fold_load = vec![0usize; k];

    for (_, mut indices) in by_class {
        indices.shuffle(&mut rng);
        let q = indices.len() / k;
        let r = indices.len() % k;

        // The r least-loaded folds get one extra sample of this class.
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by_key(|&f| (fold_load[f], f));
        let mut per_fold = vec![q; k];
        for &f in order.iter().take(r) {
            per_fold[f] += 1;
        }

        let mut cursor = 0;
        for (fold, &count) in per_fold.iter().enumerate() {
            for _ in 0..count {
                assignments[indices[cursor]] = fold;
                cursor += 1;
            }
            fold_load[fold] += count;
        }
    }

    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn two_level_taxonomy() -> Taxonomy {
        Taxonomy::parse(
            "HUMAN\tINDIVIDUAL\nHUMAN\tGROUP\nLOCATION\tCITY\nLOCATION\tCOUNTRY\n",
            "test",
        )
        .unwrap()
    }

    #[test]
    fn parses_labeled_line() {
        let tax = two_level_taxonomy();
        let samples =
            parse_corpus("কোথায় জন্ম?\tHUMAN\tINDIVIDUAL\n", "test", &tax).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].coarse, tax.coarse_id("HUMAN").unwrap());
        assert_eq!(
            samples[0].finer,
            tax.finer_id(samples[0].coarse, "INDIVIDUAL")
        );
        assert_eq!(samples[0].text, "কোথায় জন্ম?");
    }

    #[test]
    fn rejects_parent_mismatch() {
        let tax = two_level_taxonomy();
        let err = parse_corpus("কে?\tHUMAN\tCITY\n", "test", &tax).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("CITY"), "{msg}");
        assert!(msg.contains("does not belong"), "{msg}");
        assert!(msg.contains("test:1"), "{msg}");
    }

    #[test]
    fn rejects_unknown_labels_and_bad_shapes() {
        let tax = two_level_taxonomy();
        assert!(parse_corpus("কে?\tROBOT\tCITY\n", "t", &tax).is_err());
        assert!(parse_corpus("কে?\tHUMAN\n", "t", &tax).is_err());
        assert!(parse_corpus("\tHUMAN\tGROUP\n", "t", &tax).is_err());
        assert!(parse_corpus("", "t", &tax).is_err());
        assert!(parse_corpus("# only a comment\n", "t", &tax).is_err());
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let tax = two_level_taxonomy();
        let text = "# header\n\nকে?\tHUMAN\tGROUP\n";
        let samples = parse_corpus(text, "t", &tax).unwrap();
        assert_eq!(samples.len(), 1);
    }

    #[test]
    fn corpus_round_trip() {
        let tax = two_level_taxonomy();
        let text = "কোথায়?\tLOCATION\tCITY\nকে ছিলেন?\tHUMAN\tINDIVIDUAL\n";
        let samples = parse_corpus(text, "t", &tax).unwrap();
        let rendered = corpus_to_string(&samples, &tax);
        let reloaded = parse_corpus(&rendered, "t", &tax).unwrap();
        assert_eq!(samples, reloaded);
    }

    #[test]
    fn class_counts_examples() {
        let tax = two_level_taxonomy();
        assert!(class_counts(&[]).is_empty());
        let text = "a?\tHUMAN\tGROUP\nb?\tHUMAN\tGROUP\nc?\tLOCATION\tCITY\n";
        let samples = parse_corpus(text, "t", &tax).unwrap();
        let counts = class_counts(&samples);
        assert_eq!(counts[&tax.coarse_id("HUMAN").unwrap()], 2);
        assert_eq!(counts[&tax.coarse_id("LOCATION").unwrap()], 1);
        assert_eq!(counts.values().sum::<usize>(), samples.len());
    }

    fn synthetic_samples(counts: &[usize]) -> (Taxonomy, Vec<QuestionSample>) {
        let coarse: Vec<String> = (0..counts.len()).map(|i| format!("C{i}")).collect();
        let finer: Vec<(String, usize)> =
            (0..counts.len()).map(|i| (format!("F{i}"), i)).collect();
        let tax = Taxonomy::new(coarse, finer).unwrap();
        let mut samples = Vec::new();
        for (class, &n) in counts.iter().enumerate() {
            for j in 0..n {
                samples.push(QuestionSample {
                    text: format!("q {class} {j}"),
                    tokens: Vec::new(),
                    coarse: class,
                    finer: Some(class),
                });
            }
        }
        (tax, samples)
    }

    #[test]
    fn fold_sizes_for_full_scale_corpus() {
        // 3333 samples in six classes, k=10: sizes must be 333 or 334.
        let (_, samples) = synthetic_samples(&[482, 889, 651, 611, 198, 502]);
        assert_eq!(samples.len(), 3333);
        let plan = stratified_kfold(&samples, 10, 42).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &plan.assignments {
            sizes[f] += 1;
        }
        assert_eq!(sizes.iter().sum::<usize>(), 3333);
        for &s in &sizes {
            assert!(s == 333 || s == 334, "fold size {s}");
        }
    }

    #[test]
    fn one_sample_per_fold_when_counts_match() {
        let (_, samples) = synthetic_samples(&[10]);
        let plan = stratified_kfold(&samples, 10, 1).unwrap();
        let mut sizes = vec![0usize; 10];
        for &f in &plan.assignments {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 1));
    }

    #[test]
    fn kfold_is_deterministic() {
        let (_, samples) = synthetic_samples(&[31, 17, 9]);
        let a = stratified_kfold(&samples, 5, 99).unwrap();
        let b = stratified_kfold(&samples, 5, 99).unwrap();
        assert_eq!(a, b);
        let c = stratified_kfold(&samples, 5, 100).unwrap();
        assert_ne!(a.assignments, c.assignments);
    }

    #[test]
    fn kfold_rejects_bad_k() {
        let (_, samples) = synthetic_samples(&[4, 4]);
        assert!(stratified_kfold(&samples, 1, 0).is_err());
        assert!(stratified_kfold(&samples, 9, 0).is_err());
    }

    #[test]
    fn stratification_bound_holds() {
        let (_, samples) = synthetic_samples(&[23, 7, 41, 3]);
        let plan = stratified_kfold(&samples, 5, 7).unwrap();
        for class in 0..4 {
            let mut per_fold = vec![0usize; 5];
            for (i, s) in samples.iter().enumerate() {
                if s.coarse == class {
                    per_fold[plan.assignments[i]] += 1;
                }
            }
            let max = per_fold.iter().max().unwrap();
            let min = per_fold.iter().min().unwrap();
            assert!(max - min <= 1, "class {class}: {per_fold:?}");
        }
    }
}
