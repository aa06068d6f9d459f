//! Confusion-matrix metrics, stratified cross-validation of the full
//! pipeline, and report rendering.
//!
//! Per-class precision, recall, and F1 derive from one confusion matrix
//! per scope. Ratios with a zero denominator are defined as 0 and the
//! affected classes are flagged in the report rather than silently
//! folded into the averages.

use std::fmt::Write as _;

use crate::config::PipelineConfig;
use crate::corpus::{self, CoarseId, QuestionSample, Taxonomy};
use crate::error::{Error, Result};
use crate::pipeline;
use crate::preprocess;
use crate::rng;
use crate::sgd_linear;

/// Published results on the original 3333-question Bengali corpus.
/// Dataset-dependent reference points for side-by-side comparison, not
/// tolerances the harness promises to hit on other corpora.
pub mod reference {
    pub const COARSE_PRECISION: f64 = 0.9310;
    pub const COARSE_RECALL: f64 = 0.9344;
    pub const COARSE_F1: f64 = 0.9325;
    pub const FINER_AVERAGE_PRECISION: f64 = 0.8792;
    pub const FINER_AVERAGE_RECALL: f64 = 0.8847;
    pub const FINER_AVERAGE_F1: f64 = 0.8723;
}

/// Square count matrix; rows are gold labels, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    class_count: usize,
    counts: Vec<usize>,
    total: usize,
}

impl ConfusionMatrix {
    pub fn new(class_count: usize) -> Self {
        Self {
            class_count,
            counts: vec![0; class_count * class_count],
            total: 0,
        }
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn count(&self, gold: usize, pred: usize) -> usize {
        self.counts[gold * self.class_count + pred]
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn record(&mut self, gold: usize, pred: usize) -> Result<()> {
        if gold >= self.class_count || pred >= self.class_count {
            return Err(Error::InvalidArgument(format!(
                "label ({gold}, {pred}) outside {} classes",
                self.class_count
            )));
        }
        self.counts[gold * self.class_count + pred] += 1;
        self.total += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.class_count != self.class_count {
            return Err(Error::Shape {
                expected: format!("{} classes", self.class_count),
                got: format!("{} classes", other.class_count),
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
        Ok(())
    }

    /// Gold occurrences of a class (its support).
    pub fn row_sum(&self, class: usize) -> usize {
        (0..self.class_count).map(|p| self.count(class, p)).sum()
    }

    /// Predicted occurrences of a class.
    pub fn col_sum(&self, class: usize) -> usize {
        (0..self.class_count).map(|g| self.count(g, class)).sum()
    }

    pub fn diagonal_sum(&self) -> usize {
        (0..self.class_count).map(|c| self.count(c, c)).sum()
    }
}

pub fn confusion_matrix(
    gold: &[usize],
    pred: &[usize],
    class_count: usize,
) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::Shape {
            expected: format!("{} predictions", gold.len()),
            got: format!("{} predictions", pred.len()),
        });
    }
    let mut m = ConfusionMatrix::new(class_count);
    for (&g, &p) in gold.iter().zip(pred) {
        m.record(g, p)?;
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Averages,
    pub micro_avg: Averages,
    pub weighted_avg: Averages,
    pub accuracy: f64,
    pub total: usize,
    /// Classes where some 0/0 ratio was defined as 0.
    pub zero_division_classes: Vec<usize>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class and averaged precision/recall/F1 from a confusion matrix.
/// Macro is the headline average; micro and weighted are emitted for
/// transparency.
pub fn precision_recall_f1(m: &ConfusionMatrix) -> MetricsReport {
    let n = m.class_count();
    let mut per_class = Vec::with_capacity(n);
    let mut zero_division_classes = Vec::new();
    let mut tp_sum = 0usize;
    let mut fp_sum = 0usize;
    let mut fn_sum = 0usize;

    for c in 0..n {
        let tp = m.count(c, c);
        let support = m.row_sum(c);
        let predicted = m.col_sum(c);
        let fp = predicted - tp;
        let fal_n = support - tp;
        let p = ratio(tp, tp + fp);
        let r = ratio(tp, tp + fal_n);
        let f1 = f1_of(p, r);
        if tp + fp == 0 || tp + fal_n == 0 || p + r == 0.0 {
            zero_division_classes.push(c);
        }
        per_class.push(ClassMetrics {
            precision: p,
            recall: r,
            f1,
            support,
        });
        tp_sum += tp;
        fp_sum += fp;
        fn_sum += fal_n;
    }

    let count = n.max(1) as f64;
    let macro_avg = Averages {
        precision: per_class.iter().map(|c| c.precision).sum::<f64>() / count,
        recall: per_class.iter().map(|c| c.recall).sum::<f64>() / count,
        f1: per_class.iter().map(|c| c.f1).sum::<f64>() / count,
    };
    let micro_p = ratio(tp_sum, tp_sum + fp_sum);
    let micro_r = ratio(tp_sum, tp_sum + fn_sum);
    let micro_avg = Averages {
        precision: micro_p,
        recall: micro_r,
        f1: f1_of(micro_p, micro_r),
    };
    let total = m.total();
    let weighted = |pick: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class
                .iter()
                .map(|c| c.support as f64 * pick(c))
                .sum::<f64>()
                / total as f64
        }
    };
    let weighted_avg = Averages {
        precision: weighted(|c| c.precision),
        recall: weighted(|c| c.recall),
        f1: weighted(|c| c.f1),
    };

    MetricsReport {
        per_class,
        macro_avg,
        micro_avg,
        weighted_avg,
        accuracy: ratio(m.diagonal_sum(), total),
        total,
        zero_division_classes,
    }
}

/// Pooled-plus-per-fold view of one evaluation scope.
#[derive(Debug, Clone)]
pub struct ScopeReport {
    pub pooled: MetricsReport,
    pub pooled_confusion: ConfusionMatrix,
    pub folds: Vec<MetricsReport>,
}

/// Gold-routed metrics of one coarse class's finer model, pooled across
/// folds; classes are local positions in `finer_ids_of(coarse)`.
#[derive(Debug, Clone)]
pub struct ModelReport {
    pub coarse: CoarseId,
    pub report: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub k: usize,
    /// Coarse classification.
    pub stage1: ScopeReport,
    /// Finer classification over all finer classes, routed by gold
    /// coarse labels.
    pub stage2_gold: ScopeReport,
    /// The same gold-routed results split per coarse-class model.
    pub stage2_models: Vec<ModelReport>,
    /// Unweighted mean of the per-model macro averages.
    pub stage2_model_average: Averages,
    /// Finer classification routed by stage-one predictions.
    pub end_to_end: ScopeReport,
}

/// Stratified k-fold cross-validation of the full pipeline.
///
/// Each fold trains every fitted component (vocabulary, embeddings,
/// SMOTE synthesis, CNN, vectorizers, linear models) on the other k-1
/// folds only, then scores the held-out fold in three scopes: coarse
/// stage one, gold-routed stage two, and predicted-routing end to end.
/// Folds run the full epoch budget: a carve small enough to fit inside
/// k-1 folds cannot pick a stopping epoch reliably, so no validation
/// split is passed down and training keeps the final weights.
pub fn cross_validate(
    samples: &[QuestionSample],
    taxonomy: &Taxonomy,
    config: &PipelineConfig,
) -> Result<CvReport> {
    config.validate()?;
    for s in samples {
        if s.finer.is_none() {
            return Err(Error::InvalidArgument(format!(
                "sample {:?} has no finer label",
                s.text
            )));
        }
    }

    let k = config.k_folds;
    let plan = corpus::stratified_kfold(samples, k, config.seed)?;
    let coarse_n = taxonomy.coarse_count();
    let finer_n = taxonomy.finer_classes().len();

    let mut stage1_pool = ConfusionMatrix::new(coarse_n);
    let mut gold_pool = ConfusionMatrix::new(finer_n);
    let mut e2e_pool = ConfusionMatrix::new(finer_n);
    let mut model_pools: Vec<ConfusionMatrix> = (0..coarse_n)
        .map(|c| ConfusionMatrix::new(taxonomy.finer_ids_of(c).len()))
        .collect();
    let mut stage1_folds = Vec::with_capacity(k);
    let mut gold_folds = Vec::with_capacity(k);
    let mut e2e_folds = Vec::with_capacity(k);

    for f in 0..k {
        let train: Vec<QuestionSample> = plan
            .rest_indices(f)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect();
        let held: Vec<QuestionSample> = plan
            .fold_indices(f)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect();

        let fold_seed = rng::substream_seed(config.seed, &format!("fold-{f}"));
        let mut fold_cfg = config.clone();
        fold_cfg.seed = fold_seed;
        let training = pipeline::train_pipeline(&train, &[], taxonomy, &fold_cfg)?;

        let mut s1 = ConfusionMatrix::new(coarse_n);
        let mut gold = ConfusionMatrix::new(finer_n);
        let mut e2e = ConfusionMatrix::new(finer_n);
        for s in &held {
            let gold_finer = s.finer.expect("checked above");
            let got = pipeline::classify(&training.model, &s.text)?;
            s1.record(s.coarse, got.coarse)?;
            e2e.record(gold_finer, got.finer)?;

            // Gold routing: score the gold class's own model.
            let stage = &training.model.finer[s.coarse];
            let tokens = preprocess::mapped_tokens(&s.text);
            let x = stage.vectorizer.transform(&tokens);
            let (pred_finer, _) = sgd_linear::predict_finer(&stage.model, &x)?;
            gold.record(gold_finer, pred_finer)?;

            let classes = taxonomy.finer_ids_of(s.coarse);
            let local_gold = classes.iter().position(|&c| c == gold_finer).expect("nested");
            let local_pred = classes.iter().position(|&c| c == pred_finer).expect("routed");
            model_pools[s.coarse].record(local_gold, local_pred)?;
        }

        stage1_folds.push(precision_recall_f1(&s1));
        gold_folds.push(precision_recall_f1(&gold));
        e2e_folds.push(precision_recall_f1(&e2e));
        stage1_pool.merge(&s1)?;
        gold_pool.merge(&gold)?;
        e2e_pool.merge(&e2e)?;
    }

    let stage2_models: Vec<ModelReport> = model_pools
        .iter()
        .enumerate()
        .map(|(coarse, m)| ModelReport {
            coarse,
            report: precision_recall_f1(m),
        })
        .collect();
    let models_n = stage2_models.len().max(1) as f64;
    let stage2_model_average = Averages {
        precision: stage2_models
            .iter()
            .map(|m| m.report.macro_avg.precision)
            .sum::<f64>()
            / models_n,
        recall: stage2_models
            .iter()
            .map(|m| m.report.macro_avg.recall)
            .sum::<f64>()
            / models_n,
        f1: stage2_models
            .iter()
            .map(|m| m.report.macro_avg.f1)
            .sum::<f64>()
            / models_n,
    };

    Ok(CvReport {
        k,
        stage1: ScopeReport {
            pooled: precision_recall_f1(&stage1_pool),
            pooled_confusion: stage1_pool,
            folds: stage1_folds,
        },
        stage2_gold: ScopeReport {
            pooled: precision_recall_f1(&gold_pool),
            pooled_confusion: gold_pool,
            folds: gold_folds,
        },
        stage2_models,
        stage2_model_average,
        end_to_end: ScopeReport {
            pooled: precision_recall_f1(&e2e_pool),
            pooled_confusion: e2e_pool,
            folds: e2e_folds,
        },
    })
}

fn append_report(out: &mut String, scope: &str, names: &[String], report: &MetricsReport) {
    for (name, c) in names.iter().zip(&report.per_class) {
        let _ = writeln!(out, "{scope}\t{name}\tprecision\t{:.6}", c.precision);
        let _ = writeln!(out, "{scope}\t{name}\trecall\t{:.6}", c.recall);
        let _ = writeln!(out, "{scope}\t{name}\tf1\t{:.6}", c.f1);
        let _ = writeln!(out, "{scope}\t{name}\tsupport\t{}", c.support);
    }
    for (tag, a) in [
        ("macro", report.macro_avg),
        ("micro", report.micro_avg),
        ("weighted", report.weighted_avg),
    ] {
        let _ = writeln!(out, "{scope}\t*\t{tag}-precision\t{:.6}", a.precision);
        let _ = writeln!(out, "{scope}\t*\t{tag}-recall\t{:.6}", a.recall);
        let _ = writeln!(out, "{scope}\t*\t{tag}-f1\t{:.6}", a.f1);
    }
    let _ = writeln!(out, "{scope}\t*\taccuracy\t{:.6}", report.accuracy);
    let _ = writeln!(out, "{scope}\t*\tsamples\t{}", report.total);
    let _ = writeln!(
        out,
        "{scope}\t*\tzero-division-classes\t{}",
        report.zero_division_classes.len()
    );
}

fn coarse_names(taxonomy: &Taxonomy) -> Vec<String> {
    taxonomy.coarse_classes().to_vec()
}

fn finer_names(taxonomy: &Taxonomy) -> Vec<String> {
    taxonomy
        .finer_classes()
        .iter()
        .map(|(name, parent)| format!("{}/{}", taxonomy.coarse_name(*parent), name))
        .collect()
}

fn model_names(taxonomy: &Taxonomy, coarse: CoarseId) -> Vec<String> {
    taxonomy
        .finer_ids_of(coarse)
        .into_iter()
        .map(|f| {
            format!(
                "{}/{}",
                taxonomy.coarse_name(coarse),
                taxonomy.finer_name(f)
            )
        })
        .collect()
}

/// One `scope<TAB>class<TAB>metric<TAB>value` line per metric, in a fixed
/// order, so identical runs serialize byte-identically.
pub fn machine_report(cv: &CvReport, taxonomy: &Taxonomy) -> String {
    let mut out = String::new();
    let coarse = coarse_names(taxonomy);
    let finer = finer_names(taxonomy);

    append_report(&mut out, "stage1", &coarse, &cv.stage1.pooled);
    for (f, report) in cv.stage1.folds.iter().enumerate() {
        append_report(&mut out, &format!("stage1/fold-{f}"), &coarse, report);
    }

    append_report(&mut out, "stage2-gold", &finer, &cv.stage2_gold.pooled);
    for (f, report) in cv.stage2_gold.folds.iter().enumerate() {
        append_report(&mut out, &format!("stage2-gold/fold-{f}"), &finer, report);
    }
    for model in &cv.stage2_models {
        let scope = format!(
            "stage2-gold/model-{}",
            taxonomy.coarse_name(model.coarse)
        );
        append_report(
            &mut out,
            &scope,
            &model_names(taxonomy, model.coarse),
            &model.report,
        );
    }
    let _ = writeln!(
        out,
        "stage2-gold/models\t*\tmacro-precision\t{:.6}",
        cv.stage2_model_average.precision
    );
    let _ = writeln!(
        out,
        "stage2-gold/models\t*\tmacro-recall\t{:.6}",
        cv.stage2_model_average.recall
    );
    let _ = writeln!(
        out,
        "stage2-gold/models\t*\tmacro-f1\t{:.6}",
        cv.stage2_model_average.f1
    );

    append_report(&mut out, "end-to-end", &finer, &cv.end_to_end.pooled);
    for (f, report) in cv.end_to_end.folds.iter().enumerate() {
        append_report(&mut out, &format!("end-to-end/fold-{f}"), &finer, report);
    }
    out
}

fn human_scope(out: &mut String, title: &str, names: &[String], report: &MetricsReport) {
    let width = names.iter().map(|n| n.len()).max().unwrap_or(5).max(5);
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:width$}  precision  recall      f1  support",
        "class"
    );
    for (name, c) in names.iter().zip(&report.per_class) {
        let _ = writeln!(
            out,
            "  {name:width$}   {:.6}  {:.6}  {:.6}  {:>7}",
            c.precision, c.recall, c.f1, c.support
        );
    }
    for (tag, a) in [
        ("macro", report.macro_avg),
        ("micro", report.micro_avg),
        ("weighted", report.weighted_avg),
    ] {
        let _ = writeln!(
            out,
            "  {tag:width$}   {:.6}  {:.6}  {:.6}",
            a.precision, a.recall, a.f1
        );
    }
    let _ = writeln!(
        out,
        "  accuracy {:.6} over {} samples",
        report.accuracy, report.total
    );
    if !report.zero_division_classes.is_empty() {
        let _ = writeln!(
            out,
            "  note: {} class(es) hit the 0/0 convention and report 0",
            report.zero_division_classes.len()
        );
    }
    out.push('\n');
}

/// Multi-section table for terminals, ending with the published
/// reference results for side-by-side comparison.
pub fn human_report(cv: &CvReport, taxonomy: &Taxonomy) -> String {
    let mut out = String::new();
    let coarse = coarse_names(taxonomy);
    let finer = finer_names(taxonomy);

    human_scope(
        &mut out,
        &format!("stage one, coarse classes, pooled over {} folds", cv.k),
        &coarse,
        &cv.stage1.pooled,
    );
    human_scope(
        &mut out,
        "stage two, gold-routed, all finer classes",
        &finer,
        &cv.stage2_gold.pooled,
    );
    for model in &cv.stage2_models {
        let name = taxonomy.coarse_name(model.coarse);
        let a = model.report.macro_avg;
        let _ = writeln!(
            out,
            "model {name}: macro precision {:.6}  recall {:.6}  f1 {:.6}  ({} samples)",
            a.precision, a.recall, a.f1, model.report.total
        );
    }
    let avg = cv.stage2_model_average;
    let _ = writeln!(
        out,
        "model average: precision {:.6}  recall {:.6}  f1 {:.6}\n",
        avg.precision, avg.recall, avg.f1
    );
    human_scope(
        &mut out,
        "end to end, predicted routing, all finer classes",
        &finer,
        &cv.end_to_end.pooled,
    );

    let _ = writeln!(
        out,
        "reference results on the original 3333-question Bengali corpus:"
    );
    let _ = writeln!(
        out,
        "  coarse:        precision {:.4}  recall {:.4}  f1 {:.4}",
        reference::COARSE_PRECISION,
        reference::COARSE_RECALL,
        reference::COARSE_F1
    );
    let _ = writeln!(
        out,
        "  finer average: precision {:.4}  recall {:.4}  f1 {:.4}",
        reference::FINER_AVERAGE_PRECISION,
        reference::FINER_AVERAGE_RECALL,
        reference::FINER_AVERAGE_F1
    );
    let s1 = cv.stage1.pooled.macro_avg;
    let _ = writeln!(
        out,
        "  measured coarse macro:  precision {:.4}  recall {:.4}  f1 {:.4}",
        s1.precision, s1.recall, s1.f1
    );
    let _ = writeln!(
        out,
        "  measured model average: precision {:.4}  recall {:.4}  f1 {:.4}",
        avg.precision, avg.recall, avg.f1
    );
    out
}
