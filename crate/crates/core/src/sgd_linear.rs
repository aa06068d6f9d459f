//! One-vs-rest linear classifiers trained by per-instance SGD with a
//! modified Huber loss and L2 regularization. Stage two trains one of
//! these per coarse class, over that class's finer labels.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::tfidf::SparseVector;

/// Loss applied to each binary one-vs-rest problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Smoothed hinge: quadratic near the decision boundary, linear for
    /// margins below -1.
    ModifiedHuber,
    /// Regression Huber applied to (score - target).
    Huber,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SgdConfig {
    /// Initial learning rate; `None` selects it by grid search on one
    /// probe epoch per candidate.
    #[serde(default)]
    pub eta0: Option<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    /// Transition width for the regression Huber variant.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_alpha() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    30
}
fn default_loss() -> LossKind {
    LossKind::ModifiedHuber
}
fn default_delta() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-4
}
fn default_patience() -> usize {
    5
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            eta0: None,
            alpha: default_alpha(),
            epochs: default_epochs(),
            loss: default_loss(),
            delta: default_delta(),
            tol: default_tol(),
            patience: default_patience(),
        }
    }
}

const ETA0_GRID: [f64; 4] = [0.01, 0.1, 1.0, 10.0];

/// Modified Huber loss of a margin z = y*f and its derivative in z:
/// `max(0, 1-z)^2` for z >= -1, `-4z` below. Value and slope agree at
/// the seam, so the loss is C1.
pub fn modified_huber_loss(margin: f64) -> (f64, f64) {
    if margin >= 1.0 {
        (0.0, 0.0)
    } else if margin >= -1.0 {
        let gap = 1.0 - margin;
        (gap * gap, -2.0 * gap)
    } else {
        (-4.0 * margin, -4.0)
    }
}

/// Regression Huber on the residual r = pred - target; returns the loss
/// and its derivative in pred.
pub fn huber_loss(pred: f64, target: f64, delta: f64) -> (f64, f64) {
    let r = pred - target;
    if r.abs() <= delta {
        (0.5 * r * r, r)
    } else {
        (delta * (r.abs() - 0.5 * delta), delta * r.signum())
    }
}

/// Linear one-vs-rest model over sparse features. `classes[i]` is the
/// finer-class id whose score is `weights[i] . x + bias[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub classes: Vec<usize>,
    pub dim: usize,
}

impl LinearModel {
    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn decision(&self, x: &SparseVector) -> Result<Vec<f64>> {
        if x.dim != self.dim {
            return Err(Error::Shape {
                expected: format!("{}-dimensional input", self.dim),
                got: format!("{}-dimensional input", x.dim),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.bias)
            .map(|(w, &b)| x.dot_dense(w) + b)
            .collect())
    }
}

/// Argmax over per-class scores; ties break toward the lower class index.
pub fn predict_finer(model: &LinearModel, x: &SparseVector) -> Result<(usize, Vec<f64>)> {
    let scores = model.decision(x)?;
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok((model.classes[best], scores))
}

#[derive(Debug, Clone)]
pub struct SgdTraining {
    pub model: LinearModel,
    /// Mean per-update loss of each completed epoch.
    pub epoch_loss: Vec<f64>,
    pub chosen_eta0: f64,
}

struct EpochStats {
    mean_loss: f64,
}

/// One full pass in shuffled order, updating every class row per sample.
fn run_epoch(
    weights: &mut [Vec<f64>],
    bias: &mut [f64],
    x: &[SparseVector],
    targets: &[Vec<f64>],
    order: &[usize],
    cfg: &SgdConfig,
    eta0: f64,
    t: &mut u64,
) -> EpochStats {
    let mut loss_sum = 0.0;
    let mut updates = 0usize;
    for &i in order {
        let xi = &x[i];
        for (c, (w, b)) in weights.iter_mut().zip(bias.iter_mut()).enumerate() {
            let eta = eta0 / (1.0 + eta0 * cfg.alpha * *t as f64);
            *t += 1;
            let score = xi.dot_dense(w) + *b;
            let y = targets[c][i];
            let dloss_dscore = match cfg.loss {
                LossKind::ModifiedHuber => {
                    let (loss, dloss_dmargin) = modified_huber_loss(y * score);
                    loss_sum += loss;
                    dloss_dmargin * y
                }
                LossKind::Huber => {
                    let (loss, d) = huber_loss(score, y, cfg.delta);
                    loss_sum += loss;
                    d
                }
            };
            // w <- w - eta * (dloss + alpha * w); bias is unregularized.
            if cfg.alpha != 0.0 {
                let decay = 1.0 - eta * cfg.alpha;
                for wv in w.iter_mut() {
                    *wv *= decay;
                }
            }
            if dloss_dscore != 0.0 {
                xi.add_scaled_to(w, -eta * dloss_dscore);
                *b -= eta * dloss_dscore;
            }
            updates += 1;
        }
    }
    EpochStats {
        mean_loss: loss_sum / updates.max(1) as f64,
    }
}

fn train_with_eta0(
    x: &[SparseVector],
    targets: &[Vec<f64>],
    classes: &[usize],
    dim: usize,
    cfg: &SgdConfig,
    eta0: f64,
    seed: u64,
    epochs: usize,
) -> (LinearModel, Vec<f64>) {
    let mut weights = vec![vec![0.0; dim]; classes.len()];
    let mut bias = vec![0.0; classes.len()];
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut shuffle_rng = rng::substream(seed, rng::stream::SGD_SHUFFLE);
    let mut t = 0u64;
    let mut epoch_loss = Vec::with_capacity(epochs);
    let mut best = f64::INFINITY;
    let mut stalled = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut shuffle_rng);
        let stats = run_epoch(&mut weights, &mut bias, x, targets, &order, cfg, eta0, &mut t);
        epoch_loss.push(stats.mean_loss);
        if stats.mean_loss < best - cfg.tol {
            best = stats.mean_loss;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= cfg.patience {
                break;
            }
        }
    }
    (
        LinearModel {
            weights,
            bias,
            classes: classes.to_vec(),
            dim,
        },
        epoch_loss,
    )
}

/// Train a one-vs-rest linear model. `classes` fixes the score order and
/// must cover every label in `y`; per class the binary target is +1 for
/// members and -1 otherwise.
pub fn train_sgd(
    x: &[SparseVector],
    y: &[usize],
    classes: &[usize],
    cfg: &SgdConfig,
    seed: u64,
) -> Result<SgdTraining> {
    if x.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: format!("{} labels", x.len()),
            got: format!("{} labels", y.len()),
        });
    }
    if classes.is_empty() {
        return Err(Error::InvalidArgument("class set is empty".into()));
    }
    let dim = x[0].dim;
    for xi in x {
        if xi.dim != dim {
            return Err(Error::Shape {
                expected: format!("{dim}-dimensional input"),
                got: format!("{}-dimensional input", xi.dim),
            });
        }
    }
    for &label in y {
        if !classes.contains(&label) {
            return Err(Error::InvalidArgument(format!(
                "label {label} not in the class set"
            )));
        }
    }
    if cfg.epochs == 0 {
        return Err(Error::InvalidArgument("epochs must be at least 1".into()));
    }

    let targets: Vec<Vec<f64>> = classes
        .iter()
        .map(|&c| y.iter().map(|&l| if l == c { 1.0 } else { -1.0 }).collect())
        .collect();

    let chosen_eta0 = match cfg.eta0 {
        Some(v) => {
            if !(v > 0.0) {
                return Err(Error::InvalidArgument("eta0 must be positive".into()));
            }
            v
        }
        None => {
            let mut best = (f64::INFINITY, ETA0_GRID[0]);
            for &candidate in &ETA0_GRID {
                let (_, losses) =
                    train_with_eta0(x, &targets, classes, dim, cfg, candidate, seed, 1);
                let probe = losses[0];
                if probe.is_finite() && probe < best.0 {
                    best = (probe, candidate);
                }
            }
            best.1
        }
    };

    let (model, epoch_loss) = train_with_eta0(
        x,
        &targets,
        classes,
        dim,
        cfg,
        chosen_eta0,
        seed,
        cfg.epochs,
    );
    for row in &model.weights {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "linear model weights after training".into(),
            });
        }
    }
    Ok(SgdTraining {
        model,
        epoch_loss,
        chosen_eta0,
    })
}
