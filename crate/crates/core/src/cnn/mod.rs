//! 1D convolutional network for coarse classification: architecture
//! specs, forward/backward passes over flat f64 buffers, and a seeded
//! Adam training loop with early stopping on validation loss.
//!
//! There is deliberately no pooling layer type: the architecture keeps
//! the full sequence resolution until the flatten stage.

pub mod adam;
pub mod layers;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balance::FlatSample;
use crate::embedding::EncodedSample;
use crate::error::{Error, Result};
use crate::rng;

pub use adam::{AdamConfig, AdamState};

/// One architecture element. Conv and dense layers carry an implicit ReLU;
/// the output layer (softmax over the class count) is appended by the
/// model builder and never appears in this list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d { filters: usize, kernel: usize },
    Dropout { rate: f64 },
    Flatten,
    Dense { units: usize },
}

/// Hidden-layer stack, in input-to-output order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CnnArchitecture {
    pub hidden: Vec<LayerSpec>,
}

impl Default for CnnArchitecture {
    fn default() -> Self {
        Self {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 64,
                    kernel: 3,
                },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Conv1d {
                    filters: 128,
                    kernel: 3,
                },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::Dense { units: 128 },
                LayerSpec::Dropout { rate: 0.5 },
            ],
        }
    }
}

impl CnnArchitecture {
    /// Structural rules: exactly one flatten; convs before it, denses
    /// after; every conv and dense immediately followed by a dropout with
    /// rate in (0,1); dropout only ever in that position.
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::Config(msg));
        let mut flattened = false;
        let mut needs_dropout = false;
        for (i, spec) in self.hidden.iter().enumerate() {
            match *spec {
                LayerSpec::Conv1d { filters, kernel } => {
                    if needs_dropout {
                        return invalid(format!("layer {i}: expected dropout, found conv1d"));
                    }
                    if flattened {
                        return invalid(format!("layer {i}: conv1d after flatten"));
                    }
                    if filters == 0 || kernel == 0 {
                        return invalid(format!("layer {i}: conv1d needs filters, kernel >= 1"));
                    }
                    needs_dropout = true;
                }
                LayerSpec::Dense { units } => {
                    if needs_dropout {
                        return invalid(format!("layer {i}: expected dropout, found dense"));
                    }
                    if !flattened {
                        return invalid(format!("layer {i}: dense before flatten"));
                    }
                    if units == 0 {
                        return invalid(format!("layer {i}: dense needs units >= 1"));
                    }
                    needs_dropout = true;
                }
                LayerSpec::Dropout { rate } => {
                    if !needs_dropout {
                        return invalid(format!(
                            "layer {i}: dropout must directly follow a conv1d or dense layer"
                        ));
                    }
                    if !(rate > 0.0 && rate < 1.0) {
                        return invalid(format!("layer {i}: dropout rate must be in (0,1)"));
                    }
                    needs_dropout = false;
                }
                LayerSpec::Flatten => {
                    if needs_dropout {
                        return invalid(format!("layer {i}: expected dropout, found flatten"));
                    }
                    if flattened {
                        return invalid(format!("layer {i}: second flatten"));
                    }
                    flattened = true;
                }
            }
        }
        if needs_dropout {
            return invalid("final conv1d or dense layer lacks its dropout".into());
        }
        if !flattened {
            return invalid("architecture needs a flatten layer".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainConfig {
    #[serde(flatten, default)]
    pub adam: AdamConfig,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_max_epochs")]
    pub max_epochs: usize,
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_batch_size() -> usize {
    32
}
fn default_max_epochs() -> usize {
    50
}
fn default_patience() -> usize {
    5
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            batch_size: default_batch_size(),
            max_epochs: default_max_epochs(),
            patience: default_patience(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Stage {
    Conv {
        weights: Vec<f64>,
        bias: Vec<f64>,
        filters: usize,
        kernel: usize,
        in_channels: usize,
        in_len: usize,
    },
    Relu,
    Dropout {
        rate: f64,
    },
    Flatten,
    Dense {
        weights: Vec<f64>,
        bias: Vec<f64>,
        units: usize,
        inputs: usize,
    },
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel {
    input_len: usize,
    input_dim: usize,
    class_count: usize,
    arch: CnnArchitecture,
    stages: Vec<Stage>,
}

struct Pass {
    /// acts[i] is the input of stage i; acts[stages.len()] the output.
    acts: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
}

impl CnnModel {
    /// Build a model for `input_len x input_dim` inputs. With a seed the
    /// parameters get He-uniform init (Glorot-uniform for the softmax
    /// layer) and zero biases; without one they stay zero, for callers
    /// that overwrite them from a checkpoint.
    pub fn build(
        arch: CnnArchitecture,
        input_len: usize,
        input_dim: usize,
        class_count: usize,
        seed: Option<u64>,
    ) -> Result<Self> {
        arch.validate()?;
        if input_len == 0 || input_dim == 0 || class_count == 0 {
            return Err(Error::Config(
                "input length, input dim and class count must be >= 1".into(),
            ));
        }
        let mut stages = Vec::new();
        let mut len = input_len;
        let mut channels = input_dim;
        let mut flat: Option<usize> = None;
        for spec in &arch.hidden {
            match *spec {
                LayerSpec::Conv1d { filters, kernel } => {
                    if kernel > len {
                        return Err(Error::Config(format!(
                            "conv1d kernel {kernel} exceeds sequence length {len}"
                        )));
                    }
                    stages.push(Stage::Conv {
                        weights: vec![0.0; filters * kernel * channels],
                        bias: vec![0.0; filters],
                        filters,
                        kernel,
                        in_channels: channels,
                        in_len: len,
                    });
                    stages.push(Stage::Relu);
                    len = len - kernel + 1;
                    channels = filters;
                }
                LayerSpec::Dropout { rate } => stages.push(Stage::Dropout { rate }),
                LayerSpec::Flatten => {
                    flat = Some(len * channels);
                    stages.push(Stage::Flatten);
                }
                LayerSpec::Dense { units } => {
                    let inputs = flat.expect("validate() puts dense after flatten");
                    stages.push(Stage::Dense {
                        weights: vec![0.0; units * inputs],
                        bias: vec![0.0; units],
                        units,
                        inputs,
                    });
                    stages.push(Stage::Relu);
                    flat = Some(units);
                }
            }
        }
        let inputs = flat.expect("validate() guarantees a flatten layer");
        stages.push(Stage::Dense {
            weights: vec![0.0; class_count * inputs],
            bias: vec![0.0; class_count],
            units: class_count,
            inputs,
        });
        stages.push(Stage::Softmax);

        let mut model = Self {
            input_len,
            input_dim,
            class_count,
            arch,
            stages,
        };
        if let Some(seed) = seed {
            model.init_params(seed);
        }
        Ok(model)
    }

    fn init_params(&mut self, seed: u64) {
        let mut rng = rng::substream(seed, rng::stream::CNN_INIT);
        let count = self.stages.len();
        for (i, stage) in self.stages.iter_mut().enumerate() {
            // The stage directly before the softmax is the output layer.
            let output_layer = i + 2 == count;
            match stage {
                Stage::Conv {
                    weights,
                    kernel,
                    in_channels,
                    ..
                } => {
                    let fan_in = (*kernel * *in_channels) as f64;
                    let limit = (6.0 / fan_in).sqrt();
                    for w in weights.iter_mut() {
                        *w = rng.gen_range(-limit..limit);
                    }
                }
                Stage::Dense {
                    weights,
                    units,
                    inputs,
                    ..
                } => {
                    let limit = if output_layer {
                        (6.0 / (*inputs as f64 + *units as f64)).sqrt()
                    } else {
                        (6.0 / *inputs as f64).sqrt()
                    };
                    for w in weights.iter_mut() {
                        *w = rng.gen_range(-limit..limit);
                    }
                }
                _ => {}
            }
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn architecture(&self) -> &CnnArchitecture {
        &self.arch
    }

    /// Parameter tensors in stage order, weights before bias.
    pub fn params(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for stage in &self.stages {
            match stage {
                Stage::Conv { weights, bias, .. } | Stage::Dense { weights, bias, .. } => {
                    out.push(weights);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for stage in &mut self.stages {
            match stage {
                Stage::Conv { weights, bias, .. } | Stage::Dense { weights, bias, .. } => {
                    out.push(weights);
                    out.push(bias);
                }
                _ => {}
            }
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn snapshot_params(&self) -> Vec<Vec<f64>> {
        self.params().into_iter().cloned().collect()
    }

    pub fn set_params(&mut self, tensors: &[Vec<f64>]) -> Result<()> {
        let shapes = self.param_shapes();
        if tensors.len() != shapes.len()
            || tensors.iter().zip(&shapes).any(|(t, &s)| t.len() != s)
        {
            return Err(Error::Shape {
                expected: format!("{shapes:?}"),
                got: format!(
                    "{:?}",
                    tensors.iter().map(Vec::len).collect::<Vec<_>>()
                ),
            });
        }
        for (param, tensor) in self.params_mut().into_iter().zip(tensors) {
            param.copy_from_slice(tensor);
        }
        Ok(())
    }

    fn run_forward(
        &self,
        batch_data: &[f64],
        batch: usize,
        train_mode: bool,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Pass> {
        if batch == 0 || batch_data.len() != batch * self.input_len * self.input_dim {
            return Err(Error::Shape {
                expected: format!("batch x {} x {} input", self.input_len, self.input_dim),
                got: format!("{} values for batch {batch}", batch_data.len()),
            });
        }
        if batch_data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "model input".into(),
            });
        }
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(self.stages.len() + 1);
        acts.push(batch_data.to_vec());
        let mut masks: Vec<Option<Vec<f64>>> = vec![None; self.stages.len()];
        for (i, stage) in self.stages.iter().enumerate() {
            let input = &acts[i];
            let out = match stage {
                Stage::Conv {
                    weights,
                    bias,
                    filters,
                    kernel,
                    in_channels,
                    in_len,
                } => layers::conv1d_forward(
                    input, batch, *in_len, *in_channels, weights, bias, *filters, *kernel,
                ),
                Stage::Relu => layers::relu_forward(input),
                Stage::Dropout { rate } => {
                    if train_mode {
                        let rng = rng.as_deref_mut().ok_or_else(|| {
                            Error::InvalidArgument(
                                "training-mode forward needs a dropout rng".into(),
                            )
                        })?;
                        let (out, mask) = layers::dropout_forward(input, *rate, rng);
                        masks[i] = Some(mask);
                        out
                    } else {
                        input.clone()
                    }
                }
                Stage::Flatten => input.clone(),
                Stage::Dense {
                    weights,
                    bias,
                    units,
                    inputs,
                } => layers::dense_forward(input, batch, *inputs, weights, bias, *units),
                Stage::Softmax => layers::softmax_forward(input, batch, self.class_count),
            };
            acts.push(out);
        }
        Ok(Pass { acts, masks })
    }

    /// Class probabilities, one row per batch element.
    pub fn forward(
        &self,
        batch_data: &[f64],
        batch: usize,
        train_mode: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Vec<f64>> {
        let mut pass = self.run_forward(batch_data, batch, train_mode, rng)?;
        Ok(pass.acts.pop().expect("forward always produces an output"))
    }

    /// Mean cross-entropy over the batch and the gradient for every
    /// parameter tensor, aligned with [`CnnModel::params`].
    pub fn loss_and_grads(
        &self,
        batch_data: &[f64],
        batch: usize,
        labels: &[usize],
        train_mode: bool,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        if labels.len() != batch {
            return Err(Error::Shape {
                expected: format!("{batch} labels"),
                got: format!("{} labels", labels.len()),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.class_count) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside {} classes",
                self.class_count
            )));
        }
        let pass = self.run_forward(batch_data, batch, train_mode, rng)?;
        let probs = pass.acts.last().expect("non-empty pass");
        let (loss, grad_logits) =
            layers::cross_entropy_with_logit_grad(probs, labels, self.class_count);

        // Walk everything before the softmax stage in reverse.
        let mut grad = grad_logits;
        let mut param_grads_rev: Vec<Vec<f64>> = Vec::new();
        for i in (0..self.stages.len() - 1).rev() {
            let input = &pass.acts[i];
            match &self.stages[i] {
                Stage::Conv {
                    weights,
                    filters,
                    kernel,
                    in_channels,
                    in_len,
                    ..
                } => {
                    let (gi, gw, gb) = layers::conv1d_backward(
                        input,
                        batch,
                        *in_len,
                        *in_channels,
                        weights,
                        *filters,
                        *kernel,
                        &grad,
                    );
                    param_grads_rev.push(gb);
                    param_grads_rev.push(gw);
                    grad = gi;
                }
                Stage::Relu => grad = layers::relu_backward(input, &grad),
                Stage::Dropout { .. } => {
                    if let Some(mask) = &pass.masks[i] {
                        grad = layers::dropout_backward(mask, &grad);
                    }
                }
                Stage::Flatten => {}
                Stage::Dense {
                    weights,
                    units,
                    inputs,
                    ..
                } => {
                    let (gi, gw, gb) =
                        layers::dense_backward(input, batch, *inputs, weights, *units, &grad);
                    param_grads_rev.push(gb);
                    param_grads_rev.push(gw);
                    grad = gi;
                }
                Stage::Softmax => unreachable!("softmax is the final stage"),
            }
        }
        param_grads_rev.reverse();
        Ok((loss, param_grads_rev))
    }

    /// Mean loss and accuracy over samples, inference mode.
    pub fn evaluate(&self, samples: &[FlatSample], batch_size: usize) -> Result<(f64, f64)> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("no samples to evaluate".into()));
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in samples.chunks(batch_size.max(1)) {
            let (data, labels) = assemble_batch(chunk);
            let probs = self.forward(&data, chunk.len(), false, None)?;
            let (loss, _) =
                layers::cross_entropy_with_logit_grad(&probs, &labels, self.class_count);
            loss_sum += loss * chunk.len() as f64;
            for (b, &label) in labels.iter().enumerate() {
                let row = &probs[b * self.class_count..(b + 1) * self.class_count];
                if argmax(row) == label {
                    correct += 1;
                }
            }
        }
        Ok((
            loss_sum / samples.len() as f64,
            correct as f64 / samples.len() as f64,
        ))
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Stage-one prediction: argmax of the inference-mode class distribution,
/// ties broken toward the lower class id.
pub fn predict_coarse(model: &CnnModel, encoded: &EncodedSample) -> Result<(usize, Vec<f64>)> {
    if encoded.max_len != model.input_len || encoded.dim != model.input_dim {
        return Err(Error::Shape {
            expected: format!("{} x {} encoding", model.input_len, model.input_dim),
            got: format!("{} x {} encoding", encoded.max_len, encoded.dim),
        });
    }
    let probs = model.forward(&encoded.data, 1, false, None)?;
    Ok((argmax(&probs), probs))
}

fn assemble_batch(samples: &[FlatSample]) -> (Vec<f64>, Vec<usize>) {
    let width = samples.first().map_or(0, |s| s.vector.len());
    let mut data = Vec::with_capacity(samples.len() * width);
    let mut labels = Vec::with_capacity(samples.len());
    for s in samples {
        data.extend_from_slice(&s.vector);
        labels.push(s.label);
    }
    (data, labels)
}

#[derive(Debug, Clone)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone)]
pub struct CnnTraining {
    pub model: CnnModel,
    pub history: TrainHistory,
}

/// Train on balanced flat samples; `val` (real samples only) drives early
/// stopping and the returned parameters come from its best epoch. An
/// empty `val` disables early stopping and keeps the final epoch.
#[allow(clippy::too_many_arguments)]
pub fn train_cnn(
    train: &[FlatSample],
    val: &[FlatSample],
    arch: &CnnArchitecture,
    cfg: &TrainConfig,
    input_len: usize,
    input_dim: usize,
    class_count: usize,
    seed: u64,
) -> Result<CnnTraining> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::Config(
            "batch size and max epochs must be >= 1".into(),
        ));
    }
    let width = input_len * input_dim;
    for s in train.iter().chain(val) {
        if s.vector.len() != width {
            return Err(Error::Shape {
                expected: format!("{width}-value sample vectors"),
                got: format!("{}-value sample vector", s.vector.len()),
            });
        }
        if s.label >= class_count {
            return Err(Error::InvalidArgument(format!(
                "label {} outside {class_count} classes",
                s.label
            )));
        }
    }

    let mut model = CnnModel::build(arch.clone(), input_len, input_dim, class_count, Some(seed))?;
    let mut adam = AdamState::new(&model.param_shapes());
    let mut shuffle_rng = rng::substream(seed, rng::stream::CNN_SHUFFLE);
    let mut dropout_rng = rng::substream(seed, rng::stream::CNN_DROPOUT);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = TrainHistory {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_accuracy: Vec::new(),
        best_epoch: 0,
    };
    let mut best_val = f64::INFINITY;
    let mut best_params: Option<Vec<Vec<f64>>> = None;
    let mut stalled = 0usize;

    for epoch in 0..cfg.max_epochs {
        rand::seq::SliceRandom::shuffle(&mut order[..], &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<FlatSample> = chunk.iter().map(|&i| train[i].clone()).collect();
            let (data, labels) = assemble_batch(&batch);
            let (loss, grads) =
                model.loss_and_grads(&data, batch.len(), &labels, true, Some(&mut dropout_rng))?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            adam.step(&mut model.params_mut(), &grads, &cfg.adam)?;
            loss_sum += loss * batch.len() as f64;
        }
        history.train_loss.push(loss_sum / train.len() as f64);

        if !val.is_empty() {
            let (val_loss, val_acc) = model.evaluate(val, cfg.batch_size)?;
            if !val_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            history.val_loss.push(val_loss);
            history.val_accuracy.push(val_acc);
            if val_loss < best_val {
                best_val = val_loss;
                history.best_epoch = epoch;
                best_params = Some(model.snapshot_params());
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= cfg.patience {
                    break;
                }
            }
        } else {
            history.best_epoch = epoch;
        }
    }

    if let Some(params) = best_params {
        model.set_params(&params)?;
    }
    Ok(CnnTraining { model, history })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_arch() -> CnnArchitecture {
        CnnArchitecture {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 2,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Flatten,
            ],
        }
    }

    #[test]
    fn default_architecture_is_valid() {
        CnnArchitecture::default().validate().unwrap();
    }

    #[test]
    fn validation_rejects_structural_errors() {
        let missing_dropout = CnnArchitecture {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 2,
                },
                LayerSpec::Flatten,
            ],
        };
        assert!(missing_dropout.validate().is_err());

        let dense_before_flatten = CnnArchitecture {
            hidden: vec![
                LayerSpec::Dense { units: 8 },
                LayerSpec::Dropout { rate: 0.5 },
                LayerSpec::Flatten,
            ],
        };
        assert!(dense_before_flatten.validate().is_err());

        let no_flatten = CnnArchitecture { hidden: vec![] };
        assert!(no_flatten.validate().is_err());

        let stray_dropout = CnnArchitecture {
            hidden: vec![LayerSpec::Dropout { rate: 0.5 }, LayerSpec::Flatten],
        };
        assert!(stray_dropout.validate().is_err());

        let bad_rate = CnnArchitecture {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 4,
                    kernel: 2,
                },
                LayerSpec::Dropout { rate: 1.0 },
                LayerSpec::Flatten,
            ],
        };
        assert!(bad_rate.validate().is_err());
    }

    #[test]
    fn kernel_larger_than_sequence_is_rejected() {
        let arch = CnnArchitecture {
            hidden: vec![
                LayerSpec::Conv1d {
                    filters: 2,
                    kernel: 9,
                },
                LayerSpec::Dropout { rate: 0.2 },
                LayerSpec::Flatten,
            ],
        };
        assert!(CnnModel::build(arch, 4, 3, 2, Some(0)).is_err());
    }

    #[test]
    fn forward_rows_are_probability_distributions() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 5, Some(7)).unwrap();
        let data: Vec<f64> = (0..2 * 6 * 3).map(|i| (i as f64) * 0.1 - 1.0).collect();
        let probs = model.forward(&data, 2, false, None).unwrap();
        assert_eq!(probs.len(), 2 * 5);
        for b in 0..2 {
            let row = &probs[b * 5..(b + 1) * 5];
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn all_zero_input_yields_valid_probabilities() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 4, Some(1)).unwrap();
        let probs = model.forward(&vec![0.0; 18], 1, false, None).unwrap();
        assert!(probs.iter().all(|p| p.is_finite()));
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn inference_is_deterministic() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 4, Some(1)).unwrap();
        let data: Vec<f64> = (0..18).map(|i| i as f64 * 0.05).collect();
        let a = model.forward(&data, 1, false, None).unwrap();
        let b = model.forward(&data, 1, false, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_model_is_uniform_and_ties_break_low() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 6, None).unwrap();
        let data = vec![0.5; 18];
        let probs = model.forward(&data, 1, false, None).unwrap();
        for &p in &probs {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
        let (loss, _) = model
            .loss_and_grads(&data, 1, &[2], false, None)
            .unwrap();
        assert!((loss - 6.0f64.ln()).abs() < 1e-12);

        let enc = EncodedSample {
            data,
            length: 6,
            max_len: 6,
            dim: 3,
        };
        let (label, _) = predict_coarse(&model, &enc).unwrap();
        assert_eq!(label, 0);
    }

    #[test]
    fn shape_and_label_errors() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 4, Some(1)).unwrap();
        assert!(model.forward(&vec![0.0; 17], 1, false, None).is_err());
        assert!(model
            .loss_and_grads(&vec![0.0; 18], 1, &[9], false, None)
            .is_err());
        assert!(model.forward(&vec![f64::NAN; 18], 1, false, None).is_err());
        let enc = EncodedSample {
            data: vec![0.0; 12],
            length: 2,
            max_len: 4,
            dim: 3,
        };
        assert!(predict_coarse(&model, &enc).is_err());
    }

    #[test]
    fn training_mode_without_rng_is_an_error() {
        let model = CnnModel::build(tiny_arch(), 6, 3, 4, Some(1)).unwrap();
        assert!(model.forward(&vec![0.0; 18], 1, true, None).is_err());
    }

    fn separable_samples(n_per_class: usize) -> Vec<FlatSample> {
        // Class 0 lives at +1 in channel 0, class 1 at -1.
        let mut out = Vec::new();
        for i in 0..n_per_class {
            let v = 1.0 + 0.01 * i as f64;
            let mut a = vec![0.0; 6 * 3];
            let mut b = vec![0.0; 6 * 3];
            for t in 0..6 {
                a[t * 3] = v;
                b[t * 3] = -v;
            }
            out.push(FlatSample::real(a, 0));
            out.push(FlatSample::real(b, 1));
        }
        out
    }

    #[test]
    fn separable_toy_set_reaches_full_accuracy() {
        let train = separable_samples(20);
        let cfg = TrainConfig {
            max_epochs: 20,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let out = train_cnn(&train, &[], &tiny_arch(), &cfg, 6, 3, 2, 3).unwrap();
        let (_, acc) = out.model.evaluate(&train, 8).unwrap();
        assert_eq!(acc, 1.0);
        let first = out.history.train_loss[0];
        let last = *out.history.train_loss.last().unwrap();
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let train = separable_samples(6);
        let cfg = TrainConfig {
            max_epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let a = train_cnn(&train, &[], &tiny_arch(), &cfg, 6, 3, 2, 11).unwrap();
        let b = train_cnn(&train, &[], &tiny_arch(), &cfg, 6, 3, 2, 11).unwrap();
        assert_eq!(a.model, b.model);
        let c = train_cnn(&train, &[], &tiny_arch(), &cfg, 6, 3, 2, 12).unwrap();
        assert_ne!(c.model, a.model);
    }

    #[test]
    fn best_epoch_has_minimal_validation_loss() {
        let train = separable_samples(10);
        let val = separable_samples(4);
        let cfg = TrainConfig {
            max_epochs: 8,
            batch_size: 8,
            patience: 3,
            ..TrainConfig::default()
        };
        let out = train_cnn(&train, &val, &tiny_arch(), &cfg, 6, 3, 2, 5).unwrap();
        let best = out.history.val_loss[out.history.best_epoch];
        for &l in &out.history.val_loss {
            assert!(best <= l + 1e-15);
        }
        // Restored parameters reproduce the recorded best loss.
        let (loss, _) = out.model.evaluate(&val, 8).unwrap();
        assert!((loss - best).abs() < 1e-9);
    }

    #[test]
    fn set_params_round_trip_and_shape_check() {
        let mut a = CnnModel::build(tiny_arch(), 6, 3, 4, Some(1)).unwrap();
        let b = CnnModel::build(tiny_arch(), 6, 3, 4, Some(2)).unwrap();
        let snapshot = b.snapshot_params();
        a.set_params(&snapshot).unwrap();
        assert_eq!(a, b);
        assert!(a.set_params(&[vec![0.0]]).is_err());
    }
}
