//! Forward and backward primitives for the 1D CNN. All buffers are flat
//! row-major `f64` slices; shapes travel alongside as explicit arguments.
//!
//! Layout conventions: sequence tensors are `[batch][time][channel]`,
//! dense tensors `[batch][feature]`, conv weights `[filter][tap][channel]`,
//! dense weights `[unit][input]`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Valid cross-correlation over the time axis, stride 1:
/// `out[b,t,f] = bias[f] + sum_{k,c} input[b,t+k,c] * w[f,k,c]`.
pub fn conv1d_forward(
    input: &[f64],
    batch: usize,
    t_in: usize,
    c_in: usize,
    weights: &[f64],
    bias: &[f64],
    filters: usize,
    kernel: usize,
) -> Vec<f64> {
    debug_assert_eq!(input.len(), batch * t_in * c_in);
    debug_assert_eq!(weights.len(), filters * kernel * c_in);
    debug_assert_eq!(bias.len(), filters);
    debug_assert!(kernel <= t_in);
    let t_out = t_in - kernel + 1;
    let mut out = vec![0.0; batch * t_out * filters];
    for b in 0..batch {
        let in_base = b * t_in * c_in;
        let out_base = b * t_out * filters;
        for t in 0..t_out {
            for f in 0..filters {
                let w_base = f * kernel * c_in;
                let mut acc = bias[f];
                for k in 0..kernel {
                    let row = in_base + (t + k) * c_in;
                    let w_row = w_base + k * c_in;
                    for c in 0..c_in {
                        acc += input[row + c] * weights[w_row + c];
                    }
                }
                out[out_base + t * filters + f] = acc;
            }
        }
    }
    out
}

/// Gradients of the conv forward pass: returns (d input, d weights, d bias).
pub fn conv1d_backward(
    input: &[f64],
    batch: usize,
    t_in: usize,
    c_in: usize,
    weights: &[f64],
    filters: usize,
    kernel: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let t_out = t_in - kernel + 1;
    debug_assert_eq!(grad_out.len(), batch * t_out * filters);
    let mut grad_input = vec![0.0; batch * t_in * c_in];
    let mut grad_weights = vec![0.0; weights.len()];
    let mut grad_bias = vec![0.0; filters];
    for b in 0..batch {
        let in_base = b * t_in * c_in;
        let out_base = b * t_out * filters;
        for t in 0..t_out {
            for f in 0..filters {
                let go = grad_out[out_base + t * filters + f];
                if go == 0.0 {
                    continue;
                }
                grad_bias[f] += go;
                let w_base = f * kernel * c_in;
                for k in 0..kernel {
                    let row = in_base + (t + k) * c_in;
                    let w_row = w_base + k * c_in;
                    for c in 0..c_in {
                        grad_input[row + c] += go * weights[w_row + c];
                        grad_weights[w_row + c] += go * input[row + c];
                    }
                }
            }
        }
    }
    (grad_input, grad_weights, grad_bias)
}

pub fn relu_forward(input: &[f64]) -> Vec<f64> {
    input.iter().map(|&v| v.max(0.0)).collect()
}

/// Derivative gate on the pre-activation input; the derivative at exactly
/// zero is taken as zero.
pub fn relu_backward(input: &[f64], grad_out: &[f64]) -> Vec<f64> {
    input
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect()
}

/// Inverted dropout: each kept element is scaled by 1/(1-rate) so the
/// inference pass (identity) matches the training-mode expectation.
/// Returns the output and the applied mask of 0/scale factors.
pub fn dropout_forward(input: &[f64], rate: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    debug_assert!((0.0..1.0).contains(&rate));
    if rate == 0.0 {
        return (input.to_vec(), vec![1.0; input.len()]);
    }
    let scale = 1.0 / (1.0 - rate);
    let mut out = Vec::with_capacity(input.len());
    let mut mask = Vec::with_capacity(input.len());
    for &v in input {
        let keep = rng.gen::<f64>() >= rate;
        let m = if keep { scale } else { 0.0 };
        mask.push(m);
        out.push(v * m);
    }
    (out, mask)
}

pub fn dropout_backward(mask: &[f64], grad_out: &[f64]) -> Vec<f64> {
    mask.iter().zip(grad_out).map(|(&m, &g)| m * g).collect()
}

/// `out[b,u] = bias[u] + sum_i input[b,i] * w[u,i]`.
pub fn dense_forward(
    input: &[f64],
    batch: usize,
    inputs: usize,
    weights: &[f64],
    bias: &[f64],
    units: usize,
) -> Vec<f64> {
    debug_assert_eq!(input.len(), batch * inputs);
    debug_assert_eq!(weights.len(), units * inputs);
    let mut out = vec![0.0; batch * units];
    for b in 0..batch {
        let in_row = &input[b * inputs..(b + 1) * inputs];
        let out_row = &mut out[b * units..(b + 1) * units];
        for (u, o) in out_row.iter_mut().enumerate() {
            let w_row = &weights[u * inputs..(u + 1) * inputs];
            let mut acc = bias[u];
            for i in 0..inputs {
                acc += in_row[i] * w_row[i];
            }
            *o = acc;
        }
    }
    out
}

pub fn dense_backward(
    input: &[f64],
    batch: usize,
    inputs: usize,
    weights: &[f64],
    units: usize,
    grad_out: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(grad_out.len(), batch * units);
    let mut grad_input = vec![0.0; batch * inputs];
    let mut grad_weights = vec![0.0; weights.len()];
    let mut grad_bias = vec![0.0; units];
    for b in 0..batch {
        let in_row = &input[b * inputs..(b + 1) * inputs];
        let gi_row = &mut grad_input[b * inputs..(b + 1) * inputs];
        for u in 0..units {
            let go = grad_out[b * units + u];
            if go == 0.0 {
                continue;
            }
            grad_bias[u] += go;
            let w_row = &weights[u * inputs..(u + 1) * inputs];
            let gw_row = &mut grad_weights[u * inputs..(u + 1) * inputs];
            for i in 0..inputs {
                gi_row[i] += go * w_row[i];
                gw_row[i] += go * in_row[i];
            }
        }
    }
    (grad_input, grad_weights, grad_bias)
}

/// Row-wise stable softmax.
pub fn softmax_forward(logits: &[f64], batch: usize, classes: usize) -> Vec<f64> {
    debug_assert_eq!(logits.len(), batch * classes);
    let mut out = vec![0.0; logits.len()];
    for b in 0..batch {
        let row = &logits[b * classes..(b + 1) * classes];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (o, &v) in out[b * classes..(b + 1) * classes].iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in &mut out[b * classes..(b + 1) * classes] {
            *o /= sum;
        }
    }
    out
}

/// Mean cross-entropy over the batch plus its gradient at the logits:
/// `(probs - onehot) / batch`.
pub fn cross_entropy_with_logit_grad(
    probs: &[f64],
    labels: &[usize],
    classes: usize,
) -> (f64, Vec<f64>) {
    let batch = labels.len();
    debug_assert_eq!(probs.len(), batch * classes);
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    let inv_b = 1.0 / batch as f64;
    for (b, &label) in labels.iter().enumerate() {
        let row = &probs[b * classes..(b + 1) * classes];
        loss -= row[label].max(f64::MIN_POSITIVE).ln();
        for c in 0..classes {
            let indicator = if c == label { 1.0 } else { 0.0 };
            grad[b * classes + c] = (row[c] - indicator) * inv_b;
        }
    }
    (loss * inv_b, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn conv_matches_hand_computation() {
        // One channel, one filter: input [1,2,3], taps [10,20], bias 1.
        let out = conv1d_forward(&[1.0, 2.0, 3.0], 1, 3, 1, &[10.0, 20.0], &[1.0], 1, 2);
        assert_eq!(out, vec![51.0, 81.0]);
    }

    #[test]
    fn conv_multichannel_hand_case() {
        // T=2, C=2, K=1, F=1: pure per-step dot product with the taps.
        let input = [1.0, 2.0, 3.0, 4.0];
        let out = conv1d_forward(&input, 1, 2, 2, &[5.0, 6.0], &[0.0], 1, 1);
        assert_eq!(out, vec![17.0, 39.0]);
    }

    #[test]
    fn conv_output_length_and_batch() {
        let input = vec![0.0; 2 * 21 * 3];
        let weights = vec![0.5; 4 * 3 * 3];
        let out = conv1d_forward(&input, 2, 21, 3, &weights, &[1.0; 4], 4, 3);
        assert_eq!(out.len(), 2 * 19 * 4);
        assert!(out.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn dense_matches_hand_computation() {
        // 2 inputs, 2 units: W = [[1,2],[3,4]], b = [10, 20], x = [5, 6].
        let out = dense_forward(&[5.0, 6.0], 1, 2, &[1.0, 2.0, 3.0, 4.0], &[10.0, 20.0], 2);
        assert_eq!(out, vec![27.0, 59.0]);
    }

    #[test]
    fn relu_clamps_and_gates() {
        assert_eq!(relu_forward(&[-1.0, 0.0, 2.0]), vec![0.0, 0.0, 2.0]);
        assert_eq!(
            relu_backward(&[-1.0, 0.0, 2.0], &[5.0, 5.0, 5.0]),
            vec![0.0, 0.0, 5.0]
        );
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let probs = softmax_forward(&[1.0, 2.0, 3.0, -400.0, 0.0, 400.0], 2, 3);
        for b in 0..2 {
            let sum: f64 = probs[b * 3..(b + 1) * 3].iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
        assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn uniform_prediction_loss_is_ln_classes() {
        let logits = vec![0.7; 6];
        let probs = softmax_forward(&logits, 1, 6);
        let (loss, _) = cross_entropy_with_logit_grad(&probs, &[3], 6);
        assert!((loss - 6.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_loss_is_zero() {
        let probs = vec![0.0, 1.0, 0.0];
        let (loss, grad) = cross_entropy_with_logit_grad(&probs, &[1], 3);
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn cross_entropy_grad_sums_to_zero_per_row() {
        let probs = softmax_forward(&[0.3, -1.2, 0.8, 2.0, 0.0, -0.5], 2, 3);
        let (_, grad) = cross_entropy_with_logit_grad(&probs, &[2, 0], 3);
        for b in 0..2 {
            let sum: f64 = grad[b * 3..(b + 1) * 3].iter().sum();
            assert!(sum.abs() < 1e-12);
        }
    }

    #[test]
    fn dropout_zero_rate_is_identity() {
        let mut rng = rng::substream(1, "dropout-test");
        let x = [1.0, -2.0, 3.0];
        let (y, mask) = dropout_forward(&x, 0.0, &mut rng);
        assert_eq!(y, x.to_vec());
        assert!(mask.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn dropout_mask_values_are_zero_or_scale() {
        let mut rng = rng::substream(2, "dropout-test");
        let x = vec![1.0; 1000];
        let (y, mask) = dropout_forward(&x, 0.25, &mut rng);
        let scale = 1.0 / 0.75;
        assert!(mask.iter().all(|&m| m == 0.0 || (m - scale).abs() < 1e-15));
        for (v, m) in y.iter().zip(&mask) {
            assert_eq!(v, m);
        }
        let dropped = mask.iter().filter(|&&m| m == 0.0).count();
        // Loose binomial bound around 250.
        assert!((150..350).contains(&dropped), "dropped {dropped}");
    }

    /// Inverted scaling: averaging many train-mode passes approaches the
    /// inference (identity) output.
    #[test]
    fn dropout_expectation_matches_inference() {
        let mut rng = rng::substream(3, "dropout-test");
        let x = [2.0, -4.0, 8.0];
        let mut mean = [0.0; 3];
        let passes = 20_000;
        for _ in 0..passes {
            let (y, _) = dropout_forward(&x, 0.5, &mut rng);
            for (m, v) in mean.iter_mut().zip(&y) {
                *m += v;
            }
        }
        for (m, &v) in mean.iter_mut().zip(&x) {
            *m /= passes as f64;
            assert!(
                (*m - v).abs() / v.abs() < 0.02,
                "mean {m} vs inference {v}"
            );
        }
    }

    #[test]
    fn dropout_backward_applies_same_mask() {
        let mask = [0.0, 2.0, 2.0];
        let grads = dropout_backward(&mask, &[1.0, 1.0, -3.0]);
        assert_eq!(grads, vec![0.0, 2.0, -6.0]);
    }

    #[test]
    fn dense_backward_hand_case() {
        // Single unit, w=[2,3], x=[4,5], grad_out=[1] => gi=w, gw=x, gb=1.
        let (gi, gw, gb) = dense_backward(&[4.0, 5.0], 1, 2, &[2.0, 3.0], 1, &[1.0]);
        assert_eq!(gi, vec![2.0, 3.0]);
        assert_eq!(gw, vec![4.0, 5.0]);
        assert_eq!(gb, vec![1.0]);
    }

    #[test]
    fn conv_backward_hand_case() {
        // From conv_matches_hand_computation with grad_out = [1, 0].
        let (gi, gw, gb) = conv1d_backward(
            &[1.0, 2.0, 3.0],
            1,
            3,
            1,
            &[10.0, 20.0],
            1,
            2,
            &[1.0, 0.0],
        );
        assert_eq!(gi, vec![10.0, 20.0, 0.0]);
        assert_eq!(gw, vec![1.0, 2.0]);
        assert_eq!(gb, vec![1.0]);
    }
}
