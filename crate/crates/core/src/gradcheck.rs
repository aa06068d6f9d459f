//! Central finite-difference verification of every analytic gradient in
//! the toolkit. Exposed as a library call so the CLI can run it as a
//! self-test on any installation.

use rand::Rng;

use crate::cnn::layers;
use crate::cnn::{CnnArchitecture, CnnModel, LayerSpec};
use crate::embedding::{pair_grads, pair_loss};
use crate::rng;

/// Probe step for central differences.
pub const EPSILON: f64 = 1e-5;
/// Largest tolerated relative error between analytic and numeric values.
pub const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub max_rel_error: f64,
    pub passed: bool,
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    !results.is_empty() && results.iter().all(|r| r.passed)
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-6);
    (analytic - numeric).abs() / denom
}

/// Compare `analytic` against central differences of `objective` over
/// every element of `x`, returning the worst relative error.
fn max_grad_error(
    x: &mut [f64],
    analytic: &[f64],
    mut objective: impl FnMut(&[f64]) -> f64,
) -> f64 {
    assert_eq!(x.len(), analytic.len());
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + EPSILON;
        let plus = objective(x);
        x[i] = orig - EPSILON;
        let minus = objective(x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * EPSILON);
        worst = worst.max(rel_error(analytic[i], numeric));
    }
    worst
}

fn fill_uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

fn check_conv1d(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-conv1d");
    let (batch, t_in, c_in, filters, kernel) = (2, 7, 3, 4, 3);
    let mut input = fill_uniform(&mut rng, batch * t_in * c_in, -1.0, 1.0);
    let mut weights = fill_uniform(&mut rng, filters * kernel * c_in, -1.0, 1.0);
    let mut bias = fill_uniform(&mut rng, filters, -1.0, 1.0);
    let t_out = t_in - kernel + 1;
    let proj = fill_uniform(&mut rng, batch * t_out * filters, -1.0, 1.0);

    // Scalar objective: projection of the conv output.
    let objective = |inp: &[f64], w: &[f64], b: &[f64]| {
        layers::conv1d_forward(inp, batch, t_in, c_in, w, b, filters, kernel)
            .iter()
            .zip(&proj)
            .map(|(o, p)| o * p)
            .sum::<f64>()
    };
    let (gi, gw, gb) =
        layers::conv1d_backward(&input, batch, t_in, c_in, &weights, filters, kernel, &proj);

    let w_snapshot = weights.clone();
    let b_snapshot = bias.clone();
    let mut worst = max_grad_error(&mut input, &gi, |inp| {
        objective(inp, &w_snapshot, &b_snapshot)
    });
    let i_snapshot = input.clone();
    worst = worst.max(max_grad_error(&mut weights, &gw, |w| {
        objective(&i_snapshot, w, &b_snapshot)
    }));
    let w_snapshot = weights.clone();
    worst.max(max_grad_error(&mut bias, &gb, |b| {
        objective(&i_snapshot, &w_snapshot, b)
    }))
}

fn check_dense(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-dense");
    let (batch, inputs, units) = (2, 5, 4);
    let mut input = fill_uniform(&mut rng, batch * inputs, -1.0, 1.0);
    let mut weights = fill_uniform(&mut rng, units * inputs, -1.0, 1.0);
    let mut bias = fill_uniform(&mut rng, units, -1.0, 1.0);
    let proj = fill_uniform(&mut rng, batch * units, -1.0, 1.0);

    let objective = |inp: &[f64], w: &[f64], b: &[f64]| {
        layers::dense_forward(inp, batch, inputs, w, b, units)
            .iter()
            .zip(&proj)
            .map(|(o, p)| o * p)
            .sum::<f64>()
    };
    let (gi, gw, gb) = layers::dense_backward(&input, batch, inputs, &weights, units, &proj);

    let w_snapshot = weights.clone();
    let b_snapshot = bias.clone();
    let mut worst = max_grad_error(&mut input, &gi, |inp| {
        objective(inp, &w_snapshot, &b_snapshot)
    });
    let i_snapshot = input.clone();
    worst = worst.max(max_grad_error(&mut weights, &gw, |w| {
        objective(&i_snapshot, w, &b_snapshot)
    }));
    let w_snapshot = weights.clone();
    worst.max(max_grad_error(&mut bias, &gb, |b| {
        objective(&i_snapshot, &w_snapshot, b)
    }))
}

fn check_relu(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-relu");
    // Keep inputs away from the kink at zero.
    let mut input: Vec<f64> = (0..40)
        .map(|_| {
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen::<bool>() {
                v
            } else {
                -v
            }
        })
        .collect();
    let proj = fill_uniform(&mut rng, input.len(), -1.0, 1.0);
    let analytic = layers::relu_backward(&input, &proj);
    max_grad_error(&mut input, &analytic, |inp| {
        layers::relu_forward(inp)
            .iter()
            .zip(&proj)
            .map(|(o, p)| o * p)
            .sum()
    })
}

fn check_dropout_inference(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-dropout");
    // Inference-mode dropout is the identity, so the gradient is the
    // projection itself.
    let mut input = fill_uniform(&mut rng, 30, -1.0, 1.0);
    let proj = fill_uniform(&mut rng, 30, -1.0, 1.0);
    let analytic = proj.clone();
    max_grad_error(&mut input, &analytic, |inp| {
        inp.iter().zip(&proj).map(|(o, p)| o * p).sum()
    })
}

fn check_softmax_cross_entropy(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-softmax");
    let (batch, classes) = (3, 6);
    let mut logits = fill_uniform(&mut rng, batch * classes, -2.0, 2.0);
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();

    let probs = layers::softmax_forward(&logits, batch, classes);
    let (_, analytic) = layers::cross_entropy_with_logit_grad(&probs, &labels, classes);
    max_grad_error(&mut logits, &analytic, |l| {
        let p = layers::softmax_forward(l, batch, classes);
        layers::cross_entropy_with_logit_grad(&p, &labels, classes).0
    })
}

fn check_word2vec_loss(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-word2vec");
    let dim = 8;
    let mut center = fill_uniform(&mut rng, dim, -1.0, 1.0);
    let mut context = fill_uniform(&mut rng, dim, -1.0, 1.0);
    let negatives: Vec<Vec<f64>> =
        (0..3).map(|_| fill_uniform(&mut rng, dim, -1.0, 1.0)).collect();

    let neg_refs: Vec<&[f64]> = negatives.iter().map(Vec::as_slice).collect();
    let (g_center, g_context, g_negs) = pair_grads(&center, &context, &neg_refs);

    let ctx_snapshot = context.clone();
    let negs_snapshot = negatives.clone();
    let loss_of = |c: &[f64], ctx: &[f64], negs: &[Vec<f64>]| {
        let refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
        pair_loss(c, ctx, &refs)
    };
    let mut worst = max_grad_error(&mut center, &g_center, |c| {
        loss_of(c, &ctx_snapshot, &negs_snapshot)
    });
    let center_snapshot = center.clone();
    worst = worst.max(max_grad_error(&mut context, &g_context, |ctx| {
        loss_of(&center_snapshot, ctx, &negs_snapshot)
    }));
    let ctx_snapshot = context.clone();
    for j in 0..negatives.len() {
        let analytic = g_negs[j].clone();
        let mut probe = negatives[j].clone();
        let others = negatives.clone();
        worst = worst.max(max_grad_error(&mut probe, &analytic, |n| {
            let mut negs = others.clone();
            negs[j] = n.to_vec();
            loss_of(&center_snapshot, &ctx_snapshot, &negs)
        }));
    }
    worst
}

fn check_full_model(seed: u64) -> f64 {
    let mut rng = rng::substream(seed, "gradcheck-model");
    let arch = CnnArchitecture {
        hidden: vec![
            LayerSpec::Conv1d {
                filters: 3,
                kernel: 2,
            },
            LayerSpec::Dropout { rate: 0.25 },
            LayerSpec::Flatten,
            LayerSpec::Dense { units: 5 },
            LayerSpec::Dropout { rate: 0.5 },
        ],
    };
    let (input_len, input_dim, classes, batch) = (5, 3, 4, 2);
    let mut model = CnnModel::build(arch, input_len, input_dim, classes, Some(seed)).unwrap();
    let data = fill_uniform(&mut rng, batch * input_len * input_dim, -1.0, 1.0);
    let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..classes)).collect();

    // Dropout stays in inference mode: a resampled mask would change the
    // objective between the two probe evaluations.
    let (_, analytic) = model
        .loss_and_grads(&data, batch, &labels, false, None)
        .unwrap();
    let shapes = model.param_shapes();
    let mut worst = 0.0f64;
    for (tensor, analytic_tensor) in analytic.iter().enumerate() {
        for i in 0..shapes[tensor] {
            let orig = model.params()[tensor][i];
            model.params_mut()[tensor][i] = orig + EPSILON;
            let plus = model
                .loss_and_grads(&data, batch, &labels, false, None)
                .unwrap()
                .0;
            model.params_mut()[tensor][i] = orig - EPSILON;
            let minus = model
                .loss_and_grads(&data, batch, &labels, false, None)
                .unwrap()
                .0;
            model.params_mut()[tensor][i] = orig;
            let numeric = (plus - minus) / (2.0 * EPSILON);
            worst = worst.max(rel_error(analytic_tensor[i], numeric));
        }
    }
    worst
}

/// Run every gradient check with substreams of `seed`.
pub fn run_all_checks(seed: u64) -> Vec<CheckResult> {
    let checks: [(&'static str, fn(u64) -> f64); 7] = [
        ("conv1d", check_conv1d),
        ("dense", check_dense),
        ("relu", check_relu),
        ("dropout-inference", check_dropout_inference),
        ("softmax-cross-entropy", check_softmax_cross_entropy),
        ("word2vec-loss", check_word2vec_loss),
        ("full-model", check_full_model),
    ];
    checks
        .iter()
        .map(|&(name, f)| {
            let max_rel_error = f(seed);
            CheckResult {
                name,
                max_rel_error,
                passed: max_rel_error < TOLERANCE,
            }
        })
        .collect()
}
