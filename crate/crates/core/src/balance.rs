//! SMOTE oversampling of minority coarse classes in the flattened
//! embedding space. Synthesis runs on training folds only; callers are
//! responsible for keeping validation data out.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// One training point: a row-major flattening of the encoded question
/// matrix plus its coarse label.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatSample {
    pub vector: Vec<f64>,
    pub label: usize,
    pub synthetic: bool,
}

impl FlatSample {
    pub fn real(vector: Vec<f64>, label: usize) -> Self {
        Self {
            vector,
            label,
            synthetic: false,
        }
    }
}

/// Provenance of one synthetic point: `s = x + lambda * (n - x)` where
/// `x` and `n` index the original sample slice.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProvenance {
    pub class: usize,
    pub base_index: usize,
    pub neighbor_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    /// Original samples in input order, synthetics appended per class.
    pub samples: Vec<FlatSample>,
    /// Recorded only when synthesis runs in debug mode.
    pub provenance: Option<Vec<SyntheticProvenance>>,
}

#[inline]
fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// For every point, the indices of its `k` nearest neighbors by Euclidean
/// distance, ascending, excluding the point itself. Distance ties break
/// toward the lower index.
pub fn knn_indices<P: AsRef<[f64]>>(points: &[P], k: usize) -> Result<Vec<Vec<usize>>> {
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "nearest-neighbor search needs at least 2 points".into(),
        ));
    }
    if k >= points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be smaller than the point count {}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    for p in points {
        if p.as_ref().len() != dim {
            return Err(Error::Shape {
                expected: format!("{dim}-dimensional points"),
                got: format!("{}-dimensional point", p.as_ref().len()),
            });
        }
    }

    let mut out = Vec::with_capacity(points.len());
    let mut scratch: Vec<(f64, usize)> = Vec::with_capacity(points.len() - 1);
    for (i, p) in points.iter().enumerate() {
        scratch.clear();
        for (j, q) in points.iter().enumerate() {
            if j == i {
                continue;
            }
            scratch.push((squared_distance(p.as_ref(), q.as_ref()), j));
        }
        scratch.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        out.push(scratch.iter().take(k).map(|&(_, j)| j).collect());
    }
    Ok(out)
}

/// Count samples per label.
pub fn label_counts(samples: &[FlatSample]) -> BTreeMap<usize, usize> {
    let mut counts = BTreeMap::new();
    for s in samples {
        *counts.entry(s.label).or_insert(0) += 1;
    }
    counts
}

/// Oversample each class up to its target count by interpolating between a
/// random class member and one of its `k` nearest same-class neighbors.
/// Classes already at target are left alone. With `debug` set, each
/// synthetic point's (base, neighbor, lambda) triple is recorded.
pub fn smote_oversample(
    samples: &[FlatSample],
    target_counts: &BTreeMap<usize, usize>,
    k: usize,
    seed: u64,
    debug: bool,
) -> Result<SmoteOutput> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let counts = label_counts(samples);
    let mut out = SmoteOutput {
        samples: samples.to_vec(),
        provenance: debug.then(Vec::new),
    };

    for (&class, &target) in target_counts {
        let current = counts.get(&class).copied().unwrap_or(0);
        if target < current {
            return Err(Error::InvalidArgument(format!(
                "class {class}: target {target} below current count {current}"
            )));
        }
        let deficit = target - current;
        if deficit == 0 {
            continue;
        }
        if current < 2 {
            return Err(Error::InvalidArgument(format!(
                "class {class}: cannot synthesize from {current} sample(s)"
            )));
        }

        let members: Vec<usize> = samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let vectors: Vec<&[f64]> = members.iter().map(|&i| samples[i].vector.as_slice()).collect();
        let k_class = k.min(current - 1);
        let neighbors = knn_indices(&vectors, k_class)?;

        let mut class_rng = rng::substream_indexed(seed, rng::stream::SMOTE, class as u64);
        for _ in 0..deficit {
            let base_local = class_rng.gen_range(0..members.len());
            let neighbor_local = neighbors[base_local][class_rng.gen_range(0..k_class)];
            let lambda: f64 = class_rng.gen();

            let x = &samples[members[base_local]].vector;
            let n = &samples[members[neighbor_local]].vector;
            let vector: Vec<f64> = x
                .iter()
                .zip(n)
                .map(|(&xv, &nv)| xv + lambda * (nv - xv))
                .collect();
            out.samples.push(FlatSample {
                vector,
                label: class,
                synthetic: true,
            });
            if let Some(p) = out.provenance.as_mut() {
                p.push(SyntheticProvenance {
                    class,
                    base_index: members[base_local],
                    neighbor_index: members[neighbor_local],
                    lambda,
                });
            }
        }
    }
    Ok(out)
}

/// Oversample every class to the majority-class count.
pub fn balance_to_majority(
    samples: &[FlatSample],
    k: usize,
    seed: u64,
    debug: bool,
) -> Result<SmoteOutput> {
    let counts = label_counts(samples);
    let majority = counts.values().copied().max().unwrap_or(0);
    let targets: BTreeMap<usize, usize> = counts.keys().map(|&c| (c, majority)).collect();
    smote_oversample(samples, &targets, k, seed, debug)
}

/// Render provenance records as `class<TAB>x_index<TAB>n_index<TAB>lambda`
/// lines for the debug dump.
pub fn provenance_to_string(records: &[SyntheticProvenance]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.class, r.base_index, r.neighbor_index, r.lambda
        );
    }
    out
}
