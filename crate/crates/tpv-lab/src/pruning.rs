//! Structured pruning scores derived from the TPV trace form, plus the
//! baselines and an iterative global-pruning loop for small MLP
//! classifiers.
//!
//! A hidden neuron is one removable group: its fan-in row, bias, and
//! fan-out column. Group scores follow score(w_g) = E_x[(m(x)ᵀ·J_g·w_g)²]
//! where m is the logit-space direction: p − e_argmax for the label-free
//! JBR criterion, p − y for JC and first-order Taylor saliency.
//!
//! Only single-hidden-layer networks are grouped: deeper MLPs would make
//! adjacent neuron groups share fan-in/fan-out entries, and dependency-graph
//! pruning is out of scope.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::nn::{layer_spans, Network};
use crate::rng::{derive_seed, StreamRng};

/// Confidence threshold for JBR sample selection.
pub const DEFAULT_CONFIDENCE_TAU: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PruneError {
    #[error("network must have at least two outputs for softmax scores")]
    NotAClassifier,
    #[error("grouping requires exactly one hidden layer, got {hidden} hidden layers")]
    UnsupportedDepth { hidden: usize },
    #[error("no samples above the confidence threshold")]
    NoConfidentSamples,
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("pruning would empty layer {layer} at iteration {iteration}")]
    LayerCollapse { layer: usize, iteration: usize },
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// A removable parameter group: disjoint index sets into the flat vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamGroup {
    pub id: String,
    /// Hidden layer the neuron lives in (0-based).
    pub layer: usize,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    Jbr,
    Jc,
    L1,
    Taylor,
    Random,
}

impl Criterion {
    pub fn label(&self) -> &'static str {
        match self {
            Criterion::Jbr => "jbr",
            Criterion::Jc => "jc",
            Criterion::L1 => "l1",
            Criterion::Taylor => "taylor",
            Criterion::Random => "random",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupScore {
    pub group: String,
    pub score: f64,
    pub criterion: Criterion,
}

/// One hidden neuron = one group: fan-in row, bias, fan-out column.
pub fn neuron_groups(net: &Network) -> Result<Vec<ParamGroup>, PruneError> {
    let hidden = net.config.hidden_widths.len();
    if hidden != 1 {
        return Err(PruneError::UnsupportedDepth { hidden });
    }
    let spans = layer_spans(&net.config);
    let first = spans[0];
    let second = spans[1];
    let width = first.out;
    let mut groups = Vec::with_capacity(width);
    for j in 0..width {
        let mut indices = Vec::with_capacity(first.inp + 1 + second.out);
        for i in 0..first.inp {
            indices.push(first.w_off + j * first.inp + i);
        }
        indices.push(first.b_off + j);
        for k in 0..second.out {
            indices.push(second.w_off + k * second.inp + j);
        }
        groups.push(ParamGroup {
            id: format!("h0_n{j}"),
            layer: 0,
            indices,
        });
    }
    debug_assert!({
        let mut seen = std::collections::HashSet::new();
        groups
            .iter()
            .flat_map(|g| g.indices.iter())
            .all(|&i| seen.insert(i))
    });
    Ok(groups)
}

/// Row-wise softmax of a logits matrix, numerically stable.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Argmax with ties broken toward the lowest class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// −log p_c with a numerically stable log-softmax.
pub fn neg_log_prob(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[class]
}

/// mask_i = (max softmax probability of sample i) > tau.
pub fn confident_sample_mask(
    net: &Network,
    xs: &Matrix,
    tau: f64,
) -> Result<Vec<bool>, PruneError> {
    if net.config.output_dim < 2 {
        return Err(PruneError::NotAClassifier);
    }
    let probs = softmax_rows(&net.batch_forward(xs)?);
    Ok((0..probs.rows())
        .map(|i| {
            let row = probs.row(i);
            row[argmax_row(row)] > tau
        })
        .collect())
}

fn select_rows(m: &Matrix, keep: &[bool]) -> Matrix {
    let kept = keep.iter().filter(|&&k| k).count();
    let mut out = Matrix::zeros(kept, m.cols());
    let mut r = 0;
    for (i, &k) in keep.iter().enumerate() {
        if k {
            out.row_mut(r).copy_from_slice(m.row(i));
            r += 1;
        }
    }
    out
}

/// Core score: mean over samples of (m(x)ᵀ·J_g·w_g)², computed from one
/// per-sample VJP with upstream m(x). `only` restricts to active groups.
fn group_direction_scores(
    net: &Network,
    xs: &Matrix,
    upstream: &Matrix,
    groups: &[ParamGroup],
    criterion: Criterion,
) -> Result<Vec<GroupScore>, PruneError> {
    let cache = net.forward_cached(xs)?;
    let per_sample = net.vjp_batch(&cache, upstream); // n×p
    let n = xs.rows();
    let mut scores = Vec::with_capacity(groups.len());
    for group in groups {
        let mut acc = 0.0;
        for i in 0..n {
            let row = per_sample.row(i);
            let mut s = 0.0;
            for &idx in &group.indices {
                s += row[idx] * net.params.0[idx];
            }
            acc += s * s;
        }
        scores.push(GroupScore {
            group: group.id.clone(),
            score: acc / n as f64,
            criterion,
        });
    }
    Ok(scores)
}

/// Label-free JBR importance on a confident subset: m(x) = p(x) − e_c(x)
/// with c(x) the scored network's own argmax.
pub fn jbr_score(
    net: &Network,
    xs_confident: &Matrix,
    groups: &[ParamGroup],
) -> Result<Vec<GroupScore>, PruneError> {
    if net.config.output_dim < 2 {
        return Err(PruneError::NotAClassifier);
    }
    if xs_confident.rows() == 0 {
        return Err(PruneError::NoConfidentSamples);
    }
    let logits = net.batch_forward(xs_confident)?;
    let mut upstream = softmax_rows(&logits);
    for i in 0..upstream.rows() {
        let c = argmax_row(logits.row(i));
        upstream.set(i, c, upstream.get(i, c) - 1.0);
    }
    group_direction_scores(net, xs_confident, &upstream, groups, Criterion::Jbr)
}

/// Label-aware JC importance: m(x) = p(x) − y(x) with one-hot (or soft)
/// labels. Identical to JBR whenever the labels equal the model's argmax
/// one-hots on the scored subset.
pub fn jc_score(
    net: &Network,
    xs: &Matrix,
    labels_onehot: &Matrix,
    groups: &[ParamGroup],
) -> Result<Vec<GroupScore>, PruneError> {
    if net.config.output_dim < 2 {
        return Err(PruneError::NotAClassifier);
    }
    if labels_onehot.rows() != xs.rows() || labels_onehot.cols() != net.config.output_dim {
        return Err(PruneError::Dim(format!(
            "labels {}×{} vs {} samples × {} classes",
            labels_onehot.rows(),
            labels_onehot.cols(),
            xs.rows(),
            net.config.output_dim
        )));
    }
    let logits = net.batch_forward(xs)?;
    let mut upstream = softmax_rows(&logits);
    for (u, &y) in upstream.as_mut_slice().iter_mut().zip(labels_onehot.as_slice()) {
        *u -= y;
    }
    group_direction_scores(net, xs, &upstream, groups, Criterion::Jc)
}

/// Baseline criteria. L1 is ‖w_g‖₁, Taylor the first-order cross-entropy
/// saliency (numerically the JC form), Random a seeded uniform score.
pub fn baseline_scores(
    net: &Network,
    xs: &Matrix,
    labels_onehot: &Matrix,
    groups: &[ParamGroup],
    criterion: Criterion,
    seed: u64,
) -> Result<Vec<GroupScore>, PruneError> {
    match criterion {
        Criterion::L1 => Ok(groups
            .iter()
            .map(|g| GroupScore {
                group: g.id.clone(),
                score: g.indices.iter().map(|&i| net.params.0[i].abs()).sum(),
                criterion,
            })
            .collect()),
        Criterion::Random => {
            let mut rng = StreamRng::new(derive_seed(seed, &[0x7072_756e]));
            Ok(groups
                .iter()
                .map(|g| GroupScore {
                    group: g.id.clone(),
                    score: rng.uniform(),
                    criterion,
                })
                .collect())
        }
        Criterion::Taylor => {
            let mut scores = jc_score(net, xs, labels_onehot, groups)?;
            for s in scores.iter_mut() {
                s.criterion = Criterion::Taylor;
            }
            Ok(scores)
        }
        Criterion::Jbr | Criterion::Jc => Err(PruneError::Dim(
            "use jbr_score/jc_score for the Jacobian criteria".into(),
        )),
    }
}

/// One point of a pruning trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    /// Fraction of hidden neurons removed.
    pub sparsity: f64,
    pub params_remaining: usize,
    pub macs_fraction: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneTrajectory {
    pub criterion: Criterion,
    pub points: Vec<TrajectoryPoint>,
    /// Set when the schedule had to stop early to avoid emptying a layer.
    pub layer_collapse: Option<usize>,
}

fn classification_accuracy(net: &Network, xs: &Matrix, labels: &[usize]) -> f64 {
    let logits = net.batch_forward(xs).expect("shapes fixed by caller");
    let mut hits = 0usize;
    for (i, &label) in labels.iter().enumerate() {
        if argmax_row(logits.row(i)) == label {
            hits += 1;
        }
    }
    hits as f64 / labels.len() as f64
}

fn macs_fraction(net: &Network, active: &[bool]) -> f64 {
    let dims = net.config.layer_dims();
    let width_active = active.iter().filter(|&&a| a).count();
    let full: usize = dims.iter().map(|(i, o)| i * o).sum();
    // Single hidden layer: d×w plus w×K scale with the live width.
    let (d, w) = dims[0];
    let (_, k) = dims[1];
    let pruned = d * width_active + width_active * k;
    let _ = w;
    pruned as f64 / full as f64
}

/// Iterative global pruning with per-iteration score recomputation and no
/// fine-tuning between steps. Group sparsity follows the geometric schedule
/// 1 − (1−target)^{k/iterations}. Scores come from `train` (JBR restricts
/// it to the confident subset); accuracy is measured on `eval`.
#[allow(clippy::too_many_arguments)]
pub fn iterative_global_prune(
    net: &Network,
    train_xs: &Matrix,
    train_labels_onehot: &Matrix,
    eval_xs: &Matrix,
    eval_labels: &[usize],
    criterion: Criterion,
    target_sparsity: f64,
    iterations: usize,
    tau: f64,
    seed: u64,
) -> Result<PruneTrajectory, PruneError> {
    assert!((0.0..1.0).contains(&target_sparsity));
    let groups = neuron_groups(net)?;
    let total = groups.len();
    let mut active = vec![true; total];
    let mut current = net.clone();
    let mut points = Vec::new();
    let mut layer_collapse = None;

    let record = |net: &Network, active: &[bool], iteration: usize| {
        let removed = active.iter().filter(|&&a| !a).count();
        let pruned_param_count: usize = groups
            .iter()
            .zip(active)
            .filter(|(_, &a)| !a)
            .map(|(g, _)| g.indices.len())
            .sum();
        TrajectoryPoint {
            iteration,
            sparsity: removed as f64 / total as f64,
            params_remaining: net.param_count() - pruned_param_count,
            macs_fraction: macs_fraction(net, active),
            accuracy: classification_accuracy(net, eval_xs, eval_labels),
        }
    };

    points.push(record(&current, &active, 0));
    if target_sparsity == 0.0 || iterations == 0 {
        return Ok(PruneTrajectory {
            criterion,
            points,
            layer_collapse: None,
        });
    }

    'outer: for iter in 1..=iterations {
        let keep_frac = (1.0 - target_sparsity).powf(iter as f64 / iterations as f64);
        let target_active = ((total as f64) * keep_frac).round().max(1.0) as usize;
        let currently_active = active.iter().filter(|&&a| a).count();
        let to_remove = currently_active.saturating_sub(target_active);
        if to_remove > 0 {
            let active_groups: Vec<ParamGroup> = groups
                .iter()
                .zip(&active)
                .filter(|(_, &a)| a)
                .map(|(g, _)| g.clone())
                .collect();
            let scores = match criterion {
                Criterion::Jbr => {
                    let mask = confident_sample_mask(&current, train_xs, tau)?;
                    if !mask.iter().any(|&m| m) {
                        return Err(PruneError::NoConfidentSamples);
                    }
                    let subset = select_rows(train_xs, &mask);
                    jbr_score(&current, &subset, &active_groups)?
                }
                Criterion::Jc => {
                    jc_score(&current, train_xs, train_labels_onehot, &active_groups)?
                }
                _ => baseline_scores(
                    &current,
                    train_xs,
                    train_labels_onehot,
                    &active_groups,
                    criterion,
                    derive_seed(seed, &[iter as u64]),
                )?,
            };
            let mut ranked: Vec<(usize, f64)> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| (i, s.score))
                .collect();
            ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));

            let mut removed_now = 0;
            for &(local_idx, _) in &ranked {
                if removed_now == to_remove {
                    break;
                }
                let group_id = &active_groups[local_idx].id;
                let global_idx = groups.iter().position(|g| &g.id == group_id).unwrap();
                let live_in_layer = groups
                    .iter()
                    .zip(&active)
                    .filter(|(g, &a)| a && g.layer == groups[global_idx].layer)
                    .count();
                if live_in_layer <= 1 {
                    layer_collapse = Some(iter);
                    points.push(record(&current, &active, iter));
                    break 'outer;
                }
                active[global_idx] = false;
                for &pidx in &groups[global_idx].indices {
                    current.params.0[pidx] = 0.0;
                }
                removed_now += 1;
            }
        }
        points.push(record(&current, &active, iter));
    }

    Ok(PruneTrajectory {
        criterion,
        points,
        layer_collapse,
    })
}
