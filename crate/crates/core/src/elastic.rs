//! On-cloud pipeline: pretrain the toy model, train supernet branches by
//! branch-wise distillation, then tune whole sampled paths end to end.
//!
//! Original block weights are frozen through both phases, so the
//! all-original path stays bitwise identical to the pretrained model and
//! the final latency-accuracy tradeoffs can never fall below it.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::data::{shuffle, Dataset};
use crate::engine::{
    accuracy_from_logits, block_backward, block_forward, chain_grads, cross_entropy_loss,
    distillation_loss, sgd_step, sgd_step_affine, AffineParams, BottleneckBlockParams,
    DenseArray, EngineError, SupernetWeights, ToyClassifier,
};
use crate::graph::{SubnetEncoding, SubnetSampler, SupernetGraph};
use crate::latsim::{subnet_latency, LatencyTable, SimError};
use crate::seeds;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training diverged: non-finite loss at step {step}")]
    Diverged { step: usize },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("lr_tune ({lr_tune}) must be smaller than lr_distill ({lr_distill})")]
    BadLearningRates { lr_distill: f64, lr_tune: f64 },
    #[error("latency bins must be ascending and non-overlapping")]
    BadBins,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Knobs for the two-phase supernet training schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub distill_epochs: usize,
    pub tune_epochs: usize,
    pub lr_distill: f64,
    pub lr_tune: f64,
    pub batch_size: usize,
    /// Subnets sampled per latency-range accuracy evaluation.
    pub eval_subnet_samples: usize,
    /// (low, high) latency ranges; empty means five automatic bins over
    /// the nominal latency bounds.
    pub latency_bins: Vec<(f64, f64)>,
    pub seed: u64,
    /// Scale of the uniform branch initialization.
    pub branch_init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            distill_epochs: 30,
            tune_epochs: 30,
            lr_distill: 0.05,
            lr_tune: 0.005,
            batch_size: 32,
            eval_subnet_samples: 32,
            latency_bins: Vec::new(),
            seed: 0,
            branch_init_scale: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.lr_tune >= self.lr_distill {
            return Err(TrainError::BadLearningRates {
                lr_distill: self.lr_distill,
                lr_tune: self.lr_tune,
            });
        }
        let mut prev_hi = f64::NEG_INFINITY;
        for &(lo, hi) in &self.latency_bins {
            if lo >= hi || lo < prev_hi {
                return Err(TrainError::BadBins);
            }
            prev_hi = hi;
        }
        Ok(())
    }
}

/// Architecture of the toy model to pretrain.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyArch {
    pub feature_dim: usize,
    /// Internal width of each bottleneck block, in order.
    pub widths: Vec<usize>,
}

/// Pretrains a chain classifier with plain SGD on cross-entropy.
/// Deterministic for a fixed seed; errors out on non-finite loss.
pub fn pretrain_toy(
    dataset: &Dataset,
    arch: &ToyArch,
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<ToyClassifier, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let mut rng = seeds::rng(seed, "pretrain-init");
    let d = arch.feature_dim;
    // Rectifier-friendly scale; the plain 1/sqrt(fan_in) starves the
    // double-rect blocks of signal.
    let init = |fan_in: usize| (6.0 / fan_in as f64).sqrt();
    let mut model = ToyClassifier {
        head: AffineParams::init_uniform(dataset.dim(), d, init(dataset.dim()), &mut rng),
        blocks: arch
            .widths
            .iter()
            .map(|&h| BottleneckBlockParams::init_uniform(d, h, init(d), &mut rng))
            .collect(),
        tail: AffineParams::init_uniform(d, dataset.num_classes, init(d), &mut rng),
    };

    let mut order_rng = seeds::rng(seed, "pretrain-order");
    let mut step = 0usize;
    for _ in 0..epochs {
        let mut idx: Vec<usize> = (0..dataset.len()).collect();
        shuffle(&mut idx, &mut order_rng);
        for chunk in idx.chunks(32) {
            let batch = dataset.gather(chunk);
            let logits = model.forward(&batch.features)?;
            let (loss, dlogits) = cross_entropy_loss(&logits, &batch.labels)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { step });
            }
            let blocks: Vec<&BottleneckBlockParams> = model.blocks.iter().collect();
            let (hg, bgs, tg) = chain_grads(&model.head, &blocks, &model.tail, &batch.features, &dlogits)?;
            sgd_step_affine(&mut model.head, &hg, lr);
            for (b, g) in model.blocks.iter_mut().zip(&bgs) {
                sgd_step(b, g, lr);
            }
            sgd_step_affine(&mut model.tail, &tg, lr);
            step += 1;
        }
    }
    Ok(model)
}

/// Teacher features along the all-original path: the output of every
/// original block, in position order, plus the head output up front.
fn teacher_features(
    weights: &SupernetWeights,
    graph: &SupernetGraph,
    x: &DenseArray,
) -> Result<(DenseArray, Vec<DenseArray>), EngineError> {
    let head_out = weights.head.forward(x, true)?;
    let mut feats = Vec::with_capacity(graph.num_positions());
    let mut f = head_out.clone();
    for i in 0..graph.num_positions() {
        f = block_forward(weights.block((i, 0))?, &f)?;
        feats.push(f.clone());
    }
    Ok((head_out, feats))
}

/// One branch-wise distillation step: samples a subnet, feeds each new
/// branch the teacher's feature at its start boundary, and regresses the
/// branch output onto the feature of the last original block it replaces.
/// Only the sampled branches move. Returns None when the sampled subnet
/// has no new blocks (after one resample).
pub fn distill_step<R: Rng>(
    weights: &mut SupernetWeights,
    graph: &SupernetGraph,
    sampler: &SubnetSampler,
    batch: &DenseArray,
    lr: f64,
    rng: &mut R,
) -> Result<Option<f64>, TrainError> {
    if batch.rows() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let mut enc = sampler.sample(rng);
    if enc.is_all_original() {
        enc = sampler.sample(rng);
        if enc.is_all_original() {
            return Ok(None);
        }
    }

    let (head_out, t_feats) = teacher_features(weights, graph, batch)?;
    let mut teacher = Vec::new();
    let mut student = Vec::new();
    let mut branch_inputs = Vec::new();
    let mut branch_keys = Vec::new();
    for &(start, j) in enc.choices() {
        if j == 0 {
            continue;
        }
        let span = graph.variant((start, j)).expect("sampled variant exists").span;
        let input = if start == 0 { head_out.clone() } else { t_feats[start - 1].clone() };
        let target = t_feats[start + span - 1].clone();
        let out = block_forward(weights.block((start, j))?, &input)?;
        teacher.push(target);
        student.push(out);
        branch_inputs.push(input);
        branch_keys.push((start, j));
    }
    debug_assert!(!branch_keys.is_empty());

    let (loss, grads) = distillation_loss(&teacher, &student)?;
    for ((key, input), upstream) in branch_keys.iter().zip(&branch_inputs).zip(&grads) {
        let (bg, _) = block_backward(weights.block(*key)?, input, upstream)?;
        sgd_step(weights.block_mut(*key)?, &bg, lr);
    }
    Ok(Some(loss))
}

/// One whole-model tuning step: samples a subnet, backpropagates
/// cross-entropy through the full path, and updates only the added blocks.
pub fn tune_step<R: Rng>(
    weights: &mut SupernetWeights,
    graph: &SupernetGraph,
    sampler: &SubnetSampler,
    batch: &DenseArray,
    labels: &[usize],
    lr: f64,
    rng: &mut R,
) -> Result<f64, TrainError> {
    if batch.rows() == 0 {
        return Err(TrainError::EmptyDataset);
    }
    let enc = sampler.sample(rng);
    tune_step_on(weights, graph, &enc, batch, labels, lr)
}

/// Tuning step on a fixed encoding, the core of [`tune_step`].
pub fn tune_step_on(
    weights: &mut SupernetWeights,
    graph: &SupernetGraph,
    enc: &SubnetEncoding,
    batch: &DenseArray,
    labels: &[usize],
    lr: f64,
) -> Result<f64, TrainError> {
    let _ = graph;
    let blocks: Vec<&BottleneckBlockParams> = enc
        .choices()
        .iter()
        .map(|&key| weights.block(key))
        .collect::<Result<_, _>>()?;
    let mut f = weights.head.forward(batch, true)?;
    for b in &blocks {
        f = block_forward(b, &f)?;
    }
    let logits = weights.tail.forward(&f, false)?;
    let (loss, dlogits) = cross_entropy_loss(&logits, labels)?;
    let (_, block_grads, _) = chain_grads(&weights.head, &blocks, &weights.tail, batch, &dlogits)?;
    for (&key, g) in enc.choices().iter().zip(&block_grads) {
        if key.1 != 0 {
            sgd_step(weights.block_mut(key)?, g, lr);
        }
    }
    Ok(loss)
}

/// Accuracy of one subnet over a dataset, evaluated in batches.
pub fn subnet_accuracy(
    weights: &SupernetWeights,
    enc: &SubnetEncoding,
    data: &Dataset,
    batch_size: usize,
) -> Result<f64, EngineError> {
    let mut correct = 0.0;
    for range in data.batch_ranges(batch_size) {
        let (x, labels) = data.batch(range);
        let (logits, _) = crate::engine::subnet_forward(weights, enc, &x, false)?;
        correct += accuracy_from_logits(&logits, labels) * labels.len() as f64;
    }
    Ok(correct / data.len() as f64)
}

/// Mean accuracy of uniformly sampled subnets, bucketed by table latency.
/// Bins that catch no samples are absent from the result.
#[derive(Debug, Clone, PartialEq)]
pub struct BinAccuracy {
    pub low: f64,
    pub high: f64,
    pub mean_accuracy: f64,
    pub count: usize,
}

pub fn latency_range_accuracy(
    weights: &SupernetWeights,
    graph: &SupernetGraph,
    table: &LatencyTable,
    bins: &[(f64, f64)],
    sample_count: usize,
    eval_data: &Dataset,
    seed: u64,
) -> Result<Vec<BinAccuracy>, TrainError> {
    let suffix_sampler = SubnetSampler::new(graph);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc_sum = vec![0.0; bins.len()];
    let mut counts = vec![0usize; bins.len()];
    for _ in 0..sample_count {
        let enc = suffix_sampler.sample(&mut rng);
        let lat = subnet_latency(table, &enc)?;
        let accuracy = subnet_accuracy(weights, &enc, eval_data, 256)?;
        for (b, &(lo, hi)) in bins.iter().enumerate() {
            if lat >= lo && lat < hi {
                acc_sum[b] += accuracy;
                counts[b] += 1;
                break;
            }
        }
    }
    Ok(bins
        .iter()
        .enumerate()
        .filter(|(b, _)| counts[*b] > 0)
        .map(|(b, &(low, high))| BinAccuracy {
            low,
            high,
            mean_accuracy: acc_sum[b] / counts[b] as f64,
            count: counts[b],
        })
        .collect())
}

/// One line of the training report.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: &'static str,
    pub mean_loss: f64,
    pub bins: Vec<BinAccuracy>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub bins: Vec<(f64, f64)>,
}

/// Runs the distillation phase then the tuning phase over preinitialized
/// supernet weights, recording per-epoch latency-range accuracy against
/// the nominal latency table.
pub fn train_supernet(
    weights: &mut SupernetWeights,
    graph: &SupernetGraph,
    config: &TrainConfig,
    train_data: &Dataset,
    eval_data: &Dataset,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    if train_data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }

    let nominal = crate::latsim::nominal_table(graph, &crate::latsim::DevicePreset::default());
    let bins = if config.latency_bins.is_empty() {
        let (lo, hi) = crate::latsim::latency_bounds(graph, &nominal)?;
        let span = (hi - lo).max(1e-9);
        let step = span / 5.0;
        (0..5)
            .map(|i| {
                let low = lo + step * i as f64;
                let high = if i == 4 { hi + 1e-9 } else { lo + step * (i + 1) as f64 };
                (low, high)
            })
            .collect()
    } else {
        config.latency_bins.clone()
    };

    let sampler = SubnetSampler::new(graph);
    let mut report = TrainReport { epochs: Vec::new(), bins: bins.clone() };
    let mut order_rng = seeds::rng(config.seed, "train-order");
    let mut sample_rng = seeds::rng(config.seed, "train-sample");

    let mut run_phase = |phase: &'static str,
                         epochs: usize,
                         lr: f64,
                         weights: &mut SupernetWeights,
                         report: &mut TrainReport|
     -> Result<(), TrainError> {
        for e in 0..epochs {
            let mut idx: Vec<usize> = (0..train_data.len()).collect();
            shuffle(&mut idx, &mut order_rng);
            let mut loss_sum = 0.0;
            let mut loss_count = 0usize;
            for chunk in idx.chunks(config.batch_size) {
                let batch = train_data.gather(chunk);
                let loss = match phase {
                    "distill" => distill_step(weights, graph, &sampler, &batch.features, lr, &mut sample_rng)?,
                    _ => Some(tune_step(
                        weights,
                        graph,
                        &sampler,
                        &batch.features,
                        &batch.labels,
                        lr,
                        &mut sample_rng,
                    )?),
                };
                if let Some(l) = loss {
                    if !l.is_finite() {
                        return Err(TrainError::Diverged { step: e });
                    }
                    loss_sum += l;
                    loss_count += 1;
                }
            }
            let bins_acc = latency_range_accuracy(
                weights,
                graph,
                &nominal,
                &bins,
                config.eval_subnet_samples,
                eval_data,
                seeds::stream(config.seed, "train-eval") ^ e as u64,
            )?;
            report.epochs.push(EpochRecord {
                epoch: e,
                phase,
                mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
                bins: bins_acc,
            });
        }
        Ok(())
    };

    run_phase("distill", config.distill_epochs, config.lr_distill, weights, &mut report)?;
    run_phase("tune", config.tune_epochs, config.lr_tune, weights, &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::make_blobs;
    use crate::fixtures::toy_graph;
    use crate::graph::LayerShape;

    fn toy_setup() -> (Dataset, Dataset, ToyClassifier, SupernetGraph) {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let ds = make_blobs(320, 6, 4, 5.0, &mut rng).unwrap();
        let (train, hold) = ds.split(0.25, &mut rng);
        let arch = ToyArch { feature_dim: 8, widths: vec![8; 4] };
        let model = pretrain_toy(&train, &arch, 12, 0.1, 7).unwrap();
        let graph = toy_graph(4, 2, &[0.5, 0.25]);
        (train, hold, model, graph)
    }

    #[test]
    fn pretrain_separable_blobs_above_95() {
        let (_, hold, model, _) = toy_setup();
        let acc = model.accuracy(&hold.features, &hold.labels).unwrap();
        assert!(acc >= 0.95, "holdout accuracy {acc}");
    }

    #[test]
    fn pretrain_single_class_is_perfect() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = make_blobs(40, 4, 1, 1.0, &mut rng).unwrap();
        let arch = ToyArch { feature_dim: 6, widths: vec![6, 6] };
        let model = pretrain_toy(&ds, &arch, 3, 0.05, 1).unwrap();
        assert_eq!(model.accuracy(&ds.features, &ds.labels).unwrap(), 1.0);
    }

    #[test]
    fn pretrain_is_seed_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ds = make_blobs(60, 4, 2, 5.0, &mut rng).unwrap();
        let arch = ToyArch { feature_dim: 6, widths: vec![6, 6] };
        let a = pretrain_toy(&ds, &arch, 4, 0.1, 9).unwrap();
        let b = pretrain_toy(&ds, &arch, 4, 0.1, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distill_skips_all_original_sample() {
        let (train, _, model, _) = toy_setup();
        // A graph with no branches at all: every sample is all-original.
        let graph = toy_graph(4, 0, &[]);
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let sampler = SubnetSampler::new(&graph);
        let before = weights.clone();
        let (x, _) = train.batch(0..16);
        let out = distill_step(&mut weights, &graph, &sampler, &x, 0.05, &mut ChaCha8Rng::seed_from_u64(2))
            .unwrap();
        assert_eq!(out, None);
        assert_eq!(weights, before);
    }

    #[test]
    fn teacher_copy_branch_has_zero_distill_loss() {
        let (train, _, model, graph) = toy_setup();
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        // Make the (2,-1) branch an exact copy of the original block: a
        // shrink-rate-1.0 stand-in.
        let orig = weights.originals[&2].clone();
        weights.branches.insert((2, -1), orig);

        let (x, _) = train.batch(0..16);
        let (head_out, t_feats) = teacher_features(&weights, &graph, &x).unwrap();
        let _ = head_out;
        let input = t_feats[1].clone();
        let out = block_forward(weights.block((2, -1)).unwrap(), &input).unwrap();
        let (loss, grads) =
            distillation_loss(&[t_feats[2].clone()], &[out]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn distill_overfits_one_batch() {
        let (train, _, model, graph) = toy_setup();
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let (x, _) = train.batch(0..32);
        // Train a single merged branch against the fixed batch.
        let key = (0, 1);
        let span = graph.variant(key).unwrap().span;
        let (head_out, t_feats) = teacher_features(&weights, &graph, &x).unwrap();
        let input = head_out;
        let target = t_feats[span - 1].clone();
        let mut first = None;
        let mut last = 0.0;
        for _ in 0..200 {
            let out = block_forward(weights.block(key).unwrap(), &input).unwrap();
            let (loss, grads) = distillation_loss(&[target.clone()], &[out]).unwrap();
            let (bg, _) = block_backward(weights.block(key).unwrap(), &input, &grads[0]).unwrap();
            sgd_step(weights.block_mut(key).unwrap(), &bg, 0.002);
            if first.is_none() {
                first = Some(loss);
            }
            last = loss;
        }
        assert!(
            last < 0.1 * first.unwrap(),
            "distill loss {last} vs initial {}",
            first.unwrap()
        );
    }

    #[test]
    fn tune_never_touches_originals() {
        let (train, _, model, graph) = toy_setup();
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let hash_before = weights.original_hash();
        let sampler = SubnetSampler::new(&graph);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for range in train.batch_ranges(32).into_iter().cycle().take(50) {
            let (x, labels) = train.batch(range);
            tune_step(&mut weights, &graph, &sampler, &x, labels, 0.01, &mut rng).unwrap();
        }
        assert_eq!(weights.original_hash(), hash_before);
    }

    #[test]
    fn tune_on_all_original_is_a_noop() {
        let (train, _, model, graph) = toy_setup();
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let before = weights.clone();
        let (x, labels) = train.batch(0..16);
        tune_step_on(&mut weights, &graph, &graph.all_original(), &x, labels, 0.05).unwrap();
        assert_eq!(weights, before);
    }

    #[test]
    fn tune_overfits_one_batch_with_one_branch() {
        let (train, _, model, _) = toy_setup();
        let graph = toy_graph(4, 1, &[]);
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let enc = SubnetEncoding::new(vec![(0, 1), (2, 0), (3, 0)]);
        let (x, labels) = train.batch(0..16);
        let mut acc = 0.0;
        for _ in 0..400 {
            tune_step_on(&mut weights, &graph, &enc, &x, labels, 0.02).unwrap();
            acc = {
                let (logits, _) = crate::engine::subnet_forward(&weights, &enc, &x, false).unwrap();
                accuracy_from_logits(&logits, labels)
            };
            if acc == 1.0 {
                break;
            }
        }
        assert_eq!(acc, 1.0, "single-branch path failed to fit one batch");
    }

    #[test]
    fn single_subnet_graph_has_one_bin() {
        let (_, hold, model, _) = toy_setup();
        let graph = toy_graph(4, 0, &[]);
        let weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let table = crate::latsim::nominal_table(&graph, &crate::latsim::DevicePreset::default());
        let all = subnet_latency(&table, &graph.all_original()).unwrap();
        let bins = vec![(0.0, all + 1.0)];
        let out = latency_range_accuracy(&weights, &graph, &table, &bins, 8, &hold, 3).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].count, 8);
        let direct = subnet_accuracy(&weights, &graph.all_original(), &hold, 64).unwrap();
        assert!((out[0].mean_accuracy - direct).abs() < 1e-12);
    }

    #[test]
    fn disjoint_bins_partition_samples() {
        let (_, hold, model, graph) = toy_setup();
        let weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let table = crate::latsim::nominal_table(&graph, &crate::latsim::DevicePreset::default());
        let (lo, hi) = crate::latsim::latency_bounds(&graph, &table).unwrap();
        let mid = 0.5 * (lo + hi);
        let bins = vec![(lo, mid), (mid, hi + 1e-9)];
        let out = latency_range_accuracy(&weights, &graph, &table, &bins, 40, &hold, 3).unwrap();
        let total: usize = out.iter().map(|b| b.count).sum();
        assert_eq!(total, 40);
    }

    #[test]
    fn zero_epoch_training_keeps_initial_branches() {
        let (train, hold, model, graph) = toy_setup();
        let mut weights =
            SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap();
        let before = weights.clone();
        let config = TrainConfig {
            distill_epochs: 0,
            tune_epochs: 0,
            ..TrainConfig::default()
        };
        train_supernet(&mut weights, &graph, &config, &train, &hold).unwrap();
        assert_eq!(weights, before);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let (train, hold, model, graph) = toy_setup();
        let config = TrainConfig {
            distill_epochs: 2,
            tune_epochs: 2,
            eval_subnet_samples: 4,
            seed: 11,
            ..TrainConfig::default()
        };
        let run = || {
            let mut weights = SupernetWeights::from_pretrained(
                &model,
                &graph,
                config.branch_init_scale,
                &mut seeds::rng(config.seed, "branch-init"),
            )
            .unwrap();
            train_supernet(&mut weights, &graph, &config, &train, &hold).unwrap();
            weights
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.lr_tune = c.lr_distill;
        assert!(c.validate().is_err());

        let mut c = TrainConfig::default();
        c.latency_bins = vec![(0.0, 1.0), (0.5, 2.0)];
        assert!(c.validate().is_err());

        let mut c = TrainConfig::default();
        c.latency_bins = vec![(0.0, 1.0), (1.0, 2.0)];
        assert!(c.validate().is_ok());
    }

    #[test]
    fn head_shapes_come_from_graph() {
        let g = toy_graph(4, 2, &[0.5]);
        assert_eq!(g.head, LayerShape { in_dim: 4, out_dim: 8 });
    }
}
