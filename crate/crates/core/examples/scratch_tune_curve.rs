// Temporary: tune-phase accuracy trajectory after distillation.
use elastinet::data::make_blobs;
use elastinet::elastic::*;
use elastinet::engine::*;
use elastinet::graph::*;
use elastinet::seeds;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_graph(n: usize, d: usize, w: usize, max_merge: usize, rates: &[f64]) -> SupernetGraph {
    let blocks: Vec<BlockPosition> = (0..n)
        .map(|i| BlockPosition {
            index: i,
            in_dim: d,
            out_dim: d,
            param_size: (2 * d * w + w + d) as u64,
            fusion_group: i as u32,
            width: w,
        })
        .collect();
    expand_graph(
        blocks,
        LayerShape { in_dim: 6, out_dim: d },
        LayerShape { in_dim: d, out_dim: 4 },
        1.0,
        max_merge,
        rates,
    )
    .unwrap()
}

fn mean_sampled_accuracy(
    weights: &SupernetWeights,
    graph: &SupernetGraph,
    data: &elastinet::data::Dataset,
    n: usize,
) -> f64 {
    let sampler = SubnetSampler::new(graph);
    let mut rng = ChaCha8Rng::seed_from_u64(999);
    let mut total = 0.0;
    for _ in 0..n {
        let enc = sampler.sample(&mut rng);
        total += subnet_accuracy(weights, &enc, data, 128).unwrap();
    }
    total / n as f64
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let ds = make_blobs(640, 6, 4, 3.0, &mut rng).unwrap();
    let (train, hold) = ds.split(0.25, &mut rng);
    let d = 12;
    let w = 16;
    let nblocks = 4;
    let arch = ToyArch { feature_dim: d, widths: vec![w; nblocks] };
    let model = pretrain_toy(&train, &arch, 40, 0.05, 7).unwrap();
    let graph = toy_graph(nblocks, d, w, 2, &[0.5, 0.25]);

    // Distill 150 epochs at 1e-4, snapshot.
    let mut weights =
        SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut seeds::rng(5, "branch-init"))
            .unwrap();
    let config = TrainConfig {
        distill_epochs: 150,
        tune_epochs: 0,
        lr_distill: 1e-4,
        lr_tune: 1e-5,
        batch_size: 32,
        eval_subnet_samples: 0,
        latency_bins: vec![],
        seed: 5,
        branch_init_scale: 0.05,
    };
    train_supernet(&mut weights, &graph, &config, &train, &hold).unwrap();
    println!("after distill: {:.4}", mean_sampled_accuracy(&weights, &graph, &hold, 40));

    for lr_t in [1e-5, 3e-5] {
        let mut w2 = weights.clone();
        let sampler = SubnetSampler::new(&graph);
        let mut order_rng = seeds::rng(77, "order");
        let mut sample_rng = seeds::rng(77, "sample");
        for block_ep in 0..10 {
            for _ in 0..20 {
                let mut idx: Vec<usize> = (0..train.len()).collect();
                elastinet::data::shuffle(&mut idx, &mut order_rng);
                for chunk in idx.chunks(32) {
                    let b = train.gather(chunk);
                    tune_step(&mut w2, &graph, &sampler, &b.features, &b.labels, lr_t, &mut sample_rng)
                        .unwrap();
                }
            }
            println!(
                "  lr_t={lr_t:.0e} tune {:3} epochs: {:.4} (train {:.4})",
                (block_ep + 1) * 20,
                mean_sampled_accuracy(&w2, &graph, &hold, 40),
                mean_sampled_accuracy(&w2, &graph, &train, 40)
            );
        }
    }
}
