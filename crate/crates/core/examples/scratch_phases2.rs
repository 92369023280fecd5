// Temporary: find a toy scale where distillation visibly works.
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
    for (ep, lr) in [(40, 0.05), (60, 0.03)] {
        let arch = ToyArch { feature_dim: d, widths: vec![w; nblocks] };
        let model = pretrain_toy(&train, &arch, ep, lr, 7).unwrap();
        println!(
            "pretrain ep={ep} lr={lr}: holdout {:.3}",
            model.accuracy(&hold.features, &hold.labels).unwrap()
        );
    }
    let arch = ToyArch { feature_dim: d, widths: vec![w; nblocks] };
    let model = pretrain_toy(&train, &arch, 40, 0.05, 7).unwrap();
    let graph = toy_graph(nblocks, d, w, 2, &[0.5, 0.25]);

    let train_with = |distill: usize, tune: usize, lr_d: f64, lr_t: f64| -> f64 {
        let mut weights = SupernetWeights::from_pretrained(
            &model,
            &graph,
            0.05,
            &mut seeds::rng(5, "branch-init"),
        )
        .unwrap();
        let config = TrainConfig {
            distill_epochs: distill,
            tune_epochs: tune,
            lr_distill: lr_d,
            lr_tune: lr_t,
            batch_size: 32,
            eval_subnet_samples: 0,
            latency_bins: vec![],
            seed: 5,
            branch_init_scale: 0.05,
        };
        train_supernet(&mut weights, &graph, &config, &train, &hold).unwrap();
        mean_sampled_accuracy(&weights, &graph, &hold, 40)
    };

    for (ep, lr_d) in [(50, 1e-4), (50, 3e-4), (150, 1e-4), (150, 3e-4), (300, 3e-4)] {
        let acc = train_with(ep, 0, lr_d, lr_d / 10.0);
        println!("distill-only ep={ep} lr={lr_d:.0e}: mean sampled acc {acc:.4}");
    }
}
