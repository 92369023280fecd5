// Temporary two-phase training study.
use elastinet::data::make_blobs;
use elastinet::elastic::*;
use elastinet::engine::*;
use elastinet::graph::*;
use elastinet::seeds;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn toy_graph(n: usize, max_merge: usize, rates: &[f64]) -> SupernetGraph {
    let blocks: Vec<BlockPosition> = (0..n)
        .map(|i| BlockPosition {
            index: i,
            in_dim: 8,
            out_dim: 8,
            param_size: 152,
            fusion_group: i as u32,
            width: 8,
        })
        .collect();
    expand_graph(
        blocks,
        LayerShape { in_dim: 4, out_dim: 8 },
        LayerShape { in_dim: 8, out_dim: 3 },
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
    // Harder blobs so subnet quality varies.
    let ds = make_blobs(640, 6, 4, 3.0, &mut rng).unwrap();
    let (train, hold) = ds.split(0.25, &mut rng);
    let arch = ToyArch { feature_dim: 8, widths: vec![8; 6] };
    let model = pretrain_toy(&train, &arch, 25, 0.08, 7).unwrap();
    println!(
        "pretrained holdout acc {:.3}",
        model.accuracy(&hold.features, &hold.labels).unwrap()
    );
    let graph = toy_graph(6, 2, &[0.5, 0.25]);

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

    for (lr_d, lr_t) in [(3e-4, 3e-5), (5e-4, 5e-5), (1e-3, 1e-4), (5e-4, 2e-4), (1e-3, 5e-4), (2e-3, 1e-3)] {
        let two = train_with(20, 20, lr_d, lr_t);
        let d_only = train_with(40, 0, lr_d, lr_t);
        let t_only = train_with(0, 40, lr_d, lr_t);
        println!(
            "lr_d={lr_d:.0e} lr_t={lr_t:.0e}: two-phase={two:.4} distill-only={d_only:.4} tune-only={t_only:.4}  {}",
            if two >= d_only && two >= t_only { "OK" } else { "--" }
        );
    }
}
