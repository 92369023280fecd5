// Temporary: distill saturation curve and equal-budget phase comparison.
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

fn phase(
    weights: &mut SupernetWeights,
    graph: &SupernetGraph,
    train: &elastinet::data::Dataset,
    phase_name: &str,
    epochs: usize,
    lr: f64,
    order_rng: &mut rand_chacha::ChaCha8Rng,
    sample_rng: &mut rand_chacha::ChaCha8Rng,
) {
    let sampler = SubnetSampler::new(graph);
    for _ in 0..epochs {
        let mut idx: Vec<usize> = (0..train.len()).collect();
        elastinet::data::shuffle(&mut idx, order_rng);
        for chunk in idx.chunks(32) {
            let b = train.gather(chunk);
            if phase_name == "distill" {
                distill_step(weights, graph, &sampler, &b.features, lr, sample_rng).unwrap();
            } else {
                tune_step(weights, graph, &sampler, &b.features, &b.labels, lr, sample_rng).unwrap();
            }
        }
    }
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let ds = make_blobs(640, 6, 4, 3.0, &mut rng).unwrap();
    let (train, hold) = ds.split(0.25, &mut rng);

    for nblocks in [4usize, 6] {
        let d = 12;
        let w = 16;
        let arch = ToyArch { feature_dim: d, widths: vec![w; nblocks] };
        let epochs = if nblocks == 4 { 40 } else { 60 };
        let model = pretrain_toy(&train, &arch, epochs, 0.05, 7).unwrap();
        let teacher = model.accuracy(&hold.features, &hold.labels).unwrap();
        let graph = toy_graph(nblocks, d, w, 2, &[0.5, 0.25]);
        println!("== blocks={nblocks}, teacher holdout {teacher:.3}");

        // Distill saturation curve.
        let mut weights = SupernetWeights::from_pretrained(
            &model, &graph, 0.05, &mut seeds::rng(5, "branch-init"),
        )
        .unwrap();
        let mut or = seeds::rng(5, "order");
        let mut sr = seeds::rng(5, "sample");
        for step in 0..10 {
            phase(&mut weights, &graph, &train, "distill", 50, 1e-4, &mut or, &mut sr);
            println!(
                "  distill {:3}: {:.4}",
                (step + 1) * 50,
                mean_sampled_accuracy(&weights, &graph, &hold, 40)
            );
        }

        // Equal budget 400: two-phase vs each alone.
        let total = 400;
        for (dd, lr_t) in [(200, 3e-5), (200, 5e-5), (250, 5e-5)] {
            let mut w2 = SupernetWeights::from_pretrained(
                &model, &graph, 0.05, &mut seeds::rng(5, "branch-init"),
            )
            .unwrap();
            let mut or = seeds::rng(5, "order");
            let mut sr = seeds::rng(5, "sample");
            phase(&mut w2, &graph, &train, "distill", dd, 1e-4, &mut or, &mut sr);
            phase(&mut w2, &graph, &train, "tune", total - dd, lr_t, &mut or, &mut sr);
            println!(
                "  two-phase d{dd}+t{} lr_t={lr_t:.0e}: {:.4}",
                total - dd,
                mean_sampled_accuracy(&w2, &graph, &hold, 40)
            );
        }
        let mut w3 = SupernetWeights::from_pretrained(
            &model, &graph, 0.05, &mut seeds::rng(5, "branch-init"),
        )
        .unwrap();
        let mut or = seeds::rng(5, "order");
        let mut sr = seeds::rng(5, "sample");
        phase(&mut w3, &graph, &train, "tune", total, 5e-5, &mut or, &mut sr);
        println!("  tune-only {total}: {:.4}", mean_sampled_accuracy(&w3, &graph, &hold, 40));
    }
}
