// Temporary tuning scratchpad; removed before release.
use elastinet::data::make_blobs;
use elastinet::elastic::*;
use elastinet::engine::*;
use elastinet::graph::*;
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

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let ds = make_blobs(320, 6, 4, 5.0, &mut rng).unwrap();
    let (train, hold) = ds.split(0.25, &mut rng);
    for (epochs, lr) in [(4, 0.05), (8, 0.05), (12, 0.1), (20, 0.1), (30, 0.05), (30, 0.2)] {
        let arch = ToyArch { feature_dim: 8, widths: vec![8; 4] };
        match pretrain_toy(&train, &arch, epochs, lr, 7) {
            Ok(model) => {
                let acc = model.accuracy(&hold.features, &hold.labels).unwrap();
                let tr = model.accuracy(&train.features, &train.labels).unwrap();
                println!("epochs={epochs} lr={lr}: holdout={acc:.3} train={tr:.3}");
            }
            Err(e) => println!("epochs={epochs} lr={lr}: {e}"),
        }
    }

    // distill overfit debug
    let arch = ToyArch { feature_dim: 8, widths: vec![8; 4] };
    let model = pretrain_toy(&train, &arch, 12, 0.1, 7).unwrap();
    let graph = toy_graph(4, 2, &[0.5, 0.25]);
    let mut weights =
        SupernetWeights::from_pretrained(&model, &graph, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
    let (x, _) = train.batch(0..32);
    let key = (0, 1);
    // teacher features
    let head_out = weights.head.forward(&x, true).unwrap();
    let mut t_feats = vec![];
    let mut f = head_out.clone();
    for i in 0..4 {
        f = block_forward(weights.block((i, 0)).unwrap(), &f).unwrap();
        t_feats.push(f.clone());
    }
    let input = head_out;
    let target = t_feats[1].clone();
    println!(
        "target scale: mean abs {:.3}",
        target.data().iter().map(|v| v.abs()).sum::<f64>() / target.data().len() as f64
    );
    for lr in [0.002, 0.0005, 0.0001, 0.00002] {
        let mut w = weights.clone();
        let mut first = None;
        let mut last = 0.0;
        for step in 0..200 {
            let out = block_forward(w.block(key).unwrap(), &input).unwrap();
            let (loss, grads) = distillation_loss(&[target.clone()], &[out]).unwrap();
            let (bg, _) = block_backward(w.block(key).unwrap(), &input, &grads[0]).unwrap();
            sgd_step(w.block_mut(key).unwrap(), &bg, lr);
            if first.is_none() {
                first = Some(loss);
            }
            last = loss;
            if step % 50 == 0 {
                // println!("  step {step}: {loss:.4}");
            }
        }
        println!("distill lr={lr}: first={:.3} last={last:.4} ratio={:.4}", first.unwrap(), last / first.unwrap());
    }

    // tune overfit debug
    let graph1 = toy_graph(4, 1, &[]);
    let weights1 =
        SupernetWeights::from_pretrained(&model, &graph1, 0.05, &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
    let enc = SubnetEncoding::new(vec![(0, 1), (2, 0), (3, 0)]);
    let (x, labels) = train.batch(0..16);
    for lr in [0.02, 0.05, 0.1, 0.005] {
        let mut w = weights1.clone();
        let mut acc = 0.0;
        let mut steps = 0;
        for s in 0..2000 {
            tune_step_on(&mut w, &graph1, &enc, &x, labels, lr).unwrap();
            let (logits, _) = subnet_forward(&w, &enc, &x, false).unwrap();
            acc = accuracy_from_logits(&logits, labels);
            steps = s;
            if acc == 1.0 {
                break;
            }
        }
        println!("tune lr={lr}: acc={acc:.3} after {steps} steps");
    }
}
