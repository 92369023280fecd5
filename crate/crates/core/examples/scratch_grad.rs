// Temporary gradient check scratchpad.
use elastinet::data::make_blobs;
use elastinet::engine::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn chain_loss(
    head: &AffineParams,
    blocks: &[BottleneckBlockParams],
    tail: &AffineParams,
    x: &DenseArray,
    labels: &[usize],
) -> f64 {
    let mut f = head.forward(x, true).unwrap();
    for b in blocks {
        f = block_forward(b, &f).unwrap();
    }
    let logits = tail.forward(&f, false).unwrap();
    cross_entropy_loss(&logits, labels).unwrap().0
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let ds = make_blobs(8, 4, 3, 4.0, &mut rng).unwrap();
    let (x, labels) = ds.batch(0..8);

    let d = 5;
    let head = AffineParams::init_uniform(4, d, 0.6, &mut rng);
    let blocks: Vec<BottleneckBlockParams> = (0..2)
        .map(|_| BottleneckBlockParams::init_uniform(d, 6, 0.6, &mut rng))
        .collect();
    let tail = AffineParams::init_uniform(d, 3, 0.6, &mut rng);

    let logits = {
        let mut f = head.forward(&x, true).unwrap();
        for b in &blocks {
            f = block_forward(b, &f).unwrap();
        }
        tail.forward(&f, false).unwrap()
    };
    println!("logits row0: {:?}", logits.row(0));
    let (_, dlogits) = cross_entropy_loss(&logits, labels).unwrap();
    let refs: Vec<&BottleneckBlockParams> = blocks.iter().collect();
    let (hg, bgs, tg) = chain_grads(&head, &refs, &tail, &x, &dlogits).unwrap();

    let eps = 1e-5;
    // Sample a few parameters from each group.
    let mut head2 = head.clone();
    let mut blocks2 = blocks.clone();
    let mut tail2 = tail.clone();
    let mut idx_rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let i = idx_rng.gen_range(0..head2.w.data().len());
        let analytic = hg.w.data()[i];
        head2.w.data_mut()[i] += eps;
        let lp = chain_loss(&head2, &blocks2, &tail2, &x, labels);
        head2.w.data_mut()[i] -= 2.0 * eps;
        let lm = chain_loss(&head2, &blocks2, &tail2, &x, labels);
        head2.w.data_mut()[i] += eps;
        let fd = (lp - lm) / (2.0 * eps);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
        println!("head w[{i}]: analytic={analytic:.5e} fd={fd:.5e} rel={rel:.2e}");
    }
    for bi in 0..2 {
        for _ in 0..6 {
            let i = idx_rng.gen_range(0..blocks2[bi].w1.data().len());
            let analytic = bgs[bi].w1.data()[i];
            blocks2[bi].w1.data_mut()[i] += eps;
            let lp = chain_loss(&head2, &blocks2, &tail2, &x, labels);
            blocks2[bi].w1.data_mut()[i] -= 2.0 * eps;
            let lm = chain_loss(&head2, &blocks2, &tail2, &x, labels);
            blocks2[bi].w1.data_mut()[i] += eps;
            let fd = (lp - lm) / (2.0 * eps);
            let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
            println!("block{bi} w1[{i}]: analytic={analytic:.5e} fd={fd:.5e} rel={rel:.2e}");
        }
    }
    for _ in 0..6 {
        let i = idx_rng.gen_range(0..tail2.w.data().len());
        let analytic = tg.w.data()[i];
        tail2.w.data_mut()[i] += eps;
        let lp = chain_loss(&head2, &blocks2, &tail2, &x, labels);
        tail2.w.data_mut()[i] -= 2.0 * eps;
        let lm = chain_loss(&head2, &blocks2, &tail2, &x, labels);
        tail2.w.data_mut()[i] += eps;
        let fd = (lp - lm) / (2.0 * eps);
        let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-8);
        println!("tail w[{i}]: analytic={analytic:.5e} fd={fd:.5e} rel={rel:.2e}");
    }
}
