//! Dense-network numeric engine.
//!
//! Blocks are two-layer bottlenecks `y = rect(W2 rect(W1 x + b1) + b2)` over
//! 64-bit floats, enough to pretrain toy chain models and train supernet
//! branches. Everything is a pure function over immutable weights, and every
//! reduction runs in a fixed sequential order so results are bitwise
//! reproducible across runs and thread counts.

use std::collections::BTreeMap;

use rand::Rng;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{SubnetEncoding, SupernetGraph, VariantKey};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    ShapeMismatch { expected: usize, got: usize, context: &'static str },
    #[error("feature lists must be nonempty and pairwise same-shape")]
    BadFeatureLists,
    #[error("empty batch")]
    EmptyBatch,
    #[error("label {label} out of range for {classes} classes")]
    BadLabel { label: usize, classes: usize },
    #[error("missing block weights for {0}:{1}")]
    MissingBlock(usize, i32),
}

/// Row-major dense array of 64-bit floats.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl DenseArray {
    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        DenseArray { shape, data: vec![0.0; len] }
    }

    pub fn from_vec(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "shape/data mismatch");
        DenseArray { shape, data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Rows of a 2-D array.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Columns of a 2-D array.
    pub fn cols(&self) -> usize {
        self.shape[self.shape.len() - 1]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    /// Copies a contiguous range of rows.
    pub fn slice_rows(&self, range: std::ops::Range<usize>) -> DenseArray {
        let c = self.cols();
        DenseArray {
            shape: vec![range.len(), c],
            data: self.data[range.start * c..range.end * c].to_vec(),
        }
    }
}

fn rect(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        0.0
    }
}

/// A single affine layer, used for the fixed head (rectified) and the
/// classifier tail (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineParams {
    /// (in_dim x out_dim), row-major.
    pub w: DenseArray,
    pub b: Vec<f64>,
}

impl AffineParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        AffineParams { w: DenseArray::zeros(vec![in_dim, out_dim]), b: vec![0.0; out_dim] }
    }

    pub fn init_uniform<R: Rng>(in_dim: usize, out_dim: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = AffineParams::zeros(in_dim, out_dim);
        for v in p.w.data_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        for v in &mut p.b {
            *v = rng.gen_range(-scale..=scale);
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.w.shape()[1]
    }

    pub fn forward(&self, x: &DenseArray, rectify: bool) -> Result<DenseArray, EngineError> {
        affine(x, &self.w, &self.b, rectify)
    }
}

/// Gradients matching an [`AffineParams`].
#[derive(Debug, Clone)]
pub struct AffineGrads {
    pub w: DenseArray,
    pub b: Vec<f64>,
}

/// One bottleneck block: `y = rect(W2 rect(W1 x + b1) + b2)` with
/// in/out dimension d and internal width h.
#[derive(Debug, Clone, PartialEq)]
pub struct BottleneckBlockParams {
    /// (d x h)
    pub w1: DenseArray,
    pub b1: Vec<f64>,
    /// (h x d)
    pub w2: DenseArray,
    pub b2: Vec<f64>,
}

impl BottleneckBlockParams {
    pub fn zeros(d: usize, h: usize) -> Self {
        BottleneckBlockParams {
            w1: DenseArray::zeros(vec![d, h]),
            b1: vec![0.0; h],
            w2: DenseArray::zeros(vec![h, d]),
            b2: vec![0.0; d],
        }
    }

    pub fn init_uniform<R: Rng>(d: usize, h: usize, scale: f64, rng: &mut R) -> Self {
        let mut p = BottleneckBlockParams::zeros(d, h);
        for v in p.w1.data_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        for v in &mut p.b1 {
            *v = rng.gen_range(-scale..=scale);
        }
        for v in p.w2.data_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        for v in &mut p.b2 {
            *v = rng.gen_range(-scale..=scale);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.w1.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.w1.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.w1.data().len() + self.b1.len() + self.w2.data().len() + self.b2.len()
    }
}

/// Gradients matching a [`BottleneckBlockParams`].
#[derive(Debug, Clone)]
pub struct BlockGrads {
    pub w1: DenseArray,
    pub b1: Vec<f64>,
    pub w2: DenseArray,
    pub b2: Vec<f64>,
}

impl BlockGrads {
    pub fn zeros_like(p: &BottleneckBlockParams) -> Self {
        BlockGrads {
            w1: DenseArray::zeros(p.w1.shape().to_vec()),
            b1: vec![0.0; p.b1.len()],
            w2: DenseArray::zeros(p.w2.shape().to_vec()),
            b2: vec![0.0; p.b2.len()],
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m = 0.0f64;
        for v in self.w1.data().iter().chain(self.w2.data()).chain(&self.b1).chain(&self.b2) {
            m = m.max(v.abs());
        }
        m
    }
}

/// y[b,o] = sum_i x[b,i] w[i,o] + b[o], optionally rectified. The inner sum
/// runs sequentially over the input axis.
fn affine(x: &DenseArray, w: &DenseArray, b: &[f64], rectify: bool) -> Result<DenseArray, EngineError> {
    let (in_dim, out_dim) = (w.shape()[0], w.shape()[1]);
    if x.cols() != in_dim {
        return Err(EngineError::ShapeMismatch {
            expected: in_dim,
            got: x.cols(),
            context: "affine input",
        });
    }
    let batch = x.rows();
    let mut y = DenseArray::zeros(vec![batch, out_dim]);
    for r in 0..batch {
        let xr = x.row(r);
        let yr = y.row_mut(r);
        for o in 0..out_dim {
            let mut s = b[o];
            for (i, &xi) in xr.iter().enumerate() {
                s += xi * w.data()[i * out_dim + o];
            }
            yr[o] = if rectify { rect(s) } else { s };
        }
    }
    Ok(y)
}

/// Forward pass of one bottleneck block.
pub fn block_forward(
    params: &BottleneckBlockParams,
    x: &DenseArray,
) -> Result<DenseArray, EngineError> {
    let a1 = affine(x, &params.w1, &params.b1, true)?;
    affine(&a1, &params.w2, &params.b2, true)
}

/// Pre-activation caches needed to backpropagate through a block.
struct BlockCache {
    z1: DenseArray,
    a1: DenseArray,
    z2: DenseArray,
}

fn block_forward_cached(
    params: &BottleneckBlockParams,
    x: &DenseArray,
) -> Result<(DenseArray, BlockCache), EngineError> {
    let z1 = affine(x, &params.w1, &params.b1, false)?;
    let mut a1 = z1.clone();
    for v in a1.data_mut() {
        *v = rect(*v);
    }
    let z2 = affine(&a1, &params.w2, &params.b2, false)?;
    let mut y = z2.clone();
    for v in y.data_mut() {
        *v = rect(*v);
    }
    Ok((y, BlockCache { z1, a1, z2 }))
}

/// Gradient of `sum(upstream * block_forward(x))` with respect to the block
/// parameters and the input.
pub fn block_backward(
    params: &BottleneckBlockParams,
    x: &DenseArray,
    upstream: &DenseArray,
) -> Result<(BlockGrads, DenseArray), EngineError> {
    let (_, cache) = block_forward_cached(params, x)?;
    block_backward_with(params, x, &cache, upstream)
}

fn block_backward_with(
    params: &BottleneckBlockParams,
    x: &DenseArray,
    cache: &BlockCache,
    upstream: &DenseArray,
) -> Result<(BlockGrads, DenseArray), EngineError> {
    let d = params.dim();
    let h = params.width();
    if upstream.cols() != d || upstream.rows() != x.rows() {
        return Err(EngineError::ShapeMismatch {
            expected: d,
            got: upstream.cols(),
            context: "block upstream",
        });
    }
    let batch = x.rows();
    let mut grads = BlockGrads::zeros_like(params);
    let mut dx = DenseArray::zeros(vec![batch, d]);
    for r in 0..batch {
        let xr = x.row(r);
        let z1r = cache.z1.row(r);
        let a1r = cache.a1.row(r);
        let z2r = cache.z2.row(r);
        let ur = upstream.row(r);

        // dz2 = upstream gated by the output rectifier
        let mut dz2 = vec![0.0; d];
        for o in 0..d {
            dz2[o] = if z2r[o] > 0.0 { ur[o] } else { 0.0 };
        }
        for o in 0..d {
            grads.b2[o] += dz2[o];
        }
        for i in 0..h {
            let a = a1r[i];
            let row = &mut grads.w2.data_mut()[i * d..(i + 1) * d];
            for o in 0..d {
                row[o] += a * dz2[o];
            }
        }
        // da1 = dz2 W2^T, gated by the hidden rectifier
        let mut dz1 = vec![0.0; h];
        for i in 0..h {
            if z1r[i] > 0.0 {
                let row = &params.w2.data()[i * d..(i + 1) * d];
                let mut s = 0.0;
                for o in 0..d {
                    s += dz2[o] * row[o];
                }
                dz1[i] = s;
            }
        }
        for i in 0..h {
            grads.b1[i] += dz1[i];
        }
        for i in 0..d {
            let xi = xr[i];
            let row = &mut grads.w1.data_mut()[i * h..(i + 1) * h];
            for o in 0..h {
                row[o] += xi * dz1[o];
            }
        }
        let dxr = dx.row_mut(r);
        for i in 0..d {
            let row = &params.w1.data()[i * h..(i + 1) * h];
            let mut s = 0.0;
            for o in 0..h {
                s += dz1[o] * row[o];
            }
            dxr[i] = s;
        }
    }
    Ok((grads, dx))
}

/// Mean over feature pairs of the squared L2 distance, plus the gradient
/// with respect to each student feature: (2/M)(S_i - T_i).
pub fn distillation_loss(
    teacher: &[DenseArray],
    student: &[DenseArray],
) -> Result<(f64, Vec<DenseArray>), EngineError> {
    if teacher.is_empty() || teacher.len() != student.len() {
        return Err(EngineError::BadFeatureLists);
    }
    let m = teacher.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(teacher.len());
    for (t, s) in teacher.iter().zip(student) {
        if t.shape() != s.shape() {
            return Err(EngineError::BadFeatureLists);
        }
        let mut g = DenseArray::zeros(s.shape().to_vec());
        let mut acc = 0.0;
        for (k, (&tv, &sv)) in t.data().iter().zip(s.data()).enumerate() {
            let diff = tv - sv;
            acc += diff * diff;
            g.data_mut()[k] = (2.0 / m) * (sv - tv);
        }
        loss += acc;
        grads.push(g);
    }
    Ok((loss / m, grads))
}

/// Mean negative log softmax probability of the true class, stabilized by
/// max subtraction, with gradients w.r.t. the logits.
pub fn cross_entropy_loss(
    logits: &DenseArray,
    labels: &[usize],
) -> Result<(f64, DenseArray), EngineError> {
    let batch = logits.rows();
    let k = logits.cols();
    if batch == 0 {
        return Err(EngineError::EmptyBatch);
    }
    if labels.len() != batch {
        return Err(EngineError::ShapeMismatch {
            expected: batch,
            got: labels.len(),
            context: "label count",
        });
    }
    let mut loss = 0.0;
    let mut grads = DenseArray::zeros(vec![batch, k]);
    for r in 0..batch {
        let y = labels[r];
        if y >= k {
            return Err(EngineError::BadLabel { label: y, classes: k });
        }
        let row = logits.row(r);
        let mut m = row[0];
        for &v in &row[1..] {
            if v > m {
                m = v;
            }
        }
        let mut z = 0.0;
        for &v in row {
            z += (v - m).exp();
        }
        let lse = m + z.ln();
        loss += lse - row[y];
        let g = grads.row_mut(r);
        for c in 0..k {
            let p = (row[c] - m).exp() / z;
            g[c] = (p - if c == y { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok((loss / batch as f64, grads))
}

/// In-place SGD update `p <- p - lr * g` for one block.
pub fn sgd_step(params: &mut BottleneckBlockParams, grads: &BlockGrads, lr: f64) {
    for (p, g) in params.w1.data_mut().iter_mut().zip(grads.w1.data()) {
        *p -= lr * g;
    }
    for (p, g) in params.b1.iter_mut().zip(&grads.b1) {
        *p -= lr * g;
    }
    for (p, g) in params.w2.data_mut().iter_mut().zip(grads.w2.data()) {
        *p -= lr * g;
    }
    for (p, g) in params.b2.iter_mut().zip(&grads.b2) {
        *p -= lr * g;
    }
}

/// In-place SGD update for an affine layer.
pub fn sgd_step_affine(params: &mut AffineParams, grads: &AffineGrads, lr: f64) {
    for (p, g) in params.w.data_mut().iter_mut().zip(grads.w.data()) {
        *p -= lr * g;
    }
    for (p, g) in params.b.iter_mut().zip(&grads.b) {
        *p -= lr * g;
    }
}

/// The pretrained chain model: rectified head projection, bottleneck
/// blocks, linear classifier tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyClassifier {
    pub head: AffineParams,
    pub blocks: Vec<BottleneckBlockParams>,
    pub tail: AffineParams,
}

impl ToyClassifier {
    pub fn input_dim(&self) -> usize {
        self.head.in_dim()
    }

    pub fn feature_dim(&self) -> usize {
        self.head.out_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.tail.out_dim()
    }

    pub fn forward(&self, x: &DenseArray) -> Result<DenseArray, EngineError> {
        let mut f = self.head.forward(x, true)?;
        for b in &self.blocks {
            f = block_forward(b, &f)?;
        }
        self.tail.forward(&f, false)
    }

    pub fn accuracy(&self, x: &DenseArray, labels: &[usize]) -> Result<f64, EngineError> {
        let logits = self.forward(x)?;
        Ok(accuracy_from_logits(&logits, labels))
    }
}

/// Fraction of rows whose argmax logit matches the label. Ties resolve to
/// the lowest index.
pub fn accuracy_from_logits(logits: &DenseArray, labels: &[usize]) -> f64 {
    let mut correct = 0usize;
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let mut best = 0usize;
        for c in 1..row.len() {
            if row[c] > row[best] {
                best = c;
            }
        }
        if best == labels[r] {
            correct += 1;
        }
    }
    correct as f64 / logits.rows() as f64
}

/// All supernet weights. Original blocks stay byte-identical to the
/// pretrained model; only `branches` may be trained.
#[derive(Debug, Clone, PartialEq)]
pub struct SupernetWeights {
    pub head: AffineParams,
    pub tail: AffineParams,
    /// (start, 0) blocks, keyed by start.
    pub originals: BTreeMap<usize, BottleneckBlockParams>,
    /// Merged and shrunk blocks, keyed by (start, j != 0).
    pub branches: BTreeMap<VariantKey, BottleneckBlockParams>,
}

impl SupernetWeights {
    /// Builds supernet weights from a pretrained model: originals are
    /// copied verbatim, branches start from small uniform random values.
    pub fn from_pretrained<R: Rng>(
        pretrained: &ToyClassifier,
        graph: &SupernetGraph,
        init_scale: f64,
        rng: &mut R,
    ) -> Result<Self, EngineError> {
        if pretrained.blocks.len() != graph.num_positions() {
            return Err(EngineError::ShapeMismatch {
                expected: graph.num_positions(),
                got: pretrained.blocks.len(),
                context: "pretrained block count",
            });
        }
        let mut originals = BTreeMap::new();
        for (i, b) in pretrained.blocks.iter().enumerate() {
            originals.insert(i, b.clone());
        }
        let mut branches = BTreeMap::new();
        for (&(start, j), v) in &graph.variants {
            if j == 0 {
                continue;
            }
            let d = graph.positions[start].in_dim;
            branches.insert(
                (start, j),
                BottleneckBlockParams::init_uniform(d, v.width, init_scale, rng),
            );
        }
        Ok(SupernetWeights {
            head: pretrained.head.clone(),
            tail: pretrained.tail.clone(),
            originals,
            branches,
        })
    }

    pub fn block(&self, key: VariantKey) -> Result<&BottleneckBlockParams, EngineError> {
        let p = if key.1 == 0 {
            self.originals.get(&key.0)
        } else {
            self.branches.get(&key)
        };
        p.ok_or(EngineError::MissingBlock(key.0, key.1))
    }

    pub fn block_mut(&mut self, key: VariantKey) -> Result<&mut BottleneckBlockParams, EngineError> {
        let p = if key.1 == 0 {
            self.originals.get_mut(&key.0)
        } else {
            self.branches.get_mut(&key)
        };
        p.ok_or(EngineError::MissingBlock(key.0, key.1))
    }

    /// The pretrained model reconstructed from the frozen parts.
    pub fn original_model(&self) -> ToyClassifier {
        ToyClassifier {
            head: self.head.clone(),
            blocks: self.originals.values().cloned().collect(),
            tail: self.tail.clone(),
        }
    }

    /// SHA-256 over the frozen parts (head, originals, tail), used to
    /// verify that training never touches them.
    pub fn original_hash(&self) -> String {
        let mut hasher = Sha256::new();
        fn feed(hasher: &mut Sha256, xs: &[f64]) {
            for v in xs {
                hasher.update(v.to_le_bytes());
            }
        }
        feed(&mut hasher, self.head.w.data());
        feed(&mut hasher, &self.head.b);
        for (start, b) in &self.originals {
            hasher.update(start.to_le_bytes());
            feed(&mut hasher, b.w1.data());
            feed(&mut hasher, &b.b1);
            feed(&mut hasher, b.w2.data());
            feed(&mut hasher, &b.b2);
        }
        feed(&mut hasher, self.tail.w.data());
        feed(&mut hasher, &self.tail.b);
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Runs head, the chosen variants in order, then tail. When
/// `want_features` is set, also returns the feature map after each chosen
/// block (the hooks used for distillation capture and prefix caching).
pub fn subnet_forward(
    weights: &SupernetWeights,
    enc: &SubnetEncoding,
    x: &DenseArray,
    want_features: bool,
) -> Result<(DenseArray, Option<Vec<DenseArray>>), EngineError> {
    let mut f = weights.head.forward(x, true)?;
    let mut feats = if want_features { Some(Vec::with_capacity(enc.len())) } else { None };
    for &key in enc.choices() {
        f = block_forward(weights.block(key)?, &f)?;
        if let Some(fs) = feats.as_mut() {
            fs.push(f.clone());
        }
    }
    let logits = weights.tail.forward(&f, false)?;
    Ok((logits, feats))
}

/// Parameter gradients for a full chain pass (head, blocks, tail) given
/// upstream logit gradients. Gradients flow through every layer; callers
/// decide which parameters to update.
pub fn chain_grads(
    head: &AffineParams,
    blocks: &[&BottleneckBlockParams],
    tail: &AffineParams,
    x: &DenseArray,
    dlogits: &DenseArray,
) -> Result<(AffineGrads, Vec<BlockGrads>, AffineGrads), EngineError> {
    // Forward, caching per-block pre-activations and the head output.
    let h0_pre = affine(x, &head.w, &head.b, false)?;
    let mut h0 = h0_pre.clone();
    for v in h0.data_mut() {
        *v = rect(*v);
    }
    let mut inputs = Vec::with_capacity(blocks.len());
    let mut caches = Vec::with_capacity(blocks.len());
    let mut f = h0.clone();
    for b in blocks {
        inputs.push(f.clone());
        let (y, cache) = block_forward_cached(b, &f)?;
        caches.push(cache);
        f = y;
    }

    // Tail (linear): dW = f^T dlogits, db = col sums, dx = dlogits W^T.
    let batch = x.rows();
    let d = tail.in_dim();
    let k = tail.out_dim();
    let mut tail_grads = AffineGrads {
        w: DenseArray::zeros(vec![d, k]),
        b: vec![0.0; k],
    };
    let mut df = DenseArray::zeros(vec![batch, d]);
    for r in 0..batch {
        let fr = f.row(r);
        let gr = dlogits.row(r);
        for c in 0..k {
            tail_grads.b[c] += gr[c];
        }
        for i in 0..d {
            let row = &mut tail_grads.w.data_mut()[i * k..(i + 1) * k];
            for c in 0..k {
                row[c] += fr[i] * gr[c];
            }
        }
        let dfr = df.row_mut(r);
        for i in 0..d {
            let row = &tail.w.data()[i * k..(i + 1) * k];
            let mut s = 0.0;
            for c in 0..k {
                s += gr[c] * row[c];
            }
            dfr[i] = s;
        }
    }

    // Blocks, in reverse.
    let mut block_grads: Vec<Option<BlockGrads>> = (0..blocks.len()).map(|_| None).collect();
    let mut upstream = df;
    for idx in (0..blocks.len()).rev() {
        let (g, dx) = block_backward_with(blocks[idx], &inputs[idx], &caches[idx], &upstream)?;
        block_grads[idx] = Some(g);
        upstream = dx;
    }

    // Head (rectified).
    let in_dim = head.in_dim();
    let out_dim = head.out_dim();
    let mut head_grads = AffineGrads {
        w: DenseArray::zeros(vec![in_dim, out_dim]),
        b: vec![0.0; out_dim],
    };
    for r in 0..batch {
        let xr = x.row(r);
        let pre = h0_pre.row(r);
        let ur = upstream.row(r);
        let mut dz = vec![0.0; out_dim];
        for o in 0..out_dim {
            dz[o] = if pre[o] > 0.0 { ur[o] } else { 0.0 };
        }
        for o in 0..out_dim {
            head_grads.b[o] += dz[o];
        }
        for i in 0..in_dim {
            let row = &mut head_grads.w.data_mut()[i * out_dim..(i + 1) * out_dim];
            for o in 0..out_dim {
                row[o] += xr[i] * dz[o];
            }
        }
    }

    Ok((head_grads, block_grads.into_iter().map(|g| g.unwrap()).collect(), tail_grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn identity_block(d: usize) -> BottleneckBlockParams {
        let mut p = BottleneckBlockParams::zeros(d, d);
        for i in 0..d {
            p.w1.data_mut()[i * d + i] = 1.0;
            p.w2.data_mut()[i * d + i] = 1.0;
        }
        p
    }

    #[test]
    fn identity_block_passes_nonnegative_input() {
        let p = identity_block(3);
        let x = DenseArray::from_vec(vec![2, 3], vec![0.5, 0.0, 2.0, 1.0, 3.0, 0.25]);
        let y = block_forward(&p, &x).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn zero_input_zero_bias_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = BottleneckBlockParams::init_uniform(4, 6, 0.5, &mut rng);
        p.b1.iter_mut().for_each(|v| *v = 0.0);
        p.b2.iter_mut().for_each(|v| *v = 0.0);
        let x = DenseArray::zeros(vec![2, 4]);
        let y = block_forward(&p, &x).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    /// Scalar triple-loop reference for the block forward map.
    fn naive_block_forward(p: &BottleneckBlockParams, x: &DenseArray) -> DenseArray {
        let d = p.dim();
        let h = p.width();
        let mut y = DenseArray::zeros(vec![x.rows(), d]);
        for r in 0..x.rows() {
            let mut hid = vec![0.0; h];
            for o in 0..h {
                let mut s = p.b1[o];
                for i in 0..d {
                    s += x.row(r)[i] * p.w1.data()[i * h + o];
                }
                hid[o] = s.max(0.0);
            }
            for o in 0..d {
                let mut s = p.b2[o];
                for i in 0..h {
                    s += hid[i] * p.w2.data()[i * d + o];
                }
                y.row_mut(r)[o] = s.max(0.0);
            }
        }
        y
    }

    #[test]
    fn block_forward_matches_scalar_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = BottleneckBlockParams::init_uniform(5, 7, 0.8, &mut rng);
        let mut x = DenseArray::zeros(vec![3, 5]);
        for v in x.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let y = block_forward(&p, &x).unwrap();
        let yref = naive_block_forward(&p, &x);
        for (a, b) in y.data().iter().zip(yref.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = BottleneckBlockParams::init_uniform(4, 5, 0.5, &mut rng);
        let mut x = DenseArray::zeros(vec![2, 4]);
        for v in x.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let up = DenseArray::zeros(vec![2, 4]);
        let (g, dx) = block_backward(&p, &x, &up).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert!(dx.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_unit_has_zero_w1_row_grad() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut p = BottleneckBlockParams::init_uniform(3, 2, 0.5, &mut rng);
        // Force hidden unit 0 dead for positive inputs.
        for i in 0..3 {
            p.w1.data_mut()[i * 2] = -1.0;
        }
        p.b1[0] = -5.0;
        let x = DenseArray::from_vec(vec![1, 3], vec![0.2, 0.4, 0.6]);
        let up = DenseArray::from_vec(vec![1, 3], vec![1.0, 1.0, 1.0]);
        let (g, _) = block_backward(&p, &x, &up).unwrap();
        for i in 0..3 {
            assert_eq!(g.w1.data()[i * 2], 0.0, "column for dead unit must be zero");
        }
        assert_eq!(g.b1[0], 0.0);
    }

    #[test]
    fn distillation_loss_examples() {
        let t = vec![DenseArray::from_vec(vec![1, 2], vec![1.0, 2.0])];
        let s = vec![DenseArray::from_vec(vec![1, 2], vec![1.0, 0.0])];
        let (loss, grads) = distillation_loss(&t, &s).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grads[0].data(), &[0.0, -4.0]);

        let (loss, grads) = distillation_loss(&t, &t.clone()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads[0].data().iter().all(|&v| v == 0.0));

        assert_eq!(distillation_loss(&[], &[]), Err(EngineError::BadFeatureLists));
    }

    #[test]
    fn cross_entropy_examples() {
        let logits = DenseArray::from_vec(vec![1, 2], vec![0.3, 0.3]);
        let (loss, _) = cross_entropy_loss(&logits, &[0]).unwrap();
        assert!((loss - (2.0f64).ln()).abs() < 1e-12);

        let hot = DenseArray::from_vec(vec![1, 3], vec![1e4, 0.0, 0.0]);
        let (loss, _) = cross_entropy_loss(&hot, &[0]).unwrap();
        assert!(loss < 1e-10);

        let empty = DenseArray::zeros(vec![0, 3]);
        assert_eq!(cross_entropy_loss(&empty, &[]), Err(EngineError::EmptyBatch));
        assert!(matches!(
            cross_entropy_loss(&hot, &[5]),
            Err(EngineError::BadLabel { .. })
        ));
    }

    #[test]
    fn sgd_updates_elementwise() {
        let mut p = BottleneckBlockParams::zeros(1, 1);
        p.w1.data_mut()[0] = 1.0;
        let mut g = BlockGrads::zeros_like(&p);
        g.w1.data_mut()[0] = 2.0;
        sgd_step(&mut p, &g, 0.1);
        assert!((p.w1.data()[0] - 0.8).abs() < 1e-15);

        let before = p.clone();
        let zero = BlockGrads::zeros_like(&p);
        sgd_step(&mut p, &zero, 0.5);
        assert_eq!(p, before);
    }

    #[test]
    fn batch_rows_are_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = BottleneckBlockParams::init_uniform(4, 6, 0.7, &mut rng);
        let mut big = DenseArray::zeros(vec![8, 4]);
        for v in big.data_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let one = big.slice_rows(3..4);
        let y_big = block_forward(&p, &big).unwrap();
        let y_one = block_forward(&p, &one).unwrap();
        assert_eq!(y_big.row(3), y_one.row(0));
    }
}
