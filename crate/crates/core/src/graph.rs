//! Chain-model partitioning, supernet expansion, and subnet encodings.
//!
//! A pretrained chain model is partitioned into basic blocks, then expanded
//! into a supernet by adding merged variants (one block replacing several
//! consecutive ones) and shrunk variants (reduced internal width). A subnet
//! is a contiguous, non-overlapping choice of variants covering every
//! position; its canonical string form is the comma-joined `start:j` list.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigUint, RandBigInt};
use rand::Rng;
use thiserror::Error;

/// Variant key: (start position, degree j). j>0 merges j+1 positions,
/// j=0 is the original block, j<0 is a shrink level.
pub type VariantKey = (usize, i32);

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("granularity infeasible: block starting at layer {layer} has {size} params, cap is {cap:.1}")]
    GranularityInfeasible { layer: usize, size: u64, cap: f64 },
    #[error("empty chain model")]
    EmptyChain,
    #[error("empty block list")]
    EmptyBlocks,
    #[error("layer {index}: in_dim {got} does not match previous out_dim {expected}")]
    ShapeChainBroken { index: usize, got: usize, expected: usize },
    #[error("layer {index}: param_size must be > 0")]
    ZeroParams { index: usize },
    #[error("gamma must be in (0, 1], got {0}")]
    BadGamma(f64),
    #[error("max_merge {max_merge} must be smaller than the block count {blocks}")]
    BadMaxMerge { max_merge: usize, blocks: usize },
    #[error("shrink rates must be strictly between 0 and 1 and strictly decreasing, got {0:?}")]
    BadShrinkRates(Vec<f64>),
    #[error("subnet space larger than cap {cap}")]
    SpaceTooLarge { cap: u64 },
    #[error("invalid arch string {arch:?}: {reason}")]
    BadArch { arch: String, reason: String },
}

/// What `validate_subnet` reports on the first broken invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubnetViolation {
    Gap { at: usize },
    Overlap { at: usize },
    UnknownVariant { start: usize, degree: i32 },
}

impl fmt::Display for SubnetViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubnetViolation::Gap { at } => write!(f, "gap at {at}"),
            SubnetViolation::Overlap { at } => write!(f, "overlap at {at}"),
            SubnetViolation::UnknownVariant { start, degree } => {
                write!(f, "unknown variant {start}:{degree}")
            }
        }
    }
}

/// One layer of a chain model before partitioning. Layers sharing a
/// fusion tag with their neighbours may be fused by an inference runtime
/// and must stay in one block.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub param_size: u64,
    pub fusion_group: u32,
}

/// A basic block: the smallest replaceable unit of the original chain.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPosition {
    pub index: usize,
    pub in_dim: usize,
    pub out_dim: usize,
    pub param_size: u64,
    pub fusion_group: u32,
    /// Internal bottleneck width of the original block, used to size
    /// shrunk and merged replacements.
    pub width: usize,
}

/// An original, merged, or shrunk block choice at one position.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVariant {
    pub start: usize,
    pub degree: i32,
    /// Positions covered: degree+1 for merges, 1 otherwise.
    pub span: usize,
    pub param_size: u64,
    pub width: usize,
}

/// Shape of the fixed head or tail layer framing the elastic region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
}

/// The expanded supernet: positions, the variant map, and the fixed
/// head/tail. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SupernetGraph {
    pub positions: Vec<BlockPosition>,
    pub variants: BTreeMap<VariantKey, BlockVariant>,
    pub head: LayerShape,
    pub tail: LayerShape,
    pub gamma: f64,
    pub p0: u64,
}

/// A path through the supernet: ordered (start, degree) choices whose
/// spans tile the positions exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubnetEncoding {
    choices: Vec<VariantKey>,
}

impl SubnetEncoding {
    pub fn new(choices: Vec<VariantKey>) -> Self {
        SubnetEncoding { choices }
    }

    pub fn choices(&self) -> &[VariantKey] {
        &self.choices
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }

    /// Canonical string form, the identity used for hashing, pool lookup,
    /// and file storage.
    pub fn arch(&self) -> String {
        self.choices
            .iter()
            .map(|(s, j)| format!("{s}:{j}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_arch(arch: &str) -> Result<Self, GraphError> {
        let bad = |reason: &str| GraphError::BadArch {
            arch: arch.to_string(),
            reason: reason.to_string(),
        };
        if arch.trim().is_empty() {
            return Err(bad("empty"));
        }
        let mut choices = Vec::new();
        for part in arch.split(',') {
            let (s, j) = part
                .split_once(':')
                .ok_or_else(|| bad("expected start:j pairs"))?;
            let start = s.trim().parse::<usize>().map_err(|_| bad("bad start"))?;
            let degree = j.trim().parse::<i32>().map_err(|_| bad("bad degree"))?;
            choices.push((start, degree));
        }
        Ok(SubnetEncoding { choices })
    }

    /// True if this is the all-original path (j = 0 everywhere).
    pub fn is_all_original(&self) -> bool {
        self.choices.iter().all(|&(_, j)| j == 0)
    }
}

impl fmt::Display for SubnetEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.arch())
    }
}

/// Partitions a chain model into basic blocks.
///
/// A block is a maximal run of layers sharing a fusion tag, so blocks never
/// split fusable layer pairs and stay single-input single-output. Every
/// block must fit under `gamma * P0` where P0 is the chain's total
/// parameter count.
pub fn partition_blocks(
    chain: &[ChainLayer],
    gamma: f64,
) -> Result<Vec<BlockPosition>, GraphError> {
    if chain.is_empty() {
        return Err(GraphError::EmptyChain);
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(GraphError::BadGamma(gamma));
    }
    for (i, layer) in chain.iter().enumerate() {
        if layer.param_size == 0 {
            return Err(GraphError::ZeroParams { index: i });
        }
        if i > 0 && layer.in_dim != chain[i - 1].out_dim {
            return Err(GraphError::ShapeChainBroken {
                index: i,
                got: layer.in_dim,
                expected: chain[i - 1].out_dim,
            });
        }
    }

    let p0: u64 = chain.iter().map(|l| l.param_size).sum();
    let cap = gamma * p0 as f64;

    let mut blocks = Vec::new();
    let mut start = 0usize;
    while start < chain.len() {
        let tag = chain[start].fusion_group;
        let mut end = start + 1;
        while end < chain.len() && chain[end].fusion_group == tag {
            end += 1;
        }
        let unit = &chain[start..end];
        let size: u64 = unit.iter().map(|l| l.param_size).sum();
        if size as f64 > cap * (1.0 + 1e-12) {
            return Err(GraphError::GranularityInfeasible { layer: start, size, cap });
        }
        // Width drives replacement sizing: the widest interior boundary,
        // or the single layer's output dim if there is no interior.
        let width = if unit.len() >= 2 {
            unit[..unit.len() - 1]
                .iter()
                .map(|l| l.out_dim)
                .max()
                .unwrap()
        } else {
            unit[0].out_dim
        };
        blocks.push(BlockPosition {
            index: blocks.len(),
            in_dim: unit[0].in_dim,
            out_dim: unit[unit.len() - 1].out_dim,
            param_size: size,
            fusion_group: tag,
            width,
        });
        start = end;
    }
    Ok(blocks)
}

fn bottleneck_params(in_dim: usize, out_dim: usize, width: usize) -> u64 {
    (in_dim * width + width + width * out_dim + out_dim) as u64
}

/// Expands basic blocks into a supernet by adding merged and shrunk
/// variants. The all-original path is always present.
pub fn expand_graph(
    blocks: Vec<BlockPosition>,
    head: LayerShape,
    tail: LayerShape,
    gamma: f64,
    max_merge: usize,
    shrink_rates: &[f64],
) -> Result<SupernetGraph, GraphError> {
    if blocks.is_empty() {
        return Err(GraphError::EmptyBlocks);
    }
    if max_merge >= blocks.len() {
        return Err(GraphError::BadMaxMerge { max_merge, blocks: blocks.len() });
    }
    let rates_ok = shrink_rates.iter().all(|r| *r > 0.0 && *r < 1.0)
        && shrink_rates.windows(2).all(|w| w[0] > w[1]);
    if !rates_ok {
        return Err(GraphError::BadShrinkRates(shrink_rates.to_vec()));
    }

    let p0: u64 = blocks.iter().map(|b| b.param_size).sum();
    let cap = gamma * p0 as f64;
    for b in &blocks {
        if b.param_size as f64 > cap * (1.0 + 1e-12) {
            return Err(GraphError::GranularityInfeasible {
                layer: b.index,
                size: b.param_size,
                cap,
            });
        }
    }

    let n = blocks.len();
    // A merge may not cut through a run of positions sharing a fusion tag:
    // both span boundaries must sit on run boundaries.
    let run_start =
        |i: usize| i == 0 || blocks[i - 1].fusion_group != blocks[i].fusion_group;
    let run_end =
        |i: usize| i + 1 == n || blocks[i + 1].fusion_group != blocks[i].fusion_group;

    let mut variants = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        variants.insert(
            (i, 0),
            BlockVariant {
                start: i,
                degree: 0,
                span: 1,
                param_size: b.param_size,
                width: b.width,
            },
        );
        for (k, rate) in shrink_rates.iter().enumerate() {
            let width = ((rate * b.width as f64).ceil() as usize).max(1);
            variants.insert(
                (i, -(k as i32 + 1)),
                BlockVariant {
                    start: i,
                    degree: -(k as i32 + 1),
                    span: 1,
                    param_size: bottleneck_params(b.in_dim, b.out_dim, width),
                    width,
                },
            );
        }
        for j in 1..=max_merge {
            let last = i + j;
            if last >= n {
                break;
            }
            // Boundary shapes of a merged block equal the replaced
            // segment's boundary shapes; the realization is a single
            // bottleneck, so the segment must enter and leave at the
            // same dimension.
            if blocks[i].in_dim != blocks[last].out_dim {
                continue;
            }
            if !run_start(i) || !run_end(last) {
                continue;
            }
            let seg = &blocks[i..=last];
            variants.insert(
                (i, j as i32),
                BlockVariant {
                    start: i,
                    degree: j as i32,
                    span: j + 1,
                    param_size: seg.iter().map(|b| b.param_size).max().unwrap(),
                    width: seg.iter().map(|b| b.width).max().unwrap(),
                },
            );
        }
    }

    Ok(SupernetGraph { positions: blocks, variants, head, tail, gamma, p0 })
}

impl SupernetGraph {
    pub fn num_positions(&self) -> usize {
        self.positions.len()
    }

    /// Variants whose span begins at `start`, in degree order.
    pub fn variants_at(
        &self,
        start: usize,
    ) -> impl Iterator<Item = (&VariantKey, &BlockVariant)> {
        self.variants.range((start, i32::MIN)..=(start, i32::MAX))
    }

    pub fn variant(&self, key: VariantKey) -> Option<&BlockVariant> {
        self.variants.get(&key)
    }

    /// The all-original encoding (j = 0 at every position).
    pub fn all_original(&self) -> SubnetEncoding {
        SubnetEncoding::new((0..self.positions.len()).map(|i| (i, 0)).collect())
    }

    /// Structural sanity check used when a graph comes from a file.
    pub fn check_invariants(&self) -> Result<(), GraphError> {
        if self.positions.is_empty() {
            return Err(GraphError::EmptyBlocks);
        }
        let cap = self.gamma * self.p0 as f64;
        for (i, b) in self.positions.iter().enumerate() {
            if b.index != i {
                return Err(GraphError::ShapeChainBroken {
                    index: i,
                    got: b.index,
                    expected: i,
                });
            }
            if i > 0 && b.in_dim != self.positions[i - 1].out_dim {
                return Err(GraphError::ShapeChainBroken {
                    index: i,
                    got: b.in_dim,
                    expected: self.positions[i - 1].out_dim,
                });
            }
            if b.param_size as f64 > cap * (1.0 + 1e-12) {
                return Err(GraphError::GranularityInfeasible {
                    layer: i,
                    size: b.param_size,
                    cap,
                });
            }
            if !self.variants.contains_key(&(i, 0)) {
                return Err(GraphError::EmptyBlocks);
            }
        }
        Ok(())
    }
}

/// Number of distinct subnets, via the prefix-coverage dynamic program
/// c(i) = sum over variants ending at i of c(start).
pub fn count_subnets(graph: &SupernetGraph) -> BigUint {
    let n = graph.num_positions();
    let mut c = vec![BigUint::from(0u32); n + 1];
    c[0] = BigUint::from(1u32);
    for i in 0..n {
        if c[i] == BigUint::from(0u32) {
            continue;
        }
        let ways = c[i].clone();
        for (&(_, _), v) in graph.variants_at(i) {
            c[i + v.span] += &ways;
        }
    }
    c[n].clone()
}

/// Checks the tiling invariants of an encoding against the graph,
/// reporting the first violation.
pub fn validate_subnet(
    graph: &SupernetGraph,
    enc: &SubnetEncoding,
) -> Result<(), SubnetViolation> {
    let n = graph.num_positions();
    let mut cursor = 0usize;
    for &(start, degree) in enc.choices() {
        let variant = graph
            .variant((start, degree))
            .ok_or(SubnetViolation::UnknownVariant { start, degree })?;
        if start > cursor {
            return Err(SubnetViolation::Gap { at: cursor });
        }
        if start < cursor {
            return Err(SubnetViolation::Overlap { at: start });
        }
        cursor += variant.span;
    }
    if cursor < n {
        return Err(SubnetViolation::Gap { at: cursor });
    }
    Ok(())
}

/// Suffix-completion counts d(i): number of ways to cover positions i..n.
fn suffix_counts(graph: &SupernetGraph) -> Vec<BigUint> {
    let n = graph.num_positions();
    let mut d = vec![BigUint::from(0u32); n + 1];
    d[n] = BigUint::from(1u32);
    for i in (0..n).rev() {
        let mut total = BigUint::from(0u32);
        for (_, v) in graph.variants_at(i) {
            total += &d[i + v.span];
        }
        d[i] = total;
    }
    d
}

/// Draws a subnet uniformly over all paths by weighting each positional
/// choice with its suffix-completion count. Deterministic for a fixed RNG
/// stream.
pub fn sample_uniform_subnet<R: Rng>(graph: &SupernetGraph, rng: &mut R) -> SubnetEncoding {
    sample_uniform_with_counts(graph, &suffix_counts(graph), rng)
}

/// Sampling core reused by callers that draw many subnets from one graph.
pub fn sample_uniform_with_counts<R: Rng>(
    graph: &SupernetGraph,
    suffix: &[BigUint],
    rng: &mut R,
) -> SubnetEncoding {
    let n = graph.num_positions();
    let zero = BigUint::from(0u32);
    let mut choices = Vec::new();
    let mut cursor = 0usize;
    while cursor < n {
        let total = &suffix[cursor];
        debug_assert!(*total > zero, "graph has no covering at {cursor}");
        let mut t = rng.gen_biguint_below(total);
        let mut picked = None;
        for (&key, v) in graph.variants_at(cursor) {
            let w = &suffix[cursor + v.span];
            if t < *w {
                picked = Some((key, v.span));
                break;
            }
            t -= w;
        }
        let (key, span) = picked.expect("suffix counts cover every variant");
        choices.push(key);
        cursor += span;
    }
    SubnetEncoding::new(choices)
}

/// Precomputed suffix counts for repeated sampling.
pub struct SubnetSampler<'g> {
    graph: &'g SupernetGraph,
    suffix: Vec<BigUint>,
}

impl<'g> SubnetSampler<'g> {
    pub fn new(graph: &'g SupernetGraph) -> Self {
        SubnetSampler { graph, suffix: suffix_counts(graph) }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> SubnetEncoding {
        sample_uniform_with_counts(self.graph, &self.suffix, rng)
    }

    /// Uniformly covers positions lo..hi with variants that fit entirely
    /// inside the range. Used by mutation gap repair.
    pub fn sample_range<R: Rng>(&self, lo: usize, hi: usize, rng: &mut R) -> Vec<VariantKey> {
        let mut counts = vec![BigUint::from(0u32); hi - lo + 1];
        counts[hi - lo] = BigUint::from(1u32);
        for i in (lo..hi).rev() {
            let mut total = BigUint::from(0u32);
            for (_, v) in self.graph.variants_at(i) {
                if i + v.span <= hi {
                    total += &counts[i + v.span - lo];
                }
            }
            counts[i - lo] = total;
        }
        let mut choices = Vec::new();
        let mut cursor = lo;
        while cursor < hi {
            let total = &counts[cursor - lo];
            assert!(
                *total > BigUint::from(0u32),
                "range {lo}..{hi} has no covering at {cursor}"
            );
            let mut t = rng.gen_biguint_below(total);
            let mut picked = None;
            for (&key, v) in self.graph.variants_at(cursor) {
                if cursor + v.span > hi {
                    continue;
                }
                let w = &counts[cursor + v.span - lo];
                if t < *w {
                    picked = Some((key, v.span));
                    break;
                }
                t -= w;
            }
            let (key, span) = picked.expect("counts cover every in-range variant");
            choices.push(key);
            cursor += span;
        }
        choices
    }
}

/// Enumerates every subnet in deterministic (depth-first, degree-ordered)
/// order. Errors once the space exceeds `cap`.
pub fn enumerate_subnets(
    graph: &SupernetGraph,
    cap: u64,
) -> Result<Vec<SubnetEncoding>, GraphError> {
    let n = graph.num_positions();
    let mut out = Vec::new();
    let mut stack: Vec<VariantKey> = Vec::new();
    fn go(
        graph: &SupernetGraph,
        n: usize,
        cursor: usize,
        stack: &mut Vec<VariantKey>,
        out: &mut Vec<SubnetEncoding>,
        cap: u64,
    ) -> Result<(), GraphError> {
        if cursor == n {
            if out.len() as u64 >= cap {
                return Err(GraphError::SpaceTooLarge { cap });
            }
            out.push(SubnetEncoding::new(stack.clone()));
            return Ok(());
        }
        let keys: Vec<(VariantKey, usize)> = graph
            .variants_at(cursor)
            .map(|(&k, v)| (k, v.span))
            .collect();
        for (key, span) in keys {
            if cursor + span > n {
                continue;
            }
            stack.push(key);
            go(graph, n, cursor + span, stack, out, cap)?;
            stack.pop();
        }
        Ok(())
    }
    go(graph, n, 0, &mut stack, &mut out, cap)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_layers(n: usize, dim: usize, params: u64, pairwise_fused: bool) -> Vec<ChainLayer> {
        (0..n)
            .map(|i| ChainLayer {
                in_dim: dim,
                out_dim: dim,
                param_size: params,
                fusion_group: if pairwise_fused { (i / 2) as u32 } else { i as u32 },
            })
            .collect()
    }

    use crate::fixtures::toy_graph;

    #[test]
    fn pairwise_fusion_forces_pairs() {
        let layers = uniform_layers(8, 8, 100, true);
        let blocks = partition_blocks(&layers, 1.0).unwrap();
        assert_eq!(blocks.len(), 4);
        assert!(blocks.iter().all(|b| b.param_size == 200));
        assert_eq!(blocks[2].index, 2);
    }

    #[test]
    fn size_cap_boundary() {
        let layers = uniform_layers(4, 8, 100, false);
        let blocks = partition_blocks(&layers, 0.25).unwrap();
        assert_eq!(blocks.len(), 4);
        let err = partition_blocks(&layers, 0.20).unwrap_err();
        assert!(err.to_string().starts_with("granularity infeasible"));
    }

    #[test]
    fn partition_preserves_chain() {
        let layers = uniform_layers(8, 8, 100, true);
        let blocks = partition_blocks(&layers, 1.0).unwrap();
        let total: u64 = blocks.iter().map(|b| b.param_size).sum();
        assert_eq!(total, 800);
        for w in blocks.windows(2) {
            assert_eq!(w[0].out_dim, w[1].in_dim);
        }
    }

    #[test]
    fn expand_variant_families() {
        let g = toy_graph(10, 2, &[0.5, 0.25]);
        // Interior positions get the full family {j=1, j=2, 0, -1, -2}.
        let at3: Vec<i32> = g.variants_at(3).map(|(&(_, j), _)| j).collect();
        assert_eq!(at3, vec![-2, -1, 0, 1, 2]);
        // Near the end merges are clipped.
        let at9: Vec<i32> = g.variants_at(9).map(|(&(_, j), _)| j).collect();
        assert_eq!(at9, vec![-2, -1, 0]);

        let merges_only = toy_graph(10, 2, &[]);
        let at3: Vec<i32> = merges_only.variants_at(3).map(|(&(_, j), _)| j).collect();
        assert_eq!(at3, vec![0, 1, 2]);
    }

    #[test]
    fn expand_single_block() {
        let g = toy_graph(1, 0, &[]);
        assert_eq!(count_subnets(&g), BigUint::from(1u32));
        assert_eq!(enumerate_subnets(&g, 10).unwrap().len(), 1);
    }

    #[test]
    fn merge_respects_positional_fusion_runs() {
        // Positions 1 and 2 share a fusion tag; merges must not cut the run.
        let mut blocks: Vec<BlockPosition> = (0..4)
            .map(|i| BlockPosition {
                index: i,
                in_dim: 8,
                out_dim: 8,
                param_size: 100,
                fusion_group: i as u32,
                width: 8,
            })
            .collect();
        blocks[2].fusion_group = 1;
        let g = expand_graph(
            blocks,
            LayerShape { in_dim: 4, out_dim: 8 },
            LayerShape { in_dim: 8, out_dim: 3 },
            1.0,
            1,
            &[],
        )
        .unwrap();
        // (0,1) would cover positions 0..1 and cut the 1-2 run.
        assert!(g.variant((0, 1)).is_none());
        // (1,1) covers the run exactly.
        assert!(g.variant((1, 1)).is_some());
        // (2,1) would start mid-run.
        assert!(g.variant((2, 1)).is_none());
    }

    #[test]
    fn merged_param_size_is_max_of_replaced() {
        let mut blocks: Vec<BlockPosition> = (0..3)
            .map(|i| BlockPosition {
                index: i,
                in_dim: 8,
                out_dim: 8,
                param_size: 100 + 50 * i as u64,
                fusion_group: i as u32,
                width: 8 + i,
            })
            .collect();
        blocks[1].param_size = 400;
        let g = expand_graph(
            blocks,
            LayerShape { in_dim: 4, out_dim: 8 },
            LayerShape { in_dim: 8, out_dim: 3 },
            1.0,
            2,
            &[],
        )
        .unwrap();
        assert_eq!(g.variant((0, 1)).unwrap().param_size, 400);
        assert_eq!(g.variant((0, 2)).unwrap().param_size, 400);
        assert_eq!(g.variant((0, 2)).unwrap().width, 10);
    }

    #[test]
    fn shrunk_width_rounds_up() {
        let g = toy_graph(4, 0, &[0.5, 0.30]);
        assert_eq!(g.variant((0, -1)).unwrap().width, 4);
        // ceil(0.30 * 8) = 3
        assert_eq!(g.variant((0, -2)).unwrap().width, 3);
    }

    #[test]
    fn count_reference_cases() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        assert_eq!(count_subnets(&g), BigUint::from(115u32));
        assert_eq!(enumerate_subnets(&g, 10_000).unwrap().len(), 115);

        let g = toy_graph(5, 0, &[]);
        assert_eq!(count_subnets(&g), BigUint::from(1u32));

        let g = toy_graph(2, 1, &[]);
        assert_eq!(count_subnets(&g), BigUint::from(2u32));
        let all = enumerate_subnets(&g, 10).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.contains(&SubnetEncoding::new(vec![(0, 0), (1, 0)])));
        assert!(all.contains(&SubnetEncoding::new(vec![(0, 1)])));
    }

    #[test]
    fn validate_reports_first_violation() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        assert!(validate_subnet(&g, &g.all_original()).is_ok());

        let gap = SubnetEncoding::new(vec![(0, 0), (1, 0), (3, 0)]);
        assert_eq!(
            validate_subnet(&g, &gap),
            Err(SubnetViolation::Gap { at: 2 })
        );
        assert_eq!(
            validate_subnet(&g, &gap).unwrap_err().to_string(),
            "gap at 2"
        );

        let overlap = SubnetEncoding::new(vec![(0, 1), (1, 0), (2, 0), (3, 0)]);
        assert_eq!(
            validate_subnet(&g, &overlap),
            Err(SubnetViolation::Overlap { at: 1 })
        );

        let unknown = SubnetEncoding::new(vec![(0, 7)]);
        assert_eq!(
            validate_subnet(&g, &unknown),
            Err(SubnetViolation::UnknownVariant { start: 0, degree: 7 })
        );

        let short = SubnetEncoding::new(vec![(0, 0)]);
        assert_eq!(
            validate_subnet(&g, &short),
            Err(SubnetViolation::Gap { at: 1 })
        );
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let a = sample_uniform_subnet(&g, &mut ChaCha8Rng::seed_from_u64(9));
        let b = sample_uniform_subnet(&g, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        assert!(validate_subnet(&g, &a).is_ok());
    }

    #[test]
    fn sampling_single_subnet_graph() {
        let g = toy_graph(3, 0, &[]);
        let enc = sample_uniform_subnet(&g, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(enc, g.all_original());
    }

    #[test]
    fn arch_round_trip() {
        let enc = SubnetEncoding::new(vec![(0, 1), (2, 0), (3, -2)]);
        assert_eq!(enc.arch(), "0:1,2:0,3:-2");
        assert_eq!(SubnetEncoding::parse_arch("0:1,2:0,3:-2").unwrap(), enc);
        assert!(SubnetEncoding::parse_arch("0:1,x").is_err());
        assert!(SubnetEncoding::parse_arch("").is_err());
    }
}
