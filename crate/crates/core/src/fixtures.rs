//! Shared fixtures for unit tests.

use crate::graph::{expand_graph, BlockPosition, LayerShape, SupernetGraph};

/// Standard test graph: n equal 8-wide blocks with the requested merge and
/// shrink options, head 4->8 and tail 8->3.
pub(crate) fn toy_graph(n: usize, max_merge: usize, rates: &[f64]) -> SupernetGraph {
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
