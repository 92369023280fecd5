//! Reuse-based candidate evaluation.
//!
//! Candidate subnets that share a prefix of block choices can share the
//! intermediate feature computed by that prefix. Candidates are arranged
//! into a prefix tree whose internal nodes cache features during a
//! depth-first evaluation; a feature is released once its subtree is done,
//! so at most `depth_cap` features are ever held at once. Accuracies are
//! bitwise identical to evaluating every candidate independently.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::data::Dataset;
use crate::engine::{
    accuracy_from_logits, block_forward, DenseArray, EngineError, SupernetWeights,
};
use crate::graph::{SubnetEncoding, VariantKey};
use crate::latsim::{LatencyTable, SimError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("candidate list is empty")]
    NoCandidates,
    #[error("duplicate candidate {0}")]
    DuplicateCandidate(String),
    #[error("empty eval data")]
    EmptyEvalData,
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("evaluator failed: {0}")]
    External(String),
}

/// An internal node of the evaluation schedule: a shared prefix of block
/// choices, its table latency, and its pruning importance.
#[derive(Debug, Clone)]
pub struct PrefixNode {
    pub prefix: Vec<VariantKey>,
    pub latency: f64,
    /// latency x (candidates sharing the prefix / total candidates), an
    /// estimate of the block latency saved by caching this feature.
    pub importance: f64,
    pub children: Vec<PrefixNode>,
    /// Indices into the candidate list for subnets attached here.
    pub leaves: Vec<usize>,
}

/// The evaluation schedule for one candidate set.
#[derive(Debug, Clone)]
pub struct PrefixTree {
    pub root: PrefixNode,
    pub depth_cap: usize,
    pub candidates: Vec<SubnetEncoding>,
}

/// What one group evaluation did and produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Per candidate, in input order.
    pub accuracies: Vec<f64>,
    /// Actual block executions across all batches.
    pub block_forward_count: u64,
    /// What independent per-subnet evaluation would have cost.
    pub naive_forward_count: u64,
    /// Peak number of simultaneously cached prefix features.
    pub peak_cached_features: usize,
    /// Batches loaded from the dataset (once each, regardless of the
    /// candidate count).
    pub batch_loads: u64,
}

/// Builds the prefix tree. Prefixes shared by at least two candidates
/// become internal nodes with importance latency x sharing fraction; when
/// a candidate's chain of shared prefixes is deeper than `depth_cap`, only
/// its `depth_cap` most important prefixes are kept, and a prefix survives
/// only if every candidate passing through it keeps it.
pub fn build_tree(
    candidates: &[SubnetEncoding],
    table: &LatencyTable,
    depth_cap: usize,
) -> Result<PrefixTree, EvalError> {
    if candidates.is_empty() {
        return Err(EvalError::NoCandidates);
    }
    {
        let mut seen = BTreeMap::new();
        for c in candidates {
            if seen.insert(c.choices().to_vec(), ()).is_some() {
                return Err(EvalError::DuplicateCandidate(c.arch()));
            }
        }
    }
    let total = candidates.len() as f64;

    // Count sharers of every proper choice prefix.
    let mut sharers: BTreeMap<Vec<VariantKey>, usize> = BTreeMap::new();
    for c in candidates {
        for len in 1..c.len() {
            *sharers.entry(c.choices()[..len].to_vec()).or_insert(0) += 1;
        }
    }
    sharers.retain(|_, n| *n >= 2);

    // Importance per shared prefix.
    let mut importance: BTreeMap<Vec<VariantKey>, (f64, f64)> = BTreeMap::new();
    for (prefix, &n) in &sharers {
        let mut lat = 0.0;
        for &key in prefix {
            lat += table.entry(key)?;
        }
        importance.insert(prefix.clone(), (lat, lat * n as f64 / total));
    }

    // Per-candidate retention: the depth_cap most important prefixes of
    // its own chain. A prefix is kept globally only if every candidate
    // through it retains it, which bounds every root-leaf cache depth.
    let mut keep_votes: BTreeMap<Vec<VariantKey>, usize> = BTreeMap::new();
    for c in candidates {
        let mut chain: Vec<Vec<VariantKey>> = (1..c.len())
            .map(|len| c.choices()[..len].to_vec())
            .filter(|p| sharers.contains_key(p))
            .collect();
        if chain.len() > depth_cap {
            chain.sort_by(|a, b| {
                let ia = importance[a].1;
                let ib = importance[b].1;
                ib.partial_cmp(&ia)
                    .unwrap()
                    .then(a.len().cmp(&b.len()))
                    .then(a.cmp(b))
            });
            chain.truncate(depth_cap);
        }
        for p in chain {
            *keep_votes.entry(p).or_insert(0) += 1;
        }
    }
    let kept: Vec<Vec<VariantKey>> = sharers
        .iter()
        .filter(|(p, &n)| keep_votes.get(*p).copied().unwrap_or(0) == n)
        .map(|(p, _)| p.clone())
        .collect();

    // Assemble the tree: parent of a kept prefix is its longest kept
    // proper prefix; candidates attach under the deepest kept prefix of
    // their own chain.
    let mut root = PrefixNode {
        prefix: Vec::new(),
        latency: 0.0,
        importance: 0.0,
        children: Vec::new(),
        leaves: Vec::new(),
    };
    // kept is in BTreeMap order; shorter prefixes of a chain sort before
    // their extensions, so parents are always inserted first.
    for p in &kept {
        let (lat, imp) = importance[p];
        let node = PrefixNode {
            prefix: p.clone(),
            latency: lat,
            importance: imp,
            children: Vec::new(),
            leaves: Vec::new(),
        };
        insert_node(&mut root, node);
    }
    for (i, c) in candidates.iter().enumerate() {
        attach_leaf(&mut root, c.choices(), i);
    }

    Ok(PrefixTree { root, depth_cap, candidates: candidates.to_vec() })
}

fn is_prefix(shorter: &[VariantKey], longer: &[VariantKey]) -> bool {
    shorter.len() < longer.len() && longer[..shorter.len()] == *shorter
}

fn insert_node(parent: &mut PrefixNode, node: PrefixNode) {
    for child in &mut parent.children {
        if is_prefix(&child.prefix, &node.prefix) {
            insert_node(child, node);
            return;
        }
    }
    parent.children.push(node);
}

fn attach_leaf(parent: &mut PrefixNode, choices: &[VariantKey], idx: usize) {
    for child in &mut parent.children {
        if is_prefix(&child.prefix, choices) {
            attach_leaf(child, choices, idx);
            return;
        }
    }
    parent.leaves.push(idx);
}

struct DfsState<'a> {
    weights: &'a SupernetWeights,
    candidates: &'a [SubnetEncoding],
    labels: &'a [usize],
    correct: Vec<u64>,
    block_forwards: u64,
    live_features: usize,
    peak_features: usize,
    depth_cap: usize,
}

fn forward_segment(
    weights: &SupernetWeights,
    segment: &[VariantKey],
    input: &DenseArray,
    counter: &mut u64,
) -> Result<DenseArray, EngineError> {
    let mut f = input.clone();
    for &key in segment {
        f = block_forward(weights.block(key)?, &f)?;
        *counter += 1;
    }
    Ok(f)
}

fn dfs_visit(node: &PrefixNode, input: &DenseArray, state: &mut DfsState) -> Result<(), EvalError> {
    for &idx in &node.leaves {
        let suffix = &state.candidates[idx].choices()[node.prefix.len()..];
        let mut count = 0;
        let f = forward_segment(state.weights, suffix, input, &mut count)?;
        state.block_forwards += count;
        let logits = state.weights.tail.forward(&f, false)?;
        let acc = accuracy_from_logits(&logits, state.labels);
        state.correct[idx] += (acc * state.labels.len() as f64).round() as u64;
    }
    for child in &node.children {
        let segment = &child.prefix[node.prefix.len()..];
        let mut count = 0;
        let feature = forward_segment(state.weights, segment, input, &mut count)?;
        state.block_forwards += count;
        state.live_features += 1;
        state.peak_features = state.peak_features.max(state.live_features);
        assert!(
            state.live_features <= state.depth_cap,
            "cache depth {} exceeded cap {}",
            state.live_features,
            state.depth_cap,
        );
        dfs_visit(child, &feature, state)?;
        state.live_features -= 1;
        // feature drops here, releasing the cache slot
    }
    Ok(())
}

/// Depth-first evaluation of every candidate in the tree over all batches
/// of `data`. Internal nodes forward their incremental prefix segment once
/// per batch; leaves forward only their suffix.
pub fn dfs_evaluate(
    tree: &PrefixTree,
    data: &Dataset,
    batch_size: usize,
    weights: &SupernetWeights,
) -> Result<EvalReport, EvalError> {
    if data.is_empty() {
        return Err(EvalError::EmptyEvalData);
    }
    let ranges = data.batch_ranges(batch_size.max(1));
    let mut correct = vec![0u64; tree.candidates.len()];
    let mut block_forwards = 0u64;
    let mut peak = 0usize;
    let mut batch_loads = 0u64;
    for range in &ranges {
        let (x, labels) = data.batch(range.clone());
        batch_loads += 1;
        let head_out = weights.head.forward(&x, true)?;
        let mut state = DfsState {
            weights,
            candidates: &tree.candidates,
            labels,
            correct: std::mem::take(&mut correct),
            block_forwards: 0,
            live_features: 0,
            peak_features: 0,
            depth_cap: tree.depth_cap,
        };
        dfs_visit(&tree.root, &head_out, &mut state)?;
        correct = state.correct;
        block_forwards += state.block_forwards;
        peak = peak.max(state.peak_features);
    }
    let per_subnet_blocks: u64 = tree.candidates.iter().map(|c| c.len() as u64).sum();
    Ok(EvalReport {
        accuracies: correct
            .iter()
            .map(|&c| c as f64 / data.len() as f64)
            .collect(),
        block_forward_count: block_forwards,
        naive_forward_count: per_subnet_blocks * ranges.len() as u64,
        peak_cached_features: peak,
        batch_loads,
    })
}

/// Batch-wise model group evaluation: builds the prefix tree once, then
/// loads each data batch exactly once and evaluates every candidate on it.
pub fn group_evaluate(
    candidates: &[SubnetEncoding],
    data: &Dataset,
    weights: &SupernetWeights,
    table: &LatencyTable,
    depth_cap: usize,
    batch_size: usize,
) -> Result<EvalReport, EvalError> {
    let tree = build_tree(candidates, table, depth_cap)?;
    dfs_evaluate(&tree, data, batch_size, weights)
}

/// Something that can score a batch of candidate encodings on edge data.
/// The search loop talks to evaluation only through this.
pub trait GroupEvaluator {
    fn evaluate(&mut self, candidates: &[SubnetEncoding]) -> Result<Vec<f64>, EvalError>;
}

/// The standard evaluator: reuse-based group evaluation against a dataset,
/// accumulating the per-call reports.
pub struct CachedEvaluator<'a> {
    pub weights: &'a SupernetWeights,
    pub data: &'a Dataset,
    pub table: &'a LatencyTable,
    pub depth_cap: usize,
    pub batch_size: usize,
    pub reports: Vec<EvalReport>,
}

impl<'a> CachedEvaluator<'a> {
    pub fn new(
        weights: &'a SupernetWeights,
        data: &'a Dataset,
        table: &'a LatencyTable,
        depth_cap: usize,
        batch_size: usize,
    ) -> Self {
        CachedEvaluator { weights, data, table, depth_cap, batch_size, reports: Vec::new() }
    }
}

impl GroupEvaluator for CachedEvaluator<'_> {
    fn evaluate(&mut self, candidates: &[SubnetEncoding]) -> Result<Vec<f64>, EvalError> {
        let report = group_evaluate(
            candidates,
            self.data,
            self.weights,
            self.table,
            self.depth_cap,
            self.batch_size,
        )?;
        let accs = report.accuracies.clone();
        self.reports.push(report);
        Ok(accs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::toy_graph;
    use crate::latsim::{nominal_table, DevicePreset};

    fn table_for(graph: &crate::graph::SupernetGraph) -> LatencyTable {
        nominal_table(graph, &DevicePreset::default())
    }

    #[test]
    fn shared_prefix_becomes_one_internal_node() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let t = table_for(&g);
        let candidates = vec![
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)]),
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, -1), (3, 0)]),
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 1)]),
        ];
        let tree = build_tree(&candidates, &t, 4).unwrap();
        // Deepest shared prefix [(0,0),(1,0)] holds all three leaves; the
        // length-1 prefix nests above it.
        assert_eq!(tree.root.children.len(), 1);
        let a = &tree.root.children[0];
        assert_eq!(a.prefix, vec![(0, 0)]);
        assert_eq!(a.children.len(), 1);
        let ab = &a.children[0];
        assert_eq!(ab.prefix, vec![(0, 0), (1, 0)]);
        assert_eq!(ab.leaves.len(), 3);
    }

    #[test]
    fn disjoint_candidates_build_flat_tree() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let t = table_for(&g);
        let candidates = vec![
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)]),
            SubnetEncoding::new(vec![(0, 1), (2, 1)]),
            SubnetEncoding::new(vec![(0, 2), (3, -1)]),
        ];
        let tree = build_tree(&candidates, &t, 4).unwrap();
        assert!(tree.root.children.is_empty());
        assert_eq!(tree.root.leaves, vec![0, 1, 2]);
    }

    #[test]
    fn importance_follows_sharing_fraction() {
        // Three candidates: A B x, A B y, A C z in choice terms.
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let t = table_for(&g);
        let candidates = vec![
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)]),
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 1)]),
            SubnetEncoding::new(vec![(0, 0), (1, -1), (2, 0), (3, 0)]),
        ];
        let tree = build_tree(&candidates, &t, 2).unwrap();
        let a = &tree.root.children[0];
        assert_eq!(a.prefix, vec![(0, 0)]);
        let lat_a = t.entries[&(0, 0)];
        assert!((a.importance - lat_a * 1.0).abs() < 1e-12);

        let ab = a
            .children
            .iter()
            .find(|c| c.prefix == vec![(0, 0), (1, 0)])
            .expect("AB kept");
        let lat_ab = lat_a + t.entries[&(1, 0)];
        assert!((ab.importance - lat_ab * (2.0 / 3.0)).abs() < 1e-12);
        // A C is shared by one candidate only, so it is not a node.
        assert!(a.children.iter().all(|c| c.prefix != vec![(0, 0), (1, -1)]));
    }

    #[test]
    fn duplicate_candidates_rejected() {
        let g = toy_graph(2, 1, &[]);
        let t = table_for(&g);
        let c = SubnetEncoding::new(vec![(0, 1)]);
        let err = build_tree(&[c.clone(), c], &t, 2).unwrap_err();
        assert!(matches!(err, EvalError::DuplicateCandidate(_)));
    }

    #[test]
    fn depth_cap_zero_degenerates_to_flat() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let t = table_for(&g);
        let candidates = vec![
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)]),
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, -1), (3, 0)]),
        ];
        let tree = build_tree(&candidates, &t, 0).unwrap();
        assert!(tree.root.children.is_empty());
        assert_eq!(tree.root.leaves.len(), 2);
    }

    #[test]
    fn depth_cap_one_keeps_single_most_important_prefix() {
        let g = toy_graph(4, 2, &[0.5, 0.25]);
        let t = table_for(&g);
        // Both candidates share prefixes of length 1, 2, 3. Importance is
        // latency (2/2 sharing) so the longest shared prefix wins.
        let candidates = vec![
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, 0)]),
            SubnetEncoding::new(vec![(0, 0), (1, 0), (2, 0), (3, -1)]),
        ];
        let tree = build_tree(&candidates, &t, 1).unwrap();
        assert_eq!(tree.root.children.len(), 1);
        let node = &tree.root.children[0];
        assert_eq!(node.prefix, vec![(0, 0), (1, 0), (2, 0)]);
        assert!(node.children.is_empty());
        assert_eq!(node.leaves.len(), 2);
    }
}
