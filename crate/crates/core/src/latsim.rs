//! Block latency profiling, additive subnet latency, and a simulated edge
//! environment with drifting load and shifted data distributions.
//!
//! Block cost follows the multiply-accumulate count of its two affine
//! stages (2 * d * width) times a per-device speed constant, so merged
//! blocks cost less than the segments they replace. Device presets are
//! scaled to the relative speeds of a few real phones; drift scenarios
//! model background load as stepwise latency multipliers.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::data::Dataset;

use crate::graph::{SubnetEncoding, SupernetGraph, VariantKey};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("missing latency entry for {0}:{1}")]
    MissingEntry(usize, i32),
    #[error("profiling needs at least 3 runs per block, got {0}")]
    TooFewRuns(usize),
    #[error("event timeline times must be strictly increasing")]
    BadTimeline,
    #[error("scale multipliers and noise must be positive, got {0}")]
    BadScale(f64),
    #[error("alpha must be > 0, got {0}")]
    BadAlpha(f64),
    #[error("base dataset needs at least 2 classes")]
    TooFewClasses,
}

/// Per-variant measured latencies in milliseconds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyTable {
    pub entries: BTreeMap<VariantKey, f64>,
    pub device_id: String,
    /// Simulator clock at profiling time; kept simulated so table files
    /// are byte-reproducible.
    pub profiled_at_ms: f64,
}

impl LatencyTable {
    pub fn entry(&self, key: VariantKey) -> Result<f64, SimError> {
        self.entries
            .get(&key)
            .copied()
            .ok_or(SimError::MissingEntry(key.0, key.1))
    }
}

/// A named device speed preset. Relative speeds follow measured
/// small-model latencies on the corresponding phones.
#[derive(Debug, Clone, PartialEq)]
pub struct DevicePreset {
    pub id: String,
    pub ms_per_mac: f64,
}

const BASE_MS_PER_MAC: f64 = 2.5e-3;

impl DevicePreset {
    pub fn by_name(name: &str) -> Option<DevicePreset> {
        // 14.43 : 53.05 : 46.45 : 31.29 measured ratios, normalized.
        let rel = match name {
            "xiaomi12" => 1.0,
            "nova4" => 53.05 / 14.43,
            "pixel2" => 46.45 / 14.43,
            "pixel6pro" => 31.29 / 14.43,
            _ => return None,
        };
        Some(DevicePreset { id: name.to_string(), ms_per_mac: BASE_MS_PER_MAC * rel })
    }

    pub fn names() -> &'static [&'static str] {
        &["xiaomi12", "nova4", "pixel2", "pixel6pro"]
    }
}

impl Default for DevicePreset {
    fn default() -> Self {
        DevicePreset::by_name("xiaomi12").unwrap()
    }
}

/// Simulated execution environment: per-block base costs plus a timeline
/// of global latency-scale events and relative jitter.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvProfile {
    pub device_id: String,
    pub base_block_cost: BTreeMap<VariantKey, f64>,
    /// (time_ms, scale) pairs; the last event at or before a query time is
    /// in effect, scale 1.0 before the first event.
    pub event_timeline: Vec<(f64, f64)>,
    pub noise_fraction: f64,
}

impl EnvProfile {
    pub fn for_graph(
        graph: &SupernetGraph,
        device: &DevicePreset,
        event_timeline: Vec<(f64, f64)>,
        noise_fraction: f64,
    ) -> Result<Self, SimError> {
        if noise_fraction < 0.0 {
            return Err(SimError::BadScale(noise_fraction));
        }
        for w in event_timeline.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(SimError::BadTimeline);
            }
        }
        for &(_, s) in &event_timeline {
            if s <= 0.0 {
                return Err(SimError::BadScale(s));
            }
        }
        let mut base = BTreeMap::new();
        for (&key, v) in &graph.variants {
            let d = graph.positions[v.start].in_dim;
            let macs = 2.0 * d as f64 * v.width as f64;
            base.insert(key, macs * device.ms_per_mac);
        }
        Ok(EnvProfile {
            device_id: device.id.clone(),
            base_block_cost: base,
            event_timeline,
            noise_fraction,
        })
    }

    /// Scale in effect at `t`.
    pub fn scale_at(&self, t: f64) -> f64 {
        let mut scale = 1.0;
        for &(time, s) in &self.event_timeline {
            if time <= t {
                scale = s;
            } else {
                break;
            }
        }
        scale
    }
}

/// Scenario presets for drift experiments, with event times placed at
/// thirds of the serving horizon.
pub fn scenario_events(name: &str, duration_ms: f64) -> Option<Vec<(f64, f64)>> {
    let third = duration_ms / 3.0;
    match name {
        "flat" => Some(vec![]),
        "step2" => Some(vec![(third, 2.0)]),
        "step3" => Some(vec![(third, 3.0)]),
        "updown" => Some(vec![(third, 2.0), (2.0 * third, 1.0)]),
        // Three background processes roughly double-to-triple latency.
        "bg3" => Some(vec![(third, 2.5)]),
        _ => None,
    }
}

pub fn scenario_names() -> &'static [&'static str] {
    &["flat", "step2", "step3", "updown", "bg3"]
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Times every variant `runs_per_block` times against the simulator at
/// clock zero and stores the median. Work is linear in the variant count,
/// never in the subnet count.
pub fn profile_blocks(
    graph: &SupernetGraph,
    env: &EnvProfile,
    runs_per_block: usize,
    seed: u64,
) -> Result<LatencyTable, SimError> {
    if runs_per_block < 3 {
        return Err(SimError::TooFewRuns(runs_per_block));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = env.scale_at(0.0);
    let mut entries = BTreeMap::new();
    for (&key, _) in &graph.variants {
        let base = env
            .base_block_cost
            .get(&key)
            .copied()
            .ok_or(SimError::MissingEntry(key.0, key.1))?;
        let mut runs: Vec<f64> = (0..runs_per_block)
            .map(|_| {
                let jitter = if env.noise_fraction > 0.0 {
                    rng.gen_range(-env.noise_fraction..=env.noise_fraction)
                } else {
                    0.0
                };
                base * scale * (1.0 + jitter)
            })
            .collect();
        entries.insert(key, median(&mut runs));
    }
    Ok(LatencyTable { entries, device_id: env.device_id.clone(), profiled_at_ms: 0.0 })
}

/// Noise-free table straight from the base cost model. Used for nominal
/// latency bins during training, before any on-device profiling exists.
pub fn nominal_table(graph: &SupernetGraph, device: &DevicePreset) -> LatencyTable {
    let env = EnvProfile::for_graph(graph, device, vec![], 0.0).expect("flat env is valid");
    LatencyTable {
        entries: env.base_block_cost,
        device_id: device.id.clone(),
        profiled_at_ms: 0.0,
    }
}

/// Sum of the chosen blocks' table entries, in choice order.
pub fn subnet_latency(table: &LatencyTable, enc: &SubnetEncoding) -> Result<f64, SimError> {
    let mut total = 0.0;
    for &key in enc.choices() {
        total += table.entry(key)?;
    }
    Ok(total)
}

/// One simulated end-to-end inference at `wall_time_ms`: the sum of block
/// base costs, scaled by the event in effect, with one jitter draw.
pub fn simulate_inference(
    enc: &SubnetEncoding,
    env: &EnvProfile,
    wall_time_ms: f64,
    seed: u64,
) -> Result<f64, SimError> {
    let mut base = 0.0;
    for &key in enc.choices() {
        base += env
            .base_block_cost
            .get(&key)
            .copied()
            .ok_or(SimError::MissingEntry(key.0, key.1))?;
    }
    let jitter = if env.noise_fraction > 0.0 {
        ChaCha8Rng::seed_from_u64(seed).gen_range(-env.noise_fraction..=env.noise_fraction)
    } else {
        0.0
    };
    Ok(base * env.scale_at(wall_time_ms) * (1.0 + jitter))
}

/// Least and greatest achievable subnet latency under a table, by dynamic
/// programming over position coverage.
pub fn latency_bounds(
    graph: &SupernetGraph,
    table: &LatencyTable,
) -> Result<(f64, f64), SimError> {
    let n = graph.num_positions();
    let mut lo = vec![f64::INFINITY; n + 1];
    let mut hi = vec![f64::NEG_INFINITY; n + 1];
    lo[0] = 0.0;
    hi[0] = 0.0;
    for i in 0..n {
        if lo[i].is_infinite() {
            continue;
        }
        for (&key, v) in graph.variants_at(i) {
            let t = table.entry(key)?;
            let j = i + v.span;
            if lo[i] + t < lo[j] {
                lo[j] = lo[i] + t;
            }
            if hi[i] + t > hi[j] {
                hi[j] = hi[i] + t;
            }
        }
    }
    Ok((lo[n], hi[n]))
}

/// A class-skewed dataset drawn to simulate one edge device's data.
#[derive(Debug, Clone)]
pub struct EdgeDataset {
    pub data: Dataset,
    pub class_proportions: Vec<f64>,
    pub alpha: f64,
}

/// Draws class proportions from Dirichlet(alpha * 1) and resamples the
/// base dataset per class, with replacement, to match them.
pub fn make_edge_dataset(
    base: &Dataset,
    alpha: f64,
    size: usize,
    seed: u64,
) -> Result<EdgeDataset, SimError> {
    if alpha <= 0.0 {
        return Err(SimError::BadAlpha(alpha));
    }
    let k = base.num_classes;
    if k < 2 {
        return Err(SimError::TooFewClasses);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Dirichlet via normalized Gamma(alpha, 1) draws. For very small alpha
    // the draws can all underflow to zero; the limit distribution puts all
    // mass on one class, so fall back to a one-hot draw.
    let gamma = Gamma::new(alpha, 1.0).map_err(|_| SimError::BadAlpha(alpha))?;
    let raw: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
    let sum: f64 = raw.iter().sum();
    let mut proportions = vec![0.0; k];
    if sum > 0.0 && sum.is_finite() {
        for (p, r) in proportions.iter_mut().zip(&raw) {
            *p = r / sum;
        }
    } else {
        proportions[rng.gen_range(0..k)] = 1.0;
    }

    // Classes absent from the base dataset cannot be sampled; fold their
    // mass into the remaining classes.
    let by_class = base.by_class();
    let present: f64 = proportions
        .iter()
        .enumerate()
        .filter(|(c, _)| !by_class[*c].is_empty())
        .map(|(_, p)| p)
        .sum();
    if present > 0.0 {
        for (c, p) in proportions.iter_mut().enumerate() {
            if by_class[c].is_empty() {
                *p = 0.0;
            } else {
                *p /= present;
            }
        }
    }

    // Largest-remainder allocation of `size` examples over classes.
    let mut counts = vec![0usize; k];
    let mut rema: Vec<(f64, usize)> = Vec::with_capacity(k);
    let mut assigned = 0usize;
    for c in 0..k {
        let exact = proportions[c] * size as f64;
        counts[c] = exact.floor() as usize;
        assigned += counts[c];
        rema.push((exact - exact.floor(), c));
    }
    rema.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in rema.iter() {
        if assigned >= size {
            break;
        }
        if !by_class[c].is_empty() {
            counts[c] += 1;
            assigned += 1;
        }
    }

    let mut idx = Vec::with_capacity(size);
    for (c, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let pick = by_class[c][rng.gen_range(0..by_class[c].len())];
            idx.push(pick);
        }
    }
    Ok(EdgeDataset { data: base.gather(&idx), class_proportions: proportions, alpha })
}
