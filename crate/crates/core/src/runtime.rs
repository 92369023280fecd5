//! Serving-time machinery: the subnet pool, the latency monitor, block
//! paging, and the serve loop with re-search escalation.
//!
//! The monitor tracks the latency scaling ratio r = observed / estimated.
//! When the active subnet's projected latency exceeds the budget it swaps
//! to the most accurate pool entry under the scaled budget T/r; when the
//! environment relaxes it swaps upward, behind a 5% dead band to avoid
//! oscillation. If nothing in the pool fits, it escalates to a re-search.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use thiserror::Error;

use crate::engine::SupernetWeights;
use crate::graph::{GraphError, SubnetEncoding, VariantKey};
use crate::latsim::{simulate_inference, subnet_latency, EnvProfile, LatencyTable, SimError};
use crate::search::HistoryRecord;
use crate::seeds;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("empty search history")]
    EmptyHistory,
    #[error("pool has no subnet within budget {budget}")]
    NoFit { budget: f64 },
    #[error("weight store is missing block {0}:{1}; swap aborted")]
    MissingBlock(usize, i32),
    #[error("re-search failed: {0}")]
    ResearchFailed(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// One retained subnet: the best accuracy seen at its latency band.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub arch: String,
    pub latency: f64,
    pub accuracy: f64,
    /// latency / (current optimal subnet's latency).
    pub relative_latency: f64,
}

/// Per-band accuracy maxima over the searched tuples, sorted by latency.
#[derive(Debug, Clone, PartialEq)]
pub struct SubnetPool {
    pub entries: Vec<PoolEntry>,
    pub window: (f64, f64),
}

impl SubnetPool {
    /// Most accurate entry with latency at most `budget`.
    pub fn best_within(&self, budget: f64) -> Option<&PoolEntry> {
        self.entries
            .iter()
            .filter(|e| e.latency <= budget)
            .max_by(|a, b| {
                a.accuracy
                    .partial_cmp(&b.accuracy)
                    .unwrap()
                    .then(b.latency.partial_cmp(&a.latency).unwrap())
                    .then(b.arch.cmp(&a.arch))
            })
    }

    pub fn entry(&self, arch: &str) -> Option<&PoolEntry> {
        self.entries.iter().find(|e| e.arch == arch)
    }
}

/// Builds the pool from searched tuples: the window is split into `levels`
/// bands and each occupied band keeps its accuracy argmax. Entries outside
/// the window are dropped, unless that would leave the pool empty, in
/// which case the single best tuple is kept.
pub fn build_pool(
    history: &[HistoryRecord],
    window: (f64, f64),
    levels: usize,
) -> Result<SubnetPool, RuntimeError> {
    if history.is_empty() {
        return Err(RuntimeError::EmptyHistory);
    }
    let levels = levels.max(1);
    let (lo, hi) = window;
    let width = ((hi - lo) / levels as f64).max(f64::MIN_POSITIVE);
    let mut bands: Vec<Option<&HistoryRecord>> = vec![None; levels];
    for rec in history {
        if rec.latency < lo || rec.latency > hi {
            continue;
        }
        let band = (((rec.latency - lo) / width) as usize).min(levels - 1);
        let take = match bands[band] {
            None => true,
            Some(cur) => {
                (rec.accuracy, -rec.latency, &cur.arch)
                    > (cur.accuracy, -cur.latency, &rec.arch)
            }
        };
        if take {
            bands[band] = Some(rec);
        }
    }
    let mut picked: Vec<&HistoryRecord> = bands.into_iter().flatten().collect();
    if picked.is_empty() {
        // Nothing in the window: keep the single best tuple so a
        // one-subnet history still yields that subnet.
        let best = history
            .iter()
            .max_by(|a, b| {
                a.accuracy
                    .partial_cmp(&b.accuracy)
                    .unwrap()
                    .then(b.latency.partial_cmp(&a.latency).unwrap())
            })
            .unwrap();
        picked.push(best);
    }
    picked.sort_by(|a, b| a.latency.partial_cmp(&b.latency).unwrap());

    // Relative latencies are taken against the current optimal: the most
    // accurate entry within the window midpoint budget.
    let t_budget = 0.5 * (lo + hi);
    let optimal_latency = picked
        .iter()
        .filter(|e| e.latency <= t_budget)
        .max_by(|a, b| a.accuracy.partial_cmp(&b.accuracy).unwrap())
        .map(|e| e.latency)
        .unwrap_or_else(|| picked[0].latency);

    Ok(SubnetPool {
        entries: picked
            .into_iter()
            .map(|rec| PoolEntry {
                arch: rec.arch.clone(),
                latency: rec.latency,
                accuracy: rec.accuracy,
                relative_latency: rec.latency / optimal_latency,
            })
            .collect(),
        window,
    })
}

/// What the monitor decided this cycle.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Keep,
    Swap { arch: String },
    Research,
}

impl Action {
    pub fn kind(&self) -> &'static str {
        match self {
            Action::Keep => "keep",
            Action::Swap { .. } => "swap",
            Action::Research => "research",
        }
    }
}

/// Latency monitor state for the active subnet.
#[derive(Debug, Clone)]
pub struct MonitorState {
    pub active_arch: String,
    /// Table latency of the active subnet.
    pub estimated_latency: f64,
    pub observation_window: VecDeque<f64>,
    /// Latency scaling ratio observed / estimated.
    pub r: f64,
    pub cycle_period_ms: f64,
    /// Observations further than this relative distance from the window
    /// median flush the window, so step changes take effect in one cycle
    /// while jitter is still smoothed by the median.
    pub drift_threshold: f64,
    window_len: usize,
}

impl MonitorState {
    pub fn new(active_arch: String, estimated_latency: f64, cycle_period_ms: f64) -> Self {
        MonitorState {
            active_arch,
            estimated_latency,
            observation_window: VecDeque::new(),
            r: 1.0,
            cycle_period_ms,
            drift_threshold: 0.25,
            window_len: 5,
        }
    }

    fn median(&self) -> f64 {
        let mut xs: Vec<f64> = self.observation_window.iter().copied().collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if xs.is_empty() {
            self.estimated_latency
        } else if xs.len() % 2 == 1 {
            xs[xs.len() / 2]
        } else {
            0.5 * (xs[xs.len() / 2 - 1] + xs[xs.len() / 2])
        }
    }

    /// Records an observation, flushing the window on a drift break.
    pub fn observe(&mut self, observed_ms: f64) {
        if !self.observation_window.is_empty() {
            let med = self.median();
            if med > 0.0 && ((observed_ms - med).abs() / med) > self.drift_threshold {
                self.observation_window.clear();
            }
        }
        self.observation_window.push_back(observed_ms);
        while self.observation_window.len() > self.window_len {
            self.observation_window.pop_front();
        }
        self.r = self.median() / self.estimated_latency;
    }

    /// Resets tracking after the active subnet changed.
    pub fn switch_active(&mut self, arch: String, estimated_latency: f64) {
        self.active_arch = arch;
        self.estimated_latency = estimated_latency;
        self.observation_window.clear();
        self.r = 1.0;
    }
}

/// Upward swaps must leave this fraction of the budget as headroom.
const UPWARD_DEAD_BAND: f64 = 0.05;

/// One monitoring decision. `observed_latency` is this cycle's measured
/// inference time for the active subnet.
pub fn monitor_step(
    state: &mut MonitorState,
    observed_latency: f64,
    pool: &SubnetPool,
    t_budget: f64,
) -> Action {
    state.observe(observed_latency);
    if pool.entries.is_empty() {
        return Action::Research;
    }
    let r = state.r;
    let projected = state.estimated_latency * r;
    if projected > t_budget {
        // Over budget: the best entry under the scaled budget T/r, if any.
        let scaled = t_budget / r;
        return match pool.best_within(scaled) {
            Some(e) if e.arch != state.active_arch => Action::Swap { arch: e.arch.clone() },
            Some(_) => Action::Keep,
            None => Action::Research,
        };
    }
    // Under budget: consider swapping up to a more accurate subnet that
    // still fits with a dead band of headroom.
    let active_accuracy = pool
        .entry(&state.active_arch)
        .map(|e| e.accuracy)
        .unwrap_or(f64::NEG_INFINITY);
    let headroom_budget = (1.0 - UPWARD_DEAD_BAND) * t_budget / r;
    if let Some(candidate) = pool.best_within(headroom_budget) {
        if candidate.arch != state.active_arch && candidate.accuracy > active_accuracy {
            return Action::Swap { arch: candidate.arch.clone() };
        }
    }
    Action::Keep
}

/// Resident block bookkeeping for block-wise loading. Head and tail are
/// always resident and not tracked here.
#[derive(Debug, Clone, Default)]
pub struct BlockPager {
    resident: BTreeSet<VariantKey>,
}

/// Blocks loaded and released by one swap.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapDelta {
    pub loaded: Vec<VariantKey>,
    pub released: Vec<VariantKey>,
}

impl BlockPager {
    pub fn resident(&self) -> &BTreeSet<VariantKey> {
        &self.resident
    }

    /// Swaps the resident set to exactly the blocks of `new_enc`. All
    /// required blocks are checked against the weight store before
    /// anything changes, so a missing block aborts with no partial swap.
    /// Old-only blocks are released before new ones load, keeping peak
    /// residency at max(old, new).
    pub fn swap_subnet(
        &mut self,
        new_enc: &SubnetEncoding,
        weights: &SupernetWeights,
    ) -> Result<SwapDelta, RuntimeError> {
        let needed: BTreeSet<VariantKey> = new_enc.choices().iter().copied().collect();
        for &key in &needed {
            if weights.block(key).is_err() {
                return Err(RuntimeError::MissingBlock(key.0, key.1));
            }
        }
        let released: Vec<VariantKey> =
            self.resident.difference(&needed).copied().collect();
        let loaded: Vec<VariantKey> = needed.difference(&self.resident).copied().collect();
        for key in &released {
            self.resident.remove(key);
        }
        for key in &loaded {
            self.resident.insert(*key);
        }
        debug_assert_eq!(self.resident, needed);
        Ok(SwapDelta { loaded, released })
    }
}

/// Serve-loop knobs.
#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub t_budget: f64,
    pub cycle_period_ms: f64,
    pub duration_ms: f64,
    pub seed: u64,
}

/// One line of the serving event log.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeEvent {
    pub t_ms: f64,
    pub observed_ms: f64,
    pub r: f64,
    pub action: Action,
    pub arch: String,
}

/// Runs the monitoring loop against the simulated environment. Research
/// escalation is delegated to `research`, which receives the scaled budget
/// and must return a fresh pool; serving pauses while it runs and the old
/// model stays active until the new pool is ready.
pub fn serve_loop(
    env: &EnvProfile,
    pool: &SubnetPool,
    weights: &SupernetWeights,
    table: &LatencyTable,
    config: &ServeConfig,
    research: &mut dyn FnMut(f64) -> Result<SubnetPool, RuntimeError>,
) -> Result<Vec<ServeEvent>, RuntimeError> {
    let mut pool = pool.clone();
    let initial = pool
        .best_within(config.t_budget)
        .ok_or(RuntimeError::NoFit { budget: config.t_budget })?
        .clone();
    let mut active_enc = SubnetEncoding::parse_arch(&initial.arch)?;
    let mut pager = BlockPager::default();
    pager.swap_subnet(&active_enc, weights)?;
    let mut state = MonitorState::new(
        initial.arch.clone(),
        subnet_latency(table, &active_enc)?,
        config.cycle_period_ms,
    );

    let mut events = Vec::new();
    let mut t = config.cycle_period_ms;
    let mut cycle = 0u64;
    while t <= config.duration_ms {
        let observed = simulate_inference(
            &active_enc,
            env,
            t,
            seeds::stream(config.seed, "serve") ^ cycle,
        )?;
        let action = monitor_step(&mut state, observed, &pool, config.t_budget);
        match &action {
            Action::Keep => {}
            Action::Swap { arch } => {
                let enc = SubnetEncoding::parse_arch(arch)?;
                pager.swap_subnet(&enc, weights)?;
                state.switch_active(arch.clone(), subnet_latency(table, &enc)?);
                active_enc = enc;
            }
            Action::Research => {
                let scaled = config.t_budget / state.r;
                pool = research(scaled)?;
                let next = pool
                    .best_within(scaled)
                    .ok_or(RuntimeError::NoFit { budget: scaled })?
                    .clone();
                let enc = SubnetEncoding::parse_arch(&next.arch)?;
                pager.swap_subnet(&enc, weights)?;
                state.switch_active(next.arch.clone(), subnet_latency(table, &enc)?);
                active_enc = enc;
            }
        }
        events.push(ServeEvent {
            t_ms: t,
            observed_ms: observed,
            r: state.r,
            action,
            arch: state.active_arch.clone(),
        });
        t += config.cycle_period_ms;
        cycle += 1;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(arch: &str, latency: f64, accuracy: f64) -> HistoryRecord {
        HistoryRecord { generation: 0, arch: arch.to_string(), latency, accuracy }
    }

    #[test]
    fn pool_single_entry_history() {
        let pool = build_pool(&[rec("0:0", 5.0, 0.9)], (10.0, 20.0), 10).unwrap();
        assert_eq!(pool.entries.len(), 1);
        assert_eq!(pool.entries[0].arch, "0:0");
    }

    #[test]
    fn pool_keeps_band_argmax() {
        let history = vec![rec("a", 10.1, 0.8), rec("b", 10.2, 0.9)];
        let pool = build_pool(&history, (10.0, 11.0), 1).unwrap();
        assert_eq!(pool.entries.len(), 1);
        assert_eq!(pool.entries[0].arch, "b");
    }

    #[test]
    fn pool_band_maxima_match_brute_force() {
        let mut history = Vec::new();
        let mut x = 0.123f64;
        for i in 0..500 {
            x = (x * 997.0 + 0.317).fract();
            let lat = 10.0 + 10.0 * x;
            let acc = ((i as f64 * 0.77).sin() * 0.5 + 0.5).min(1.0);
            history.push(rec(&format!("{i}:0"), lat, acc));
        }
        let window = (10.0, 20.0);
        let levels = 10;
        let pool = build_pool(&history, window, levels).unwrap();
        // Brute-force per-band maxima.
        let width = (window.1 - window.0) / levels as f64;
        for e in &pool.entries {
            let band = (((e.latency - window.0) / width) as usize).min(levels - 1);
            let best = history
                .iter()
                .filter(|r| {
                    r.latency >= window.0
                        && r.latency <= window.1
                        && (((r.latency - window.0) / width) as usize).min(levels - 1) == band
                })
                .map(|r| r.accuracy)
                .fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(e.accuracy, best);
        }
        // No entry is dominated within the pool's own band structure.
        for (i, a) in pool.entries.iter().enumerate() {
            for b in pool.entries.iter().skip(i + 1) {
                assert!(!(b.latency <= a.latency && b.accuracy > a.accuracy));
            }
        }
    }

    #[test]
    fn monitor_r_formula() {
        let pool = build_pool(&[rec("a", 10.0, 0.9)], (9.0, 11.0), 10).unwrap();
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        let action = monitor_step(&mut state, 15.0, &pool, 12.0);
        assert!((state.r - 1.5).abs() < 1e-12);
        // Projected 15 > 12 and nothing fits 12/1.5 = 8: research.
        assert_eq!(action, Action::Research);
    }

    #[test]
    fn monitor_keeps_when_optimal_and_stable() {
        let history = vec![rec("a", 10.0, 0.9), rec("b", 8.0, 0.7)];
        let pool = build_pool(&history, (7.0, 11.0), 4).unwrap();
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        let action = monitor_step(&mut state, 10.0, &pool, 11.0);
        assert_eq!(action, Action::Keep);
        assert!((state.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monitor_swaps_down_under_pressure() {
        let history = vec![rec("a", 10.0, 0.9), rec("b", 5.0, 0.7)];
        let pool = build_pool(&history, (4.0, 11.0), 8).unwrap();
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        // Scale doubles: projected 20 > budget 11, scaled budget 5.5.
        let action = monitor_step(&mut state, 20.0, &pool, 11.0);
        assert_eq!(action, Action::Swap { arch: "b".into() });
    }

    #[test]
    fn monitor_swaps_up_when_pressure_lifts() {
        let history = vec![rec("a", 10.0, 0.9), rec("b", 5.0, 0.7)];
        let pool = build_pool(&history, (4.0, 11.0), 8).unwrap();
        let mut state = MonitorState::new("b".into(), 5.0, 100.0);
        let action = monitor_step(&mut state, 5.0, &pool, 11.0);
        assert_eq!(action, Action::Swap { arch: "a".into() });
    }

    #[test]
    fn drift_break_reacts_in_one_observation() {
        let pool = build_pool(&[rec("a", 10.0, 0.9), rec("b", 5.0, 0.7)], (4.0, 11.0), 8).unwrap();
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        // Five stable cycles fill the window.
        for _ in 0..5 {
            assert_eq!(monitor_step(&mut state, 10.0, &pool, 11.0), Action::Keep);
        }
        // A x2 step must flush the stale window and swap immediately.
        let action = monitor_step(&mut state, 20.0, &pool, 11.0);
        assert_eq!(action, Action::Swap { arch: "b".into() });
        assert!((state.r - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jitter_below_threshold_is_smoothed() {
        let pool = build_pool(&[rec("a", 10.0, 0.9)], (9.0, 11.0), 4).unwrap();
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        for obs in [10.0, 10.8, 9.4, 10.2, 9.8, 10.9, 9.2] {
            let action = monitor_step(&mut state, obs, &pool, 11.0);
            assert_eq!(action, Action::Keep);
            assert!(state.observation_window.len() > 1 || state.r == obs / 10.0);
        }
        assert!(state.observation_window.len() == 5);
    }

    #[test]
    fn empty_pool_triggers_research() {
        let pool = SubnetPool { entries: vec![], window: (0.0, 1.0) };
        let mut state = MonitorState::new("a".into(), 10.0, 100.0);
        assert_eq!(monitor_step(&mut state, 10.0, &pool, 11.0), Action::Research);
    }
}
