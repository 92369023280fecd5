//! Latency-model-guided subnet search.
//!
//! Initialization and mutation keep candidates inside the latency window
//! [T_budget - dT, T_budget + dT]; candidates above the budget stay in the
//! pool because the runtime monitor may want them after an environment
//! change. Evaluation is delegated to the reuse cache, and duplicates are
//! never evaluated twice since evaluation is the cost center.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use rand::Rng;
use thiserror::Error;

use crate::evalcache::{EvalError, GroupEvaluator};
use crate::graph::{
    enumerate_subnets, validate_subnet, SubnetEncoding, SubnetSampler, SupernetGraph, VariantKey,
};
use crate::latsim::{subnet_latency, LatencyTable, SimError};
use crate::seeds;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("empty latency window [{lo}, {hi}] after {attempts} sampled subnets")]
    EmptyLatencyWindow { lo: f64, hi: f64, attempts: usize },
    #[error("no subnet within budget {budget}")]
    NoFeasible { budget: f64 },
    #[error("subnet space larger than oracle cap {cap}")]
    SpaceTooLarge { cap: u64 },
    #[error("population must be >= 2 and delta_t >= 0")]
    BadConfig,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Search knobs. `delta_t` is the half-width of the latency window around
/// the budget; `keep_fraction` of each generation survives by accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub t_budget: f64,
    pub delta_t: f64,
    pub population: usize,
    pub search_times: usize,
    pub keep_fraction: f64,
    pub seed: u64,
    /// Sampling attempts before the window is declared empty.
    pub max_init_attempts: usize,
    /// Simulated annealing extensions.
    pub initial_temp: f64,
    pub cooling: f64,
}

impl SearchConfig {
    pub fn new(t_budget: f64, population: usize, search_times: usize, seed: u64) -> Self {
        SearchConfig {
            t_budget,
            delta_t: 0.1 * t_budget,
            population,
            search_times,
            keep_fraction: 0.5,
            seed,
            max_init_attempts: 200_000,
            initial_temp: 0.02,
            cooling: 0.95,
        }
    }

    pub fn window(&self) -> (f64, f64) {
        (self.t_budget - self.delta_t, self.t_budget + self.delta_t)
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.population < 2 || self.delta_t < 0.0 {
            return Err(SearchError::BadConfig);
        }
        Ok(())
    }
}

/// One scored subnet.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub enc: SubnetEncoding,
    pub latency: f64,
    pub accuracy: Option<f64>,
}

/// One evaluation event: the generation it happened in and the tuple that
/// entered the pool.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub generation: usize,
    pub arch: String,
    pub latency: f64,
    pub accuracy: f64,
}

/// Everything a search run produces: the best in-budget candidate, the
/// ordered evaluation history, and the pool of all evaluated tuples.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub best: Candidate,
    pub history: Vec<HistoryRecord>,
    pub pool: Vec<HistoryRecord>,
}

fn in_window(lat: f64, window: (f64, f64)) -> bool {
    lat >= window.0 && lat <= window.1
}

/// Samples up to `population` distinct subnets whose latencies lie inside
/// the window. Returns fewer when the window holds fewer distinct subnets
/// than requested, and errors only when the attempt budget finds none.
pub fn nearby_init(
    graph: &SupernetGraph,
    table: &LatencyTable,
    config: &SearchConfig,
    rng: &mut impl Rng,
) -> Result<Vec<Candidate>, SearchError> {
    config.validate()?;
    let window = config.window();
    let sampler = SubnetSampler::new(graph);
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < config.population && attempts < config.max_init_attempts {
        attempts += 1;
        let enc = sampler.sample(rng);
        let lat = subnet_latency(table, &enc)?;
        if !in_window(lat, window) {
            continue;
        }
        if seen.insert(enc.arch(), ()).is_none() {
            out.push(Candidate { enc, latency: lat, accuracy: None });
        }
    }
    if out.is_empty() {
        return Err(SearchError::EmptyLatencyWindow {
            lo: window.0,
            hi: window.1,
            attempts,
        });
    }
    Ok(out)
}

/// Replaces the choice at `idx` with variant `alt`, realigning the
/// remainder: overlapped original choices are dropped and any gap up to
/// the next surviving boundary is filled with original (j = 0) blocks.
/// Deterministic; used by the mutation fallback scan.
fn replace_span(
    enc: &SubnetEncoding,
    idx: usize,
    alt: VariantKey,
    graph: &SupernetGraph,
) -> SubnetEncoding {
    let choices = enc.choices();
    let mut out: Vec<VariantKey> = choices[..idx].to_vec();
    out.push(alt);
    let mut cursor = alt.0 + graph.variant(alt).expect("alt exists").span;
    let mut rest = idx + 1;
    while rest < choices.len() && choices[rest].0 < cursor {
        rest += 1;
    }
    let resume = if rest < choices.len() { choices[rest].0 } else { graph.num_positions() };
    while cursor < resume {
        out.push((cursor, 0));
        cursor += 1;
    }
    out.extend_from_slice(&choices[rest..]);
    SubnetEncoding::new(out)
}

/// Every deterministic single-span replacement of `enc`, paired with the
/// replaced index. The fallback scan ranks these by window distance.
pub fn single_span_replacements(
    enc: &SubnetEncoding,
    graph: &SupernetGraph,
) -> Vec<SubnetEncoding> {
    let mut out = Vec::new();
    for (idx, &(start, degree)) in enc.choices().iter().enumerate() {
        for (&key, _) in graph.variants_at(start) {
            if key == (start, degree) {
                continue;
            }
            out.push(replace_span(enc, idx, key, graph));
        }
    }
    out
}

/// Randomly replaces one branch. If the mutated subnet leaves the window,
/// scans all single-span replacements and returns the one closest to the
/// window (distance zero means inside). Always returns a valid encoding.
pub fn nearby_mutate(
    enc: &SubnetEncoding,
    graph: &SupernetGraph,
    table: &LatencyTable,
    window: (f64, f64),
    rng: &mut impl Rng,
) -> SubnetEncoding {
    let sampler = SubnetSampler::new(graph);
    nearby_mutate_with(enc, graph, table, window, &sampler, rng)
}

/// Mutation core that reuses a prepared sampler across calls.
pub fn nearby_mutate_with(
    enc: &SubnetEncoding,
    graph: &SupernetGraph,
    table: &LatencyTable,
    window: (f64, f64),
    sampler: &SubnetSampler,
    rng: &mut impl Rng,
) -> SubnetEncoding {
    // Pick a span with at least one alternative variant.
    let mut span_order: Vec<usize> = (0..enc.len()).collect();
    crate::data::shuffle(&mut span_order, rng);
    let mut picked = None;
    for &idx in &span_order {
        let (start, degree) = enc.choices()[idx];
        let alts: Vec<VariantKey> = graph
            .variants_at(start)
            .map(|(&k, _)| k)
            .filter(|&k| k != (start, degree))
            .collect();
        if !alts.is_empty() {
            let alt = alts[rng.gen_range(0..alts.len())];
            picked = Some((idx, alt));
            break;
        }
    }
    let Some((idx, alt)) = picked else {
        // Degenerate graph with a single subnet; nothing can change.
        return enc.clone();
    };

    // Random replacement with uniform re-covering of the gap.
    let choices = enc.choices();
    let mut mutated: Vec<VariantKey> = choices[..idx].to_vec();
    mutated.push(alt);
    let cursor = alt.0 + graph.variant(alt).expect("alt exists").span;
    let mut rest = idx + 1;
    while rest < choices.len() && choices[rest].0 < cursor {
        rest += 1;
    }
    let resume = if rest < choices.len() { choices[rest].0 } else { graph.num_positions() };
    if cursor < resume {
        mutated.extend(sampler.sample_range(cursor, resume, rng));
    }
    mutated.extend_from_slice(&choices[rest..]);
    let mutated = SubnetEncoding::new(mutated);
    debug_assert!(validate_subnet(graph, &mutated).is_ok());

    let lat = subnet_latency(table, &mutated).expect("mutated variants are in the table");
    if in_window(lat, window) {
        return mutated;
    }

    // Out of window: scan all single-span replacements for the smallest
    // distance to the window, tie-broken by latency then arch.
    let distance = |lat: f64| -> f64 {
        if in_window(lat, window) {
            0.0
        } else if lat < window.0 {
            window.0 - lat
        } else {
            lat - window.1
        }
    };
    let mut best: Option<(f64, f64, String, SubnetEncoding)> = None;
    for cand in single_span_replacements(enc, graph) {
        let lat = match subnet_latency(table, &cand) {
            Ok(l) => l,
            Err(_) => continue,
        };
        let key = (distance(lat), lat, cand.arch());
        let better = match &best {
            None => true,
            Some((d, l, a, _)) => {
                (key.0, key.1, key.2.as_str()) < (*d, *l, a.as_str())
            }
        };
        if better {
            best = Some((key.0, key.1, key.2, cand));
        }
    }
    best.map(|(_, _, _, c)| c).unwrap_or(mutated)
}

/// Ranking used everywhere: higher accuracy, then lower latency, then
/// lexicographic arch.
fn rank_key(c: &Candidate) -> (f64, f64, String) {
    (-(c.accuracy.unwrap_or(f64::NEG_INFINITY)), c.latency, c.enc.arch())
}

fn better(a: &Candidate, b: &Candidate) -> bool {
    let (aa, al, aar) = rank_key(a);
    let (ba, bl, bar) = rank_key(b);
    (aa, al, aar) < (ba, bl, bar)
}

struct EvalLedger {
    evaluated: BTreeMap<String, (f64, f64)>,
    history: Vec<HistoryRecord>,
}

impl EvalLedger {
    fn new() -> Self {
        EvalLedger { evaluated: BTreeMap::new(), history: Vec::new() }
    }

    /// Evaluates only candidates not seen before, once, in order.
    fn evaluate(
        &mut self,
        generation: usize,
        candidates: &mut [Candidate],
        evaluator: &mut dyn GroupEvaluator,
    ) -> Result<(), SearchError> {
        let mut fresh: Vec<usize> = Vec::new();
        let mut fresh_encs: Vec<SubnetEncoding> = Vec::new();
        let mut seen_in_call: BTreeMap<String, ()> = BTreeMap::new();
        for (i, c) in candidates.iter().enumerate() {
            let arch = c.enc.arch();
            if !self.evaluated.contains_key(&arch) && seen_in_call.insert(arch, ()).is_none() {
                fresh.push(i);
                fresh_encs.push(c.enc.clone());
            }
        }
        if !fresh_encs.is_empty() {
            let accs = evaluator.evaluate(&fresh_encs)?;
            for (i, acc) in fresh.iter().zip(accs) {
                let c = &candidates[*i];
                let arch = c.enc.arch();
                self.evaluated.insert(arch.clone(), (c.latency, acc));
                self.history.push(HistoryRecord {
                    generation,
                    arch,
                    latency: c.latency,
                    accuracy: acc,
                });
            }
        }
        for c in candidates.iter_mut() {
            c.accuracy = Some(self.evaluated[&c.enc.arch()].1);
        }
        Ok(())
    }

    fn pool(&self) -> Vec<HistoryRecord> {
        self.evaluated
            .iter()
            .map(|(arch, &(latency, accuracy))| HistoryRecord {
                generation: 0,
                arch: arch.clone(),
                latency,
                accuracy,
            })
            .collect()
    }
}

fn dedup_by_arch(pop: Vec<Candidate>) -> Vec<Candidate> {
    let mut seen = BTreeMap::new();
    pop.into_iter()
        .filter(|c| seen.insert(c.enc.arch(), ()).is_none())
        .collect()
}

/// Survivor selection: in-budget candidates ranked first, both groups by
/// accuracy, latency, arch.
fn select_survivors(mut pop: Vec<Candidate>, t_budget: f64, keep: usize) -> Vec<Candidate> {
    pop.sort_by(|a, b| {
        let fa = a.latency <= t_budget;
        let fb = b.latency <= t_budget;
        fb.cmp(&fa).then_with(|| {
            let (aa, al, aar) = rank_key(a);
            let (ba, bl, bar) = rank_key(b);
            (aa, al, aar).partial_cmp(&(ba, bl, bar)).unwrap()
        })
    });
    pop.truncate(keep.max(1));
    pop
}

fn run_evolution(
    graph: &SupernetGraph,
    table: &LatencyTable,
    config: &SearchConfig,
    evaluator: &mut dyn GroupEvaluator,
    window: (f64, f64),
    init: Vec<Candidate>,
) -> Result<SearchOutcome, SearchError> {
    let sampler = SubnetSampler::new(graph);
    let mut rng = seeds::rng(config.seed, "mutate");
    let mut ledger = EvalLedger::new();
    let mut pop = dedup_by_arch(init);
    ledger.evaluate(0, &mut pop, evaluator)?;

    let mut best: Option<Candidate> = None;
    let update_best = |pop: &[Candidate], best: &mut Option<Candidate>| {
        for c in pop {
            if c.latency <= config.t_budget {
                let replace = match best {
                    None => true,
                    Some(b) => better(c, b),
                };
                if replace {
                    *best = Some(c.clone());
                }
            }
        }
    };
    update_best(&pop, &mut best);

    for generation in 1..=config.search_times {
        let keep = ((pop.len() as f64) * config.keep_fraction).ceil() as usize;
        let survivors = select_survivors(pop, config.t_budget, keep);
        let mut next = survivors.clone();
        for s in &survivors {
            let child = nearby_mutate_with(&s.enc, graph, table, window, &sampler, &mut rng);
            let latency = subnet_latency(table, &child)?;
            next.push(Candidate { enc: child, latency, accuracy: None });
        }
        pop = dedup_by_arch(next);
        ledger.evaluate(generation, &mut pop, evaluator)?;
        update_best(&pop, &mut best);
    }

    let best = best.ok_or(SearchError::NoFeasible { budget: config.t_budget })?;
    let pool = ledger.pool();
    Ok(SearchOutcome { best, history: ledger.history, pool })
}

/// Window-guided evolutionary search.
pub fn evolutionary_search(
    graph: &SupernetGraph,
    table: &LatencyTable,
    config: &SearchConfig,
    evaluator: &mut dyn GroupEvaluator,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let mut rng = seeds::rng(config.seed, "init");
    let init = nearby_init(graph, table, config, &mut rng)?;
    run_evolution(graph, table, config, evaluator, config.window(), init)
}

/// Unguided baseline: uniform initialization over the whole space and
/// window-free mutation. Selection and reporting match the guided search.
pub fn plain_evolutionary(
    graph: &SupernetGraph,
    table: &LatencyTable,
    config: &SearchConfig,
    evaluator: &mut dyn GroupEvaluator,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let mut rng = seeds::rng(config.seed, "init");
    let space = crate::graph::count_subnets(graph);
    let mut init = Vec::new();
    if space <= BigUint::from(config.population as u64) {
        for enc in enumerate_subnets(graph, config.population as u64 + 1)
            .map_err(|_| SearchError::BadConfig)?
        {
            let latency = subnet_latency(table, &enc)?;
            init.push(Candidate { enc, latency, accuracy: None });
        }
    } else {
        let sampler = SubnetSampler::new(graph);
        let mut seen = BTreeMap::new();
        let mut attempts = 0usize;
        while init.len() < config.population && attempts < config.max_init_attempts {
            attempts += 1;
            let enc = sampler.sample(&mut rng);
            if seen.insert(enc.arch(), ()).is_none() {
                let latency = subnet_latency(table, &enc)?;
                init.push(Candidate { enc, latency, accuracy: None });
            }
        }
    }
    let window = (0.0, f64::INFINITY);
    run_evolution(graph, table, config, evaluator, window, init)
}

/// Single-chain simulated annealing over window-guided mutation moves,
/// with acceptance probability exp(delta_accuracy / temperature).
pub fn simulated_annealing(
    graph: &SupernetGraph,
    table: &LatencyTable,
    config: &SearchConfig,
    evaluator: &mut dyn GroupEvaluator,
) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let window = config.window();
    let sampler = SubnetSampler::new(graph);
    let mut init_rng = seeds::rng(config.seed, "init");
    let mut chain_rng = seeds::rng(config.seed, "anneal");

    let seed_cfg = SearchConfig { population: 2, ..config.clone() };
    let start = nearby_init(graph, table, &seed_cfg, &mut init_rng)?
        .into_iter()
        .next()
        .expect("nearby_init returns at least one candidate");

    let mut ledger = EvalLedger::new();
    let mut current = start;
    {
        let mut v = vec![current.clone()];
        ledger.evaluate(0, &mut v, evaluator)?;
        current = v.pop().unwrap();
    }
    let mut best: Option<Candidate> =
        (current.latency <= config.t_budget).then(|| current.clone());

    let mut temperature = config.initial_temp;
    for step in 1..=config.search_times {
        let proposal_enc =
            nearby_mutate_with(&current.enc, graph, table, window, &sampler, &mut chain_rng);
        let latency = subnet_latency(table, &proposal_enc)?;
        let mut v = vec![Candidate { enc: proposal_enc, latency, accuracy: None }];
        ledger.evaluate(step, &mut v, evaluator)?;
        let proposal = v.pop().unwrap();

        let delta = proposal.accuracy.unwrap() - current.accuracy.unwrap();
        let accept = if delta >= 0.0 {
            true
        } else if temperature <= 0.0 {
            false
        } else if temperature.is_infinite() {
            true
        } else {
            chain_rng.gen::<f64>() < (delta / temperature).exp()
        };
        if accept {
            current = proposal.clone();
        }
        if proposal.latency <= config.t_budget {
            let replace = match &best {
                None => true,
                Some(b) => better(&proposal, b),
            };
            if replace {
                best = Some(proposal);
            }
        }
        temperature *= config.cooling;
    }

    let best = best.ok_or(SearchError::NoFeasible { budget: config.t_budget })?;
    let pool = ledger.pool();
    Ok(SearchOutcome { best, history: ledger.history, pool })
}

/// Ground truth: evaluates every subnet with latency within budget and
/// returns the accuracy argmax, ties broken by lower latency then arch.
pub fn exhaustive_oracle(
    graph: &SupernetGraph,
    table: &LatencyTable,
    t_budget: f64,
    evaluator: &mut dyn GroupEvaluator,
    cap: u64,
) -> Result<Candidate, SearchError> {
    let all = enumerate_subnets(graph, cap).map_err(|_| SearchError::SpaceTooLarge { cap })?;
    let mut feasible = Vec::new();
    for enc in all {
        let latency = subnet_latency(table, &enc)?;
        if latency <= t_budget {
            feasible.push(Candidate { enc, latency, accuracy: None });
        }
    }
    if feasible.is_empty() {
        return Err(SearchError::NoFeasible { budget: t_budget });
    }
    let encs: Vec<SubnetEncoding> = feasible.iter().map(|c| c.enc.clone()).collect();
    let accs = evaluator.evaluate(&encs)?;
    for (c, a) in feasible.iter_mut().zip(accs) {
        c.accuracy = Some(a);
    }
    let mut best = feasible.pop().unwrap();
    while let Some(c) = feasible.pop() {
        if better(&c, &best) {
            best = c;
        }
    }
    Ok(best)
}
