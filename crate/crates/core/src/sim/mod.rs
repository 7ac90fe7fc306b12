//! Packet-level simulation of receiver-driven delivery with the real codec.

mod report;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{encode_packet, DecodingBuffer, GenerationSources};
use crate::error::{Error, Result};
use crate::galois::Field;
use crate::mdp::{ScenarioModel, TabularMdp};

pub use crate::rl::TrainingEnv;
pub use report::{
    curve_schema, read_summary, render_svg, summary_schema, sweep_schema, trace_schema, validate_csv, write_curve,
    write_summary, write_sweep, write_trace, CsvSchema, SummaryRow, SweepRow,
};

/// How requests are chosen at each decision epoch.
#[derive(Debug, Clone, PartialEq)]
pub enum Scheme {
    /// Deterministic action index per state index.
    Policy { name: String, actions: Vec<usize> },
    /// Uniform choice among the state's valid actions.
    RandSched,
}

impl Scheme {
    pub fn policy(name: impl Into<String>, actions: Vec<usize>) -> Self {
        Scheme::Policy {
            name: name.into(),
            actions,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Scheme::Policy { name, .. } => name,
            Scheme::RandSched => "randsched",
        }
    }

    fn choose<R: Rng + ?Sized>(&self, mdp: &TabularMdp, state: usize, rng: &mut R) -> usize {
        match self {
            Scheme::Policy { actions, .. } => actions[state],
            Scheme::RandSched => {
                let valid = mdp.valid_actions(state);
                valid[rng.gen_range(0..valid.len())]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub generations: usize,
    pub payload_len: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            generations: 100,
            payload_len: 16,
        }
    }
}

/// What happened to one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    /// Innovative packets per layer at the decision epoch.
    pub state: Vec<u32>,
    pub action: usize,
    /// Urgent-generation arrivals per class that made the deadline.
    pub urgent_arrivals: Vec<u32>,
    /// Arrivals per class for the following generation.
    pub future_arrivals: Vec<u32>,
    pub decoded_layers: usize,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub records: Vec<GenerationRecord>,
    pub lost_packets: usize,
    /// Urgent packets that arrived after their deadline.
    pub late_packets: usize,
    pub non_innovative: usize,
    /// Generations that missed full decoding and were skipped.
    pub skipped: usize,
}

impl EpisodeTrace {
    pub fn deltas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.delta).collect()
    }

    pub fn mean_delta(&self) -> f64 {
        mean(&self.deltas())
    }

    /// Standard deviation of the per-generation distortion reduction.
    pub fn fluctuation(&self) -> f64 {
        std_dev(&self.deltas())
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Substreams of the master seed. Losses get one stream per link so that
/// every scheme run with the same seed sees the same loss pattern.
#[derive(Debug, Clone, Copy)]
pub enum Purpose {
    Coding,
    Scheduler,
    Link(usize),
}

const STREAMS_PER_RUN: u64 = 1 << 16;

pub fn stream_rng(master_seed: u64, run: u64, purpose: Purpose) -> ChaCha8Rng {
    let offset = match purpose {
        Purpose::Coding => 0,
        Purpose::Scheduler => 1,
        Purpose::Link(k) => 2 + k as u64,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run * STREAMS_PER_RUN + offset);
    rng
}

/// Simulates `config.generations` consecutive generations, coding and
/// decoding every packet over the scenario's field.
pub fn run_episode(
    model: &ScenarioModel,
    mdp: &TabularMdp,
    scheme: &Scheme,
    config: &SimConfig,
    master_seed: u64,
    run: u64,
) -> Result<EpisodeTrace> {
    if model.fingerprint() != mdp.fingerprint() {
        return Err(Error::FingerprintMismatch {
            expected: model.fingerprint(),
            found: mdp.fingerprint().to_string(),
        });
    }
    if let Scheme::Policy { actions, .. } = scheme {
        if actions.len() != mdp.states.len() {
            return Err(Error::DimensionMismatch {
                expected: mdp.states.len(),
                found: actions.len(),
            });
        }
    }
    let field = Field::new(model.q)?;
    let spec = &model.spec;
    let layers = model.layers();
    let budgets = model.budgets();
    let timely: Vec<u32> = (0..model.links.len()).map(|k| model.timely_positions(k)).collect();
    let cumulative = spec.cumulative_delta();
    let mut coding = stream_rng(master_seed, run, Purpose::Coding);
    let mut sched = stream_rng(master_seed, run, Purpose::Scheduler);
    let mut links: Vec<ChaCha8Rng> = (0..model.links.len())
        .map(|k| stream_rng(master_seed, run, Purpose::Link(k)))
        .collect();

    let mut buffer = DecodingBuffer::new(&field, spec);
    let mut sources: BTreeMap<u64, GenerationSources> = BTreeMap::new();
    let mut trace = EpisodeTrace {
        records: Vec::with_capacity(config.generations),
        lost_packets: 0,
        late_packets: 0,
        non_innovative: 0,
        skipped: 0,
    };
    for n in 0..config.generations as u64 {
        for g in n..n + model.horizon as u64 {
            sources
                .entry(g)
                .or_insert_with(|| GenerationSources::random(&field, spec, g, config.payload_len, &mut coding));
        }
        let rv = buffer.rank_vector(n);
        let s = mdp.states.index_of(&rv)?;
        let a = scheme.choose(mdp, s, &mut sched);
        let action = mdp.actions.action(a);
        let mut urgent = vec![0; layers];
        let mut future = vec![0; layers];
        for (k, link) in links.iter_mut().enumerate() {
            let seq = action.sequence(k, layers);
            debug_assert_eq!(seq.len() as u32, budgets[k]);
            for (pos, ty) in seq.iter().enumerate() {
                let g = n + ty.offset as u64;
                let packet = encode_packet(&sources[&g], spec, ty.class, &mut coding)?;
                if link.gen::<f64>() < model.links[k].loss {
                    trace.lost_packets += 1;
                    continue;
                }
                if ty.offset == 0 && pos as u32 >= timely[k] {
                    trace.late_packets += 1;
                    continue;
                }
                let c = ty.class as usize - 1;
                if ty.offset == 0 {
                    urgent[c] += 1;
                } else {
                    future[c] += 1;
                }
                if !buffer.receive_packet(&packet)? {
                    trace.non_innovative += 1;
                }
            }
        }
        let decoded = buffer.decodable_layers(n);
        if decoded > 0 {
            let rows = buffer.decode_generation(n, decoded)?;
            let src = &sources[&n].data;
            if rows.iter().enumerate().any(|(i, r)| r.as_slice() != src.row(i)) {
                return Err(Error::domain(format!("generation {n} decoded to the wrong payload")));
            }
        }
        if decoded < layers {
            trace.skipped += 1;
        }
        trace.records.push(GenerationRecord {
            generation: n,
            state: rv.layer_counts(),
            action: a,
            urgent_arrivals: urgent,
            future_arrivals: future,
            decoded_layers: decoded,
            delta: cumulative[decoded],
        });
        buffer.expire_before(n + 1);
        sources.remove(&n);
    }
    Ok(trace)
}

/// Aggregate of many independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub scheme: String,
    pub runs: usize,
    pub generations: usize,
    /// Per-generation mean across runs.
    pub per_generation: Vec<f64>,
    /// Per-generation standard error across runs.
    pub per_generation_se: Vec<f64>,
    /// Average cumulative distortion reduction over all runs and generations.
    pub mean_delta: f64,
    /// Standard error of the per-run means.
    pub std_error: f64,
    /// Mean over runs of the per-run standard deviation across generations.
    pub fluctuation: f64,
    pub late_packets: usize,
    pub skipped: usize,
}

pub fn summarize(scheme: &str, traces: &[EpisodeTrace]) -> ExperimentSummary {
    let runs = traces.len();
    let generations = traces.first().map_or(0, |t| t.records.len());
    let mut per_generation = Vec::with_capacity(generations);
    let mut per_generation_se = Vec::with_capacity(generations);
    for g in 0..generations {
        let col: Vec<f64> = traces.iter().map(|t| t.records[g].delta).collect();
        per_generation.push(mean(&col));
        per_generation_se.push(std_dev(&col) / (runs as f64).sqrt());
    }
    let run_means: Vec<f64> = traces.iter().map(EpisodeTrace::mean_delta).collect();
    let flucts: Vec<f64> = traces.iter().map(EpisodeTrace::fluctuation).collect();
    ExperimentSummary {
        scheme: scheme.to_string(),
        runs,
        generations,
        per_generation,
        per_generation_se,
        mean_delta: mean(&run_means),
        std_error: std_dev(&run_means) / (runs.max(1) as f64).sqrt(),
        fluctuation: mean(&flucts),
        late_packets: traces.iter().map(|t| t.late_packets).sum(),
        skipped: traces.iter().map(|t| t.skipped).sum(),
    }
}

/// Runs `runs` independent episodes in parallel. Run `i` uses run index
/// `i` under `master_seed`, so different schemes share loss patterns.
pub fn run_experiment(
    model: &ScenarioModel,
    mdp: &TabularMdp,
    scheme: &Scheme,
    config: &SimConfig,
    runs: usize,
    master_seed: u64,
) -> Result<ExperimentSummary> {
    if runs == 0 {
        return Err(Error::domain("at least one run is required"));
    }
    let traces = (0..runs as u64)
        .into_par_iter()
        .map(|r| run_episode(model, mdp, scheme, config, master_seed, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(scheme.name(), &traces))
}
