//! Epoch-level Monte Carlo simulation of the coexisting nodes.
//!
//! Time advances one channel-state epoch at a time: an idle slot, a success
//! or a collision. Each node carries its chain state and its own random
//! stream, and evolves by the same rules as the analytical chains:
//!
//! * A Wi-Fi AP decrements its backoff or post-backoff counter once per
//!   epoch. During a busy epoch the counter is frozen and it resumes with the
//!   decrement at the end of that epoch, so it never grows.
//! * An SCBS with a non-zero counter that sees another node transmit
//!   re-draws its counter uniformly from `[0, Z)`.
//! * A node sitting at the head of post-backoff draws a packet each epoch.
//!   With a packet it transmits at once if no other node transmitted in the
//!   previous epoch, and otherwise enters backoff stage 0.
//! * A node whose backoff counter reaches 0 transmits without sensing.
//!
//! Replications run in parallel and are merged in index order, so results
//! are bit-identical for a given seed regardless of thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::airtime::{frame_durations, FrameDurations, ThroughputReport};
use crate::config::CoexConfig;
use crate::error::{CoexError, Result};
use crate::solver::FixedPoint;

pub const PRNG_ALGORITHM: &str = "ChaCha8 (rand_chacha), stream = replication * nodes + node";
pub const MIN_POST_WARMUP: u64 = 10_000;
pub const TRACE_CAP: u64 = 100_000;
/// Batches used for the interval when only one replication is run.
pub const SINGLE_RUN_BATCHES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub base: CoexConfig<f64>,
    /// Epochs per replication, warmup included.
    pub slots: u64,
    pub warmup_slots: u64,
    pub replications: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(
        base: CoexConfig<f64>,
        slots: u64,
        warmup_slots: u64,
        replications: usize,
        seed: u64,
    ) -> Self {
        SimConfig {
            base,
            slots,
            warmup_slots,
            replications,
            seed,
        }
    }

    pub fn check(&self) -> Result<()> {
        self.base.check()?;
        if self.replications == 0 {
            return Err(CoexError::invalid("replications", "must be at least 1"));
        }
        let post = self.slots.saturating_sub(self.warmup_slots);
        if post < MIN_POST_WARMUP {
            return Err(CoexError::SimBudget {
                post_warmup: post,
                required: MIN_POST_WARMUP,
            });
        }
        Ok(())
    }
}

/// Sample mean with a 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    /// Number of independent samples behind the interval.
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Estimate {
                mean,
                half_width: f64::INFINITY,
                samples: n,
            };
        }
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        Estimate {
            mean,
            half_width: t * (var / n as f64).sqrt(),
            samples: n,
        }
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }

    /// Standard error implied by the half-width.
    pub fn std_error(&self) -> f64 {
        if self.samples < 2 {
            return f64::INFINITY;
        }
        let t = StudentsT::new(0.0, 1.0, (self.samples - 1) as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.975);
        self.half_width / t
    }
}

/// Outcome class of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EpochClass {
    Idle,
    WifiSuccess,
    CellSuccess,
    WifiCollision,
    CellCollision,
    MixedCollision,
}

impl EpochClass {
    pub const ALL: [EpochClass; 6] = [
        EpochClass::Idle,
        EpochClass::WifiSuccess,
        EpochClass::CellSuccess,
        EpochClass::WifiCollision,
        EpochClass::CellCollision,
        EpochClass::MixedCollision,
    ];

    pub fn classify(wifi_tx: usize, cell_tx: usize) -> Self {
        match (wifi_tx, cell_tx) {
            (0, 0) => EpochClass::Idle,
            (1, 0) => EpochClass::WifiSuccess,
            (0, 1) => EpochClass::CellSuccess,
            (_, 0) => EpochClass::WifiCollision,
            (0, _) => EpochClass::CellCollision,
            _ => EpochClass::MixedCollision,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            EpochClass::Idle => "idle",
            EpochClass::WifiSuccess => "wifi_success",
            EpochClass::CellSuccess => "cell_success",
            EpochClass::WifiCollision => "wifi_collision",
            EpochClass::CellCollision => "cell_collision",
            EpochClass::MixedCollision => "mixed_collision",
        }
    }

    pub fn duration(self, d: &FrameDurations<f64>) -> f64 {
        match self {
            EpochClass::Idle => d.sigma,
            EpochClass::WifiSuccess => d.ts_wifi,
            EpochClass::CellSuccess => d.ts_cell,
            EpochClass::WifiCollision => d.tc_wifi,
            EpochClass::CellCollision => d.tc_cell,
            EpochClass::MixedCollision => d.tc_mixed,
        }
    }
}

/// Chain state of one node at the start of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeState {
    WifiPost(usize),
    WifiBackoff { stage: usize, counter: usize },
    CellPost(usize),
    CellBackoff(usize),
}

impl NodeState {
    pub fn label(&self) -> String {
        match *self {
            NodeState::WifiPost(k) => format!("W(0,{k})e"),
            NodeState::WifiBackoff { stage, counter } => format!("W({stage},{counter})"),
            NodeState::CellPost(k) => format!("C({k})e"),
            NodeState::CellBackoff(k) => format!("C({k})"),
        }
    }

    pub fn counter(&self) -> usize {
        match *self {
            NodeState::WifiPost(k) | NodeState::CellPost(k) | NodeState::CellBackoff(k) => k,
            NodeState::WifiBackoff { counter, .. } => counter,
        }
    }

    pub fn is_wifi(&self) -> bool {
        matches!(self, NodeState::WifiPost(_) | NodeState::WifiBackoff { .. })
    }
}

struct Node {
    state: NodeState,
    rng: ChaCha8Rng,
    transmitting: bool,
    deferred: bool,
    waiting: bool,
}

struct Network<'a> {
    cfg: &'a CoexConfig<f64>,
    durations: FrameDurations<f64>,
    nodes: Vec<Node>,
    tx_last: usize,
}

/// What happened in one epoch.
struct Step {
    class: EpochClass,
    duration: f64,
    wifi_tx: usize,
    cell_tx: usize,
}

impl<'a> Network<'a> {
    fn new(cfg: &'a CoexConfig<f64>, seed: u64, replication: usize) -> Self {
        let n = cfg.n_wifi + cfg.n_cell;
        let nodes = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((replication * n + i) as u64);
                let state = if i < cfg.n_wifi {
                    NodeState::WifiPost(0)
                } else {
                    NodeState::CellPost(0)
                };
                Node {
                    state,
                    rng,
                    transmitting: false,
                    deferred: false,
                    waiting: false,
                }
            })
            .collect();
        Network {
            cfg,
            durations: frame_durations(cfg),
            nodes,
            tx_last: 0,
        }
    }

    fn step(&mut self) -> Step {
        let cfg = self.cfg;
        let tx_last = self.tx_last;
        let mut wifi_tx = 0;
        let mut cell_tx = 0;
        for node in &mut self.nodes {
            let last_busy = tx_last > usize::from(node.transmitting);
            node.transmitting = false;
            node.deferred = false;
            node.waiting = false;
            let q = if node.state.is_wifi() {
                cfg.q_wifi
            } else {
                cfg.q_cell
            };
            match node.state {
                NodeState::WifiPost(0) | NodeState::CellPost(0) => {
                    if node.rng.gen::<f64>() >= q {
                        node.waiting = true;
                    } else if last_busy {
                        node.deferred = true;
                    } else {
                        node.transmitting = true;
                    }
                }
                NodeState::WifiBackoff { counter: 0, .. } | NodeState::CellBackoff(0) => {
                    node.transmitting = true;
                }
                _ => {}
            }
            if node.transmitting {
                if node.state.is_wifi() {
                    wifi_tx += 1;
                } else {
                    cell_tx += 1;
                }
            }
        }
        let total_tx = wifi_tx + cell_tx;
        let w0 = cfg.w0;
        let m = cfg.max_stage;
        let z = cfg.cw_cell;
        for node in &mut self.nodes {
            let others_now = total_tx > usize::from(node.transmitting);
            let rng = &mut node.rng;
            node.state = match node.state {
                NodeState::WifiPost(0) => {
                    if node.waiting {
                        NodeState::WifiPost(0)
                    } else if node.deferred {
                        NodeState::WifiBackoff {
                            stage: 0,
                            counter: rng.gen_range(0..w0),
                        }
                    } else if others_now {
                        let stage = m.min(1);
                        NodeState::WifiBackoff {
                            stage,
                            counter: rng.gen_range(0..w0 << stage),
                        }
                    } else {
                        NodeState::WifiPost(rng.gen_range(0..w0))
                    }
                }
                NodeState::WifiPost(k) => {
                    if rng.gen::<f64>() < cfg.q_wifi {
                        NodeState::WifiBackoff {
                            stage: 0,
                            counter: k - 1,
                        }
                    } else {
                        NodeState::WifiPost(k - 1)
                    }
                }
                NodeState::WifiBackoff { stage, counter: 0 } => {
                    if others_now {
                        let stage = (stage + 1).min(m);
                        NodeState::WifiBackoff {
                            stage,
                            counter: rng.gen_range(0..w0 << stage),
                        }
                    } else if rng.gen::<f64>() < cfg.q_wifi {
                        NodeState::WifiBackoff {
                            stage: 0,
                            counter: rng.gen_range(0..w0),
                        }
                    } else {
                        NodeState::WifiPost(rng.gen_range(0..w0))
                    }
                }
                NodeState::WifiBackoff { stage, counter } => NodeState::WifiBackoff {
                    stage,
                    counter: counter - 1,
                },
                NodeState::CellPost(0) => {
                    if node.waiting {
                        NodeState::CellPost(0)
                    } else if node.deferred || others_now {
                        NodeState::CellBackoff(rng.gen_range(0..z))
                    } else {
                        NodeState::CellPost(rng.gen_range(0..z))
                    }
                }
                NodeState::CellPost(k) => {
                    let arrival = rng.gen::<f64>() < cfg.q_cell;
                    let next = if others_now {
                        rng.gen_range(0..z)
                    } else {
                        k - 1
                    };
                    if arrival {
                        NodeState::CellBackoff(next)
                    } else {
                        NodeState::CellPost(next)
                    }
                }
                NodeState::CellBackoff(0) => {
                    if others_now || rng.gen::<f64>() < cfg.q_cell {
                        NodeState::CellBackoff(rng.gen_range(0..z))
                    } else {
                        NodeState::CellPost(rng.gen_range(0..z))
                    }
                }
                NodeState::CellBackoff(k) => {
                    if others_now {
                        NodeState::CellBackoff(rng.gen_range(0..z))
                    } else {
                        NodeState::CellBackoff(k - 1)
                    }
                }
            };
        }
        self.tx_last = total_tx;
        let class = EpochClass::classify(wifi_tx, cell_tx);
        Step {
            class,
            duration: class.duration(&self.durations),
            wifi_tx,
            cell_tx,
        }
    }
}

/// Raw counters over a stretch of epochs.
#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    epochs: u64,
    time_us: f64,
    wifi_tx: u64,
    cell_tx: u64,
    wifi_collided: u64,
    cell_collided: u64,
    classes: [u64; 6],
}

impl Tally {
    fn record(&mut self, s: &Step) {
        self.epochs += 1;
        self.time_us += s.duration;
        self.classes[s.class.index()] += 1;
        let total = s.wifi_tx + s.cell_tx;
        self.wifi_tx += s.wifi_tx as u64;
        self.cell_tx += s.cell_tx as u64;
        if total > 1 {
            self.wifi_collided += s.wifi_tx as u64;
            self.cell_collided += s.cell_tx as u64;
        }
    }

    fn sample(&self, cfg: &CoexConfig<f64>) -> Sample {
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let per_node_rate = |successes: u64, payload: f64, n: usize| {
            if n == 0 {
                0.0
            } else {
                successes as f64 * payload / self.time_us * 1e6 / n as f64
            }
        };
        let e = self.epochs;
        let mut shares = [0.0; 6];
        for (s, &c) in shares.iter_mut().zip(&self.classes) {
            *s = ratio(c, e);
        }
        Sample {
            tau_wifi: ratio(self.wifi_tx, e * cfg.n_wifi as u64),
            tau_cell: ratio(self.cell_tx, e * cfg.n_cell as u64),
            p_wifi: ratio(self.wifi_collided, self.wifi_tx),
            p_cell: ratio(self.cell_collided, self.cell_tx),
            s_wifi: per_node_rate(
                self.classes[EpochClass::WifiSuccess.index()],
                cfg.payload_wifi,
                cfg.n_wifi,
            ),
            s_cell: per_node_rate(
                self.classes[EpochClass::CellSuccess.index()],
                cfg.payload_cell,
                cfg.n_cell,
            ),
            t_state_us: self.time_us / e as f64,
            shares,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    tau_wifi: f64,
    tau_cell: f64,
    p_wifi: f64,
    p_cell: f64,
    s_wifi: f64,
    s_cell: f64,
    t_state_us: f64,
    shares: [f64; 6],
}

/// Empirical counterparts of the analytical quantities.
///
/// Collision probabilities of a technology with no attempts are reported as 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimEstimates {
    pub tau_wifi: Estimate,
    pub tau_cell: Estimate,
    pub p_wifi: Estimate,
    pub p_cell: Estimate,
    /// Per-AP throughput, bits/s.
    pub s_wifi: Estimate,
    /// Per-SCBS throughput, bits/s.
    pub s_cell: Estimate,
    pub t_state_us: Estimate,
    /// Epoch-class frequencies in [`EpochClass::ALL`] order.
    pub shares: [Estimate; 6],
    pub post_warmup_epochs: u64,
    pub replications: usize,
}

fn run_replication(sim: &SimConfig, replication: usize, batches: usize) -> Vec<Tally> {
    let mut net = Network::new(&sim.base, sim.seed, replication);
    for _ in 0..sim.warmup_slots {
        net.step();
    }
    let post = sim.slots - sim.warmup_slots;
    let mut tallies = vec![Tally::default(); batches];
    let per_batch = post / batches as u64;
    for i in 0..post {
        let step = net.step();
        let b = ((i / per_batch) as usize).min(batches - 1);
        tallies[b].record(&step);
    }
    tallies
}

/// Runs the replications and aggregates them. With one replication the
/// post-warmup run is split into [`SINGLE_RUN_BATCHES`] batches for the
/// interval; otherwise each replication is one sample.
pub fn simulate(sim: &SimConfig) -> Result<SimEstimates> {
    sim.check()?;
    let batches = if sim.replications == 1 {
        SINGLE_RUN_BATCHES
    } else {
        1
    };
    let tallies: Vec<Tally> = (0..sim.replications)
        .into_par_iter()
        .map(|r| run_replication(sim, r, batches))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let samples: Vec<Sample> = tallies.iter().map(|t| t.sample(&sim.base)).collect();
    let est = |f: fn(&Sample) -> f64| {
        let xs: Vec<f64> = samples.iter().map(f).collect();
        Estimate::from_samples(&xs)
    };
    let mut shares = [Estimate::default(); 6];
    for (i, s) in shares.iter_mut().enumerate() {
        let xs: Vec<f64> = samples.iter().map(|x| x.shares[i]).collect();
        *s = Estimate::from_samples(&xs);
    }
    Ok(SimEstimates {
        tau_wifi: est(|s| s.tau_wifi),
        tau_cell: est(|s| s.tau_cell),
        p_wifi: est(|s| s.p_wifi),
        p_cell: est(|s| s.p_cell),
        s_wifi: est(|s| s.s_wifi),
        s_cell: est(|s| s.s_cell),
        t_state_us: est(|s| s.t_state_us),
        shares,
        post_warmup_epochs: sim.slots - sim.warmup_slots,
        replications: sim.replications,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRecord {
    pub epoch: u64,
    pub class: EpochClass,
    pub duration_us: f64,
    /// Node states at the start of the epoch, APs first.
    pub states: Vec<NodeState>,
}

/// Per-epoch trace of replication 0 from its first epoch, at most
/// `min(epochs, TRACE_CAP)` records.
pub fn trace(sim: &SimConfig, epochs: u64) -> Result<Vec<TraceRecord>> {
    sim.base.check()?;
    let mut net = Network::new(&sim.base, sim.seed, 0);
    let n = epochs.min(TRACE_CAP);
    let mut out = Vec::with_capacity(n as usize);
    for epoch in 0..n {
        let states = net.nodes.iter().map(|nd| nd.state).collect();
        let step = net.step();
        out.push(TraceRecord {
            epoch,
            class: step.class,
            duration_us: step.duration,
            states,
        });
    }
    Ok(out)
}

/// Quantities compared between the analysis and the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelPoint {
    pub tau_wifi: f64,
    pub tau_cell: f64,
    pub p_wifi: f64,
    pub p_cell: f64,
    pub s_wifi: f64,
    pub s_cell: f64,
}

impl ModelPoint {
    pub fn from_analysis(fp: &FixedPoint<f64>, report: &ThroughputReport<f64>) -> Self {
        ModelPoint {
            tau_wifi: fp.tau_wifi.get(),
            tau_cell: fp.tau_cell.get(),
            p_wifi: fp.p_wifi.get(),
            p_cell: fp.p_cell.get(),
            s_wifi: report.s_wifi,
            s_cell: report.s_cell,
        }
    }

    pub fn from_simulation(sim: &SimEstimates) -> Self {
        ModelPoint {
            tau_wifi: sim.tau_wifi.mean,
            tau_cell: sim.tau_cell.mean,
            p_wifi: sim.p_wifi.mean,
            p_cell: sim.p_cell.mean,
            s_wifi: sim.s_wifi.mean,
            s_cell: sim.s_cell.mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Divergence {
    pub quantity: &'static str,
    pub analytic: f64,
    pub simulated: f64,
    pub half_width: f64,
    /// `(analytic - simulated) / standard error`.
    pub z_score: f64,
    /// `|analytic - simulated| / |simulated|`.
    pub rel_error: f64,
    pub within_ci: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceReport {
    pub rows: Vec<Divergence>,
}

impl DivergenceReport {
    pub fn get(&self, quantity: &str) -> Option<&Divergence> {
        self.rows.iter().find(|r| r.quantity == quantity)
    }

    /// Quantities whose analytic value falls outside the 95% interval.
    pub fn flagged(&self) -> Vec<&'static str> {
        self.rows
            .iter()
            .filter(|r| !r.within_ci)
            .map(|r| r.quantity)
            .collect()
    }

    pub fn probabilities_within_ci(&self) -> bool {
        ["tau_w", "tau_c", "p_w", "p_c"]
            .iter()
            .all(|q| self.get(q).is_some_and(|r| r.within_ci))
    }

    pub fn throughputs_within(&self, rel: f64) -> bool {
        ["s_w", "s_c"]
            .iter()
            .all(|q| self.get(q).is_some_and(|r| r.rel_error <= rel))
    }
}

fn divergence(quantity: &'static str, analytic: f64, sim: &Estimate) -> Divergence {
    let diff = analytic - sim.mean;
    let se = sim.std_error();
    let z_score = if diff == 0.0 { 0.0 } else { diff / se };
    let rel_error = if diff == 0.0 {
        0.0
    } else {
        diff.abs() / sim.mean.abs()
    };
    Divergence {
        quantity,
        analytic,
        simulated: sim.mean,
        half_width: sim.half_width,
        z_score,
        rel_error,
        within_ci: sim.contains(analytic),
    }
}

pub fn compare(sim: &SimEstimates, analytic: &ModelPoint) -> DivergenceReport {
    DivergenceReport {
        rows: vec![
            divergence("tau_w", analytic.tau_wifi, &sim.tau_wifi),
            divergence("tau_c", analytic.tau_cell, &sim.tau_cell),
            divergence("p_w", analytic.p_wifi, &sim.p_wifi),
            divergence("p_c", analytic.p_cell, &sim.p_cell),
            divergence("s_w", analytic.s_wifi, &sim.s_wifi),
            divergence("s_c", analytic.s_cell, &sim.s_cell),
        ],
    }
}
