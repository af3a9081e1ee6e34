//! Continuous-time event-driven simulation of the CSMA-SIC protocol.
//!
//! Every link is saturated. A link holds an exponential backoff timer that only
//! counts down while its transmitter's local check says the transmission is
//! feasible; when it fires, an instantaneous RTS/CTS exchange updates the tables of
//! every node in range of either end and the packet occupies the channel for an
//! exponential duration. The ACK at the end clears the transmission and a fresh
//! backoff is drawn. After every table change each waiting link re-runs its check
//! and suspends or resumes its timer, keeping the remaining time.

mod events;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::ctmc::{CtmcError, RateParams};
use crate::localstate::{check_all_feasible, CoeffTable, TableError, Transmission, TxTable};
use crate::phy::{ChannelMatrix, LinkId, NetworkTopology, NodeId, PhyError};
use crate::scalar::Real;
use crate::setspace::{is_independent, LinkSet};
pub use events::{Event, EventKind, EventQueue};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Rates(#[from] CtmcError),
    #[error(transparent)]
    Topology(#[from] PhyError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("at t = {time} the active set {set} is not independent")]
    SafetyViolation { time: f64, set: LinkSet },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub horizon: f64,
    pub seed: u64,
    pub params: RateParams<T>,
    /// Initial stretch excluded from statistics.
    pub warmup: f64,
    /// Verify after every transmission start that the active set is independent.
    pub check_safety: bool,
}

impl<T: Real> SimConfig<T> {
    /// Warmup defaults to a tenth of the horizon.
    pub fn new(horizon: f64, seed: u64, params: RateParams<T>) -> Self {
        Self { horizon, seed, params, warmup: horizon / 10.0, check_safety: true }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(SimError::Config("horizon must be finite and >= 0".into()));
        }
        if !(self.warmup.is_finite() && self.warmup >= 0.0) {
            return Err(SimError::Config("warmup must be finite and >= 0".into()));
        }
        if self.horizon > 0.0 && self.warmup >= self.horizon {
            return Err(SimError::Config(format!(
                "warmup {} must be shorter than horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.horizon == 0.0 && self.warmup > 0.0 {
            return Err(SimError::Config("warmup must be 0 for a zero horizon".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimerState {
    Counting { deadline: f64 },
    Suspended,
    Transmitting { until: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkTimer {
    pub link: LinkId,
    /// Backoff left as of the last suspension (or fresh draw).
    pub remaining_backoff: f64,
    pub state: TimerState,
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sum {
    total: f64,
    carry: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.total + x;
        if self.total.abs() >= x.abs() {
            self.carry += (self.total - t) + x;
        } else {
            self.carry += (x - t) + self.total;
        }
        self.total = t;
    }

    fn value(&self) -> f64 {
        self.total + self.carry
    }
}

/// Statistics gathered over the measured window of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStats {
    window: Sum,
    busy: Vec<Sum>,
    occupancy: BTreeMap<LinkSet, Sum>,
    pub completions: Vec<u64>,
    /// Timer expiries, i.e. transmissions started.
    pub attempts: Vec<u64>,
    /// Remaining backoff of each link at the instants its timer resumed (if recorded).
    pub resume_residuals: Vec<Vec<f64>>,
}

impl SimStats {
    fn new(k: usize) -> Self {
        Self {
            window: Sum::default(),
            busy: vec![Sum::default(); k],
            occupancy: BTreeMap::new(),
            completions: vec![0; k],
            attempts: vec![0; k],
            resume_residuals: vec![Vec::new(); k],
        }
    }

    /// Length of the measured window.
    pub fn window(&self) -> f64 {
        self.window.value()
    }

    pub fn busy_time(&self) -> Vec<f64> {
        self.busy.iter().map(Sum::value).collect()
    }

    /// Time spent in each visited link set.
    pub fn occupancy(&self) -> BTreeMap<LinkSet, f64> {
        self.occupancy.iter().map(|(d, s)| (*d, s.value())).collect()
    }

    /// Occupancy as fractions of the window; empty for an empty window.
    pub fn occupancy_fractions(&self) -> BTreeMap<LinkSet, f64> {
        let w = self.window();
        if w <= 0.0 {
            return BTreeMap::new();
        }
        self.occupancy.iter().map(|(d, s)| (*d, s.value() / w)).collect()
    }

    fn accumulate(&mut self, active: LinkSet, dt: f64) {
        self.window.add(dt);
        self.occupancy.entry(active).or_default().add(dt);
        for l in active.iter() {
            self.busy[l.0].add(dt);
        }
    }
}

/// Fraction of the measured window each link spent transmitting.
pub fn empirical_throughput(stats: &SimStats) -> Vec<f64> {
    let w = stats.window();
    stats.busy.iter().map(|b| if w > 0.0 { b.value() / w } else { 0.0 }).collect()
}

/// Total-variation distance between an empirical occupancy and a distribution over sets.
pub fn total_variation(
    empirical: &BTreeMap<LinkSet, f64>,
    analytical: impl IntoIterator<Item = (LinkSet, f64)>,
) -> f64 {
    let mut diff: BTreeMap<LinkSet, f64> = empirical.clone();
    for (d, q) in analytical {
        *diff.entry(d).or_insert(0.0) -= q;
    }
    diff.values().map(|v| v.abs()).sum::<f64>() / 2.0
}

/// A running protocol instance that can be advanced in steps and re-parametrized.
pub struct Simulator<'a, T: Real> {
    topology: &'a NetworkTopology<T>,
    channel: &'a ChannelMatrix<T>,
    links: Vec<Transmission<T>>,
    hood: Vec<Vec<NodeId>>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
    now: f64,
    timers: Vec<LinkTimer>,
    generation: Vec<u64>,
    coeffs: Vec<CoeffTable<T>>,
    txs: Vec<TxTable<T>>,
    active: LinkSet,
    rngs: Vec<ChaCha8Rng>,
    queue: EventQueue,
    stats: SimStats,
    stats_from: f64,
    check_safety: bool,
    record_residuals: bool,
    events: u64,
}

fn rates_f64<T: Real>(params: &RateParams<T>) -> (Vec<f64>, Vec<f64>) {
    let k = params.len();
    let lambda = (0..k).map(|l| params.lambda(LinkId(l)).as_f64()).collect();
    let mu = params.mu.iter().map(|m| m.as_f64()).collect();
    (lambda, mu)
}

impl<'a, T: Real> Simulator<'a, T> {
    /// Starts at `t = 0` with every link holding a fresh backoff.
    pub fn new(
        topology: &'a NetworkTopology<T>,
        channel: &'a ChannelMatrix<T>,
        params: &RateParams<T>,
        seed: u64,
    ) -> Result<Self, SimError> {
        topology.admit(channel)?;
        let k = topology.num_links();
        params.validate(k)?;
        let (lambda, mu) = rates_f64(params);
        if lambda.iter().chain(&mu).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::Config("rates must be positive and finite in f64".into()));
        }
        let links: Vec<_> = (0..k).map(|l| Transmission::of_link(topology, LinkId(l))).collect();
        let nodes = topology.num_nodes();
        let hood = (0..nodes).map(|i| topology.neighborhood(NodeId(i)).collect()).collect();
        let coeffs = (0..nodes).map(|i| CoeffTable::survey(NodeId(i), topology, channel)).collect();
        let txs = (0..nodes).map(|i| TxTable::new(NodeId(i))).collect();
        let rngs = (0..k)
            .map(|l| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(l as u64);
                rng
            })
            .collect();
        let mut sim = Self {
            topology,
            channel,
            links,
            hood,
            lambda,
            mu,
            now: 0.0,
            timers: Vec::with_capacity(k),
            generation: vec![0; k],
            coeffs,
            txs,
            active: LinkSet::empty(k),
            rngs,
            queue: EventQueue::default(),
            stats: SimStats::new(k),
            stats_from: 0.0,
            check_safety: true,
            record_residuals: false,
            events: 0,
        };
        for l in 0..k {
            let b = sim.draw(l, sim.lambda[l]);
            sim.timers.push(LinkTimer { link: LinkId(l), remaining_backoff: b, state: TimerState::Suspended });
        }
        sim.reevaluate()?;
        Ok(sim)
    }

    pub fn set_check_safety(&mut self, on: bool) {
        self.check_safety = on;
    }

    /// Record the remaining backoff each time a timer resumes.
    pub fn set_record_residuals(&mut self, on: bool) {
        self.record_residuals = on;
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn active(&self) -> LinkSet {
        self.active
    }

    pub fn timer(&self, l: LinkId) -> &LinkTimer {
        &self.timers[l.0]
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn into_stats(self) -> SimStats {
        self.stats
    }

    pub fn events_processed(&self) -> u64 {
        self.events
    }

    pub fn coeff_table(&self, node: NodeId) -> &CoeffTable<T> {
        &self.coeffs[node.0]
    }

    pub fn tx_table(&self, node: NodeId) -> &TxTable<T> {
        &self.txs[node.0]
    }

    /// The transmitter's local verdict for starting `l` right now.
    pub fn is_feasible(&self, l: LinkId) -> Result<bool, SimError> {
        let cand = &self.links[l.0];
        Ok(check_all_feasible(cand, &self.coeffs[cand.tx.0], &self.txs[cand.tx.0], self.topology.phy())?)
    }

    /// Discards statistics so far; measurement restarts at the current time.
    pub fn reset_stats(&mut self) {
        self.stats = SimStats::new(self.links.len());
        self.stats_from = self.now;
    }

    fn draw(&mut self, l: usize, rate: f64) -> f64 {
        Exp::new(rate).expect("positive rate").sample(&mut self.rngs[l])
    }

    fn bump(&mut self, l: usize) -> u64 {
        self.generation[l] += 1;
        self.generation[l]
    }

    fn schedule(&mut self, l: usize, time: f64, kind: EventKind) {
        let generation = self.bump(l);
        self.queue.push(Event { time, kind, link: l, generation });
    }

    /// Processes every event up to and including `until`, then moves the clock to `until`.
    pub fn advance(&mut self, until: f64) -> Result<(), SimError> {
        while let Some(t) = self.queue.peek_time() {
            if t > until {
                break;
            }
            let e = self.queue.pop().expect("peeked");
            if e.generation != self.generation[e.link] {
                continue;
            }
            self.elapse(e.time);
            self.events += 1;
            match e.kind {
                EventKind::Expiry => self.start_transmission(e.link)?,
                EventKind::Completion => self.finish_transmission(e.link)?,
            }
            self.reevaluate()?;
        }
        self.elapse(until);
        Ok(())
    }

    fn elapse(&mut self, to: f64) {
        let from = self.now.max(self.stats_from);
        if to > from {
            self.stats.accumulate(self.active, to - from);
        }
        if to > self.now {
            self.now = to;
        }
    }

    fn start_transmission(&mut self, l: usize) -> Result<(), SimError> {
        let t = self.links[l];
        let gain = self.coeffs[t.rx.0].gain(t.tx, t.rx).unwrap_or_else(|| self.channel.gain(t.tx, t.rx));
        for &o in &self.hood[t.tx.0] {
            self.coeffs[o.0].overhear_rts(t.tx, t.rx, self.channel);
        }
        for &o in &self.hood[t.rx.0] {
            self.coeffs[o.0].overhear_cts(t.rx, t.tx, gain, self.channel);
        }
        for o in self.audience(&t) {
            self.txs[o.0].insert(t)?;
        }
        self.active = self.active.with(t.link);
        if self.check_safety && !is_independent(&self.active, self.topology, self.channel) {
            return Err(SimError::SafetyViolation { time: self.now, set: self.active });
        }
        if self.now >= self.stats_from {
            self.stats.attempts[l] += 1;
        }
        let duration = self.draw(l, self.mu[l]);
        let until = self.now + duration;
        self.timers[l].remaining_backoff = 0.0;
        self.timers[l].state = TimerState::Transmitting { until };
        self.schedule(l, until, EventKind::Completion);
        Ok(())
    }

    fn finish_transmission(&mut self, l: usize) -> Result<(), SimError> {
        let t = self.links[l];
        let gain = self.coeffs[t.rx.0].gain(t.tx, t.rx).unwrap_or_else(|| self.channel.gain(t.tx, t.rx));
        for &o in &self.hood[t.rx.0] {
            self.coeffs[o.0].overhear_ack(t.rx, t.tx, gain, self.channel);
        }
        for o in self.audience(&t) {
            self.txs[o.0].remove(t.link);
        }
        self.active = self.active.without(t.link);
        if self.now >= self.stats_from {
            self.stats.completions[l] += 1;
        }
        let backoff = self.draw(l, self.lambda[l]);
        self.timers[l] = LinkTimer { link: t.link, remaining_backoff: backoff, state: TimerState::Suspended };
        self.bump(l);
        Ok(())
    }

    /// Nodes that learn of a transmission: everyone in range of either end.
    fn audience(&self, t: &Transmission<T>) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self.hood[t.tx.0].iter().chain(&self.hood[t.rx.0]).copied().collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Suspends or resumes every waiting timer according to its transmitter's tables.
    fn reevaluate(&mut self) -> Result<(), SimError> {
        for l in 0..self.links.len() {
            let timer = self.timers[l];
            if matches!(timer.state, TimerState::Transmitting { .. }) {
                continue;
            }
            let feasible = self.is_feasible(LinkId(l))?;
            match timer.state {
                TimerState::Counting { deadline } if !feasible => {
                    self.timers[l].remaining_backoff = (deadline - self.now).max(0.0);
                    self.timers[l].state = TimerState::Suspended;
                    self.bump(l);
                }
                TimerState::Suspended if feasible => {
                    if self.record_residuals && self.now >= self.stats_from {
                        self.stats.resume_residuals[l].push(timer.remaining_backoff);
                    }
                    let deadline = self.now + timer.remaining_backoff;
                    self.timers[l].state = TimerState::Counting { deadline };
                    self.schedule(l, deadline, EventKind::Expiry);
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Switches to new rates mid-run. Pending backoffs and packet durations are
    /// rescaled by `old_rate / new_rate`, which maps an exponential residual onto
    /// an exponential residual of the new rate.
    pub fn set_rates(&mut self, params: &RateParams<T>) -> Result<(), SimError> {
        params.validate(self.links.len())?;
        let (lambda, mu) = rates_f64(params);
        if lambda.iter().chain(&mu).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SimError::Config("rates must be positive and finite in f64".into()));
        }
        for l in 0..self.links.len() {
            let back = self.lambda[l] / lambda[l];
            let serve = self.mu[l] / mu[l];
            match self.timers[l].state {
                TimerState::Counting { deadline } => {
                    let remaining = (deadline - self.now).max(0.0) * back;
                    self.timers[l].remaining_backoff = remaining;
                    self.timers[l].state = TimerState::Counting { deadline: self.now + remaining };
                    self.schedule(l, self.now + remaining, EventKind::Expiry);
                }
                TimerState::Suspended => self.timers[l].remaining_backoff *= back,
                TimerState::Transmitting { until } if serve != 1.0 => {
                    let until = self.now + (until - self.now).max(0.0) * serve;
                    self.timers[l].state = TimerState::Transmitting { until };
                    self.schedule(l, until, EventKind::Completion);
                }
                TimerState::Transmitting { .. } => {}
            }
        }
        self.lambda = lambda;
        self.mu = mu;
        Ok(())
    }
}

/// Runs the protocol for `cfg.horizon`, measuring after `cfg.warmup`.
pub fn run<T: Real>(
    topology: &NetworkTopology<T>,
    channel: &ChannelMatrix<T>,
    cfg: &SimConfig<T>,
) -> Result<SimStats, SimError> {
    cfg.validate()?;
    let mut sim = Simulator::new(topology, channel, &cfg.params, cfg.seed)?;
    sim.set_check_safety(cfg.check_safety);
    if cfg.horizon == 0.0 {
        return Ok(SimStats::new(topology.num_links()));
    }
    sim.advance(cfg.warmup)?;
    sim.reset_stats();
    sim.advance(cfg.horizon)?;
    Ok(sim.into_stats())
}
