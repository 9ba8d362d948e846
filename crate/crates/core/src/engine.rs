//! Deterministic discrete-event simulation of the full protocol stack.
//!
//! Real time is an `f64` in seconds and drives a single event queue; node
//! clocks are integer ticks derived from each node's hardware clock at event
//! boundaries. Local-time triggers are scheduled as the hardware tick at
//! which the local clock next hits a trigger residue, and are re-derived
//! after every clock write.

use crate::netmodel::{
    begin_updating_span, hash3, AdversaryBehavior, AlienClockModel, CatalogAdversary, DelayMode, DelayModel,
    MessageKind, NodeId, PulseView, ReadView, ReadingChannel, Role, Strategy, Topology, UpdatingSpan,
};
use crate::params::{DerivedParams, SystemParams, TickParams};
use crate::protocol::{
    b0_target, b1_target, bridge_sync_offset, detector_arm, detector_expired, eor, pulse_anchor, pulse_guard,
    q_detector_clears, relay_due, terminal_sync_offset, write_allowed, EorMode, NodeState, WriteSource,
};
use crate::ring::{HardwareClock, Ring, RingValue};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// How nonfaulty state looks at real time zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    /// Every offset, timer, flag and hardware phase drawn uniformly.
    Arbitrary,
    /// Clocks within `spread` seconds of each other just before a bridge
    /// read instant, timers reset, watchdogs satisfied.
    Synchronized { spread: f64 },
}

/// Duration model of updating spans after a clock write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpanMode {
    /// Each reader switches to the new value at an instant drawn in
    /// `[0, delta0]` after the write.
    #[default]
    Uniform,
    /// Readers see the new value immediately.
    Instant,
}

/// Hardware drift model of every node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftMode {
    /// One constant drift per node, uniform in `[-rho, rho]`.
    Constant,
    /// Drift redrawn every `segment` seconds.
    Jitter { segment: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub init: InitialState,
    pub adversary: Strategy,
    /// Faulty terminal count; `None` means `f0`.
    pub faulty_terminals: Option<usize>,
    /// Faulty bridge count; `None` means `f1`.
    pub faulty_bridges: Option<usize>,
    /// Explicit faulty node ids; overrides the two counts when set.
    pub faulty_ids: Option<Vec<NodeId>>,
    pub seed: u64,
    pub horizon: f64,
    pub delay: DelayMode,
    pub drift: DriftMode,
    /// Clock sampling period; `None` means `tau0 / 10`.
    pub sample_interval: Option<f64>,
    pub eor: EorMode,
    pub span: SpanMode,
    pub alien_outages: Vec<(f64, f64)>,
    /// Retain the sampled clocks and the clock-write log.
    pub keep_trace: bool,
}

impl Scenario {
    pub fn new(seed: u64, horizon: f64) -> Self {
        Scenario {
            init: InitialState::Arbitrary,
            adversary: Strategy::Silent,
            faulty_terminals: None,
            faulty_bridges: None,
            faulty_ids: None,
            seed,
            horizon,
            delay: DelayMode::Uniform,
            drift: DriftMode::Constant,
            sample_interval: None,
            eor: EorMode::Full,
            span: SpanMode::Uniform,
            alien_outages: Vec::new(),
            keep_trace: false,
        }
    }

    pub fn fault_free(mut self) -> Self {
        self.faulty_terminals = Some(0);
        self.faulty_bridges = Some(0);
        self
    }

    pub fn synchronized(mut self, spread: f64) -> Self {
        self.init = InitialState::Synchronized { spread };
        self
    }

    pub fn with_adversary(mut self, s: Strategy) -> Self {
        self.adversary = s;
        self
    }
}

/// A candidate synchronization point, recorded when the first bridge of a
/// round reaches its read instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncPoint {
    /// Instant at which the leading bridge read `k tau0 + delta1 - delta`.
    pub time: f64,
    /// Spread of the nonfaulty local clocks, seconds.
    pub delta: f64,
    /// Round index `k` on the ring.
    pub round: u64,
    /// Whether no pulse was in flight, every timer was reset and no
    /// nonfaulty clock was inside an updating span.
    pub clean: bool,
}

/// Sampled nonfaulty local clocks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClockTrace {
    pub tau_max: u64,
    pub tick: f64,
    /// Node id of each column of `values`.
    pub nodes: Vec<NodeId>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<u64>>,
}

/// One clock write, for trace export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WriteRecord {
    pub time: f64,
    pub node: NodeId,
    pub clock: u64,
    pub source: WriteSource,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    /// Max pairwise ring distance of nonfaulty local clocks, seconds.
    pub precision_trace: Vec<f64>,
    pub sync_points: Vec<SyncPoint>,
    /// `None` when censored.
    pub stabilization_time: Option<f64>,
    pub max_precision_after_stab: Option<f64>,
    pub corrector_writes: u64,
    pub corrector_write_times: Vec<f64>,
    /// Per nonfaulty bridge: `(time, alerted)` at start and at every change.
    pub alerted_timeline: Vec<(NodeId, Vec<(f64, bool)>)>,
    /// Real times at which a nonfaulty bridge saw the pulse-clique condition.
    pub a1_instants: Vec<f64>,
    /// Real times of nonfaulty terminal pulse sends, per terminal.
    pub pulse_sends: Vec<(NodeId, Vec<f64>)>,
    pub suppressed_writes: u64,
    pub priority_violations: u64,
    pub causality_violations: u64,
    /// Basic-sync reads with more clipped entries than faulty peers allow.
    pub read_warnings: u64,
    pub events: u64,
    pub trace: Option<ClockTrace>,
    pub writes: Vec<WriteRecord>,
}

impl RunMetrics {
    pub fn censored(&self) -> bool {
        self.stabilization_time.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trig {
    ProtectExpiry,
    QClear,
    PulseSend,
    Corrector,
    Relay,
    BasicRead,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum EvKind {
    Deliver { from: NodeId, to: NodeId, k: u64, sent: f64 },
    TimerW { node: NodeId, deadline: u64 },
    TimerWStar { node: NodeId, deadline: u64 },
    Watchdog { node: NodeId, gen: u64 },
    Trigger { node: NodeId, gen: u64, h: u64 },
    Adversary { node: NodeId },
    Sample,
}

#[derive(Debug, Clone, Copy)]
struct Ev {
    t: f64,
    seq: u64,
    kind: EvKind,
}

impl PartialEq for Ev {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Ev {
    // Reversed so that BinaryHeap pops the earliest (time, seq) first.
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

struct SimNode {
    hw: HardwareClock,
    st: NodeState,
    gen: u64,
    det_gen: u64,
    span: Option<UpdatingSpan>,
    /// Protocol runs while `t < honest_until`.
    honest_until: f64,
    frozen: RingValue,
}

/// Seconds-valued constants the engine needs beyond the tick view.
#[derive(Debug, Clone, Copy)]
struct Consts {
    delta_d: f64,
    delta0: f64,
}

struct Sim<'a> {
    tp: &'a TickParams,
    c: Consts,
    ring: Ring,
    topo: Topology,
    nodes: Vec<SimNode>,
    queue: BinaryHeap<Ev>,
    seq: u64,
    adv: CatalogAdversary,
    delay: DelayModel,
    alien: AlienClockModel,
    rng: ChaCha8Rng,
    seed: u64,
    eor: EorMode,
    reference: NodeId,
    refresh: f64,
    sample_dt: f64,
    eps0_ticks: u64,
    in_flight: usize,
    last_round: Option<u64>,
    keep_trace: bool,
    m: RunMetrics,
    terminal_trigs: Vec<(u64, u64, Trig)>,
    bridge_trigs: Vec<(u64, u64, Trig)>,
    alert_idx: Vec<Option<usize>>,
    send_idx: Vec<Option<usize>>,
}

/// Simulates one run and measures it.
pub fn run(
    sys: &SystemParams<f64>,
    derived: &DerivedParams<f64>,
    scenario: &Scenario,
) -> Result<RunMetrics, EngineError> {
    let tp = derived.tick_params(sys);
    let mut sim = Sim::new(sys, derived, &tp, scenario)?;
    sim.execute(scenario.horizon);
    let mut m = sim.finish();
    let window = derived.k_pls as f64 * derived.t_max;
    let trace = m.trace.take().unwrap_or_default();
    let flags = check_synchronized(&trace, derived.eps1, derived.rho1, window);
    m.stabilization_time = measure_stabilization(&trace.times, &flags, scenario.horizon, window);
    if let Some(t1) = m.stabilization_time {
        m.max_precision_after_stab =
            m.sample_times.iter().zip(&m.precision_trace).filter(|(t, _)| **t >= t1).map(|(_, p)| *p).reduce(f64::max);
    }
    if scenario.keep_trace {
        m.trace = Some(trace);
    }
    Ok(m)
}

/// Runs many scenarios on a worker pool of `threads` workers (0 means the
/// machine's parallelism). Results come back in input order.
pub fn run_batch(
    sys: &SystemParams<f64>,
    derived: &DerivedParams<f64>,
    scenarios: &[Scenario],
    threads: usize,
) -> Result<Vec<RunMetrics>, EngineError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| EngineError::InvalidScenario(e.to_string()))?;
    pool.install(|| scenarios.par_iter().map(|s| run(sys, derived, s)).collect())
}

impl<'a> Sim<'a> {
    fn new(
        sys: &SystemParams<f64>,
        d: &DerivedParams<f64>,
        tp: &'a TickParams,
        sc: &Scenario,
    ) -> Result<Self, EngineError> {
        if !(sc.horizon.is_finite() && sc.horizon >= 0.0) {
            return Err(EngineError::InvalidScenario("horizon must be finite and non-negative".into()));
        }
        let ft = sc.faulty_terminals.unwrap_or(sys.f0);
        let fb = sc.faulty_bridges.unwrap_or(sys.f1);
        if ft > sys.f0 || fb > sys.f1 {
            return Err(EngineError::InvalidScenario(format!(
                "{ft} faulty terminals and {fb} faulty bridges exceed the bounds ({}, {})",
                sys.f0, sys.f1
            )));
        }
        let ring = Ring::new(tp.tau_max);
        let mut setup = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x5e70_0b5e);
        let topo = match &sc.faulty_ids {
            Some(ids) => {
                Topology::new(sys.n0, sys.n1).with_faulty(ids, sys.f0, sys.f1).map_err(EngineError::InvalidScenario)?
            }
            None => Topology::new(sys.n0, sys.n1).with_random_faulty(ft, fb, &mut setup),
        };
        let adv = CatalogAdversary::new(sc.adversary, sc.seed);
        let reference = topo.nonfaulty().next().unwrap_or(0);
        let cycle = tp.cycle();
        let terminal_trigs = vec![
            (tp.tau0, 0, Trig::ProtectExpiry),
            (cycle, 0, Trig::PulseSend),
            (tp.tau0, tp.delta[3] % tp.tau0, Trig::BasicRead),
        ];
        let bridge_trigs = vec![
            (tp.tau0, 0, Trig::ProtectExpiry),
            (cycle, (tp.q_clear + 1) % cycle, Trig::QClear),
            (cycle, tp.tau0 % cycle, Trig::Corrector),
            (cycle, tp.delta[12] % cycle, Trig::Relay),
            (tp.tau0, tp.delta[1] % tp.tau0, Trig::BasicRead),
        ];
        let c = Consts {
            delta_d: sys.delta_d,
            delta0: match sc.span {
                SpanMode::Uniform => sys.delta0,
                SpanMode::Instant => 0.0,
            },
        };
        let mut sim = Sim {
            tp,
            c,
            ring,
            topo,
            nodes: Vec::new(),
            queue: BinaryHeap::new(),
            seq: 0,
            adv,
            delay: DelayModel { delta_d: sys.delta_d, tick: tp.tick, mode: sc.delay },
            alien: AlienClockModel { eps2: sys.eps2, tick: tp.tick, outages: sc.alien_outages.clone() },
            rng: ChaCha8Rng::seed_from_u64(sc.seed),
            seed: sc.seed,
            eor: sc.eor,
            reference,
            refresh: d.tau0 / 8.0,
            sample_dt: sc.sample_interval.unwrap_or(d.tau0 / 10.0),
            eps0_ticks: d.to_ticks(sys.eps0),
            in_flight: 0,
            last_round: None,
            keep_trace: sc.keep_trace,
            m: RunMetrics { seed: sc.seed, horizon: sc.horizon, ..RunMetrics::default() },
            terminal_trigs,
            bridge_trigs,
            alert_idx: Vec::new(),
            send_idx: Vec::new(),
        };
        sim.init_nodes(sys, sc, &mut setup);
        Ok(sim)
    }

    fn init_nodes(&mut self, sys: &SystemParams<f64>, sc: &Scenario, rng: &mut ChaCha8Rng) {
        let tp = self.tp;
        let tau = tp.tau_max;
        let n = self.topo.len();
        let k_count = tau / tp.cycle();
        let sync = match sc.init {
            InitialState::Synchronized { spread } => {
                let s = (spread / tp.tick).round() as u64;
                let d1 = tp.delta[1];
                let margin = if d1 > s { (d1 - s) / 2 } else { 0 };
                let k0 = rng.gen_range(0..k_count);
                let base = k0 * tp.cycle() + tp.tau0 + d1.saturating_sub(s + margin).max(1);
                Some((base, s))
            }
            InitialState::Arbitrary => None,
        };
        let mut nonfaulty_seen = 0usize;
        for id in 0..n {
            let role = self.topo.role(id);
            let faulty = self.topo.is_faulty(id);
            let origin = (tau as f64) * (1.0 + rng.gen::<f64>());
            let hw = match sc.drift {
                DriftMode::Constant => {
                    let drift = sys.rho * (2.0 * rng.gen::<f64>() - 1.0);
                    HardwareClock::constant(tp.tick, sys.rho, drift, origin)
                }
                DriftMode::Jitter { segment } => {
                    HardwareClock::jitter(tp.tick, sys.rho, segment, hash3(sc.seed, id as u64, 0x717), origin)
                }
            };
            let mut hw = hw;
            let h0 = hw.ticks_at(0.0);
            let mut st = NodeState::new(role, h0);
            match sync {
                None => self.randomize(&mut st, role, h0, rng),
                Some((base, s)) => {
                    let off = if faulty {
                        rng.gen_range(0..=s)
                    } else {
                        nonfaulty_seen += 1;
                        match nonfaulty_seen {
                            1 => 0,
                            2 => s,
                            _ => rng.gen_range(0..=s),
                        }
                    };
                    let c0 = self.ring.value(base + off);
                    st.clocks.write_local(&self.ring, self.ring.value(h0), c0);
                    let phase = c0.0 % tp.cycle();
                    st.last_pulse_sent_at = h0.saturating_sub(phase);
                    if role == Role::Bridge && tp.delta[14] > phase {
                        st.timer_d =
                            Some(self.ring.add(self.ring.value(h0), self.ring.value(tp.delta[14] - 1 - phase)));
                    }
                }
            }
            let honest_until =
                if !faulty { f64::INFINITY } else { self.adv.honest_until(id).unwrap_or(f64::NEG_INFINITY) };
            let frozen = st.clocks.local(&self.ring, self.ring.value(h0));
            self.nodes.push(SimNode { hw, st, gen: 0, det_gen: 0, span: None, honest_until, frozen });
        }
        self.alert_idx = vec![None; n];
        self.send_idx = vec![None; n];
        for id in 0..n {
            if self.topo.is_faulty(id) {
                continue;
            }
            match self.topo.role(id) {
                Role::Bridge => {
                    self.alert_idx[id] = Some(self.m.alerted_timeline.len());
                    let a = self.nodes[id].st.alerted();
                    self.m.alerted_timeline.push((id, vec![(0.0, a)]));
                }
                Role::Terminal => {
                    self.send_idx[id] = Some(self.m.pulse_sends.len());
                    self.m.pulse_sends.push((id, Vec::new()));
                }
            }
        }
        for id in 0..n {
            if self.active(id, 0.0) {
                let h0 = self.nodes[id].hw.ticks_at(0.0);
                self.reschedule(id, 0.0, h0);
                self.schedule_watchdog(id, 0.0, h0);
                if let Some(dl) = self.nodes[id].st.timer_w {
                    self.push_timer(id, dl, false);
                }
                if let Some(dl) = self.nodes[id].st.timer_w_star {
                    self.push_timer(id, dl, true);
                }
            }
            if self.topo.is_faulty(id) {
                let view = self.pulse_view(id, 0.0);
                if let Some(t) = self.adv.next_action(&view, &self.ring) {
                    self.push(t, EvKind::Adversary { node: id });
                }
            }
        }
        self.push(0.0, EvKind::Sample);
    }

    fn randomize(&self, st: &mut NodeState, role: Role, h0: u64, rng: &mut ChaCha8Rng) {
        let tp = self.tp;
        let tau = tp.tau_max;
        st.clocks.local_offset = RingValue(rng.gen_range(0..tau));
        st.clocks.logical_offset = RingValue(rng.gen_range(0..tau));
        st.clocks.alien_offset = RingValue(rng.gen_range(0..tau));
        let (w, ws) = match role {
            Role::Terminal => (tp.delta[4], tp.delta[17]),
            Role::Bridge => (tp.delta[2], tp.delta[11]),
        };
        if rng.gen::<bool>() {
            st.timer_w = Some(h0 + rng.gen_range(1..=w.max(1)));
        }
        if rng.gen::<bool>() {
            st.timer_w_star = Some(h0 + rng.gen_range(1..=ws.max(1)));
            st.timer_w_star_set_at = Some(h0.saturating_sub(rng.gen_range(0..=tp.delta[12])));
        }
        st.k_star = rng.gen_range(0..tau / tp.cycle());
        if role == Role::Bridge && rng.gen::<bool>() {
            st.timer_d = Some(RingValue(rng.gen_range(0..tau)));
        }
        st.protect_pulse = rng.gen();
        if role == Role::Bridge {
            // Only bridges run the detectors and the corrector.
            st.pulsed = rng.gen();
            st.protect_corrector = rng.gen();
        }
        st.coin = rng.gen();
        st.last_pulse_sent_at = h0.saturating_sub(rng.gen_range(0..=2 * tp.delta[15]));
    }

    fn push(&mut self, t: f64, kind: EvKind) {
        self.seq += 1;
        self.queue.push(Ev { t, seq: self.seq, kind });
    }

    fn active(&self, id: NodeId, t: f64) -> bool {
        t < self.nodes[id].honest_until
    }

    fn h(&mut self, id: NodeId, t: f64) -> u64 {
        self.nodes[id].hw.ticks_at(t)
    }

    fn clock(&self, id: NodeId, h: u64) -> RingValue {
        self.nodes[id].st.clocks.local(&self.ring, self.ring.value(h))
    }

    fn clock_at(&mut self, id: NodeId, t: f64) -> RingValue {
        let h = self.h(id, t);
        self.clock(id, h)
    }

    fn execute(&mut self, horizon: f64) {
        while let Some(ev) = self.queue.pop() {
            if ev.t > horizon {
                break;
            }
            self.m.events += 1;
            let t = ev.t;
            match ev.kind {
                EvKind::Sample => self.on_sample(t, horizon),
                EvKind::Deliver { from, to, k, sent } => self.on_deliver(t, from, to, k, sent),
                EvKind::TimerW { node, deadline } => self.on_timer_w(t, node, deadline),
                EvKind::TimerWStar { node, deadline } => self.on_timer_w_star(t, node, deadline),
                EvKind::Watchdog { node, gen } => self.on_watchdog(t, node, gen),
                EvKind::Trigger { node, gen, h } => self.on_trigger(t, node, gen, h),
                EvKind::Adversary { node } => self.on_adversary(t, node),
            }
        }
    }

    fn finish(&mut self) -> RunMetrics {
        let mut m = std::mem::take(&mut self.m);
        if m.trace.is_none() {
            m.trace = Some(ClockTrace {
                tau_max: self.tp.tau_max,
                tick: self.tp.tick,
                nodes: self.topo.nonfaulty().collect(),
                ..ClockTrace::default()
            });
        }
        m
    }

    fn on_sample(&mut self, t: f64, horizon: f64) {
        let ids: Vec<NodeId> = self.topo.nonfaulty().collect();
        let vals: Vec<u64> = ids.iter().map(|&id| self.clock_at(id, t).0).collect();
        let p = max_ring_spread(&vals, self.tp.tau_max) as f64 * self.tp.tick;
        self.m.sample_times.push(t);
        self.m.precision_trace.push(p);
        let trace = self.m.trace.get_or_insert_with(|| ClockTrace {
            tau_max: self.tp.tau_max,
            tick: self.tp.tick,
            nodes: ids.clone(),
            ..ClockTrace::default()
        });
        trace.times.push(t);
        trace.values.push(vals);
        let next = t + self.sample_dt;
        if next <= horizon {
            self.push(next, EvKind::Sample);
        }
    }

    fn table(&self, id: NodeId) -> &[(u64, u64, Trig)] {
        match self.topo.role(id) {
            Role::Terminal => &self.terminal_trigs,
            Role::Bridge => &self.bridge_trigs,
        }
    }

    /// Invalidates pending triggers of `id` and schedules the next one.
    fn reschedule(&mut self, id: NodeId, t: f64, h: u64) {
        self.nodes[id].gen += 1;
        if !self.active(id, t) {
            return;
        }
        let c = self.clock(id, h).0;
        let d = self
            .table(id)
            .iter()
            .map(|&(m, r, _)| {
                let x = (r + m - c % m) % m;
                if x == 0 {
                    m
                } else {
                    x
                }
            })
            .min()
            .expect("non-empty trigger table");
        let target = h + d;
        let node = &mut self.nodes[id];
        let when = node.hw.time_of_tick(target).max(t);
        let gen = node.gen;
        self.push(when, EvKind::Trigger { node: id, gen, h: target });
    }

    fn push_timer(&mut self, id: NodeId, deadline: u64, star: bool) {
        let when = self.nodes[id].hw.time_of_tick(deadline);
        let kind = if star { EvKind::TimerWStar { node: id, deadline } } else { EvKind::TimerW { node: id, deadline } };
        self.push(when, kind);
    }

    fn set_timer_d(&mut self, id: NodeId, t: f64, v: Option<RingValue>) {
        let was = self.nodes[id].st.alerted();
        self.nodes[id].st.timer_d = v;
        let now = self.nodes[id].st.alerted();
        if was != now {
            if let Some(i) = self.alert_idx[id] {
                self.m.alerted_timeline[i].1.push((t, now));
            }
        }
    }

    /// Expires the watchdog if due, otherwise schedules its expiry check.
    fn schedule_watchdog(&mut self, id: NodeId, t: f64, h: u64) {
        if self.topo.role(id) != Role::Bridge {
            return;
        }
        let Some(v) = self.nodes[id].st.timer_d else { return };
        let d14 = self.tp.delta[14];
        let r = self.ring.sub(v, self.ring.value(h)).0;
        if detector_expired(&self.ring, v, self.ring.value(h), d14) {
            self.set_timer_d(id, t, None);
            return;
        }
        self.nodes[id].det_gen += 1;
        let gen = self.nodes[id].det_gen;
        let when = self.nodes[id].hw.time_of_tick(h + r + 1).max(t);
        self.push(when, EvKind::Watchdog { node: id, gen });
    }

    fn q_eval(&mut self, id: NodeId, h: u64) {
        let c = self.clock(id, h);
        let st = &mut self.nodes[id].st;
        if st.timer_w_star.is_some() {
            st.pulsed = true;
        }
        if q_detector_clears(c, self.tp.cycle(), self.tp.q_clear) {
            st.pulsed = false;
        }
    }

    /// Applies a clock write if the priority lattice permits it.
    fn write(&mut self, id: NodeId, t: f64, h: u64, target: RingValue, source: WriteSource) -> bool {
        let (pp, pc) = (self.nodes[id].st.protect_pulse, self.nodes[id].st.protect_corrector);
        if !write_allowed(source, pp, pc) {
            self.m.suppressed_writes += 1;
            return false;
        }
        if source == WriteSource::BasicSync && (pp || pc) {
            self.m.priority_violations += 1;
        }
        let hv = self.ring.value(h);
        let old = self.clock(id, h);
        let node = &mut self.nodes[id];
        node.st.clocks.write_local(&self.ring, hv, target);
        node.st.clocks.logical_offset = RingValue(0);
        if old != target {
            node.span = Some(begin_updating_span(&self.ring, t, old, target, self.c.delta0, node.span.as_ref()));
        }
        if self.keep_trace {
            self.m.writes.push(WriteRecord { time: t, node: id, clock: target.0, source });
        }
        self.reschedule(id, t, h);
        true
    }

    /// Remote reading of `server`'s local clock by `client` at `t`.
    fn read(&mut self, server: NodeId, client: NodeId, t: f64, client_clock: RingValue) -> RingValue {
        if !self.active(server, t) {
            let window = match self.topo.role(client) {
                Role::Terminal => self.tp.delta[6],
                Role::Bridge => self.tp.delta[5],
            };
            let reference = self.clock_at(self.reference, t);
            let own_clock = match self.adv.strategy() {
                Strategy::Silent | Strategy::CrashAt { .. } => self.nodes[server].frozen,
                _ => self.clock_at(server, t),
            };
            let view = ReadView { server, client, t, client_clock, reference, own_clock, window };
            return self.adv.fabricate_reading(&self.ring, &view);
        }
        let c = self.clock_at(server, t);
        let chan =
            ReadingChannel { server, client, eps0_ticks: self.eps0_ticks, refresh: self.refresh, seed: self.seed };
        chan.remote_reading(&self.ring, t, c, self.nodes[server].span.as_ref())
    }

    fn read_peers(&mut self, id: NodeId, t: f64, own: RingValue) -> Vec<RingValue> {
        let peers = self.topo.peers(id);
        peers.map(|p| self.read(p, id, t, own)).collect()
    }

    fn send_pulse(&mut self, from: NodeId, to: NodeId, k: u64, t: f64) {
        let adversarial = !self.active(from, t);
        let d = self.delay.sample_delay(&mut self.rng, MessageKind::Pulse, adversarial);
        self.in_flight += 1;
        self.push(t + d, EvKind::Deliver { from, to, k, sent: t });
    }

    fn pulse_view(&mut self, id: NodeId, t: f64) -> PulseView {
        let reference = self.clock_at(self.reference, t);
        PulseView { node: id, t, reference, tick: self.tp.tick, cycle: self.tp.cycle(), delta_d: self.c.delta_d }
    }

    fn on_adversary(&mut self, t: f64, id: NodeId) {
        let view = self.pulse_view(id, t);
        if !self.active(id, t) {
            let outs = self.adv.act(&view, &self.ring, self.topo.peers(id));
            for o in outs {
                self.send_pulse(id, o.to, o.k, t);
            }
        }
        if let Some(next) = self.adv.next_action(&view, &self.ring) {
            self.push(next.max(t), EvKind::Adversary { node: id });
        }
    }

    fn on_deliver(&mut self, t: f64, from: NodeId, to: NodeId, k: u64, sent: f64) {
        self.in_flight -= 1;
        if t < sent || t - sent >= self.c.delta_d {
            self.m.causality_violations += 1;
        }
        if !self.active(to, t) {
            return;
        }
        let h = self.h(to, t);
        let tp = self.tp;
        let max_window = tp.delta[10].max(tp.delta[13]).max(tp.delta[16]);
        {
            let log = &mut self.nodes[to].st.pulse_log;
            log.record(k, from, h);
            log.prune(h, max_window);
        }
        match self.topo.role(to) {
            Role::Bridge => {
                let a1 = self.nodes[to].st.pulse_log.count(k, h, tp.delta[10]) >= tp.n0 - 2 * tp.f0;
                if a1 {
                    self.arm_pulse_timer(to, h, k, tp.delta[11]);
                    self.m.a1_instants.push(t);
                }
                if self.nodes[to].st.pulse_log.count(k, h, tp.delta[13]) >= tp.n0 - tp.f0 {
                    let v = detector_arm(&self.ring, self.ring.value(h), tp.delta[14]);
                    self.set_timer_d(to, t, Some(v));
                    self.schedule_watchdog(to, t, h);
                }
                self.q_eval(to, h);
            }
            Role::Terminal => {
                if self.nodes[to].st.pulse_log.count(k, h, tp.delta[16]) >= tp.n1 - tp.f1 {
                    self.arm_pulse_timer(to, h, k, tp.delta[17]);
                }
            }
        }
    }

    fn arm_pulse_timer(&mut self, id: NodeId, h: u64, k: u64, ticks: u64) {
        let st = &mut self.nodes[id].st;
        st.k_star = k;
        st.timer_w_star = Some(h + ticks);
        st.timer_w_star_set_at = Some(h);
        self.push_timer(id, h + ticks, true);
    }

    fn on_timer_w(&mut self, t: f64, id: NodeId, deadline: u64) {
        if !self.active(id, t) || self.nodes[id].st.timer_w != Some(deadline) {
            return;
        }
        let h = self.h(id, t).max(deadline);
        self.nodes[id].st.timer_w = None;
        let offset = self.nodes[id].st.clocks.logical_offset;
        if offset.0 != 0 {
            let target = self.ring.add(self.clock(id, h), offset);
            self.write(id, t, h, target, WriteSource::BasicSync);
        }
        self.nodes[id].st.clocks.logical_offset = RingValue(0);
        if self.topo.role(id) == Role::Bridge {
            self.q_eval(id, h);
        }
    }

    fn on_timer_w_star(&mut self, t: f64, id: NodeId, deadline: u64) {
        if !self.active(id, t) || self.nodes[id].st.timer_w_star != Some(deadline) {
            return;
        }
        let h = self.h(id, t).max(deadline);
        let tp = self.tp;
        self.nodes[id].st.timer_w_star = None;
        let k_star = self.nodes[id].st.k_star;
        let own = self.clock(id, h);
        let reads = self.read_peers(id, t, own);
        let target = match self.topo.role(id) {
            Role::Bridge => {
                let tau_prime = pulse_anchor(&self.ring, k_star, tp.cycle(), tp.delta[8]);
                b1_target(&self.ring, tau_prime, &reads, tp.delta[7], tp.n0, tp.f0)
            }
            Role::Terminal => {
                let tau_prime = pulse_anchor(&self.ring, k_star, tp.cycle(), tp.delta[9]);
                b0_target(&self.ring, tau_prime, &reads, tp.n1)
            }
        }
        .expect("peer count matches topology");
        self.write(id, t, h, target, WriteSource::PulseSync);
        self.nodes[id].st.protect_pulse = true;
        if self.topo.role(id) == Role::Bridge {
            self.q_eval(id, h);
        }
    }

    fn on_watchdog(&mut self, t: f64, id: NodeId, gen: u64) {
        if !self.active(id, t) || self.nodes[id].det_gen != gen {
            return;
        }
        let h = self.h(id, t);
        self.schedule_watchdog(id, t, h);
    }

    fn on_trigger(&mut self, t: f64, id: NodeId, gen: u64, h_target: u64) {
        if !self.active(id, t) || self.nodes[id].gen != gen {
            return;
        }
        let h = self.h(id, t).max(h_target);
        let c = self.clock(id, h).0;
        let due: Vec<Trig> = self.table(id).iter().filter(|&&(m, r, _)| c % m == r).map(|&(_, _, k)| k).collect();
        for kind in due {
            self.exec_trigger(id, t, h, kind);
        }
        if self.nodes[id].gen == gen {
            self.reschedule(id, t, h);
        }
    }

    fn exec_trigger(&mut self, id: NodeId, t: f64, h: u64, kind: Trig) {
        let tp = self.tp;
        match kind {
            Trig::ProtectExpiry => self.nodes[id].st.protect_pulse = false,
            Trig::QClear => self.q_eval(id, h),
            Trig::PulseSend => {
                if pulse_guard(h, self.nodes[id].st.last_pulse_sent_at, tp.delta[15]) {
                    let k = self.clock(id, h).0 / tp.cycle();
                    self.nodes[id].st.last_pulse_sent_at = h;
                    for b in self.topo.bridges() {
                        self.send_pulse(id, b, k, t);
                    }
                    if let Some(i) = self.send_idx[id] {
                        self.m.pulse_sends[i].1.push(t);
                    }
                }
            }
            Trig::Corrector => {
                self.q_eval(id, h);
                self.schedule_watchdog(id, t, h);
                let coin = self.rng.gen::<bool>();
                let st = &mut self.nodes[id].st;
                st.coin = coin;
                if eor(self.eor, st.alerted(), st.pulsed, coin) {
                    let y = self.alien.alien_read(&self.ring, t, &mut self.rng).value;
                    if self.write(id, t, h, y, WriteSource::Corrector) {
                        self.nodes[id].st.protect_corrector = true;
                        self.m.corrector_writes += 1;
                        self.m.corrector_write_times.push(t);
                    }
                } else {
                    st.protect_corrector = false;
                }
            }
            Trig::Relay => {
                let st = &self.nodes[id].st;
                if relay_due(h, st.timer_w_star_set_at, tp.delta[12]) {
                    let k = st.k_star;
                    for i in self.topo.terminals() {
                        self.send_pulse(id, i, k, t);
                    }
                }
            }
            Trig::BasicRead => {
                if self.topo.role(id) == Role::Bridge {
                    self.note_sync_candidate(id, t, h);
                }
                let st = &self.nodes[id].st;
                if !write_allowed(WriteSource::BasicSync, st.protect_pulse, st.protect_corrector) {
                    self.m.suppressed_writes += 1;
                    return;
                }
                let own = self.clock(id, h);
                let reads = self.read_peers(id, t, own);
                let (out, wait, limit) = match self.topo.role(id) {
                    Role::Terminal => (
                        terminal_sync_offset(&self.ring, own, &reads, RingValue(tp.delta[6]), tp.n1),
                        tp.delta[4],
                        tp.f1,
                    ),
                    Role::Bridge => {
                        let members: Vec<Option<RingValue>> = reads.into_iter().map(Some).collect();
                        (
                            bridge_sync_offset(&self.ring, own, &members, RingValue(tp.delta[5]), tp.n0, tp.f0),
                            tp.delta[2],
                            tp.f0,
                        )
                    }
                };
                let out = out.expect("peer count matches topology");
                if out.clipped > limit {
                    self.m.read_warnings += 1;
                }
                let st = &mut self.nodes[id].st;
                st.clocks.logical_offset = out.offset;
                st.timer_w = Some(h + wait);
                self.push_timer(id, h + wait, false);
            }
        }
    }

    /// Records a candidate synchronization point when the first bridge of a
    /// round reaches its read instant.
    fn note_sync_candidate(&mut self, id: NodeId, t: f64, h: u64) {
        let round = self.clock(id, h).0 / self.tp.tau0;
        if self.last_round == Some(round) {
            return;
        }
        self.last_round = Some(round);
        let ids: Vec<NodeId> = self.topo.nonfaulty().collect();
        let vals: Vec<u64> = ids.iter().map(|&j| self.clock_at(j, t).0).collect();
        let spread = max_ring_spread(&vals, self.tp.tau_max);
        let timers_reset =
            ids.iter().all(|&j| self.nodes[j].st.timer_w.is_none() && self.nodes[j].st.timer_w_star.is_none());
        let no_span = ids.iter().all(|&j| match self.nodes[j].span {
            Some(s) => t > s.start + s.max_len,
            None => true,
        });
        let delta = spread as f64 * self.tp.tick;
        self.m.sync_points.push(SyncPoint {
            time: t - delta,
            delta,
            round,
            clean: self.in_flight == 0 && timers_reset && no_span,
        });
    }
}

/// Largest pairwise ring distance among `vals`.
pub fn max_ring_spread(vals: &[u64], tau_max: u64) -> u64 {
    if vals.len() < 2 {
        return 0;
    }
    let mut v = vals.to_vec();
    v.sort_unstable();
    let ring = Ring::new(tau_max);
    let half = tau_max / 2;
    let mut best = 0;
    for &x in &v {
        let anti = (x + half) % tau_max;
        let i = v.partition_point(|&y| y < anti);
        for j in [i, i + v.len() - 1] {
            let y = v[j % v.len()];
            best = best.max(ring.dist(RingValue(x), RingValue(y)).0);
        }
    }
    best
}

/// Per-sample synchronization predicate: precision within `eps` and the
/// rate condition holding against every later sample within `window`.
pub fn check_synchronized(trace: &ClockTrace, eps: f64, rho_bound: f64, window: f64) -> Vec<bool> {
    let n = trace.times.len();
    let ring = Ring::new(trace.tau_max.max(1));
    let mut ok = vec![false; n];
    for (i, flag) in ok.iter_mut().enumerate() {
        let p = max_ring_spread(&trace.values[i], trace.tau_max) as f64 * trace.tick;
        if p > eps {
            continue;
        }
        let mut good = true;
        let mut j = i + 1;
        while good && j < n && trace.times[j] - trace.times[i] <= window {
            let dt = trace.times[j] - trace.times[i];
            let allow = rho_bound * dt + eps;
            good = trace.values[i].iter().zip(&trace.values[j]).all(|(&a, &b)| {
                let adv = ring.sub(RingValue(b), RingValue(a)).0 as f64 * trace.tick;
                (adv - dt).abs() <= allow
            });
            j += 1;
        }
        *flag = good;
    }
    ok
}

/// Onset of the final all-true run of `flags`, provided it lasts at least
/// `min_tail` seconds before the horizon; `None` means censored.
pub fn measure_stabilization(times: &[f64], flags: &[bool], horizon: f64, min_tail: f64) -> Option<f64> {
    let last_bad = flags.iter().rposition(|f| !f);
    let start = match last_bad {
        Some(i) => i + 1,
        None => 0,
    };
    let t1 = *times.get(start)?;
    (horizon - t1 >= min_tail).then_some(t1)
}

/// Candidates that satisfy the synchronization-point conditions.
pub fn find_sync_points(metrics: &RunMetrics) -> Vec<SyncPoint> {
    metrics.sync_points.iter().copied().filter(|p| p.clean).collect()
}

/// A breach of per-round contraction between consecutive points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionViolation {
    pub before: SyncPoint,
    pub after: SyncPoint,
    pub spread_bound: f64,
}

/// Checks `delta' <= alpha delta + eps_b` and spacing in `[t_min, t_max)`
/// for each pair of clean points in consecutive rounds.
pub fn check_contraction(points: &[SyncPoint], derived: &DerivedParams<f64>, rounds: u64) -> Vec<ContractionViolation> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (p, q) = (w[0], w[1]);
        if !(p.clean && q.clean) || (p.round + 1) % rounds != q.round {
            continue;
        }
        let bound = derived.alpha * p.delta + derived.eps_b;
        let gap = q.time - p.time;
        if q.delta > bound || gap < derived.t_min || gap >= derived.t_max {
            out.push(ContractionViolation { before: p, after: q, spread_bound: bound });
        }
    }
    out
}

/// Pairs of clique-condition instants whose gap falls in `(lo, hi]`.
pub fn separation_violations(instants: &[f64], lo: f64, hi: f64) -> usize {
    let mut v = instants.to_vec();
    v.sort_by(f64::total_cmp);
    let mut count = 0;
    for (i, &t) in v.iter().enumerate() {
        let a = v.partition_point(|&x| x <= t + lo);
        let b = v.partition_point(|&x| x <= t + hi);
        count += b.saturating_sub(a.max(i + 1));
    }
    count
}

/// Nonfaulty terminal pulse pairs closer than `min_gap`.
pub fn pulse_gap_violations(m: &RunMetrics, min_gap: f64) -> usize {
    m.pulse_sends.iter().map(|(_, ts)| ts.windows(2).filter(|w| w[1] - w[0] < min_gap).count()).sum()
}

/// Corrector writes at or after the stabilization onset.
pub fn writes_after_stabilization(m: &RunMetrics) -> Option<usize> {
    let t1 = m.stabilization_time?;
    Some(m.corrector_write_times.iter().filter(|&&t| t >= t1).count())
}
