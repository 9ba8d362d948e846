//! The communication substrate: bounded message delays, remote clock
//! readings with updating spans, alien (external) clock reads, and the
//! Byzantine adversary catalog.

use crate::ring::{Ring, RingValue};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

/// SplitMix64 finalizer; the basis of every counter-based draw below.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic hash of three words.
pub fn hash3(a: u64, b: u64, c: u64) -> u64 {
    mix64(mix64(mix64(a) ^ b) ^ c)
}

/// Deterministic uniform draw in `[0, 1)` keyed by three words.
pub fn unit_hash(a: u64, b: u64, c: u64) -> f64 {
    (hash3(a, b, c) >> 11) as f64 / (1u64 << 53) as f64
}

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Terminal,
    Bridge,
}

/// Complete bipartite topology. Terminals are `0..n0`, bridges `n0..n0+n1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub n0: usize,
    pub n1: usize,
    faulty: Vec<bool>,
}

impl Topology {
    pub fn new(n0: usize, n1: usize) -> Self {
        Topology { n0, n1, faulty: vec![false; n0 + n1] }
    }

    /// Marks the given nodes faulty, checking the per-side bounds.
    pub fn with_faulty(mut self, ids: &[NodeId], f0: usize, f1: usize) -> Result<Self, String> {
        for &id in ids {
            if id >= self.len() {
                return Err(format!("node {id} does not exist"));
            }
            self.faulty[id] = true;
        }
        let ft = self.terminals().filter(|&i| self.faulty[i]).count();
        let fb = self.bridges().filter(|&j| self.faulty[j]).count();
        if ft > f0 || fb > f1 {
            return Err(format!("{ft} faulty terminals and {fb} faulty bridges exceed bounds ({f0}, {f1})"));
        }
        Ok(self)
    }

    /// Picks `ft` terminals and `fb` bridges uniformly at random.
    pub fn with_random_faulty<R: Rng>(mut self, ft: usize, fb: usize, rng: &mut R) -> Self {
        let pick = |lo: usize, n: usize, k: usize, rng: &mut R| {
            rand::seq::index::sample(rng, n, k.min(n)).into_iter().map(move |i| lo + i).collect::<Vec<_>>()
        };
        for id in pick(0, self.n0, ft, rng) {
            self.faulty[id] = true;
        }
        for id in pick(self.n0, self.n1, fb, rng) {
            self.faulty[id] = true;
        }
        self
    }

    pub fn len(&self) -> usize {
        self.n0 + self.n1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn role(&self, id: NodeId) -> Role {
        if id < self.n0 {
            Role::Terminal
        } else {
            Role::Bridge
        }
    }

    pub fn is_faulty(&self, id: NodeId) -> bool {
        self.faulty[id]
    }

    pub fn terminals(&self) -> std::ops::Range<NodeId> {
        0..self.n0
    }

    pub fn bridges(&self) -> std::ops::Range<NodeId> {
        self.n0..self.n0 + self.n1
    }

    /// Peers on the other side of the bipartition.
    pub fn peers(&self, id: NodeId) -> std::ops::Range<NodeId> {
        match self.role(id) {
            Role::Terminal => self.bridges(),
            Role::Bridge => self.terminals(),
        }
    }

    pub fn nonfaulty(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&i| !self.faulty[i])
    }

    pub fn faulty_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).filter(|&i| self.faulty[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageKind {
    Pulse,
    ReadingUpdate,
}

/// How message delays are drawn within `[0, delta_d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayMode {
    Uniform,
    /// Adversary-influenced paths get the largest legal delay; other paths
    /// get `extreme` as a fraction of the bound.
    WorstCase {
        extreme: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayModel {
    pub delta_d: f64,
    pub tick: f64,
    pub mode: DelayMode,
}

impl DelayModel {
    pub fn sample_delay<R: Rng>(&self, rng: &mut R, _kind: MessageKind, adversarial: bool) -> f64 {
        let max = self.delta_d - self.tick;
        match self.mode {
            DelayMode::Uniform => rng.gen::<f64>() * self.delta_d,
            DelayMode::WorstCase { extreme } => {
                if adversarial {
                    max
                } else {
                    (extreme.clamp(0.0, 1.0) * self.delta_d).min(max)
                }
            }
        }
        .min(max.max(0.0))
    }
}

/// The most recent adjustment of a server's local clock, as seen by its
/// readers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdatingSpan {
    /// Real time of the adjustment.
    pub start: f64,
    /// Upper bound on the span length.
    pub max_len: f64,
    /// `new ⊖ old` of the server clock at the adjustment.
    pub shift: RingValue,
    /// Distinguishes successive spans of one server.
    pub id: u64,
}

/// Remote reading of one server's local clock by one client.
///
/// Readings are channel state rather than messages: the value is derived at
/// query time from the server's clock, a bounded error that is redrawn
/// every `refresh` seconds, and the server's latest updating span.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadingChannel {
    pub server: NodeId,
    pub client: NodeId,
    pub eps0_ticks: u64,
    pub refresh: f64,
    pub seed: u64,
}

impl ReadingChannel {
    fn key(&self) -> u64 {
        ((self.server as u64) << 32) | self.client as u64
    }

    /// Error in ticks, within `±eps0/2` so that any two reads differ by at
    /// most `eps0` beyond the server's own progress.
    pub fn error_ticks(&self, t: f64) -> i64 {
        let epoch = (t / self.refresh).floor().max(0.0) as u64;
        let u = unit_hash(self.seed ^ 0x5eed, self.key(), epoch);
        let half = (self.eps0_ticks / 2) as f64;
        ((2.0 * u - 1.0) * half).round() as i64
    }

    /// Span length for this channel, in `(0, max_len]`.
    pub fn span_len(&self, span: &UpdatingSpan) -> f64 {
        span.max_len * (1.0 - unit_hash(self.seed ^ 0x59a2, self.key(), span.id))
    }

    /// Instant within the span at which this reader switches to the new value.
    pub fn switch_time(&self, span: &UpdatingSpan) -> f64 {
        span.start + self.span_len(span) * unit_hash(self.seed ^ 0x7a11, self.key(), span.id)
    }

    /// Whether `t` lies inside the span on this channel.
    pub fn in_span(&self, span: &UpdatingSpan, t: f64) -> bool {
        t >= span.start && t <= span.start + self.span_len(span)
    }

    /// Reading of a nonfaulty server whose local clock is `server_now` at `t`.
    pub fn remote_reading(&self, ring: &Ring, t: f64, server_now: RingValue, span: Option<&UpdatingSpan>) -> RingValue {
        self.reading_with_error(ring, t, server_now, span, self.error_ticks(t))
    }

    /// As [`remote_reading`](Self::remote_reading) with an explicit error draw.
    pub fn reading_with_error(
        &self,
        ring: &Ring,
        t: f64,
        server_now: RingValue,
        span: Option<&UpdatingSpan>,
        error_ticks: i64,
    ) -> RingValue {
        let base = match span {
            Some(s) if t >= s.start && t < self.switch_time(s) => ring.sub(server_now, s.shift),
            _ => server_now,
        };
        ring.add(base, ring.value_signed(error_ticks))
    }
}

/// Opens a span for an adjustment at `t` from `old` to `new`; a newer span
/// supersedes any open one.
pub fn begin_updating_span(
    ring: &Ring,
    t: f64,
    old: RingValue,
    new: RingValue,
    max_len: f64,
    previous: Option<&UpdatingSpan>,
) -> UpdatingSpan {
    UpdatingSpan { start: t, max_len, shift: ring.sub(new, old), id: previous.map_or(1, |p| p.id + 1) }
}

/// External time as read through the bridge managers.
#[derive(Debug, Clone, PartialEq)]
pub struct AlienClockModel {
    pub eps2: f64,
    pub tick: f64,
    /// Outage windows `[start, end)` during which reads are arbitrary.
    pub outages: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AlienReading {
    pub value: RingValue,
    pub available: bool,
}

impl AlienClockModel {
    pub fn available(&self, t: f64) -> bool {
        !self.outages.iter().any(|&(a, b)| t >= a && t < b)
    }

    /// Ring encoding of real time `t`.
    pub fn encode(&self, ring: &Ring, t: f64) -> RingValue {
        ring.value((t / self.tick).floor().max(0.0) as u64)
    }

    /// Reads external time with a manager error drawn in `±eps2/2`.
    pub fn alien_read<R: Rng>(&self, ring: &Ring, t: f64, rng: &mut R) -> AlienReading {
        if !self.available(t) {
            return AlienReading { value: RingValue(rng.gen_range(0..ring.tau_max())), available: false };
        }
        let err = (rng.gen::<f64>() - 0.5) * self.eps2;
        self.alien_read_with_error(ring, t, err)
    }

    pub fn alien_read_with_error(&self, ring: &Ring, t: f64, err: f64) -> AlienReading {
        let ticks = ((t + err) / self.tick).floor() as i64;
        AlienReading { value: ring.value_signed(ticks), available: true }
    }
}

/// Shipped adversary strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Sends nothing; its clock reads frozen.
    Silent,
    /// Runs the protocol honestly until `at`, then behaves as `Silent`.
    CrashAt { at: f64 },
    /// Uniformly random readings and randomly timed pulses.
    Random,
    /// Opposite extremes to alternating clients.
    TwoFaced,
    /// Pulses every `gap` seconds with shifting indices.
    PulseSpam { gap: Option<f64> },
    /// Consistent readings and pulses biased by `bias` seconds.
    StealthOffset { bias: Option<f64> },
}

impl Strategy {
    pub const CATALOG: [&'static str; 6] =
        ["silent", "crash-at-t", "random", "two-faced", "pulse-spam", "stealth-offset"];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Silent => "silent",
            Strategy::CrashAt { .. } => "crash-at-t",
            Strategy::Random => "random",
            Strategy::TwoFaced => "two-faced",
            Strategy::PulseSpam { .. } => "pulse-spam",
            Strategy::StealthOffset { .. } => "stealth-offset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<Option<f64>, String> {
            a.map(|x| x.parse::<f64>().map_err(|e| format!("bad number {x:?}: {e}"))).transpose()
        };
        match name.trim() {
            "silent" | "none" => Ok(Strategy::Silent),
            "crash-at-t" | "crash" => Ok(Strategy::CrashAt { at: num(arg)?.unwrap_or(0.0) }),
            "random" => Ok(Strategy::Random),
            "two-faced" => Ok(Strategy::TwoFaced),
            "pulse-spam" => Ok(Strategy::PulseSpam { gap: num(arg)? }),
            "stealth-offset" => Ok(Strategy::StealthOffset { bias: num(arg)? }),
            other => Err(format!("unknown adversary {other:?}")),
        }
    }
}

/// What an adversary may observe when fabricating a reading.
#[derive(Debug, Clone, Copy)]
pub struct ReadView {
    pub server: NodeId,
    pub client: NodeId,
    pub t: f64,
    /// The client's own local clock.
    pub client_clock: RingValue,
    /// A nonfaulty reference clock.
    pub reference: RingValue,
    /// The faulty server's own free-running clock.
    pub own_clock: RingValue,
    /// The client's anchoring half-window for this reading, in ticks.
    pub window: u64,
}

/// What an adversary may observe when scheduling pulses.
#[derive(Debug, Clone, Copy)]
pub struct PulseView {
    pub node: NodeId,
    pub t: f64,
    pub reference: RingValue,
    pub tick: f64,
    /// Pulse cycle `k_pls tau0` in ticks.
    pub cycle: u64,
    pub delta_d: f64,
}

/// One fabricated pulse to one receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PulseOut {
    pub to: NodeId,
    pub k: u64,
}

/// Hooks through which faulty nodes act. All draws are keyed by
/// `(seed, node, time)` so runs are reproducible and independent.
pub trait AdversaryBehavior: Send {
    fn strategy(&self) -> Strategy;

    fn fabricate_reading(&self, ring: &Ring, view: &ReadView) -> RingValue;

    /// Next real time after `after` at which `node` acts, if ever.
    fn next_action(&self, view: &PulseView, ring: &Ring) -> Option<f64>;

    /// Pulses sent by `node` at its action time.
    fn act(&self, view: &PulseView, ring: &Ring, receivers: std::ops::Range<NodeId>) -> Vec<PulseOut>;

    /// Real time until which the node follows the protocol.
    fn honest_until(&self, _node: NodeId) -> Option<f64> {
        None
    }

    /// Whether the node's initial protocol state is replaced by a fresh
    /// uniformly random one.
    fn initial_state_override(&self, _node: NodeId) -> bool {
        false
    }
}

/// The catalog implementation of [`AdversaryBehavior`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatalogAdversary {
    pub strategy: Strategy,
    pub seed: u64,
}

impl CatalogAdversary {
    pub fn new(strategy: Strategy, seed: u64) -> Self {
        CatalogAdversary { strategy, seed }
    }

    fn draw(&self, a: u64, b: u64) -> u64 {
        hash3(self.seed ^ 0xad5e, a, b)
    }

    fn pulse_index(view: &PulseView, ring: &Ring, shift: u64) -> u64 {
        let per_ring = ring.tau_max() / view.cycle;
        (view.reference.0 / view.cycle + shift) % per_ring.max(1)
    }

    /// Real time until the reference clock next reaches `residue` mod cycle.
    fn until_phase(view: &PulseView, residue: u64) -> f64 {
        let now = view.reference.0 % view.cycle;
        let d = (residue + view.cycle - now) % view.cycle;
        let d = if d == 0 { view.cycle } else { d };
        d as f64 * view.tick
    }
}

impl AdversaryBehavior for CatalogAdversary {
    fn strategy(&self) -> Strategy {
        self.strategy
    }

    fn fabricate_reading(&self, ring: &Ring, v: &ReadView) -> RingValue {
        match self.strategy {
            Strategy::Silent | Strategy::CrashAt { .. } => v.own_clock,
            Strategy::Random | Strategy::PulseSpam { .. } => {
                let key = ((v.server as u64) << 32) | v.client as u64;
                ring.value(self.draw(key, v.t.to_bits()))
            }
            Strategy::TwoFaced => {
                if v.client.is_multiple_of(2) {
                    ring.sub(v.client_clock, ring.value(v.window))
                } else {
                    ring.add(v.client_clock, ring.value(v.window))
                }
            }
            Strategy::StealthOffset { bias } => {
                let b = bias.map_or(v.window / 2, |s| (s / 8e-9).max(0.0) as u64);
                ring.add(v.reference, ring.value(b))
            }
        }
    }

    fn next_action(&self, v: &PulseView, _ring: &Ring) -> Option<f64> {
        match self.strategy {
            Strategy::Silent | Strategy::CrashAt { .. } => None,
            Strategy::Random => {
                let u = unit_hash(self.seed ^ 0x7a7a, v.node as u64, v.t.to_bits());
                Some(v.t + (0.05 + 1.95 * u) * v.cycle as f64 * v.tick / 2.0)
            }
            Strategy::PulseSpam { gap } => Some(v.t + gap.unwrap_or(v.delta_d).max(v.tick)),
            Strategy::TwoFaced => Some(v.t + Self::until_phase(v, 0)),
            Strategy::StealthOffset { bias } => {
                let b = bias.map_or(v.cycle / 64, |s| (s / v.tick).max(0.0) as u64) % v.cycle;
                Some(v.t + Self::until_phase(v, b))
            }
        }
    }

    fn act(&self, v: &PulseView, ring: &Ring, receivers: std::ops::Range<NodeId>) -> Vec<PulseOut> {
        let mut out = Vec::new();
        match self.strategy {
            Strategy::Silent | Strategy::CrashAt { .. } => {}
            Strategy::Random => {
                let per_ring = (ring.tau_max() / v.cycle).max(1);
                for to in receivers {
                    let h = self.draw(((v.node as u64) << 32) | to as u64, v.t.to_bits());
                    if h & 1 == 1 {
                        out.push(PulseOut { to, k: (h >> 8) % per_ring });
                    }
                }
            }
            Strategy::PulseSpam { .. } => {
                let shift = self.draw(v.node as u64, v.t.to_bits()) % 3;
                let k = Self::pulse_index(v, ring, shift);
                out.extend(receivers.map(|to| PulseOut { to, k }));
            }
            Strategy::TwoFaced => {
                let k = Self::pulse_index(v, ring, 0);
                out.extend(receivers.filter(|to| to % 2 == 0).map(|to| PulseOut { to, k }));
            }
            Strategy::StealthOffset { .. } => {
                let k = Self::pulse_index(v, ring, 0);
                out.extend(receivers.map(|to| PulseOut { to, k }));
            }
        }
        out
    }

    fn honest_until(&self, _node: NodeId) -> Option<f64> {
        match self.strategy {
            Strategy::CrashAt { at } => Some(at),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delay_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DelayModel { delta_d: 1e-3, tick: 8e-9, mode: DelayMode::Uniform };
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let s = m.sample_delay(&mut rng, MessageKind::Pulse, false);
            assert!((0.0..1e-3).contains(&s));
            sum += s;
        }
        let mean = sum / n as f64;
        assert!((mean - 5e-4).abs() < 5e-6, "mean {mean}");
        let w = DelayModel { mode: DelayMode::WorstCase { extreme: 0.0 }, ..m };
        assert_eq!(w.sample_delay(&mut rng, MessageKind::Pulse, true), 1e-3 - 8e-9);
    }

    fn chan() -> ReadingChannel {
        ReadingChannel { server: 7, client: 2, eps0_ticks: 125, refresh: 0.01, seed: 3 }
    }

    #[test]
    fn reading_boundary_error() {
        let ring = Ring::new(1_000_000);
        let c = chan();
        let x = RingValue(999_990);
        assert_eq!(c.reading_with_error(&ring, 1.0, x, None, 125), RingValue(115));
    }

    #[test]
    fn reading_error_within_bound() {
        let ring = Ring::new(1_000_000);
        let c = chan();
        for i in 0..10_000 {
            let t = i as f64 * 1.3e-4;
            let r = c.remote_reading(&ring, t, RingValue(500), None);
            assert!(ring.dist(r, RingValue(500)).0 <= 125);
        }
    }

    #[test]
    fn span_bands_exclude_middle() {
        let ring = Ring::new(10_000_000);
        let old = RingValue(1_000_000);
        let new = RingValue(1_400_000);
        let span = begin_updating_span(&ring, 2.0, old, new, 1e-3, None);
        for client in 0..10_000usize {
            let c = ReadingChannel { client, ..chan() };
            let t = 2.0 + (client as f64 / 10_000.0) * 1e-3;
            let r = c.remote_reading(&ring, t, new, Some(&span));
            let near_old = ring.dist(r, old).0 <= 125;
            let near_new = ring.dist(r, new).0 <= 125;
            assert!(near_old || near_new, "reading {r} in excluded region");
        }
        let after = chan().remote_reading(&ring, 2.0 + 1e-3 + 1e-6, new, Some(&span));
        assert!(ring.dist(after, new).0 <= 125);
    }

    #[test]
    fn newer_span_supersedes() {
        let ring = Ring::new(10_000_000);
        let a = begin_updating_span(&ring, 1.0, RingValue(0), RingValue(100), 1e-3, None);
        let b = begin_updating_span(&ring, 1.0005, RingValue(100), RingValue(300), 1e-3, Some(&a));
        assert_eq!(b.id, 2);
        let c = chan();
        let r = c.remote_reading(&ring, 1.0015, RingValue(300), Some(&b));
        assert!(ring.dist(r, RingValue(300)).0 <= 125);
    }

    #[test]
    fn zero_adjustment_keeps_contract() {
        let ring = Ring::new(1_000_000);
        let span = begin_updating_span(&ring, 0.0, RingValue(42), RingValue(42), 1e-3, None);
        for i in 0..100 {
            let r = chan().remote_reading(&ring, i as f64 * 1e-5, RingValue(42), Some(&span));
            assert!(ring.dist(r, RingValue(42)).0 <= 125);
        }
    }

    #[test]
    fn rate_contract_between_reads() {
        let ring = Ring::new(u64::MAX / 4);
        let c = chan();
        let tick = 8e-9;
        for i in 0..1000 {
            let t = i as f64 * 3.7e-3;
            let dt = 2.1e-3;
            let s0 = RingValue((t / tick) as u64);
            let s1 = RingValue(((t + dt) / tick) as u64);
            let r0 = c.remote_reading(&ring, t, s0, None);
            let r1 = c.remote_reading(&ring, t + dt, s1, None);
            let adv = ring.sub(r1, r0).0 as f64 * tick;
            assert!((adv - dt).abs() <= 125.0 * tick + 2.0 * tick);
        }
    }

    #[test]
    fn alien_reads() {
        let ring = Ring::new(1 << 40);
        let m = AlienClockModel { eps2: 1e-3, tick: 8e-9, outages: vec![(5.0, 6.0)] };
        assert_eq!(m.alien_read_with_error(&ring, 1.0, 0.0).value, m.encode(&ring, 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..1000 {
            let t = 0.1 + i as f64 * 1e-3;
            let a = m.alien_read(&ring, t, &mut rng).value;
            let b = m.alien_read(&ring, t, &mut rng).value;
            assert!(ring.dist(a, b).0 as f64 * 8e-9 <= 1e-3 + 1e-8);
        }
        assert!(!m.alien_read(&ring, 5.5, &mut rng).available);
    }

    #[test]
    fn two_faced_differs_per_client() {
        let ring = Ring::new(1 << 30);
        let adv = CatalogAdversary::new(Strategy::TwoFaced, 1);
        let mk = |client| ReadView {
            server: 9,
            client,
            t: 1.0,
            client_clock: RingValue(1000),
            reference: RingValue(1000),
            own_clock: RingValue(5),
            window: 50,
        };
        assert_ne!(adv.fabricate_reading(&ring, &mk(0)), adv.fabricate_reading(&ring, &mk(1)));
    }

    #[test]
    fn strategy_names_round_trip() {
        for name in Strategy::CATALOG {
            let s: Strategy = name.parse().unwrap();
            assert_eq!(s.name(), name);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }

    #[test]
    fn random_faulty_respects_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = Topology::new(100, 3).with_random_faulty(3, 1, &mut rng);
        assert_eq!(t.terminals().filter(|&i| t.is_faulty(i)).count(), 3);
        assert_eq!(t.bridges().filter(|&i| t.is_faulty(i)).count(), 1);
        assert!(Topology::new(6, 3).with_faulty(&[0, 1], 1, 1).is_err());
    }
}
