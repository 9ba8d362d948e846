//! Per-node protocol logic: the selection functions, anchored reads, the
//! pulse window bookkeeping, the detectors and the write-priority lattice.
//!
//! Everything here is a pure function of its inputs; the engine decides
//! when each step runs and supplies the readings.

use crate::netmodel::{NodeId, Role};
use crate::ring::{ClockSet, Ring, RingValue};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("expected {expected} values, got {got}")]
    WrongArity { expected: usize, got: usize },
}

fn check_arity(values: &[u64], expected: usize) -> Result<(), SelectError> {
    if values.len() != expected || expected == 0 {
        return Err(SelectError::WrongArity { expected, got: values.len() });
    }
    Ok(())
}

/// Lower median (the `ceil(n1/2)`-th smallest) of anchored values.
pub fn median_select(values: &[u64], n1: usize) -> Result<u64, SelectError> {
    check_arity(values, n1)?;
    let mut v = values.to_vec();
    let idx = n1.div_ceil(2) - 1;
    Ok(*v.select_nth_unstable(idx).1)
}

/// Fault-tolerant average: floor midpoint of the `(f0+1)`-th smallest and
/// `(f0+1)`-th largest anchored values.
pub fn fta_select(values: &[u64], n0: usize, f0: usize) -> Result<u64, SelectError> {
    check_arity(values, n0)?;
    if 2 * f0 >= n0 {
        return Err(SelectError::WrongArity { expected: 2 * f0 + 1, got: n0 });
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let (lo, hi) = (v[f0], v[n0 - 1 - f0]);
    Ok(lo + (hi - lo) / 2)
}

/// `min(reading ⊖ (reference ⊖ delta), 2 delta)`: places a reading in
/// `[0, 2 delta]` relative to the reference, clipping anything outside.
pub fn clip_anchor(ring: &Ring, reading: RingValue, reference: RingValue, delta: RingValue) -> RingValue {
    let anchored = ring.sub(reading, ring.sub(reference, delta));
    RingValue(anchored.0.min(2 * delta.0))
}

/// Result of a logical-clock computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadOutcome {
    pub offset: RingValue,
    /// Entries that fell outside the anchoring window.
    pub clipped: usize,
}

fn count_outside(anchored: &[u64], delta: u64) -> usize {
    anchored.iter().filter(|&&a| a > 2 * delta).count()
}

/// One-shot read of all bridge clocks by a terminal with a caller-chosen
/// bound `delta`. Produces a logical offset only.
pub fn bft_read_step(
    ring: &Ring,
    own: RingValue,
    readings: &[RingValue],
    delta: RingValue,
    n1: usize,
) -> Result<ReadOutcome, SelectError> {
    let base = ring.sub(own, delta);
    let anchored: Vec<u64> = readings.iter().map(|&r| ring.sub(r, base).0).collect();
    let m = median_select(&anchored, n1)?;
    Ok(ReadOutcome {
        offset: ring.sub(RingValue(m % ring.tau_max()), delta),
        clipped: count_outside(&anchored, delta.0),
    })
}

/// Terminal round of the basic synchronizer: anchored median over the
/// bridge readings with window `delta6`.
pub fn terminal_sync_offset(
    ring: &Ring,
    own: RingValue,
    readings: &[RingValue],
    delta6: RingValue,
    n1: usize,
) -> Result<ReadOutcome, SelectError> {
    let base = ring.sub(own, delta6);
    let raw: Vec<u64> = readings.iter().map(|&r| ring.sub(r, base).0).collect();
    let anchored: Vec<u64> = readings.iter().map(|&r| clip_anchor(ring, r, own, delta6).0).collect();
    let m = median_select(&anchored, n1)?;
    Ok(ReadOutcome { offset: ring.sub(RingValue(m), delta6), clipped: count_outside(&raw, delta6.0) })
}

/// Bridge round of the basic synchronizer: anchored FTA over terminal
/// readings with window `delta5`. Terminals outside the received set
/// (`None`) contribute 0.
pub fn bridge_sync_offset(
    ring: &Ring,
    own: RingValue,
    readings: &[Option<RingValue>],
    delta5: RingValue,
    n0: usize,
    f0: usize,
) -> Result<ReadOutcome, SelectError> {
    let base = ring.sub(own, delta5);
    let mut clipped = 0;
    let anchored: Vec<u64> = readings
        .iter()
        .map(|r| match r {
            Some(r) => {
                clipped += usize::from(ring.sub(*r, base).0 > 2 * delta5.0);
                clip_anchor(ring, *r, own, delta5).0
            }
            None => 0,
        })
        .collect();
    let m = fta_select(&anchored, n0, f0)?;
    Ok(ReadOutcome { offset: ring.sub(RingValue(m), delta5), clipped })
}

/// Anchor `tau' = k* k_pls tau0 + delta` of a pulse-driven write.
pub fn pulse_anchor(ring: &Ring, k_star: u64, cycle: u64, delta: u64) -> RingValue {
    ring.add(ring.value(k_star.wrapping_mul(cycle) % ring.tau_max()), ring.value(delta))
}

/// Bridge pulse write: gated FTA over terminal readings relative to
/// `tau_prime`; entries beyond `delta7` count as 0.
pub fn b1_target(
    ring: &Ring,
    tau_prime: RingValue,
    readings: &[RingValue],
    delta7: u64,
    n0: usize,
    f0: usize,
) -> Result<RingValue, SelectError> {
    let gated: Vec<u64> = readings
        .iter()
        .map(|&r| {
            let a = ring.sub(r, tau_prime).0;
            if a <= delta7 {
                a
            } else {
                0
            }
        })
        .collect();
    let m = fta_select(&gated, n0, f0)?;
    Ok(ring.add(tau_prime, RingValue(m)))
}

/// Terminal pulse write: median of bridge readings relative to `tau_prime`.
pub fn b0_target(
    ring: &Ring,
    tau_prime: RingValue,
    readings: &[RingValue],
    n1: usize,
) -> Result<RingValue, SelectError> {
    let rel: Vec<u64> = readings.iter().map(|&r| ring.sub(r, tau_prime).0).collect();
    let m = median_select(&rel, n1)?;
    Ok(ring.add(tau_prime, RingValue(m)))
}

/// Which form of the resynchronization evidence a bridge evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EorMode {
    /// `alerted ∧ (¬pulsed ∨ coin)`.
    #[default]
    Full,
    /// `alerted ∧ coin`.
    Simplified,
}

pub fn eor(mode: EorMode, alerted: bool, pulsed: bool, coin: bool) -> bool {
    match mode {
        EorMode::Full => alerted && (!pulsed || coin),
        EorMode::Simplified => alerted && coin,
    }
}

/// Origin of a clock write, in decreasing priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum WriteSource {
    PulseSync,
    Corrector,
    BasicSync,
}

/// Whether a write from `source` may reach the clocks given the two
/// protection flags: one held by the pulse blocks until the next
/// `tau0` boundary, one held by the corrector until its next execution.
pub fn write_allowed(source: WriteSource, protect_pulse: bool, protect_corrector: bool) -> bool {
    match source {
        WriteSource::PulseSync => true,
        WriteSource::Corrector => !protect_pulse,
        WriteSource::BasicSync => !protect_pulse && !protect_corrector,
    }
}

/// Pulse receipts keyed by pulse index, keeping each sender's latest
/// receipt in unwrapped hardware ticks.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PulseLog {
    by_k: BTreeMap<u64, Vec<(NodeId, u64)>>,
}

impl PulseLog {
    pub fn record(&mut self, k: u64, from: NodeId, h: u64) {
        let entries = self.by_k.entry(k).or_default();
        match entries.iter_mut().find(|(s, _)| *s == from) {
            Some(e) => e.1 = e.1.max(h),
            None => entries.push((from, h)),
        }
    }

    /// Distinct senders of pulse-`k` received in the latest `window` ticks.
    pub fn count(&self, k: u64, now: u64, window: u64) -> usize {
        self.by_k.get(&k).map_or(0, |e| e.iter().filter(|&&(_, h)| h <= now && now - h < window).count())
    }

    /// Drops receipts that no window of length `max_window` can still count.
    pub fn prune(&mut self, now: u64, max_window: u64) {
        self.by_k.retain(|_, e| {
            e.retain(|&(_, h)| now.saturating_sub(h) < max_window);
            !e.is_empty()
        });
    }

    pub fn len(&self) -> usize {
        self.by_k.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.by_k.is_empty()
    }
}

/// Watchdog value set when a clique is observed at hardware reading `h`.
pub fn detector_arm(ring: &Ring, h: RingValue, delta14: u64) -> RingValue {
    ring.add(h, ring.value(delta14 - 1))
}

/// Watchdog expiry predicate `tau_d ⊖ H > delta14`.
pub fn detector_expired(ring: &Ring, tau_d: RingValue, h: RingValue, delta14: u64) -> bool {
    ring.sub(tau_d, h).0 > delta14
}

/// Clearing predicate of the clique detector.
pub fn q_detector_clears(c: RingValue, cycle: u64, q_clear: u64) -> bool {
    c.0 % cycle > q_clear
}

/// Pulse-send guard: at least `delta15` ticks since the last send.
pub fn pulse_guard(h_now: u64, last_sent: u64, delta15: u64) -> bool {
    h_now.saturating_sub(last_sent) >= delta15
}

/// Relay predicate: the pulse timer was set within the last `delta12` ticks.
pub fn relay_due(h_now: u64, timer_set_at: Option<u64>, delta12: u64) -> bool {
    timer_set_at.is_some_and(|s| s >= h_now.saturating_sub(delta12))
}

/// Mutable protocol state of one node. Timers hold unwrapped
/// hardware-tick deadlines; `None` is the reset sentinel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeState {
    pub role: Role,
    pub clocks: ClockSet,
    pub timer_w: Option<u64>,
    pub timer_w_star: Option<u64>,
    /// Unwrapped hardware tick at which `timer_w_star` was last set.
    pub timer_w_star_set_at: Option<u64>,
    /// Watchdog; `None` stands for `tau_max`.
    pub timer_d: Option<RingValue>,
    pub pulsed: bool,
    pub protect_pulse: bool,
    pub protect_corrector: bool,
    pub coin: bool,
    pub k_star: u64,
    pub pulse_log: PulseLog,
    /// Unwrapped hardware tick of the last pulse sent (or of boot).
    pub last_pulse_sent_at: u64,
}

impl NodeState {
    pub fn new(role: Role, boot_tick: u64) -> Self {
        NodeState {
            role,
            clocks: ClockSet::default(),
            timer_w: None,
            timer_w_star: None,
            timer_w_star_set_at: None,
            timer_d: None,
            pulsed: false,
            protect_pulse: false,
            protect_corrector: false,
            coin: false,
            k_star: 0,
            pulse_log: PulseLog::default(),
            last_pulse_sent_at: boot_tick,
        }
    }

    pub fn alerted(&self) -> bool {
        self.timer_d.is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_examples() {
        assert_eq!(median_select(&[7, 7, 7], 3), Ok(7));
        assert_eq!(median_select(&[5, 7, 1000], 3), Ok(7));
        assert_eq!(median_select(&[1, 2, 3, 900, 901], 5), Ok(3));
        assert_eq!(median_select(&[4, 1, 3, 2], 4), Ok(2));
        assert!(median_select(&[1, 2], 3).is_err());
    }

    #[test]
    fn fta_examples() {
        assert_eq!(fta_select(&[9; 6], 6, 1), Ok(9));
        assert_eq!(fta_select(&[0, 1, 2, 3, 5, 100], 6, 1), Ok(3));
        let mut v = vec![10u64; 97];
        v.extend([1_000_000; 3]);
        assert_eq!(fta_select(&v, 100, 3), Ok(10));
        assert!(fta_select(&[1, 2, 3], 6, 1).is_err());
    }

    #[test]
    fn clip_examples() {
        let r = Ring::new(1_000_000);
        let d = RingValue(100);
        let x = RingValue(500_000);
        assert_eq!(clip_anchor(&r, x, x, d), d);
        assert_eq!(clip_anchor(&r, r.add(x, RingValue(300)), x, d), RingValue(200));
        assert_eq!(clip_anchor(&r, r.sub(x, RingValue(50)), x, d), RingValue(50));
        assert_eq!(clip_anchor(&r, RingValue(999_990), RingValue(5), d), RingValue(85));
        assert_eq!(clip_anchor(&r, RingValue(10), RingValue(999_990), d), RingValue(120));
    }

    #[test]
    fn synchronized_reads_give_zero_offset() {
        let r = Ring::new(1 << 40);
        let c = RingValue(123_456);
        let t = terminal_sync_offset(&r, c, &[c, c, c], RingValue(1000), 3).unwrap();
        assert_eq!(t.offset, RingValue(0));
        let b = bridge_sync_offset(&r, c, &[Some(c); 6], RingValue(1000), 6, 1).unwrap();
        assert_eq!(b.offset, RingValue(0));
        let q = bft_read_step(&r, c, &[c, c, c], RingValue(1000), 3).unwrap();
        assert_eq!(q.offset, RingValue(0));
    }

    #[test]
    fn faulty_bridge_cannot_drag_terminal() {
        let r = Ring::new(1 << 40);
        let c = RingValue(1_000_000);
        let reads = [r.add(c, RingValue(10)), r.add(c, RingValue(30)), RingValue(17)];
        let out = terminal_sync_offset(&r, c, &reads, RingValue(1000), 3).unwrap();
        let off = r.signed_diff(out.offset, RingValue(0));
        assert!((10..=30).contains(&off), "{off}");
        assert_eq!(out.clipped, 1);
    }

    #[test]
    fn too_small_window_reports_clipping() {
        let r = Ring::new(1 << 40);
        let c = RingValue(1_000_000);
        let reads = [r.add(c, RingValue(500)); 3];
        let out = bft_read_step(&r, c, &reads, RingValue(100), 3).unwrap();
        assert_eq!(out.clipped, 3);
    }

    #[test]
    fn non_members_count_zero() {
        let r = Ring::new(1 << 40);
        let c = RingValue(1_000_000);
        let mut reads = vec![Some(r.add(c, RingValue(40))); 4];
        reads.extend([None, None]);
        let out = bridge_sync_offset(&r, c, &reads, RingValue(100), 6, 1).unwrap();
        // anchored {0, 0, 140, 140, 140, 140}: second smallest 0, second largest 140
        assert_eq!(out.offset, r.sub(RingValue(70), RingValue(100)));
    }

    #[test]
    fn b1_gating() {
        let r = Ring::new(1 << 40);
        let tp = RingValue(5_000_000);
        let d7 = 1000;
        let mut reads = vec![r.add(tp, RingValue(100)); 4];
        reads.push(r.add(tp, RingValue(50_000)));
        reads.push(r.sub(tp, RingValue(3)));
        // gated {100, 100, 100, 100, 0, 0}: FTA of 0 and 100
        assert_eq!(b1_target(&r, tp, &reads, d7, 6, 1).unwrap(), r.add(tp, RingValue(50)));
        let same = vec![r.add(tp, RingValue(d7 / 2)); 6];
        assert_eq!(b1_target(&r, tp, &same, d7, 6, 1).unwrap(), r.add(tp, RingValue(d7 / 2)));
    }

    #[test]
    fn b0_median() {
        let r = Ring::new(1 << 40);
        let tp = RingValue(77);
        let reads = [r.add(tp, RingValue(9)); 3];
        assert_eq!(b0_target(&r, tp, &reads, 3).unwrap(), r.add(tp, RingValue(9)));
        let mixed = [r.add(tp, RingValue(9)), r.add(tp, RingValue(12)), RingValue(1 << 39)];
        assert_eq!(b0_target(&r, tp, &mixed, 3).unwrap(), r.add(tp, RingValue(12)));
    }

    #[test]
    fn eor_table() {
        for coin in [false, true] {
            assert!(!eor(EorMode::Full, false, false, coin));
            assert!(eor(EorMode::Full, true, false, coin));
            assert_eq!(eor(EorMode::Full, true, true, coin), coin);
            assert_eq!(eor(EorMode::Simplified, true, false, coin), coin);
        }
    }

    #[test]
    fn priority_lattice() {
        use WriteSource::*;
        for pp in [false, true] {
            for pc in [false, true] {
                assert!(write_allowed(PulseSync, pp, pc));
                assert_eq!(write_allowed(Corrector, pp, pc), !pp);
                assert_eq!(write_allowed(BasicSync, pp, pc), !pp && !pc);
                if write_allowed(BasicSync, pp, pc) {
                    assert!(write_allowed(Corrector, pp, pc));
                }
            }
        }
        assert!(PulseSync < Corrector && Corrector < BasicSync);
    }

    #[test]
    fn pulse_window_counts_distinct_senders() {
        let mut log = PulseLog::default();
        for s in 0..4 {
            log.record(7, s, 100 + s as u64);
        }
        log.record(7, 0, 104);
        assert_eq!(log.count(7, 105, 10), 4);
        assert_eq!(log.count(7, 112, 10), 2);
        assert_eq!(log.count(8, 105, 10), 0);
        log.record(8, 1, 50);
        log.prune(105, 10);
        assert_eq!(log.count(8, 105, 1000), 0);
        assert_eq!(log.len(), 4);
    }

    #[test]
    fn watchdog() {
        let r = Ring::new(1000);
        let d = detector_arm(&r, RingValue(990), 100);
        assert_eq!(d, RingValue(89));
        assert!(!detector_expired(&r, d, RingValue(990), 100));
        assert!(!detector_expired(&r, d, RingValue(89), 100));
        assert!(detector_expired(&r, d, RingValue(90), 100));
    }

    #[test]
    fn guards() {
        assert!(q_detector_clears(RingValue(1_000 + 51), 1_000, 50));
        assert!(!q_detector_clears(RingValue(1_050), 1_000, 50));
        assert!(pulse_guard(200, 100, 100));
        assert!(!pulse_guard(199, 100, 100));
        assert!(relay_due(1000, Some(950), 100));
        assert!(!relay_due(1000, Some(899), 100));
        assert!(!relay_due(1000, None, 100));
    }
}
