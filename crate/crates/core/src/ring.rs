//! Circular clock values and the hardware/local/logical/alien clock hierarchy.
//!
//! Every clock value lives in `[0, tau_max)` ticks. Arithmetic wraps, and the
//! distance between two values is the shorter way around the ring.

use std::fmt;

/// A clock value on the ring, in ticks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct RingValue(pub u64);

impl RingValue {
    pub const ZERO: RingValue = RingValue(0);

    pub fn ticks(self) -> u64 {
        self.0
    }
}

impl fmt::Display for RingValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The ring `[[tau_max]]` that all clock values of one run share.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ring {
    tau_max: u64,
}

impl Ring {
    /// Panics if `tau_max` is zero.
    pub fn new(tau_max: u64) -> Self {
        assert!(tau_max > 0, "ring size must be positive");
        Ring { tau_max }
    }

    pub fn tau_max(&self) -> u64 {
        self.tau_max
    }

    /// Reduces any unwrapped tick count onto the ring.
    pub fn value(&self, ticks: u64) -> RingValue {
        RingValue(ticks % self.tau_max)
    }

    /// Reduces a signed tick count onto the ring.
    pub fn value_signed(&self, ticks: i64) -> RingValue {
        RingValue(ticks.rem_euclid(self.tau_max as i64) as u64)
    }

    pub fn contains(&self, v: RingValue) -> bool {
        v.0 < self.tau_max
    }

    /// `a ⊕ b`.
    pub fn add(&self, a: RingValue, b: RingValue) -> RingValue {
        debug_assert!(self.contains(a) && self.contains(b));
        let s = a.0 as u128 + b.0 as u128;
        RingValue((s % self.tau_max as u128) as u64)
    }

    /// `a ⊖ b`, always non-negative.
    pub fn sub(&self, a: RingValue, b: RingValue) -> RingValue {
        debug_assert!(self.contains(a) && self.contains(b));
        if a.0 >= b.0 {
            RingValue(a.0 - b.0)
        } else {
            RingValue(self.tau_max - (b.0 - a.0))
        }
    }

    /// Circular distance `min(a ⊖ b, b ⊖ a)`.
    pub fn dist(&self, a: RingValue, b: RingValue) -> RingValue {
        self.sub(a, b).min(self.sub(b, a))
    }

    /// Signed shortest displacement from `b` to `a`, in `(-tau_max/2, tau_max/2]`.
    pub fn signed_diff(&self, a: RingValue, b: RingValue) -> i64 {
        let d = self.sub(a, b).0;
        if d > self.tau_max / 2 {
            d as i64 - self.tau_max as i64
        } else {
            d as i64
        }
    }
}

/// Free function forms of the three ring operators.
pub fn wrap_add(ring: &Ring, a: RingValue, b: RingValue) -> RingValue {
    ring.add(a, b)
}

pub fn wrap_sub(ring: &Ring, a: RingValue, b: RingValue) -> RingValue {
    ring.sub(a, b)
}

pub fn ring_dist(ring: &Ring, a: RingValue, b: RingValue) -> RingValue {
    ring.dist(a, b)
}

/// A drifting tick counter, integrated against real time.
///
/// The clock is piecewise constant-rate: with jitter disabled there is one
/// segment for the whole run, otherwise the rate is redrawn every
/// `segment` seconds from a deterministic stream. Either way every actual
/// tick lasts between `(1-rho)T_H` and `(1+rho)T_H`.
#[derive(Debug, Clone)]
pub struct HardwareClock {
    nominal_tick: f64,
    rho: f64,
    /// Unwrapped tick count at real time zero, plus the fractional phase.
    origin: f64,
    drift: DriftModel,
    /// Cumulative tick counts at each segment boundary (jitter mode only).
    prefix: Vec<f64>,
}

#[derive(Debug, Clone)]
enum DriftModel {
    Constant(f64),
    Jitter { segment: f64, seed: u64 },
}

impl HardwareClock {
    /// A clock whose ticks last `nominal_tick * (1 + drift)` seconds.
    pub fn constant(nominal_tick: f64, rho: f64, drift: f64, origin_ticks: f64) -> Self {
        assert!(drift.abs() <= rho, "drift outside [-rho, rho]");
        HardwareClock {
            nominal_tick,
            rho,
            origin: origin_ticks,
            drift: DriftModel::Constant(drift),
            prefix: Vec::new(),
        }
    }

    /// A clock whose drift is redrawn uniformly in `[-rho, rho]` every `segment` seconds.
    pub fn jitter(nominal_tick: f64, rho: f64, segment: f64, seed: u64, origin_ticks: f64) -> Self {
        assert!(segment > 0.0);
        HardwareClock {
            nominal_tick,
            rho,
            origin: origin_ticks,
            drift: DriftModel::Jitter { segment, seed },
            prefix: vec![0.0],
        }
    }

    pub fn nominal_tick(&self) -> f64 {
        self.nominal_tick
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    fn segment_drift(&self, idx: usize) -> f64 {
        match self.drift {
            DriftModel::Constant(d) => d,
            DriftModel::Jitter { seed, .. } => {
                let u = crate::netmodel::unit_hash(seed, idx as u64, 0x6a09);
                self.rho * (2.0 * u - 1.0)
            }
        }
    }

    /// Ticks per second in segment `idx`.
    fn rate(&self, idx: usize) -> f64 {
        1.0 / (self.nominal_tick * (1.0 + self.segment_drift(idx)))
    }

    fn ensure_prefix(&mut self, idx: usize) {
        if let DriftModel::Jitter { segment, .. } = self.drift {
            while self.prefix.len() <= idx {
                let k = self.prefix.len() - 1;
                let next = self.prefix[k] + segment * self.rate(k);
                self.prefix.push(next);
            }
        }
    }

    /// Fractional unwrapped tick count at real time `t >= 0`.
    pub fn ticks_at_exact(&mut self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self.drift {
            DriftModel::Constant(_) => self.origin + t * self.rate(0),
            DriftModel::Jitter { segment, .. } => {
                let idx = (t / segment).floor() as usize;
                self.ensure_prefix(idx);
                self.origin + self.prefix[idx] + (t - idx as f64 * segment) * self.rate(idx)
            }
        }
    }

    /// Unwrapped reading `H(t)` in whole ticks.
    pub fn ticks_at(&mut self, t: f64) -> u64 {
        self.ticks_at_exact(t).floor() as u64
    }

    /// Earliest real time at which the unwrapped reading reaches `n`.
    pub fn time_of_tick(&mut self, n: u64) -> f64 {
        let target = n as f64 - self.origin;
        if target <= 0.0 {
            return 0.0;
        }
        match self.drift {
            DriftModel::Constant(_) => target / self.rate(0),
            DriftModel::Jitter { segment, .. } => {
                let mut idx = 0usize;
                loop {
                    self.ensure_prefix(idx + 1);
                    if self.prefix[idx + 1] >= target {
                        return idx as f64 * segment + (target - self.prefix[idx]) / self.rate(idx);
                    }
                    idx += 1;
                }
            }
        }
    }

    /// Largest drift magnitude the clock can exhibit.
    pub fn max_drift(&self) -> f64 {
        match self.drift {
            DriftModel::Constant(d) => d.abs(),
            DriftModel::Jitter { .. } => self.rho,
        }
    }
}

/// The writable offsets that turn a hardware reading into C, L and Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClockSet {
    pub local_offset: RingValue,
    pub logical_offset: RingValue,
    pub alien_offset: RingValue,
}

impl ClockSet {
    /// `C = H + offset^C`.
    pub fn local(&self, ring: &Ring, h: RingValue) -> RingValue {
        ring.add(h, self.local_offset)
    }

    /// `L = C + offset`.
    pub fn logical(&self, ring: &Ring, h: RingValue) -> RingValue {
        ring.add(self.local(ring, h), self.logical_offset)
    }

    /// `Y = H + offset^Y`.
    pub fn alien(&self, ring: &Ring, h: RingValue) -> RingValue {
        ring.add(h, self.alien_offset)
    }

    /// Sets the local offset so that `C` reads `target` at hardware reading `h`.
    pub fn write_local(&mut self, ring: &Ring, h: RingValue, target: RingValue) {
        self.local_offset = ring.sub(target, h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operator_examples() {
        let r = Ring::new(100);
        assert_eq!(r.add(RingValue(0), RingValue(0)), RingValue(0));
        assert_eq!(r.add(RingValue(70), RingValue(50)), RingValue(20));
        assert_eq!(r.add(RingValue(99), RingValue(1)), RingValue(0));
        assert_eq!(r.sub(RingValue(5), RingValue(5)), RingValue(0));
        assert_eq!(r.sub(RingValue(3), RingValue(10)), RingValue(93));
        assert_eq!(r.sub(RingValue(10), RingValue(3)), RingValue(7));
        assert_eq!(r.dist(RingValue(95), RingValue(5)), RingValue(10));
        assert_eq!(r.dist(RingValue(20), RingValue(60)), RingValue(40));
        assert_eq!(r.dist(RingValue(42), RingValue(42)), RingValue(0));
    }

    #[test]
    fn exhaustive_small_ring() {
        for m in 1..=12u64 {
            let r = Ring::new(m);
            for a in 0..m {
                for b in 0..m {
                    let (va, vb) = (RingValue(a), RingValue(b));
                    assert_eq!(r.dist(va, vb), r.dist(vb, va));
                    assert!(r.dist(va, vb).0 <= m / 2);
                    assert_eq!(r.sub(r.add(va, vb), vb), va);
                    for c in 0..m {
                        let vc = RingValue(c);
                        assert!(r.dist(va, vc).0 <= r.dist(va, vb).0 + r.dist(vb, vc).0);
                    }
                }
            }
        }
    }

    #[test]
    fn signed_diff_is_shortest() {
        let r = Ring::new(100);
        assert_eq!(r.signed_diff(RingValue(5), RingValue(95)), 10);
        assert_eq!(r.signed_diff(RingValue(95), RingValue(5)), -10);
        assert_eq!(r.signed_diff(RingValue(60), RingValue(10)), 50);
    }

    #[test]
    fn clock_set_advances_with_hardware() {
        let r = Ring::new(1000);
        let cs = ClockSet { local_offset: RingValue(990), logical_offset: RingValue(7), alien_offset: RingValue(500) };
        let h0 = RingValue(20);
        let h1 = r.add(h0, RingValue(35));
        assert_eq!(r.sub(cs.local(&r, h1), cs.local(&r, h0)), RingValue(35));
        assert_eq!(r.sub(cs.logical(&r, h1), cs.logical(&r, h0)), RingValue(35));
        assert_eq!(r.sub(cs.alien(&r, h1), cs.alien(&r, h0)), RingValue(35));
    }

    #[test]
    fn write_local_hits_target() {
        let r = Ring::new(1000);
        let mut cs = ClockSet::default();
        cs.write_local(&r, RingValue(800), RingValue(3));
        assert_eq!(cs.local(&r, RingValue(800)), RingValue(3));
    }

    #[test]
    fn hardware_clock_inverse() {
        let mut c = HardwareClock::constant(8e-9, 1e-4, 5e-5, 12.25);
        for n in [13u64, 1_000, 123_456_789] {
            let t = c.time_of_tick(n);
            assert!(c.ticks_at(t + 1e-12) >= n);
            assert!(c.ticks_at(t - 1e-9) < n);
        }
        let mut j = HardwareClock::jitter(1e-3, 1e-2, 0.05, 9, 0.0);
        let mut prev = 0;
        for i in 0..2000 {
            let t = i as f64 * 0.0013;
            let h = j.ticks_at(t);
            assert!(h >= prev);
            prev = h;
            if h > 0 {
                assert!(j.time_of_tick(h) <= t + 1e-9);
            }
        }
    }

    #[test]
    fn hardware_rate_within_bound() {
        let mut j = HardwareClock::jitter(1e-3, 1e-2, 0.05, 3, 0.0);
        for i in 0..200 {
            let t0 = i as f64 * 0.05;
            let dt = 0.05;
            let n = j.ticks_at_exact(t0 + dt) - j.ticks_at_exact(t0);
            let per_tick = dt / n;
            assert!((0.99e-3 - 1e-12..=1.01e-3 + 1e-12).contains(&per_tick));
        }
    }
}
