//! Coin-level reduced model of stabilization from arbitrary states.
//!
//! Time advances only at the instants where bridges run the corrector's
//! coin line, with the simplified evidence `alerted ∧ coin`. A bridge whose
//! coin lands heads merges its local clock with the alien clock; a round in
//! which every nonfaulty bridge already sits within `delta10` of the others
//! and every coin lands tails leaves a synchronization point for the strong
//! synchronizer, after which convergence is deterministic.

use crate::engine::max_ring_spread;
use crate::netmodel::hash3;
use crate::params::{DerivedParams, SystemParams};
use crate::stats::{histogram, summarize, Histogram, Summary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Which abstraction of the corrector rounds to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReducedMode {
    /// One decision per bridge every `k_pls tau0`; uniform initial clocks.
    #[default]
    Average,
    /// Epochs of `3 k_pls tau0` with the worst-case coin budget, so each
    /// epoch succeeds with probability exactly `eta1`.
    WorstCase,
}

/// Subprocess of a reduced run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    RandomizedInitial,
    DeterministicConvergence,
    Stabilized,
}

/// Per nonfaulty bridge flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BridgeFlags {
    pub alerted: bool,
    pub pulsed: bool,
    pub merged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedState {
    pub phase: Phase,
    pub bridges: Vec<BridgeFlags>,
    /// Local clock minus alien clock per bridge, in ticks on the ring.
    pub coarse: Vec<u64>,
    pub elapsed: f64,
}

impl ReducedState {
    fn advance(&mut self, next: Phase) {
        assert!(next >= self.phase, "phase moved backwards");
        self.phase = next;
    }
}

/// Outcome of one reduced run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedRun {
    pub seed: u64,
    /// Seconds from the arbitrary start to stabilization.
    pub time: f64,
    /// Decision instants (average mode) or epochs (worst case) used.
    pub rounds: u64,
}

/// Constants a run needs, in seconds unless noted.
#[derive(Debug, Clone, Copy)]
struct Timing {
    cycle: f64,
    delta_d: f64,
    delta_c: f64,
    sigma14: f64,
    converge: f64,
    window_ticks: u64,
    tau_max: u64,
    bridges: usize,
}

impl Timing {
    fn new(sys: &SystemParams<f64>, d: &DerivedParams<f64>) -> Self {
        let cycle = d.k_pls as f64 * d.tau0;
        Timing {
            cycle,
            delta_d: sys.delta_d,
            delta_c: d.big_delta_c,
            sigma14: d.s(14),
            converge: d.s(14) + d.k_pls as f64 * d.t_max,
            window_ticks: d.to_ticks(d.d(10)),
            tau_max: d.tau_max,
            bridges: sys.n1 - sys.f1,
        }
    }

    /// First instant at or after the watchdogs have expired whose phase is
    /// half a pulse cycle.
    fn first_instant(&self, rng: &mut ChaCha8Rng) -> f64 {
        let t_c = rng.gen::<f64>() * self.delta_c;
        let phase = rng.gen::<f64>() * self.cycle;
        let start = t_c + self.delta_d;
        let half = self.cycle / 2.0;
        let k = ((start + phase - half) / self.cycle).ceil();
        k * self.cycle + half - phase
    }
}

/// One worst-case epoch: the first bridge needs a head, every other bridge
/// two heads, and then every bridge a tail.
pub fn epoch_success(rng: &mut impl Rng, bridges: usize) -> bool {
    let heads = 2 * bridges - 1;
    (0..heads).all(|_| rng.gen::<bool>()) && (0..bridges).all(|_| !rng.gen::<bool>())
}

/// Runs the reduced model once.
pub fn run_reduced(sys: &SystemParams<f64>, derived: &DerivedParams<f64>, mode: ReducedMode, seed: u64) -> ReducedRun {
    let tm = Timing::new(sys, derived);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t0 = tm.first_instant(&mut rng);
    let (time, rounds) = match mode {
        ReducedMode::Average => run_average(&tm, &mut rng, t0),
        ReducedMode::WorstCase => {
            let mut n = 1u64;
            while !epoch_success(&mut rng, tm.bridges) {
                n += 1;
            }
            (t0 + n as f64 * 3.0 * tm.cycle + tm.sigma14, n)
        }
    };
    ReducedRun { seed, time, rounds }
}

fn run_average(tm: &Timing, rng: &mut ChaCha8Rng, t0: f64) -> (f64, u64) {
    let mut st = ReducedState {
        phase: Phase::RandomizedInitial,
        bridges: vec![BridgeFlags { alerted: true, pulsed: false, merged: false }; tm.bridges],
        coarse: (0..tm.bridges).map(|_| rng.gen_range(0..tm.tau_max)).collect(),
        elapsed: t0,
    };
    let mut i = 0u64;
    loop {
        let aligned = max_ring_spread(&st.coarse, tm.tau_max) <= tm.window_ticks;
        let mut all_tails = true;
        for (b, c) in st.bridges.iter_mut().zip(st.coarse.iter_mut()) {
            let coin = rng.gen::<bool>();
            if b.alerted && coin {
                b.merged = true;
                *c = 0;
                all_tails = false;
            }
        }
        if aligned && all_tails {
            break;
        }
        i += 1;
        st.elapsed += tm.cycle;
    }
    st.advance(Phase::DeterministicConvergence);
    st.elapsed += tm.converge;
    for b in &mut st.bridges {
        b.alerted = false;
        b.pulsed = true;
    }
    st.advance(Phase::Stabilized);
    (st.elapsed, i + 1)
}

/// Sample of reduced runs with its summary and histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    pub runs: Vec<ReducedRun>,
    pub summary: Summary,
    pub histogram: Histogram,
}

/// Seed of run `run_id` under master seed `seed`.
pub fn run_seed(seed: u64, run_id: u64) -> u64 {
    hash3(seed, run_id, 0x7ed)
}

/// Runs `n_runs` independent reduced runs; `None` when `n_runs` is zero.
pub fn distribution(
    sys: &SystemParams<f64>,
    derived: &DerivedParams<f64>,
    mode: ReducedMode,
    n_runs: usize,
    seed: u64,
    bins: usize,
) -> Option<Distribution> {
    let runs: Vec<ReducedRun> =
        (0..n_runs as u64).into_par_iter().map(|i| run_reduced(sys, derived, mode, run_seed(seed, i))).collect();
    let times: Vec<f64> = runs.iter().map(|r| r.time).collect();
    let summary = summarize(&times)?;
    let histogram = histogram(&times, bins);
    Some(Distribution { runs, summary, histogram })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{derive_params, preset, Case};

    #[test]
    fn worst_case_epoch_rate_is_eta1() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 200_000;
        let hits = (0..n).filter(|_| epoch_success(&mut rng, 2)).count() as f64;
        let p = 1.0 / 32.0;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits / n as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn runs_are_reproducible_and_seed_dependent() {
        let sys = preset(Case::IV);
        let d = derive_params(&sys).unwrap();
        let a = run_reduced(&sys, &d, ReducedMode::Average, 4);
        assert_eq!(a, run_reduced(&sys, &d, ReducedMode::Average, 4));
        let x = distribution(&sys, &d, ReducedMode::Average, 50, 1, 10).unwrap();
        let y = distribution(&sys, &d, ReducedMode::Average, 50, 2, 10).unwrap();
        assert_ne!(x.runs, y.runs);
    }

    #[test]
    fn lower_bound_is_the_convergence_tail() {
        let sys = preset(Case::III);
        let d = derive_params(&sys).unwrap();
        let floor = d.s(14) + d.k_pls as f64 * d.t_max + sys.delta_d;
        for s in 0..200 {
            assert!(run_reduced(&sys, &d, ReducedMode::Average, s).time > floor);
        }
    }

    #[test]
    fn single_run_distribution_is_degenerate() {
        let sys = preset(Case::I);
        let d = derive_params(&sys).unwrap();
        let dist = distribution(&sys, &d, ReducedMode::Average, 1, 9, 20).unwrap();
        let t = dist.runs[0].time;
        assert_eq!((dist.summary.mean, dist.summary.p50, dist.summary.max), (t, t, t));
        assert!(distribution(&sys, &d, ReducedMode::Average, 0, 9, 20).is_none());
    }
}
