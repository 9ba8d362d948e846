use approx::assert_relative_eq;
use isbft::engine::{max_ring_spread, pulse_gap_violations, run, separation_violations, Scenario};
use isbft::netmodel::Strategy as Adversary;
use isbft::params::{derive_params, preset, validate, Case, SystemParams};
use isbft::protocol::{fta_select, median_select};
use isbft::ring::Ring;
use proptest::prelude::*;

/// k-th smallest (one-based) by counting, without sorting.
fn kth_smallest(v: &[u64], k: usize) -> u64 {
    *v.iter().filter(|&&x| v.iter().filter(|&&y| y <= x).count() >= k).min().unwrap()
}

fn honest_and_faulty(n: usize, f: usize) -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    (prop::collection::vec(0u64..1_000_000, n - f), prop::collection::vec(any::<u64>().prop_map(|x| x >> 1), 0..=f))
}

proptest! {
    #[test]
    fn fta_stays_inside_honest_range((h, bad) in honest_and_faulty(6, 1)) {
        let mut all = h.clone();
        all.extend(&bad);
        all.resize(6, *h.last().unwrap());
        let got = fta_select(&all, 6, 1).unwrap();
        prop_assert!(got >= *h.iter().min().unwrap() && got <= *h.iter().max().unwrap());
        let (lo, hi) = (kth_smallest(&all, 2), kth_smallest(&all, 5));
        prop_assert_eq!(got, lo + (hi - lo) / 2);
    }

    #[test]
    fn median_stays_inside_honest_range((h, bad) in honest_and_faulty(5, 2)) {
        let mut all = h.clone();
        all.extend(&bad);
        all.resize(5, h[0]);
        let got = median_select(&all, 5).unwrap();
        prop_assert!(got >= *h.iter().min().unwrap() && got <= *h.iter().max().unwrap());
        prop_assert_eq!(got, kth_smallest(&all, 3));
    }

    #[test]
    fn ring_sub_inverts_add(tau in 2u64..1 << 40, a in any::<u64>(), b in any::<u64>()) {
        let r = Ring::new(tau);
        let (a, b) = (r.value(a), r.value(b));
        prop_assert_eq!(r.sub(r.add(a, b), b), a);
        prop_assert_eq!(r.dist(a, b), r.dist(b, a));
        prop_assert!(r.dist(a, b).0 <= tau / 2);
    }

    #[test]
    fn spread_is_rotation_invariant(tau in 2u64..100_000, shift in any::<u64>(), v in prop::collection::vec(any::<u64>(), 1..20)) {
        let v: Vec<u64> = v.iter().map(|x| x % tau).collect();
        let rotated: Vec<u64> = v.iter().map(|x| (x + shift % tau) % tau).collect();
        prop_assert_eq!(max_ring_spread(&v, tau), max_ring_spread(&rotated, tau));
    }
}

/// Slow-network configurations around the first two presets validate clean:
/// drift, reading precision and delays each scaled by 0.5 or 1.
#[test]
fn slow_network_grid_validates() {
    for case in [Case::I, Case::II] {
        for s_rho in [0.5, 1.0] {
            for s_eps in [0.5, 1.0] {
                for s_d in [0.5, 1.0] {
                    let base: SystemParams<f64> = preset(case);
                    let sys = SystemParams {
                        rho: base.rho * s_rho,
                        eps0: base.eps0 * s_eps,
                        delta_d: base.delta_d * s_d,
                        ..base
                    };
                    let d = derive_params(&sys).unwrap();
                    assert!(validate(&sys, &d).is_empty(), "{case:?} {s_rho} {s_eps} {s_d}");
                    let m = (sys.n1 - sys.f1) as i32;
                    assert_relative_eq!(d.eta1, 2f64.powi(1 - 3 * m), max_relative = 1e-12);
                }
            }
        }
    }
}

#[test]
fn engine_invariants_under_every_adversary() {
    let sys = preset(Case::IV);
    let d = derive_params(&sys).unwrap();
    for (i, name) in Adversary::CATALOG.iter().enumerate() {
        let s: Adversary = name.parse().unwrap();
        let m = run(&sys, &d, &Scenario::new(i as u64, 0.2).with_adversary(s)).unwrap();
        assert_eq!(m.causality_violations, 0, "{name}");
        assert_eq!(m.priority_violations, 0, "{name}");
        assert_eq!(separation_violations(&m.a1_instants, d.s(1), d.s(2)), 0, "{name}");
        assert_eq!(pulse_gap_violations(&m, d.to_ticks(d.d(15)) as f64 * d.tick / (1.0 + sys.rho)), 0, "{name}");
    }
}

#[test]
fn synchronized_case_four_stays_within_eps1() {
    let sys = preset(Case::IV);
    let d = derive_params(&sys).unwrap();
    for seed in 0..3 {
        let sc = Scenario::new(seed, 0.3).synchronized(d.eps_b).with_adversary(Adversary::TwoFaced);
        let m = run(&sys, &d, &sc).unwrap();
        let worst = m.precision_trace.iter().copied().fold(0.0, f64::max);
        assert!(worst <= d.eps1, "seed {seed}: {worst}");
        assert_eq!(m.stabilization_time, Some(0.0));
    }
}
