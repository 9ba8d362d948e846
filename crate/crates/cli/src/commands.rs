//! The five subcommands. Each returns the process exit code.

use crate::config::{ConfigError, FaultySelection, RunConfig};
use crate::output::{num, opt_num, write_csv, write_json, Metadata};
use isbft::engine::{run_batch, RunMetrics, Scenario};
use isbft::netmodel::Strategy;
use isbft::params::{all_rows, report_rows, validate, DerivedParams, SystemParams, Violation};
use isbft::protocol::WriteSource;
use isbft::reduced::{distribution, run_seed, ReducedMode};
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Columns of the per-run metrics CSV.
pub const METRICS_HEADER: [&str; 8] = [
    "run_id",
    "seed",
    "case",
    "adversary",
    "stabilization_time_s",
    "censored",
    "max_precision_after_stab_s",
    "corrector_writes",
];

fn io_err(e: std::io::Error) -> ConfigError {
    ConfigError(format!("output: {e}"))
}

fn meta(cfg: &RunConfig, command: &str) -> Metadata {
    Metadata { command: command.into(), config_hash: cfg.hash(), seed: cfg.first_seed() }
}

fn print_violations(violations: &[Violation]) {
    if violations.is_empty() {
        println!("constraints: all rows hold");
    } else {
        println!("constraints: {} violated", violations.len());
        for v in violations {
            println!("  {v}");
        }
    }
}

/// Derives the constants, reporting failure as a validation error.
fn derive_or_report(sys: &SystemParams<f64>) -> Result<DerivedParams<f64>, i32> {
    isbft::params::derive_params(sys).map_err(|e| {
        println!("derivation failed: {e}");
        EXIT_INVALID
    })
}

pub fn derive(cfg: &RunConfig) -> Result<i32, ConfigError> {
    let d = match derive_or_report(&cfg.sys) {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    println!("case {}", cfg.case_label());
    for (name, value) in report_rows(&d) {
        if name == "k_pls" {
            println!("{name:<10} {value}");
        } else {
            println!("{name:<10} {value:.6}");
        }
    }
    let rows: Vec<Vec<String>> = all_rows(&d).into_iter().map(|(n, v)| vec![n, num(v)]).collect();
    let path =
        write_csv(&cfg.out_dir, "derive.csv", &meta(cfg, "derive"), &["name", "value"], &rows).map_err(io_err)?;
    println!("wrote {}", path.display());
    let violations = validate(&cfg.sys, &d);
    print_violations(&violations);
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_INVALID })
}

pub fn check(cfg: &RunConfig) -> Result<i32, ConfigError> {
    let d = match derive_or_report(&cfg.sys) {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let violations = validate(&cfg.sys, &d);
    print_violations(&violations);
    Ok(if violations.is_empty() { EXIT_OK } else { EXIT_INVALID })
}

fn scenario(cfg: &RunConfig, d: &DerivedParams<f64>, seed: u64, adversary: Strategy) -> Scenario {
    let mut sc = Scenario::new(seed, cfg.horizon_for(d)).with_adversary(adversary);
    if cfg.synchronized {
        sc = sc.synchronized(d.eps_b);
    }
    if let FaultySelection::Ids(ids) = &cfg.faulty {
        sc.faulty_ids = Some(ids.clone());
    }
    sc.span = cfg.span;
    sc.sample_interval = cfg.sample_interval;
    sc.keep_trace = cfg.trace;
    sc
}

/// One metrics CSV row.
pub fn metrics_row(run_id: usize, case: &str, adversary: &Strategy, m: &RunMetrics) -> Vec<String> {
    vec![
        run_id.to_string(),
        m.seed.to_string(),
        case.to_string(),
        adversary.to_string(),
        opt_num(m.stabilization_time),
        m.censored().to_string(),
        opt_num(m.max_precision_after_stab),
        m.corrector_writes.to_string(),
    ]
}

fn source_name(s: WriteSource) -> &'static str {
    match s {
        WriteSource::PulseSync => "pulse-sync",
        WriteSource::Corrector => "corrector",
        WriteSource::BasicSync => "basic-sync",
    }
}

/// Sampled clocks and clock writes of one run, in time order.
fn trace_rows(run_id: usize, m: &RunMetrics) -> Vec<Vec<String>> {
    let mut rows: Vec<(f64, Vec<String>)> = Vec::new();
    if let Some(tr) = &m.trace {
        for (t, vals) in tr.times.iter().zip(&tr.values) {
            for (node, v) in tr.nodes.iter().zip(vals) {
                rows.push((*t, vec![run_id.to_string(), num(*t), node.to_string(), v.to_string(), "sample".into()]));
            }
        }
    }
    for w in &m.writes {
        rows.push((
            w.time,
            vec![
                run_id.to_string(),
                num(w.time),
                w.node.to_string(),
                w.clock.to_string(),
                source_name(w.source).into(),
            ],
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    rows.into_iter().map(|(_, r)| r).collect()
}

fn summarize_runs(runs: &[RunMetrics]) {
    let done: Vec<f64> = runs.iter().filter_map(|m| m.stabilization_time).collect();
    let censored = runs.len() - done.len();
    match isbft::stats::summarize(&done) {
        Some(s) => println!(
            "runs {}: stabilized {}, censored {censored}; stabilization mean {:.6} s, p95 {:.6} s, max {:.6} s",
            runs.len(),
            done.len(),
            s.mean,
            s.p95,
            s.max
        ),
        None => println!("runs {}: stabilized 0, censored {censored}", runs.len()),
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<i32, ConfigError> {
    let d = match derive_or_report(&cfg.sys) {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let scenarios: Vec<Scenario> = cfg.seeds.iter().map(|&s| scenario(cfg, &d, s, cfg.adversary)).collect();
    let runs = run_batch(&cfg.sys, &d, &scenarios, cfg.threads).map_err(|e| ConfigError(e.to_string()))?;
    let label = cfg.case_label();
    let rows: Vec<Vec<String>> =
        runs.iter().enumerate().map(|(i, m)| metrics_row(i, &label, &cfg.adversary, m)).collect();
    let md = meta(cfg, "simulate");
    let path = write_csv(&cfg.out_dir, "metrics.csv", &md, &METRICS_HEADER, &rows).map_err(io_err)?;
    println!("wrote {}", path.display());
    if cfg.trace {
        let rows: Vec<Vec<String>> = runs.iter().enumerate().flat_map(|(i, m)| trace_rows(i, m)).collect();
        let path = write_csv(&cfg.out_dir, "trace.csv", &md, &["run_id", "t", "node", "clock", "event"], &rows)
            .map_err(io_err)?;
        println!("wrote {}", path.display());
    }
    summarize_runs(&runs);
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct HistogramFile {
    case: String,
    mode: &'static str,
    n: usize,
    mean: f64,
    std_err: f64,
    min: f64,
    p50: f64,
    p95: f64,
    max: f64,
    bin_edges: Vec<f64>,
    counts: Vec<u64>,
}

pub fn reduced(cfg: &RunConfig) -> Result<i32, ConfigError> {
    let d = match derive_or_report(&cfg.sys) {
        Ok(d) => d,
        Err(code) => return Ok(code),
    };
    let seed = cfg.first_seed();
    let dist = distribution(&cfg.sys, &d, cfg.mode, cfg.runs, seed, cfg.bins)
        .ok_or_else(|| ConfigError("runs must be at least 1".into()))?;
    let mode = match cfg.mode {
        ReducedMode::Average => "average",
        ReducedMode::WorstCase => "worst-case",
    };
    let rows: Vec<Vec<String>> = dist
        .runs
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), run_seed(seed, i as u64).to_string(), num(r.time)])
        .collect();
    let md = meta(cfg, "reduced");
    let path = write_csv(&cfg.out_dir, "reduced.csv", &md, &["run_id", "seed", "stabilization_time_s"], &rows)
        .map_err(io_err)?;
    println!("wrote {}", path.display());
    let s = dist.summary;
    let hist = HistogramFile {
        case: cfg.case_label(),
        mode,
        n: s.n,
        mean: s.mean,
        std_err: s.std_err,
        min: s.min,
        p50: s.p50,
        p95: s.p95,
        max: s.max,
        bin_edges: dist.histogram.bin_edges.clone(),
        counts: dist.histogram.counts.clone(),
    };
    let path = write_json(&cfg.out_dir, "histogram.json", &md, &hist).map_err(io_err)?;
    println!("wrote {}", path.display());
    println!(
        "case {} {mode}, {} runs: mean {:.6} s (se {:.6}), p50 {:.6} s, p95 {:.6} s, max {:.6} s; Delta1 {:.6} s",
        cfg.case_label(),
        s.n,
        s.mean,
        s.std_err,
        s.p50,
        s.p95,
        s.max,
        d.big_delta1
    );
    Ok(EXIT_OK)
}

pub fn sweep(cfg: &RunConfig) -> Result<i32, ConfigError> {
    if cfg.cases.is_empty() {
        return Err(ConfigError("sweep needs `case` or `cases`".into()));
    }
    let mut rows = Vec::new();
    for &case in &cfg.cases {
        let sys = cfg.params_for(case);
        let d = match derive_or_report(&sys) {
            Ok(d) => d,
            Err(code) => return Ok(code),
        };
        let mut labels = Vec::new();
        let mut scenarios = Vec::new();
        for adv in &cfg.adversaries {
            for &seed in &cfg.seeds {
                labels.push(*adv);
                scenarios.push(scenario(cfg, &d, seed, *adv));
            }
        }
        let runs = run_batch(&sys, &d, &scenarios, cfg.threads).map_err(|e| ConfigError(e.to_string()))?;
        println!("case {case}:");
        summarize_runs(&runs);
        for (m, adv) in runs.iter().zip(&labels) {
            rows.push(metrics_row(rows.len(), case.name(), adv, m));
        }
    }
    let path = write_csv(&cfg.out_dir, "sweep.csv", &meta(cfg, "sweep"), &METRICS_HEADER, &rows).map_err(io_err)?;
    println!("wrote {}", path.display());
    Ok(EXIT_OK)
}
