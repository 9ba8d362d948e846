//! Flat configuration file, flag overrides, and their resolution into a
//! [`RunConfig`].
//!
//! Every key of the file is also a long flag of the same name with
//! underscores turned into dashes; a flag wins over the file.

use clap::Args;
use isbft::engine::SpanMode;
use isbft::netmodel::{NodeId, Strategy};
use isbft::params::{derive_params, preset, Case, DerivedParams, SystemParams};
use isbft::reduced::ReducedMode;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ISBFT_OUT_DIR";

/// Usage or configuration error; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Keys of the configuration file; all optional. Durations in seconds.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Preset configuration: I, II, III or IV.
    #[arg(long)]
    pub case: Option<String>,
    #[arg(long)]
    pub n0: Option<usize>,
    #[arg(long)]
    pub f0: Option<usize>,
    #[arg(long)]
    pub n1: Option<usize>,
    #[arg(long)]
    pub f1: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub eps2: Option<f64>,
    #[arg(long)]
    pub delta_p: Option<f64>,
    #[arg(long)]
    pub delta_d: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    /// Stabilization time of the underlying reading protocol.
    #[arg(long)]
    pub big_delta0: Option<f64>,
    #[arg(long)]
    pub e0: Option<f64>,
    /// Nominal hardware tick.
    #[arg(long)]
    pub tick: Option<f64>,
    /// Adversary strategy, optionally with an argument: `crash-at-t:0.5`.
    #[arg(long)]
    pub adversary: Option<String>,
    /// `random`, or comma-separated faulty node ids (terminals first).
    #[arg(long)]
    pub faulty: Option<String>,
    /// Single seed, or the first seed when `seeds` is a count.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds starting at `seed`.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Explicit seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
    /// Simulated seconds per run; defaults to three times Delta1.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// `arbitrary` or `synchronized`.
    #[arg(long)]
    pub init: Option<String>,
    /// Updating-span model: `uniform` or `instant`.
    #[arg(long)]
    pub span: Option<String>,
    /// Clock sampling period; defaults to tau0 / 10.
    #[arg(long)]
    pub sample_interval: Option<f64>,
    /// Output directory; defaults to $ISBFT_OUT_DIR, then `.`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also export the per-run clock trace.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub trace: Option<bool>,
    /// Worker threads; 0 means the machine's parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Reduced-model run count.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Histogram bin count.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Reduced-model mode: `average` or `worst-case`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Sweep cases.
    #[arg(long, value_delimiter = ',')]
    pub cases: Option<Vec<String>>,
    /// Sweep adversaries.
    #[arg(long, value_delimiter = ',')]
    pub adversaries: Option<Vec<String>>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        if file.case.is_some() && file.has_params() {
            return err("a config file sets either `case` or explicit parameters, not both");
        }
        Ok(file)
    }

    fn has_params(&self) -> bool {
        self.params_set().iter().any(|(_, set)| *set)
    }

    fn params_set(&self) -> [(&'static str, bool); 13] {
        [
            ("n0", self.n0.is_some()),
            ("f0", self.f0.is_some()),
            ("n1", self.n1.is_some()),
            ("f1", self.f1.is_some()),
            ("rho", self.rho.is_some()),
            ("eps0", self.eps0.is_some()),
            ("eps2", self.eps2.is_some()),
            ("delta_p", self.delta_p.is_some()),
            ("delta_d", self.delta_d.is_some()),
            ("delta0", self.delta0.is_some()),
            ("big_delta0", self.big_delta0.is_some()),
            ("e0", self.e0.is_some()),
            ("tick", self.tick.is_some()),
        ]
    }

    /// `self` with every key set in `top` replaced.
    pub fn overlay(mut self, top: &ConfigFile) -> Self {
        overlay!(
            self,
            top,
            case,
            n0,
            f0,
            n1,
            f1,
            rho,
            eps0,
            eps2,
            delta_p,
            delta_d,
            delta0,
            big_delta0,
            e0,
            tick,
            adversary,
            faulty,
            seed,
            seeds,
            seed_list,
            horizon,
            init,
            span,
            sample_interval,
            out_dir,
            trace,
            threads,
            runs,
            bins,
            mode,
            cases,
            adversaries
        );
        self
    }

    /// Parameters of `case` (or the explicit block when `None`) with the
    /// individually set keys applied on top.
    fn system_params(&self, case: Option<Case>) -> Result<SystemParams<f64>, ConfigError> {
        let mut sys = match case {
            Some(c) => preset::<f64>(c),
            None => {
                let missing: Vec<&str> = self.params_set().iter().filter(|(_, s)| !s).map(|(n, _)| *n).collect();
                if missing.len() == 13 {
                    return err("no `case` and no explicit parameters given");
                }
                if !missing.is_empty() {
                    return err(format!("explicit parameters incomplete, missing: {}", missing.join(", ")));
                }
                preset::<f64>(Case::I)
            }
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { sys.$f = v; } )* };
        }
        set!(n0, f0, n1, f1, rho, eps0, eps2, delta_p, delta_d, delta0, big_delta0, e0, tick);
        Ok(sys)
    }

    pub fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let listed = match &self.cases {
            Some(list) => list.iter().map(|c| parse_case(c)).collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        // A sweep may name only its case list; the first entry then stands in.
        let case = match self.case.as_deref() {
            Some(c) => Some(parse_case(c)?),
            None if !self.has_params() => listed.first().copied(),
            None => None,
        };
        let sys = self.system_params(case)?;
        let adversary = parse_adversary(self.adversary.as_deref().unwrap_or("silent"))?;
        let faulty = match self.faulty.as_deref().map(str::trim) {
            None | Some("random") => FaultySelection::Random,
            Some(list) => FaultySelection::Ids(
                list.split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse::<NodeId>().map_err(|e| ConfigError(format!("faulty id {s:?}: {e}"))))
                    .collect::<Result<_, _>>()?,
            ),
        };
        let first = self.seed.unwrap_or(0);
        let seeds = match (&self.seed_list, self.seeds) {
            (Some(list), _) if list.is_empty() => return err("seed_list is empty"),
            (Some(list), _) => list.clone(),
            (None, Some(0)) => return err("seeds must be at least 1"),
            (None, Some(n)) => (0..n as u64).map(|i| first.wrapping_add(i)).collect(),
            (None, None) => vec![first],
        };
        if let Some(h) = self.horizon {
            if !(h.is_finite() && h > 0.0) {
                return err(format!("horizon must be positive, got {h}"));
            }
        }
        if let Some(s) = self.sample_interval {
            if !(s.is_finite() && s > 0.0) {
                return err(format!("sample_interval must be positive, got {s}"));
            }
        }
        let synchronized = match self.init.as_deref().unwrap_or("arbitrary") {
            "arbitrary" => false,
            "synchronized" => true,
            other => return err(format!("unknown init {other:?}; expected arbitrary or synchronized")),
        };
        let span = match self.span.as_deref().unwrap_or("uniform") {
            "uniform" => SpanMode::Uniform,
            "instant" => SpanMode::Instant,
            other => return err(format!("unknown span {other:?}; expected uniform or instant")),
        };
        let mode = match self.mode.as_deref().unwrap_or("average") {
            "average" => ReducedMode::Average,
            "worst-case" => ReducedMode::WorstCase,
            other => return err(format!("unknown mode {other:?}; expected average or worst-case")),
        };
        let runs = self.runs.unwrap_or(10_000);
        if runs == 0 {
            return err("runs must be at least 1");
        }
        let bins = self.bins.unwrap_or(50);
        if bins == 0 {
            return err("bins must be at least 1");
        }
        let cases = if self.cases.is_some() { listed } else { case.into_iter().collect() };
        let adversaries = match &self.adversaries {
            Some(list) => list.iter().map(|a| parse_adversary(a)).collect::<Result<Vec<_>, _>>()?,
            None => vec![adversary],
        };
        let out_dir = self
            .out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(RunConfig {
            file: self.clone(),
            case,
            sys,
            adversary,
            faulty,
            seeds,
            horizon: self.horizon,
            synchronized,
            span,
            sample_interval: self.sample_interval,
            out_dir,
            trace: self.trace.unwrap_or(false),
            threads: self.threads.unwrap_or(0),
            runs,
            bins,
            mode,
            cases,
            adversaries,
        })
    }
}

fn parse_case(s: &str) -> Result<Case, ConfigError> {
    s.parse().map_err(|e: isbft::params::ParamsError| ConfigError(e.to_string()))
}

fn parse_adversary(s: &str) -> Result<Strategy, ConfigError> {
    s.parse().map_err(ConfigError)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaultySelection {
    Random,
    Ids(Vec<NodeId>),
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    file: ConfigFile,
    /// `None` for an explicit parameter block.
    pub case: Option<Case>,
    pub sys: SystemParams<f64>,
    pub adversary: Strategy,
    pub faulty: FaultySelection,
    pub seeds: Vec<u64>,
    pub horizon: Option<f64>,
    pub synchronized: bool,
    pub span: SpanMode,
    pub sample_interval: Option<f64>,
    pub out_dir: PathBuf,
    pub trace: bool,
    pub threads: usize,
    pub runs: usize,
    pub bins: usize,
    pub mode: ReducedMode,
    pub cases: Vec<Case>,
    pub adversaries: Vec<Strategy>,
}

impl RunConfig {
    /// Parameters of a sweep case with the individually set keys applied.
    pub fn params_for(&self, case: Case) -> SystemParams<f64> {
        self.file.system_params(Some(case)).expect("preset parameters always resolve")
    }

    pub fn case_label(&self) -> String {
        self.case.map_or_else(|| "custom".to_string(), |c| c.to_string())
    }

    pub fn first_seed(&self) -> u64 {
        self.seeds[0]
    }

    /// Horizon for one run: the configured value or three times Delta1.
    pub fn horizon_for(&self, d: &DerivedParams<f64>) -> f64 {
        self.horizon.unwrap_or(3.0 * d.big_delta1)
    }

    /// Derived parameters of the resolved system.
    pub fn derived(&self) -> Result<DerivedParams<f64>, isbft::params::ParamsError> {
        derive_params(&self.sys)
    }

    /// Canonical text of everything that affects results; output location
    /// and worker count are excluded.
    pub fn canonical(&self) -> String {
        let s = &self.sys;
        let mut out = String::new();
        let _ = writeln!(out, "case={}", self.case_label());
        let _ = writeln!(out, "n0={} f0={} n1={} f1={}", s.n0, s.f0, s.n1, s.f1);
        let _ = writeln!(
            out,
            "rho={:e} eps0={:e} eps2={:e} delta_p={:e} delta_d={:e} delta0={:e} big_delta0={:e} e0={:e} tick={:e}",
            s.rho, s.eps0, s.eps2, s.delta_p, s.delta_d, s.delta0, s.big_delta0, s.e0, s.tick
        );
        let _ = writeln!(out, "adversary={:?} faulty={:?}", self.adversary, self.faulty);
        let _ = writeln!(out, "seeds={:?}", self.seeds);
        let _ = writeln!(out, "horizon={:?} sample_interval={:?}", self.horizon, self.sample_interval);
        let _ = writeln!(out, "synchronized={} span={:?}", self.synchronized, self.span);
        let _ = writeln!(out, "runs={} bins={} mode={:?}", self.runs, self.bins, self.mode);
        let _ = writeln!(out, "cases={:?} adversaries={:?}", self.cases, self.adversaries);
        out
    }

    /// SHA-256 of [`RunConfig::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let file = ConfigFile::parse("case = \"I\"\nseed = 3\nhorizon = 2.0\n").unwrap();
        let flags = ConfigFile { horizon: Some(0.5), case: Some("IV".into()), ..Default::default() };
        let cfg = file.overlay(&flags).resolve().unwrap();
        assert_eq!(cfg.case, Some(Case::IV));
        assert_eq!(cfg.horizon, Some(0.5));
        assert_eq!(cfg.seeds, vec![3]);
    }

    #[test]
    fn file_rejects_case_with_parameters_and_unknown_keys() {
        assert!(ConfigFile::parse("case = \"I\"\nrho = 1e-5\n").is_err());
        assert!(ConfigFile::parse("colour = 1\n").is_err());
    }

    #[test]
    fn explicit_block_must_be_complete() {
        let partial = ConfigFile { rho: Some(1e-5), ..Default::default() };
        assert!(partial.resolve().unwrap_err().0.contains("missing"));
        assert!(ConfigFile::default().resolve().is_err());
    }

    #[test]
    fn seeds_count_list_and_zero() {
        let base = ConfigFile { case: Some("I".into()), seed: Some(5), seeds: Some(3), ..Default::default() };
        assert_eq!(base.resolve().unwrap().seeds, vec![5, 6, 7]);
        let zero = ConfigFile { seeds: Some(0), ..base.clone() };
        assert!(zero.resolve().is_err());
        let list = ConfigFile { seed_list: Some(vec![9, 1]), ..base };
        assert_eq!(list.resolve().unwrap().seeds, vec![9, 1]);
    }

    #[test]
    fn hash_tracks_results_not_location() {
        let a = ConfigFile { case: Some("II".into()), ..Default::default() };
        let b = ConfigFile { out_dir: Some("elsewhere".into()), threads: Some(3), ..a.clone() };
        let c = ConfigFile { seed: Some(1), ..a.clone() };
        let h = |f: &ConfigFile| f.resolve().unwrap().hash();
        assert_eq!(h(&a), h(&b));
        assert_ne!(h(&a), h(&c));
        assert_eq!(h(&a).len(), 64);
    }

    #[test]
    fn bad_values_are_config_errors() {
        let base = ConfigFile { case: Some("I".into()), ..Default::default() };
        for bad in [
            ConfigFile { runs: Some(0), ..base.clone() },
            ConfigFile { case: Some("V".into()), ..base.clone() },
            ConfigFile { horizon: Some(-1.0), ..base.clone() },
            ConfigFile { adversary: Some("sneaky".into()), ..base.clone() },
            ConfigFile { faulty: Some("0,x".into()), ..base.clone() },
        ] {
            assert!(bad.resolve().is_err(), "{bad:?}");
        }
    }
}
