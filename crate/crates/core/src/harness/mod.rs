//! End-to-end pipeline, baselines, Monte Carlo sweeps, reports and CSV I/O.

pub mod io;
pub mod pipeline;
pub mod reports;
pub mod sweep;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::config::SystemConfig;
use crate::error::{Error, Result};

pub use pipeline::{run_baseline, run_proposed, RunOutput};
pub use sweep::sweep;

/// Schemes compared in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Baseline {
    /// Optimized phases, BD, hybrid factorization.
    Proposed,
    /// Optimized phases, BD, fully digital.
    A,
    /// Random phases, BD, hybrid.
    B,
    /// Random phases, BD, fully digital.
    C,
    /// Optimized phases, eigen-beamforming without nulling (surrogate), hybrid.
    D,
    /// Optimized phases, eigen-beamforming without nulling (surrogate), digital.
    E,
}

impl Baseline {
    pub const ALL: [Baseline; 6] = [Baseline::Proposed, Baseline::A, Baseline::B, Baseline::C, Baseline::D, Baseline::E];

    pub fn id(self) -> &'static str {
        match self {
            Baseline::Proposed => "proposed",
            Baseline::A => "a",
            Baseline::B => "b",
            Baseline::C => "c",
            Baseline::D => "d",
            Baseline::E => "e",
        }
    }

    pub fn optimizes_phases(self) -> bool {
        !matches!(self, Baseline::B | Baseline::C)
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Baseline::Proposed | Baseline::B | Baseline::D)
    }

    pub fn nulls_interference(self) -> bool {
        !matches!(self, Baseline::D | Baseline::E)
    }

    /// Comma-separated list, e.g. `"a,b,proposed"`.
    pub fn parse_list(s: &str) -> Result<Vec<Baseline>> {
        let mut out: Vec<Baseline> = s
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_>>()?;
        if out.is_empty() {
            return Err(Error::Config("no baselines given".into()));
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline '{s}'")))
    }
}

/// Quantity varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepVar {
    None,
    Power,
    Elements,
    Streams,
    Groups,
}

impl SweepVar {
    /// Column value in the CSV.
    pub fn column_name(self) -> &'static str {
        match self {
            SweepVar::None => "none",
            SweepVar::Power => "power_dbm",
            SweepVar::Elements => "n_irs",
            SweepVar::Streams => "zeta",
            SweepVar::Groups => "h_groups",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepVar::None => vec![0.0],
            SweepVar::Power => vec![20.0, 30.0, 40.0, 50.0],
            SweepVar::Elements => vec![16.0, 64.0, 144.0],
            SweepVar::Streams => vec![1.0, 2.0],
            SweepVar::Groups => vec![1.0, 2.0, 3.0, 4.0],
        }
    }

    /// `cfg` with the swept quantity set to `v`.
    pub fn apply(self, cfg: &SystemConfig, v: f64) -> Result<SystemConfig> {
        let as_count = || -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{} must be a positive integer, got {v}", self.column_name())))
            }
        };
        let out = match self {
            SweepVar::None => cfg.clone(),
            SweepVar::Power => cfg.with_power_dbm(v),
            SweepVar::Elements => cfg.with_irs_elements(as_count()?)?,
            SweepVar::Streams => cfg.with_streams(as_count()?),
            SweepVar::Groups => cfg.with_groups(as_count()?),
        };
        out.validate()?;
        Ok(out)
    }

    /// Value recorded for an unswept run.
    pub fn current_value(self, cfg: &SystemConfig) -> f64 {
        match self {
            SweepVar::None => 0.0,
            SweepVar::Power => cfg.power_dbm,
            SweepVar::Elements => cfg.n_irs as f64,
            SweepVar::Streams => cfg.zeta as f64,
            SweepVar::Groups => cfg.h_groups as f64,
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(SweepVar::None),
            "power" => Ok(SweepVar::Power),
            "elements" => Ok(SweepVar::Elements),
            "streams" => Ok(SweepVar::Streams),
            "groups" => Ok(SweepVar::Groups),
            _ => Err(Error::Config(format!("unknown sweep variable '{s}'"))),
        }
    }
}

/// One Monte Carlo experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub sweep_var: SweepVar,
    pub values: Vec<f64>,
    pub baselines: Vec<Baseline>,
    pub seeds: usize,
    /// Run `i` uses seed `base.seed + i`.
    pub record_timing: bool,
    /// Keep per-iteration phase-optimization traces.
    pub keep_traces: bool,
}

impl ExperimentSpec {
    pub fn new(base: SystemConfig, sweep_var: SweepVar, baselines: Vec<Baseline>, seeds: usize) -> Self {
        Self {
            base,
            values: sweep_var.default_values(),
            sweep_var,
            baselines,
            seeds,
            record_timing: false,
            keep_traces: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.seeds == 0 {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.baselines.is_empty() {
            return Err(Error::Config("at least one baseline is required".into()));
        }
        if self.values.is_empty() || self.values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep values must be non-empty and strictly increasing".into()));
        }
        Ok(())
    }

    pub fn seed(&self, index: usize) -> u64 {
        self.base.seed.wrapping_add(index as u64)
    }
}

/// Outcome label of one run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Status {
    Ok,
    BdInfeasible,
    ConfigError,
    ConstraintViolation,
    Failed,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::BdInfeasible => "bd_infeasible",
            Status::ConfigError => "config_error",
            Status::ConstraintViolation => "constraint_violation",
            Status::Failed => "failed",
        }
    }

    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::BdInfeasible(_) => Status::BdInfeasible,
            Error::Config(_) | Error::NotEnoughPaths(_) => Status::ConfigError,
            _ => Status::Failed,
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub baseline: Baseline,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub sum_rate_bps: f64,
    pub group_rates: Vec<f64>,
    pub s1_iters: usize,
    pub s2_iters: usize,
    pub energy_eff_bps_per_w: f64,
    pub status: Status,
    pub wall_ms: u64,
    /// Largest inter-group interference over signal.
    pub max_inter_ratio: f64,
    /// Largest intra-group interference over signal.
    pub max_intra_ratio: f64,
    /// Relative transmit factorization residual (hybrid runs).
    pub tx_residual: f64,
    pub error: Option<String>,
}

/// `sum_rate / (P + P_static + M * P_element)` in bit/s/W.
pub fn energy_efficiency(sum_rate_bps: f64, cfg: &SystemConfig) -> f64 {
    use crate::config::dbm_to_w;
    let total = cfg.power_w() + dbm_to_w(cfg.p_bs_static_dbm) + cfg.n_irs as f64 * dbm_to_w(cfg.p_element_dbm);
    sum_rate_bps / total
}
