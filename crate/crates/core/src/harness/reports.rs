//! Figure-style reports: surrogate accuracy, rate CDFs, energy efficiency
//! and optimizer convergence.

use rayon::prelude::*;
use serde::Serialize;

use super::pipeline::{draw_channels, initial_phases};
use super::sweep::{sweep, SweepOutput};
use super::{Baseline, ExperimentSpec, Status, SweepVar};
use crate::bd::decompose;
use crate::channel::effective_channels;
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::phaseopt::{coupling_vectors, optimize_phases, sigma_approx, DescentOptions};

pub const THEOREM1_ANTENNAS: [usize; 3] = [16, 32, 64];
pub const ENERGY_POWERS_DBM: [f64; 5] = [10.0, 20.0, 30.0, 40.0, 50.0];
pub const CONVERGENCE_GROUPS: [usize; 4] = [1, 2, 3, 4];

/// Surrogate accuracy of one user at one array size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem1Row {
    pub seed: u64,
    pub n_antennas: usize,
    pub user: usize,
    pub true_fro: f64,
    pub approx_fro: f64,
    pub rel_gap: f64,
    pub status: &'static str,
}

/// `| ||Sigma_true||_F - ||Sigma_approx||_F | / ||Sigma_true||_F` per user,
/// both evaluated at the optimized phases.
pub fn theorem1_report(cfg: &SystemConfig, seeds: usize, antennas: &[usize]) -> Result<Vec<Theorem1Row>> {
    let jobs: Vec<(u64, usize)> = (0..seeds)
        .flat_map(|i| antennas.iter().map(move |&n| (cfg.seed.wrapping_add(i as u64), n)))
        .collect();
    let rows: Vec<Vec<Theorem1Row>> = jobs
        .into_par_iter()
        .map(|(seed, n)| {
            let c = cfg.with_antennas(n);
            c.validate()?;
            theorem1_rows(&c, seed)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn theorem1_rows(cfg: &SystemConfig, seed: u64) -> Result<Vec<Theorem1Row>> {
    let ch = draw_channels(cfg, seed)?;
    let coupling = coupling_vectors(cfg, &ch)?;
    let nu = optimize_phases(&coupling, &initial_phases(cfg, seed), &DescentOptions::default())?.nu;
    let approx = sigma_approx(&coupling, &nu);
    let h = effective_channels(cfg, &ch, &nu)?;
    let decomp = match decompose(&h, &cfg.groups()?, cfg.zeta) {
        Ok(d) => Some(d),
        Err(Error::BdInfeasible(_)) => None,
        Err(e) => return Err(e),
    };
    Ok((0..cfg.k_users)
        .map(|k| {
            let approx_fro = approx[k].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let (true_fro, status) = match &decomp {
                Some(d) => (d.sigma[k].iter().map(|s| s * s).sum::<f64>().sqrt(), Status::Ok),
                None => (f64::NAN, Status::BdInfeasible),
            };
            Theorem1Row {
                seed,
                n_antennas: cfg.n_bs,
                user: k,
                true_fro,
                approx_fro,
                rel_gap: (true_fro - approx_fro).abs() / true_fro,
                status: status.as_str(),
            }
        })
        .collect())
}

/// Mean relative gap per array size, in the order of `antennas`.
pub fn mean_gaps(rows: &[Theorem1Row], antennas: &[usize]) -> Vec<f64> {
    antennas
        .iter()
        .map(|&n| {
            let g: Vec<f64> = rows.iter().filter(|r| r.n_antennas == n && r.rel_gap.is_finite()).map(|r| r.rel_gap).collect();
            g.iter().sum::<f64>() / g.len() as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfRow {
    pub baseline: &'static str,
    pub rank: usize,
    pub sum_rate_bps: f64,
    pub cumulative: f64,
}

/// Empirical sum-rate CDF per baseline over successful runs.
pub fn cdf_report(cfg: &SystemConfig, seeds: usize, baselines: &[Baseline]) -> Result<Vec<CdfRow>> {
    if seeds < 2 {
        return Err(Error::Config("a CDF needs at least 2 seeds".into()));
    }
    let out = sweep(&ExperimentSpec::new(cfg.clone(), SweepVar::None, baselines.to_vec(), seeds))?;
    let mut rows = Vec::new();
    let mut ids: Vec<Baseline> = baselines.to_vec();
    ids.sort();
    ids.dedup();
    for b in ids {
        let mut rates: Vec<f64> = out
            .records
            .iter()
            .filter(|r| r.baseline == b && r.status == Status::Ok)
            .map(|r| r.sum_rate_bps)
            .collect();
        rates.sort_by(f64::total_cmp);
        let n = rates.len();
        rows.extend(rates.into_iter().enumerate().map(|(i, r)| CdfRow {
            baseline: b.id(),
            rank: i + 1,
            sum_rate_bps: r,
            cumulative: (i + 1) as f64 / n as f64,
        }));
    }
    Ok(rows)
}

/// Power sweep whose rows carry the energy efficiency column.
pub fn energy_report(cfg: &SystemConfig, powers_dbm: &[f64], seeds: usize, baselines: &[Baseline]) -> Result<SweepOutput> {
    let mut spec = ExperimentSpec::new(cfg.clone(), SweepVar::Power, baselines.to_vec(), seeds);
    spec.values = powers_dbm.to_vec();
    sweep(&spec)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTraceRow {
    pub h_groups: usize,
    pub seed: u64,
    pub iter: usize,
    pub f_value: f64,
    pub step_size: f64,
    pub grad_norm: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRow {
    pub h_groups: usize,
    pub runs: usize,
    pub mean_s1: f64,
    pub max_s1: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceReport {
    pub traces: Vec<ConvergenceTraceRow>,
    pub iterations: Vec<IterationRow>,
}

/// Phase-optimizer traces and mean `S_1` for each group count.
///
/// Only the phase optimizer runs here, so group counts for which BD would be
/// infeasible are still reported.
pub fn convergence_report(cfg: &SystemConfig, seeds: usize, group_counts: &[usize]) -> Result<ConvergenceReport> {
    let mut report = ConvergenceReport::default();
    for &hg in group_counts {
        let c = cfg.with_groups(hg);
        c.validate()?;
        let runs: Vec<Vec<ConvergenceTraceRow>> = (0..seeds)
            .into_par_iter()
            .map(|i| {
                let seed = cfg.seed.wrapping_add(i as u64);
                let coupling = coupling_vectors(&c, &draw_channels(&c, seed)?)?;
                let res = optimize_phases(&coupling, &initial_phases(&c, seed), &DescentOptions::default())?;
                Ok(res
                    .trace
                    .iter()
                    .map(|t| ConvergenceTraceRow {
                        h_groups: hg,
                        seed,
                        iter: t.iter,
                        f_value: t.f_value,
                        step_size: t.step_size,
                        grad_norm: t.grad_norm,
                        backtracks: t.backtracks,
                    })
                    .collect())
            })
            .collect::<Result<_>>()?;
        let s1: Vec<usize> = runs.iter().map(|t| t.len().saturating_sub(1)).collect();
        report.iterations.push(IterationRow {
            h_groups: hg,
            runs: s1.len(),
            mean_s1: s1.iter().sum::<usize>() as f64 / s1.len().max(1) as f64,
            max_s1: s1.iter().copied().max().unwrap_or(0),
        });
        report.traces.extend(runs.into_iter().flatten());
    }
    Ok(report)
}
