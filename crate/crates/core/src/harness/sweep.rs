//! Cartesian sweeps over (sweep value × baseline × seed).

use rayon::prelude::*;

use super::pipeline::run_baseline;
use super::{ExperimentSpec, RunRecord, Status};
use crate::error::Result;
use crate::phaseopt::TraceRow;

/// One trace row tagged with the run it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedTrace {
    pub seed: u64,
    pub baseline: super::Baseline,
    pub sweep_value: f64,
    pub row: TraceRow,
}

#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    /// Ordered by sweep value, then baseline, then seed.
    pub records: Vec<RunRecord>,
    /// Empty unless `keep_traces` was set.
    pub traces: Vec<TaggedTrace>,
}

impl SweepOutput {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status != Status::Ok).count()
    }
}

/// Runs every (value, baseline, seed) job on the rayon pool.
///
/// Each job derives all of its randomness from its own seed, so the output
/// does not depend on scheduling. A sweep value that yields an invalid
/// configuration produces `config_error` rows instead of aborting.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let mut baselines = spec.baselines.clone();
    baselines.sort();
    baselines.dedup();
    let cfgs: Vec<_> = spec.values.iter().map(|&v| spec.sweep_var.apply(&spec.base, v).map_err(|e| e.to_string())).collect();
    let mut jobs = Vec::with_capacity(spec.values.len() * baselines.len() * spec.seeds);
    for (cfg, &value) in cfgs.iter().zip(&spec.values) {
        for &b in &baselines {
            for i in 0..spec.seeds {
                jobs.push((cfg.as_ref(), value, b, spec.seed(i)));
            }
        }
    }
    let outputs: Vec<_> = jobs
        .into_par_iter()
        .map(|(cfg, value, b, seed)| match cfg {
            Ok(cfg) => {
                let mut out = run_baseline(b, cfg, seed, spec.sweep_var, value, spec.record_timing);
                if !spec.keep_traces {
                    out.trace.clear();
                }
                (out.record, out.trace)
            }
            Err(e) => (config_error_record(spec, b, seed, value, e.clone()), Vec::new()),
        })
        .collect();
    let mut result = SweepOutput::default();
    for (rec, trace) in outputs {
        result.traces.extend(trace.into_iter().map(|row| TaggedTrace {
            seed: rec.seed,
            baseline: rec.baseline,
            sweep_value: rec.sweep_value,
            row,
        }));
        result.records.push(rec);
    }
    Ok(result)
}

fn config_error_record(spec: &ExperimentSpec, b: super::Baseline, seed: u64, value: f64, msg: String) -> RunRecord {
    RunRecord {
        seed,
        baseline: b,
        sweep_var: spec.sweep_var,
        sweep_value: value,
        sum_rate_bps: 0.0,
        group_rates: Vec::new(),
        s1_iters: 0,
        s2_iters: 0,
        energy_eff_bps_per_w: 0.0,
        status: Status::ConfigError,
        wall_ms: 0,
        max_inter_ratio: f64::NAN,
        max_intra_ratio: f64::NAN,
        tx_residual: f64::NAN,
        error: Some(msg),
    }
}
