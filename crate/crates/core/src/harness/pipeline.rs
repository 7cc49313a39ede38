//! One channel realization through one scheme.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{energy_efficiency, Baseline, RunRecord, Status, SweepVar};
use crate::bd::{build_beamformers, decompose, decompose_unnulled, SumMode};
use crate::channel::{effective_channels, gen_channels, ChannelSet, PhaseVector};
use crate::config::{PhaseInit, SystemConfig};
use crate::error::Result;
use crate::hybridfactor::{hybridize, FactorOptions};
use crate::phaseopt::{coupling_vectors, optimize_phases, DescentOptions, TraceRow};
use crate::signalmodel::{check_constraints, sum_rate, BeamformerSet, RateReport};

/// RNG stream ids within one seed.
pub const STREAM_CHANNEL: u64 = 0;
pub const STREAM_PHASE_INIT: u64 = 1;
pub const STREAM_RANDOM_PHASE: u64 = 2;
/// Hybrid factorization uses this stream and the ones after it.
pub const STREAM_HYBRID: u64 = 3;

/// Tolerance for the per-run constraint check.
pub const CONSTRAINT_TOL: f64 = 1e-6;

pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

pub fn draw_channels(cfg: &SystemConfig, seed: u64) -> Result<ChannelSet> {
    gen_channels(cfg, &mut seeded_rng(seed, STREAM_CHANNEL))
}

pub fn initial_phases(cfg: &SystemConfig, seed: u64) -> PhaseVector {
    match cfg.phase_init {
        PhaseInit::Random => PhaseVector::random(cfg.n_irs, &mut seeded_rng(seed, STREAM_PHASE_INIT)),
        PhaseInit::Ones => PhaseVector::ones(cfg.n_irs),
    }
}

pub fn random_phases(cfg: &SystemConfig, seed: u64) -> PhaseVector {
    PhaseVector::random(cfg.n_irs, &mut seeded_rng(seed, STREAM_RANDOM_PHASE))
}

/// Everything one run produced, beyond the CSV row.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    /// Phase-optimization trace (empty for random-phase baselines).
    pub trace: Vec<TraceRow>,
    pub nu: Option<PhaseVector>,
    pub beamformers: Option<BeamformerSet>,
    pub rates: Option<RateReport>,
}

struct Success {
    nu: PhaseVector,
    trace: Vec<TraceRow>,
    set: BeamformerSet,
    rates: RateReport,
    s2: usize,
    tx_residual: f64,
}

fn execute(baseline: Baseline, cfg: &SystemConfig, seed: u64) -> Result<Success> {
    let ch = draw_channels(cfg, seed)?;
    let groups = cfg.groups()?;
    let (nu, trace) = if baseline.optimizes_phases() {
        let coupling = coupling_vectors(cfg, &ch)?;
        let res = optimize_phases(&coupling, &initial_phases(cfg, seed), &DescentOptions::default())?;
        (res.nu, res.trace)
    } else {
        (random_phases(cfg, seed), Vec::new())
    };
    let h = effective_channels(cfg, &ch, &nu)?;
    let decomp = if baseline.nulls_interference() {
        decompose(&h, &groups, cfg.zeta)?
    } else {
        decompose_unnulled(&h, &groups, cfg.zeta)?
    };
    let digital = build_beamformers(&decomp, &h, cfg.power_w(), SumMode::Group)?.set;
    let (set, s2, tx_residual) = if baseline.is_hybrid() {
        let out = hybridize(&digital, cfg.m_bs, cfg.m_ue, cfg.power_w(), seed, STREAM_HYBRID, &FactorOptions::default())?;
        (out.set, out.tx_iterations, out.tx_residual)
    } else {
        (digital, 0, 0.0)
    };
    let rates = sum_rate(&set, &h, &groups, cfg.noise_w(), cfg.bw_hz)?;
    Ok(Success { nu, trace, set, rates, s2, tx_residual })
}

/// Runs `baseline` on the channel realization of `seed`.
///
/// Failures (BD infeasibility included) come back as a record with a
/// non-`ok` status and zero rate; they never panic or abort a sweep.
pub fn run_baseline(
    baseline: Baseline,
    cfg: &SystemConfig,
    seed: u64,
    sweep_var: SweepVar,
    sweep_value: f64,
    record_timing: bool,
) -> RunOutput {
    let start = Instant::now();
    let outcome = execute(baseline, cfg, seed);
    let wall_ms = if record_timing { start.elapsed().as_millis() as u64 } else { 0 };
    let mut record = RunRecord {
        seed,
        baseline,
        sweep_var,
        sweep_value,
        sum_rate_bps: 0.0,
        group_rates: Vec::new(),
        s1_iters: 0,
        s2_iters: 0,
        energy_eff_bps_per_w: 0.0,
        status: Status::Ok,
        wall_ms,
        max_inter_ratio: f64::NAN,
        max_intra_ratio: f64::NAN,
        tx_residual: f64::NAN,
        error: None,
    };
    match outcome {
        Ok(s) => {
            let cons = check_constraints(&s.set, cfg.power_w(), Some(&s.nu));
            if !cons.is_compliant(CONSTRAINT_TOL) {
                record.status = Status::ConstraintViolation;
                record.error = Some(format!("{cons:?}"));
            }
            record.sum_rate_bps = s.rates.sum_rate;
            record.group_rates = s.rates.group_rates.clone();
            record.s1_iters = s.trace.len().saturating_sub(1);
            record.s2_iters = s.s2;
            record.energy_eff_bps_per_w = energy_efficiency(s.rates.sum_rate, cfg);
            record.max_inter_ratio = s.rates.max_inter_ratio();
            record.max_intra_ratio = s.rates.max_intra_ratio();
            record.tx_residual = s.tx_residual;
            RunOutput { record, trace: s.trace, nu: Some(s.nu), beamformers: Some(s.set), rates: Some(s.rates) }
        }
        Err(e) => {
            record.status = Status::from_error(&e);
            record.error = Some(e.to_string());
            RunOutput { record, trace: Vec::new(), nu: None, beamformers: None, rates: None }
        }
    }
}

/// The full pipeline: optimized phases, BD, hybrid factorization.
pub fn run_proposed(cfg: &SystemConfig, seed: u64) -> RunOutput {
    run_baseline(Baseline::Proposed, cfg, seed, SweepVar::None, 0.0, false)
}
