//! CSV writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! values always produce equal bytes.

use std::io::Write;

use serde::Serialize;

use super::sweep::TaggedTrace;
use super::RunRecord;
use crate::error::Result;

pub const RECORD_HEADER: [&str; 10] = [
    "seed",
    "baseline",
    "sweep_var",
    "sweep_value",
    "sum_rate_bps",
    "s1_iters",
    "s2_iters",
    "energy_eff_bps_per_w",
    "status",
    "wall_ms",
];

pub const TRACE_HEADER: [&str; 8] =
    ["seed", "baseline", "sweep_value", "iter", "f_value", "step_size", "grad_norm", "backtracks"];

pub fn write_records<W: Write>(w: W, records: &[RunRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(RECORD_HEADER)?;
    for r in records {
        out.write_record([
            r.seed.to_string(),
            r.baseline.id().to_string(),
            r.sweep_var.column_name().to_string(),
            r.sweep_value.to_string(),
            r.sum_rate_bps.to_string(),
            r.s1_iters.to_string(),
            r.s2_iters.to_string(),
            r.energy_eff_bps_per_w.to_string(),
            r.status.as_str().to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_traces<W: Write>(w: W, traces: &[TaggedTrace]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    for t in traces {
        out.write_record([
            t.seed.to_string(),
            t.baseline.id().to_string(),
            t.sweep_value.to_string(),
            t.row.iter.to_string(),
            t.row.f_value.to_string(),
            t.row.step_size.to_string(),
            t.row.grad_norm.to_string(),
            t.row.backtracks.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Serializes report rows; the header comes from the row type's field names.
pub fn write_rows<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn records_to_string(records: &[RunRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(&mut buf, records)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{Baseline, Status, SweepVar};

    fn record() -> RunRecord {
        RunRecord {
            seed: 7,
            baseline: Baseline::Proposed,
            sweep_var: SweepVar::Power,
            sweep_value: 30.0,
            sum_rate_bps: 1.5e9,
            group_rates: vec![],
            s1_iters: 12,
            s2_iters: 3,
            energy_eff_bps_per_w: 0.1,
            status: Status::Ok,
            wall_ms: 0,
            max_inter_ratio: 0.0,
            max_intra_ratio: 0.0,
            tx_residual: 0.0,
            error: None,
        }
    }

    #[test]
    fn header_and_row_format() {
        let s = records_to_string(&[record()]).unwrap();
        let mut lines = s.lines();
        assert_eq!(
            lines.next().unwrap(),
            "seed,baseline,sweep_var,sweep_value,sum_rate_bps,s1_iters,s2_iters,energy_eff_bps_per_w,status,wall_ms"
        );
        assert_eq!(lines.next().unwrap(), "7,proposed,power_dbm,30,1500000000,12,3,0.1,ok,0");
        assert!(lines.next().is_none());
    }

    #[test]
    fn empty_still_has_header() {
        assert_eq!(records_to_string(&[]).unwrap().lines().count(), 1);
    }
}
